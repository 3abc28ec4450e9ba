//! Scenario configuration: the JSON schema, its validation, and decoding
//! into library objects.

use std::fmt;

use diagsing::evolution::standard_probes;
use diagsing::functionals::packet;
use diagsing::model::{threshold_form_factor, ModelOptions};
use diagsing::spectral::PathSpec;
use diagsing::{build_grid, EnergyGrid, Expr, ObservableKernel, ScatteringModel, StateFunctional, Term};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Grids beyond this size make the dense oracle impractical.
pub const MAX_NODES: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub model: ModelSpec,
    pub state: StateSpec,
    pub observables: Vec<ObservableSpec>,
    pub times: Vec<f64>,
    pub runs: Vec<RunKind>,
    pub path: PathSpec,
    /// Seeds the random instances of the verification suite only.
    pub seed: u64,
    /// Worker threads; a hint, results do not depend on it.
    pub threads: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            model: ModelSpec::default(),
            state: StateSpec::default(),
            observables: ["gauss", "decay", "rank1", "posl", "mixed"]
                .into_iter()
                .map(|name| ObservableSpec::Preset { name: name.into() })
                .collect(),
            times: vec![0.0, 1.0, 2.0, 5.0, 10.0],
            runs: vec![RunKind::Evolve],
            path: PathSpec::default(),
            seed: 42,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub kappa: f64,
    pub form_factor: FormFactorSpec,
    pub omega_max: f64,
    pub n: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { kappa: 0.25, form_factor: FormFactorSpec::default(), omega_max: 20.0, n: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormFactorSpec {
    /// g(z) = z^{1/4}/(b + z).
    Threshold { b: f64 },
    Expr { expr: Expr },
}

impl Default for FormFactorSpec {
    fn default() -> Self {
        FormFactorSpec::Threshold { b: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// φ(ω) ∝ √ω/((ω − center)² + width²).
    Packet { center: f64, width: f64 },
    Wavefunction { expr: Expr },
    /// φ at the grid nodes; cannot be continued off the axis.
    Samples { re: Vec<f64>, im: Vec<f64> },
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Packet { center: 2.0, width: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    Preset {
        name: String,
    },
    Expr {
        name: String,
        #[serde(default)]
        diag: Option<Expr>,
        #[serde(default)]
        terms: Vec<TermSpec>,
    },
    /// Diagonal profile and optional regular kernel at the grid nodes.
    Samples {
        name: String,
        diag: Vec<f64>,
        #[serde(default)]
        kernel_re: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        kernel_im: Option<Vec<Vec<f64>>>,
    },
}

impl ObservableSpec {
    pub fn name(&self) -> &str {
        match self {
            ObservableSpec::Preset { name } | ObservableSpec::Expr { name, .. } | ObservableSpec::Samples { name, .. } => {
                name
            }
        }
    }
}

/// s·a(ω)·conj(b(ω′)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub s: [f64; 2],
    pub a: Expr,
    pub b: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Evolve,
    Final,
    Irreversibility,
    RealSpectral,
    ComplexSpectral,
    Verify,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| bad(format!("malformed config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.len() <= 64 && name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

impl ScenarioConfig {
    /// Checks everything that does not need a built model.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if !(m.kappa.is_finite() && m.kappa >= 0.0) {
            return Err(bad(format!("kappa must be finite and >= 0, got {}", m.kappa)));
        }
        if m.n < 2 || m.n > MAX_NODES {
            return Err(bad(format!("n must lie in [2, {MAX_NODES}], got {}", m.n)));
        }
        if !(m.omega_max.is_finite() && m.omega_max > 0.0) {
            return Err(bad(format!("omega_max must be finite and positive, got {}", m.omega_max)));
        }
        let t_max = self.t_max();
        for (k, &t) in self.times.iter().enumerate() {
            if !(t.is_finite() && t >= 0.0) {
                return Err(bad(format!("times[{k}] = {t} must be finite and non-negative")));
            }
            if t > t_max {
                return Err(bad(format!("times[{k}] = {t} exceeds T_max = {t_max} for n = {} and omega_max = {}", m.n, m.omega_max)));
            }
        }
        if self.times.windows(2).any(|p| p[0] > p[1]) {
            return Err(bad("times must be sorted in ascending order"));
        }
        if self.threads == Some(0) {
            return Err(bad("threads must be positive"));
        }
        let mut seen = std::collections::HashSet::new();
        for o in &self.observables {
            if !valid_name(o.name()) {
                return Err(bad(format!("observable name {:?} must be 1-64 chars of [A-Za-z0-9_.-]", o.name())));
            }
            if !seen.insert(o.name()) {
                return Err(bad(format!("duplicate observable name {:?}", o.name())));
            }
        }
        self.path.validate(m.omega_max).map_err(|e| bad(format!("path: {e}")))?;
        Ok(())
    }

    /// πn/(2Ω_max), the largest time the grid resolves.
    pub fn t_max(&self) -> f64 {
        std::f64::consts::PI * self.model.n as f64 / (2.0 * self.model.omega_max)
    }

    pub fn wants(&self, run: RunKind) -> bool {
        self.runs.contains(&run)
    }
}

impl ModelSpec {
    pub fn form_factor_expr(&self) -> Result<Expr, ConfigError> {
        match &self.form_factor {
            FormFactorSpec::Threshold { b } if b.is_finite() && *b > 0.0 => Ok(threshold_form_factor(*b)),
            FormFactorSpec::Threshold { b } => Err(bad(format!("threshold form factor needs b > 0, got {b}"))),
            FormFactorSpec::Expr { expr } => Ok(expr.clone()),
        }
    }

    pub fn grid(&self) -> Result<EnergyGrid, ConfigError> {
        build_grid(self.n, self.omega_max).map_err(|e| bad(e.to_string()))
    }

    pub fn build(&self) -> diagsing::Result<ScatteringModel> {
        let ff = self.form_factor_expr().map_err(|e| diagsing::Error::Config(e.0))?;
        let grid = build_grid(self.n, self.omega_max)?;
        ScatteringModel::new(self.kappa, ff, grid, ModelOptions::default())
    }
}

fn finite(values: &[f64], what: &str) -> Result<(), ConfigError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(bad(format!("{what}[{k}] is not finite"))),
        None => Ok(()),
    }
}

fn check_len(len: usize, n: usize, what: &str) -> Result<(), ConfigError> {
    if len != n {
        return Err(bad(format!("{what} has {len} samples, the grid has {n} nodes")));
    }
    Ok(())
}

impl StateSpec {
    pub fn decode(&self, grid: &EnergyGrid) -> Result<StateFunctional, ConfigError> {
        let lib = |e: diagsing::Error| bad(format!("state: {e}"));
        match self {
            StateSpec::Packet { center, width } => {
                if !(center.is_finite() && width.is_finite() && *width > 0.0) {
                    return Err(bad("packet needs finite center and width > 0"));
                }
                StateFunctional::from_wavefunction(grid, packet(*center, *width)).map_err(lib)
            }
            StateSpec::Wavefunction { expr } => {
                expr.validate().map_err(lib)?;
                StateFunctional::from_wavefunction(grid, expr.clone()).map_err(lib)
            }
            StateSpec::Samples { re, im } => {
                check_len(re.len(), grid.len(), "state.re")?;
                check_len(im.len(), grid.len(), "state.im")?;
                finite(re, "state.re")?;
                finite(im, "state.im")?;
                let values = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
                StateFunctional::from_wavefunction(grid, grid.sampled_profile(values)).map_err(lib)
            }
        }
    }
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>, ConfigError> {
    check_len(rows.len(), n, what)?;
    for (i, r) in rows.iter().enumerate() {
        check_len(r.len(), n, &format!("{what}[{i}]"))?;
        finite(r, &format!("{what}[{i}]"))?;
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ObservableSpec {
    pub fn decode(&self, model: &ScatteringModel) -> Result<ObservableKernel, ConfigError> {
        let grid = model.grid();
        let lib = |e: diagsing::Error| bad(format!("observable {:?}: {e}", self.name()));
        match self {
            ObservableSpec::Preset { name } => standard_probes(model)
                .into_iter()
                .find(|(n, _)| n == name)
                .map(|(_, o)| o)
                .ok_or_else(|| bad(format!("unknown observable preset {name:?}"))),
            ObservableSpec::Expr { diag, terms, .. } => {
                if let Some(d) = diag {
                    d.validate().map_err(lib)?;
                }
                let terms = terms
                    .iter()
                    .map(|t| {
                        t.a.validate()?;
                        t.b.validate()?;
                        Ok(Term::new(Complex64::new(t.s[0], t.s[1]), t.a.clone(), t.b.clone()))
                    })
                    .collect::<diagsing::Result<Vec<_>>>()
                    .map_err(lib)?;
                ObservableKernel::from_parts(grid, diag.clone().map(Into::into), terms).map_err(lib)
            }
            ObservableSpec::Samples { diag, kernel_re, kernel_im, .. } => {
                let n = grid.len();
                check_len(diag.len(), n, "diag")?;
                finite(diag, "diag")?;
                let re = kernel_re.as_deref().map(|k| matrix(k, n, "kernel_re")).transpose()?;
                let im = kernel_im.as_deref().map(|k| matrix(k, n, "kernel_im")).transpose()?;
                let reg = DMatrix::from_fn(n, n, |i, j| {
                    Complex64::new(re.as_ref().map_or(0.0, |m| m[(i, j)]), im.as_ref().map_or(0.0, |m| m[(i, j)]))
                });
                ObservableKernel::from_samples(grid, diag.clone(), reg).map_err(lib)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default_scenario() {
        assert_eq!(parse_config("{}").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(parse_config(r#"{"model": {"kappa": 0.1, "colour": 3}}"#).is_err());
        assert!(parse_config(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn time_beyond_limit_names_it() {
        let e = parse_config(r#"{"times": [0, 100]}"#).unwrap_err();
        assert!(e.0.contains("T_max"), "{e}");
    }

    #[test]
    fn unsorted_times_and_bad_model_rejected() {
        assert!(parse_config(r#"{"times": [2, 1]}"#).is_err());
        assert!(parse_config(r#"{"model": {"kappa": -1}}"#).is_err());
        assert!(parse_config(r#"{"model": {"n": 1}}"#).is_err());
    }

    #[test]
    fn round_trip_through_json() {
        let cfg = ScenarioConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn sample_lengths_checked() {
        let grid = build_grid(8, 20.0).unwrap();
        let s = StateSpec::Samples { re: vec![1.0; 7], im: vec![0.0; 8] };
        assert!(s.decode(&grid).is_err());
        let s = StateSpec::Samples { re: vec![1.0; 8], im: vec![0.0; 8] };
        assert!((s.decode(&grid).unwrap().trace() - 1.0).abs() < 1e-12);
    }
}
