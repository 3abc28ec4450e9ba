//! Run orchestration: build the scenario once, then produce one table per
//! requested run.

use std::path::{Path, PathBuf};

use diagsing::evolution::{evolve, final_state_from, irreversibility_suite};
use diagsing::oracle::DiscretizedSystem;
use diagsing::scattering::{to_plus_representation, PlusRepresentation};
use diagsing::spectral::{interior_skip, phi_energy_trace, real_family, ComplexEvolution};
use diagsing::{ObservableKernel, ScatteringModel, StateFunctional};

use crate::config::{RunKind, ScenarioConfig};
use crate::error::CliError;
use crate::output::*;
use crate::verify::verify_suite;

/// Everything the runs share.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: ScatteringModel,
    pub state: StateFunctional,
    pub observables: Vec<(String, ObservableKernel)>,
    pub rep: PlusRepresentation,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self, CliError> {
        config.validate()?;
        let mut model = config.model.build()?;
        // without a resonance in the window only the complex route is lost
        if model.kappa() > 0.0 {
            model = match model.clone().with_pole() {
                Ok(m) => m,
                Err(diagsing::Error::NoResonance) => model,
                Err(e) => return Err(e.into()),
            };
        }
        let state = config.state.decode(model.grid())?;
        let observables = config
            .observables
            .iter()
            .map(|o| Ok((o.name().to_string(), o.decode(&model)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        let rep = to_plus_representation(&model, &state)?;
        Ok(Scenario { config, model, state, observables, rep })
    }

    fn kernels(&self) -> Vec<ObservableKernel> {
        self.observables.iter().map(|(_, o)| o.clone()).collect()
    }

    pub fn evolve_table(&self) -> Result<Table, CliError> {
        let mut t = Table::new(&EVOLVE_HEADER);
        for r in evolve(&self.model, &self.rep, &self.kernels(), &self.config.times)? {
            for (k, (name, _)) in self.observables.iter().enumerate() {
                t.push(vec![
                    num(r.t),
                    name.clone(),
                    num(r.means[k].re),
                    num(r.means[k].im),
                    num(r.trace),
                    num(r.energy),
                    num(r.offdiag_mag[k]),
                ]);
            }
        }
        Ok(t)
    }

    pub fn final_table(&self) -> Result<Table, CliError> {
        let inf = final_state_from(&self.rep)?;
        let g = self.model.grid();
        let mut t = Table::new(&FINAL_HEADER);
        for i in 0..g.len() {
            t.push(vec![num(g.nodes()[i]), num(g.weights()[i]), num(self.state.d()[i]), num(inf.d()[i])]);
        }
        Ok(t)
    }

    pub fn irreversibility_table(&self) -> Result<Table, CliError> {
        let r = irreversibility_suite(&self.model, &self.state, &self.kernels(), &self.config.times)?;
        let mut t = Table::new(&IRREVERSIBILITY_HEADER);
        for (name, v) in [
            ("stationarity", r.stationarity),
            ("stationarity_inverted", r.stationarity_inverted),
            ("non_recovery_margin", r.non_recovery_margin),
            ("purity_defect", r.purity_defect),
            ("final_trace", r.final_trace),
        ] {
            t.push(vec![name.into(), num(v)]);
        }
        Ok(t)
    }

    pub fn real_spectral_table(&self) -> Result<Table, CliError> {
        let mut t = Table::new(&REAL_SPECTRAL_HEADER);
        for r in phi_energy_trace(&self.model)? {
            t.push(vec![
                r.name.into(),
                num(r.omega),
                r.omega_prime.map(num).unwrap_or_default(),
                num(r.value.re),
                num(r.value.im),
                num(r.expected.re),
                num(r.expected.im),
                num(r.residual()),
            ]);
        }
        let sys = DiscretizedSystem::new(&self.model);
        let c = real_family(&self.model).checks(sys.hamiltonian(), self.model.grid().nodes(), interior_skip(self.model.grid().len()));
        for (name, v) in [
            ("gram_weak", c.gram_weak),
            ("completeness_weak", c.completeness_weak),
            ("gram_nodewise", c.gram_nodewise),
            ("completeness_nodewise", c.completeness_nodewise),
            ("eigen_residual", c.eigen_residual),
        ] {
            let blank = String::new;
            t.push(vec![name.into(), blank(), blank(), num(v), "0".into(), "0".into(), "0".into(), num(v)]);
        }
        Ok(t)
    }

    pub fn complex_spectral_table(&self) -> Result<Table, CliError> {
        let mut t = Table::new(&COMPLEX_SPECTRAL_HEADER);
        let evs = self
            .observables
            .iter()
            .map(|(name, o)| Ok((name, ComplexEvolution::new(&self.model, &self.rep, o, &self.config.path)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        for &time in &self.config.times {
            for (name, ev) in &evs {
                let c = ev.terms(time)?;
                let total = c.total();
                let mut row = vec![num(time), (*name).clone()];
                for v in [c.invariant, c.gamov, c.mixed_left, c.mixed_right, c.background, total] {
                    row.push(num(v.re));
                    row.push(num(v.im));
                }
                t.push(row);
            }
        }
        Ok(t)
    }
}

/// Writes resolved_config.json: the configuration with defaults filled in.
pub fn write_resolved(config: &ScenarioConfig, dir: &Path) -> Result<PathBuf, CliError> {
    let path = dir.join("resolved_config.json");
    let text = serde_json::to_string_pretty(config).map_err(|e| CliError::Output(e.to_string()))?;
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

fn dedup(runs: &[RunKind]) -> Vec<RunKind> {
    let mut out = Vec::new();
    for &r in runs {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

/// Executes every requested run. Verification failures are reported after
/// all files are written.
pub fn run(config: ScenarioConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut written = vec![write_resolved(&config, out_dir)?];
    let scenario = Scenario::build(config)?;
    let mut failed = None;
    for run in dedup(&scenario.config.runs) {
        let (table, file) = match run {
            RunKind::Evolve => (scenario.evolve_table()?, "evolve.csv"),
            RunKind::Final => (scenario.final_table()?, "final.csv"),
            RunKind::Irreversibility => (scenario.irreversibility_table()?, "irreversibility.csv"),
            RunKind::RealSpectral => (scenario.real_spectral_table()?, "real_spectral.csv"),
            RunKind::ComplexSpectral => (scenario.complex_spectral_table()?, "complex_spectral.csv"),
            RunKind::Verify => {
                let report = verify_suite(&scenario)?;
                failed = report.first_failure();
                (report.table(), "verify.csv")
            }
        };
        written.push(table.write(out_dir, file)?);
    }
    match failed {
        Some(name) => Err(CliError::Contract(format!("verification check {name} failed"))),
        None => Ok(written),
    }
}

/// The verification suite alone; exit status reflects the checks.
pub fn verify(config: ScenarioConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let resolved = write_resolved(&config, out_dir)?;
    let scenario = Scenario::build(config)?;
    let report = verify_suite(&scenario)?;
    let path = report.table().write(out_dir, "verify.csv")?;
    match report.first_failure() {
        Some(name) => Err(CliError::Contract(format!("verification check {name} failed"))),
        None => Ok(vec![resolved, path]),
    }
}
