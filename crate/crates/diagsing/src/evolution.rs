//! Mean values of evolving functional states, the invariant final state and
//! the weak-irreversibility checks.
//!
//! In the + representation the evolution is a phase:
//! (ρ_t|O) = ∫ c(ω) O_ω dω + ∫∫ e^{i(ω−ω′)t} conj c(ω, ω′) R_O(ω, ω′) dω dω′,
//! where R_O is the regular part of ⟨ω+|O|ω′+⟩. The transform is done once;
//! each (O, t) is then an O(n²) sum.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{pair, ObservableKernel, StateFunctional, Term};
use crate::model::ScatteringModel;
use crate::profile::Expr;
use crate::scattering::{to_plus_representation, ContinuedObservable, PlusRepresentation};

/// An observable with R_O sampled on the grid, for both the full
/// observable and its regular part.
#[derive(Debug, Clone)]
pub struct PreparedObservable {
    obs: ObservableKernel,
    r: nalgebra::DMatrix<Complex64>,
    r_regular: nalgebra::DMatrix<Complex64>,
}

impl PreparedObservable {
    pub fn new(model: &ScatteringModel, obs: &ObservableKernel) -> Result<Self> {
        if !model.grid().same_as(obs.grid()) {
            return Err(Error::GridMismatch("observable and model live on different grids".into()));
        }
        let r = ContinuedObservable::new(model, obs).grid_matrix(model)?;
        let r_regular = if obs.diag_profile().is_some() {
            ContinuedObservable::new(model, &obs.regular_part()).grid_matrix(model)?
        } else {
            r.clone()
        };
        Ok(PreparedObservable { obs: obs.clone(), r, r_regular })
    }

    pub fn observable(&self) -> &ObservableKernel {
        &self.obs
    }

    /// R_O on the grid.
    pub fn regular_kernel(&self) -> &nalgebra::DMatrix<Complex64> {
        &self.r
    }

    /// (ρ_t|O).
    pub fn mean(&self, rep: &PlusRepresentation, t: f64) -> Result<Complex64> {
        check_time(rep, t)?;
        let w = rep.grid().weights();
        let inv: f64 = rep.c_diag.iter().zip(w).zip(self.obs.diag()).map(|((c, w), f)| c * w * f).sum();
        Ok(inv + fluctuating(rep, &self.r, t))
    }

    /// |(Qρ_t|O)|: the pairing of the evolved state with the regular part
    /// of O alone.
    pub fn offdiag(&self, rep: &PlusRepresentation, t: f64) -> Result<f64> {
        check_time(rep, t)?;
        Ok(fluctuating(rep, &self.r_regular, t).norm())
    }
}

fn check_time(rep: &PlusRepresentation, t: f64) -> Result<()> {
    let t_max = rep.grid().t_max();
    if !(t >= 0.0) {
        return Err(Error::Config(format!("time must be non-negative, got {t}")));
    }
    if t > t_max {
        return Err(Error::TimeBeyondMax { t, t_max });
    }
    Ok(())
}

fn fluctuating(rep: &PlusRepresentation, r: &nalgebra::DMatrix<Complex64>, t: f64) -> Complex64 {
    let grid = rep.grid();
    let w = grid.weights();
    let ph: Vec<Complex64> = grid.nodes().iter().zip(w).map(|(&x, &w)| Complex64::from_polar(w, x * t)).collect();
    let c = &rep.c_off;
    // columns in parallel, summed in order so the result ignores the thread count
    let cols: Vec<Complex64> = (0..w.len())
        .into_par_iter()
        .map(|j| {
            let mut col = Complex64::new(0.0, 0.0);
            for i in 0..w.len() {
                col += ph[i] * c[(i, j)].conj() * r[(i, j)];
            }
            col * ph[j].conj()
        })
        .collect();
    cols.into_iter().sum()
}

/// One-shot form of [`PreparedObservable::mean`].
pub fn evolve_mean(model: &ScatteringModel, rep: &PlusRepresentation, obs: &ObservableKernel, t: f64) -> Result<Complex64> {
    check_time(rep, t)?;
    PreparedObservable::new(model, obs)?.mean(rep, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub t: f64,
    /// One mean per requested observable, in request order.
    pub means: Vec<Complex64>,
    pub trace: f64,
    pub energy: f64,
    /// |(Qρ_t|O)| per requested observable.
    pub offdiag_mag: Vec<f64>,
}

/// Means of several observables at several times plus the conservation
/// diagnostics.
pub fn evolve(
    model: &ScatteringModel,
    rep: &PlusRepresentation,
    observables: &[ObservableKernel],
    times: &[f64],
) -> Result<Vec<EvolutionResult>> {
    for &t in times {
        check_time(rep, t)?;
    }
    let prepared = observables.iter().map(|o| PreparedObservable::new(model, o)).collect::<Result<Vec<_>>>()?;
    let id = PreparedObservable::new(model, &ObservableKernel::identity(model.grid()))?;
    let h = PreparedObservable::new(model, &ObservableKernel::hamiltonian(model))?;
    times
        .iter()
        .map(|&t| {
            let means = prepared.iter().map(|p| p.mean(rep, t)).collect::<Result<Vec<_>>>()?;
            let offdiag_mag = prepared.iter().map(|p| p.offdiag(rep, t)).collect::<Result<Vec<_>>>()?;
            Ok(EvolutionResult { t, means, trace: id.mean(rep, t)?.re, energy: h.mean(rep, t)?.re, offdiag_mag })
        })
        .collect()
}

/// Allowed drift of Σ w c(ω) away from 1 before the final state is refused.
pub const FINAL_TRACE_TOL: f64 = 1e-8;

/// ρ∞ = ∫ c(ω) |ω+⟩⟨ω+| dω, read in the free basis as the diagonal density
/// c with no kernel. The transform keeps the trace to [`FINAL_TRACE_TOL`];
/// the density is rescaled to unit trace so that ρ∞ is a valid state.
pub fn final_state(model: &ScatteringModel, rho0: &StateFunctional) -> Result<StateFunctional> {
    let rep = to_plus_representation(model, rho0)?;
    final_state_from(&rep)
}

pub fn final_state_from(rep: &PlusRepresentation) -> Result<StateFunctional> {
    let trace = rep.trace();
    if !((trace - 1.0).abs() <= FINAL_TRACE_TOL) {
        return Err(Error::Contract(format!("+ representation trace is {trace}")));
    }
    StateFunctional::diagonal(rep.grid(), rep.c_diag.iter().map(|c| c / trace).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrreversibilityReport {
    /// max |(ρ∞ evolved|O) − (ρ∞|O)| over probes and times.
    pub stationarity: f64,
    /// The same for Tρ∞.
    pub stationarity_inverted: f64,
    /// max over probes of |(Tρ∞ evolved|O) − (Tρ0|O)|: how far the
    /// inverted final state stays from the inverted initial state.
    pub non_recovery_margin: f64,
    /// max |k∞_ii − d∞_i|; positive means ρ∞ is not a pure state.
    pub purity_defect: f64,
    pub final_trace: f64,
}

impl IrreversibilityReport {
    pub const STATIONARITY_TOL: f64 = 1e-8;

    pub fn stationary(&self) -> bool {
        self.stationarity <= Self::STATIONARITY_TOL && self.stationarity_inverted <= Self::STATIONARITY_TOL
    }

    pub fn mixed(&self) -> bool {
        self.purity_defect > 0.0
    }
}

pub fn irreversibility_suite(
    model: &ScatteringModel,
    rho0: &StateFunctional,
    probes: &[ObservableKernel],
    times: &[f64],
) -> Result<IrreversibilityReport> {
    let inf = final_state(model, rho0)?;
    let inf_t = inf.time_invert();
    let rep = to_plus_representation(model, &inf)?;
    let rep_t = to_plus_representation(model, &inf_t)?;
    let rho0_t = rho0.time_invert();
    let mut report = IrreversibilityReport {
        stationarity: 0.0,
        stationarity_inverted: 0.0,
        non_recovery_margin: 0.0,
        purity_defect: inf.purity_defect(),
        final_trace: inf.trace(),
    };
    for obs in probes {
        let p = PreparedObservable::new(model, obs)?;
        let still = pair(&inf, obs)?;
        let still_t = pair(&inf_t, obs)?;
        let target = pair(&rho0_t, obs)?;
        for &t in times {
            report.stationarity = report.stationarity.max((p.mean(&rep, t)? - still).norm());
            let m = p.mean(&rep_t, t)?;
            report.stationarity_inverted = report.stationarity_inverted.max((m - still_t).norm());
            report.non_recovery_margin = report.non_recovery_margin.max((m - target).norm());
        }
    }
    Ok(report)
}

/// The fixed probe set: smooth diagonal profiles, low-rank kernels, a
/// mixed observable, the Hamiltonian and the identity.
pub fn standard_probes(model: &ScatteringModel) -> Vec<(&'static str, ObservableKernel)> {
    let grid = model.grid();
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let sqrt_decay = Expr::product(vec![Expr::Power { p: 0.5 }, Expr::Exp { rate: -0.5 }]);
    let lin_decay = Expr::product(vec![Expr::Power { p: 1.0 }, Expr::Exp { rate: -1.0 / 3.0 }]);
    let soft = Expr::product(vec![Expr::Power { p: 0.75 }, Expr::Exp { rate: -0.5 }]);
    let build = |diag: Option<Expr>, terms: Vec<Term>| {
        ObservableKernel::from_parts(grid, diag.map(Into::into), terms).expect("probe is valid")
    };
    vec![
        ("gauss", build(Some(Expr::Gauss { center: 2.0, width: 1.0 }), vec![])),
        ("decay", build(Some(Expr::Exp { rate: -0.2 }), vec![])),
        ("rank1", build(None, vec![Term::new(c(1.0, 0.0), sqrt_decay.clone(), sqrt_decay.clone())])),
        (
            "posl",
            build(
                None,
                vec![
                    Term::new(c(0.0, 1.0), sqrt_decay.clone(), lin_decay.clone()),
                    Term::new(c(0.0, -1.0), lin_decay.clone(), sqrt_decay),
                ],
            ),
        ),
        ("mixed", build(Some(lin_decay), vec![Term::new(c(0.5, 0.0), soft.clone(), soft)])),
        ("H", ObservableKernel::hamiltonian(model)),
        ("I", ObservableKernel::identity(grid)),
    ]
}

/// The default initial packet √ω/((ω − 2)² + 1), normalised.
pub fn default_state(model: &ScatteringModel) -> Result<StateFunctional> {
    StateFunctional::from_wavefunction(model.grid(), crate::functionals::packet(2.0, 1.0))
}
