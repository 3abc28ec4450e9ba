//! Named checks with residuals and tolerances, written to verify.csv.

use diagsing::evolution::{final_state_from, irreversibility_suite, PreparedObservable};
use diagsing::functionals::max_abs;
use diagsing::oracle::DiscretizedSystem;
use diagsing::spectral::{
    circle_residue, gamov_vectors, interior_skip, log_linear_slope, phi_energy_trace, psi_annihilation, real_family,
    ComplexEvolution, PathSpec, RESIDUE_POINTS, RESIDUE_RADIUS,
};
use diagsing::superoperators::{
    projector_defect, random_instances, random_matrix, refinement_study, resolvent_blocks, support_defects,
    verify_dual_partition, verify_resolvent_partition, FiniteLiouvillian, ProjectorPair,
};
use diagsing::ObservableKernel;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;
use crate::output::{num, Table, VERIFY_HEADER};
use crate::scenario::Scenario;

pub const PARTITION_INSTANCES: usize = 20;
pub const PARTITION_TOL: f64 = 1e-9;
pub const ORACLE_TOL: f64 = 1e-3;
/// Denominator floor for relative comparisons of means near zero.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// Reported for context, never a failure.
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    /// residual ≤ tolerance.
    fn bound(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) {
        let outcome = if residual <= tolerance { Outcome::Pass } else { Outcome::Fail };
        self.checks.push(Check { name: name.into(), residual, tolerance, outcome });
    }

    /// residual > tolerance: for margins that must stay strictly positive.
    fn exceed(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) {
        let outcome = if residual > tolerance { Outcome::Pass } else { Outcome::Fail };
        self.checks.push(Check { name: name.into(), residual, tolerance, outcome });
    }

    fn info(&mut self, name: impl Into<String>, residual: f64) {
        self.checks.push(Check { name: name.into(), residual, tolerance: f64::NAN, outcome: Outcome::Info });
    }

    pub fn first_failure(&self) -> Option<String> {
        self.checks.iter().find(|c| c.outcome == Outcome::Fail).map(|c| c.name.clone())
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&VERIFY_HEADER);
        for c in &self.checks {
            let pass = match c.outcome {
                Outcome::Pass => "true",
                Outcome::Fail => "false",
                Outcome::Info => "info",
            };
            let tol = if c.tolerance.is_nan() { String::new() } else { num(c.tolerance) };
            t.push(vec![c.name.clone(), num(c.residual), tol, pass.into()]);
        }
        t
    }
}

fn superoperator_checks(report: &mut VerifyReport, seed: u64, oracle: &DiscretizedSystem) -> Result<(), CliError> {
    let mut support = 0.0f64;
    for (k, inst) in random_instances(seed, PARTITION_INSTANCES).into_iter().enumerate() {
        let n = inst.hamiltonian.nrows();
        let l = FiniteLiouvillian::new(inst.hamiltonian)?;
        let pair = ProjectorPair::diagonal(n);
        report.bound(format!("resolvent_partition_{k:02}"), verify_resolvent_partition(&l, &pair, inst.z)?, PARTITION_TOL);
        report.bound(format!("dual_partition_{k:02}"), verify_dual_partition(&l, &pair, inst.z)?, PARTITION_TOL);
        let b = resolvent_blocks(l.superoperator(), &pair, inst.z)?;
        support = support_defects(&b, &pair).into_iter().fold(support, f64::max);
    }
    report.bound("block_support", support, 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = oracle.hamiltonian().nrows();
    let pair = ProjectorPair::diagonal(n);
    let o = random_matrix(n, &mut rng);
    report.bound("projector_identities", projector_defect(&pair, &o), 0.0);
    let l = FiniteLiouvillian::new(oracle.hamiltonian().clone())?;
    let com = l.action(&pair.p(&o));
    let diag = (0..n).map(|i| com[(i, i)].norm()).fold(0.0, f64::max);
    report.bound("commutator_with_diagonal_has_zero_diagonal", diag, 0.0);
    Ok(())
}

fn refinement_check(report: &mut VerifyReport, s: &Scenario) -> Result<(), CliError> {
    let m = &s.config.model;
    let study = refinement_study(m.kappa, m.omega_max, &[100, 200, 400])?;
    if study.iter().all(|&(_, r)| r == 0.0) {
        // without coupling the commutator has no diagonal at any n
        report.bound("diagonal_commutator_vanishes", 0.0, 0.0);
        return Ok(());
    }
    for w in study.windows(2) {
        let ratio = w[1].1 / w[0].1;
        report.bound(format!("diagonal_commutator_halving_{}_{}", w[0].0, w[1].0), (ratio - 0.5).abs(), 0.1);
    }
    Ok(())
}

fn pole_checks(report: &mut VerifyReport, s: &Scenario) -> Result<(), CliError> {
    let model = &s.model;
    let unit = model
        .grid()
        .nodes()
        .iter()
        .map(|&x| Ok((model.s_matrix(x)?.norm() - 1.0).abs()))
        .collect::<Result<Vec<_>, CliError>>()?;
    report.bound("s_matrix_unimodular", unit.into_iter().fold(0.0, f64::max), 1e-10);
    let Some(z0) = model.pole() else {
        report.info("no_resonance", 0.0);
        return Ok(());
    };
    let (count, moment) = model.circle_zero_moments(z0, 0.3, 256);
    report.bound("pole_zero_count", (count - 1.0).norm(), 1e-6);
    report.bound("pole_vs_argument_principle", (moment / count - z0).norm(), 1e-8);
    let res = model.s_residue()?;
    let circ = circle_residue(|z| model.s_continued(z), z0, RESIDUE_RADIUS, RESIDUE_POINTS);
    report.bound("residue_vs_contour", (res - circ).norm(), 1e-8);
    Ok(())
}

fn evolution_checks(report: &mut VerifyReport, s: &Scenario, oracle: &DiscretizedSystem) -> Result<(), CliError> {
    let (model, rep) = (&s.model, &s.rep);
    let times = &s.config.times;
    let id = PreparedObservable::new(model, &ObservableKernel::identity(model.grid()))?;
    let h = PreparedObservable::new(model, &ObservableKernel::hamiltonian(model))?;
    let e0 = h.mean(rep, 0.0)?.re;
    let (mut trace, mut drift) = (0.0f64, 0.0f64);
    for &t in times {
        trace = trace.max((id.mean(rep, t)? - 1.0).norm());
        drift = drift.max((h.mean(rep, t)?.re - e0).abs() / e0.abs().max(RELATIVE_FLOOR));
    }
    report.bound("trace_conservation", trace, 1e-8);
    report.bound("energy_conservation", drift, 1e-6);

    let rho_or = oracle.map_state(&s.state);
    let t_max = model.grid().t_max();
    for (name, o) in &s.observables {
        let p = PreparedObservable::new(model, o)?;
        let want = oracle.means_at(&rho_or, &oracle.map_observable(o), times);
        let mut err = 0.0f64;
        for (&t, w) in times.iter().zip(&want) {
            err = err.max((p.mean(rep, t)? - w).norm() / w.norm().max(RELATIVE_FLOOR));
        }
        report.bound(format!("oracle_mean_{name}"), err, ORACLE_TOL);
        let start = p.offdiag(rep, 0.0)?;
        if start > 1e-12 {
            report.bound(format!("offdiag_decay_{name}"), p.offdiag(rep, t_max)? / start, 0.2);
        } else {
            report.info(format!("offdiag_decay_{name}"), start);
        }
    }

    let inf = final_state_from(rep)?;
    let lt = oracle.longtime_diagonal(&rho_or)?;
    let n = lt.len();
    let k = interior_skip(n).max(1);
    let err = (k..n - k).map(|i| (lt[i] - inf.d()[i]).abs()).fold(0.0, f64::max);
    report.bound("final_state_vs_oracle", err, 5e-3);
    report.bound("final_state_offdiag_zero", max_abs(inf.k()), 0.0);

    let kernels: Vec<ObservableKernel> = s.observables.iter().map(|(_, o)| o.clone()).collect();
    let irr = irreversibility_suite(model, &s.state, &kernels, times)?;
    report.bound("final_state_stationary", irr.stationarity, 1e-8);
    report.bound("inverted_final_state_stationary", irr.stationarity_inverted, 1e-8);
    report.exceed("non_recovery_margin", irr.non_recovery_margin, 0.0);
    report.exceed("final_state_purity_defect", irr.purity_defect, 0.0);
    Ok(())
}

fn real_family_checks(report: &mut VerifyReport, s: &Scenario, oracle: &DiscretizedSystem) -> Result<(), CliError> {
    let model = &s.model;
    let tol = if model.kappa() == 0.0 { 1e-10 } else { 5e-3 };
    let worst = phi_energy_trace(model)?.iter().map(|r| r.residual()).fold(0.0, f64::max);
    report.bound("phi_energy_trace", worst, tol);
    let c = real_family(model).checks(oracle.hamiltonian(), model.grid().nodes(), interior_skip(model.grid().len()));
    report.bound("phi_gram_weak", c.gram_weak, tol);
    report.bound("phi_completeness_weak", c.completeness_weak, tol);
    report.bound("phi_gram_nodewise", c.gram_nodewise, 5e-3);
    report.info("phi_completeness_nodewise", c.completeness_nodewise);
    report.bound("phi_eigen_residual", c.eigen_residual, 5e-3);
    Ok(())
}

fn complex_checks(report: &mut VerifyReport, s: &Scenario) -> Result<(), CliError> {
    let (model, rep) = (&s.model, &s.rep);
    if !s.state.is_continuable() || s.observables.iter().any(|(_, o)| !o.is_continuable()) {
        report.info("complex_route_skipped_sampled_input", 0.0);
        return Ok(());
    }
    let path = &s.config.path;
    let alt = PathSpec { angle: 0.7 * std::f64::consts::PI, radius: 1.6, end_angle: 0.25, ..*path };
    for (name, o) in &s.observables {
        let p = PreparedObservable::new(model, o)?;
        let ev = ComplexEvolution::new(model, rep, o, path)?;
        let alt_ev = ComplexEvolution::new(model, rep, o, &alt).ok();
        let (mut route, mut paths) = (0.0f64, 0.0f64);
        for &t in &s.config.times {
            let real = p.mean(rep, t)?;
            let total = ev.terms(t)?.total();
            route = route.max((total - real).norm() / real.norm().max(RELATIVE_FLOOR));
            if let Some(a) = &alt_ev {
                paths = paths.max((a.terms(t)?.total() - total).norm());
            }
        }
        report.bound(format!("complex_route_{name}"), route, 1e-3);
        match alt_ev {
            Some(_) => report.bound(format!("path_independence_{name}"), paths, 1e-6),
            None => report.info(format!("path_independence_{name}_alternative_refused"), 0.0),
        }
    }
    if model.pole().is_none() {
        return Ok(());
    }
    let fam = gamov_vectors(model, path)?;
    let t_end = model.grid().t_max().min(6.0);
    let ts = [t_end / 3.0, 2.0 * t_end / 3.0, t_end];
    if let Some((_, o)) = s.observables.first() {
        let ev = ComplexEvolution::new(model, rep, o, path)?;
        let g = ts.iter().map(|&t| Ok(ev.terms(t)?.gamov)).collect::<Result<Vec<Complex64>, CliError>>()?;
        if g.iter().all(|v| v.norm() > 0.0) {
            let slope = log_linear_slope(&ts, &g);
            report.bound("gamov_decay_rate", (-slope - fam.decay_rate()).abs() / fam.decay_rate(), 0.05);
        }
    }
    for (name, o) in [("H", ObservableKernel::hamiltonian(model)), ("I", ObservableKernel::identity(model.grid()))] {
        report.bound(format!("psi_annihilates_{name}"), psi_annihilation(model, &fam, &o)?.max(), 5e-3);
    }
    Ok(())
}

/// Runs every check that applies to the scenario.
pub fn verify_suite(s: &Scenario) -> Result<VerifyReport, CliError> {
    let mut report = VerifyReport::default();
    let oracle = DiscretizedSystem::new(&s.model);
    let sections: [(&str, &dyn Fn(&mut VerifyReport) -> Result<(), CliError>); 6] = [
        ("superoperators", &|r| superoperator_checks(r, s.config.seed, &oracle)),
        ("refinement", &|r| refinement_check(r, s)),
        ("pole", &|r| pole_checks(r, s)),
        ("evolution", &|r| evolution_checks(r, s, &oracle)),
        ("real_family", &|r| real_family_checks(r, s, &oracle)),
        ("complex", &|r| complex_checks(r, s)),
    ];
    // a breached invariant fails its section and the rest still run
    for (name, section) in sections {
        match section(&mut report) {
            Ok(()) => {}
            Err(CliError::Contract(_)) => report.checks.push(Check {
                name: format!("{name}_aborted"),
                residual: f64::NAN,
                tolerance: f64::NAN,
                outcome: Outcome::Fail,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
