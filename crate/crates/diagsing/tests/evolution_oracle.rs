mod common;

use common::{default_model, default_oracle, max_dev, model};
use diagsing::evolution::{default_state, evolve, final_state, irreversibility_suite, standard_probes, PreparedObservable};
use diagsing::scattering::to_plus_representation;
use diagsing::spectral::interior_skip;
use diagsing::{pair, Error, ObservableKernel, StateFunctional};
use nalgebra::DMatrix;

fn probe(name: &str) -> ObservableKernel {
    standard_probes(default_model()).into_iter().find(|(n, _)| *n == name).unwrap().1
}

fn diagonal_state() -> StateFunctional {
    let rho = default_state(default_model()).unwrap();
    StateFunctional::diagonal(rho.grid(), rho.d().to_vec()).unwrap()
}

#[test]
fn diagonal_states_do_not_evolve() {
    let m = default_model();
    let rep = to_plus_representation(m, &diagonal_state()).unwrap();
    for (name, o) in standard_probes(m) {
        let p = PreparedObservable::new(m, &o).unwrap();
        let m0 = p.mean(&rep, 0.0).unwrap();
        for t in [1.0, 5.0, 10.0] {
            assert!((p.mean(&rep, t).unwrap() - m0).norm() < 1e-12, "{name} at {t}");
        }
    }
}

#[test]
fn means_follow_the_oracle() {
    let m = default_model();
    let sys = default_oracle();
    let rho = default_state(m).unwrap();
    let rep = to_plus_representation(m, &rho).unwrap();
    let r = sys.map_state(&rho);
    for name in ["posl", "gauss", "rank1", "mixed"] {
        let o = probe(name);
        let want = sys.means_at(&r, &sys.map_observable(&o), &[1.0, 5.0, 10.0]);
        let p = PreparedObservable::new(m, &o).unwrap();
        for (t, w) in [1.0, 5.0, 10.0].into_iter().zip(want) {
            let got = p.mean(&rep, t).unwrap();
            assert!((got - w).norm() <= 1e-3 * w.norm().max(1e-3), "{name} t={t}: {got} vs {w}");
        }
    }
}

#[test]
fn trace_and_energy_are_conserved() {
    let m = default_model();
    let rep = to_plus_representation(m, &default_state(m).unwrap()).unwrap();
    let rows = evolve(m, &rep, &[probe("gauss")], &[0.0, 1.0, 5.0, 10.0, 15.0]).unwrap();
    for r in &rows {
        assert!((r.trace - 1.0).abs() < 1e-8, "t={}: {}", r.t, r.trace);
        assert!((r.energy - rows[0].energy).abs() < 1e-6);
    }
}

#[test]
fn means_approach_the_final_state() {
    let m = default_model();
    let rho = default_state(m).unwrap();
    let rep = to_plus_representation(m, &rho).unwrap();
    let inf = final_state(m, &rho).unwrap();
    let o = probe("gauss");
    let target = pair(&inf, &o).unwrap();
    let p = PreparedObservable::new(m, &o).unwrap();
    let gap = |t: f64| (p.mean(&rep, t).unwrap() - target).norm() / target.norm();
    let start = gap(0.0);
    assert!(start > 1e-2);
    for t in [5.0, 10.0, 15.0] {
        assert!(gap(t) < 0.05 * start, "t={t}: {:e}", gap(t));
    }
}

#[test]
fn final_state_matches_the_oracle_long_time_average() {
    let m = default_model();
    let sys = default_oracle();
    let rho = default_state(m).unwrap();
    let inf = final_state(m, &rho).unwrap();
    let oracle = sys.longtime_diagonal(&sys.map_state(&rho)).unwrap();
    let n = oracle.len();
    let s = interior_skip(n);
    let dev = max_dev(&inf.d()[s..n - s], &oracle[s..n - s]);
    assert!(dev < 5e-3, "{dev:e}");
    assert!(inf.is_diagonal());
    assert!((inf.trace() - 1.0).abs() < 1e-12);
}

#[test]
fn oracle_long_time_average_keeps_stationary_states() {
    let sys = default_oracle();
    let v = sys.eigenvectors();
    let n = v.nrows();
    let p: Vec<f64> = (0..n).map(|k| (-(k as f64) / 40.0).exp()).collect();
    let total: f64 = p.iter().sum();
    let diag = DMatrix::from_fn(n, n, |i, j| if i == j { (p[i] / total).into() } else { 0.0.into() });
    let rho = v * diag * v.adjoint();
    let back = sys.longtime_diagonal(&rho).unwrap();
    let w = sys.grid().weights();
    let want: Vec<f64> = (0..n).map(|i| rho[(i, i)].re / w[i]).collect();
    assert!(max_dev(&back, &want) < 1e-10);
}

#[test]
fn final_state_of_a_diagonal_state_is_itself() {
    let m = default_model();
    let rho = diagonal_state();
    let inf = final_state(m, &rho).unwrap();
    assert!(max_dev(inf.d(), rho.d()) < 1e-10);
}

#[test]
fn free_final_state_is_the_diagonal_part() {
    let m = model(200, 0.0);
    let rho = default_state(&m).unwrap();
    let inf = final_state(&m, &rho).unwrap();
    let (p, _) = rho.decompose();
    assert!(max_dev(inf.d(), p.d()) < 1e-12);
}

#[test]
fn evolution_is_weakly_irreversible() {
    let m = default_model();
    let rho = default_state(m).unwrap();
    let probes: Vec<ObservableKernel> = standard_probes(m).into_iter().map(|(_, o)| o).collect();
    let r = irreversibility_suite(m, &rho, &probes, &[0.0, 1.0, 5.0, 10.0]).unwrap();
    assert!(r.stationary(), "{r:?}");
    assert!(r.mixed());
    assert!(r.non_recovery_margin > 1e-3, "{r:?}");
    assert!((r.final_trace - 1.0).abs() < 1e-12);
}

#[test]
fn times_beyond_resolution_are_refused() {
    let m = default_model();
    let rep = to_plus_representation(m, &default_state(m).unwrap()).unwrap();
    let t = m.grid().t_max() * 1.01;
    assert!(matches!(evolve(m, &rep, &[], &[t]), Err(Error::TimeBeyondMax { .. })));
}
