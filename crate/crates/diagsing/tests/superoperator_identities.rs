mod common;

use common::c;
use diagsing::functionals::max_abs;
use diagsing::superoperators::{
    apply_ldag, collision, projector_defect, random_instances, random_matrix, refinement_study, resolvent_blocks,
    support_defects, verify_dual_partition, verify_resolvent_partition, FiniteLiouvillian, ProjectorPair,
};
use diagsing::Error;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_level() -> FiniteLiouvillian {
    FiniteLiouvillian::new(DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.3, 0.0), c(0.3, 0.0), c(1.0, 0.0)])).unwrap()
}

#[test]
fn two_level_partition_holds() {
    let l = two_level();
    let pair = ProjectorPair::diagonal(2);
    assert!(verify_resolvent_partition(&l, &pair, c(0.0, 1.0)).unwrap() < 1e-10);
    assert!(verify_dual_partition(&l, &pair, c(0.0, 1.0)).unwrap() < 1e-10);
}

#[test]
fn far_from_the_spectrum_the_resolvent_is_minus_one_over_z() {
    let l = two_level();
    let pair = ProjectorPair::diagonal(2);
    let z = c(0.0, 1e3);
    assert!(verify_resolvent_partition(&l, &pair, z).unwrap() < 1e-9);
    let mut shifted = l.superoperator().clone();
    for k in 0..4 {
        shifted[(k, k)] -= z;
    }
    let inv = shifted.try_inverse().unwrap();
    let lead = DMatrix::<num_complex::Complex64>::identity(4, 4) * (-1.0 / z);
    let scale = l.superoperator().norm();
    assert!((inv - lead).norm() <= 2.0 * scale / z.norm_sqr());
    // the collision block falls off like ‖L‖²/|z|
    let b = resolvent_blocks(l.superoperator(), &pair, z).unwrap();
    assert!(b.psi.norm() <= scale * scale / z.norm());
}

#[test]
fn random_instances_satisfy_both_partitions() {
    let instances = random_instances(2024, 24);
    assert!(instances.len() >= 20);
    for (k, inst) in instances.iter().enumerate() {
        let l = FiniteLiouvillian::new(inst.hamiltonian.clone()).unwrap();
        let pair = ProjectorPair::diagonal(l.dim());
        let r = verify_resolvent_partition(&l, &pair, inst.z).unwrap();
        let d = verify_dual_partition(&l, &pair, inst.z).unwrap();
        assert!(r < 1e-9 && d < 1e-9, "instance {k}: {r:e} {d:e}");
    }
}

#[test]
fn blocks_live_on_their_subspaces() {
    for inst in random_instances(11, 7) {
        let l = FiniteLiouvillian::new(inst.hamiltonian).unwrap();
        let pair = ProjectorPair::diagonal(l.dim());
        let b = resolvent_blocks(l.superoperator(), &pair, inst.z).unwrap();
        assert!(support_defects(&b, &pair).iter().all(|&d| d < 1e-12));
        let psi_dag = collision(&l, &pair, inst.z).unwrap();
        let p = pair.p_matrix();
        assert!(max_abs(&(&psi_dag - &p * &psi_dag * &p)) < 1e-12);
    }
}

#[test]
fn projectors_are_complementary() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..6 {
        let pair = ProjectorPair::diagonal(n);
        assert_eq!(projector_defect(&pair, &random_matrix(n, &mut rng)), 0.0);
    }
}

#[test]
fn commutator_with_a_diagonal_has_no_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let l = FiniteLiouvillian::new(diagsing::superoperators::random_hermitian(5, &mut rng)).unwrap();
    let d = DMatrix::from_fn(5, 5, |i, j| if i == j { c(i as f64, 0.0) } else { c(0.0, 0.0) });
    let comm = l.action(&d);
    assert!((0..5).all(|i| comm[(i, i)].norm() < 1e-14));
    let dual = apply_ldag(&l, &d).unwrap();
    // L is self-adjoint for Hermitian H
    assert!(max_abs(&(dual - comm)) < 1e-14);
}

#[test]
fn diagonal_of_the_commutator_vanishes_under_refinement() {
    let r = refinement_study(0.25, 20.0, &[100, 200, 400]).unwrap();
    for w in r.windows(2) {
        let ratio = w[1].1 / w[0].1;
        assert!((ratio - 0.5).abs() < 0.1, "{r:?}");
    }
    assert!(refinement_study(0.0, 20.0, &[50]).unwrap()[0].1 == 0.0);
}

#[test]
fn real_z_and_non_hermitian_input_are_refused() {
    let l = two_level();
    let pair = ProjectorPair::diagonal(2);
    assert!(matches!(verify_resolvent_partition(&l, &pair, c(0.5, 0.0)), Err(Error::Config(_))));
    let bad = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    assert!(FiniteLiouvillian::new(bad).is_err());
}
