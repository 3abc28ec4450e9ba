//! The projector algebra of the Liouvillian on small dense matrices.
//!
//! Operators on C^n are vectorised column-major, vec(O)[i + n·j] = O_ij, so
//! O ↦ [H, O] becomes the n²×n² matrix I⊗H − Hᵀ⊗I. P keeps the diagonal
//! entries and Q the rest; both are coordinate projectors in this basis, so
//! restricted inverses are plain sub-matrix inverses.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::functionals::max_abs;
use crate::grid::build_grid;
use crate::model::{threshold_form_factor, ModelOptions, ScatteringModel};
use crate::oracle::DiscretizedSystem;

/// Condition number above which a restricted resolvent is refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteLiouvillian {
    hamiltonian: DMatrix<Complex64>,
    sup: OnceLock<DMatrix<Complex64>>,
}

impl FiniteLiouvillian {
    pub fn new(hamiltonian: DMatrix<Complex64>) -> Result<Self> {
        let n = hamiltonian.nrows();
        if n == 0 || hamiltonian.ncols() != n {
            return Err(Error::GridMismatch(format!("hamiltonian must be square, got {}x{}", n, hamiltonian.ncols())));
        }
        let defect = max_abs(&(&hamiltonian - hamiltonian.adjoint()));
        if defect > 1e-12 * (1.0 + max_abs(&hamiltonian)) {
            return Err(Error::Config(format!("hamiltonian is not Hermitian (defect {defect:e})")));
        }
        Ok(FiniteLiouvillian { hamiltonian, sup: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &DMatrix<Complex64> {
        &self.hamiltonian
    }

    /// The n²×n² matrix of O ↦ [H, O], built on first use.
    pub fn superoperator(&self) -> &DMatrix<Complex64> {
        self.sup.get_or_init(|| {
            let h = &self.hamiltonian;
            let id = DMatrix::<Complex64>::identity(h.nrows(), h.nrows());
            id.kronecker(h) - h.transpose().kronecker(&id)
        })
    }

    /// [H, O].
    pub fn action(&self, o: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        &self.hamiltonian * o - o * &self.hamiltonian
    }
}

/// L†O = [H, O], so that (ρ|L†O) = (ρ|[H, O]).
pub fn apply_ldag(l: &FiniteLiouvillian, o: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = l.dim();
    if o.nrows() != n || o.ncols() != n {
        return Err(Error::GridMismatch(format!("operator is {}x{}, expected {n}x{n}", o.nrows(), o.ncols())));
    }
    Ok(l.action(o))
}

/// P extracts the diagonal, Q = I − P the off-diagonal part.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorPair {
    n: usize,
    p_index: Vec<usize>,
    q_index: Vec<usize>,
}

impl ProjectorPair {
    pub fn diagonal(n: usize) -> Self {
        let (p_index, q_index) = (0..n * n).partition(|k| k % n == k / n);
        ProjectorPair { n, p_index, q_index }
    }

    pub fn p(&self, o: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if i == j { o[(i, j)] } else { Complex64::new(0.0, 0.0) })
    }

    pub fn q(&self, o: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        o - self.p(o)
    }

    fn projector(&self, index: &[usize]) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n * self.n, self.n * self.n);
        for &k in index {
            m[(k, k)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// P on the vectorised space.
    pub fn p_matrix(&self) -> DMatrix<Complex64> {
        self.projector(&self.p_index)
    }

    pub fn q_matrix(&self) -> DMatrix<Complex64> {
        self.projector(&self.q_index)
    }
}

fn submatrix(m: &DMatrix<Complex64>, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn embed(block: &DMatrix<Complex64>, rows: &[usize], cols: &[usize], size: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(size, size);
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            m[(r, c)] = block[(i, j)];
        }
    }
    m
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Inverse with a 1-norm condition estimate; refuses when singular or
/// ill-conditioned.
fn checked_inverse(a: DMatrix<Complex64>, what: &'static str) -> Result<DMatrix<Complex64>> {
    if a.nrows() == 0 {
        return Ok(a);
    }
    let na = norm1(&a);
    let inv = a.lu().try_inverse().ok_or(Error::IllConditioned { what: what.into(), cond: f64::INFINITY })?;
    let cond = na * norm1(&inv);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned { what: what.into(), cond });
    }
    Ok(inv)
}

/// The blocks of the partitioned resolvent (M − z)⁻¹ for a superoperator M:
/// Ψ = −PMQ(QMQ − z)⁻¹QMP, C = −(QMQ − z)⁻¹QMP, D = −PMQ(QMQ − z)⁻¹, all
/// as full n²×n² matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventBlocks {
    pub psi: DMatrix<Complex64>,
    pub creation: DMatrix<Complex64>,
    pub destruction: DMatrix<Complex64>,
    /// (QMQ − z)⁻¹ on the Q subspace, zero elsewhere.
    pub q_resolvent: DMatrix<Complex64>,
}

pub fn resolvent_blocks(m: &DMatrix<Complex64>, pair: &ProjectorPair, z: Complex64) -> Result<ResolventBlocks> {
    if z.im == 0.0 {
        return Err(Error::Config("resolvent needs Im z ≠ 0".into()));
    }
    let size = m.nrows();
    let q = &pair.q_index;
    let mut a = submatrix(m, q, q);
    for k in 0..q.len() {
        a[(k, k)] -= z;
    }
    let q_resolvent = embed(&checked_inverse(a, "restricted resolvent (QMQ − z)")?, q, q, size);
    let (p, qm) = (pair.p_matrix(), pair.q_matrix());
    let qmp = &qm * m * &p;
    let pmq = &p * m * &qm;
    let creation = -(&q_resolvent * &qmp);
    let destruction = -(&pmq * &q_resolvent);
    let psi = -(&pmq * &q_resolvent * &qmp);
    Ok(ResolventBlocks { psi, creation, destruction, q_resolvent })
}

/// ‖[P + C](PMP + Ψ − z)⁻¹_P[P + D] + (QMQ − z)⁻¹Q − (M − z)⁻¹‖_F.
fn partition_residual(m: &DMatrix<Complex64>, pair: &ProjectorPair, z: Complex64) -> Result<f64> {
    let size = m.nrows();
    let b = resolvent_blocks(m, pair, z)?;
    let p = pair.p_matrix();
    let pi = &pair.p_index;
    let mut inner = submatrix(&(&p * m * &p + &b.psi), pi, pi);
    for k in 0..pi.len() {
        inner[(k, k)] -= z;
    }
    let inner = embed(&checked_inverse(inner, "collision block (PMP + Ψ − z)")?, pi, pi, size);
    let rhs = (&p + &b.creation) * inner * (&p + &b.destruction) + &b.q_resolvent;
    let mut full = m.clone();
    for k in 0..size {
        full[(k, k)] -= z;
    }
    let lhs = checked_inverse(full, "full resolvent (M − z)")?;
    Ok((rhs - lhs).norm())
}

/// Residual of the partition of (L − z)⁻¹.
pub fn verify_resolvent_partition(l: &FiniteLiouvillian, pair: &ProjectorPair, z: Complex64) -> Result<f64> {
    partition_residual(l.superoperator(), pair, z)
}

/// Residual of the dual partition of (L† + z)⁻¹, the form that acts on
/// observables.
pub fn verify_dual_partition(l: &FiniteLiouvillian, pair: &ProjectorPair, z: Complex64) -> Result<f64> {
    partition_residual(&l.superoperator().adjoint(), pair, -z)
}

/// Ψ†(z) = −P L† Q (Q L† Q + z)⁻¹ Q L† P.
pub fn collision(l: &FiniteLiouvillian, pair: &ProjectorPair, z: Complex64) -> Result<DMatrix<Complex64>> {
    Ok(resolvent_blocks(&l.superoperator().adjoint(), pair, -z)?.psi)
}

/// ‖Ψ − PΨP‖, ‖C − QCP‖, ‖D − PDQ‖.
pub fn support_defects(b: &ResolventBlocks, pair: &ProjectorPair) -> [f64; 3] {
    let (p, q) = (pair.p_matrix(), pair.q_matrix());
    [
        max_abs(&(&b.psi - &p * &b.psi * &p)),
        max_abs(&(&b.creation - &q * &b.creation * &p)),
        max_abs(&(&b.destruction - &p * &b.destruction * &q)),
    ]
}

/// Projector identities P² = P, Q² = Q, PQ = 0, P + Q = I on a probe.
pub fn projector_defect(pair: &ProjectorPair, o: &DMatrix<Complex64>) -> f64 {
    let p = pair.p(o);
    let q = pair.q(o);
    [
        max_abs(&(pair.p(&p) - &p)),
        max_abs(&(pair.q(&q) - &q)),
        max_abs(&pair.p(&q)),
        max_abs(&(&p + &q - o)),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn random_matrix(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let a = random_matrix(n, rng);
    (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// One random (H, z) test instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub hamiltonian: DMatrix<Complex64>,
    pub z: Complex64,
}

/// `count` instances with n cycling through 2..=8 and |Im z| ∈ [0.5, 2].
pub fn random_instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let n = 2 + k % 7;
            let hamiltonian = random_hermitian(n, &mut rng);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let z = Complex64::new(rng.gen_range(-2.0..2.0), sign * rng.gen_range(0.5..2.0));
            Instance { hamiltonian, z }
        })
        .collect()
}

/// max|[H, O]_ii| over max|[H, O]_ij|/√(w_i w_j): the size of the diagonal
/// of the commutator relative to its continuum-normalised kernel.
pub fn diagonal_commutator_ratio(sys: &DiscretizedSystem, o: &DMatrix<Complex64>) -> f64 {
    let c = sys.hamiltonian() * o - o * sys.hamiltonian();
    let w = sys.grid().weights();
    let n = w.len();
    let mut diag = 0.0f64;
    let mut off = 0.0f64;
    for i in 0..n {
        diag = diag.max(c[(i, i)].norm());
        for j in 0..n {
            if i != j {
                off = off.max(c[(i, j)].norm() / (w[i] * w[j]).sqrt());
            }
        }
    }
    diag / off
}

/// The commutator ratio for the rank-one probe a(ω) = √ω e^{−ω/4} e^{iω/2}
/// on grids of the given sizes.
pub fn refinement_study(kappa: f64, omega_max: f64, sizes: &[usize]) -> Result<Vec<(usize, f64)>> {
    sizes
        .iter()
        .map(|&n| {
            let grid = build_grid(n, omega_max)?;
            let model = ScatteringModel::new(kappa, threshold_form_factor(1.0), grid, ModelOptions::default())?;
            let sys = DiscretizedSystem::new(&model);
            let g = model.grid();
            let a: Vec<Complex64> = g
                .nodes()
                .iter()
                .zip(g.weights())
                .map(|(&x, &w)| Complex64::from_polar(w.sqrt() * x.sqrt() * (-x / 4.0).exp(), x / 2.0))
                .collect();
            let o = DMatrix::from_fn(n, n, |i, j| a[i] * a[j].conj());
            Ok((n, diagonal_commutator_ratio(&sys, &o)))
        })
        .collect()
}
