//! Lippmann–Schwinger vectors of the rank-one model and the change to the
//! interacting "+" representation.
//!
//! Everything here is closed form: ⟨y|ω+⟩ = δ(y − ω) + κ g(y) g*(ω)/
//! [η(ω+i0)(ω − y + i0)], and the products of such kernels with states and
//! observables reduce, after the Plemelj split, to Cauchy transforms of the
//! input profiles. The same formulas continue off the axis, which is what the
//! complex decomposition builds on.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::{max_abs, ObservableKernel, StateFunctional};
use crate::grid::EnergyGrid;
use crate::model::{ScatteringModel, Side};
use crate::profile::Profile;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Nodes at threshold whose + coefficients are flagged rather than trusted.
pub const THRESHOLD_NODES: usize = 2;

fn finite(v: Complex64) -> bool {
    v.re.is_finite() && v.im.is_finite()
}

/// How the ±i0 kernel is put on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsScheme {
    /// Singularity subtraction with the derivative correction of the node
    /// rule: weakly accurate to quadrature precision.
    Full,
    /// Singularity subtraction only: sharper node-wise eigen-residual,
    /// weaker overlaps.
    Plain,
}

/// ⟨y|ω+⟩ = δ(y − ω) + coefficient·g(y)/(ω − y + i0).
#[derive(Debug, Clone, PartialEq)]
pub struct LSKernel {
    omega: f64,
    coefficient: Complex64,
    g_omega: Complex64,
}

pub fn ls_plus(model: &ScatteringModel, omega: f64) -> Result<LSKernel> {
    let om = model.grid().omega_max();
    if !(omega > 0.0 && omega < om) {
        return Err(Error::OutsideSegment { what: "scattering energy", x: omega, omega_max: om });
    }
    let z = Complex64::new(omega, 0.0);
    let g_omega = model.g(z);
    let coefficient = model.kappa() * g_omega.conj() / model.eta_side(z, Side::Plus);
    Ok(LSKernel { omega, coefficient, g_omega })
}

impl LSKernel {
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// κ g*(ω)/η(ω + i0).
    pub fn coefficient(&self) -> Complex64 {
        self.coefficient
    }

    /// Principal-value part of the regular kernel at y ≠ ω.
    pub fn regular_pv(&self, model: &ScatteringModel, y: f64) -> Complex64 {
        self.coefficient * model.g(Complex64::new(y, 0.0)) / (self.omega - y)
    }

    /// Weight of the extra δ(y − ω) that the +i0 prescription produces.
    pub fn delta_coefficient(&self) -> Complex64 {
        Complex64::new(0.0, -PI) * self.coefficient * self.g_omega
    }

    /// The vector on the grid in the normalised basis |i⟩ ≈ √w_i|ω_i⟩,
    /// scaled by √w_j so that the columns of all nodes form an approximately
    /// unitary matrix. ω must be a grid node.
    pub fn discretize(&self, model: &ScatteringModel, scheme: LsScheme) -> Result<DVector<Complex64>> {
        let grid = model.grid();
        let j = grid
            .nodes()
            .iter()
            .position(|&x| x == self.omega)
            .ok_or_else(|| Error::GridMismatch(format!("{} is not a grid node", self.omega)))?;
        let d = match scheme {
            LsScheme::Full => Some(differentiation_matrix(grid)),
            LsScheme::Plain => None,
        };
        let g: Vec<f64> = grid.nodes().iter().map(|&x| model.g(Complex64::new(x, 0.0)).re).collect();
        Ok(ls_column(grid, &g, self.coefficient, j, d.as_ref()))
    }
}

/// Barycentric differentiation matrix of the grid nodes.
pub fn differentiation_matrix(grid: &EnergyGrid) -> DMatrix<f64> {
    let x = grid.nodes();
    let lam = grid.bary();
    let n = x.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            if i != j {
                let v = (lam[j] / lam[i]) / (x[i] - x[j]);
                d[(i, j)] = v;
                row += v;
            }
        }
        d[(i, i)] = -row;
    }
    d
}

fn ls_column(grid: &EnergyGrid, g: &[f64], coef: Complex64, j: usize, d: Option<&DMatrix<f64>>) -> DVector<Complex64> {
    let x = grid.nodes();
    let w = grid.weights();
    let om = grid.omega_max();
    let n = x.len();
    // weights c_i of the rule Σ_i c_i h(x_i) ≈ ∫ h(y)/(x_j − y + i0) dy
    let mut c = vec![ZERO; n];
    let mut sum = 0.0;
    for i in 0..n {
        if i != j {
            let v = 1.0 / (x[j] - x[i]);
            c[i] = Complex64::new(v, 0.0);
            sum += w[i] * v;
        }
    }
    c[j] = Complex64::new(((x[j] / (om - x[j])).ln() - sum) / w[j], -PI / w[j]);
    if let Some(d) = d {
        for i in 0..n {
            c[i] -= w[j] * d[(j, i)] / w[i];
        }
    }
    let sj = w[j].sqrt();
    DVector::from_fn(n, |i, _| {
        let delta = if i == j { 1.0 / w[j] } else { 0.0 };
        (delta + coef * g[i] * c[i]) * w[i].sqrt() * sj
    })
}

/// All discretised |ω_j+⟩ as columns.
pub fn ls_vectors(model: &ScatteringModel, scheme: LsScheme) -> DMatrix<Complex64> {
    let grid = model.grid();
    let d = match scheme {
        LsScheme::Full => Some(differentiation_matrix(grid)),
        LsScheme::Plain => None,
    };
    let g: Vec<f64> = grid.nodes().iter().map(|&x| model.g(Complex64::new(x, 0.0)).re).collect();
    let cols: Vec<DVector<Complex64>> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let z = Complex64::new(grid.nodes()[j], 0.0);
            let coef = model.kappa() * g[j] / model.eta_side(z, Side::Plus);
            ls_column(grid, &g, coef, j, d.as_ref())
        })
        .collect();
    DMatrix::from_columns(&cols)
}

/// A profile prepared for Møller transforms: its product with g on the
/// inner rule.
#[derive(Debug, Clone)]
pub struct Continued {
    profile: Profile,
    g_inner: Vec<Complex64>,
}

impl Continued {
    pub fn new(model: &ScatteringModel, profile: Profile) -> Self {
        let g_inner = model
            .inner()
            .nodes
            .iter()
            .zip(model.g_inner())
            .map(|(&y, g)| g * profile.eval_real(y))
            .collect();
        Continued { profile, g_inner }
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// p(z) + τ(z) ∫ g p/(z − y) dy on the given continuation. On the axis
    /// with side Minus this is ⟨x+|p⟩; with side Plus and the conjugated
    /// profile it is conj⟨x+|p⟩.
    pub fn moller(&self, model: &ScatteringModel, z: Complex64, side: Side) -> Complex64 {
        self.moller_with_tau(model, z, side, model.tau(z, side))
    }

    fn moller_with_tau(&self, model: &ScatteringModel, z: Complex64, side: Side, tau: Complex64) -> Complex64 {
        let p = self.profile.eval(z);
        if tau == ZERO {
            return p;
        }
        p + tau * model.cauchy(&self.g_inner, model.g(z) * p, z, side)
    }
}

/// Values of a continued observable at one point, on one side of a pair.
#[derive(Debug, Clone)]
pub struct PointValues {
    pub z: Complex64,
    pub tau: Complex64,
    a_g: Complex64,
    f_cauchy: Complex64,
    factors: Vec<Complex64>,
}

/// An observable prepared for ⟨ω+|O|ω′+⟩: its regular part R_O(ω, ω′),
/// evaluated from the left point ω (continued from x − i0) and the right
/// point ω′ (continued from x + i0).
#[derive(Debug, Clone)]
pub struct ContinuedObservable {
    diag: Option<(Profile, Vec<Complex64>)>,
    terms: Vec<(Complex64, Continued, Continued)>,
}

impl ContinuedObservable {
    pub fn new(model: &ScatteringModel, obs: &ObservableKernel) -> Self {
        let diag = obs.diag_profile().map(|f| {
            let inner = model
                .inner()
                .nodes
                .iter()
                .zip(model.g_inner())
                .map(|(&y, g)| g * g * f.eval_real(y))
                .collect();
            (f.clone(), inner)
        });
        let terms = obs
            .terms()
            .iter()
            .map(|t| (t.s, Continued::new(model, t.a.clone()), Continued::new(model, t.b.conj())))
            .collect();
        ContinuedObservable { diag, terms }
    }

    fn point(&self, model: &ScatteringModel, z: Complex64, side: Side, left: bool) -> PointValues {
        let tau = model.tau(z, side);
        let (a_g, f_cauchy) = match &self.diag {
            Some((f, inner)) => {
                let fz = f.eval(z);
                let gz = model.g(z);
                (fz * gz, model.cauchy(inner, fz * gz * gz, z, side))
            }
            None => (ZERO, ZERO),
        };
        let factors = self
            .terms
            .iter()
            .map(|(_, a, bs)| {
                let c = if left { a } else { bs };
                c.moller_with_tau(model, z, side, tau)
            })
            .collect();
        PointValues { z, tau, a_g, f_cauchy, factors }
    }

    /// Values at a left point ω of ⟨ω+|O|ω′+⟩.
    pub fn left(&self, model: &ScatteringModel, z: Complex64, side: Side) -> PointValues {
        self.point(model, z, side, true)
    }

    /// Values at a right point ω′ of ⟨ω+|O|ω′+⟩.
    pub fn right(&self, model: &ScatteringModel, z: Complex64, side: Side) -> PointValues {
        self.point(model, z, side, false)
    }

    /// The part with the removable singularity at ω = ω′.
    pub fn quotient(&self, l: &PointValues, r: &PointValues) -> Complex64 {
        if self.diag.is_none() {
            return ZERO;
        }
        let n = l.a_g * r.tau - r.a_g * l.tau + l.tau * r.tau * (l.f_cauchy - r.f_cauchy);
        n / (r.z - l.z)
    }

    pub fn separable(&self, l: &PointValues, r: &PointValues) -> Complex64 {
        self.terms
            .iter()
            .zip(l.factors.iter().zip(&r.factors))
            .map(|((s, _, _), (a, b))| s * a * b)
            .sum()
    }

    /// R_O(ω, ω′) at two distinct points.
    pub fn kernel(&self, l: &PointValues, r: &PointValues) -> Complex64 {
        self.quotient(l, r) + self.separable(l, r)
    }

    /// R_O on the grid. The diagonal is the limit ω′ → ω, taken by
    /// Richardson extrapolation of symmetric offsets.
    pub fn grid_matrix(&self, model: &ScatteringModel) -> Result<DMatrix<Complex64>> {
        let grid = model.grid();
        let x = grid.nodes();
        let n = x.len();
        let om = grid.omega_max();
        let lefts: Vec<PointValues> =
            x.par_iter().map(|&v| self.left(model, Complex64::new(v, 0.0), Side::Minus)).collect();
        let rights: Vec<PointValues> =
            x.par_iter().map(|&v| self.right(model, Complex64::new(v, 0.0), Side::Plus)).collect();
        let diag: Vec<Complex64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let sep = self.separable(&lefts[i], &rights[i]);
                if self.diag.is_none() {
                    return sep;
                }
                let h = 1e-2f64.min(0.25 * x[i].min(om - x[i]));
                let sym = |h: f64| {
                    let up = self.right(model, Complex64::new(x[i] + h, 0.0), Side::Plus);
                    let dn = self.right(model, Complex64::new(x[i] - h, 0.0), Side::Plus);
                    0.5 * (self.quotient(&lefts[i], &up) + self.quotient(&lefts[i], &dn))
                };
                (4.0 * sym(0.5 * h) - sym(h)) / 3.0 + sep
            })
            .collect();
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { diag[i] } else { self.kernel(&lefts[i], &rights[j]) })
                    .collect()
            })
            .collect();
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        if let Some(((i, j), _)) = m.iter().enumerate().map(|(k, v)| ((k % n, k / n), v)).find(|(_, v)| !finite(**v)) {
            return Err(Error::NonFinite { index: i.min(j), omega: x[i.min(j)] });
        }
        Ok(m)
    }
}

/// A state prepared for continuation. The conjugated + kernel splits as
/// conj⟨ω+|ρ|ω′+⟩ = Σ_k L_k(ω) R_k(ω′), with L continued from x + i0 and
/// R from x − i0.
#[derive(Debug, Clone)]
pub struct ContinuedState {
    terms: Vec<(Complex64, Continued, Continued)>,
}

impl ContinuedState {
    pub fn new(model: &ScatteringModel, rho: &StateFunctional) -> Self {
        let terms = rho
            .terms()
            .iter()
            .map(|t| (t.s.conj(), Continued::new(model, t.a.conj()), Continued::new(model, t.b.clone())))
            .collect();
        ContinuedState { terms }
    }

    pub fn left(&self, model: &ScatteringModel, z: Complex64, side: Side) -> Vec<Complex64> {
        let tau = model.tau(z, side);
        self.terms.iter().map(|(s, a, _)| s * a.moller_with_tau(model, z, side, tau)).collect()
    }

    pub fn right(&self, model: &ScatteringModel, z: Complex64, side: Side) -> Vec<Complex64> {
        let tau = model.tau(z, side);
        self.terms.iter().map(|(_, _, b)| b.moller_with_tau(model, z, side, tau)).collect()
    }
}

pub fn contract(l: &[Complex64], r: &[Complex64]) -> Complex64 {
    l.iter().zip(r).map(|(a, b)| a * b).sum()
}

/// The initial state in the + basis: the singular coefficient
/// c(ω) = (ρ0||ω+⟩⟨ω+|) and the kernel ⟨ω+|ρ0|ω′+⟩, stored with the same
/// convention as [`StateFunctional::k`].
#[derive(Debug, Clone)]
pub struct PlusRepresentation {
    pub c_diag: Vec<f64>,
    pub c_off: DMatrix<Complex64>,
    /// Nodes next to threshold where c_diag is not trusted.
    pub low_accuracy: Vec<bool>,
    state: StateFunctional,
}

impl PlusRepresentation {
    pub fn state(&self) -> &StateFunctional {
        &self.state
    }

    pub fn grid(&self) -> &EnergyGrid {
        self.state.grid()
    }

    pub fn trace(&self) -> f64 {
        self.c_diag.iter().zip(self.grid().weights()).map(|(c, w)| c * w).sum()
    }
}

/// Densities are read as mixtures of interacting eigenvectors: d enters the
/// singular coefficient directly, and only the kernel terms are transformed.
/// For a pure state this is exactly |⟨ω+|φ⟩|².
pub fn to_plus_representation(model: &ScatteringModel, rho: &StateFunctional) -> Result<PlusRepresentation> {
    let grid = model.grid();
    if !grid.same_as(rho.grid()) {
        return Err(Error::GridMismatch("state and model live on different grids".into()));
    }
    rho.validate()?;
    let x = grid.nodes();
    let n = x.len();
    let cs = ContinuedState::new(model, rho);
    let lefts: Vec<Vec<Complex64>> = x.par_iter().map(|&v| cs.left(model, Complex64::new(v, 0.0), Side::Plus)).collect();
    let rights: Vec<Vec<Complex64>> = x.par_iter().map(|&v| cs.right(model, Complex64::new(v, 0.0), Side::Minus)).collect();
    let raw = DMatrix::from_fn(n, n, |i, j| contract(&lefts[i], &rights[j]).conj());
    if let Some(i) = (0..n).find(|&i| !finite(raw[(i, i)]) || lefts[i].iter().chain(&rights[i]).any(|v| !finite(*v))) {
        return Err(Error::NonFinite { index: i, omega: x[i] });
    }
    let c_diag: Vec<f64> = (0..n).map(|i| rho.d()[i] - rho.k()[(i, i)].re + raw[(i, i)].re).collect();
    let c_off = DMatrix::from_fn(n, n, |i, j| 0.5 * (raw[(i, j)] + raw[(j, i)].conj()));
    let low_accuracy = (0..n).map(|i| i < THRESHOLD_NODES).collect();
    Ok(PlusRepresentation { c_diag, c_off, low_accuracy, state: rho.clone() })
}

/// O_inv = ∫ O_ω |ω+⟩⟨ω+| and O_fluc = O − O_inv, realised on the oracle
/// grid in the normalised basis.
#[derive(Debug, Clone)]
pub struct ObservableSplit {
    pub inv: DMatrix<Complex64>,
    pub fluc: DMatrix<Complex64>,
    /// Singular coefficient of O_inv in the + basis (O_ω itself).
    pub inv_diagonal: Vec<f64>,
    /// Singular coefficient of O_fluc in the + basis; zero by construction.
    pub fluc_diagonal: Vec<f64>,
}

pub fn split_observable(model: &ScatteringModel, obs: &ObservableKernel) -> Result<ObservableSplit> {
    let grid = model.grid();
    if !grid.same_as(obs.grid()) {
        return Err(Error::GridMismatch("observable and model live on different grids".into()));
    }
    let v = ls_vectors(model, LsScheme::Full);
    let n = grid.len();
    let f = obs.diag();
    let scaled = DMatrix::from_fn(n, n, |i, j| v[(i, j)] * f[j]);
    let inv = &scaled * v.adjoint();
    let w = grid.weights();
    let full = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { f[i] } else { 0.0 };
        obs.reg()[(i, j)] * (w[i] * w[j]).sqrt() + d
    });
    let fluc = full - &inv;
    debug_assert!(max_abs(&inv).is_finite());
    Ok(ObservableSplit { inv, fluc, inv_diagonal: f.to_vec(), fluc_diagonal: vec![0.0; n] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::packet;
    use crate::grid::build_grid;
    use crate::model::{threshold_form_factor, ModelOptions};

    fn model(n: usize, kappa: f64) -> ScatteringModel {
        let g = build_grid(n, 20.0).unwrap();
        ScatteringModel::new(kappa, threshold_form_factor(1.0), g, ModelOptions::default()).unwrap()
    }

    #[test]
    fn free_kernel_is_pure_delta() {
        let m = model(20, 0.0);
        let k = ls_plus(&m, m.grid().nodes()[7]).unwrap();
        assert_eq!(k.coefficient(), ZERO);
        let v = k.discretize(&m, LsScheme::Full).unwrap();
        for (i, x) in v.iter().enumerate() {
            let want = if i == 7 { 1.0 } else { 0.0 };
            assert!((x - want).norm() < 1e-13);
        }
    }

    #[test]
    fn endpoints_rejected() {
        let m = model(20, 0.25);
        assert!(ls_plus(&m, 0.0).is_err());
        assert!(ls_plus(&m, 20.0).is_err());
        assert!(ls_plus(&m, 3.0).unwrap().discretize(&m, LsScheme::Plain).is_err());
    }

    #[test]
    fn differentiation_matrix_is_exact_on_polynomials() {
        let g = build_grid(12, 20.0).unwrap();
        let d = differentiation_matrix(&g);
        let f: Vec<f64> = g.nodes().iter().map(|x| x * x * x - 2.0 * x).collect();
        for i in 0..12 {
            let df: f64 = (0..12).map(|j| d[(i, j)] * f[j]).sum();
            let x = g.nodes()[i];
            assert!((df - (3.0 * x * x - 2.0)).abs() < 1e-8 * (1.0 + 3.0 * x * x));
        }
    }

    #[test]
    fn free_plus_representation_returns_input() {
        let m = model(30, 0.0);
        let rho = StateFunctional::from_wavefunction(m.grid(), packet(2.0, 1.0)).unwrap();
        let rep = to_plus_representation(&m, &rho).unwrap();
        for i in 0..30 {
            assert!((rep.c_diag[i] - rho.d()[i]).abs() < 1e-14);
            for j in 0..30 {
                assert!((rep.c_off[(i, j)] - rho.k()[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn plus_representation_keeps_trace_and_hermiticity() {
        let m = model(200, 0.25);
        let rho = StateFunctional::from_wavefunction(m.grid(), packet(2.0, 1.0)).unwrap();
        let rep = to_plus_representation(&m, &rho).unwrap();
        assert!((rep.trace() - 1.0).abs() < 1e-8, "{}", rep.trace() - 1.0);
        assert!(rep.c_diag.iter().all(|&c| c >= -1e-10));
        let c = &rep.c_off;
        assert!((c - c.adjoint()).iter().all(|v| v.norm() < 1e-10));
        assert_eq!(rep.low_accuracy.iter().filter(|&&f| f).count(), THRESHOLD_NODES);
    }

    #[test]
    fn diagonal_state_has_no_kernel_in_plus_basis() {
        let m = model(40, 0.25);
        let rho = StateFunctional::from_wavefunction(m.grid(), packet(2.0, 1.0)).unwrap();
        let (p, _) = rho.decompose();
        let rep = to_plus_representation(&m, &p).unwrap();
        assert_eq!(rep.c_diag, p.d());
        assert!(rep.c_off.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn identity_and_hamiltonian_have_no_regular_part() {
        let m = model(60, 0.25);
        for obs in [ObservableKernel::identity(m.grid()), ObservableKernel::hamiltonian(&m)] {
            let r = ContinuedObservable::new(&m, &obs).grid_matrix(&m).unwrap();
            assert!(max_abs(&r) < 1e-6, "{}", max_abs(&r));
        }
    }
}
