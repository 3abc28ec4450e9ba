//! States as antilinear functionals over observables with a diagonal
//! singularity. Both carry a singular diagonal density and a regular
//! kernel; the pairing is (ρ|O) = ∫ρ_ω O_ω + ∫∫ conj(ρ_ωω′) O_ωω′.
//!
//! Kernels are stored twice: as node samples, which the pairing uses, and as
//! a sum of separable terms s·a(ω)·conj(b(ω′)), which is what the transforms
//! to the interacting basis and their continuations act on.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::EnergyGrid;
use crate::model::ScatteringModel;
use crate::profile::{Expr, Profile, Singularity};

const HERMITIAN_TOL: f64 = 1e-12;

/// One separable kernel term s·a(ω)·conj(b(ω′)).
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub s: Complex64,
    pub a: Profile,
    pub b: Profile,
}

impl Term {
    pub fn new(s: Complex64, a: impl Into<Profile>, b: impl Into<Profile>) -> Self {
        Term { s, a: a.into(), b: b.into() }
    }

    /// The term of the complex-conjugated kernel.
    pub fn conj(&self) -> Term {
        Term { s: self.s.conj(), a: self.a.conj(), b: self.b.conj() }
    }
}

fn sample_terms(grid: &EnergyGrid, terms: &[Term]) -> DMatrix<Complex64> {
    let n = grid.len();
    let mut k = DMatrix::zeros(n, n);
    for t in terms {
        let a: Vec<Complex64> = grid.nodes().iter().map(|&x| t.a.eval_real(x)).collect();
        let b: Vec<Complex64> = grid.nodes().iter().map(|&x| t.b.eval_real(x).conj()).collect();
        for j in 0..n {
            for i in 0..n {
                k[(i, j)] += t.s * a[i] * b[j];
            }
        }
    }
    k
}

/// Splits a Hermitian kernel sampled on the grid into separable terms
/// through the eigendecomposition of √w K √w.
fn factor_samples(grid: &EnergyGrid, k: &DMatrix<Complex64>) -> Vec<Term> {
    let n = grid.len();
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let m = DMatrix::from_fn(n, n, |i, j| k[(i, j)] * (sw[i] * sw[j]));
    let eig = m.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let mut terms = Vec::new();
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if scale == 0.0 || lam.abs() <= 1e-14 * scale {
            continue;
        }
        let v: Vec<Complex64> = (0..n).map(|i| eig.eigenvectors[(i, idx)] / sw[i]).collect();
        let p = grid.sampled_profile(v);
        terms.push(Term { s: Complex64::new(lam, 0.0), a: p.clone(), b: p });
    }
    terms
}

/// Largest modulus of any entry.
pub fn max_abs(k: &DMatrix<Complex64>) -> f64 {
    k.iter().fold(0.0, |a, v| a.max(v.norm()))
}

fn hermitian_defect(k: &DMatrix<Complex64>) -> f64 {
    let n = k.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((k[(i, j)] - k[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_square(grid: &EnergyGrid, len: usize, k: &DMatrix<Complex64>) -> Result<()> {
    let n = grid.len();
    if len != n || k.nrows() != n || k.ncols() != n {
        return Err(Error::GridMismatch(format!(
            "expected {n} samples and an {n}x{n} kernel, got {len} and {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(())
}

/// An observable: real diagonal O_ω and Hermitian regular kernel O_ωω′.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableKernel {
    grid: EnergyGrid,
    diag: Vec<f64>,
    reg: DMatrix<Complex64>,
    diag_profile: Option<Profile>,
    terms: Vec<Term>,
}

impl ObservableKernel {
    /// Builds from closed-form or sampled profiles.
    pub fn from_parts(grid: &EnergyGrid, diag: Option<Profile>, terms: Vec<Term>) -> Result<Self> {
        let d: Vec<Complex64> = match &diag {
            Some(p) => grid.nodes().iter().map(|&x| p.eval_real(x)).collect(),
            None => vec![Complex64::new(0.0, 0.0); grid.len()],
        };
        for (i, v) in d.iter().enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite { index: i, omega: grid.nodes()[i] });
            }
            if v.im.abs() > HERMITIAN_TOL * (1.0 + v.re.abs()) {
                return Err(Error::Config(format!("observable diagonal is not real at node {i}")));
            }
        }
        let reg = sample_terms(grid, &terms);
        if reg.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Config("observable kernel has non-finite samples".into()));
        }
        let defect = hermitian_defect(&reg);
        if defect > HERMITIAN_TOL * (1.0 + max_abs(&reg)) {
            return Err(Error::Config(format!("observable kernel is not Hermitian (defect {defect:e})")));
        }
        Ok(ObservableKernel { grid: grid.clone(), diag: d.iter().map(|v| v.re).collect(), reg, diag_profile: diag, terms })
    }

    /// Builds from raw node samples; the kernel is factored for later use.
    pub fn from_samples(grid: &EnergyGrid, diag: Vec<f64>, reg: DMatrix<Complex64>) -> Result<Self> {
        check_square(grid, diag.len(), &reg)?;
        if diag.iter().any(|v| !v.is_finite()) || reg.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Config("observable samples must be finite".into()));
        }
        let defect = hermitian_defect(&reg);
        if defect > HERMITIAN_TOL * (1.0 + max_abs(&reg)) {
            return Err(Error::Config(format!("observable kernel is not Hermitian (defect {defect:e})")));
        }
        let profile = grid.sampled_profile(diag.iter().map(|&v| Complex64::new(v, 0.0)).collect());
        let terms = factor_samples(grid, &reg);
        Ok(ObservableKernel { grid: grid.clone(), diag, reg, diag_profile: Some(profile), terms })
    }

    /// The identity: O_ω = 1, no regular part.
    pub fn identity(grid: &EnergyGrid) -> Self {
        ObservableKernel::from_parts(grid, Some(Expr::constant(1.0).into()), Vec::new()).expect("identity is valid")
    }

    /// The Hamiltonian: O_ω = ω plus the potential κ g(ω)g(ω′).
    pub fn hamiltonian(model: &ScatteringModel) -> Self {
        let g: Profile = model.form_factor().clone().into();
        let terms = if model.kappa() == 0.0 {
            Vec::new()
        } else {
            vec![Term::new(Complex64::new(model.kappa(), 0.0), g.clone(), g)]
        };
        ObservableKernel::from_parts(model.grid(), Some(Expr::Power { p: 1.0 }.into()), terms)
            .expect("hamiltonian is valid")
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn reg(&self) -> &DMatrix<Complex64> {
        &self.reg
    }

    pub fn diag_profile(&self) -> Option<&Profile> {
        self.diag_profile.as_ref()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Q†O: the regular kernel alone.
    pub fn regular_part(&self) -> Self {
        ObservableKernel {
            grid: self.grid.clone(),
            diag: vec![0.0; self.grid.len()],
            reg: self.reg.clone(),
            diag_profile: None,
            terms: self.terms.clone(),
        }
    }

    /// P†O: the diagonal alone.
    pub fn diagonal_part(&self) -> Self {
        let n = self.grid.len();
        ObservableKernel {
            grid: self.grid.clone(),
            diag: self.diag.clone(),
            reg: DMatrix::zeros(n, n),
            diag_profile: self.diag_profile.clone(),
            terms: Vec::new(),
        }
    }

    /// Profiles that a continuation of this observable would evaluate.
    pub fn profiles(&self) -> Vec<&Profile> {
        self.diag_profile.iter().chain(self.terms.iter().flat_map(|t| [&t.a, &t.b])).collect()
    }

    pub fn is_continuable(&self) -> bool {
        self.profiles().iter().all(|p| p.is_continuable())
    }

    pub fn singularities(&self) -> Vec<Singularity> {
        self.profiles().iter().flat_map(|p| p.singularities()).collect()
    }
}

/// A state: non-negative diagonal density d and Hermitian kernel k,
/// stored so that conj(k) enters the pairing. A wavefunction φ gives
/// d = |φ|², k_ωω′ = φ_ω conj(φ_ω′).
#[derive(Debug, Clone, PartialEq)]
pub struct StateFunctional {
    grid: EnergyGrid,
    d: Vec<f64>,
    k: DMatrix<Complex64>,
    terms: Vec<Term>,
}

impl StateFunctional {
    /// Pure state from a wavefunction, normalised by quadrature when its
    /// norm is off by more than 1e−8.
    pub fn from_wavefunction(grid: &EnergyGrid, phi: impl Into<Profile>) -> Result<Self> {
        let phi = phi.into();
        let samples: Vec<Complex64> = grid.nodes().iter().map(|&x| phi.eval_real(x)).collect();
        if let Some(i) = samples.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { index: i, omega: grid.nodes()[i] });
        }
        let norm: f64 = samples.iter().zip(grid.weights()).map(|(v, w)| w * v.norm_sqr()).sum();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Config(format!("wavefunction norm must be positive and finite, got {norm}")));
        }
        let scale = if (norm - 1.0).abs() <= 1e-8 { 1.0 } else { 1.0 / norm };
        let d = samples.iter().map(|v| v.norm_sqr() * scale).collect();
        let n = grid.len();
        let k = DMatrix::from_fn(n, n, |i, j| samples[i] * samples[j].conj() * scale);
        let terms = vec![Term { s: Complex64::new(scale, 0.0), a: phi.clone(), b: phi }];
        Ok(StateFunctional { grid: grid.clone(), d, k, terms })
    }

    /// State from node samples; validated and factored.
    pub fn from_samples(grid: &EnergyGrid, d: Vec<f64>, k: DMatrix<Complex64>) -> Result<Self> {
        check_square(grid, d.len(), &k)?;
        let terms = factor_samples(grid, &k);
        let s = StateFunctional { grid: grid.clone(), d, k, terms };
        s.validate()?;
        Ok(s)
    }

    /// Diagonal state with density d and no kernel.
    pub fn diagonal(grid: &EnergyGrid, d: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        StateFunctional::from_samples(grid, d, DMatrix::zeros(n, n))
    }

    /// Positivity of d, unit trace and Hermiticity of k.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.d.iter().position(|&v| !(v.is_finite() && v >= -1e-12)) {
            return Err(Error::Config(format!("state density is negative or non-finite at node {i}")));
        }
        let trace = self.trace();
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("state trace is {trace}, expected 1")));
        }
        let defect = hermitian_defect(&self.k);
        if defect > HERMITIAN_TOL * (1.0 + max_abs(&self.k)) {
            return Err(Error::Config(format!("state kernel is not Hermitian (defect {defect:e})")));
        }
        Ok(())
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn k(&self) -> &DMatrix<Complex64> {
        &self.k
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Σ w d, the pairing with the identity.
    pub fn trace(&self) -> f64 {
        self.d.iter().zip(self.grid.weights()).map(|(d, w)| d * w).sum()
    }

    /// max |k_ii − d_i|; zero for pure states.
    pub fn purity_defect(&self) -> f64 {
        self.d.iter().enumerate().map(|(i, &d)| (self.k[(i, i)] - d).norm()).fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.k.iter().all(|v| *v == Complex64::new(0.0, 0.0))
    }

    /// Time inversion as kernel conjugation; d is unchanged.
    pub fn time_invert(&self) -> Self {
        StateFunctional {
            grid: self.grid.clone(),
            d: self.d.clone(),
            k: self.k.map(|v| v.conj()),
            terms: self.terms.iter().map(Term::conj).collect(),
        }
    }

    /// (Pρ, Qρ): the diagonal density alone and the kernel alone.
    pub fn decompose(&self) -> (Self, Self) {
        let n = self.grid.len();
        let p = StateFunctional { grid: self.grid.clone(), d: self.d.clone(), k: DMatrix::zeros(n, n), terms: Vec::new() };
        let q = StateFunctional { grid: self.grid.clone(), d: vec![0.0; n], k: self.k.clone(), terms: self.terms.clone() };
        (p, q)
    }

    /// The functional a·ρ1 + b·ρ2. Kernel samples scale by the coefficients
    /// and the pairing conjugates them, which is the antilinearity. The real
    /// density cannot carry a complex factor, so complex coefficients are
    /// only accepted when both densities vanish.
    pub fn combine(a: Complex64, r1: &Self, b: Complex64, r2: &Self) -> Result<Self> {
        if !r1.grid.same_as(&r2.grid) {
            return Err(Error::GridMismatch("states live on different grids".into()));
        }
        let has_density = r1.d.iter().chain(&r2.d).any(|&v| v != 0.0);
        if (a.im != 0.0 || b.im != 0.0) && has_density {
            return Err(Error::Config("complex coefficients need kernel-only functionals".into()));
        }
        let d = r1.d.iter().zip(&r2.d).map(|(x, y)| a.re * x + b.re * y).collect();
        let k = r1.k.map(|v| v * a) + r2.k.map(|v| v * b);
        let mut terms: Vec<Term> = r1.terms.iter().map(|t| Term { s: t.s * a, ..t.clone() }).collect();
        terms.extend(r2.terms.iter().map(|t| Term { s: t.s * b, ..t.clone() }));
        Ok(StateFunctional { grid: r1.grid.clone(), d, k, terms })
    }

    /// Profiles that a continuation of this state's kernel would evaluate.
    pub fn profiles(&self) -> Vec<&Profile> {
        self.terms.iter().flat_map(|t| [&t.a, &t.b]).collect()
    }

    pub fn is_continuable(&self) -> bool {
        self.profiles().iter().all(|p| p.is_continuable())
    }

    pub fn singularities(&self) -> Vec<Singularity> {
        self.profiles().iter().flat_map(|p| p.singularities()).collect()
    }
}

/// (ρ|O) = Σ w_i d_i O_i + Σ_ij w_i w_j conj(k_ij) O_ij.
pub fn pair(rho: &StateFunctional, obs: &ObservableKernel) -> Result<Complex64> {
    if !rho.grid.same_as(&obs.grid) {
        return Err(Error::GridMismatch("state and observable live on different grids".into()));
    }
    let w = rho.grid.weights();
    let n = w.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        acc += w[i] * rho.d[i] * obs.diag[i];
    }
    for j in 0..n {
        let mut col = Complex64::new(0.0, 0.0);
        for i in 0..n {
            col += rho.k[(i, j)].conj() * obs.reg[(i, j)] * w[i];
        }
        acc += col * w[j];
    }
    Ok(acc)
}

/// Default wave packet √ω/((ω − center)² + width²), unnormalised.
pub fn packet(center: f64, width: f64) -> Expr {
    Expr::product(vec![Expr::Power { p: 0.5 }, Expr::Lorentz { center, width }])
}
