//! Spectral decompositions of the evolution: the real biorthogonal family
//! built from |ω+⟩⟨ω′+|, and the complex family in which the resonance
//! pole contributes Gamov terms and the continuum is pushed onto deformed
//! paths.
//!
//! The complex route takes the real double integral over (ω, ω′), moves ω
//! into the upper half plane and ω′ into the lower one, and collects the
//! residues at z0* and z0 on the way:
//!
//! (ρ_t|O) = inv + Gamov·e^{i(z0*−z0)t} + two mixed terms + background.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{max_abs, ObservableKernel, StateFunctional};
use crate::grid::legendre_on;
use crate::model::{ScatteringModel, Side};
use crate::profile::{Profile, Singularity};
use crate::scattering::{
    contract, ls_vectors, ContinuedObservable, ContinuedState, LsScheme, PlusRepresentation, PointValues,
};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Radius and resolution of the circles on which residues are taken.
pub const RESIDUE_RADIUS: f64 = 0.05;
pub const RESIDUE_POINTS: usize = 64;
/// Closest a singularity may come to the path or to a residue circle.
pub const CLEARANCE: f64 = 0.05;
/// Segments per piece of the polygon that outlines a deformation region.
const OUTLINE_PIECE: usize = 400;

// ---------------------------------------------------------------------------
// real family

/// Smooth test vectors on which the distributional identities of the real
/// family are checked.
fn weak_tests(grid: &crate::grid::EnergyGrid) -> DMatrix<Complex64> {
    let fns: [fn(f64) -> f64; 5] = [
        |x| x.sqrt() * (-(x - 2.0) * (x - 2.0) / 2.0).exp(),
        |x| x * (-x / 3.0).exp(),
        |x| x.sqrt() / ((x - 2.0) * (x - 2.0) + 1.0),
        |x| (-(x - 6.0) * (x - 6.0)).exp(),
        |x| x.sqrt() * (-x / 2.0).exp(),
    ];
    let n = grid.len();
    let mut t = DMatrix::zeros(n, fns.len());
    for (k, f) in fns.iter().enumerate() {
        let v: Vec<f64> = grid.nodes().iter().zip(grid.weights()).map(|(&x, &w)| w.sqrt() * f(x)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for i in 0..n {
            t[(i, k)] = Complex64::new(v[i] / norm, 0.0);
        }
    }
    t
}

/// The real family on the grid: right elements |ω+⟩⟨ω′+| realised through
/// the discretised Lippmann–Schwinger vectors, left elements through R_O.
#[derive(Debug, Clone)]
pub struct RealSpectralFamily {
    vectors: DMatrix<Complex64>,
    plain: DMatrix<Complex64>,
    tests: DMatrix<Complex64>,
}

pub fn real_family(model: &ScatteringModel) -> RealSpectralFamily {
    RealSpectralFamily {
        vectors: ls_vectors(model, LsScheme::Full),
        plain: ls_vectors(model, LsScheme::Plain),
        tests: weak_tests(model.grid()),
    }
}

/// Biorthogonality and completeness figures of the real family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyChecks {
    /// max |⟨a|(Φ̃_ω|Φ_ω′) − δ|b⟩| over smooth test vectors.
    pub gram_weak: f64,
    /// max |⟨a|Σ|ω+⟩⟨ω+| − I|b⟩| over smooth test vectors.
    pub completeness_weak: f64,
    /// Largest off-diagonal Gram entry between interior nodes.
    pub gram_nodewise: f64,
    /// Operator norm of the completeness defect.
    pub completeness_nodewise: f64,
    /// max over interior nodes of ‖(H − ω)v‖/‖v‖.
    pub eigen_residual: f64,
}

impl RealSpectralFamily {
    /// Columns are the normalised |ω_j+⟩.
    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn checks(&self, hamiltonian: &DMatrix<Complex64>, nodes: &[f64], skip: usize) -> FamilyChecks {
        let n = nodes.len();
        let v = &self.vectors;
        let id = DMatrix::<Complex64>::identity(n, n);
        let gram = v.adjoint() * v - &id;
        let comp = v * v.adjoint() - &id;
        let t = &self.tests;
        let gram_weak = max_abs(&(t.adjoint() * &gram * t));
        let completeness_weak = max_abs(&(t.adjoint() * &comp * t));
        let mut gram_nodewise = 0.0f64;
        for i in skip..n - skip {
            for j in skip..n - skip {
                if i != j {
                    gram_nodewise = gram_nodewise.max(gram[(i, j)].norm());
                }
            }
        }
        let completeness_nodewise = comp.singular_values().max();
        let p = &self.plain;
        let res = hamiltonian * p - p * DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, nodes.iter().map(|&x| Complex64::new(x, 0.0))));
        let eigen_residual = (skip..n - skip)
            .map(|j| res.column(j).norm() / p.column(j).norm())
            .fold(0.0, f64::max);
        FamilyChecks { gram_weak, completeness_weak, gram_nodewise, completeness_nodewise, eigen_residual }
    }

    /// Σ_jk |ω_j+⟩⟨ω_j+|O|ω_k+⟩⟨ω_k+| for an oracle matrix O.
    pub fn reconstruct(&self, o: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let v = &self.vectors;
        v * (v.adjoint() * o * v) * v.adjoint()
    }

    /// max over smooth test vectors of |⟨a|X|b⟩|.
    pub fn weak_norm(&self, x: &DMatrix<Complex64>) -> f64 {
        max_abs(&(self.tests.adjoint() * x * &self.tests))
    }
}

/// One row of the energy/trace table of the real family.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTraceRow {
    pub name: &'static str,
    pub omega: f64,
    pub omega_prime: Option<f64>,
    pub value: Complex64,
    pub expected: Complex64,
}

impl EnergyTraceRow {
    pub fn residual(&self) -> f64 {
        (self.value - self.expected).norm()
    }
}

/// Nodes excluded at each end by node-wise checks: min(n/20, 10).
pub fn interior_skip(n: usize) -> usize {
    (n / 20).min(10)
}

/// (Φ̃_ω|I) = 1 and (Φ̃_ω|H) = ω measured on the discretised |ω+⟩ against
/// the dense Hamiltonian (Gram diagonal and Rayleigh quotient, worst interior
/// node), and (Φ̃_ωω′|H) = (Φ̃_ωω′|I) = 0 from the regular part of ⟨ω+|O|ω′+⟩
/// at every pair of grid nodes (the worst pair is reported) plus (3, 7).
pub fn phi_energy_trace(model: &ScatteringModel) -> Result<Vec<EnergyTraceRow>> {
    let grid = model.grid();
    let h = ObservableKernel::hamiltonian(model);
    let id = ObservableKernel::identity(grid);
    let n = grid.len();
    let v = ls_vectors(model, LsScheme::Full);
    let h_or = crate::oracle::DiscretizedSystem::new(model).hamiltonian().clone();
    let skip = interior_skip(n);
    let mut rows = Vec::new();
    let mut worst_i: Option<EnergyTraceRow> = None;
    let mut worst_h: Option<EnergyTraceRow> = None;
    for j in skip..n - skip {
        let c = v.column(j);
        let norm = (c.adjoint() * c)[(0, 0)];
        let energy = (c.adjoint() * &h_or * c)[(0, 0)] / norm;
        let x = grid.nodes()[j];
        let row_i = EnergyTraceRow { name: "phi_w_I", omega: x, omega_prime: None, value: norm, expected: Complex64::new(1.0, 0.0) };
        let row_h = EnergyTraceRow { name: "phi_w_H", omega: x, omega_prime: None, value: energy, expected: Complex64::new(x, 0.0) };
        if worst_i.as_ref().map_or(true, |w| row_i.residual() > w.residual()) {
            worst_i = Some(row_i);
        }
        if worst_h.as_ref().map_or(true, |w| row_h.residual() > w.residual()) {
            worst_h = Some(row_h);
        }
    }
    rows.extend(worst_h);
    rows.extend(worst_i);
    for (obs, name, name37) in [(&h, "phi_ww_H", "phi_37_H"), (&id, "phi_ww_I", "phi_37_I")] {
        let c = ContinuedObservable::new(model, obs);
        let r = c.grid_matrix(model)?;
        let mut best = (0, 0, ZERO);
        for i in 0..n {
            for j in 0..n {
                if r[(i, j)].norm() > best.2.norm() || (i, j) == (0, 0) {
                    best = (i, j, r[(i, j)]);
                }
            }
        }
        rows.push(EnergyTraceRow {
            name,
            omega: grid.nodes()[best.0],
            omega_prime: Some(grid.nodes()[best.1]),
            value: best.2,
            expected: ZERO,
        });
        let l = c.left(model, Complex64::new(3.0, 0.0), Side::Minus);
        let rr = c.right(model, Complex64::new(7.0, 0.0), Side::Plus);
        rows.push(EnergyTraceRow { name: name37, omega: 3.0, omega_prime: Some(7.0), value: c.kernel(&l, &rr), expected: ZERO });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// deformation path

/// The lower deformation path Γ⁻: a graded ray from 0 at angle −`angle`
/// out to `radius`, an arc at that radius up to angle −`end_angle`, and a
/// straight segment to Ω_max. Γ⁺ is its mirror image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSpec {
    pub angle: f64,
    pub radius: f64,
    pub end_angle: f64,
    pub ray_nodes: usize,
    pub arc_nodes: usize,
    pub line_nodes: usize,
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec { angle: 0.75 * PI, radius: 1.8, end_angle: 0.2, ray_nodes: 80, arc_nodes: 80, line_nodes: 160 }
    }
}

/// Quadrature points and complex weights along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoints {
    pub z: Vec<Complex64>,
    pub w: Vec<Complex64>,
}

impl PathPoints {
    pub fn conj(&self) -> PathPoints {
        PathPoints { z: self.z.iter().map(|z| z.conj()).collect(), w: self.w.iter().map(|w| w.conj()).collect() }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

impl PathSpec {
    pub fn validate(&self, omega_max: f64) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("deformation path: {m}")));
        if !(self.angle > 0.5 * PI && self.angle < PI) {
            return bad("angle must lie in (π/2, π)");
        }
        if !(self.end_angle > 0.0 && self.end_angle < self.angle) {
            return bad("end angle must lie in (0, angle)");
        }
        if !(self.radius > 0.0 && self.radius < omega_max) {
            return bad("radius must lie in (0, omega_max)");
        }
        if self.ray_nodes < 4 || self.arc_nodes < 4 || self.line_nodes < 4 {
            return bad("each piece needs at least 4 nodes");
        }
        Ok(())
    }

    pub fn lower(&self, omega_max: f64) -> PathPoints {
        let mut z = Vec::new();
        let mut w = Vec::new();
        // ray with r = radius·s², which clusters nodes at the threshold
        let dir = Complex64::from_polar(1.0, -self.angle);
        let (s, ws) = legendre_on(self.ray_nodes, 0.0, 1.0);
        for (&s, &ws) in s.iter().zip(&ws) {
            z.push(dir * (self.radius * s * s));
            w.push(dir * (2.0 * self.radius * s * ws));
        }
        let (a, wa) = legendre_on(self.arc_nodes, -self.angle, -self.end_angle);
        for (&a, &wa) in a.iter().zip(&wa) {
            let p = Complex64::from_polar(self.radius, a);
            z.push(p);
            w.push(I * p * wa);
        }
        let p0 = Complex64::from_polar(self.radius, -self.end_angle);
        let (s, ws) = legendre_on(self.line_nodes, 0.0, 1.0);
        for (&s, &ws) in s.iter().zip(&ws) {
            z.push(p0 + (omega_max - p0) * s);
            w.push((omega_max - p0) * ws);
        }
        PathPoints { z, w }
    }

    /// Closed outline of the region between [0, Ω_max] and Γ⁻.
    fn outline(&self, omega_max: f64) -> Vec<Complex64> {
        let mut pts = vec![ZERO];
        let dir = Complex64::from_polar(1.0, -self.angle);
        let k = OUTLINE_PIECE;
        for i in 1..=k {
            pts.push(dir * (self.radius * i as f64 / k as f64));
        }
        for i in 1..=k {
            let a = -self.angle + (self.angle - self.end_angle) * i as f64 / k as f64;
            pts.push(Complex64::from_polar(self.radius, a));
        }
        let p0 = Complex64::from_polar(self.radius, -self.end_angle);
        for i in 1..=k {
            pts.push(p0 + (omega_max - p0) * (i as f64 / k as f64));
        }
        for i in 1..k {
            pts.push(Complex64::new(omega_max * (1.0 - i as f64 / k as f64), 0.0));
        }
        pts
    }
}

fn winding(outline: &[Complex64], z: Complex64) -> f64 {
    let mut total = 0.0;
    for k in 0..outline.len() {
        let a = outline[k] - z;
        let b = outline[(k + 1) % outline.len()] - z;
        total += (b / a).arg();
    }
    total / (2.0 * PI)
}

fn distance_to_segment(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let t = (((z - a) * d.conj()).re / d.norm_sqr()).clamp(0.0, 1.0);
    (z - (a + d * t)).norm()
}

/// Geometry of both deformation regions, for the analyticity guard.
struct Region {
    outline: Vec<Complex64>,
    /// The first `path_len` outline points trace Γ⁻ from 0 to Ω_max.
    path_len: usize,
}

impl Region {
    fn new(spec: &PathSpec, omega_max: f64) -> Self {
        let outline = spec.outline(omega_max);
        Region { path_len: 3 * OUTLINE_PIECE + 1, outline }
    }

    fn inside_lower(&self, z: Complex64) -> bool {
        winding(&self.outline, z).abs() > 0.5
    }

    /// Inside either region (Γ⁻ or its mirror).
    fn inside(&self, z: Complex64) -> bool {
        self.inside_lower(z) || self.inside_lower(z.conj())
    }

    /// Distance to Γ⁻ ∪ Γ⁺, the real segment excluded.
    fn path_distance(&self, z: Complex64) -> f64 {
        let p = &self.outline[..self.path_len];
        [z, z.conj()]
            .iter()
            .flat_map(|&zz| p.windows(2).map(move |s| distance_to_segment(zz, s[0], s[1])))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Refuses when any singularity of the continued inputs lies between the
/// real segment and the paths, too close to the paths or residue circles,
/// or when the resonance is not enclosed.
pub fn check_analyticity(
    spec: &PathSpec,
    omega_max: f64,
    singularities: &[Singularity],
    pole: Option<Complex64>,
) -> Result<()> {
    spec.validate(omega_max)?;
    let region = Region::new(spec, omega_max);
    let mut bad = Vec::new();
    let near_circle = |z: Complex64| {
        pole.map_or(false, |z0| {
            (z - z0).norm() < RESIDUE_RADIUS + CLEARANCE || (z - z0.conj()).norm() < RESIDUE_RADIUS + CLEARANCE
        })
    };
    let offending = |z: Complex64| region.inside(z) || region.path_distance(z) < CLEARANCE || near_circle(z);
    for s in singularities {
        match *s {
            Singularity::Pole(z) => {
                if offending(z) {
                    bad.push(z);
                }
            }
            Singularity::Branch(b) => {
                // a threshold branch point with its cut on the negative axis
                // is shared with the model and never crossed
                if b.im == 0.0 && b.re <= 0.0 {
                    continue;
                }
                let stop = -(spec.radius + 1.0);
                let steps = (((b.re - stop) / 0.005).ceil().max(1.0)) as usize;
                let hit = (0..=steps).any(|k| {
                    let z = Complex64::new(b.re - (b.re - stop) * k as f64 / steps as f64, b.im);
                    region.inside(z) || region.path_distance(z) < CLEARANCE
                });
                if hit || near_circle(b) {
                    bad.push(b);
                }
            }
        }
    }
    if !bad.is_empty() {
        return Err(Error::Analyticity {
            reason: "singularity of a continued input inside or near the deformation region".into(),
            points: bad,
        });
    }
    if let Some(z0) = pole {
        if !region.inside_lower(z0) || region.path_distance(z0) < RESIDUE_RADIUS + CLEARANCE {
            return Err(Error::Analyticity {
                reason: "resonance pole is not enclosed by the deformation path".into(),
                points: vec![z0],
            });
        }
    }
    Ok(())
}

fn require_continuable(profiles: &[&Profile], what: &str) -> Result<()> {
    if profiles.iter().all(|p| p.is_continuable()) {
        Ok(())
    } else {
        Err(Error::Analyticity { reason: format!("{what} is sampled and has no continuation"), points: Vec::new() })
    }
}

/// Residue of f at zc from the trapezoid rule on a small circle.
pub fn circle_residue(f: impl Fn(Complex64) -> Complex64, zc: Complex64, radius: f64, points: usize) -> Complex64 {
    let mut acc = ZERO;
    for k in 0..points {
        let e = Complex64::from_polar(radius, 2.0 * PI * k as f64 / points as f64);
        acc += f(zc + e) * e;
    }
    acc / points as f64
}

fn circle(zc: Complex64) -> Vec<(Complex64, Complex64)> {
    (0..RESIDUE_POINTS)
        .map(|k| {
            let e = Complex64::from_polar(RESIDUE_RADIUS, 2.0 * PI * k as f64 / RESIDUE_POINTS as f64);
            (zc + e, e / RESIDUE_POINTS as f64)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// complex family

/// Gamov data: the pole pair and the residue normalisations.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectralFamily {
    pub z0: Complex64,
    /// (Res S)_{z0}.
    pub residue: Complex64,
    /// [−2πi (Res S)_{z0}]^{1/2}, principal branch: normalises |f0⟩ and ⟨f̃0|.
    pub factor: Complex64,
    /// [2πi (Res S*)_{z0*}]^{1/2}, principal branch: normalises |f̃0⟩ and ⟨f0|.
    pub factor_star: Complex64,
    pub path: PathSpec,
}

impl ComplexSpectralFamily {
    /// Eigenvalue label of Ψ_00 under the Liouvillian.
    pub fn gamov_label(&self) -> Complex64 {
        self.z0.conj() - self.z0
    }

    /// 2|Im z0|, the decay rate of the Gamov term.
    pub fn decay_rate(&self) -> f64 {
        2.0 * self.z0.im.abs()
    }
}

pub fn gamov_vectors(model: &ScatteringModel, path: &PathSpec) -> Result<ComplexSpectralFamily> {
    let z0 = match model.pole() {
        Some(z) => z,
        None => model.find_pole()?,
    };
    let om = model.grid().omega_max();
    let sings: Vec<Singularity> = model.form_factor().singularities();
    check_analyticity(path, om, &sings, Some(z0))?;
    let residue = -2.0 * PI * I * model.kappa() * model.big_g(z0) / model.eta_derivative(z0, Side::Plus);
    let factor = (-2.0 * PI * I * residue).sqrt();
    let factor_star = (2.0 * PI * I * residue.conj()).sqrt();
    Ok(ComplexSpectralFamily { z0, residue, factor, factor_star, path: *path })
}

/// Largest |(Ψ̃|O)| over each kind of left element of the complex family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiAnnihilation {
    pub psi_00: f64,
    pub psi_0w: f64,
    pub psi_w0: f64,
    pub psi_ww: f64,
}

impl PsiAnnihilation {
    pub fn max(&self) -> f64 {
        self.psi_00.max(self.psi_0w).max(self.psi_w0).max(self.psi_ww)
    }
}

/// (Ψ̃|O) for every element kind: residues of R_O at z0*, z0 with the
/// normalisations of the family, and R_O itself on the paths.
pub fn psi_annihilation(
    model: &ScatteringModel,
    family: &ComplexSpectralFamily,
    obs: &ObservableKernel,
) -> Result<PsiAnnihilation> {
    require_continuable(&obs.profiles(), "observable")?;
    let om = model.grid().omega_max();
    let lower = family.path.lower(om);
    let upper = lower.conj();
    let c = ContinuedObservable::new(model, obs);
    let z0 = family.z0;
    let n_star = family.factor_star.inv();
    let n0 = family.factor.inv();
    let left_circle: Vec<(PointValues, Complex64)> =
        circle(z0.conj()).into_iter().map(|(z, e)| (c.left(model, z, Side::Minus), e)).collect();
    let right_circle: Vec<(PointValues, Complex64)> =
        circle(z0).into_iter().map(|(z, e)| (c.right(model, z, Side::Plus), e)).collect();
    let lefts: Vec<PointValues> = upper.z.par_iter().map(|&z| c.left(model, z, Side::Minus)).collect();
    let rights: Vec<PointValues> = lower.z.par_iter().map(|&z| c.right(model, z, Side::Plus)).collect();
    let mut rr = ZERO;
    for (l, el) in &left_circle {
        for (r, er) in &right_circle {
            rr += c.kernel(l, r) * el * er;
        }
    }
    let psi_00 = (n_star * n0 * (2.0 * PI * I) * (-2.0 * PI * I) * rr).norm();
    let psi_0w = rights
        .par_iter()
        .map(|r| {
            let res: Complex64 = left_circle.iter().map(|(l, e)| c.kernel(l, r) * e).sum();
            (n_star * 2.0 * PI * I * res).norm()
        })
        .reduce(|| 0.0, f64::max);
    let psi_w0 = lefts
        .par_iter()
        .map(|l| {
            let res: Complex64 = right_circle.iter().map(|(r, e)| c.kernel(l, r) * e).sum();
            (n0 * -2.0 * PI * I * res).norm()
        })
        .reduce(|| 0.0, f64::max);
    let psi_ww = lefts
        .par_iter()
        .map(|l| rights.iter().map(|r| c.kernel(l, r).norm()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    Ok(PsiAnnihilation { psi_00, psi_0w, psi_w0, psi_ww })
}

/// The five contributions to a mean value on the complex route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexTerms {
    pub t: f64,
    pub invariant: Complex64,
    pub gamov: Complex64,
    /// Residue in ω at z0* against the continuum in ω′.
    pub mixed_left: Complex64,
    /// Residue in ω′ at z0 against the continuum in ω.
    pub mixed_right: Complex64,
    pub background: Complex64,
}

impl ComplexTerms {
    pub fn total(&self) -> Complex64 {
        self.invariant + self.gamov + self.mixed_left + self.mixed_right + self.background
    }
}

/// The time-independent pieces of the complex route for one state and one
/// observable.
#[derive(Debug, Clone)]
pub struct ComplexEvolution {
    z0: Option<Complex64>,
    t_max: f64,
    invariant: Complex64,
    double_residue: Complex64,
    upper: PathPoints,
    lower: PathPoints,
    /// Σ_k L_k(ω) Res_{ω′=z0}[R(ω, ω′) R_k(ω′)] on Γ⁺.
    res_right: Vec<Complex64>,
    /// Σ_k Res_{ω=z0*}[L_k(ω) R(ω, ω′)] R_k(ω′) on Γ⁻.
    res_left: Vec<Complex64>,
    /// c(ω, ω′) R(ω, ω′) on Γ⁺ × Γ⁻.
    background: DMatrix<Complex64>,
}

impl ComplexEvolution {
    pub fn new(
        model: &ScatteringModel,
        rep: &PlusRepresentation,
        obs: &ObservableKernel,
        path: &PathSpec,
    ) -> Result<Self> {
        let state: &StateFunctional = rep.state();
        require_continuable(&state.profiles(), "state")?;
        require_continuable(&obs.profiles(), "observable")?;
        let om = model.grid().omega_max();
        let z0 = if model.kappa() == 0.0 {
            None
        } else {
            Some(match model.pole() {
                Some(z) => z,
                None => model.find_pole()?,
            })
        };
        let mut sings = state.singularities();
        sings.extend(obs.singularities());
        sings.extend(model.form_factor().singularities());
        check_analyticity(path, om, &sings, z0)?;

        let w = model.grid().weights();
        let invariant: f64 = rep.c_diag.iter().zip(w).zip(obs.diag()).map(|((c, w), f)| c * w * f).sum();
        let lower = path.lower(om);
        let upper = lower.conj();
        let co = ContinuedObservable::new(model, obs);
        let cs = ContinuedState::new(model, state);

        let lefts: Vec<(PointValues, Vec<Complex64>)> = upper
            .z
            .par_iter()
            .map(|&z| (co.left(model, z, Side::Minus), cs.left(model, z, Side::Plus)))
            .collect();
        let rights: Vec<(PointValues, Vec<Complex64>)> = lower
            .z
            .par_iter()
            .map(|&z| (co.right(model, z, Side::Plus), cs.right(model, z, Side::Minus)))
            .collect();
        let rows: Vec<Vec<Complex64>> = lefts
            .par_iter()
            .map(|(l, sl)| rights.iter().map(|(r, sr)| contract(sl, sr) * co.kernel(l, r)).collect())
            .collect();
        let background = DMatrix::from_fn(upper.len(), lower.len(), |i, j| rows[i][j]);

        let (double_residue, res_right, res_left) = match z0 {
            None => (ZERO, vec![ZERO; upper.len()], vec![ZERO; lower.len()]),
            Some(z0) => {
                let lc: Vec<(PointValues, Vec<Complex64>, Complex64)> = circle(z0.conj())
                    .into_iter()
                    .map(|(z, e)| (co.left(model, z, Side::Minus), cs.left(model, z, Side::Plus), e))
                    .collect();
                let rc: Vec<(PointValues, Vec<Complex64>, Complex64)> = circle(z0)
                    .into_iter()
                    .map(|(z, e)| (co.right(model, z, Side::Plus), cs.right(model, z, Side::Minus), e))
                    .collect();
                let mut rr = ZERO;
                for (l, sl, el) in &lc {
                    for (r, sr, er) in &rc {
                        rr += contract(sl, sr) * co.kernel(l, r) * el * er;
                    }
                }
                let res_right = lefts
                    .par_iter()
                    .map(|(l, sl)| rc.iter().map(|(r, sr, e)| contract(sl, sr) * co.kernel(l, r) * e).sum())
                    .collect();
                let res_left = rights
                    .par_iter()
                    .map(|(r, sr)| lc.iter().map(|(l, sl, e)| contract(sl, sr) * co.kernel(l, r) * e).sum())
                    .collect();
                (rr, res_right, res_left)
            }
        };
        let bad = !double_residue.is_finite()
            || background.iter().chain(&res_left).chain(&res_right).any(|v| !v.is_finite());
        if bad {
            return Err(Error::Analyticity {
                reason: "continuation is not finite on the deformation path".into(),
                points: z0.into_iter().collect(),
            });
        }
        Ok(ComplexEvolution {
            z0,
            t_max: model.grid().t_max(),
            invariant: Complex64::new(invariant, 0.0),
            double_residue,
            upper,
            lower,
            res_right,
            res_left,
            background,
        })
    }

    pub fn terms(&self, t: f64) -> Result<ComplexTerms> {
        if !(t >= 0.0) {
            return Err(Error::Config(format!("time must be non-negative, got {t}")));
        }
        if t > self.t_max {
            return Err(Error::TimeBeyondMax { t, t_max: self.t_max });
        }
        let two_pi_i = 2.0 * PI * I;
        let phase_u: Vec<Complex64> = self.upper.z.iter().zip(&self.upper.w).map(|(z, w)| w * (I * z * t).exp()).collect();
        let phase_l: Vec<Complex64> = self.lower.z.iter().zip(&self.lower.w).map(|(z, w)| w * (-I * z * t).exp()).collect();
        let mut background = ZERO;
        for j in 0..self.lower.len() {
            let mut col = ZERO;
            for i in 0..self.upper.len() {
                col += phase_u[i] * self.background[(i, j)];
            }
            background += col * phase_l[j];
        }
        let (gamov, mixed_left, mixed_right) = match self.z0 {
            None => (ZERO, ZERO, ZERO),
            Some(z0) => {
                let e_star = (I * z0.conj() * t).exp();
                let e0 = (-I * z0 * t).exp();
                let gamov = two_pi_i * -two_pi_i * self.double_residue * e_star * e0;
                let ml: Complex64 = phase_l.iter().zip(&self.res_left).map(|(p, r)| p * r).sum::<Complex64>() * e_star;
                let mr: Complex64 = phase_u.iter().zip(&self.res_right).map(|(p, r)| p * r).sum::<Complex64>() * e0;
                (gamov, two_pi_i * ml, -two_pi_i * mr)
            }
        };
        Ok(ComplexTerms { t, invariant: self.invariant, gamov, mixed_left, mixed_right, background })
    }
}

pub fn complex_evolution(
    model: &ScatteringModel,
    rep: &PlusRepresentation,
    obs: &ObservableKernel,
    path: &PathSpec,
    t: f64,
) -> Result<ComplexTerms> {
    ComplexEvolution::new(model, rep, obs, path)?.terms(t)
}

/// Least-squares slope of ln|y| against t.
pub fn log_linear_slope(t: &[f64], y: &[Complex64]) -> f64 {
    let n = t.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| v.norm().ln()).collect();
    let mt = t.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(&ly).map(|(a, b)| (a - mt) * (b - my)).sum();
    let den: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    num / den
}
