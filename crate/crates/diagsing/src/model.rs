//! The rank-one model H = H0 + κ|g⟩⟨g| on [0, Ω_max]: η on both sheets,
//! the S-matrix and its resonance pole.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{EnergyGrid, GradedRule};
use crate::profile::{Expr, Profile};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which boundary value a continuation starts from: x + i0 (`Plus`) or
/// x − i0 (`Minus`). `Plus` stays on the physical sheet in the upper half
/// plane and crosses onto the second sheet below the cut; `Minus` mirrors it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Approach direction for boundary values on the cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Default for SearchRect {
    fn default() -> Self {
        SearchRect { re: (-0.9, 10.0), im: (-2.0, -1e-4) }
    }
}

impl SearchRect {
    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re.0 && z.re <= self.re.1 && z.im >= self.im.0 && z.im <= self.im.1
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re.0, self.im.0),
            Complex64::new(self.re.1, self.im.0),
            Complex64::new(self.re.1, self.im.1),
            Complex64::new(self.re.0, self.im.1),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOptions {
    /// Nodes of the graded inner rule used by every Cauchy transform.
    pub inner_nodes: usize,
    pub search: SearchRect,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { inner_nodes: 400, search: SearchRect::default(), newton_tol: 1e-12, newton_max_iter: 50 }
    }
}

/// g(z) = z^{1/4}/(b + z), so |g|² = √ω/(b + ω)².
pub fn threshold_form_factor(b: f64) -> Expr {
    Expr::product(vec![Expr::Power { p: 0.25 }, Expr::Shift { shift: b, p: -1.0 }])
}

#[derive(Debug, Clone)]
pub struct ScatteringModel {
    kappa: f64,
    form_factor: Expr,
    grid: EnergyGrid,
    inner: GradedRule,
    g_inner: Vec<Complex64>,
    big_g_inner: Vec<Complex64>,
    options: ModelOptions,
    pole: Option<Complex64>,
}

impl ScatteringModel {
    /// Builds the model and checks that η(ω + i0) has no zero on the grid.
    /// The form factor must be real on (0, Ω_max) and vanish at threshold.
    pub fn new(kappa: f64, form_factor: Expr, grid: EnergyGrid, options: ModelOptions) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::Config(format!("coupling must be finite and non-negative, got {kappa}")));
        }
        if options.inner_nodes < 8 {
            return Err(Error::Config("inner rule needs at least 8 nodes".into()));
        }
        form_factor.validate()?;
        if form_factor.eval_real(0.0).norm() != 0.0 {
            return Err(Error::Config("form factor must vanish at threshold".into()));
        }
        let inner = GradedRule::new(options.inner_nodes, grid.omega_max(), 4);
        let g_inner: Vec<Complex64> = inner.nodes.iter().map(|&y| form_factor.eval_real(y)).collect();
        for (&y, v) in inner.nodes.iter().chain(grid.nodes()).zip(
            g_inner.iter().copied().chain(grid.nodes().iter().map(|&x| form_factor.eval_real(x))),
        ) {
            if !(v.re.is_finite() && v.im.is_finite()) || v.im.abs() > 1e-12 * (1.0 + v.re.abs()) {
                return Err(Error::Config(format!("form factor must be real and finite on the segment (fails at {y})")));
            }
        }
        let big_g_inner = g_inner.iter().map(|g| g * g).collect();
        let model = ScatteringModel { kappa, form_factor, grid, inner, g_inner, big_g_inner, options, pole: None };
        for &x in model.grid.nodes() {
            let e = model.eta_side(Complex64::new(x, 0.0), Side::Plus);
            if e.norm() < 1e-8 {
                return Err(Error::ResonanceOnAxis { x, value: e.norm() });
            }
        }
        Ok(model)
    }

    /// The default scenario: κ = 0.25, |g|² = √ω/(1+ω)², n = 200, Ω_max = 20.
    pub fn default_model() -> Result<Self> {
        let grid = crate::grid::build_grid(200, 20.0)?;
        ScatteringModel::new(0.25, threshold_form_factor(1.0), grid, ModelOptions::default())
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn grid(&self) -> &EnergyGrid {
        &self.grid
    }

    pub fn inner(&self) -> &GradedRule {
        &self.inner
    }

    pub fn options(&self) -> &ModelOptions {
        &self.options
    }

    pub fn form_factor(&self) -> &Expr {
        &self.form_factor
    }

    /// Copy with another coupling on the same grid and form factor.
    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        ScatteringModel::new(kappa, self.form_factor.clone(), self.grid.clone(), self.options.clone())
    }

    pub fn g(&self, z: Complex64) -> Complex64 {
        self.form_factor.eval(z)
    }

    /// Continuation of |g|², i.e. g(z)·g*(z) = g(z)² for a real form factor.
    pub fn big_g(&self, z: Complex64) -> Complex64 {
        let g = self.g(z);
        g * g
    }

    pub fn g_inner(&self) -> &[Complex64] {
        &self.g_inner
    }

    /// ∫|g|², the constant bounding |η − 1| ≤ κC/dist(z, cut).
    pub fn coupling_norm(&self) -> f64 {
        self.inner.integrate(&self.big_g_inner).re
    }

    /// Samples a profile on the inner rule.
    pub fn inner_values(&self, p: &Profile) -> Vec<Complex64> {
        self.inner.nodes.iter().map(|&y| p.eval_real(y)).collect()
    }

    /// ∫₀^Ω dy/(z − y) continued from the given side.
    pub fn log_term(&self, z: Complex64, side: Side) -> Complex64 {
        let om = self.grid.omega_max();
        if z.im == 0.0 {
            let x = z.re;
            if x > 0.0 && x < om {
                return Complex64::new((x / (om - x)).ln(), -side.sign() * PI);
            }
            return Complex64::new((x.abs() / (x - om).abs()).ln(), 0.0);
        }
        let mut l = z.ln() - (z - om).ln();
        match side {
            Side::Plus if z.im < 0.0 => l -= 2.0 * PI * I,
            Side::Minus if z.im > 0.0 => l += 2.0 * PI * I,
            _ => {}
        }
        l
    }

    /// ∫ h(y)/(z − y) dy continued from one side of the cut, with h given on
    /// the inner nodes and h(z) its continuation at z.
    pub fn cauchy(&self, h_inner: &[Complex64], h_z: Complex64, z: Complex64, side: Side) -> Complex64 {
        let mut d = Complex64::new(0.0, 0.0);
        for ((&y, &w), &hy) in self.inner.nodes.iter().zip(&self.inner.weights).zip(h_inner) {
            let den = z - y;
            if den.re != 0.0 || den.im != 0.0 {
                d += (hy - h_z) * (w / den);
            }
        }
        d + h_z * self.log_term(z, side)
    }

    /// η continued from one side; η_I off the cut and η_II across it.
    pub fn eta_side(&self, z: Complex64, side: Side) -> Complex64 {
        1.0 - self.kappa * self.cauchy(&self.big_g_inner, self.big_g(z), z, side)
    }

    /// η(z) = 1 − κ ∫|g|²/(z − y) dy on the physical sheet.
    pub fn eta(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 && z.re >= 0.0 && z.re <= self.grid.omega_max() {
            return Err(Error::OnCut(z));
        }
        let side = if z.im >= 0.0 { Side::Plus } else { Side::Minus };
        Ok(self.eta_side(z, side))
    }

    pub fn eta_boundary(&self, x: f64, b: Boundary) -> Result<Complex64> {
        self.check_interior(x, "boundary value")?;
        let side = match b {
            Boundary::Above => Side::Plus,
            Boundary::Below => Side::Minus,
        };
        Ok(self.eta_side(Complex64::new(x, 0.0), side))
    }

    /// η_II(z) = η(z) + 2πiκG(z): η(x + i0) continued into Im z < 0.
    pub fn eta_second_sheet(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im < 0.0) {
            return Err(Error::Config(format!("second sheet needs Im z < 0, got {z}")));
        }
        let v = self.eta_side(z, Side::Plus);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Analyticity {
                reason: "form factor continuation is singular here".into(),
                points: vec![z],
            });
        }
        Ok(v)
    }

    /// κ g(z)/η(z) on the chosen continuation: the coefficient of the
    /// regular part of ⟨y|z±⟩.
    pub fn tau(&self, z: Complex64, side: Side) -> Complex64 {
        self.kappa * self.g(z) / self.eta_side(z, side)
    }

    /// S(ω) = η(ω − i0)/η(ω + i0).
    pub fn s_matrix(&self, x: f64) -> Result<Complex64> {
        let above = self.eta_boundary(x, Boundary::Above)?;
        if above.norm() < 1e-12 {
            return Err(Error::ResonanceOnAxis { x, value: above.norm() });
        }
        Ok(self.eta_boundary(x, Boundary::Below)? / above)
    }

    /// S continued below the axis: 1 − 2πiκG(z)/η_II(z).
    pub fn s_continued(&self, z: Complex64) -> Complex64 {
        1.0 - 2.0 * PI * I * self.kappa * self.big_g(z) / self.eta_side(z, Side::Plus)
    }

    /// Derivative of the continuation along `side` (five-point stencil).
    pub fn eta_derivative(&self, z: Complex64, side: Side) -> Complex64 {
        let h = if z.im == 0.0 { 1e-3 } else { (0.25 * z.im.abs()).min(1e-3) };
        let f = |dz: f64| self.eta_side(z + dz, side);
        (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
    }

    /// Number of zeros of η_II inside the rectangle by the argument
    /// principle, plus the first moment (1/2πi)∮ z dlog η_II.
    pub fn zero_count(&self, rect: &SearchRect) -> (i64, Complex64) {
        let corners = rect.corners();
        let mut total = 0.0;
        let mut moment = Complex64::new(0.0, 0.0);
        for k in 0..4 {
            let (a, b) = (corners[k], corners[(k + 1) % 4]);
            let (t, m) = self.winding_segment(a, b, 64);
            total += t;
            moment += m;
        }
        ((total / (2.0 * PI)).round() as i64, moment / (2.0 * PI * I))
    }

    /// Zero count and first moment of η_II inside a circle, by the
    /// trapezoid rule on (1/2πi)∮ z^m η_II′/η_II dz. The integrand is periodic
    /// and analytic, so the rule converges geometrically.
    pub fn circle_zero_moments(&self, center: Complex64, radius: f64, points: usize) -> (Complex64, Complex64) {
        let mut count = Complex64::new(0.0, 0.0);
        let mut moment = Complex64::new(0.0, 0.0);
        for k in 0..points {
            let e = Complex64::from_polar(radius, 2.0 * PI * k as f64 / points as f64);
            let z = center + e;
            let dlog = self.eta_derivative(z, Side::Plus) / self.eta_side(z, Side::Plus);
            // dz = i e dθ, and the 1/(2πi) cancels the i
            count += dlog * e;
            moment += z * dlog * e;
        }
        (count / points as f64, moment / points as f64)
    }

    fn winding_segment(&self, a: Complex64, b: Complex64, pieces: usize) -> (f64, Complex64) {
        let f = |z: Complex64| self.eta_side(z, Side::Plus);
        let mut phase = 0.0;
        let mut moment = Complex64::new(0.0, 0.0);
        let mut stack = Vec::new();
        for k in (0..pieces).rev() {
            let za = a + (b - a) * (k as f64 / pieces as f64);
            let zb = a + (b - a) * ((k + 1) as f64 / pieces as f64);
            stack.push((za, f(za), zb, f(zb), 0u32));
        }
        while let Some((za, fa, zb, fb, depth)) = stack.pop() {
            let dlog = (fb / fa).ln();
            if dlog.im.abs() > 0.25 && depth < 40 {
                let zm = 0.5 * (za + zb);
                let fm = f(zm);
                stack.push((zm, fm, zb, fb, depth + 1));
                stack.push((za, fa, zm, fm, depth + 1));
                continue;
            }
            phase += dlog.im;
            moment += 0.5 * (za + zb) * dlog;
        }
        (phase, moment)
    }

    /// Locates the single zero of η_II in the search rectangle: argument
    /// principle count, first-moment seed, Newton refinement.
    pub fn find_pole(&self) -> Result<Complex64> {
        if self.kappa == 0.0 {
            return Err(Error::NoResonance);
        }
        let rect = self.options.search;
        let (count, seed) = self.zero_count(&rect);
        match count {
            0 => return Err(Error::NoResonance),
            1 => {}
            k if k > 1 => return Err(Error::MultipleResonances(k as usize)),
            k => return Err(Error::PoleSearch(format!("negative winding number {k}"))),
        }
        let mut z = seed;
        for _ in 0..self.options.newton_max_iter {
            let f = self.eta_side(z, Side::Plus);
            let step = f / self.eta_derivative(z, Side::Plus);
            z -= step;
            if !(z.im < 0.0) {
                return Err(Error::PoleSearch(format!("Newton left the lower half plane at {z}")));
            }
            if step.norm() <= self.options.newton_tol * z.norm().max(1.0) {
                break;
            }
        }
        let residual = self.eta_side(z, Side::Plus).norm();
        if residual > 1e-10 {
            return Err(Error::PoleSearch(format!("residual {residual:e} at {z}")));
        }
        let slope = self.eta_derivative(z, Side::Plus).norm();
        if slope < 1e-8 {
            return Err(Error::PoleSearch(format!("zero at {z} is not simple (|eta'| = {slope:e})")));
        }
        Ok(z)
    }

    /// Locates the pole and caches it.
    pub fn with_pole(mut self) -> Result<Self> {
        self.pole = Some(self.find_pole()?);
        Ok(self)
    }

    pub fn pole(&self) -> Option<Complex64> {
        self.pole
    }

    pub fn require_pole(&self) -> Result<Complex64> {
        self.pole.ok_or(Error::NoResonance)
    }

    /// Residue of the continued S at z0: −2πiκG(z0)/η_II′(z0).
    pub fn s_residue(&self) -> Result<Complex64> {
        let z0 = self.require_pole()?;
        Ok(-2.0 * PI * I * self.kappa * self.big_g(z0) / self.eta_derivative(z0, Side::Plus))
    }

    fn check_interior(&self, x: f64, what: &'static str) -> Result<()> {
        let om = self.grid.omega_max();
        if x > 0.0 && x < om {
            Ok(())
        } else {
            Err(Error::OutsideSegment { what, x, omega_max: om })
        }
    }
}
