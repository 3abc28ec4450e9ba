//! Energy-axis quadrature: the shared Gauss–Legendre grid on [0, Ω_max],
//! singularity-subtracted principal values, and the graded inner rule used
//! for Cauchy transforms of threshold-singular integrands.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::profile::{Profile, SampledProfile};

/// Legendre nodes and weights on (−1, 1), ascending.
pub fn legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("n >= 1"));
    let mut pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Nodes and weights of an n-point Gauss–Legendre rule on [a, b].
pub fn legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = legendre(n);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|&t| a + half * (t + 1.0)).collect(),
        w.iter().map(|&v| v * half).collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    omega_max: f64,
    bary: Vec<f64>,
}

/// Principal value together with the near-endpoint flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvValue {
    pub value: Complex64,
    pub low_accuracy: bool,
}

pub fn build_grid(n: usize, omega_max: f64) -> Result<EnergyGrid> {
    if n < 2 {
        return Err(Error::Config(format!("grid needs n >= 2, got {n}")));
    }
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(Error::Config(format!("omega_max must be positive, got {omega_max}")));
    }
    let (t, tw) = legendre(n);
    let half = 0.5 * omega_max;
    let nodes: Vec<f64> = t.iter().map(|&x| half * (x + 1.0)).collect();
    let weights: Vec<f64> = tw.iter().map(|&w| w * half).collect();
    // barycentric weights of Legendre points: (−1)^j √((1 − t_j²) w_j)
    let bary = t
        .iter()
        .zip(&tw)
        .enumerate()
        .map(|(j, (&x, &w))| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            s * ((1.0 - x * x) * w).sqrt()
        })
        .collect();
    Ok(EnergyGrid { nodes, weights, omega_max, bary })
}

impl EnergyGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    /// Barycentric interpolation weights of the nodes.
    pub fn bary(&self) -> &[f64] {
        &self.bary
    }

    /// Largest time whose oscillations e^{±iωt} the grid still resolves.
    pub fn t_max(&self) -> f64 {
        PI * self.len() as f64 / (2.0 * self.omega_max)
    }

    pub fn same_as(&self, other: &EnergyGrid) -> bool {
        self.omega_max == other.omega_max && self.nodes == other.nodes
    }

    pub fn sample(&self, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Σ w_i f(ω_i), refusing non-finite samples.
    pub fn integrate(&self, f: impl Fn(f64) -> Complex64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, (&x, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let v = f(x);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite { index: i, omega: x });
            }
            acc += v * w;
        }
        Ok(acc)
    }

    pub fn integrate_samples(&self, values: &[Complex64]) -> Complex64 {
        values.iter().zip(&self.weights).map(|(v, &w)| v * w).sum()
    }

    /// PV ∫₀^Ω f(ω)/(x0 − ω) dω by subtracting f(x0). A node coinciding with
    /// x0 contributes nothing: its subtracted integrand is the derivative
    /// term, which the rule does not see.
    pub fn principal_value(&self, f: impl Fn(f64) -> Complex64, x0: f64) -> Result<PvValue> {
        let om = self.omega_max;
        if !(x0 > 0.0 && x0 < om) {
            return Err(Error::OutsideSegment { what: "principal value point", x: x0, omega_max: om });
        }
        let f0 = f(x0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (&y, &w) in self.nodes.iter().zip(&self.weights) {
            if y != x0 {
                acc += (f(y) - f0) * (w / (x0 - y));
            }
        }
        acc += f0 * (x0 / (om - x0)).ln();
        let n = self.len();
        let lo = self.nodes[1] - self.nodes[0];
        let hi = self.nodes[n - 1] - self.nodes[n - 2];
        Ok(PvValue { value: acc, low_accuracy: x0 < lo || om - x0 < hi })
    }

    /// Wraps grid samples as a profile interpolating between nodes.
    pub fn sampled_profile(&self, values: Vec<Complex64>) -> Profile {
        Profile::Sampled(Arc::new(SampledProfile::new(self.nodes.clone(), self.bary.clone(), values)))
    }
}

/// A fixed rule on [0, Ω_max] obtained from Gauss–Legendre in u with
/// y = Ω_max·u^p. With p = 4 the factors y^{1/4} and y^{1/2} of threshold
/// behaviour become polynomials in u, so Cauchy transforms converge
/// spectrally.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GradedRule {
    pub fn new(m: usize, omega_max: f64, power: i32) -> Self {
        let (u, wu) = legendre_on(m, 0.0, 1.0);
        let p = power as f64;
        let nodes = u.iter().map(|&t| omega_max * t.powi(power)).collect();
        let weights = u
            .iter()
            .zip(&wu)
            .map(|(&t, &w)| w * p * omega_max * t.powi(power - 1))
            .collect();
        GradedRule { nodes, weights }
    }

    pub fn integrate(&self, values: &[Complex64]) -> Complex64 {
        values.iter().zip(&self.weights).map(|(v, &w)| v * w).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn constant_integrates_exactly() {
        let g = build_grid(64, 20.0).unwrap();
        let v = g.integrate(|_| c(1.0)).unwrap();
        assert!((v.re - 20.0).abs() < 1e-12);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn exponential_integral() {
        let g = build_grid(64, 20.0).unwrap();
        let v = g.integrate(|x| c((-x).exp())).unwrap();
        assert!((v.re - (1.0 - (-20.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn two_point_rule() {
        let g = build_grid(2, 1.0).unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.nodes().iter().all(|&x| x > 0.0 && x < 1.0));
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_and_linear_integrands() {
        let g = build_grid(64, 20.0).unwrap();
        assert_eq!(g.integrate(|_| c(0.0)).unwrap(), c(0.0));
        assert!((g.integrate(c).unwrap().re - 200.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(build_grid(1, 20.0).is_err());
        assert!(build_grid(10, 0.0).is_err());
        assert!(build_grid(10, -1.0).is_err());
    }

    #[test]
    fn integrate_propagates_non_finite() {
        let g = build_grid(8, 1.0).unwrap();
        let r = g.integrate(|x| if x > 0.5 { c(f64::NAN) } else { c(1.0) });
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn pv_examples() {
        let g2 = build_grid(64, 2.0).unwrap();
        assert!(g2.principal_value(|_| c(1.0), 1.0).unwrap().value.norm() < 1e-12);
        let g = build_grid(64, 20.0).unwrap();
        let v = g.principal_value(|_| c(1.0), 5.0).unwrap().value;
        assert!((v.re - (5.0f64 / 15.0).ln()).abs() < 1e-8);
        let v = g.principal_value(c, 5.0).unwrap().value;
        assert!((v.re - (-20.0 + 5.0 * (1.0f64 / 3.0).ln())).abs() < 1e-8);
    }

    #[test]
    fn pv_rejects_and_flags_endpoints() {
        let g = build_grid(32, 20.0).unwrap();
        assert!(g.principal_value(|_| c(1.0), 0.0).is_err());
        assert!(g.principal_value(|_| c(1.0), 20.0).is_err());
        assert!(g.principal_value(|_| c(1.0), 1e-3).unwrap().low_accuracy);
        assert!(!g.principal_value(|_| c(1.0), 10.0).unwrap().low_accuracy);
    }

    #[test]
    fn graded_rule_is_exact_on_threshold_powers() {
        let r = GradedRule::new(100, 20.0, 4);
        let v: Vec<Complex64> = r.nodes.iter().map(|&y| c(y.sqrt())).collect();
        let exact = 2.0 / 3.0 * 20.0f64.powf(1.5);
        assert!((r.integrate(&v).re - exact).abs() < 1e-11 * exact);
        assert!((r.weights.iter().sum::<f64>() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_profile_interpolates_smooth_functions() {
        let g = build_grid(60, 20.0).unwrap();
        let p = g.sampled_profile(g.sample(|x| c((-x / 4.0).exp())));
        for x in [0.01, 3.3, 11.1, 19.99] {
            assert!((p.eval_real(x).re - (-x / 4.0f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn t_max_formula() {
        let g = build_grid(200, 20.0).unwrap();
        assert!((g.t_max() - PI * 200.0 / 40.0).abs() < 1e-14);
    }
}
