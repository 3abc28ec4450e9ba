#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::OnceLock;

use diagsing::grid::legendre_on;
use diagsing::model::{threshold_form_factor, ModelOptions};
use diagsing::oracle::DiscretizedSystem;
use diagsing::{build_grid, ScatteringModel, Side};
use num_complex::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The default model with its pole located, built once per test binary.
pub fn default_model() -> &'static ScatteringModel {
    static M: OnceLock<ScatteringModel> = OnceLock::new();
    M.get_or_init(|| ScatteringModel::default_model().unwrap().with_pole().unwrap())
}

pub fn default_oracle() -> &'static DiscretizedSystem {
    static S: OnceLock<DiscretizedSystem> = OnceLock::new();
    S.get_or_init(|| DiscretizedSystem::new(default_model()))
}

pub fn model(n: usize, kappa: f64) -> ScatteringModel {
    ScatteringModel::new(kappa, threshold_form_factor(1.0), build_grid(n, 20.0).unwrap(), ModelOptions::default()).unwrap()
}

/// Composite 20-point Gauss–Legendre over `panels` equal panels of [a, b].
pub fn composite(panels: usize, a: f64, b: f64, f: impl Fn(f64) -> Complex64) -> Complex64 {
    let (x, w) = legendre_on(20, 0.0, 1.0);
    let h = (b - a) / panels as f64;
    let mut s = c(0.0, 0.0);
    for k in 0..panels {
        for (xi, wi) in x.iter().zip(&w) {
            s += f(a + h * (k as f64 + xi)) * (wi * h);
        }
    }
    s
}

/// ∫₀^Ω f(y)/(z − y) · √y/(1+y)² dy with y = u², which removes the
/// threshold square root so the panels converge fast.
pub fn threshold_transform(omega_max: f64, z: Complex64, f: impl Fn(f64) -> Complex64) -> Complex64 {
    composite(2000, 0.0, omega_max.sqrt(), |u| {
        let y = u * u;
        f(y) * (2.0 * u * u / ((1.0 + y) * (1.0 + y))) / (z - y)
    })
}

pub fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The zero of η_II from the argument principle alone: seed at the smallest
/// |η_II| on a lattice over the search rectangle, then the trapezoid rule for
/// (1/2πi)∮ z^m η_II′/η_II dz on a circle of radius 0.3, with η_II′ from a
/// central difference. Returns (zero count, first moment / count).
pub fn argument_principle_zero(m: &ScatteringModel) -> (Complex64, Complex64) {
    let f = |z: Complex64| m.eta_side(z, Side::Plus);
    let mut seed = c(0.0, -1.0);
    let mut best = f64::INFINITY;
    for i in 0..=78 {
        for j in 1..=40 {
            let z = c(-0.85 + 0.05 * i as f64, -0.05 * j as f64);
            if f(z).norm() < best {
                best = f(z).norm();
                seed = z;
            }
        }
    }
    let (r, k, h) = (0.3, 256, 1e-6);
    let (mut count, mut moment) = (c(0.0, 0.0), c(0.0, 0.0));
    for j in 0..k {
        let e = Complex64::from_polar(r, 2.0 * PI * j as f64 / k as f64);
        let z = seed + e;
        let dlog = (f(z + h) - f(z - h)) / (2.0 * h) / f(z);
        count += dlog * e / k as f64;
        moment += z * dlog * e / k as f64;
    }
    (count, moment / count)
}

/// Trapezoid rule for the residue of the continued S on a circle about z0.
pub fn contour_residue(m: &ScatteringModel, z0: Complex64, r: f64, k: usize) -> Complex64 {
    (0..k)
        .map(|j| {
            let e = Complex64::from_polar(r, 2.0 * PI * j as f64 / k as f64);
            m.s_continued(z0 + e) * e / k as f64
        })
        .sum()
}
