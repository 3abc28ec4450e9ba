//! Energy profiles: closed-form expressions that continue into the complex
//! plane, and sampled tables that live on the real grid only.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A closed-form function of energy. Fractional powers use the principal
/// branch, so every cut runs along the negative real axis of its argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Const {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    /// z^p
    Power { p: f64 },
    /// (z + shift)^p
    Shift { shift: f64, p: f64 },
    /// exp(rate·z)
    Exp { rate: f64 },
    /// exp(−(z − center)² / (2·width²))
    Gauss { center: f64, width: f64 },
    /// 1 / ((z − center)² + width²), poles at center ± i·width
    Lorentz { center: f64, width: f64 },
    Product { factors: Vec<Expr> },
    Sum { terms: Vec<Expr> },
    Scale { by: f64, of: Box<Expr> },
}

/// Where an expression stops being analytic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Singularity {
    Pole(Complex64),
    /// Branch point whose cut runs horizontally to −∞.
    Branch(Complex64),
}

impl Singularity {
    pub fn location(&self) -> Complex64 {
        match *self {
            Singularity::Pole(z) | Singularity::Branch(z) => z,
        }
    }
}

fn is_integer(p: f64) -> bool {
    p.fract() == 0.0
}

fn principal_pow(z: Complex64, p: f64) -> Complex64 {
    if p == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    if z == ZERO {
        return if p > 0.0 {
            ZERO
        } else {
            Complex64::new(f64::INFINITY, 0.0)
        };
    }
    if is_integer(p) && p.abs() <= 64.0 {
        return z.powi(p as i32);
    }
    z.powf(p)
}

impl Expr {
    pub fn constant(re: f64) -> Self {
        Expr::Const { re, im: 0.0 }
    }

    pub fn product(factors: Vec<Expr>) -> Self {
        Expr::Product { factors }
    }

    pub fn scale(by: f64, of: Expr) -> Self {
        Expr::Scale { by, of: Box::new(of) }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            Expr::Const { re, im } => Complex64::new(*re, *im),
            Expr::Power { p } => principal_pow(z, *p),
            Expr::Shift { shift, p } => principal_pow(z + shift, *p),
            Expr::Exp { rate } => (z * rate).exp(),
            Expr::Gauss { center, width } => {
                let d = z - center;
                (-(d * d) / (2.0 * width * width)).exp()
            }
            Expr::Lorentz { center, width } => {
                let d = z - center;
                (d * d + width * width).inv()
            }
            Expr::Product { factors } => factors
                .iter()
                .fold(Complex64::new(1.0, 0.0), |acc, f| acc * f.eval(z)),
            Expr::Sum { terms } => terms.iter().fold(ZERO, |acc, f| acc + f.eval(z)),
            Expr::Scale { by, of } => of.eval(z) * by,
        }
    }

    pub fn eval_real(&self, x: f64) -> Complex64 {
        self.eval(Complex64::new(x, 0.0))
    }

    /// Rejects non-finite parameters and degenerate widths.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("expression: {what}")));
        match self {
            Expr::Const { re, im } if !(re.is_finite() && im.is_finite()) => bad("non-finite constant"),
            Expr::Power { p } | Expr::Shift { p, .. } if !p.is_finite() => bad("non-finite exponent"),
            Expr::Shift { shift, .. } if !shift.is_finite() => bad("non-finite shift"),
            Expr::Exp { rate } if !rate.is_finite() => bad("non-finite rate"),
            Expr::Gauss { center, width } | Expr::Lorentz { center, width }
                if !(center.is_finite() && width.is_finite() && *width > 0.0) =>
            {
                bad("center must be finite and width positive")
            }
            Expr::Scale { by, of } => {
                if !by.is_finite() {
                    return bad("non-finite scale");
                }
                of.validate()
            }
            Expr::Product { factors: list } | Expr::Sum { terms: list } => {
                list.iter().try_for_each(Expr::validate)
            }
            _ => Ok(()),
        }
    }

    pub fn singularities(&self) -> Vec<Singularity> {
        let mut out = Vec::new();
        self.collect_singularities(&mut out);
        out
    }

    fn collect_singularities(&self, out: &mut Vec<Singularity>) {
        let at = |p: f64, z: Complex64, out: &mut Vec<Singularity>| {
            if is_integer(p) {
                if p < 0.0 {
                    out.push(Singularity::Pole(z));
                }
            } else {
                out.push(Singularity::Branch(z));
            }
        };
        match self {
            Expr::Power { p } => at(*p, ZERO, out),
            Expr::Shift { shift, p } => at(*p, Complex64::new(-shift, 0.0), out),
            Expr::Lorentz { center, width } => {
                out.push(Singularity::Pole(Complex64::new(*center, *width)));
                out.push(Singularity::Pole(Complex64::new(*center, -*width)));
            }
            Expr::Product { factors: list } | Expr::Sum { terms: list } => {
                list.iter().for_each(|e| e.collect_singularities(out))
            }
            Expr::Scale { of, .. } => of.collect_singularities(out),
            Expr::Const { .. } | Expr::Exp { .. } | Expr::Gauss { .. } => {}
        }
    }
}

/// Grid samples plus barycentric weights, evaluated by Lagrange
/// interpolation on the real axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledProfile {
    nodes: Vec<f64>,
    bary: Vec<f64>,
    values: Vec<Complex64>,
}

impl SampledProfile {
    pub fn new(nodes: Vec<f64>, bary: Vec<f64>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(nodes.len(), values.len());
        debug_assert_eq!(nodes.len(), bary.len());
        SampledProfile { nodes, bary, values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn eval_real(&self, x: f64) -> Complex64 {
        let mut num = ZERO;
        let mut den = 0.0;
        for ((&xj, &lj), &vj) in self.nodes.iter().zip(&self.bary).zip(&self.values) {
            let d = x - xj;
            if d == 0.0 {
                return vj;
            }
            let c = lj / d;
            num += vj * c;
            den += c;
        }
        num / den
    }
}

/// A function of energy as states and observables carry it.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Expr(Expr),
    Sampled(Arc<SampledProfile>),
    /// z ↦ conj(f(conj z)), the continuation of conj(f(x)).
    Conj(Box<Profile>),
}

impl From<Expr> for Profile {
    fn from(e: Expr) -> Self {
        Profile::Expr(e)
    }
}

impl Profile {
    pub fn conj(&self) -> Profile {
        match self {
            Profile::Conj(inner) => (**inner).clone(),
            other => Profile::Conj(Box::new(other.clone())),
        }
    }

    /// True when the profile has a closed-form continuation off the axis.
    pub fn is_continuable(&self) -> bool {
        match self {
            Profile::Expr(_) => true,
            Profile::Sampled(_) => false,
            Profile::Conj(inner) => inner.is_continuable(),
        }
    }

    /// Value at z. Sampled profiles only exist on the real axis and return
    /// NaN elsewhere; callers check [`Profile::is_continuable`] first.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            Profile::Expr(e) => e.eval(z),
            Profile::Sampled(s) => {
                if z.im == 0.0 {
                    s.eval_real(z.re)
                } else {
                    Complex64::new(f64::NAN, f64::NAN)
                }
            }
            Profile::Conj(inner) => inner.eval(z.conj()).conj(),
        }
    }

    pub fn eval_real(&self, x: f64) -> Complex64 {
        self.eval(Complex64::new(x, 0.0))
    }

    pub fn singularities(&self) -> Vec<Singularity> {
        match self {
            Profile::Expr(e) => e.singularities(),
            Profile::Sampled(_) => Vec::new(),
            Profile::Conj(inner) => inner
                .singularities()
                .into_iter()
                .map(|s| match s {
                    Singularity::Pole(z) => Singularity::Pole(z.conj()),
                    Singularity::Branch(z) => Singularity::Branch(z.conj()),
                })
                .collect(),
        }
    }
}
