//! Semigroup kernels `T_t(x, y)`, their spatial derivatives and the
//! potentials `V_j` for the heat, Bessel, Laguerre and Dirichlet
//! families and their products.
//!
//! Every one-dimensional kernel is written as a Gaussian in `x - y` times
//! a bounded factor, so that no exponentially large quantity is formed:
//!
//! * heat: `H_t(x-y) = (4πt)^{-1/2} e^{-(x-y)²/4t}`
//! * Dirichlet: `H_t(x-y) Ω`, `Ω = 1 - e^{-xy/t}`
//! * Bessel: `H_t(x-y) U_{β-1/2}(xy/2t)`
//! * Laguerre: `Θ (2π sh 2t)^{-1/2} U_{β-1/2}(xy/sh 2t) e^{-(x-y)²/(2 sh 2t)}`
//!   when `xy > sh 2t`, and the `I_{β-1/2}` form in log space otherwise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AdmissibleCovering, Axis, Domain};
use crate::special::{
    ln_i_of_ln, ln_scaled_u, ln_theta, scaled_bessel_u_sup, scaled_u, scaled_u_difference,
    scaled_u_minus_one, BesselOrder,
};

/// Largest number of factors in a product family.
pub const MAX_FACTORS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum FactorSpec {
    Heat,
    Bessel { beta: f64 },
    Laguerre { beta: f64 },
    Dirichlet,
}

impl FactorSpec {
    pub fn label(&self) -> String {
        match self {
            FactorSpec::Heat => "heat".into(),
            FactorSpec::Bessel { beta } => format!("bessel({beta})"),
            FactorSpec::Laguerre { beta } => format!("laguerre({beta})"),
            FactorSpec::Dirichlet => "dirichlet".into(),
        }
    }
}

/// One-dimensional kernel with its cached Bessel orders.
#[derive(Debug, Clone)]
pub struct Factor {
    spec: FactorSpec,
    beta: f64,
    lower: BesselOrder,
    upper: BesselOrder,
    sup_u: f64,
}

#[inline]
fn ln_heat(t: f64, r: f64) -> f64 {
    -0.5 * (4.0 * PI * t).ln() - r * r / (4.0 * t)
}

#[inline]
fn heat(t: f64, r: f64) -> f64 {
    ln_heat(t, r).exp()
}

/// `ln sh(2t)` without overflow.
#[inline]
fn ln_sh2(t: f64) -> f64 {
    if t < 10.0 {
        (2.0 * t).sinh().ln()
    } else {
        2.0 * t - std::f64::consts::LN_2 + (-(-4.0 * t).exp()).ln_1p()
    }
}

impl Factor {
    pub fn new(spec: FactorSpec) -> Result<Self> {
        let beta = match spec {
            FactorSpec::Bessel { beta } | FactorSpec::Laguerre { beta } => {
                if !(beta > 0.0) || !beta.is_finite() {
                    return Err(Error::domain(
                        "kernels::KernelFamily",
                        format!("beta must be finite and > 0, got {beta}"),
                    ));
                }
                beta
            }
            _ => 0.5,
        };
        let lower = BesselOrder::new(beta - 0.5)?;
        let upper = lower.next();
        let sup_u = match spec {
            FactorSpec::Bessel { .. } | FactorSpec::Laguerre { .. } => scaled_bessel_u_sup(&lower),
            _ => 1.0,
        };
        Ok(Factor {
            spec,
            beta,
            lower,
            upper,
            sup_u,
        })
    }

    pub fn spec(&self) -> FactorSpec {
        self.spec
    }

    pub fn axis(&self) -> Axis {
        match self.spec {
            FactorSpec::Heat => Axis::Line,
            _ => Axis::HalfLine,
        }
    }

    /// `T_t(x, y)`; arguments are not checked.
    pub fn value(&self, t: f64, x: f64, y: f64) -> f64 {
        match self.spec {
            FactorSpec::Heat => heat(t, x - y),
            FactorSpec::Dirichlet => heat(t, x - y) * -(-x * y / t).exp_m1(),
            FactorSpec::Bessel { .. } => heat(t, x - y) * scaled_u(&self.lower, x * y / (2.0 * t)),
            FactorSpec::Laguerre { .. } => self.ln_value(t, x, y).exp(),
        }
    }

    /// `ln T_t(x, y)`, finite where the kernel underflows.
    pub fn ln_value(&self, t: f64, x: f64, y: f64) -> f64 {
        match self.spec {
            FactorSpec::Heat => ln_heat(t, x - y),
            FactorSpec::Dirichlet => ln_heat(t, x - y) + (-(-x * y / t).exp_m1()).ln(),
            FactorSpec::Bessel { .. } => {
                ln_heat(t, x - y) + ln_scaled_u(&self.lower, x * y / (2.0 * t))
            }
            FactorSpec::Laguerre { .. } => {
                let ls = ln_sh2(t);
                let ln_z = (x * y).ln() - ls;
                let z = ln_z.exp();
                let v = if z <= 1.0 {
                    self.laguerre_small(t, x, y, ls, ln_z)
                } else {
                    self.laguerre_large(t, x, y, ls, z)
                };
                if cfg!(debug_assertions) && (0.9..1.1).contains(&z) {
                    let other = if z <= 1.0 {
                        self.laguerre_large(t, x, y, ls, z)
                    } else {
                        self.laguerre_small(t, x, y, ls, ln_z)
                    };
                    debug_assert!((v - other).abs() < 1e-9 * (1.0 + v.abs()));
                }
                v
            }
        }
    }

    /// `ln T` from the `I_{β-1/2}` form (`xy ≤ sh 2t`).
    fn laguerre_small(&self, t: f64, x: f64, y: f64, ls: f64, ln_z: f64) -> f64 {
        let coth = 1.0 / (2.0 * t).tanh();
        0.5 * (x * y).ln() - ls + ln_i_of_ln(&self.lower, ln_z) - 0.5 * coth * (x * x + y * y)
    }

    /// `ln T` from the `U_{β-1/2}` form (`xy > sh 2t`).
    fn laguerre_large(&self, t: f64, x: f64, y: f64, ls: f64, z: f64) -> f64 {
        let s = ls.exp();
        ln_theta(t, x, y) - 0.5 * ((2.0 * PI).ln() + ls) + ln_scaled_u(&self.lower, z)
            - (x - y) * (x - y) / (2.0 * s)
    }

    /// Common pieces of the Laguerre derivative forms.
    fn laguerre_parts(&self, t: f64, x: f64, y: f64) -> LaguerreParts {
        let ls = ln_sh2(t);
        let ln_z = (x * y).ln() - ls;
        let z = ln_z.exp();
        if z <= 1.0 {
            let coth = 1.0 / (2.0 * t).tanh();
            let ln_lower = ln_i_of_ln(&self.lower, ln_z);
            let ratio = (ln_i_of_ln(&self.upper, ln_z) - ln_lower).exp();
            let prefactor =
                (0.5 * (x * y).ln() - ls - 0.5 * coth * (x * x + y * y) + ln_lower).exp();
            LaguerreParts::Small {
                prefactor,
                y_over_s: (y.ln() - ls).exp(),
                ratio,
                coth,
            }
        } else {
            let s = ls.exp();
            let prefactor = (ln_theta(t, x, y) - 0.5 * ((2.0 * PI).ln() + ls)
                - (x - y) * (x - y) / (2.0 * s))
                .exp();
            LaguerreParts::Large {
                prefactor,
                s,
                u_lower: scaled_u(&self.lower, z),
                u_upper: scaled_u(&self.upper, z),
                diff: scaled_u_difference(&self.lower, z),
            }
        }
    }

    /// `∂_x T_t(x, y)`.
    pub fn dx(&self, t: f64, x: f64, y: f64) -> f64 {
        let beta = self.beta;
        match self.spec {
            FactorSpec::Heat => -(x - y) / (2.0 * t) * heat(t, x - y),
            FactorSpec::Dirichlet => {
                let e = (-x * y / t).exp();
                let omega = -(-x * y / t).exp_m1();
                heat(t, x - y) * (-(x - y) / (2.0 * t) * omega + y / t * e)
            }
            FactorSpec::Bessel { .. } => {
                let z = x * y / (2.0 * t);
                let h = heat(t, x - y);
                h * ((y - x) / (2.0 * t) * scaled_u(&self.upper, z)
                    + beta / x * scaled_u(&self.lower, z)
                    - x / (2.0 * t) * scaled_u_difference(&self.lower, z))
            }
            FactorSpec::Laguerre { .. } => match self.laguerre_parts(t, x, y) {
                LaguerreParts::Small {
                    prefactor,
                    y_over_s,
                    ratio,
                    coth,
                } => prefactor * (y_over_s * ratio + beta / x - x * coth),
                LaguerreParts::Large {
                    prefactor,
                    s,
                    u_lower,
                    u_upper,
                    diff,
                } => {
                    let ch_minus_one = 2.0 * t.sinh().powi(2);
                    prefactor
                        * ((y - x) / s * u_upper + beta / x * u_lower
                            - x / s * (ch_minus_one * u_lower + diff))
                }
            },
        }
    }

    /// `(∂_x + V(x)) T_t(x, y)`, with the `β/x` terms cancelled analytically.
    pub fn dx_adapted(&self, t: f64, x: f64, y: f64) -> f64 {
        match self.spec {
            FactorSpec::Heat | FactorSpec::Dirichlet => self.dx(t, x, y),
            FactorSpec::Bessel { .. } => {
                let z = x * y / (2.0 * t);
                heat(t, x - y)
                    * ((y - x) / (2.0 * t) * scaled_u(&self.upper, z)
                        - x / (2.0 * t) * scaled_u_difference(&self.lower, z))
            }
            FactorSpec::Laguerre { .. } => match self.laguerre_parts(t, x, y) {
                LaguerreParts::Small {
                    prefactor,
                    y_over_s,
                    ratio,
                    ..
                } => {
                    // 1 - coth 2t = -2 / (e^{4t} - 1)
                    prefactor * (y_over_s * ratio - 2.0 * x / (4.0 * t).exp_m1())
                }
                LaguerreParts::Large {
                    prefactor,
                    s,
                    u_lower,
                    u_upper,
                    diff,
                } => {
                    // 1 - (ch 2t - 1)/sh 2t = 1 - tanh t
                    prefactor
                        * ((y - x) / s * u_upper + x * (1.0 - t.tanh()) * u_lower - x / s * diff)
                }
            },
        }
    }

    /// `T_t(x, y) - H_t(x - y)`.
    pub fn minus_heat(&self, t: f64, x: f64, y: f64) -> f64 {
        match self.spec {
            FactorSpec::Heat => 0.0,
            // At β = 1 the algebraic terms of U - 1 cancel to all orders;
            // the exact difference is the reflected heat kernel.
            FactorSpec::Dirichlet | FactorSpec::Bessel { beta: 1.0 } => -heat(t, x + y),
            FactorSpec::Bessel { .. } => {
                heat(t, x - y) * scaled_u_minus_one(&self.lower, x * y / (2.0 * t))
            }
            FactorSpec::Laguerre { .. } => {
                let h = heat(t, x - y);
                match self.laguerre_log_ratio(t, x, y) {
                    Some((l, _)) if h > 0.0 => h * l.exp_m1(),
                    _ => self.value(t, x, y) - h,
                }
            }
        }
    }

    /// `L = ln(T/H)` and `∂_x L` for Laguerre when `|L| ≤ 1/2`, where
    /// `T - H = H (e^L - 1)` would cancel if subtracted directly. The gaps
    /// `sh 2t - 2t` and `ln(sh 2t / 2t)` use their Taylor series for small `t`.
    fn laguerre_log_ratio(&self, t: f64, x: f64, y: f64) -> Option<(f64, f64)> {
        let u = 2.0 * t;
        let ls = ln_sh2(t);
        let s = ls.exp();
        let u2 = u * u;
        let ln_sh_over_u = if u < 1e-2 {
            u2 / 6.0 - u2 * u2 / 180.0 + u2 * u2 * u2 / 2835.0
        } else {
            ls - u.ln()
        };
        let sh_minus_u = if u < 0.1 {
            u * u2 * (1.0 / 6.0 + u2 * (1.0 / 120.0 + u2 * (1.0 / 5040.0 + u2 / 362_880.0)))
        } else {
            s - u
        };
        // 1/(4t) - 1/(2 sh 2t)
        let k = sh_minus_u / (2.0 * u * s);
        let z = (x * y / s).max(f64::MIN_POSITIVE);
        let th = t.tanh();
        let l = ln_scaled_u(&self.lower, z) - 0.5 * th * (x * x + y * y) - 0.5 * ln_sh_over_u
            + (x - y) * (x - y) * k;
        if !(l.abs() <= 0.5) {
            return None;
        }
        // d ln U / dz = β/z - (U_τ - U_{τ+1}) / U_τ
        let dlnu = self.beta / x - y / s * scaled_u_difference(&self.lower, z) / scaled_u(&self.lower, z);
        let dl = dlnu - th * x + 2.0 * (x - y) * k;
        Some((l, dl))
    }

    /// `∂_x (T_t(x, y) - H_t(x - y))`.
    pub fn dx_minus_heat(&self, t: f64, x: f64, y: f64) -> f64 {
        let beta = self.beta;
        match self.spec {
            FactorSpec::Heat => 0.0,
            FactorSpec::Dirichlet | FactorSpec::Bessel { beta: 1.0 } => (x + y) / (2.0 * t) * heat(t, x + y),
            FactorSpec::Bessel { .. } => {
                let z = x * y / (2.0 * t);
                heat(t, x - y)
                    * ((y - x) / (2.0 * t) * scaled_u_minus_one(&self.upper, z)
                        + beta / x * scaled_u(&self.lower, z)
                        - x / (2.0 * t) * scaled_u_difference(&self.lower, z))
            }
            FactorSpec::Laguerre { .. } => {
                let h = heat(t, x - y);
                let dh = -(x - y) / (2.0 * t) * h;
                match self.laguerre_log_ratio(t, x, y) {
                    Some((l, dl)) if h > 0.0 => dh * l.exp_m1() + h * l.exp() * dl,
                    _ => self.dx(t, x, y) - dh,
                }
            }
        }
    }

    /// `V(x)`.
    pub fn potential(&self, x: f64) -> f64 {
        match self.spec {
            FactorSpec::Heat | FactorSpec::Dirichlet => 0.0,
            FactorSpec::Bessel { beta } => -beta / x,
            FactorSpec::Laguerre { beta } => x - beta / x,
        }
    }

    /// `(C, c)` with `T_t(x,y) ≤ C (cπt)^{-1/2} e^{-(x-y)²/(ct)}` for all
    /// `t, x, y`.
    ///
    /// Bessel: `T = H_t U` with `U ≤ sup U`. Laguerre: `sh 2t ≥ 2t` bounds
    /// the prefactor by `(4πt)^{-1/2}`; for `t ≤ 1`, `sh 2t ≤ 1.82 t` and
    /// for `t ≥ 1`, `Θ ≤ e^{-tanh(t)(x-y)²/4}`, giving exponent `1/(8t)`.
    pub fn gaussian_certificate(&self) -> (f64, f64) {
        match self.spec {
            FactorSpec::Heat | FactorSpec::Dirichlet => (1.0, 4.0),
            FactorSpec::Bessel { .. } => (self.sup_u, 4.0),
            FactorSpec::Laguerre { .. } => (std::f64::consts::SQRT_2 * self.sup_u, 8.0),
        }
    }
}

enum LaguerreParts {
    Small {
        prefactor: f64,
        y_over_s: f64,
        ratio: f64,
        coth: f64,
    },
    Large {
        prefactor: f64,
        s: f64,
        u_lower: f64,
        u_upper: f64,
        diff: f64,
    },
}

/// A semigroup kernel on `X = X_1 × … × X_N` given as a product of
/// one-dimensional factors.
#[derive(Debug, Clone)]
pub struct KernelFamily {
    factors: Vec<Factor>,
}

/// Kernel value with its logarithm (finite when the value underflows).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub ln_value: f64,
}

impl KernelFamily {
    pub fn from_specs(specs: &[FactorSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::usage("kernels::KernelFamily", "no factors"));
        }
        if specs.len() > MAX_FACTORS {
            return Err(Error::capability(
                "kernels::product_family",
                format!("at most {MAX_FACTORS} factors are supported, got {}", specs.len()),
            ));
        }
        Ok(KernelFamily {
            factors: specs.iter().map(|s| Factor::new(*s)).collect::<Result<_>>()?,
        })
    }

    pub fn heat() -> Self {
        Self::from_specs(&[FactorSpec::Heat]).expect("valid")
    }

    pub fn dirichlet() -> Self {
        Self::from_specs(&[FactorSpec::Dirichlet]).expect("valid")
    }

    pub fn bessel(beta: f64) -> Result<Self> {
        Self::from_specs(&[FactorSpec::Bessel { beta }])
    }

    pub fn laguerre(beta: f64) -> Result<Self> {
        Self::from_specs(&[FactorSpec::Laguerre { beta }])
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn specs(&self) -> Vec<FactorSpec> {
        self.factors.iter().map(|f| f.spec).collect()
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn domain(&self) -> Domain {
        Domain::new(self.factors.iter().map(|f| f.axis()).collect())
    }

    pub fn name(&self) -> String {
        self.factors
            .iter()
            .map(|f| f.spec.label())
            .collect::<Vec<_>>()
            .join("⊗")
    }

    /// Single factor of a one-dimensional family.
    pub fn as_single(&self) -> Option<&Factor> {
        if self.factors.len() == 1 {
            self.factors.first()
        } else {
            None
        }
    }

    /// Covering adapted to the family on the index window `[lo, hi]`:
    /// unit intervals for heat, dyadic intervals for Bessel and Dirichlet,
    /// the Laguerre covering for Laguerre, and their products.
    pub fn natural_covering(&self, lo: i32, hi: i32) -> Result<AdmissibleCovering> {
        let single = |f: &Factor| match f.spec {
            FactorSpec::Heat => AdmissibleCovering::uniform(1.0, lo as i64, hi as i64),
            FactorSpec::Bessel { .. } | FactorSpec::Dirichlet => AdmissibleCovering::dyadic(lo, hi),
            FactorSpec::Laguerre { .. } => AdmissibleCovering::laguerre(lo, hi),
        };
        let mut heat_dims = 0;
        let mut rest: Option<AdmissibleCovering> = None;
        for f in &self.factors {
            if f.spec == FactorSpec::Heat && rest.is_none() && self.factors.len() > 1 {
                heat_dims += 1;
                continue;
            }
            let c = single(f)?;
            rest = Some(match rest {
                None => c,
                Some(r) => AdmissibleCovering::product(&r, &c)?,
            });
        }
        match (heat_dims, rest) {
            (0, Some(c)) => Ok(c),
            (d, Some(c)) => {
                let (_, hi_pt) = c.window();
                let extent = hi_pt.iter().cloned().fold(0.0, f64::max);
                AdmissibleCovering::strip(d, &c, extent)
            }
            (_, None) => {
                // All factors are heat: a product of unit coverings.
                let u = AdmissibleCovering::uniform(1.0, lo as i64, hi as i64)?;
                let mut c = u.clone();
                for _ in 1..self.factors.len() {
                    c = AdmissibleCovering::product(&c, &u)?;
                }
                Ok(c)
            }
        }
    }

    /// `(C, c)` with `T_t(x,y) ≤ C (cπt)^{-d/2} e^{-|x-y|²/(ct)}`.
    pub fn gaussian_certificate(&self) -> (f64, f64) {
        let c = self
            .factors
            .iter()
            .map(|f| f.gaussian_certificate().1)
            .fold(0.0, f64::max);
        let amp = self
            .factors
            .iter()
            .map(|f| {
                let (ci, cci) = f.gaussian_certificate();
                ci * (c / cci).sqrt()
            })
            .product();
        (amp, c)
    }

    fn check(&self, op: &'static str, t: f64, x: &[f64], y: &[f64]) -> Result<()> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(op, format!("t must be finite and > 0, got {t}")));
        }
        let dom = self.domain();
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::domain(op, format!("points must have dimension {}", self.dim())));
        }
        if !dom.contains(x) || !dom.contains(y) {
            return Err(Error::domain(
                op,
                format!("points {x:?}, {y:?} must lie in the open domain"),
            ));
        }
        Ok(())
    }

    fn check_j(&self, op: &'static str, j: usize) -> Result<()> {
        if j >= self.dim() {
            return Err(Error::usage(op, format!("coordinate index {j} out of range for dimension {}", self.dim())));
        }
        Ok(())
    }

    /// Product of factor values without argument checks.
    pub fn value_unchecked(&self, t: f64, x: &[f64], y: &[f64]) -> f64 {
        self.factors
            .iter()
            .zip(x.iter().zip(y))
            .map(|(f, (&a, &b))| f.value(t, a, b))
            .product()
    }

    /// `∂_{x_j}` (or `(∂_{x_j} + V_j)` when `adapted`) without checks.
    pub fn dx_unchecked(&self, j: usize, t: f64, x: &[f64], y: &[f64], adapted: bool) -> f64 {
        let mut out = 1.0;
        for (i, f) in self.factors.iter().enumerate() {
            out *= if i == j {
                if adapted {
                    f.dx_adapted(t, x[i], y[i])
                } else {
                    f.dx(t, x[i], y[i])
                }
            } else {
                f.value(t, x[i], y[i])
            };
        }
        out
    }
}

/// `T_t(x, y)`.
pub fn kernel_eval(family: &KernelFamily, t: f64, x: &[f64], y: &[f64]) -> Result<KernelValue> {
    family.check("kernels::kernel_eval", t, x, y)?;
    let ln_value: f64 = family
        .factors
        .iter()
        .zip(x.iter().zip(y))
        .map(|(f, (&a, &b))| f.ln_value(t, a, b))
        .sum();
    Ok(KernelValue {
        value: ln_value.exp(),
        ln_value,
    })
}

/// `∂_{x_j} T_t(x, y)`.
pub fn kernel_dx(family: &KernelFamily, j: usize, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    const OP: &str = "kernels::kernel_dx";
    family.check(OP, t, x, y)?;
    family.check_j(OP, j)?;
    Ok(family.dx_unchecked(j, t, x, y, false))
}

/// `(∂_{x_j} + V_j(x_j)) T_t(x, y)`, the integrand of the Riesz kernel.
pub fn kernel_dx_adapted(family: &KernelFamily, j: usize, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    const OP: &str = "kernels::kernel_dx_adapted";
    family.check(OP, t, x, y)?;
    family.check_j(OP, j)?;
    Ok(family.dx_unchecked(j, t, x, y, true))
}

/// `V_j(x_j)`.
pub fn kernel_potential(family: &KernelFamily, j: usize, x: &[f64]) -> Result<f64> {
    const OP: &str = "kernels::kernel_potential";
    family.check_j(OP, j)?;
    if x.len() != family.dim() || !family.domain().contains(x) {
        return Err(Error::domain(OP, format!("point {x:?} must lie in the open domain")));
    }
    Ok(family.factors[j].potential(x[j]))
}

/// Product of families; at most three factors in total.
pub fn product_family(families: &[KernelFamily]) -> Result<KernelFamily> {
    let specs: Vec<FactorSpec> = families.iter().flat_map(|f| f.specs()).collect();
    KernelFamily::from_specs(&specs)
}
