//! Modified Bessel functions of the first kind and the hyperbolic
//! weight Θ used by the Laguerre kernel.
//!
//! `I_τ(z)` is evaluated in two regimes. Below a switch point that grows
//! with `τ²` the ascending series is summed; every term is positive for
//! `τ > -1`, so the sum is accurate for all `z` it is used on. Above the
//! switch the Hankel expansion of the exponentially scaled function
//! `U_τ(z) = I_τ(z) e^{-z} √(2πz)` is summed up to its smallest term.
//! All large-`z` work happens on `U_τ`, which never overflows.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Below this `z` (plus `τ²`) the ascending series is used.
const SERIES_SWITCH: f64 = 20.0;

const SERIES_EPS: f64 = 1e-17;

/// Order `τ ≥ -1/2` of a modified Bessel function.
///
/// `ln Γ(τ+1)` is cached because kernel sweeps evaluate the same order
/// millions of times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselOrder {
    tau: f64,
    ln_gamma_tau_1: f64,
}

impl BesselOrder {
    pub fn new(tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau < -0.5 {
            return Err(Error::domain(
                "special::BesselOrder",
                format!("order must be finite and >= -1/2, got {tau}"),
            ));
        }
        Ok(BesselOrder {
            tau,
            ln_gamma_tau_1: ln_gamma(tau + 1.0),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The order `τ + 1`.
    pub fn next(&self) -> BesselOrder {
        BesselOrder {
            tau: self.tau + 1.0,
            ln_gamma_tau_1: self.ln_gamma_tau_1 + (self.tau + 1.0).ln(),
        }
    }

    fn switch_point(&self) -> f64 {
        SERIES_SWITCH + self.tau * self.tau
    }
}

/// `ln I_τ(z)` from the ascending series, `z > 0`.
fn ln_i_series(order: &BesselOrder, z: f64) -> f64 {
    let tau = order.tau;
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut ln_scale = 0.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + tau));
        sum += term;
        if term < SERIES_EPS * sum {
            break;
        }
        if sum > 1e250 {
            sum *= 1e-250;
            term *= 1e-250;
            ln_scale += 250.0 * std::f64::consts::LN_10;
        }
    }
    tau * (0.5 * z).ln() - order.ln_gamma_tau_1 + sum.ln() + ln_scale
}

/// Hankel expansion of `U_τ(z) - 1`, summed to the smallest term.
fn u_minus_one_asymptotic(order: &BesselOrder, z: f64) -> f64 {
    let mu = 4.0 * order.tau * order.tau;
    let mut term = 1.0_f64;
    let mut sum = 0.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let next = term * (odd * odd - mu) / (8.0 * k * z);
        if next == 0.0 || (k > 1.0 && next.abs() >= term.abs()) {
            break;
        }
        sum += next;
        term = next;
        if term.abs() < 1e-18 * (1.0 + sum.abs()) || k > 200.0 {
            break;
        }
    }
    sum
}

/// Hankel expansion of `U_τ(z) - U_{τ+1}(z)`, differenced term by term.
fn u_difference_asymptotic(order: &BesselOrder, z: f64) -> f64 {
    let mu0 = 4.0 * order.tau * order.tau;
    let mu1 = 4.0 * (order.tau + 1.0) * (order.tau + 1.0);
    let (mut t0, mut t1) = (1.0_f64, 1.0_f64);
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let n0 = t0 * (odd * odd - mu0) / (8.0 * k * z);
        let n1 = t1 * (odd * odd - mu1) / (8.0 * k * z);
        let diff = n0 - n1;
        if k > 1.0 && (n0.abs().max(n1.abs()) >= t0.abs().max(t1.abs()) || diff.abs() >= last) {
            break;
        }
        sum += diff;
        last = diff.abs();
        t0 = n0;
        t1 = n1;
        if (t0 == 0.0 && t1 == 0.0) || last < 1e-18 * sum.abs() || k > 200.0 {
            break;
        }
    }
    sum
}

/// `U_τ(z)` for `z > 0` without argument checks.
pub(crate) fn scaled_u(order: &BesselOrder, z: f64) -> f64 {
    if z > order.switch_point() {
        1.0 + u_minus_one_asymptotic(order, z)
    } else {
        (ln_i_series(order, z) - z + 0.5 * (2.0 * PI * z).ln()).exp()
    }
}

/// `U_τ(z) - 1`, accurate for large `z` where the difference is small.
pub(crate) fn scaled_u_minus_one(order: &BesselOrder, z: f64) -> f64 {
    if z > order.switch_point() {
        u_minus_one_asymptotic(order, z)
    } else {
        scaled_u(order, z) - 1.0
    }
}

/// `U_τ(z) - U_{τ+1}(z)`.
pub(crate) fn scaled_u_difference(order: &BesselOrder, z: f64) -> f64 {
    let next = order.next();
    if z > next.switch_point() {
        u_difference_asymptotic(order, z)
    } else {
        scaled_u(order, z) - scaled_u(&next, z)
    }
}

/// `ln U_τ(z)`; stays finite where `U_τ` itself underflows.
pub(crate) fn ln_scaled_u(order: &BesselOrder, z: f64) -> f64 {
    if z > order.switch_point() {
        u_minus_one_asymptotic(order, z).ln_1p()
    } else {
        ln_i_series(order, z) - z + 0.5 * (2.0 * PI * z).ln()
    }
}

/// `ln I_τ(z)` for `z > 0` without argument checks.
pub(crate) fn ln_i(order: &BesselOrder, z: f64) -> f64 {
    if z > order.switch_point() {
        z - 0.5 * (2.0 * PI * z).ln() + u_minus_one_asymptotic(order, z).ln_1p()
    } else {
        ln_i_series(order, z)
    }
}

/// `ln I_τ(e^{ln_z})`, usable when `z` itself underflows.
pub(crate) fn ln_i_of_ln(order: &BesselOrder, ln_z: f64) -> f64 {
    if ln_z < -600.0 {
        // Leading term of the series; the next term is smaller by z²/4.
        order.tau * (ln_z - std::f64::consts::LN_2) - order.ln_gamma_tau_1
    } else {
        ln_i(order, ln_z.exp())
    }
}

/// Modified Bessel function of the first kind `I_τ(z)`, `z ≥ 0`.
///
/// Fails with an overflow error where the result is not representable
/// (large `z`, or `z = 0` with negative order).
pub fn bessel_i(order: &BesselOrder, z: f64) -> Result<f64> {
    const OP: &str = "special::bessel_i";
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::domain(OP, format!("argument must be finite and >= 0, got {z}")));
    }
    if z == 0.0 {
        return if order.tau > 0.0 {
            Ok(0.0)
        } else if order.tau == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::Overflow {
                op: OP,
                msg: format!("I_{}(0) is infinite", order.tau),
            })
        };
    }
    let overflow = || Error::Overflow {
        op: OP,
        msg: format!("I_{}({z}) exceeds the double range", order.tau),
    };
    if z > order.switch_point() {
        let u = 1.0 + u_minus_one_asymptotic(order, z);
        let value = if z < 700.0 {
            z.exp() * (u / (2.0 * PI * z).sqrt())
        } else {
            (z - 0.5 * (2.0 * PI * z).ln()).exp() * u
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(overflow())
        }
    } else {
        let ln = ln_i_series(order, z);
        if ln > f64::MAX.ln() {
            Err(overflow())
        } else {
            Ok(ln.exp())
        }
    }
}

/// Exponentially scaled `U_τ(z) = I_τ(z) e^{-z} √(2πz)`, `z > 0`.
///
/// Tends to 1 as `z → ∞`; `e^z` is never formed.
pub fn scaled_bessel_u(order: &BesselOrder, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(
            "special::scaled_bessel_u",
            format!("argument must be finite and > 0, got {z}"),
        ));
    }
    Ok(scaled_u(order, z))
}

/// Upper bound on `sup_{z>0} U_τ(z)`.
///
/// For `τ ≥ 1/2`, `U_τ ≤ U_{1/2} = 1 - e^{-2z} < 1`. Below that the
/// supremum is located on a dense logarithmic scan; past the scan range
/// the Hankel expansion decreases monotonically to 1.
pub fn scaled_bessel_u_sup(order: &BesselOrder) -> f64 {
    if order.tau >= 0.5 {
        return 1.0;
    }
    let mut sup: f64 = 1.0;
    let steps = 4000;
    for i in 0..=steps {
        let z = 10f64.powf(-8.0 + 12.0 * i as f64 / steps as f64);
        sup = sup.max(scaled_u(order, z));
    }
    sup * (1.0 + 1e-6)
}

/// Θ(t,x,y) = exp((1 - ch 2t)(x²+y²) / (2 sh 2t)).
///
/// Uses the identity `(1 - ch 2t) / (2 sh 2t) = -tanh(t)/2`, which has no
/// cancellation at small `t`.
pub fn theta(t: f64, x: f64, y: f64) -> Result<f64> {
    const OP: &str = "special::theta";
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(OP, format!("t must be finite and > 0, got {t}")));
    }
    if !(x >= 0.0) || !(y >= 0.0) {
        return Err(Error::domain(OP, format!("x, y must be >= 0, got ({x}, {y})")));
    }
    Ok(theta_unchecked(t, x, y))
}

#[inline]
pub(crate) fn ln_theta(t: f64, x: f64, y: f64) -> f64 {
    -0.5 * t.tanh() * (x * x + y * y)
}

#[inline]
pub(crate) fn theta_unchecked(t: f64, x: f64, y: f64) -> f64 {
    ln_theta(t, x, y).exp()
}
