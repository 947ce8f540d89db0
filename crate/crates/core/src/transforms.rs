//! Riesz transforms `R_j = (∂_j + V_j) L^{-1/2}`: kernel values, the
//! local/global/potential splitting, application to functions in the
//! principal-value sense, and the semigroup maximal function.
//!
//! `R_j(x,y) = π^{-1/2} ∫_0^∞ (∂_{x_j} + V_j(x_j)) T_t(x,y) dt/√t`.
//! Applications and maximal functions are one-dimensional.

use std::cell::RefCell;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::geometry::Axis;
use crate::kernels::{FactorSpec, KernelFamily};
use crate::quadrature::{
    integrate, integrate_space, integrate_time, principal_value, QuadResult, QuadratureConfig,
    Segment, TailEnvelope,
};

/// Tolerances for kernel time integrals and outer spatial integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformConfig {
    /// Time integrals defining `R_j(x, y)`.
    pub kernel: QuadratureConfig,
    /// Principal values and `T_t f(x)`.
    pub outer: QuadratureConfig,
    /// Geometric `t`-grid density of the maximal function.
    pub per_decade: usize,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            kernel: QuadratureConfig {
                rel_tol: 1e-11,
                abs_tol: 1e-300,
                ..QuadratureConfig::default()
            },
            outer: QuadratureConfig {
                rel_tol: 1e-9,
                abs_tol: 1e-15,
                ..QuadratureConfig::default()
            },
            per_decade: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszSplit {
    pub loc: f64,
    pub glob: f64,
    pub pot: f64,
    pub tau: f64,
}

impl RieszSplit {
    pub fn total(&self) -> f64 {
        self.loc + self.glob + self.pot
    }
}

#[derive(Clone, Copy)]
enum Integrand {
    Adapted,
    Derivative,
    Potential,
}

fn check_pair(family: &KernelFamily, j: usize, x: &[f64], y: &[f64], op: &'static str) -> Result<()> {
    if j >= family.dim() {
        return Err(Error::usage(op, format!("coordinate index {j} out of range for dimension {}", family.dim())));
    }
    let dom = family.domain();
    if x.len() != family.dim() || y.len() != family.dim() || !dom.contains(x) || !dom.contains(y) {
        return Err(Error::domain(op, format!("points {x:?}, {y:?} must lie in the open domain")));
    }
    if x == y {
        return Err(Error::Singular { op });
    }
    Ok(())
}

/// `π^{-1/2} ∫_a^b (…) T_t(x,y) dt/√t`, split at `|x-y|²` and, for
/// Laguerre factors, at `t = 1`.
fn time_integral(
    family: &KernelFamily,
    j: usize,
    x: &[f64],
    y: &[f64],
    a: f64,
    b: f64,
    which: Integrand,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    let r2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    let mut splits = vec![r2];
    if family.specs().iter().any(|s| matches!(s, FactorSpec::Laguerre { .. })) {
        splits.push(1.0);
    }
    let pot = family.factors()[j].potential(x[j]);
    let f = |t: f64| match which {
        Integrand::Adapted => family.dx_unchecked(j, t, x, y, true),
        Integrand::Derivative => family.dx_unchecked(j, t, x, y, false),
        Integrand::Potential => pot * family.value_unchecked(t, x, y),
    };
    if matches!(which, Integrand::Potential) && pot == 0.0 {
        return Ok(QuadResult::ZERO);
    }
    let r = integrate_time(f, a, b, &splits, cfg)?;
    let s = PI.powf(-0.5);
    Ok(QuadResult {
        value: r.value * s,
        error: r.error * s,
        evaluations: r.evaluations,
    })
}

/// `R_j(x, y)` with an explicit time-integral configuration.
pub fn riesz_kernel_with(
    family: &KernelFamily,
    j: usize,
    x: &[f64],
    y: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    const OP: &str = "transforms::riesz_kernel";
    check_pair(family, j, x, y, OP)?;
    time_integral(family, j, x, y, 0.0, f64::INFINITY, Integrand::Adapted, cfg)
}

/// `R_j(x, y) = π^{-1/2} ∫_0^∞ (∂_{x_j} + V_j) T_t(x,y) dt/√t`.
pub fn riesz_kernel(family: &KernelFamily, j: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(riesz_kernel_with(family, j, x, y, &TransformConfig::default().kernel)?.value)
}

/// `R_j = R^j_{τ,loc} + R^j_{τ,glob} + R^j_V`: the derivative part cut at
/// `t = τ²` and the potential part.
pub fn riesz_kernel_split(family: &KernelFamily, j: usize, tau: f64, x: &[f64], y: &[f64]) -> Result<RieszSplit> {
    const OP: &str = "transforms::riesz_kernel_split";
    check_pair(family, j, x, y, OP)?;
    if !(tau > 0.0) {
        return Err(Error::domain(OP, format!("tau must be > 0, got {tau}")));
    }
    let cfg = TransformConfig::default().kernel;
    let t2 = tau * tau;
    let loc = if t2.is_finite() {
        time_integral(family, j, x, y, 0.0, t2, Integrand::Derivative, &cfg)?.value
    } else {
        time_integral(family, j, x, y, 0.0, f64::INFINITY, Integrand::Derivative, &cfg)?.value
    };
    let glob = if t2.is_finite() {
        time_integral(family, j, x, y, t2, f64::INFINITY, Integrand::Derivative, &cfg)?.value
    } else {
        0.0
    };
    let pot = time_integral(family, j, x, y, 0.0, f64::INFINITY, Integrand::Potential, &cfg)?.value;
    Ok(RieszSplit { loc, glob, pot, tau })
}

/// Local part of the classical Riesz kernel,
/// `π^{-1/2} ∫_0^{τ²} ∂_{x_j} H_t(x-y) dt/√t`, in closed form:
/// `-(x_j-y_j) π^{-(d+1)/2} |x-y|^{-d-1} Γ((d+1)/2, |x-y|²/4τ²)`.
pub fn classical_local_riesz_kernel(tau: f64, j: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    const OP: &str = "transforms::classical_local_riesz_kernel";
    let d = x.len();
    if d == 0 || d > 3 || y.len() != d || j >= d {
        return Err(Error::usage(OP, "need 1 <= d <= 3 and matching point dimensions"));
    }
    if !(tau > 0.0) {
        return Err(Error::domain(OP, format!("tau must be > 0, got {tau}")));
    }
    if x == y {
        return Err(Error::Singular { op: OP });
    }
    let r2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
    let r = r2.sqrt();
    let z = r2 / (4.0 * tau * tau);
    let upper_gamma = match d {
        1 => (-z).exp(),
        2 => z.sqrt() * (-z).exp() + 0.5 * PI.sqrt() * erfc(z.sqrt()),
        _ => (1.0 + z) * (-z).exp(),
    };
    Ok(-(x[j] - y[j]) * PI.powf(-((d + 1) as f64) / 2.0) * r.powi(-(d as i32) - 1) * upper_gamma)
}

/// Closed-form profiles carried by sampled functions; they give exact
/// values off the grid and certified tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Profile {
    /// `amp · exp(-(x-center)²/(2σ²))`.
    Gaussian { center: f64, sigma: f64, amp: f64 },
    /// `height · 1_{[lo,hi)}`.
    Indicator { lo: f64, hi: f64, height: f64 },
    /// `height` on `[lo, mid)`, `-height` on `[mid, hi)`.
    Haar { lo: f64, hi: f64, height: f64 },
    /// `amp / (1 + ((x-center)/width)²)`.
    Lorentzian { center: f64, width: f64, amp: f64 },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        const OP: &str = "transforms::Profile";
        let ok = match *self {
            Profile::Gaussian { center, sigma, amp } => sigma > 0.0 && center.is_finite() && amp.is_finite(),
            Profile::Indicator { lo, hi, height } | Profile::Haar { lo, hi, height } => {
                lo < hi && lo.is_finite() && hi.is_finite() && height.is_finite()
            }
            Profile::Lorentzian { center, width, amp } => width > 0.0 && center.is_finite() && amp.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::usage(OP, format!("invalid profile {self:?}")))
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Gaussian { center, sigma, amp } => amp * (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp(),
            Profile::Indicator { lo, hi, height } => {
                if x >= lo && x < hi {
                    height
                } else {
                    0.0
                }
            }
            Profile::Haar { lo, hi, height } => {
                let mid = 0.5 * (lo + hi);
                if x >= lo && x < mid {
                    height
                } else if x >= mid && x < hi {
                    -height
                } else {
                    0.0
                }
            }
            Profile::Lorentzian { center, width, amp } => amp / (1.0 + ((x - center) / width).powi(2)),
        }
    }

    pub fn scaled(&self, c: f64) -> Profile {
        match *self {
            Profile::Gaussian { center, sigma, amp } => Profile::Gaussian { center, sigma, amp: amp * c },
            Profile::Indicator { lo, hi, height } => Profile::Indicator { lo, hi, height: height * c },
            Profile::Haar { lo, hi, height } => Profile::Haar { lo, hi, height: height * c },
            Profile::Lorentzian { center, width, amp } => Profile::Lorentzian { center, width, amp: amp * c },
        }
    }

    /// Jump points.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Profile::Indicator { lo, hi, .. } => vec![lo, hi],
            Profile::Haar { lo, hi, .. } => vec![lo, 0.5 * (lo + hi), hi],
            _ => vec![],
        }
    }

    /// Closed support `[lo, hi]`, possibly unbounded.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Profile::Indicator { lo, hi, .. } | Profile::Haar { lo, hi, .. } => (lo, hi),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Center and length scale.
    pub fn center_scale(&self) -> (f64, f64) {
        match *self {
            Profile::Gaussian { center, sigma, .. } => (center, sigma),
            Profile::Lorentzian { center, width, .. } => (center, width),
            Profile::Indicator { lo, hi, .. } | Profile::Haar { lo, hi, .. } => (0.5 * (lo + hi), hi - lo),
        }
    }

    /// `∫_ℝ f`.
    pub fn integral(&self) -> f64 {
        match *self {
            Profile::Gaussian { sigma, amp, .. } => amp * sigma * (2.0 * PI).sqrt(),
            Profile::Indicator { lo, hi, height } => height * (hi - lo),
            Profile::Haar { .. } => 0.0,
            Profile::Lorentzian { width, amp, .. } => amp * width * PI,
        }
    }

    /// `∫_ℝ |f|`.
    pub fn l1_norm(&self) -> f64 {
        match *self {
            Profile::Haar { lo, hi, height } => height.abs() * (hi - lo),
            _ => self.integral().abs(),
        }
    }

    /// `‖f‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            Profile::Gaussian { amp, .. } | Profile::Lorentzian { amp, .. } => amp.abs(),
            Profile::Indicator { height, .. } | Profile::Haar { height, .. } => height.abs(),
        }
    }

    /// Tail bound for `|f|` when the support is unbounded.
    pub fn envelope(&self) -> Option<TailEnvelope> {
        match *self {
            Profile::Gaussian { center, sigma, amp } => Some(TailEnvelope::Gaussian {
                amp: amp.abs(),
                center,
                width: 2.0 * sigma * sigma,
            }),
            Profile::Lorentzian { center, width, amp } => Some(TailEnvelope::Power {
                amp: amp.abs() * width * width,
                center,
                p: 2.0,
                r0: width,
            }),
            _ => None,
        }
    }
}

/// Values on a strictly increasing grid, interpolated by monotone cubic
/// Hermite splines (PCHIP) and zero outside the grid. With a profile
/// attached, off-grid values come from the profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
    profile: Option<Profile>,
    #[serde(skip)]
    slopes: Vec<f64>,
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = del[0];
        d[1] = del[0];
        return d;
    }
    for i in 1..n - 1 {
        if del[i - 1] * del[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], del[0], del[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

impl SampledFunction {
    pub fn from_values(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        const OP: &str = "transforms::SampledFunction";
        if grid.len() != values.len() || grid.is_empty() {
            return Err(Error::usage(OP, "grid and values must be nonempty and of equal length"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::usage(OP, "grid must be strictly increasing"));
        }
        if values.iter().chain(&grid).any(|v| !v.is_finite()) {
            return Err(Error::usage(OP, "grid and values must be finite"));
        }
        let slopes = pchip_slopes(&grid, &values);
        Ok(SampledFunction {
            grid,
            values,
            profile: None,
            slopes,
        })
    }

    pub fn from_profile(profile: Profile, grid: Vec<f64>) -> Result<Self> {
        profile.validate()?;
        let values = grid.iter().map(|&x| profile.eval(x)).collect();
        let mut f = Self::from_values(grid, values)?;
        f.profile = Some(profile);
        Ok(f)
    }

    /// Profile sampled on [`default_grid`] for the axis.
    pub fn sample(profile: Profile, axis: Axis) -> Result<Self> {
        profile.validate()?;
        Self::from_profile(profile, default_grid(&profile, axis))
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn profile(&self) -> Option<&Profile> {
        self.profile.as_ref()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if let Some(p) = &self.profile {
            return p.eval(x);
        }
        let g = &self.grid;
        let n = g.len();
        if n == 1 || x < g[0] || x > g[n - 1] {
            return if n == 1 && x == g[0] { self.values[0] } else { 0.0 };
        }
        let i = match g.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = g[i + 1] - g[i];
        let s = (x - g[i]) / h;
        let (y0, y1, d0, d1) = (self.values[i], self.values[i + 1], self.slopes[i], self.slopes[i + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.profile {
            Some(p) => p.breakpoints(),
            None => vec![self.grid[0], self.grid[self.grid.len() - 1]],
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match &self.profile {
            Some(p) => p.support(),
            None => (self.grid[0], self.grid[self.grid.len() - 1]),
        }
    }

    pub fn envelope(&self) -> Option<TailEnvelope> {
        self.profile.as_ref().and_then(|p| p.envelope())
    }

    pub fn scaled(&self, c: f64) -> SampledFunction {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out.slopes.iter_mut().for_each(|v| *v *= c);
        out.profile = self.profile.map(|p| p.scaled(c));
        out
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0) && self.profile.map_or(true, |p| p.sup_norm() == 0.0)
    }

    /// `‖f‖_{L¹}`; exact for profiles.
    pub fn l1_norm(&self, cfg: &QuadratureConfig) -> Result<f64> {
        if let Some(p) = &self.profile {
            return Ok(p.l1_norm());
        }
        Ok(l1_of_samples(self, Axis::Line, cfg)?.value)
    }
}

/// Grid adapted to a profile: geometric clustering toward every jump and
/// into the far field, uniform points across the bulk.
pub fn default_grid(profile: &Profile, axis: Axis) -> Vec<f64> {
    let (c, s) = profile.center_scale();
    let mut pts = vec![];
    // Bulk.
    for k in -40..=40 {
        pts.push(c + s * 0.05 * k as f64);
    }
    // Far field, distances s·10^{-1 … 4}.
    for k in 0..=40 {
        let r = s * 10f64.powf(-1.0 + 5.0 * k as f64 / 40.0);
        pts.push(c + 2.0 * s + r);
        pts.push(c - 2.0 * s - r);
    }
    // Toward jumps, distances s·10^{-7 … -1}.
    for b in profile.breakpoints() {
        for k in 0..=36 {
            let r = s * 10f64.powf(-7.0 + 6.0 * k as f64 / 36.0);
            pts.push(b - r);
            pts.push(b + r);
        }
    }
    // Transforms may be singular on the jumps themselves.
    let jumps = profile.breakpoints();
    pts.retain(|x| jumps.iter().all(|b| (x - b).abs() > 1e-9 * s));
    finish_grid(pts, axis)
}

fn finish_grid(mut pts: Vec<f64>, axis: Axis) -> Vec<f64> {
    if axis == Axis::HalfLine {
        pts.retain(|&x| x > 0.0);
        // Toward the boundary, geometric down to 1e-4 of the smallest point.
        let m = pts.iter().cloned().fold(f64::INFINITY, f64::min);
        for k in 1..=32 {
            pts.push(m * 10f64.powf(-4.0 * k as f64 / 32.0));
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (a.abs() + b.abs()));
    pts
}

/// Grid for a transform output of `f`: like [`default_grid`] but also for
/// functions without a profile (support endpoints are treated as jumps).
pub fn transform_grid(f: &SampledFunction, axis: Axis) -> Vec<f64> {
    match f.profile() {
        Some(p) => default_grid(p, axis),
        None => {
            let (lo, hi) = f.support();
            let p = Profile::Indicator { lo, hi, height: 1.0 };
            default_grid(&p, axis)
        }
    }
}

fn axis_segment(axis: Axis) -> Segment {
    match axis {
        Axis::Line => Segment::real_line(),
        Axis::HalfLine => Segment::half_line(),
    }
}

fn single_axis(family: &KernelFamily, op: &'static str) -> Result<Axis> {
    match family.as_single() {
        Some(f) => Ok(f.axis()),
        None => Err(Error::capability(op, "function transforms are implemented in dimension 1 only")),
    }
}

/// `A` with `|R(x,y)| ≤ A/|x-y|`, used to bound the far field of the
/// principal-value integrand. Exact for heat and Dirichlet; for Bessel
/// and Laguerre a sampled maximum with a factor of 2 margin.
pub fn riesz_far_constant(family: &KernelFamily) -> f64 {
    match family.as_single().map(|f| f.spec()) {
        Some(FactorSpec::Heat) => 1.0 / PI,
        Some(FactorSpec::Dirichlet) => 2.0 / PI,
        Some(FactorSpec::Bessel { beta }) | Some(FactorSpec::Laguerre { beta }) => 4.0 / PI * (1.0 + beta),
        None => f64::INFINITY,
    }
}

/// `R_j f(x)` in the principal-value sense (d = 1).
pub fn riesz_apply_at(
    family: &KernelFamily,
    f: &SampledFunction,
    x: f64,
    cfg: &TransformConfig,
) -> Result<QuadResult> {
    const OP: &str = "transforms::riesz_apply";
    let axis = single_axis(family, OP)?;
    if !axis.contains(x) {
        return Err(Error::domain(OP, format!("x = {x} outside the domain")));
    }
    let dom = axis_segment(axis);
    let (slo, shi) = f.support();
    let seg = Segment::new(slo.max(dom.lo), shi.min(dom.hi));
    if !(seg.hi > seg.lo) || f.is_zero() {
        return Ok(QuadResult::ZERO);
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let kernel = |y: f64| -> f64 {
        if y == x || !axis.contains(y) {
            return 0.0;
        }
        match riesz_kernel_with(family, 0, &[x], &[y], &cfg.kernel) {
            Ok(r) => r.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let fv = |y: f64| f.eval(y);
    let mut breaks: Vec<f64> = f.breakpoints().into_iter().filter(|b| seg.contains(*b)).collect();
    // The bulk of f must not hide inside one wide panel when x is far away.
    if let Some(p) = f.profile() {
        let (c, sc) = p.center_scale();
        for k in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
            breaks.push(c + k * sc);
        }
    }
    // Geometric panels toward x resolve the near-singular integrand when x
    // sits just outside the support.
    let gap = if x <= seg.lo { seg.lo - x } else if x >= seg.hi { x - seg.hi } else { 0.0 };
    if gap > 0.0 {
        let edge = if x <= seg.lo { seg.lo } else { seg.hi };
        let dir = if x <= seg.lo { 1.0 } else { -1.0 };
        let mut r = gap;
        while r < seg.hi - seg.lo {
            breaks.push(edge + dir * r);
            r *= 2.0;
        }
    }
    breaks.retain(|b| *b > seg.lo && *b < seg.hi);
    let far = riesz_far_constant(family);
    let envelope = f.envelope().map(|env| {
        let c = env.center();
        let dist = (x - c).abs();
        match env {
            TailEnvelope::Gaussian { amp, width, .. } => {
                let core = 3.0 * width.sqrt() + dist;
                for b in [c - 2.0 * core, c + 2.0 * core] {
                    if seg.contains(b) {
                        breaks.push(b);
                    }
                }
                TailEnvelope::Gaussian { amp: amp * far / core, center: c, width }
            }
            TailEnvelope::Power { amp, p, r0, .. } => {
                let r0 = 2.0 * (r0 + dist);
                TailEnvelope::Power { amp: 2.0 * far * amp, center: c, p: p + 1.0, r0 }
            }
        }
    });
    let result = if x > seg.lo && x < seg.hi {
        principal_value(kernel, fv, x, seg, &breaks, envelope.as_ref(), &cfg.outer)
    } else {
        let mut singular = vec![];
        if seg.contains(x) {
            singular.push(x);
        }
        integrate_space(|y| kernel(y) * fv(y), seg, &singular, &breaks, envelope.as_ref(), &cfg.outer)
    };
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    result
}

/// `R_j f` on `grid` (d = 1, so `j = 0`).
pub fn riesz_apply_on(
    family: &KernelFamily,
    j: usize,
    f: &SampledFunction,
    grid: Vec<f64>,
    cfg: &TransformConfig,
) -> Result<SampledFunction> {
    const OP: &str = "transforms::riesz_apply";
    single_axis(family, OP)?;
    if j != 0 {
        return Err(Error::usage(OP, format!("coordinate index {j} out of range for dimension 1")));
    }
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&x| riesz_apply_at(family, f, x, cfg).map(|r| r.value))
        .collect::<Result<_>>()?;
    SampledFunction::from_values(grid, values)
}

/// `R_j f` on the input grid.
pub fn riesz_apply(family: &KernelFamily, j: usize, f: &SampledFunction, cfg: &TransformConfig) -> Result<SampledFunction> {
    riesz_apply_on(family, j, f, f.grid().to_vec(), cfg)
}

/// `T_t f(x) = ∫ T_t(x,y) f(y) dy` (d = 1).
pub fn semigroup_apply(family: &KernelFamily, t: f64, f: &SampledFunction, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    const OP: &str = "transforms::semigroup_apply";
    let axis = single_axis(family, OP)?;
    if !(t > 0.0) || !axis.contains(x) {
        return Err(Error::domain(OP, format!("need t > 0 and x in the domain, got t={t}, x={x}")));
    }
    let factor = family.as_single().expect("one-dimensional");
    let dom = axis_segment(axis);
    let (slo, shi) = f.support();
    let seg = Segment::new(slo.max(dom.lo), shi.min(dom.hi));
    if !(seg.hi > seg.lo) {
        return Ok(0.0);
    }
    let w = t.sqrt();
    let mut breaks: Vec<f64> = f.breakpoints();
    for k in [-8.0, -2.0, 0.0, 2.0, 8.0] {
        breaks.push(x + k * w);
    }
    breaks.retain(|b| seg.contains(*b) && *b > seg.lo && *b < seg.hi);
    let integrand = |y: f64| {
        if axis.contains(y) {
            factor.value(t, x, y) * f.eval(y)
        } else {
            0.0
        }
    };
    if seg.is_bounded() {
        // The Gaussian factor is negligible beyond x ± 40√t.
        let c = factor.gaussian_certificate().1;
        let cut = (c * t * 700.0).sqrt();
        let lo = seg.lo.max(x - cut);
        let hi = seg.hi.min(x + cut);
        if !(hi > lo) {
            return Ok(0.0);
        }
        breaks.retain(|b| *b > lo && *b < hi);
        if f.profile().is_none() {
            // The interpolant's second derivative jumps at every node.
            let g = f.grid();
            let (a, b) = (g.partition_point(|v| *v <= lo), g.partition_point(|v| *v < hi));
            breaks.extend_from_slice(&g[a..b]);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
        }
        let r = integrate(integrand, lo, hi, &breaks, cfg);
        return cancellation_floor(r, || integrate(|y| integrand(y).abs(), lo, hi, &breaks, &coarse(cfg)));
    }
    let (c_amp, c) = factor.gaussian_certificate();
    let peak = c_amp * (c * PI * t).powf(-0.5);
    let env = match f.envelope() {
        Some(TailEnvelope::Gaussian { amp, center, width }) => TailEnvelope::Gaussian { amp: amp * peak, center, width },
        Some(TailEnvelope::Power { amp, center, p, r0 }) => TailEnvelope::Power { amp: amp * peak, center, p, r0 },
        None => TailEnvelope::Gaussian {
            amp: peak * f.values().iter().fold(0.0, |m: f64, v| m.max(v.abs())),
            center: x,
            width: c * t,
        },
    };
    let r = integrate_space(integrand, seg, &[], &breaks, Some(&env), cfg);
    cancellation_floor(r, || integrate_space(|y| integrand(y).abs(), seg, &[], &breaks, Some(&env), &coarse(cfg)))
}

fn coarse(cfg: &QuadratureConfig) -> QuadratureConfig {
    QuadratureConfig {
        rel_tol: 1e-6,
        ..*cfg
    }
}

/// Accepts an integral whose tolerance was missed only because of
/// cancellation: the error is below `1e-11` of `∫|integrand|`.
fn cancellation_floor(r: Result<QuadResult>, mass: impl FnOnce() -> Result<QuadResult>) -> Result<f64> {
    match r {
        Ok(q) => Ok(q.value),
        Err(Error::Accuracy { op, estimate, error }) => {
            let m = mass()?.value;
            if error <= 1e-11 * m {
                Ok(estimate)
            } else {
                Err(Error::Accuracy { op, estimate, error })
            }
        }
        Err(e) => Err(e),
    }
}

/// Discrete supremum of `|T_t f(x)|` over a geometric `t`-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalValue {
    pub value: f64,
    /// Maximizing time.
    pub t_max: f64,
    /// Relative change against the grid with half the density.
    pub refinement_change: f64,
}

/// `sup_{t>0} |T_t f(x)|` over `t ∈ [t_min, t_max]` with `per_decade`
/// points per decade and a golden-section polish at the discrete
/// maximum. The range runs from `(10^{-3} s)²` to `100 (s + dist)²`, with
/// `s` the scale of `f` and `dist` the distance from `x` to its center.
/// The result is a lower bound of the supremum.
pub fn maximal_function(family: &KernelFamily, f: &SampledFunction, x: f64, cfg: &TransformConfig) -> Result<MaximalValue> {
    const OP: &str = "transforms::maximal_function";
    single_axis(family, OP)?;
    if f.is_zero() {
        return Ok(MaximalValue { value: 0.0, t_max: 0.0, refinement_change: 0.0 });
    }
    let (c, s) = match f.profile() {
        Some(p) => p.center_scale(),
        None => {
            let (lo, hi) = f.support();
            (0.5 * (lo + hi), hi - lo)
        }
    };
    let mut near = s;
    for b in f.breakpoints() {
        if (b - x).abs() > 0.0 {
            near = near.min((b - x).abs());
        }
    }
    // The second bound keeps √t well above the spacing of floats near x.
    let t_min = (1e-3 * near.min(s)).max(1e-9 * (x.abs() + s)).powi(2);
    let t_max = 100.0 * (s + (x - c).abs() + if family.domain().axes[0] == Axis::HalfLine { x } else { 0.0 }).powi(2);
    let n = ((t_max / t_min).log10() * cfg.per_decade as f64).ceil() as usize;
    let eval = |lt: f64| semigroup_apply(family, lt.exp(), f, x, &cfg.outer).map(f64::abs);
    let (l0, l1) = (t_min.ln(), t_max.ln());
    let mut best = (0.0, l0);
    let mut best_coarse: f64 = 0.0;
    for k in 0..=n {
        let lt = l0 + (l1 - l0) * k as f64 / n as f64;
        let v = eval(lt)?;
        if v > best.0 {
            best = (v, lt);
        }
        if k % 2 == 0 {
            best_coarse = best_coarse.max(v);
        }
    }
    // Golden-section polish around the grid maximum.
    let h = (l1 - l0) / n as f64;
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c1 = b - g * (b - a);
    let mut c2 = a + g * (b - a);
    let mut f1 = eval(c1)?;
    let mut f2 = eval(c2)?;
    for _ in 0..20 {
        if f1 > f2 {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - g * (b - a);
            f1 = eval(c1)?;
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + g * (b - a);
            f2 = eval(c2)?;
        }
    }
    let (mut value, mut lt) = (best.0, best.1);
    for (v, l) in [(f1, c1), (f2, c2)] {
        if v > value {
            value = v;
            lt = l;
        }
    }
    Ok(MaximalValue {
        value,
        t_max: lt.exp(),
        refinement_change: if value > 0.0 { (value - best_coarse) / value } else { 0.0 },
    })
}

/// `M f` on a grid (d = 1).
pub fn maximal_on(family: &KernelFamily, f: &SampledFunction, grid: Vec<f64>, cfg: &TransformConfig) -> Result<SampledFunction> {
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&x| maximal_function(family, f, x, cfg).map(|m| m.value))
        .collect::<Result<_>>()?;
    SampledFunction::from_values(grid, values)
}

/// `∫|g|` of a sampled function over its grid plus power-law tails fitted
/// to the outermost samples, with an estimate of the tail contribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Estimate {
    pub value: f64,
    pub tail: f64,
}

/// L¹ norm of the PCHIP interpolant of `g`; infinite ends of the axis get
/// a power tail `|g(x)| ~ |x|^{-p}` fitted to the last samples. A fitted
/// `p ≤ 1.05` means the norm diverges.
pub fn l1_of_samples(g: &SampledFunction, axis: Axis, cfg: &QuadratureConfig) -> Result<L1Estimate> {
    const OP: &str = "transforms::l1_norm";
    let grid = g.grid();
    let n = grid.len();
    if n < 4 {
        return Err(Error::usage(OP, "need at least 4 samples"));
    }
    let body = integrate(|x| g.eval(x).abs(), grid[0], grid[n - 1], &grid[1..n - 1], cfg)?;
    let mut tail = 0.0;
    let center = match axis {
        Axis::Line => 0.5 * (grid[0] + grid[n - 1]),
        Axis::HalfLine => 0.0,
    };
    let fit = |i: usize, k: usize| -> Result<f64> {
        let (xa, xb) = ((grid[i] - center).abs(), (grid[k] - center).abs());
        let (ya, yb) = (g.values()[i].abs(), g.values()[k].abs());
        if yb == 0.0 {
            return Ok(0.0);
        }
        if ya == 0.0 {
            return Ok(0.0);
        }
        let p = -(yb / ya).ln() / (xb / xa).ln();
        if !(p > 1.05) {
            return Err(Error::Divergence {
                op: OP,
                msg: format!("tail decays like |x|^-{p:.3}, not integrable"),
                estimate: body.value,
            });
        }
        Ok(yb * xb / (p - 1.0))
    };
    tail += fit(n - 4, n - 1)?;
    match axis {
        Axis::Line => tail += fit(3, 0)?,
        Axis::HalfLine => tail += g.values()[0].abs() * grid[0],
    }
    Ok(L1Estimate { value: body.value + tail, tail })
}
