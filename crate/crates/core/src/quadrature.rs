//! Adaptive Gauss–Kronrod quadrature for the time integrals `dt/√t`,
//! spatial integrals with certified tails, and principal values.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Bisections allowed per initial panel.
    pub max_subdivisions: usize,
    /// Tails are truncated where the envelope bound is below
    /// `tolerance / tail_safety`.
    pub tail_safety: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_subdivisions: 60,
            tail_safety: 10.0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        const OP: &str = "quadrature::QuadratureConfig";
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::usage(OP, "tolerances must be > 0"));
        }
        if self.max_subdivisions < 8 {
            return Err(Error::usage(OP, "max_subdivisions must be >= 8"));
        }
        if !(self.tail_safety >= 1.0) {
            return Err(Error::usage(OP, "tail_safety must be >= 1"));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_subdivisions(mut self, n: usize) -> Self {
        self.max_subdivisions = n;
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Value of an integral with its error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

impl QuadResult {
    pub const ZERO: QuadResult = QuadResult {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };

    fn add(self, other: QuadResult) -> QuadResult {
        QuadResult {
            value: self.value + other.value,
            error: self.error + other.error,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

// 21-point Kronrod abscissae and weights with the embedded 10-point Gauss rule.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_916_116_040,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, op: &'static str) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    let mut res_k = WGK[10] * fc;
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    if !res_k.is_finite() || !fc.is_finite() {
        return Err(Error::domain(
            op,
            format!("integrand is not finite on [{a:e}, {b:e}]"),
        ));
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let value = res_k * half;
    res_abs *= h;
    res_asc *= h;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { a, b, value, error })
}

/// Globally adaptive GK21 over the given initial panels.
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    edges: &[f64],
    cfg: &QuadratureConfig,
    op: &'static str,
) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut settled = QuadResult::ZERO;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    for w in edges.windows(2) {
        if w[1] > w[0] {
            let p = gk21(f, w[0], w[1], op)?;
            evaluations += 21;
            value += p.value;
            error += p.error;
            heap.push(p);
        }
    }
    let budget = cfg.max_subdivisions * heap.len().max(1);
    let mut splits = 0;
    while error > cfg.target(value) {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if splits >= budget || !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-15 * mid.abs() {
            // Cannot refine further; keep it out of the heap.
            settled.value += worst.value;
            settled.error += worst.error;
            if splits >= budget {
                for p in heap.drain() {
                    settled.value += p.value;
                    settled.error += p.error;
                }
                return Err(Error::Accuracy {
                    op,
                    estimate: settled.value,
                    error: settled.error,
                });
            }
            continue;
        }
        let left = gk21(f, worst.a, mid, op)?;
        let right = gk21(f, mid, worst.b, op)?;
        evaluations += 42;
        splits += 1;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to avoid drift from the incremental updates.
    let mut total = settled;
    for p in heap {
        total.value += p.value;
        total.error += p.error;
    }
    total.evaluations = evaluations;
    if total.error > cfg.target(total.value) * 1.0001 && total.error > cfg.abs_tol {
        return Err(Error::Accuracy {
            op,
            estimate: total.value,
            error: total.error,
        });
    }
    Ok(total)
}

fn sorted_edges(lo: f64, hi: f64, interior: &[f64]) -> Vec<f64> {
    let mut edges = vec![lo];
    let mut pts: Vec<f64> = interior
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    edges.extend(pts);
    edges.push(hi);
    edges
}

/// Plain adaptive integral of `f` over `[a, b]` split at `breaks`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    const OP: &str = "quadrature::integrate";
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::usage(OP, "limits must be finite"));
    }
    if b < a {
        let r = integrate(f, b, a, breaks, cfg)?;
        return Ok(QuadResult {
            value: -r.value,
            ..r
        });
    }
    adaptive(&f, &sorted_edges(a, b, breaks), cfg, OP)
}

/// `∫_a^b f(t) dt/√t` for `0 ≤ a < b ≤ ∞`.
///
/// With `t = u²` the weight becomes `2 du`. An infinite upper limit is
/// mapped to `(0, 1]` by `u = u_s / v`, where `u_s` is the last split
/// point; the map is exact, so no truncation error enters. `splits` are
/// times at which the integrand changes scale (e.g. `|x - y|²`).
pub fn integrate_time<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    splits: &[f64],
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    const OP: &str = "quadrature::integrate_time";
    if !(a >= 0.0) || !(b > a) || a.is_infinite() {
        return Err(Error::usage(OP, format!("need 0 <= a < b, got a={a}, b={b}")));
    }
    let ua = a.sqrt();
    let g = |u: f64| 2.0 * f(u * u);
    let mut us: Vec<f64> = splits
        .iter()
        .filter(|s| s.is_finite() && **s > a && **s < b)
        .map(|s| s.sqrt())
        .collect();
    us.sort_by(f64::total_cmp);
    us.dedup();
    if b.is_finite() {
        let mut edges = vec![ua];
        edges.extend(us);
        edges.push(b.sqrt());
        return adaptive(&g, &edges, cfg, OP);
    }
    let u_s = us.last().copied().unwrap_or((ua * 2.0).max(1.0));
    let mut edges = vec![ua];
    edges.extend(us.iter().copied().filter(|u| *u < u_s));
    edges.push(u_s);
    // Extra panels in v resolve integrands that keep varying well past u_s.
    let tail = |v: f64| {
        if v <= 0.0 {
            0.0
        } else {
            let u = u_s / v;
            g(u) * u_s / (v * v)
        }
    };
    let tail_edges = [0.0, 0.01, 0.05, 0.2, 0.5, 1.0];
    // Each part is held to the joint target so that small parts do not
    // demand more precision than the total requires.
    let head = adaptive(&g, &edges, cfg, OP)?;
    let mut tail_cfg = *cfg;
    tail_cfg.abs_tol = cfg.abs_tol.max(cfg.rel_tol * head.value.abs() * 0.5);
    let rest = adaptive(&tail, &tail_edges, &tail_cfg, OP)?;
    Ok(head.add(rest))
}

/// An interval of the real line; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
}

impl Segment {
    pub fn new(lo: f64, hi: f64) -> Self {
        Segment { lo, hi }
    }

    pub fn real_line() -> Self {
        Segment::new(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn half_line() -> Self {
        Segment::new(0.0, f64::INFINITY)
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Certified bound on `|f(x)|` far from `center`, used to truncate
/// integrals over unbounded segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailEnvelope {
    /// `|f(x)| ≤ amp · exp(-(x - center)² / width)` everywhere.
    Gaussian { amp: f64, center: f64, width: f64 },
    /// `|f(x)| ≤ amp · |x - center|^{-p}` for `|x - center| ≥ r0`, `p > 1`.
    Power {
        amp: f64,
        center: f64,
        p: f64,
        r0: f64,
    },
}

impl TailEnvelope {
    pub fn center(&self) -> f64 {
        match *self {
            TailEnvelope::Gaussian { center, .. } | TailEnvelope::Power { center, .. } => center,
        }
    }

    /// Radius around the center past which the envelope is used.
    fn core_radius(&self) -> f64 {
        match *self {
            TailEnvelope::Gaussian { width, .. } => 3.0 * width.sqrt(),
            TailEnvelope::Power { r0, .. } => r0,
        }
    }

    /// Bound on `∫_{|x-c| > r} |f|` on one side.
    pub fn tail_mass(&self, r: f64) -> f64 {
        match *self {
            TailEnvelope::Gaussian { amp, width, .. } => {
                let s = width.sqrt();
                amp * s * std::f64::consts::PI.sqrt() * 0.5 * erfc(r.max(0.0) / s)
            }
            TailEnvelope::Power { amp, p, r0, .. } => {
                let r = r.max(r0);
                amp * r.powf(1.0 - p) / (p - 1.0)
            }
        }
    }

    /// Smallest radius with one-sided tail mass below `eps`.
    pub fn truncation_radius(&self, eps: f64) -> f64 {
        match *self {
            TailEnvelope::Gaussian { amp, width, .. } => {
                let s = width.sqrt();
                let scale = amp * s * std::f64::consts::PI.sqrt() * 0.5;
                if scale <= eps {
                    return 0.0;
                }
                let q = (eps / scale).max(1e-300);
                let r = if q > 1e-15 {
                    s * erfc_inv(q)
                } else {
                    // Asymptotic inversion of erfc for very small targets.
                    let mut r = (-(q).ln()).sqrt();
                    for _ in 0..8 {
                        r = (-(q * r * std::f64::consts::PI.sqrt()).ln()).max(0.0).sqrt();
                    }
                    s * r
                };
                r * 1.0001
            }
            TailEnvelope::Power { amp, p, r0, .. } => {
                let r = (amp / (eps * (p - 1.0))).powf(1.0 / (p - 1.0));
                r.max(r0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        const OP: &str = "quadrature::TailEnvelope";
        match *self {
            TailEnvelope::Gaussian { amp, width, center } => {
                if !(amp >= 0.0) || !(width > 0.0) || !center.is_finite() {
                    return Err(Error::usage(OP, "gaussian envelope needs amp >= 0, width > 0"));
                }
            }
            TailEnvelope::Power { amp, p, r0, center } => {
                if !(amp >= 0.0) || !(p > 1.0) || !(r0 > 0.0) || !center.is_finite() {
                    return Err(Error::usage(OP, "power envelope needs amp >= 0, p > 1, r0 > 0"));
                }
            }
        }
        Ok(())
    }

    /// Power envelope `amp |x-c|^{-p}` fitted on samples beyond `r0`,
    /// inflated by `safety`. Not a proof; used where only sampled values
    /// of a transform are available.
    pub fn fit_power<F: Fn(f64) -> f64>(f: F, center: f64, r0: f64, p: f64, safety: f64) -> Self {
        let mut amp: f64 = 0.0;
        for k in 0..=60 {
            let r = r0 * 2f64.powf(k as f64 / 4.0);
            amp = amp
                .max(f(center + r).abs() * r.powf(p))
                .max(f(center - r).abs() * r.powf(p));
        }
        TailEnvelope::Power {
            amp: amp * safety,
            center,
            p,
            r0,
        }
    }
}

/// Maps `[0, 1]` onto `[p, q]` with a fourth-order zero of the Jacobian
/// at `p`, making integrable endpoint singularities smooth.
fn clustered<F: Fn(f64) -> f64>(f: &F, p: f64, q: f64) -> impl Fn(f64) -> f64 + '_ {
    move |s: f64| {
        let s2 = s * s;
        let x = p + (q - p) * s2 * s2;
        let jac = 4.0 * (q - p) * s2 * s;
        if jac == 0.0 {
            0.0
        } else {
            f(x) * jac
        }
    }
}

/// Integral over a finite segment with declared singular points; each
/// sub-panel touching a singular point is split at its midpoint and
/// each half clustered towards the singular end.
fn finite_with_singular<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    singular: &[f64],
    breaks: &[f64],
    cfg: &QuadratureConfig,
    op: &'static str,
) -> Result<QuadResult> {
    let is_singular = |x: f64| singular.iter().any(|s| (s - x).abs() <= 1e-14 * (1.0 + x.abs()));
    let mut all: Vec<f64> = singular.to_vec();
    all.extend_from_slice(breaks);
    let edges = sorted_edges(lo, hi, &all);
    let mut plain = vec![];
    let mut total = QuadResult::ZERO;
    let mut panel_cfg = *cfg;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sa = is_singular(a);
        let sb = is_singular(b);
        if !sa && !sb {
            plain.push((a, b));
            continue;
        }
        let mid = 0.5 * (a + b);
        let halves = [(a, mid, sa), (b, mid, sb)];
        for (end, other, sing) in halves {
            if sing {
                let g = clustered(f, end, other);
                let r = adaptive(&g, &[0.0, 0.5, 1.0], &panel_cfg, op)?;
                // clustered(end, other) integrates from `end` to `other`.
                let signed = if end < other { r.value } else { -r.value };
                total = total.add(QuadResult { value: signed, ..r });
            } else if end < other {
                plain.push((end, other));
            } else {
                plain.push((other, end));
            }
        }
        panel_cfg.abs_tol = cfg.abs_tol.max(cfg.rel_tol * total.value.abs() * 0.1);
    }
    plain.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut plain_edges: Vec<f64> = vec![];
    let mut runs: Vec<Vec<f64>> = vec![];
    for (a, b) in plain {
        if plain_edges.last() == Some(&a) {
            plain_edges.push(b);
        } else {
            if plain_edges.len() > 1 {
                runs.push(std::mem::take(&mut plain_edges));
            }
            plain_edges = vec![a, b];
        }
    }
    if plain_edges.len() > 1 {
        runs.push(plain_edges);
    }
    for run in runs {
        total = total.add(adaptive(f, &run, &panel_cfg, op)?);
    }
    Ok(total)
}

/// `∫ f` over a segment.
///
/// `singular` lists points where `f` has integrable singularities (or
/// kinks); `breaks` lists ordinary panel boundaries. An unbounded
/// segment requires an envelope; the truncation point is solved from
/// it so the discarded tail is below `tolerance / tail_safety`, and the
/// envelope's tail bound is added to the reported error.
pub fn integrate_space<F: Fn(f64) -> f64>(
    f: F,
    segment: Segment,
    singular: &[f64],
    breaks: &[f64],
    envelope: Option<&TailEnvelope>,
    cfg: &QuadratureConfig,
) -> Result<QuadResult> {
    const OP: &str = "quadrature::integrate_space";
    if !(segment.lo < segment.hi) {
        return Err(Error::usage(OP, "empty segment"));
    }
    if segment.is_bounded() {
        return finite_with_singular(&f, segment.lo, segment.hi, singular, breaks, cfg, OP);
    }
    let env = envelope.ok_or_else(|| {
        Error::usage(OP, "unbounded segment needs a tail decay envelope")
    })?;
    env.validate()?;
    let c = env.center();
    let mut core_lo = segment.lo.max(c - env.core_radius());
    let mut core_hi = segment.hi.min(c + env.core_radius());
    for &p in singular.iter().chain(breaks) {
        if segment.contains(p) && p.is_finite() {
            core_lo = core_lo.min(p);
            core_hi = core_hi.max(p);
        }
    }
    if core_hi <= core_lo {
        // Envelope center lies outside the segment.
        if segment.lo.is_finite() {
            core_lo = segment.lo;
            core_hi = segment.lo + env.core_radius().max(1.0);
        } else {
            core_hi = segment.hi;
            core_lo = segment.hi - env.core_radius().max(1.0);
        }
    }
    let mut total = finite_with_singular(&f, core_lo, core_hi, singular, breaks, cfg, OP)?;
    let eps = |v: f64| cfg.target(v) / cfg.tail_safety;
    // One extension per infinite side; the tail target uses the core value.
    for side in [1.0_f64, -1.0] {
        let (open, start) = if side > 0.0 {
            (segment.hi.is_infinite(), core_hi)
        } else {
            (segment.lo.is_infinite(), core_lo)
        };
        if !open {
            continue;
        }
        let r_start = (start - c) * side;
        let r_cut = env.truncation_radius(eps(total.value) * 0.5).max(r_start);
        let cut = c + side * r_cut;
        let tail_bound = env.tail_mass(r_cut);
        let mut part_cfg = *cfg;
        part_cfg.abs_tol = cfg.abs_tol.max(cfg.rel_tol * total.value.abs() * 0.5);
        if r_cut > r_start {
            let part = match env {
                TailEnvelope::Power { .. } if r_start > 0.0 && r_cut / r_start > 8.0 => {
                    // Logarithmic variable: integrand ~ r^{1-p} becomes smooth.
                    let g = |s: f64| {
                        let r = s.exp();
                        f(c + side * r) * r
                    };
                    let (s0, s1) = (r_start.ln(), r_cut.ln());
                    let n = ((s1 - s0) / 2.0).ceil().max(1.0) as usize;
                    let edges: Vec<f64> = (0..=n).map(|i| s0 + (s1 - s0) * i as f64 / n as f64).collect();
                    adaptive(&g, &edges, &part_cfg, OP)?
                }
                _ => {
                    let (a, b) = if side > 0.0 { (start, cut) } else { (cut, start) };
                    let n = ((b - a) / env.core_radius().max(1e-300)).ceil().clamp(1.0, 64.0) as usize;
                    let edges: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
                    adaptive(&f, &edges, &part_cfg, OP)?
                }
            };
            total = total.add(part);
        }
        total.error += tail_bound;
    }
    Ok(total)
}

/// Principal value `lim_{ε→0} ∫_{|y-x|>ε} k(y) f(y) dy`.
///
/// Outside a window `|y - x| < ε₀` the integral is ordinary. Inside, the
/// folded integrand `g(u) = k(x+u)f(x+u) + k(x-u)f(x-u)` is integrated on
/// `[ε_m, ε₀]` with `ε_m = 2^{-m} ε₀`, and the sequence is extrapolated
/// to `ε = 0` by Richardson's scheme of depth 4 in powers of `ε`. `ε₀`
/// stays below half the distance to the nearest breakpoint of `f` and
/// to the segment boundary. A sequence whose increments stop shrinking
/// is reported as divergent. Tolerances are relative to the integral of
/// `|k f|` over the window as well, since that is what cancels.
pub fn principal_value<K, F>(
    k: K,
    f: F,
    x: f64,
    segment: Segment,
    breaks: &[f64],
    envelope: Option<&TailEnvelope>,
    cfg: &QuadratureConfig,
) -> Result<QuadResult>
where
    K: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
{
    const OP: &str = "quadrature::principal_value";
    const DEPTH: usize = 4;
    if !(x > segment.lo && x < segment.hi) {
        return Err(Error::usage(OP, format!("x = {x} must be interior to the segment")));
    }
    let mut eps0: f64 = 1.0;
    for &b in breaks {
        let d = (b - x).abs();
        if d > 1e-14 * (1.0 + x.abs()) {
            eps0 = eps0.min(0.5 * d);
        }
    }
    eps0 = eps0.min(0.5 * (x - segment.lo)).min(0.5 * (segment.hi - x));
    let kf = |y: f64| k(y) * f(y);
    let g = |u: f64| kf(x + u) + kf(x - u);

    let mut outer = QuadResult::ZERO;
    let left = Segment::new(segment.lo, x - eps0);
    let right = Segment::new(x + eps0, segment.hi);
    let mut outer_breaks: Vec<f64> = breaks.to_vec();
    outer_breaks.push(x);
    for part in [left, right] {
        if part.hi > part.lo {
            let r = integrate_space(kf, part, &[], &outer_breaks, envelope, cfg)?;
            outer = outer.add(r);
        }
    }

    let mut partial = vec![0.0_f64];
    let mut increments: Vec<f64> = vec![];
    let mut fold_err = 0.0;
    // Midpoint estimate of ∫|k f| over the window: the size of what cancels.
    let mut folded_abs = 0.0;
    let mut evaluations = outer.evaluations;
    let mut table: Vec<Vec<f64>> = vec![];
    let mut last_extrap: Option<f64> = None;
    let mut eps = eps0;
    for m in 1..=40 {
        let next = 0.5 * eps;
        let mid = 0.75 * eps;
        let window_abs = 0.5 * eps * (kf(x + mid).abs() + kf(x - mid).abs());
        folded_abs += window_abs;
        evaluations += 2;
        let mut piece_cfg = *cfg;
        piece_cfg.abs_tol = cfg
            .abs_tol
            .max(cfg.rel_tol * 0.01 * (outer.value.abs() + partial.last().unwrap().abs()))
            .max(cfg.rel_tol * window_abs);
        let piece = adaptive(&g, &[next, eps], &piece_cfg, OP)?;
        evaluations += piece.evaluations;
        fold_err += piece.error;
        increments.push(piece.value);
        partial.push(partial.last().unwrap() + piece.value);
        eps = next;

        // Richardson table on S_1, S_2, ...: row m holds extrapolants.
        let mut row = vec![partial[m]];
        if let Some(prev) = table.last() {
            for j in 1..=DEPTH.min(m - 1) {
                let factor = 2f64.powi(j as i32);
                row.push((factor * row[j - 1] - prev[j - 1]) / (factor - 1.0));
            }
        }
        table.push(row);
        let row = table.last().unwrap();
        if row.len() == DEPTH + 1 {
            let extrap = row[DEPTH];
            let scale = outer.value.abs() + increments.iter().map(|v| v.abs()).sum::<f64>() + folded_abs;
            let tol = cfg.abs_tol.max(cfg.rel_tol * scale);
            if let Some(prev) = last_extrap {
                let diff = (extrap - prev).abs();
                if diff < tol {
                    return Ok(QuadResult {
                        value: outer.value + extrap,
                        error: outer.error + fold_err + diff,
                        evaluations,
                    });
                }
            }
            last_extrap = Some(extrap);
            let n = increments.len();
            if n >= 8 {
                // Integrable log terms make increments ~ ε ln ε cross zero,
                // so a stall needs a run of same-sign, non-shrinking steps.
                let stalled = (n - 4..n).all(|i| {
                    increments[i] * increments[i - 1] > 0.0 && increments[i].abs() > 0.8 * increments[i - 1].abs()
                });
                if stalled && increments[n - 1].abs() > tol {
                    return Err(Error::Divergence {
                        op: OP,
                        msg: format!("window increments stay near {:e} as ε → 0", increments[n - 1]),
                        estimate: outer.value + partial[m],
                    });
                }
            }
        }
    }
    Err(Error::Accuracy {
        op: OP,
        estimate: outer.value + last_extrap.unwrap_or(*partial.last().unwrap()),
        error: outer.error + fold_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn time_integral_examples() {
        let r = integrate_time(|t| t.powf(-1.5) * (-2.0 / t).exp(), 0.0, f64::INFINITY, &[2.0], &cfg()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-9, "{r:?}");
        assert!(r.error >= (r.value - 0.5).abs());
        let r = integrate_time(|_| 1.0, 0.0, 1.0, &[], &cfg()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        // Time derivative of the heat kernel at y - x = 1 up to τ² = 1.
        let dh = |t: f64| (1.0 / (2.0 * t)) * (4.0 * PI * t).powf(-0.5) * (-1.0 / (4.0 * t)).exp();
        let r = integrate_time(dh, 0.0, 1.0, &[0.25], &cfg()).unwrap();
        let v = r.value / PI.sqrt();
        assert!((v - (-0.25f64).exp() / PI).abs() < 1e-9);
    }

    #[test]
    fn time_integral_no_split_default() {
        // ∫_0^∞ e^{-t} dt/√t = √π
        let r = integrate_time(|t| (-t).exp(), 0.0, f64::INFINITY, &[], &cfg()).unwrap();
        assert!((r.value - PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn space_integral_examples() {
        let h1 = |x: f64| (4.0 * PI).powf(-0.5) * (-x * x / 4.0).exp();
        let env = TailEnvelope::Gaussian { amp: (4.0 * PI).powf(-0.5), center: 0.0, width: 4.0 };
        let r = integrate_space(h1, Segment::real_line(), &[], &[], Some(&env), &cfg()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
        assert!(r.error >= (r.value - 1.0).abs());

        // Dirichlet heat kernel mass at t = 0.25 from x = 1 equals erf(1).
        let t = 0.25;
        let x = 1.0;
        let kd = |y: f64| {
            let h = |r: f64| (4.0 * PI * t).powf(-0.5) * (-r * r / (4.0 * t)).exp();
            h(x - y) - h(x + y)
        };
        let env = TailEnvelope::Gaussian { amp: (4.0 * PI * t).powf(-0.5), center: x, width: 4.0 * t };
        let r = integrate_space(kd, Segment::half_line(), &[], &[], Some(&env), &cfg()).unwrap();
        assert!((r.value - 0.8427008).abs() < 1e-7);
        assert!((r.value - statrs::function::erf::erf(1.0)).abs() < 1e-9);
    }

    #[test]
    fn missing_envelope_is_usage_error() {
        let e = integrate_space(|x: f64| (-x * x).exp(), Segment::real_line(), &[], &[], None, &cfg()).unwrap_err();
        assert!(matches!(e, Error::Usage { .. }));
    }

    #[test]
    fn singular_endpoints() {
        // ∫_0^1 x^{-1/2} = 2, ∫_0^1 ln x = -1, ∫_{-1}^{1} ln|x| = -2
        let r = integrate_space(|x: f64| x.powf(-0.5), Segment::new(0.0, 1.0), &[0.0], &[], None, &cfg()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
        let r = integrate_space(|x: f64| x.ln(), Segment::new(0.0, 1.0), &[0.0], &[], None, &cfg()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-9);
        let r = integrate_space(|x: f64| x.abs().ln(), Segment::new(-1.0, 1.0), &[0.0], &[], None, &cfg()).unwrap();
        assert!((r.value + 2.0).abs() < 1e-9);
    }

    #[test]
    fn power_tail() {
        // ∫_{-∞}^{∞} 1/(1+x²) = π
        let env = TailEnvelope::Power { amp: 1.0, center: 0.0, p: 2.0, r0: 1.0 };
        let r = integrate_space(|x: f64| 1.0 / (1.0 + x * x), Segment::real_line(), &[], &[], Some(&env), &cfg()).unwrap();
        assert!((r.value - PI).abs() < 1e-7, "{r:?}");
        assert!(r.error >= (r.value - PI).abs());
    }

    #[test]
    fn accuracy_error_carries_estimate() {
        let tight = QuadratureConfig { max_subdivisions: 8, rel_tol: 1e-14, ..cfg() };
        let e = integrate(|x: f64| (1.0 / x).sin() / x.sqrt(), 1e-6, 1.0, &[], &tight).unwrap_err();
        match e {
            Error::Accuracy { estimate, error, .. } => assert!(estimate.is_finite() && error > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn principal_value_examples() {
        let k = |x: f64| move |y: f64| 1.0 / (PI * (y - x));
        let env = TailEnvelope::Power { amp: 2.0 / PI, center: 0.0, p: 2.0, r0: 3.0 };
        let ind = |y: f64| if y.abs() <= 1.0 { 1.0 } else { 0.0 };
        let r = principal_value(k(0.0), ind, 0.0, Segment::new(-2.0, 2.0), &[-1.0, 1.0], None, &cfg()).unwrap();
        assert!(r.value.abs() < 1e-10);
        let genv = TailEnvelope::Gaussian { amp: 1.0, center: 0.0, width: 1.0 };
        let r = principal_value(k(0.0), |y: f64| (-y * y).exp(), 0.0, Segment::real_line(), &[], Some(&genv), &cfg()).unwrap();
        assert!(r.value.abs() < 1e-10);
        // With R(x,y) = 1/(π(y-x)), R[1/(1+y²)](x) = -x/(1+x²).
        let r = principal_value(k(1.0), |y: f64| 1.0 / (1.0 + y * y), 1.0, Segment::real_line(), &[], Some(&env), &cfg()).unwrap();
        assert!((r.value + 0.5).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn principal_value_handles_log_terms() {
        // A potential adds an integrable ln|y-x| to the Riesz kernel.
        let x = 0.895;
        let f = |y: f64| (-(y - 1.0) * (y - 1.0) / 0.02).exp();
        let seg = Segment::new(-4.0, 4.0);
        let breaks = [0.9];
        let k = |y: f64| 1.0 / (PI * (y - x)) + (y - x).abs().ln() / (PI * x);
        let r = principal_value(k, f, x, seg, &breaks, None, &cfg()).unwrap();
        let odd = principal_value(|y: f64| 1.0 / (PI * (y - x)), f, x, seg, &breaks, None, &cfg()).unwrap();
        let log = integrate_space(|y| (y - x).abs().ln() / (PI * x) * f(y), seg, &[x], &breaks, None, &cfg()).unwrap();
        assert!((r.value - odd.value - log.value).abs() < 1e-7, "{r:?} vs {odd:?} + {log:?}");
    }

    #[test]
    fn principal_value_detects_jump() {
        let k = |y: f64| 1.0 / (PI * y);
        let step = |y: f64| if y >= 0.0 { 1.0 } else { 0.0 };
        let e = principal_value(k, step, 0.0, Segment::new(-1.0, 1.0), &[], None, &cfg()).unwrap_err();
        assert!(matches!(e, Error::Divergence { .. }), "{e:?}");
    }

    #[test]
    fn halving_tolerance_does_not_hurt() {
        let exact = 0.5;
        let f = |t: f64| t.powf(-1.5) * (-2.0 / t).exp();
        let mut last = f64::INFINITY;
        for tol in [1e-6, 5e-7, 2.5e-7, 1.25e-7] {
            let r = integrate_time(f, 0.0, f64::INFINITY, &[2.0], &cfg().with_rel_tol(tol)).unwrap();
            let err = (r.value - exact).abs();
            assert!(err <= last.max(1e-15));
            last = err;
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn principal_value_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, x in -1.5f64..1.5, s in 0.5f64..2.0) {
            let k = |y: f64| 1.0 / (std::f64::consts::PI * (y - x));
            let f = |y: f64| (-y * y).exp();
            let g = |y: f64| (-(y - 0.3).powi(2) / s).exp();
            let env = TailEnvelope::Gaussian { amp: 50.0, center: 0.0, width: 2.0 * s.max(1.0) + 2.0 };
            let cfg = QuadratureConfig::default().with_rel_tol(1e-12);
            let seg = Segment::real_line();
            let pf = principal_value(k, f, x, seg, &[], Some(&env), &cfg).unwrap().value;
            let pg = principal_value(k, g, x, seg, &[], Some(&env), &cfg).unwrap().value;
            let pc = principal_value(k, |y| a * f(y) + b * g(y), x, seg, &[], Some(&env), &cfg).unwrap().value;
            prop_assert!((pc - (a * pf + b * pg)).abs() < 1e-10 * (1.0 + pc.abs()));
        }

        #[test]
        fn reported_error_bounds_true_error(a in 0.5f64..4.0) {
            // ∫_0^∞ t^{-3/2} e^{-a/t} dt/√t = 1/a
            let r = integrate_time(|t: f64| t.powf(-1.5) * (-a / t).exp(), 0.0, f64::INFINITY, &[a], &QuadratureConfig::default()).unwrap();
            prop_assert!((r.value - 1.0 / a).abs() <= r.error.max(1e-15));
        }
    }
}
