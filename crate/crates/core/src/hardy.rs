//! Q-atoms, a constructive atomic decomposition, and the three Hardy
//! norms (maximal, Riesz, atomic) on one-dimensional domains.
//!
//! The decomposition splits `f = Σ_Q ψ_Q f`, removes `λ₀ = ∫ψ_Q f` with
//! the local atom `|Q|^{-1} 1_Q`, and expands the mean-zero remainder
//! over the dyadic intervals of `Q**` by Haar martingale differences.
//! Refinement stops on an interval once the remainder's oscillation mass
//! is below tolerance; what is left there is itself a multiple of a
//! cancellative atom, so the reconstruction is exact up to quadrature.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AdmissibleCovering, PartitionOfUnity};
use crate::kernels::KernelFamily;
use crate::quadrature::{integrate, QuadratureConfig};
use crate::transforms::{
    l1_of_samples, maximal_on, riesz_apply_on, transform_grid, Profile, SampledFunction, TransformConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomKind {
    Cancellative,
    Local,
}

/// Shape of an atom on its interval `[lo, hi)`.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum Shape {
    /// `1/(hi - lo)`.
    Constant,
    /// Piecewise constant on equal pieces.
    Steps { values: Vec<f64> },
    /// `(ψ_Q f - c) / scale` with `c = inside` on `Q` and `outside`
    /// elsewhere: the mean-zero remainder of a decomposition on a leaf.
    Remainder {
        inside: f64,
        outside: f64,
        scale: f64,
        #[serde(skip)]
        source: Option<Arc<SampledFunction>>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct QAtom {
    pub kind: AtomKind,
    /// Index of the host cell `Q` in the covering.
    pub host: usize,
    /// Support interval: `K` for cancellative atoms, `Q` for local ones.
    pub lo: f64,
    pub hi: f64,
    pub shape: Shape,
    /// Dyadic level below `Q**` (0 for local atoms).
    pub level: u32,
}

impl QAtom {
    pub fn local(covering: &AdmissibleCovering, host: usize) -> Self {
        let q = &covering.cells()[host];
        QAtom {
            kind: AtomKind::Local,
            host,
            lo: q.lo(0),
            hi: q.hi(0),
            shape: Shape::Constant,
            level: 0,
        }
    }

    /// `|K|^{-1}(1_{left half} - 1_{right half})`.
    pub fn haar(host: usize, lo: f64, hi: f64, level: u32) -> Self {
        let h = 1.0 / (hi - lo);
        QAtom {
            kind: AtomKind::Cancellative,
            host,
            lo,
            hi,
            shape: Shape::Steps { values: vec![h, -h] },
            level,
        }
    }

    pub fn eval(&self, x: f64, pou: &PartitionOfUnity) -> f64 {
        if !(x >= self.lo && x < self.hi) {
            return 0.0;
        }
        match &self.shape {
            Shape::Constant => 1.0 / (self.hi - self.lo),
            Shape::Steps { values } => {
                let n = values.len();
                let k = (((x - self.lo) / (self.hi - self.lo)) * n as f64).floor() as usize;
                values[k.min(n - 1)]
            }
            Shape::Remainder {
                inside,
                outside,
                scale,
                source,
            } => {
                let f = source.as_ref().expect("remainder atoms carry their source");
                let q = &pou.covering().cells()[self.host];
                let c = if x >= q.lo(0) && x < q.hi(0) { inside } else { outside };
                (pou.psi(self.host, &[x]) * f.eval(x) - c) / scale
            }
        }
    }

    /// Points where the atom may jump.
    fn breaks(&self, pou: &PartitionOfUnity) -> Vec<f64> {
        let mut out = vec![self.lo, self.hi];
        match &self.shape {
            Shape::Steps { values } => {
                let n = values.len();
                out.extend((1..n).map(|k| self.lo + (self.hi - self.lo) * k as f64 / n as f64));
            }
            Shape::Remainder { source, .. } => {
                if let Some(f) = source {
                    out.extend(f.breakpoints());
                }
                out.extend(pou.kinks(self.host));
                let q = &pou.covering().cells()[self.host];
                out.extend([q.lo(0), q.hi(0)]);
            }
            Shape::Constant => {}
        }
        out.retain(|b| *b >= self.lo && *b <= self.hi);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub clause: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomValidation {
    pub passed: bool,
    pub clauses: Vec<Clause>,
    /// First violated clause.
    pub violated: Option<String>,
}

/// Checks the Q-atom conditions. Cancellative: `K ⊂ Q**`, support in `K`,
/// `‖a‖_∞ ≤ |K|^{-1}`, `|∫a| ≤ 1e-10`. Local: `a = |Q|^{-1} 1_Q` exactly.
pub fn validate_atom(atom: &QAtom, covering: &AdmissibleCovering) -> AtomValidation {
    let mut clauses = vec![];
    let mut push = |clause: &str, passed: bool, detail: String| {
        clauses.push(Clause {
            clause: clause.into(),
            passed,
            detail,
        })
    };
    if covering.dim() != 1 || atom.host >= covering.len() || !(atom.hi > atom.lo) {
        push("host", false, format!("host {} is not a cell of a 1-d covering or the interval is empty", atom.host));
        return finish(clauses);
    }
    let pou = covering.partition_of_unity();
    let q = &covering.cells()[atom.host];
    let len = atom.hi - atom.lo;
    let tol = 1e-12 * q.diameter();
    match atom.kind {
        AtomKind::Local => {
            let same = (atom.lo - q.lo(0)).abs() <= tol && (atom.hi - q.hi(0)).abs() <= tol;
            push("support is Q", same, format!("[{}, {}] vs Q = [{}, {}]", atom.lo, atom.hi, q.lo(0), q.hi(0)));
            let constant = match &atom.shape {
                Shape::Constant => true,
                Shape::Steps { values } => values.iter().all(|v| (v * len - 1.0).abs() <= 1e-12),
                Shape::Remainder { .. } => false,
            };
            push("a = |Q|^-1 1_Q", constant, "local atoms are the normalized indicator".into());
        }
        AtomKind::Cancellative => {
            let qq = covering.enlarge(atom.host, 2);
            let inside = atom.lo >= qq.lo(0) - tol && atom.hi <= qq.hi(0) + tol;
            push(
                "K in Q**",
                inside,
                format!("K = [{}, {}], Q** = [{}, {}]", atom.lo, atom.hi, qq.lo(0), qq.hi(0)),
            );
            let breaks = atom.breaks(&pou);
            let (sup, integral) = match &atom.shape {
                Shape::Constant => (1.0 / len, 1.0),
                Shape::Steps { values } => (
                    values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                    values.iter().sum::<f64>() * len / values.len() as f64,
                ),
                Shape::Remainder { .. } => {
                    let mut sup: f64 = 0.0;
                    let n = 513;
                    for k in 0..n {
                        let x = atom.lo + len * (k as f64 + 0.5) / n as f64;
                        sup = sup.max(atom.eval(x, &pou).abs());
                    }
                    for &b in &breaks {
                        for x in [b - 1e-12 * len, b + 1e-12 * len] {
                            sup = sup.max(atom.eval(x, &pou).abs());
                        }
                    }
                    let cfg = QuadratureConfig {
                        rel_tol: 1e-12,
                        abs_tol: 1e-13,
                        ..QuadratureConfig::default()
                    };
                    let integral = integrate(|x| atom.eval(x, &pou), atom.lo, atom.hi, &breaks, &cfg)
                        .map(|r| r.value)
                        .unwrap_or(f64::NAN);
                    (sup, integral)
                }
            };
            push(
                "sup |a| <= |K|^-1",
                sup <= (1.0 + 1e-12) / len,
                format!("sup |a| = {sup:e}, |K|^-1 = {:e}", 1.0 / len),
            );
            push("integral a = 0", integral.abs() <= 1e-10, format!("integral = {integral:e}"));
        }
    }
    finish(clauses)
}

fn finish(clauses: Vec<Clause>) -> AtomValidation {
    let violated = clauses.iter().find(|c| !c.passed).map(|c| c.clause.clone());
    AtomValidation {
        passed: violated.is_none(),
        clauses,
        violated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecomposeConfig {
    /// Remainder oscillation mass, relative to `‖f‖₁`, below which an
    /// interval is not refined.
    pub tolerance: f64,
    /// Deepest dyadic level below `Q**`.
    pub max_level: u32,
    /// Samples per interval for the oscillation estimate.
    pub sup_samples: usize,
    /// Safety factor on sampled sups of remainder atoms.
    pub sup_margin: f64,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            tolerance: 1e-6,
            max_level: 12,
            sup_samples: 65,
            sup_margin: 1.01,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    /// `(λ_k, a_k)` ordered by (host index, level, position).
    pub atoms: Vec<(f64, QAtom)>,
    pub coefficient_sum: f64,
    /// `‖f - Σ λ_k a_k‖_{L¹}`.
    pub reconstruction_error: f64,
    pub f_l1: f64,
}

impl Decomposition {
    pub fn reconstruct(&self, x: f64, pou: &PartitionOfUnity) -> f64 {
        self.atoms.iter().map(|(l, a)| l * a.eval(x, pou)).sum()
    }
}

/// Numerical support of `f`: compact supports as given, Gaussians cut
/// where the tail mass is below `1e-17` of the total.
fn numerical_support(f: &SampledFunction, op: &'static str) -> Result<(f64, f64)> {
    match f.profile() {
        Some(Profile::Gaussian { center, sigma, .. }) => Ok((center - 9.0 * sigma, center + 9.0 * sigma)),
        Some(Profile::Lorentzian { .. }) => Err(Error::usage(op, "decomposition needs compact numerical support")),
        _ => Ok(f.support()),
    }
}

/// `f` itself as a multiple of a single Q-atom, when its profile is one.
fn as_single_atom(f: &SampledFunction, covering: &AdmissibleCovering) -> Option<(f64, QAtom)> {
    let tol = |q: f64| 1e-12 * q;
    match *f.profile()? {
        Profile::Indicator { lo, hi, height } => {
            let i = covering.locate(&[0.5 * (lo + hi)])?;
            let q = &covering.cells()[i];
            let d = q.diameter();
            if (q.lo(0) - lo).abs() <= tol(d) && (q.hi(0) - hi).abs() <= tol(d) {
                Some((height * (hi - lo), QAtom::local(covering, i)))
            } else {
                None
            }
        }
        Profile::Haar { lo, hi, height } => {
            let i = covering.locate(&[0.5 * (lo + hi)])?;
            let qq = covering.enlarge(i, 2);
            if lo >= qq.lo(0) && hi <= qq.hi(0) {
                Some((height * (hi - lo), QAtom::haar(i, lo, hi, 0)))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// `f = Σ_k λ_k a_k` with Q-atoms (d = 1).
pub fn atomic_decompose(f: &SampledFunction, covering: &AdmissibleCovering, cfg: &DecomposeConfig) -> Result<Decomposition> {
    const OP: &str = "hardy::atomic_decompose";
    if covering.dim() != 1 {
        return Err(Error::capability(OP, "atomic decomposition is implemented in dimension 1 only"));
    }
    let quad = QuadratureConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-300,
        ..QuadratureConfig::default()
    };
    let f_l1 = f.l1_norm(&quad)?;
    if !f_l1.is_finite() {
        return Err(Error::usage(OP, "f is not integrable"));
    }
    let pou = covering.partition_of_unity();
    if f_l1 == 0.0 {
        return Ok(Decomposition {
            atoms: vec![],
            coefficient_sum: 0.0,
            reconstruction_error: 0.0,
            f_l1,
        });
    }
    if let Some((lambda, atom)) = as_single_atom(f, covering) {
        let mut d = Decomposition {
            atoms: vec![(lambda, atom)],
            coefficient_sum: lambda.abs(),
            reconstruction_error: 0.0,
            f_l1,
        };
        d.reconstruction_error = reconstruction_error(f, &d, &pou, covering)?;
        return Ok(d);
    }
    let (a, b) = numerical_support(f, OP)?;
    let a = a.max(covering.domain().axes[0].lower());
    let (wlo, whi) = covering.window();
    if a < wlo[0] || b > whi[0] {
        return Err(Error::usage(
            OP,
            format!("support [{a}, {b}] of f is not inside the covering window [{}, {}]", wlo[0], whi[0]),
        ));
    }
    let hosts: Vec<usize> = (0..covering.len())
        .filter(|&i| {
            let s = covering.enlarge(i, 1);
            s.hi(0) > a && s.lo(0) < b
        })
        .collect();
    let source = Arc::new(f.clone());
    let per_host: Vec<Vec<(f64, QAtom)>> = hosts
        .par_iter()
        .map(|&q| decompose_host(&source, covering, &pou, q, f_l1, cfg, &quad))
        .collect::<Result<_>>()?;
    let atoms: Vec<(f64, QAtom)> = per_host.into_iter().flatten().collect();
    let coefficient_sum = atoms.iter().map(|(l, _)| l.abs()).sum();
    let mut d = Decomposition {
        atoms,
        coefficient_sum,
        reconstruction_error: 0.0,
        f_l1,
    };
    d.reconstruction_error = reconstruction_error(f, &d, &pou, covering)?;
    Ok(d)
}

fn decompose_host(
    f: &Arc<SampledFunction>,
    covering: &AdmissibleCovering,
    pou: &PartitionOfUnity,
    q: usize,
    f_l1: f64,
    cfg: &DecomposeConfig,
    quad: &QuadratureConfig,
) -> Result<Vec<(f64, QAtom)>> {
    let cell = &covering.cells()[q];
    let star = covering.enlarge(q, 1);
    let mut breaks = f.breakpoints();
    breaks.extend(pou.kinks(q));
    breaks.extend([cell.lo(0), cell.hi(0)]);
    let fq = |x: f64| pou.psi(q, &[x]) * f.eval(x);
    let inner = |lo: f64, hi: f64| -> Vec<f64> { breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect() };
    let mut local_quad = *quad;
    local_quad.abs_tol = 1e-13 * f_l1;
    let lambda0 = integrate(fq, star.lo(0), star.hi(0), &inner(star.lo(0), star.hi(0)), &local_quad)?.value;
    let vol = cell.volume();
    let mut out = vec![];
    if lambda0 != 0.0 {
        out.push((lambda0, QAtom::local(covering, q)));
    }
    let root = covering.enlarge(q, 2);
    let (r_lo, r_hi) = (root.lo(0), root.hi(0));
    let root_len = r_hi - r_lo;
    // The remainder is g = ψ_Q f - λ₀|Q|^{-1}1_Q. Its constant part is
    // handled analytically so that small oscillations of ψ_Q f on top of
    // a large local coefficient keep their relative accuracy.
    let overlap = |lo: f64, hi: f64| (hi.min(cell.hi(0)) - lo.max(cell.lo(0))).max(0.0) / (hi - lo);
    let mean_fq = |lo: f64, hi: f64| -> Result<f64> { Ok(integrate(fq, lo, hi, &inner(lo, hi), &local_quad)?.value / (hi - lo)) };
    let mean_g = |lo: f64, hi: f64, mf: f64| mf - lambda0 / vol * overlap(lo, hi);
    // Constants (inside Q, outside Q) that make ψ_Q f - c mean-zero on I.
    let leaf_constants = |lo: f64, hi: f64, mf: f64| {
        let frac = overlap(lo, hi);
        (mf + lambda0 / vol * (1.0 - frac), mf - lambda0 / vol * frac)
    };
    let oscillation = |lo: f64, hi: f64, (inside, outside): (f64, f64)| -> f64 {
        let n = cfg.sup_samples.max(3);
        let dev = |x: f64| {
            let c = if x >= cell.lo(0) && x < cell.hi(0) { inside } else { outside };
            (fq(x) - c).abs()
        };
        let h = (hi - lo) / (n - 1) as f64;
        let (mut sup, mut arg) = (0.0f64, lo);
        for k in 0..n {
            let x = (lo + h * k as f64).min(hi - 1e-13 * (hi - lo));
            let v = dev(x);
            if v > sup {
                (sup, arg) = (v, x);
            }
        }
        for b in inner(lo, hi) {
            for x in [b - 1e-12 * (hi - lo), b + 1e-12 * (hi - lo)] {
                sup = sup.max(dev(x));
            }
        }
        // Golden-section polish of the sampled maximum.
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = ((arg - h).max(lo), (arg + h).min(hi - 1e-13 * (hi - lo)));
        for _ in 0..40 {
            let (c1, c2) = (b - g * (b - a), a + g * (b - a));
            let (v1, v2) = (dev(c1), dev(c2));
            sup = sup.max(v1).max(v2);
            if v1 > v2 {
                b = c2;
            } else {
                a = c1;
            }
        }
        sup
    };
    let negligible = |lo: f64, hi: f64, osc: f64| osc <= 1e-14 * f_l1 / root_len || hi <= lo;
    // Below ~1e-5 of the subtracted constant, rounding of that constant
    // would spoil the mean-zero condition of the remainder atom.
    let too_flat = |(inside, outside): (f64, f64), osc: f64| osc <= 1e-5 * inside.abs().max(outside.abs());
    let node = |lo: f64, hi: f64, mf: f64| {
        let consts = leaf_constants(lo, hi, mf);
        (lo, hi, mf, consts, oscillation(lo, hi, consts))
    };
    // Breadth-first over dyadic intervals so atoms come out by level.
    let mut frontier = vec![node(r_lo, r_hi, mean_fq(r_lo, r_hi)?)];
    let mut level = 0u32;
    let mut haar = vec![];
    let mut leaves = vec![];
    while !frontier.is_empty() {
        let mut next = vec![];
        for (lo, hi, _, consts, osc) in frontier {
            // Remainders at rounding level are dropped; their mass is part
            // of the reported reconstruction error.
            if negligible(lo, hi, osc) {
                continue;
            }
            let len = hi - lo;
            if len * osc <= cfg.tolerance * f_l1 * len / root_len || level == cfg.max_level {
                leaves.push((lo, hi, consts, osc));
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let left = node(lo, mid, mean_fq(lo, mid)?);
            let right = node(mid, hi, mean_fq(mid, hi)?);
            if [&left, &right].iter().any(|c| !negligible(c.0, c.1, c.4) && too_flat(c.3, c.4)) {
                leaves.push((lo, hi, consts, osc));
                continue;
            }
            let c = 0.5 * (mean_g(lo, mid, left.2) - mean_g(mid, hi, right.2));
            if c != 0.0 {
                haar.push((c * len, QAtom::haar(q, lo, hi, level)));
            }
            next.push(left);
            next.push(right);
        }
        frontier = next;
        level += 1;
    }
    out.extend(haar);
    for (lo, hi, (inside, outside), osc) in leaves {
        let scale = cfg.sup_margin * osc * (hi - lo);
        let level = (root_len / (hi - lo)).log2().round() as u32;
        out.push((
            scale,
            QAtom {
                kind: AtomKind::Cancellative,
                host: q,
                lo,
                hi,
                shape: Shape::Remainder {
                    inside,
                    outside,
                    scale,
                    source: Some(f.clone()),
                },
                level,
            },
        ));
    }
    Ok(out)
}

fn reconstruction_error(
    f: &SampledFunction,
    d: &Decomposition,
    pou: &PartitionOfUnity,
    covering: &AdmissibleCovering,
) -> Result<f64> {
    let (a, b) = match f.profile() {
        Some(Profile::Gaussian { center, sigma, .. }) => (center - 12.0 * sigma, center + 12.0 * sigma),
        _ => f.support(),
    };
    let mut lo = a;
    let mut hi = b;
    for (_, atom) in &d.atoms {
        lo = lo.min(atom.lo);
        hi = hi.max(atom.hi);
    }
    let mut breaks = f.breakpoints();
    let hosts: std::collections::BTreeSet<usize> = d.atoms.iter().map(|(_, a)| a.host).collect();
    for q in hosts {
        breaks.extend(pou.kinks(q));
        let c = &covering.cells()[q];
        breaks.extend([c.lo(0), c.hi(0)]);
    }
    // Leaf boundaries of the coarsest levels keep panels aligned with the
    // atoms' jumps.
    for (_, atom) in &d.atoms {
        if atom.level <= 6 {
            breaks.extend([atom.lo, atom.hi]);
        }
    }
    breaks.retain(|x| *x > lo && *x < hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    // Atoms by support for fast evaluation.
    let mut index: Vec<(f64, f64, usize)> = d.atoms.iter().enumerate().map(|(k, (_, a))| (a.lo, a.hi, k)).collect();
    index.sort_by(|x, y| x.0.total_cmp(&y.0));
    let max_len = index.iter().map(|(l, h, _)| h - l).fold(0.0, f64::max);
    let eval = |x: f64| -> f64 {
        let start = index.partition_point(|e| e.0 < x - max_len);
        let end = index.partition_point(|e| e.0 <= x);
        let mut s = 0.0;
        for &(l, h, k) in &index[start..end] {
            if x >= l && x < h {
                let (lambda, atom) = &d.atoms[k];
                s += lambda * atom.eval(x, pou);
            }
        }
        (f.eval(x) - s).abs()
    };
    let cfg = QuadratureConfig {
        rel_tol: 1e-6,
        abs_tol: 1e-12 * d.f_l1.max(1e-300),
        max_subdivisions: 30,
        ..QuadratureConfig::default()
    };
    Ok(integrate(eval, lo, hi, &breaks, &cfg)?.value)
}

/// `‖sup_t |T_t f|‖_{L¹}` from the maximal function on a transform grid.
pub fn norm_maximal(family: &KernelFamily, f: &SampledFunction, cfg: &TransformConfig) -> Result<f64> {
    const OP: &str = "hardy::norm_maximal";
    let axis = family
        .as_single()
        .ok_or_else(|| Error::capability(OP, "norms are implemented in dimension 1 only"))?
        .axis();
    if f.is_zero() {
        return Ok(0.0);
    }
    let m = maximal_on(family, f, transform_grid(f, axis), cfg)?;
    Ok(l1_of_samples(&m, axis, &cfg.outer)?.value)
}

/// `‖f‖₁ + Σ_j ‖R_j f‖₁`.
pub fn norm_riesz(family: &KernelFamily, f: &SampledFunction, cfg: &TransformConfig) -> Result<f64> {
    const OP: &str = "hardy::norm_riesz";
    let axis = family
        .as_single()
        .ok_or_else(|| Error::capability(OP, "norms are implemented in dimension 1 only"))?
        .axis();
    if f.is_zero() {
        return Ok(0.0);
    }
    let r = riesz_apply_on(family, 0, f, transform_grid(f, axis), cfg)?;
    Ok(f.l1_norm(&cfg.outer)? + l1_of_samples(&r, axis, &cfg.outer)?.value)
}

/// `Σ|λ_k|` of [`atomic_decompose`]: an upper bound for the atomic norm.
pub fn norm_atomic(f: &SampledFunction, covering: &AdmissibleCovering, cfg: &DecomposeConfig) -> Result<f64> {
    Ok(atomic_decompose(f, covering, cfg)?.coefficient_sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub maximal: f64,
    pub riesz: f64,
    pub atomic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub riesz_over_maximal: f64,
    pub atomic_over_maximal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub function_id: String,
    pub norms: Norms,
    pub ratios: Ratios,
    pub atom_count: usize,
    pub coeff_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub family: String,
    pub reports: Vec<NormReport>,
    pub riesz_ratio_min: f64,
    pub riesz_ratio_max: f64,
    pub atomic_ratio_min: f64,
    pub atomic_ratio_max: f64,
    /// `max(max ratio, 1/min ratio)` of riesz/maximal.
    pub c_star: f64,
}

pub fn norm_report(
    family: &KernelFamily,
    covering: &AdmissibleCovering,
    id: &str,
    f: &SampledFunction,
    cfg: &TransformConfig,
    dcfg: &DecomposeConfig,
) -> Result<NormReport> {
    let maximal = norm_maximal(family, f, cfg)?;
    let riesz = norm_riesz(family, f, cfg)?;
    let d = atomic_decompose(f, covering, dcfg)?;
    let ratio = |v: f64| if maximal > 0.0 { v / maximal } else { 0.0 };
    Ok(NormReport {
        function_id: id.to_string(),
        norms: Norms {
            maximal,
            riesz,
            atomic: d.coefficient_sum,
        },
        ratios: Ratios {
            riesz_over_maximal: ratio(riesz),
            atomic_over_maximal: ratio(d.coefficient_sum),
        },
        atom_count: d.atoms.len(),
        coeff_sum: d.coefficient_sum,
    })
}

/// Norms of every suite function and the spread of their ratios.
pub fn equivalence_report(
    family: &KernelFamily,
    covering: &AdmissibleCovering,
    suite: &[(String, SampledFunction)],
    cfg: &TransformConfig,
    dcfg: &DecomposeConfig,
) -> Result<EquivalenceReport> {
    const OP: &str = "hardy::equivalence_report";
    if suite.is_empty() {
        return Err(Error::usage(OP, "function suite is empty"));
    }
    let reports: Vec<NormReport> = suite
        .iter()
        .map(|(id, f)| norm_report(family, covering, id, f, cfg, dcfg))
        .collect::<Result<_>>()?;
    Ok(summarize(family.name(), reports))
}

pub fn summarize(family: String, reports: Vec<NormReport>) -> EquivalenceReport {
    let fold = |sel: fn(&NormReport) -> f64| {
        reports
            .iter()
            .map(sel)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (rmin, rmax) = fold(|r| r.ratios.riesz_over_maximal);
    let (amin, amax) = fold(|r| r.ratios.atomic_over_maximal);
    EquivalenceReport {
        family,
        reports,
        riesz_ratio_min: rmin,
        riesz_ratio_max: rmax,
        atomic_ratio_min: amin,
        atomic_ratio_max: amax,
        c_star: rmax.max(1.0 / rmin),
    }
}
