//! Cuboids, admissible coverings with their enlargements, and the
//! partition of unity subordinate to a covering.
//!
//! Infinite coverings are materialized on a finite index window. Lookup
//! uses the index formula of the covering, so it costs O(log n) at most.
//! Cells are half-open for lookup: a point on a shared face belongs to
//! the cell whose lower face it lies on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default enlargement factor κ.
pub const DEFAULT_KAPPA: f64 = 9.0 / 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// The real line.
    Line,
    /// The open half-line (0, ∞).
    HalfLine,
}

impl Axis {
    pub fn contains(&self, x: f64) -> bool {
        match self {
            Axis::Line => x.is_finite(),
            Axis::HalfLine => x > 0.0 && x.is_finite(),
        }
    }

    /// Distance from `x` to the complement of the axis.
    pub fn boundary_distance(&self, x: f64) -> f64 {
        match self {
            Axis::Line => f64::INFINITY,
            Axis::HalfLine => x,
        }
    }

    pub fn lower(&self) -> f64 {
        match self {
            Axis::Line => f64::NEG_INFINITY,
            Axis::HalfLine => 0.0,
        }
    }
}

/// A product of intervals `X = X_1 × … × X_d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub axes: Vec<Axis>,
}

impl Domain {
    pub fn new(axes: Vec<Axis>) -> Self {
        Domain { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.axes.iter().zip(x).all(|(a, &v)| a.contains(v))
    }

    pub fn concat(&self, other: &Domain) -> Domain {
        let mut axes = self.axes.clone();
        axes.extend_from_slice(&other.axes);
        Domain { axes }
    }
}

/// Closed cuboid `{x : |x_i - z_i| ≤ r_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cuboid {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
}

impl Cuboid {
    pub fn new(center: Vec<f64>, radii: Vec<f64>) -> Self {
        debug_assert_eq!(center.len(), radii.len());
        Cuboid { center, radii }
    }

    /// The interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Self {
        Cuboid::new(vec![0.5 * (lo + hi)], vec![0.5 * (hi - lo)])
    }

    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Self {
        Cuboid::new(
            lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lo(&self, i: usize) -> f64 {
        self.center[i] - self.radii[i]
    }

    pub fn hi(&self, i: usize) -> f64 {
        self.center[i] + self.radii[i]
    }

    /// Euclidean diameter `d_Q`.
    pub fn diameter(&self) -> f64 {
        2.0 * self.radii.iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.radii.iter().map(|r| 2.0 * r).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.center.iter().zip(&self.radii))
            .all(|(&v, (&z, &r))| (v - z).abs() <= r)
    }

    pub fn scaled(&self, factor: f64) -> Cuboid {
        Cuboid::new(self.center.clone(), self.radii.iter().map(|r| r * factor).collect())
    }

    pub fn aspect(&self) -> f64 {
        let max = self.radii.iter().cloned().fold(0.0, f64::max);
        let min = self.radii.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Closed cuboids intersect (touching counts).
    pub fn intersects(&self, other: &Cuboid) -> bool {
        (0..self.dim()).all(|i| self.lo(i) <= other.hi(i) && other.lo(i) <= self.hi(i))
    }

    /// Volume of the intersection.
    pub fn overlap_volume(&self, other: &Cuboid) -> f64 {
        (0..self.dim())
            .map(|i| (self.hi(i).min(other.hi(i)) - self.lo(i).max(other.lo(i))).max(0.0))
            .product()
    }

    /// Euclidean distance from the cuboid to the complement of `domain`.
    pub fn boundary_distance(&self, domain: &Domain) -> f64 {
        domain
            .axes
            .iter()
            .enumerate()
            .map(|(i, a)| a.boundary_distance(self.lo(i)))
            .fold(f64::INFINITY, f64::min)
    }

    fn product(&self, other: &Cuboid) -> Cuboid {
        let mut c = self.center.clone();
        c.extend_from_slice(&other.center);
        let mut r = self.radii.clone();
        r.extend_from_slice(&other.radii);
        Cuboid::new(c, r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum CoveringSpec {
    /// `[2^n, 2^{n+1}]`, `n_min ≤ n ≤ n_max`, on (0, ∞).
    Dyadic { n_min: i32, n_max: i32 },
    /// Level `n ≥ 0`: `[2^n + (k-1)2^{-n}, 2^n + k 2^{-n}]`, `k = 1..4^n`;
    /// level `n < 0`: `[2^n, 2^{n+1}]`.
    Laguerre { n_min: i32, n_max: i32 },
    /// `[m w, (m+1) w]`, `m_min ≤ m ≤ m_max`, on the line.
    Uniform { width: f64, m_min: i64, m_max: i64 },
}

#[derive(Debug, Clone)]
enum Kind {
    Simple(CoveringSpec),
    Product(Box<AdmissibleCovering>, Box<AdmissibleCovering>),
    Strip {
        d1: usize,
        base: Box<AdmissibleCovering>,
    },
    Explicit,
}

/// A covering of `X` by cuboids, materialized on an index window.
#[derive(Debug, Clone)]
pub struct AdmissibleCovering {
    kind: Kind,
    name: String,
    domain: Domain,
    kappa: f64,
    cells: Vec<Cuboid>,
    labels: Vec<Vec<i64>>,
    lookup: BTreeMap<Vec<i64>, usize>,
    neighbors: Vec<Vec<usize>>,
    aspect: f64,
    neighbor_ratio: f64,
}

fn floor_log2(x: f64) -> i32 {
    let mut n = x.log2().floor() as i32;
    // Correct rounding at exact powers of two.
    if 2f64.powi(n) > x {
        n -= 1;
    } else if 2f64.powi(n + 1) <= x {
        n += 1;
    }
    n
}

impl AdmissibleCovering {
    pub fn dyadic(n_min: i32, n_max: i32) -> Result<Self> {
        Self::from_spec(CoveringSpec::Dyadic { n_min, n_max }, DEFAULT_KAPPA)
    }

    pub fn laguerre(n_min: i32, n_max: i32) -> Result<Self> {
        Self::from_spec(CoveringSpec::Laguerre { n_min, n_max }, DEFAULT_KAPPA)
    }

    pub fn uniform(width: f64, m_min: i64, m_max: i64) -> Result<Self> {
        Self::from_spec(CoveringSpec::Uniform { width, m_min, m_max }, DEFAULT_KAPPA)
    }

    pub fn from_spec(spec: CoveringSpec, kappa: f64) -> Result<Self> {
        const OP: &str = "geometry::covering";
        let mut cells = vec![];
        let mut labels = vec![];
        let (domain, name) = match spec {
            CoveringSpec::Dyadic { n_min, n_max } => {
                if n_min > n_max {
                    return Err(Error::usage(OP, "empty index range"));
                }
                for n in n_min..=n_max {
                    let lo = 2f64.powi(n);
                    cells.push(Cuboid::interval(lo, 2.0 * lo));
                    labels.push(vec![n as i64]);
                }
                (Domain::new(vec![Axis::HalfLine]), format!("dyadic[{n_min},{n_max}]"))
            }
            CoveringSpec::Laguerre { n_min, n_max } => {
                if n_min > n_max || n_max > 8 {
                    return Err(Error::usage(OP, "laguerre levels must satisfy n_min <= n_max <= 8"));
                }
                for n in n_min..=n_max {
                    let base = 2f64.powi(n);
                    if n < 0 {
                        cells.push(Cuboid::interval(base, 2.0 * base));
                        labels.push(vec![n as i64, 0]);
                    } else {
                        let w = 2f64.powi(-n);
                        for k in 0..(1_i64 << (2 * n)) {
                            cells.push(Cuboid::interval(base + k as f64 * w, base + (k + 1) as f64 * w));
                            labels.push(vec![n as i64, k]);
                        }
                    }
                }
                (Domain::new(vec![Axis::HalfLine]), format!("laguerre[{n_min},{n_max}]"))
            }
            CoveringSpec::Uniform { width, m_min, m_max } => {
                if !(width > 0.0) || m_min > m_max {
                    return Err(Error::usage(OP, "uniform covering needs width > 0 and m_min <= m_max"));
                }
                for m in m_min..=m_max {
                    cells.push(Cuboid::interval(m as f64 * width, (m + 1) as f64 * width));
                    labels.push(vec![m]);
                }
                (Domain::new(vec![Axis::Line]), format!("uniform({width})[{m_min},{m_max}]"))
            }
        };
        Self::assemble(Kind::Simple(spec), name, domain, kappa, cells, labels)
    }

    /// Covering given by an explicit cell list; only the enlargement
    /// conditions are checked here, the rest by [`verify_covering`].
    pub fn from_cells(domain: Domain, kappa: f64, cells: Vec<Cuboid>) -> Result<Self> {
        let labels = (0..cells.len() as i64).map(|i| vec![i]).collect();
        Self::assemble(Kind::Explicit, "explicit".into(), domain, kappa, cells, labels)
    }

    /// `𝒬_1 ⊠ 𝒬_2`: each `Q_1 × Q_2` is cut along its longer sides into
    /// pieces whose sides match the shorter factor.
    pub fn product(c1: &AdmissibleCovering, c2: &AdmissibleCovering) -> Result<Self> {
        let mut cells = vec![];
        let mut labels = vec![];
        for (i1, q1) in c1.cells.iter().enumerate() {
            for (i2, q2) in c2.cells.iter().enumerate() {
                let q = q1.product(q2);
                let side = q.radii.iter().cloned().fold(f64::INFINITY, f64::min) * 2.0;
                let counts: Vec<usize> = q.radii.iter().map(|r| ((2.0 * r / side).round() as usize).max(1)).collect();
                let total: usize = counts.iter().product();
                for flat in 0..total {
                    let mut rem = flat;
                    let mut sub = vec![0usize; counts.len()];
                    for (a, &c) in counts.iter().enumerate().rev() {
                        sub[a] = rem % c;
                        rem /= c;
                    }
                    let lo: Vec<f64> = (0..q.dim()).map(|a| q.lo(a) + sub[a] as f64 * 2.0 * q.radii[a] / counts[a] as f64).collect();
                    let hi: Vec<f64> = (0..q.dim()).map(|a| q.lo(a) + (sub[a] + 1) as f64 * 2.0 * q.radii[a] / counts[a] as f64).collect();
                    cells.push(Cuboid::from_bounds(&lo, &hi));
                    let mut label = vec![i1 as i64, i2 as i64];
                    label.extend(sub.iter().map(|&s| s as i64));
                    labels.push(label);
                }
            }
        }
        let domain = c1.domain.concat(&c2.domain);
        let name = format!("{}⊠{}", c1.name, c2.name);
        Self::assemble(
            Kind::Product(Box::new(c1.clone()), Box::new(c2.clone())),
            name,
            domain,
            c1.kappa,
            cells,
            labels,
        )
    }

    /// `ℝ^{d1} ⊠ 𝒬_2`: strips `ℝ^{d1} × Q_2` cut into cubes of side `d_{Q_2}`,
    /// materialized for `|x_1| ≤ extent`.
    pub fn strip(d1: usize, base: &AdmissibleCovering, extent: f64) -> Result<Self> {
        const OP: &str = "geometry::strip_covering";
        if d1 == 0 || d1 + base.dim() > 3 {
            return Err(Error::capability(OP, "total dimension must be at most 3"));
        }
        let mut cells = vec![];
        let mut labels = vec![];
        for (i2, q2) in base.cells.iter().enumerate() {
            let d = q2.diameter();
            let m_max = (extent / d).ceil() as i64;
            let per_axis = (2 * m_max) as usize;
            let total = per_axis.pow(d1 as u32);
            for flat in 0..total {
                let mut rem = flat;
                let mut ms = vec![0i64; d1];
                for m in ms.iter_mut().rev() {
                    *m = (rem % per_axis) as i64 - m_max;
                    rem /= per_axis;
                }
                let lo: Vec<f64> = ms.iter().map(|&m| m as f64 * d).collect();
                let hi: Vec<f64> = ms.iter().map(|&m| (m + 1) as f64 * d).collect();
                let q1 = Cuboid::from_bounds(&lo, &hi);
                cells.push(q1.product(q2));
                let mut label = vec![i2 as i64];
                label.extend(ms);
                labels.push(label);
            }
        }
        let domain = Domain::new(vec![Axis::Line; d1]).concat(&base.domain);
        let name = format!("R^{d1}⊠{}", base.name);
        Self::assemble(
            Kind::Strip { d1, base: Box::new(base.clone()) },
            name,
            domain,
            base.kappa,
            cells,
            labels,
        )
    }

    fn assemble(
        kind: Kind,
        name: String,
        domain: Domain,
        kappa: f64,
        cells: Vec<Cuboid>,
        labels: Vec<Vec<i64>>,
    ) -> Result<Self> {
        const OP: &str = "geometry::covering";
        if !(kappa > 1.0) || !kappa.is_finite() {
            return Err(Error::covering(OP, format!("kappa must be > 1, got {kappa}")));
        }
        if cells.is_empty() {
            return Err(Error::covering(OP, "no cells in the index window"));
        }
        let lookup = labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
        let neighbors = touching_pairs(&cells, 1.0);
        let mut aspect: f64 = 1.0;
        let mut ratio: f64 = 1.0;
        for (i, q) in cells.iter().enumerate() {
            aspect = aspect.max(q.aspect());
            for &j in &neighbors[i] {
                ratio = ratio.max(q.diameter() / cells[j].diameter());
            }
        }
        let cov = AdmissibleCovering {
            kind,
            name,
            domain,
            kappa,
            cells,
            labels,
            lookup,
            neighbors,
            aspect,
            neighbor_ratio: ratio,
        };
        cov.check_enlargements()?;
        Ok(cov)
    }

    /// Q*** ⊂ X and `Q₁*** ∩ Q₂*** ≠ ∅ ⟺ Q₁ ∩ Q₂ ≠ ∅` on the window.
    fn check_enlargements(&self) -> Result<()> {
        const OP: &str = "geometry::enlarge";
        let k3 = self.kappa.powi(3);
        for (i, q) in self.cells.iter().enumerate() {
            let e = q.scaled(k3);
            if !(e.boundary_distance(&self.domain) > 0.0) {
                return Err(Error::covering(
                    OP,
                    format!("kappa^3 = {k3}: Q*** of cell {i} leaves the domain"),
                ));
            }
        }
        let enlarged: Vec<Cuboid> = self.cells.iter().map(|q| q.scaled(k3)).collect();
        let far = touching_pairs(&enlarged, 1.0);
        for (i, list) in far.iter().enumerate() {
            for &j in list {
                if !self.neighbors[i].contains(&j) {
                    return Err(Error::covering(
                        OP,
                        format!("kappa^3 = {k3}: enlargements of non-touching cells {i} and {j} intersect"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn cells(&self) -> &[Cuboid] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn label(&self, i: usize) -> &[i64] {
        &self.labels[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Aspect comparability constant `A` (max over cells of max r / min r).
    pub fn aspect_constant(&self) -> f64 {
        self.aspect
    }

    /// Neighbor diameter comparability constant `B`.
    pub fn neighbor_ratio(&self) -> f64 {
        self.neighbor_ratio
    }

    /// Index steps from cell `i` to the edge of the materialized window
    /// (0 for the outermost scale). Explicit coverings report 0; strips
    /// are layered by their base cell only.
    pub fn layer(&self, i: usize) -> i64 {
        let l = &self.labels[i];
        match &self.kind {
            Kind::Simple(CoveringSpec::Dyadic { n_min, n_max })
            | Kind::Simple(CoveringSpec::Laguerre { n_min, n_max }) => {
                (l[0] - *n_min as i64).min(*n_max as i64 - l[0])
            }
            Kind::Simple(CoveringSpec::Uniform { m_min, m_max, .. }) => (l[0] - m_min).min(m_max - l[0]),
            Kind::Product(a, b) => a.layer(l[0] as usize).min(b.layer(l[1] as usize)),
            Kind::Strip { base, .. } => base.layer(l[0] as usize),
            Kind::Explicit => 0,
        }
    }

    /// Enlargement `Q^{*…*}` with `level` stars.
    pub fn enlarge(&self, i: usize, level: u32) -> Cuboid {
        self.cells[i].scaled(self.kappa.powi(level as i32))
    }

    /// Bounding box `[lo, hi]` of the materialized window.
    pub fn window(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for q in &self.cells {
            for a in 0..d {
                lo[a] = lo[a].min(q.lo(a));
                hi[a] = hi[a].max(q.hi(a));
            }
        }
        (lo, hi)
    }

    /// Index of the cell containing `x`, if it lies in the window.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if !self.domain.contains(x) {
            return None;
        }
        match &self.kind {
            Kind::Simple(spec) => {
                let v = x[0];
                let label = match spec {
                    CoveringSpec::Dyadic { .. } => vec![floor_log2(v) as i64],
                    CoveringSpec::Laguerre { .. } => {
                        let n = floor_log2(v);
                        if n < 0 {
                            vec![n as i64, 0]
                        } else {
                            let base = 2f64.powi(n);
                            let k = ((v - base) * base).floor() as i64;
                            vec![n as i64, k.clamp(0, (1_i64 << (2 * n)) - 1)]
                        }
                    }
                    CoveringSpec::Uniform { width, .. } => vec![(v / width).floor() as i64],
                };
                self.lookup.get(&label).copied()
            }
            Kind::Product(c1, c2) => {
                let d1 = c1.dim();
                let i1 = c1.locate(&x[..d1])?;
                let i2 = c2.locate(&x[d1..])?;
                let q = c1.cells[i1].product(&c2.cells[i2]);
                let side = q.radii.iter().cloned().fold(f64::INFINITY, f64::min) * 2.0;
                let mut label = vec![i1 as i64, i2 as i64];
                for a in 0..q.dim() {
                    let count = ((2.0 * q.radii[a] / side).round() as i64).max(1);
                    let s = ((x[a] - q.lo(a)) / (2.0 * q.radii[a]) * count as f64).floor() as i64;
                    label.push(s.clamp(0, count - 1));
                }
                self.lookup.get(&label).copied()
            }
            Kind::Strip { d1, base, .. } => {
                let i2 = base.locate(&x[*d1..])?;
                let d = base.cells[i2].diameter();
                let mut label = vec![i2 as i64];
                label.extend(x[..*d1].iter().map(|v| (v / d).floor() as i64));
                self.lookup.get(&label).copied()
            }
            Kind::Explicit => {
                let d = self.dim();
                let mut fallback = None;
                for (i, q) in self.cells.iter().enumerate() {
                    if q.contains(x) {
                        if (0..d).all(|a| x[a] < q.hi(a)) {
                            return Some(i);
                        }
                        fallback.get_or_insert(i);
                    }
                }
                fallback
            }
        }
    }

    /// Cells whose enlargement at `level` contains `x`.
    pub fn enlarged_containing(&self, x: &[f64], level: u32) -> Vec<usize> {
        let f = self.kappa.powi(level as i32);
        match self.locate(x) {
            Some(i) => std::iter::once(i)
                .chain(self.neighbors[i].iter().copied())
                .filter(|&j| self.cells[j].scaled(f).contains(x))
                .collect(),
            None => (0..self.len()).filter(|&j| self.cells[j].scaled(f).contains(x)).collect(),
        }
    }

    pub fn partition_of_unity(&self) -> PartitionOfUnity<'_> {
        PartitionOfUnity::new(self)
    }
}

/// For each cell, the other cells it touches after scaling by `factor`.
fn touching_pairs(cells: &[Cuboid], factor: f64) -> Vec<Vec<usize>> {
    let scaled: Vec<Cuboid> = cells.iter().map(|q| q.scaled(factor)).collect();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| scaled[a].lo(0).total_cmp(&scaled[b].lo(0)));
    let mut out = vec![vec![]; cells.len()];
    let tol = |a: &Cuboid, b: &Cuboid| 1e-12 * (a.diameter() + b.diameter());
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if scaled[j].lo(0) > scaled[i].hi(0) + tol(&scaled[i], &scaled[j]) {
                break;
            }
            let t = tol(&scaled[i], &scaled[j]);
            let hit = (0..scaled[i].dim())
                .all(|a| scaled[i].lo(a) <= scaled[j].hi(a) + t && scaled[j].lo(a) <= scaled[i].hi(a) + t);
            if hit {
                out[i].push(j);
                out[j].push(i);
            }
        }
    }
    for list in &mut out {
        list.sort_unstable();
    }
    out
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

fn smoothstep_dx(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        6.0 * u * (1.0 - u)
    }
}

/// The C¹ partition of unity `{ψ_Q}` subordinate to `{Q*}`.
///
/// On one-dimensional coverings `ψ_Q` is built face by face: across the
/// face `f` shared by `Q₁` (left) and `Q₂` (right) the weight passes from
/// `Q₁` to `Q₂` by a cubic smoothstep over `[f - (κ-1)r₂, f + (κ-1)r₁]`,
/// the full overlap of the two enlargements. The weights sum to 1 by
/// construction and the slope is the smallest a cubic ramp allows.
///
/// In higher dimensions the raw bump of `Q` is the product over axes of a
/// cubic ramp that is 1 on `Q(z, r/κ)` and vanishes outside `Q*`, divided
/// by the local sum over `Q` and its neighbors (the only cells whose
/// enlargements reach into `Q`).
#[derive(Debug, Clone)]
pub struct PartitionOfUnity<'a> {
    covering: &'a AdmissibleCovering,
    /// Per cell: (left transition, right transition) intervals, 1-d only.
    faces: Option<Vec<(Option<(f64, f64)>, Option<(f64, f64)>)>>,
}

impl<'a> PartitionOfUnity<'a> {
    fn new(covering: &'a AdmissibleCovering) -> Self {
        if covering.dim() != 1 {
            return PartitionOfUnity { covering, faces: None };
        }
        let k = covering.kappa;
        let cells = &covering.cells;
        let faces = (0..cells.len())
            .map(|i| {
                let q = &cells[i];
                let mut left = None;
                let mut right = None;
                for &j in &covering.neighbors[i] {
                    let n = &cells[j];
                    let tol = 1e-12 * (q.diameter() + n.diameter());
                    if (n.hi(0) - q.lo(0)).abs() <= tol {
                        left = Some((q.lo(0) - (k - 1.0) * q.radii[0], q.lo(0) + (k - 1.0) * n.radii[0]));
                    } else if (n.lo(0) - q.hi(0)).abs() <= tol {
                        right = Some((q.hi(0) - (k - 1.0) * n.radii[0], q.hi(0) + (k - 1.0) * q.radii[0]));
                    }
                }
                (left, right)
            })
            .collect();
        PartitionOfUnity { covering, faces: Some(faces) }
    }

    pub fn covering(&self) -> &'a AdmissibleCovering {
        self.covering
    }

    /// Face-transition weight and derivative for a 1-d cell.
    fn face_weight(&self, q: usize, x: f64) -> (f64, f64) {
        let faces = self.faces.as_ref().expect("one-dimensional partition");
        let cell = &self.covering.cells[q];
        let (left, right) = faces[q];
        // Outside the window the boundary cells keep weight 1 up to Q*.
        let star = cell.scaled(self.covering.kappa);
        if x < star.lo(0) || x > star.hi(0) {
            return (0.0, 0.0);
        }
        let mut value = 1.0;
        let mut deriv = 0.0;
        if let Some((a, b)) = left {
            if x <= a {
                return (0.0, 0.0);
            }
            let u = (x - a) / (b - a);
            let v = smoothstep(u);
            deriv = deriv * v + value * smoothstep_dx(u) / (b - a);
            value *= v;
        }
        if let Some((a, b)) = right {
            if x >= b {
                return (0.0, 0.0);
            }
            let u = (x - a) / (b - a);
            let v = 1.0 - smoothstep(u);
            deriv = deriv * v - value * smoothstep_dx(u) / (b - a);
            value *= v;
        }
        (value, deriv)
    }

    fn raw(&self, q: usize, x: &[f64]) -> (f64, Vec<f64>) {
        let cell = &self.covering.cells[q];
        let k = self.covering.kappa;
        let d = cell.dim();
        let mut factors = vec![0.0; d];
        let mut derivs = vec![0.0; d];
        for a in 0..d {
            let r = cell.radii[a];
            let width = k * r - r / k;
            let off = x[a] - cell.center[a];
            let u = (off.abs() - r / k) / width;
            factors[a] = 1.0 - smoothstep(u);
            derivs[a] = -smoothstep_dx(u) * off.signum() / width;
        }
        let value: f64 = factors.iter().product();
        let grad = (0..d)
            .map(|a| {
                derivs[a]
                    * (0..d)
                        .filter(|&b| b != a)
                        .map(|b| factors[b])
                        .product::<f64>()
            })
            .collect();
        (value, grad)
    }

    fn candidates(&self, x: &[f64]) -> Vec<usize> {
        self.covering.enlarged_containing(x, 1)
    }

    /// `ψ_Q(x)`.
    pub fn psi(&self, q: usize, x: &[f64]) -> f64 {
        if self.faces.is_some() {
            return self.face_weight(q, x[0]).0;
        }
        let (own, _) = self.raw(q, x);
        if own == 0.0 {
            return 0.0;
        }
        let total: f64 = self.candidates(x).iter().map(|&j| self.raw(j, x).0).sum();
        own / total
    }

    /// `∇ψ_Q(x)`.
    pub fn psi_grad(&self, q: usize, x: &[f64]) -> Vec<f64> {
        if self.faces.is_some() {
            return vec![self.face_weight(q, x[0]).1];
        }
        let (own, own_grad) = self.raw(q, x);
        let d = x.len();
        let mut total = 0.0;
        let mut total_grad = vec![0.0; d];
        for j in self.candidates(x) {
            let (v, g) = self.raw(j, x);
            total += v;
            for a in 0..d {
                total_grad[a] += g[a];
            }
        }
        if total == 0.0 {
            return vec![0.0; d];
        }
        (0..d)
            .map(|a| (own_grad[a] * total - own * total_grad[a]) / (total * total))
            .collect()
    }

    /// Nonzero `(Q, ψ_Q(x))` pairs at `x`.
    pub fn weights(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let c = self.candidates(x);
        if self.faces.is_some() {
            return c
                .into_iter()
                .map(|j| (j, self.face_weight(j, x[0]).0))
                .filter(|(_, v)| *v > 0.0)
                .collect();
        }
        let raws: Vec<f64> = c.iter().map(|&j| self.raw(j, x).0).collect();
        let total: f64 = raws.iter().sum();
        c.into_iter()
            .zip(raws)
            .filter(|(_, v)| *v > 0.0)
            .map(|(j, v)| (j, v / total))
            .collect()
    }

    /// `Σ_Q ψ_Q(x)`.
    pub fn sum(&self, x: &[f64]) -> f64 {
        self.weights(x).iter().map(|(_, v)| v).sum()
    }

    /// Points where the one-dimensional `ψ_Q` changes formula: the ends
    /// of `Q*` and of the face transitions.
    pub fn kinks(&self, q: usize) -> Vec<f64> {
        let star = self.support(q);
        let mut out = vec![star.lo(0), star.hi(0)];
        if let Some(faces) = &self.faces {
            let (left, right) = faces[q];
            for (a, b) in left.into_iter().chain(right) {
                out.push(a);
                out.push(b);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Support `Q*` of `ψ_Q`.
    pub fn support(&self, q: usize) -> Cuboid {
        self.covering.enlarge(q, 1)
    }

    /// Measured `sup_Q d_Q · sup |∇ψ_Q|` over a grid in each `Q*`
    /// (every cell of the window for one-dimensional coverings).
    pub fn lipschitz_constant(&self) -> f64 {
        let cov = self.covering;
        let step = (cov.len() / 200).max(1);
        let mut best: f64 = 0.0;
        for q in (0..cov.len()).step_by(step) {
            let s = self.support(q);
            let d = s.dim();
            let n: usize = if d == 1 { 2000 } else { 40 };
            let total = n.pow(d as u32);
            for flat in 0..total {
                let mut rem = flat;
                let mut x = vec![0.0; d];
                for a in (0..d).rev() {
                    let i = rem % n;
                    rem /= n;
                    x[a] = s.lo(a) + (i as f64 + 0.5) / n as f64 * 2.0 * s.radii[a];
                }
                if !cov.domain.contains(&x) {
                    continue;
                }
                let g = self.psi_grad(q, &x);
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                best = best.max(norm * cov.cells[q].diameter());
            }
        }
        best
    }
}

/// Deterministic low-discrepancy points in `[0,1)^d` (Halton sequence).
pub fn halton(index: usize, dim: usize) -> Vec<f64> {
    const PRIMES: [usize; 6] = [2, 3, 5, 7, 11, 13];
    (0..dim)
        .map(|a| {
            let b = PRIMES[a];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index + 1;
            while i > 0 {
                f /= b as f64;
                r += f * (i % b) as f64;
                i /= b;
            }
            r
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringCheck {
    pub item: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub covering: String,
    pub cells: usize,
    pub samples: usize,
    pub checks: Vec<CoveringCheck>,
    pub aspect_constant: f64,
    pub neighbor_ratio: f64,
    /// `min_Q dist(Q, ℝ^d∖X) / d_Q`.
    pub boundary_ratio: f64,
    /// Sampled `max_x Σ_Q 1_{Q***}(x)`.
    pub overlap_constant: usize,
    pub passed: bool,
}

/// Checks the admissibility items on the window: covering, disjoint
/// interiors, aspect and neighbor comparability, boundary clearance, and
/// finite overlap of `{Q***}`. Sample points are Halton points in the
/// window's bounding box (log-spaced along half-line axes).
pub fn verify_covering(cov: &AdmissibleCovering, samples: usize) -> CoveringReport {
    let d = cov.dim();
    let (lo, hi) = cov.window();
    let point = |i: usize| -> Vec<f64> {
        let u = halton(i, d);
        (0..d)
            .map(|a| match cov.domain.axes[a] {
                Axis::HalfLine => (lo[a].ln() + u[a] * (hi[a].ln() - lo[a].ln())).exp(),
                Axis::Line => lo[a] + u[a] * (hi[a] - lo[a]),
            })
            .collect()
    };
    let k3 = cov.kappa.powi(3);
    let mut uncovered = 0;
    let mut first_gap = None;
    let mut overlap = 0;
    for i in 0..samples {
        let x = point(i);
        let containing = cov.cells.iter().filter(|q| q.contains(&x)).count();
        if containing == 0 {
            uncovered += 1;
            first_gap.get_or_insert(x.clone());
        }
        let c = cov.cells.iter().filter(|q| q.scaled(k3).contains(&x)).count();
        overlap = overlap.max(c);
    }
    let mut overlapping = 0;
    for (i, list) in cov.neighbors.iter().enumerate() {
        for &j in list {
            let v = cov.cells[i].overlap_volume(&cov.cells[j]);
            if j > i && v > 1e-12 * cov.cells[i].volume().min(cov.cells[j].volume()) {
                overlapping += 1;
            }
        }
    }
    let boundary_ratio = cov
        .cells
        .iter()
        .map(|q| q.boundary_distance(&cov.domain) / q.diameter())
        .fold(f64::INFINITY, f64::min);
    let enlarge_ok = cov.check_enlargements().is_ok();
    let checks = vec![
        CoveringCheck {
            item: "1 union covers X".into(),
            passed: uncovered == 0,
            detail: match first_gap {
                None => format!("{samples} samples covered"),
                Some(x) => format!("{uncovered} of {samples} samples uncovered, first at {x:?}"),
            },
        },
        CoveringCheck {
            item: "2 disjoint interiors".into(),
            passed: overlapping == 0,
            detail: format!("{overlapping} overlapping pairs"),
        },
        CoveringCheck {
            item: "3 aspect comparability".into(),
            passed: cov.aspect.is_finite(),
            detail: format!("A = {}", cov.aspect),
        },
        CoveringCheck {
            item: "4 neighbor diameter comparability".into(),
            passed: cov.neighbor_ratio.is_finite(),
            detail: format!("B = {}", cov.neighbor_ratio),
        },
        CoveringCheck {
            item: "5 boundary clearance".into(),
            passed: boundary_ratio > 0.0 && enlarge_ok,
            detail: format!("min dist/d_Q = {boundary_ratio}; enlargement conditions {}", if enlarge_ok { "hold" } else { "fail" }),
        },
        CoveringCheck {
            item: "finite overlap of Q***".into(),
            passed: overlap > 0,
            detail: format!("max overlap {overlap}"),
        },
    ];
    let passed = checks.iter().all(|c| c.passed);
    CoveringReport {
        covering: cov.name.clone(),
        cells: cov.len(),
        samples,
        checks,
        aspect_constant: cov.aspect,
        neighbor_ratio: cov.neighbor_ratio,
        boundary_ratio,
        overlap_constant: overlap,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(c: &Cuboid) -> (f64, f64) {
        (c.lo(0), c.hi(0))
    }

    #[test]
    fn dyadic_lookup() {
        let cov = AdmissibleCovering::dyadic(-4, 4).unwrap();
        let i = cov.locate(&[5.0]).unwrap();
        assert_eq!(interval(&cov.cells()[i]), (4.0, 8.0));
        assert_eq!(cov.cells()[i].diameter(), 4.0);
        let i = cov.locate(&[1.0]).unwrap();
        assert_eq!(interval(&cov.cells()[i]), (1.0, 2.0));
        assert!(cov.locate(&[100.0]).is_none());
        assert!(cov.locate(&[-1.0]).is_none());
        assert_eq!(cov.neighbor_ratio(), 2.0);
    }

    #[test]
    fn laguerre_cells() {
        let cov = AdmissibleCovering::laguerre(-3, 3).unwrap();
        let level1: Vec<(f64, f64)> = (0..cov.len())
            .filter(|&i| cov.label(i)[0] == 1)
            .map(|i| interval(&cov.cells()[i]))
            .collect();
        assert_eq!(level1, vec![(2.0, 2.5), (2.5, 3.0), (3.0, 3.5), (3.5, 4.0)]);
        let i = cov.locate(&[0.3]).unwrap();
        assert_eq!(interval(&cov.cells()[i]), (0.25, 0.5));
        assert_eq!((0..cov.len()).filter(|&i| cov.label(i)[0] == 2).count(), 16);
        for &x in &[0.2, 1.0, 2.7, 3.99, 5.1, 15.9] {
            let i = cov.locate(&[x]).unwrap();
            let (a, b) = interval(&cov.cells()[i]);
            assert!(a <= x && x < b, "x={x} in [{a},{b}]");
        }
        assert!(cov.neighbor_ratio() <= 2.0);
    }

    #[test]
    fn product_subdivision() {
        let c1 = AdmissibleCovering::dyadic(0, 0).unwrap();
        let c2 = AdmissibleCovering::dyadic(2, 2).unwrap();
        let p = AdmissibleCovering::product(&c1, &c2).unwrap();
        assert_eq!(p.len(), 4);
        for q in p.cells() {
            assert_eq!(q.radii, vec![0.5, 0.5]);
        }
        let same = AdmissibleCovering::product(&c1, &c1).unwrap();
        assert_eq!(same.len(), 1);
        assert_eq!(same.cells()[0], Cuboid::new(vec![1.5, 1.5], vec![0.5, 0.5]));
    }

    #[test]
    fn product_of_dyadic_is_admissible() {
        let b = AdmissibleCovering::dyadic(-4, 3).unwrap();
        let p = AdmissibleCovering::product(&b, &b).unwrap();
        let r = verify_covering(&p, 4000);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.aspect_constant, 1.0);
        let i = p.locate(&[1.3, 5.5]).unwrap();
        assert!(p.cells()[i].contains(&[1.3, 5.5]));
    }

    #[test]
    fn strip_lookup() {
        let base = AdmissibleCovering::dyadic(0, 2).unwrap();
        let s = AdmissibleCovering::strip(1, &base, 16.0).unwrap();
        let i = s.locate(&[3.5, 1.5]).unwrap();
        assert_eq!(s.cells()[i], Cuboid::from_bounds(&[3.0, 1.0], &[4.0, 2.0]));
        let r = verify_covering(&s, 3000);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn enlargement() {
        let cov = AdmissibleCovering::dyadic(-4, 4).unwrap();
        let i = cov.locate(&[1.5]).unwrap();
        let e = cov.enlarge(i, 1);
        assert_eq!(interval(&e), (0.9375, 2.0625));
        let i = cov.locate(&[3.0]).unwrap();
        assert!(cov.enlarge(i, 3).lo(0) > 0.0);
    }

    #[test]
    fn large_kappa_rejected() {
        let e = AdmissibleCovering::from_spec(CoveringSpec::Dyadic { n_min: 0, n_max: 3 }, 1.5).unwrap_err();
        assert!(matches!(e, Error::Covering { .. }));
    }

    #[test]
    fn verify_standard_coverings() {
        let r = verify_covering(&AdmissibleCovering::dyadic(-4, 4).unwrap(), 2000);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.neighbor_ratio, 2.0);
        assert!(r.overlap_constant <= 3);
        let r = verify_covering(&AdmissibleCovering::laguerre(-4, 4).unwrap(), 2000);
        assert!(r.passed, "{r:?}");
        assert!(r.neighbor_ratio <= 2.0);
        let r = verify_covering(&AdmissibleCovering::uniform(1.0, -20, 20).unwrap(), 2000);
        assert!(r.passed);
    }

    #[test]
    fn gap_fails_item_one() {
        let cells = vec![Cuboid::interval(1.0, 2.0), Cuboid::interval(2.5, 3.5)];
        let cov = AdmissibleCovering::from_cells(Domain::new(vec![Axis::HalfLine]), DEFAULT_KAPPA, cells).unwrap();
        let r = verify_covering(&cov, 500);
        assert!(!r.passed);
        assert!(!r.checks[0].passed);
        assert!(r.checks[1].passed);
    }

    #[test]
    fn partition_examples() {
        let cov = AdmissibleCovering::dyadic(-4, 4).unwrap();
        let pu = cov.partition_of_unity();
        assert!((pu.sum(&[3.7]) - 1.0).abs() < 1e-12);
        let q = cov.locate(&[3.0]).unwrap();
        assert_eq!(pu.psi(q, &[3.0]), 1.0);
        let l = pu.lipschitz_constant();
        assert!(l > 1.0 && l <= 16.0, "{l}");
    }

    #[test]
    fn partition_derivative_matches_differences() {
        let cov = AdmissibleCovering::laguerre(-2, 2).unwrap();
        let pu = cov.partition_of_unity();
        for k in 0..200 {
            let x = 0.3 + 7.0 * halton(k, 1)[0];
            for (q, _) in pu.weights(&[x]) {
                let h = 1e-6;
                let fd = (pu.psi(q, &[x + h]) - pu.psi(q, &[x - h])) / (2.0 * h);
                let g = pu.psi_grad(q, &[x])[0];
                assert!((fd - g).abs() < 1e-4 * (1.0 + g.abs()), "x={x} q={q} fd={fd} g={g}");
            }
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn partition_sums_to_one_and_is_supported(x in 0.07f64..30.0) {
            let cov = AdmissibleCovering::dyadic(-4, 4).unwrap();
            let pu = cov.partition_of_unity();
            prop_assert!((pu.sum(&[x]) - 1.0).abs() < 1e-12);
            for (q, w) in pu.weights(&[x]) {
                prop_assert!(w > 0.0 && w <= 1.0);
                prop_assert!(pu.support(q).contains(&[x]));
            }
        }

        #[test]
        fn product_partition_sums_to_one(x in 0.1f64..12.0, y in 0.1f64..12.0) {
            let b = AdmissibleCovering::dyadic(-4, 3).unwrap();
            let p = AdmissibleCovering::product(&b, &b).unwrap();
            let pu = p.partition_of_unity();
            prop_assert!((pu.sum(&[x, y]) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn locate_agrees_with_containment(x in 0.06f64..31.0) {
            let cov = AdmissibleCovering::laguerre(-4, 4).unwrap();
            let i = cov.locate(&[x]).unwrap();
            prop_assert!(cov.cells()[i].contains(&[x]));
        }
    }
}
