//! Subcommand bodies. Each returns the rendered report and an exit code.

use std::fmt::Write as _;
use std::path::PathBuf;

use hardy_core::geometry::{verify_covering, AdmissibleCovering};
use hardy_core::hardy::{atomic_decompose, equivalence_report, AtomKind, Decomposition, EquivalenceReport};
use hardy_core::kernels::{kernel_dx, kernel_eval, KernelFamily};
use hardy_core::transforms::{
    maximal_on, riesz_apply_on, riesz_kernel_with, transform_grid, SampledFunction,
};
use hardy_core::verifier::{
    verify_assumption, verify_assumption_widening, verify_lemma_a8, Assumption, AssumptionReport,
};
use serde::Serialize;

use crate::config::{load_suite, parse_grid, parse_point, parse_profile, CoveringKind, RunConfig};
use crate::error::{CliError, EXIT_ACCURACY, EXIT_OK, EXIT_UNSTABLE, EXIT_USAGE};
use crate::output::{self, join, num, nums, opt, Format};

pub struct Outcome {
    pub body: String,
    pub code: i32,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Outcome { body, code: EXIT_OK }
    }
}

type Res = Result<Outcome, CliError>;

#[derive(Serialize)]
struct KernelEvalDoc {
    family: String,
    t: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    value: f64,
    ln_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dx: Option<DerivativeDoc>,
}

#[derive(Serialize)]
struct DerivativeDoc {
    j: usize,
    value: f64,
}

pub fn kernel_eval_cmd(cfg: &RunConfig, fmt: Format, t: f64, x: &str, y: &str, dx: Option<usize>) -> Res {
    let family = cfg.family()?;
    let (x, y) = (parse_point(x)?, parse_point(y)?);
    let v = kernel_eval(&family, t, &x, &y)?;
    let dx = match dx {
        Some(j) => Some(DerivativeDoc {
            j,
            value: kernel_dx(&family, j, t, &x, &y)?,
        }),
        None => None,
    };
    let doc = KernelEvalDoc {
        family: family.name(),
        t,
        x,
        y,
        value: v.value,
        ln_value: v.ln_value,
        dx,
    };
    let body = match fmt {
        Format::Json => output::json(&doc)?,
        Format::Csv => output::csv(
            &["family", "t", "x", "y", "value", "ln_value", "dx_j", "dx_value"],
            [vec![
                doc.family.clone(),
                num(t),
                nums(&doc.x),
                nums(&doc.y),
                num(doc.value),
                num(doc.ln_value),
                doc.dx.as_ref().map(|d| d.j.to_string()).unwrap_or_default(),
                opt(doc.dx.as_ref().map(|d| d.value)),
            ]],
        )?,
        Format::Text => {
            let mut s = format!("value    {}\nln_value {}\n", num(doc.value), num(doc.ln_value));
            if let Some(d) = &doc.dx {
                let _ = writeln!(s, "dx_{}     {}", d.j, num(d.value));
            }
            s
        }
    };
    Ok(Outcome::ok(body))
}

#[derive(Serialize)]
struct SeriesDoc<'a> {
    quantity: &'a str,
    family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    points: Vec<SeriesPoint>,
}

#[derive(Serialize)]
struct SeriesPoint {
    x: Vec<f64>,
    value: f64,
}

fn render_series(fmt: Format, doc: &SeriesDoc) -> Result<String, CliError> {
    Ok(match fmt {
        Format::Json => output::json(doc)?,
        Format::Csv => output::csv(&["x", "value"], doc.points.iter().map(|p| vec![nums(&p.x), num(p.value)]))?,
        Format::Text => {
            let mut s = String::new();
            for p in &doc.points {
                let _ = writeln!(s, "{:>24} {}", nums(&p.x), num(p.value));
            }
            s
        }
    })
}

pub fn riesz_kernel_cmd(cfg: &RunConfig, fmt: Format, j: usize, y: &str, xs: &[String], grid: Option<&str>) -> Res {
    let family = cfg.family()?;
    let y = parse_point(y)?;
    let mut points: Vec<Vec<f64>> = xs.iter().map(|s| parse_point(s)).collect::<Result<_, _>>()?;
    if let Some(g) = grid {
        if j >= y.len() {
            return Err(CliError::Usage(format!("coordinate index {j} out of range for dimension {}", y.len())));
        }
        for v in parse_grid(g)? {
            let mut x = y.clone();
            x[j] = v;
            points.push(x);
        }
    }
    if points.is_empty() {
        return Err(CliError::Usage("give evaluation points with --x or --grid".into()));
    }
    let points = points
        .into_iter()
        .map(|x| {
            let value = riesz_kernel_with(&family, j, &x, &y, &cfg.transform.kernel)?.value;
            Ok(SeriesPoint { x, value })
        })
        .collect::<Result<_, CliError>>()?;
    let doc = SeriesDoc {
        quantity: "riesz_kernel",
        family: family.name(),
        input: Some(format!("j={j}, y={}", nums(&y))),
        points,
    };
    Ok(Outcome::ok(render_series(fmt, &doc)?))
}

fn sampled_input(family: &KernelFamily, f: &str, grid: Option<&str>) -> Result<(SampledFunction, Vec<f64>), CliError> {
    let axis = family
        .as_single()
        .ok_or_else(|| CliError::Usage("function transforms need a one-dimensional family".into()))?
        .axis();
    let profile = parse_profile(f)?;
    let sampled = SampledFunction::sample(profile, axis)?;
    let grid = match grid {
        Some(g) => parse_grid(g)?,
        None => transform_grid(&sampled, axis),
    };
    Ok((sampled, grid))
}

pub fn riesz_apply_cmd(cfg: &RunConfig, fmt: Format, j: usize, f: &str, grid: Option<&str>) -> Res {
    let family = cfg.family()?;
    let (sampled, grid) = sampled_input(&family, f, grid)?;
    let out = riesz_apply_on(&family, j, &sampled, grid, &cfg.transform)?;
    series_outcome(fmt, "riesz_apply", &family, f, &out)
}

pub fn maximal_cmd(cfg: &RunConfig, fmt: Format, f: &str, grid: Option<&str>) -> Res {
    let family = cfg.family()?;
    let (sampled, grid) = sampled_input(&family, f, grid)?;
    let out = maximal_on(&family, &sampled, grid, &cfg.transform)?;
    series_outcome(fmt, "maximal_function", &family, f, &out)
}

fn series_outcome(fmt: Format, quantity: &str, family: &KernelFamily, f: &str, out: &SampledFunction) -> Res {
    let doc = SeriesDoc {
        quantity,
        family: family.name(),
        input: Some(f.trim().to_string()),
        points: out
            .grid()
            .iter()
            .zip(out.values())
            .map(|(&x, &value)| SeriesPoint { x: vec![x], value })
            .collect(),
    };
    Ok(Outcome::ok(render_series(fmt, &doc)?))
}

#[derive(Serialize)]
struct NormsDoc<'a> {
    covering: String,
    #[serde(flatten)]
    report: &'a EquivalenceReport,
}

pub fn norms_cmd(cfg: &RunConfig, fmt: Format, suite: Option<PathBuf>, fs: &[String]) -> Res {
    let family = cfg.family()?;
    let covering = cfg.covering(Some(&family))?;
    let axis = family
        .as_single()
        .ok_or_else(|| CliError::Usage("norms need a one-dimensional family".into()))?
        .axis();
    let mut entries = vec![];
    if let Some(path) = suite.or_else(|| cfg.suite.path.clone().map(PathBuf::from)) {
        for e in load_suite(&path)? {
            entries.push((e.id, SampledFunction::sample(e.profile, axis)?));
        }
    }
    for f in fs {
        entries.push((f.trim().to_string(), SampledFunction::sample(parse_profile(f)?, axis)?));
    }
    let report = equivalence_report(&family, &covering, &entries, &cfg.transform, &cfg.decompose)?;
    let doc = NormsDoc {
        covering: covering.name().to_string(),
        report: &report,
    };
    let body = match fmt {
        Format::Json => output::json(&doc)?,
        Format::Csv => output::csv(
            &[
                "family",
                "function_id",
                "maximal",
                "riesz",
                "atomic",
                "riesz_over_maximal",
                "atomic_over_maximal",
                "atom_count",
                "coeff_sum",
            ],
            report.reports.iter().map(|r| {
                vec![
                    report.family.clone(),
                    r.function_id.clone(),
                    num(r.norms.maximal),
                    num(r.norms.riesz),
                    num(r.norms.atomic),
                    num(r.ratios.riesz_over_maximal),
                    num(r.ratios.atomic_over_maximal),
                    r.atom_count.to_string(),
                    num(r.coeff_sum),
                ]
            }),
        )?,
        Format::Text => {
            let mut s = format!("family {}\ncovering {}\n", report.family, doc.covering);
            let _ = writeln!(s, "{:<28} {:>14} {:>14} {:>14} {:>8}", "function", "maximal", "riesz", "atomic", "atoms");
            for r in &report.reports {
                let _ = writeln!(
                    s,
                    "{:<28} {:>14.8e} {:>14.8e} {:>14.8e} {:>8}",
                    r.function_id, r.norms.maximal, r.norms.riesz, r.norms.atomic, r.atom_count
                );
            }
            let _ = writeln!(
                s,
                "riesz/maximal in [{}, {}]\natomic/maximal in [{}, {}]\nC* {}",
                num(report.riesz_ratio_min),
                num(report.riesz_ratio_max),
                num(report.atomic_ratio_min),
                num(report.atomic_ratio_max),
                num(report.c_star)
            );
            s
        }
    };
    Ok(Outcome::ok(body))
}

#[derive(Serialize)]
struct DecomposeDoc<'a> {
    function_id: String,
    covering: String,
    atom_count: usize,
    coeff_sum: f64,
    #[serde(flatten)]
    decomposition: &'a Decomposition,
}

pub fn decompose_cmd(cfg: &RunConfig, fmt: Format, f: &str) -> Res {
    let family = match cfg.covering.kind {
        CoveringKind::Natural => Some(cfg.family()?),
        _ => None,
    };
    let covering = cfg.covering(family.as_ref())?;
    let axis = covering.domain().axes[0];
    let sampled = SampledFunction::sample(parse_profile(f)?, axis)?;
    let d = atomic_decompose(&sampled, &covering, &cfg.decompose)?;
    let doc = DecomposeDoc {
        function_id: f.trim().to_string(),
        covering: covering.name().to_string(),
        atom_count: d.atoms.len(),
        coeff_sum: d.coefficient_sum,
        decomposition: &d,
    };
    let kind = |k: AtomKind| match k {
        AtomKind::Local => "local",
        AtomKind::Cancellative => "cancellative",
    };
    let body = match fmt {
        Format::Json => output::json(&doc)?,
        Format::Csv => output::csv(
            &["function_id", "index", "lambda", "kind", "host", "lo", "hi", "level"],
            d.atoms.iter().enumerate().map(|(i, (l, a))| {
                vec![
                    doc.function_id.clone(),
                    i.to_string(),
                    num(*l),
                    kind(a.kind).into(),
                    a.host.to_string(),
                    num(a.lo),
                    num(a.hi),
                    a.level.to_string(),
                ]
            }),
        )?,
        Format::Text => {
            let mut s = format!(
                "function {}\ncovering {}\natoms {}\ncoefficient sum {}\nreconstruction error {}\n|f|_1 {}\n",
                doc.function_id,
                doc.covering,
                doc.atom_count,
                num(d.coefficient_sum),
                num(d.reconstruction_error),
                num(d.f_l1)
            );
            for (l, a) in &d.atoms {
                let _ = writeln!(
                    s,
                    "  {:<12} host {:>4} [{}, {}) level {:>2} lambda {}",
                    kind(a.kind),
                    a.host,
                    num(a.lo),
                    num(a.hi),
                    a.level,
                    num(*l)
                );
            }
            s
        }
    };
    Ok(Outcome::ok(body))
}

/// Assumption name, or `A8` for the partition-of-unity sum.
fn is_a8(s: &str) -> bool {
    s.trim().eq_ignore_ascii_case("a8")
}

pub fn verify_cmd(cfg: &RunConfig, fmt: Format, which: &str) -> Res {
    let family = cfg.family()?;
    let natural = cfg.covering.kind == CoveringKind::Natural;
    let report = if is_a8(which) {
        let (mut lo, mut hi) = cfg.window(Some(&family));
        let mut step = 0;
        loop {
            let covering = if natural {
                family.natural_covering(lo, hi)?
            } else {
                cfg.covering(Some(&family))?
            };
            let r = verify_lemma_a8(&family, &covering, &cfg.assumption)?;
            if r.stabilized || !natural || step >= cfg.covering.widen {
                break r;
            }
            step += 1;
            lo -= 1;
            hi += 1;
        }
    } else {
        let a: Assumption = which.parse()?;
        if natural {
            verify_assumption_widening(a, &family, cfg.window(Some(&family)), cfg.covering.widen, &cfg.assumption)?.0
        } else {
            verify_assumption(a, &family, &cfg.covering(Some(&family))?, &cfg.assumption)?
        }
    };
    let code = if report.flagged > 0 {
        EXIT_ACCURACY
    } else if !report.passed {
        EXIT_UNSTABLE
    } else {
        EXIT_OK
    };
    let body = match fmt {
        Format::Json => output::json(&report)?,
        Format::Csv => verify_csv(&report)?,
        Format::Text => verify_text(&report, which),
    };
    Ok(Outcome { body, code })
}

fn verify_csv(r: &AssumptionReport) -> Result<String, CliError> {
    output::csv(
        &[
            "assumption",
            "family",
            "covering",
            "cell",
            "label",
            "layer",
            "d_q",
            "y",
            "delta",
            "value",
            "normalized",
            "refinement",
            "flag",
        ],
        r.cells.iter().map(|c| {
            vec![
                r.assumption.clone(),
                r.family.clone(),
                r.covering.clone(),
                c.cell.to_string(),
                join(&c.label),
                c.layer.to_string(),
                num(c.d_q),
                nums(&c.y),
                opt(c.delta),
                num(c.value),
                num(c.normalized),
                opt(c.refinement),
                c.flag.clone().unwrap_or_default(),
            ]
        }),
    )
}

fn verify_text(r: &AssumptionReport, which: &str) -> String {
    let mut s = String::new();
    let what = which
        .parse::<Assumption>()
        .map(|a| a.describe())
        .unwrap_or("Σ_Q ∫_{Q**} |R_j(x,y)| |ψ_Q(x) - ψ_Q(y)| dx over the partition of unity");
    let _ = writeln!(s, "assumption {}: {}", r.assumption, what);
    let _ = writeln!(s, "family     {}", r.family);
    let _ = writeln!(s, "covering   {}", r.covering);
    let _ = writeln!(s, "cells      {} ({} flagged)", r.cells.len(), r.flagged);
    let _ = writeln!(s, "sup        {}", num(r.sup));
    let _ = writeln!(s, "core sup   {}", num(r.core_sup));
    let _ = writeln!(s, "drift      {}", num(r.drift));
    let _ = writeln!(s, "stabilized {}", r.stabilized);
    let k = &r.constants;
    let _ = writeln!(s, "C          {}", num(k.big_c));
    if let Some(c) = k.small_c {
        let _ = writeln!(s, "c          {}", num(c));
    }
    for g in &k.gaussian_fits {
        let _ = writeln!(
            s,
            "  c = {:<4} C = {} (core {}){}",
            num(g.c),
            num(g.big_c),
            num(g.core_big_c),
            if g.stable { "" } else { " unstable" }
        );
    }
    for f in &k.slopes {
        let _ = writeln!(
            s,
            "  delta {} slope {} expected {}{}",
            num(f.delta),
            num(f.slope),
            num(f.expected),
            match (f.checked, f.within) {
                (false, _) => " (not checked)",
                (true, true) => "",
                (true, false) => " out of tolerance",
            }
        );
    }
    if !k.deltas_skipped.is_empty() {
        let _ = writeln!(s, "  deltas skipped {}", nums(&k.deltas_skipped));
    }
    if let Some(c) = k.primed_c {
        let _ = writeln!(s, "primed c   {}", num(c));
    }
    for c in r.flagged_cells() {
        let _ = writeln!(
            s,
            "  flagged cell {} y = {}: {}",
            c.cell,
            nums(&c.y),
            c.flag.as_deref().unwrap_or_default()
        );
    }
    let _ = writeln!(s, "passed     {}", r.passed);
    s
}

#[derive(Serialize)]
struct CellDoc<'a> {
    index: usize,
    label: &'a [i64],
    center: &'a [f64],
    radii: &'a [f64],
    d_q: f64,
    layer: i64,
    neighbors: &'a [usize],
}

#[derive(Serialize)]
struct CoveringDoc<'a> {
    covering: &'a str,
    kappa: f64,
    cells: Vec<CellDoc<'a>>,
}

pub fn covering_dump_cmd(cfg: &RunConfig, fmt: Format) -> Res {
    let covering = natural_or_configured(cfg)?;
    let cells: Vec<CellDoc> = covering
        .cells()
        .iter()
        .enumerate()
        .map(|(i, q)| CellDoc {
            index: i,
            label: covering.label(i),
            center: &q.center,
            radii: &q.radii,
            d_q: q.diameter(),
            layer: covering.layer(i),
            neighbors: covering.neighbors(i),
        })
        .collect();
    let doc = CoveringDoc {
        covering: covering.name(),
        kappa: covering.kappa(),
        cells,
    };
    let body = match fmt {
        Format::Json => output::json(&doc)?,
        Format::Csv => output::csv(
            &["index", "label", "center", "radii", "d_q", "layer", "neighbors"],
            doc.cells.iter().map(|c| {
                vec![
                    c.index.to_string(),
                    join(c.label),
                    nums(c.center),
                    nums(c.radii),
                    num(c.d_q),
                    c.layer.to_string(),
                    join(c.neighbors),
                ]
            }),
        )?,
        Format::Text => {
            let mut s = format!("covering {} (kappa {}, {} cells)\n", doc.covering, num(doc.kappa), doc.cells.len());
            for c in &doc.cells {
                let _ = writeln!(
                    s,
                    "{:>5} center {} radii {} d_Q {} neighbors {}",
                    c.index,
                    nums(c.center),
                    nums(c.radii),
                    num(c.d_q),
                    join(c.neighbors)
                );
            }
            s
        }
    };
    Ok(Outcome::ok(body))
}

pub fn covering_check_cmd(cfg: &RunConfig, fmt: Format, samples: Option<usize>) -> Res {
    let covering = natural_or_configured(cfg)?;
    let report = verify_covering(&covering, samples.unwrap_or(cfg.assumption.covering_samples));
    let code = if report.passed { EXIT_OK } else { EXIT_USAGE };
    let body = match fmt {
        Format::Json => output::json(&report)?,
        Format::Csv => output::csv(
            &["covering", "item", "passed", "detail"],
            report
                .checks
                .iter()
                .map(|c| vec![report.covering.clone(), c.item.clone(), c.passed.to_string(), c.detail.clone()]),
        )?,
        Format::Text => {
            let mut s = format!("covering {} ({} cells, {} samples)\n", report.covering, report.cells, report.samples);
            for c in &report.checks {
                let _ = writeln!(s, "  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.item, c.detail);
            }
            let _ = writeln!(
                s,
                "aspect {} neighbor ratio {} boundary ratio {} overlap {}\npassed {}",
                num(report.aspect_constant),
                num(report.neighbor_ratio),
                num(report.boundary_ratio),
                report.overlap_constant,
                report.passed
            );
            s
        }
    };
    Ok(Outcome { body, code })
}

fn natural_or_configured(cfg: &RunConfig) -> Result<AdmissibleCovering, CliError> {
    let family = match cfg.covering.kind {
        CoveringKind::Natural => Some(cfg.family()?),
        _ => None,
    };
    cfg.covering(family.as_ref())
}
