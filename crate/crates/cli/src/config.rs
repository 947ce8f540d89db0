//! Run configuration: a TOML file merged under command-line flags.

use std::path::Path;

use hardy_core::geometry::{AdmissibleCovering, CoveringSpec};
use hardy_core::hardy::DecomposeConfig;
use hardy_core::kernels::{FactorSpec, KernelFamily};
use hardy_core::transforms::{Profile, TransformConfig};
use hardy_core::verifier::{default_range, AssumptionConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::Format;

pub const DEFAULT_KAPPA: f64 = 9.0 / 8.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilyConfig,
    pub covering: CoveringConfig,
    pub transform: TransformConfig,
    pub assumption: AssumptionConfig,
    pub decompose: DecomposeConfig,
    pub suite: SuiteConfig,
    pub output: OutputConfig,
}

/// Comma list of factor names; `beta` is consumed in order by the
/// Bessel and Laguerre factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub name: String,
    pub beta: Vec<f64>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            name: "heat".into(),
            beta: vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CoveringKind {
    /// The covering adapted to the family.
    Natural,
    Dyadic,
    Laguerre,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoveringConfig {
    pub kind: CoveringKind,
    /// Index window; the family default when absent.
    pub lo: Option<i32>,
    pub hi: Option<i32>,
    pub kappa: f64,
    /// Cell width of the uniform covering.
    pub width: f64,
    /// Extra scales per side tried by `verify` until stabilization.
    pub widen: usize,
}

impl Default for CoveringConfig {
    fn default() -> Self {
        CoveringConfig {
            kind: CoveringKind::Natural,
            lo: None,
            hi: None,
            kappa: DEFAULT_KAPPA,
            width: 1.0,
            widen: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Format,
    pub path: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            format: Format::Text,
            path: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message().trim())))?;
        Ok(cfg)
    }

    /// Checks every section; messages name the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        if let Err(e) = self.family() {
            return bad("family", e.to_string());
        }
        let c = &self.covering;
        if !(c.kappa > 1.0) {
            return bad("covering.kappa", format!("must exceed 1, got {}", c.kappa));
        }
        if !(c.width > 0.0) {
            return bad("covering.width", format!("must be positive, got {}", c.width));
        }
        if let (Some(lo), Some(hi)) = (c.lo, c.hi) {
            if lo > hi {
                return bad("covering.lo", format!("{lo} exceeds covering.hi = {hi}"));
            }
        }
        for (name, q) in [("transform.kernel", &self.transform.kernel), ("transform.outer", &self.transform.outer)] {
            if let Err(e) = q.validate() {
                return bad(name, e.to_string());
            }
        }
        if self.transform.per_decade < 2 {
            return bad("transform.per_decade", "must be at least 2".into());
        }
        if let Err(e) = self.assumption.validate() {
            return bad("assumption", e.to_string());
        }
        let d = &self.decompose;
        if !(d.tolerance > 0.0) {
            return bad("decompose.tolerance", "must be positive".into());
        }
        if !(d.sup_margin >= 1.0) {
            return bad("decompose.sup_margin", "must be at least 1".into());
        }
        if d.sup_samples < 3 {
            return bad("decompose.sup_samples", "must be at least 3".into());
        }
        Ok(())
    }

    pub fn family(&self) -> Result<KernelFamily, CliError> {
        parse_family(&self.family.name, &self.family.beta)
    }

    /// The configured covering; `family` picks the natural covering and
    /// the default window.
    pub fn covering(&self, family: Option<&KernelFamily>) -> Result<AdmissibleCovering, CliError> {
        let (lo, hi) = self.window(family);
        let c = &self.covering;
        let spec = match c.kind {
            CoveringKind::Natural => {
                let f = match family {
                    Some(f) => f.clone(),
                    None => self.family()?,
                };
                return Ok(f.natural_covering(lo, hi)?);
            }
            CoveringKind::Dyadic => CoveringSpec::Dyadic { n_min: lo, n_max: hi },
            CoveringKind::Laguerre => CoveringSpec::Laguerre { n_min: lo, n_max: hi },
            CoveringKind::Uniform => CoveringSpec::Uniform {
                width: c.width,
                m_min: lo as i64,
                m_max: hi as i64,
            },
        };
        Ok(AdmissibleCovering::from_spec(spec, c.kappa)?)
    }

    pub fn window(&self, family: Option<&KernelFamily>) -> (i32, i32) {
        let (dlo, dhi) = match (family, self.covering.kind) {
            (Some(f), CoveringKind::Natural) => default_range(f),
            (_, CoveringKind::Laguerre) => (-8, 3),
            _ => (-4, 4),
        };
        (self.covering.lo.unwrap_or(dlo), self.covering.hi.unwrap_or(dhi))
    }
}

pub fn parse_family(names: &str, betas: &[f64]) -> Result<KernelFamily, CliError> {
    let mut betas = betas.iter().copied();
    let mut specs = vec![];
    for name in names.split(',').map(str::trim) {
        let mut beta = |n: &str| {
            betas
                .next()
                .ok_or_else(|| CliError::Usage(format!("family {n} needs a beta value")))
        };
        specs.push(match name.to_ascii_lowercase().as_str() {
            "heat" => FactorSpec::Heat,
            "dirichlet" => FactorSpec::Dirichlet,
            "bessel" => FactorSpec::Bessel { beta: beta("bessel")? },
            "laguerre" => FactorSpec::Laguerre { beta: beta("laguerre")? },
            other => {
                return Err(CliError::Usage(format!(
                    "unknown family {other:?} (expected heat, dirichlet, bessel or laguerre)"
                )))
            }
        });
    }
    if betas.next().is_some() {
        return Err(CliError::Usage("more beta values than bessel/laguerre factors".into()));
    }
    Ok(KernelFamily::from_specs(&specs)?)
}

/// A point `a,b,…` of `X`.
pub fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad coordinate {v:?} in point {s:?}")))
        })
        .collect()
}

/// `lo:hi:n`, `n ≥ 2` equally spaced points.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let err = || CliError::Usage(format!("grid {s:?} is not of the form lo:hi:n with n >= 2"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(err());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| err())?;
    let n: usize = parts[2].trim().parse().map_err(|_| err())?;
    if n < 2 || !(lo < hi) {
        return Err(err());
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

/// `gaussian(center,sigma[,amp])`, `indicator(lo,hi[,height])`,
/// `haar(lo,hi[,height])` or `lorentzian(center,width[,amp])`.
pub fn parse_profile(s: &str) -> Result<Profile, CliError> {
    let err = |msg: &str| CliError::Usage(format!("profile {s:?}: {msg}"));
    let s = s.trim();
    let open = s.find('(').ok_or_else(|| err("expected name(args)"))?;
    if !s.ends_with(')') {
        return Err(err("missing closing parenthesis"));
    }
    let name = s[..open].trim().to_ascii_lowercase();
    let args = parse_point(&s[open + 1..s.len() - 1]).map_err(|_| err("arguments must be numbers"))?;
    if !(2..=3).contains(&args.len()) {
        return Err(err("expected two or three arguments"));
    }
    let third = args.get(2).copied().unwrap_or(1.0);
    let p = match name.as_str() {
        "gaussian" => Profile::Gaussian {
            center: args[0],
            sigma: args[1],
            amp: third,
        },
        "indicator" => Profile::Indicator {
            lo: args[0],
            hi: args[1],
            height: third,
        },
        "haar" => Profile::Haar {
            lo: args[0],
            hi: args[1],
            height: third,
        },
        "lorentzian" => Profile::Lorentzian {
            center: args[0],
            width: args[1],
            amp: third,
        },
        _ => return Err(err("unknown profile (gaussian, indicator, haar, lorentzian)")),
    };
    p.validate()?;
    Ok(p)
}

/// Suite file entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub id: String,
    pub profile: Profile,
}

/// A JSON array of `{"id": …, "profile": {"type": …}}` entries.
pub fn load_suite(path: &Path) -> Result<Vec<SuiteEntry>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    let suite: Vec<SuiteEntry> =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for entry in &suite {
        entry.profile.validate()?;
    }
    Ok(suite)
}
