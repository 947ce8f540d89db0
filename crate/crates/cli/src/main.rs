//! `hardy`: command-line front end for the hardy-core toolkit.
//!
//! Settings come from a TOML run configuration (`--config` or
//! `HARDY_CONFIG`) overridden by flags. Exit codes: 0 success, 1 usage or
//! input error, 2 accuracy failure, 3 assumption check not stabilized.

mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{CoveringKind, RunConfig};
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "hardy",
    version,
    about = "Hardy spaces H¹ attached to semigroups e^{-tL} on X = X_1 × … × X_N",
    long_about = "Hardy spaces H¹ attached to semigroups e^{-tL} on X = X_1 × … × X_N: heat kernels \
                  T_t(x,y), Riesz transforms, maximal functions, atomic decompositions over admissible \
                  coverings and numerical checks of the kernel assumptions.\n\n\
                  Exit codes: 0 success, 1 usage or input error, 2 accuracy failure or flagged cells, \
                  3 assumption check not stabilized."
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, env = "HARDY_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output format (default: text, or output.format of the config).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write the report to a file instead of stdout.
    #[arg(long, short = 'o', global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct FamilyArgs {
    /// Semigroup: heat, dirichlet, bessel, laguerre, or a comma list for a
    /// product (e.g. `heat,bessel`).
    #[arg(long)]
    family: Option<String>,

    /// β parameters of the Bessel and Laguerre factors, in factor order.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    beta: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct CoveringArgs {
    /// Covering kind; `natural` follows the family.
    #[arg(long, value_enum)]
    covering: Option<CoveringKind>,

    /// Lowest covering index (scale n or position m).
    #[arg(long, allow_negative_numbers = true)]
    lo: Option<i32>,

    /// Highest covering index.
    #[arg(long, allow_negative_numbers = true)]
    hi: Option<i32>,

    /// Enlargement factor κ of Q* = κQ.
    #[arg(long)]
    kappa: Option<f64>,

    /// Cell width of the uniform covering.
    #[arg(long)]
    width: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Heat kernel T_t(x,y) of the semigroup e^{-tL}, with ln T_t(x,y).
    KernelEval {
        #[command(flatten)]
        family: FamilyArgs,
        /// Time t > 0.
        #[arg(long)]
        t: f64,
        /// Point x (comma-separated coordinates).
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Point y (comma-separated coordinates).
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        /// Also print ∂_{x_j} T_t(x,y) for this coordinate.
        #[arg(long, value_name = "J")]
        dx: Option<usize>,
    },

    /// Riesz transform kernel R_j(x,y) = π^{-1/2} ∫_0^∞ (∂_{x_j} + V_j(x)) T_t(x,y) dt/√t.
    RieszKernel {
        #[command(flatten)]
        family: FamilyArgs,
        /// Coordinate j.
        #[arg(long, default_value_t = 0)]
        j: usize,
        /// Pole y (comma-separated coordinates).
        #[arg(long, allow_hyphen_values = true)]
        y: String,
        /// Evaluation point x; repeat for several.
        #[arg(long, allow_hyphen_values = true)]
        x: Vec<String>,
        /// `lo:hi:n` grid along coordinate j, other coordinates taken from y.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },

    /// Riesz transform R_j f = (∂_j + V_j) L^{-1/2} f of a profile, as a principal value.
    RieszApply {
        #[command(flatten)]
        family: FamilyArgs,
        /// Coordinate j.
        #[arg(long, default_value_t = 0)]
        j: usize,
        /// Input profile: gaussian(c,σ[,amp]), indicator(a,b[,h]), haar(a,b[,h]) or lorentzian(c,w[,amp]).
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        /// Output grid `lo:hi:n` (default: grid adapted to f).
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },

    /// Semigroup maximal function M f(x) = sup_{t>0} |T_t f(x)| of a profile.
    Maximal {
        #[command(flatten)]
        family: FamilyArgs,
        /// Input profile (see riesz-apply).
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        /// Output grid `lo:hi:n` (default: grid adapted to f).
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// Points per decade of the t-grid.
        #[arg(long)]
        per_decade: Option<usize>,
    },

    /// H¹ norms of a function suite: maximal ‖Mf‖₁, Riesz ‖f‖₁ + ‖Rf‖₁ and atomic Σ|λ_k|, with their ratios.
    Norms {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        covering: CoveringArgs,
        /// JSON suite: [{"id": …, "profile": {"type": "gaussian", …}}, …].
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Extra profile; repeat for several.
        #[arg(long, allow_hyphen_values = true)]
        f: Vec<String>,
    },

    /// Atomic decomposition f = Σ λ_k a_k into Q-atoms of the covering.
    Decompose {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        covering: CoveringArgs,
        /// Input profile (see riesz-apply).
        #[arg(long, allow_hyphen_values = true)]
        f: String,
        /// Relative remainder mass below which intervals are not refined.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Deepest dyadic level below Q**.
        #[arg(long)]
        max_level: Option<u32>,
    },

    /// Kernel assumptions A0–A6 (and primed variants, or A8, the partition-of-unity
    /// sum for Riesz kernels) evaluated cell by cell on the covering.
    Verify {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        covering: CoveringArgs,
        /// A0 … A6, A2' … A5' (or A2p …), or A8.
        #[arg(long)]
        assumption: String,
        /// Extra scales per side tried until the sup stabilizes.
        #[arg(long)]
        widen: Option<usize>,
        /// Exponent bound γ of the δ's.
        #[arg(long)]
        gamma: Option<f64>,
        /// Exponents δ for A1 and A2.
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        /// y-samples per axis of Q** (1, 3 or 5).
        #[arg(long)]
        y_samples: Option<usize>,
        /// Cells checked per scale.
        #[arg(long)]
        cells_per_scale: Option<usize>,
        /// Constant c of the primed variants.
        #[arg(long)]
        c: Option<f64>,
    },

    /// Admissible coverings {Q} of X.
    Covering {
        #[command(subcommand)]
        action: CoveringCommand,
    },
}

#[derive(Debug, Subcommand)]
enum CoveringCommand {
    /// Cells Q of the covering: center, radii, d_Q and neighbour indices.
    Dump {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        covering: CoveringArgs,
    },
    /// Admissibility checks: covering, comparability of neighbours and finite overlap of Q***.
    Check {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        covering: CoveringArgs,
        /// Sample points for the pointwise checks.
        #[arg(long)]
        samples: Option<usize>,
    },
}

impl FamilyArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(f) = &self.family {
            cfg.family.name = f.clone();
            if self.beta.is_none() {
                cfg.family.beta.clear();
            }
        }
        if let Some(b) = &self.beta {
            cfg.family.beta = b.clone();
        }
    }
}

impl CoveringArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let c = &mut cfg.covering;
        if let Some(k) = self.covering {
            c.kind = k;
        }
        if self.lo.is_some() {
            c.lo = self.lo;
        }
        if self.hi.is_some() {
            c.hi = self.hi;
        }
        if let Some(k) = self.kappa {
            c.kappa = k;
        }
        if let Some(w) = self.width {
            c.width = w;
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<(Outcome, Option<PathBuf>), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let fmt = cli.format.unwrap_or(cfg.output.format);
    let out = cli.output.clone().or_else(|| cfg.output.path.clone().map(PathBuf::from));
    let outcome = match cli.command {
        Command::KernelEval { family, t, x, y, dx } => {
            family.apply(&mut cfg);
            cfg.validate()?;
            commands::kernel_eval_cmd(&cfg, fmt, t, &x, &y, dx)?
        }
        Command::RieszKernel { family, j, y, x, grid } => {
            family.apply(&mut cfg);
            cfg.validate()?;
            commands::riesz_kernel_cmd(&cfg, fmt, j, &y, &x, grid.as_deref())?
        }
        Command::RieszApply { family, j, f, grid } => {
            family.apply(&mut cfg);
            cfg.validate()?;
            commands::riesz_apply_cmd(&cfg, fmt, j, &f, grid.as_deref())?
        }
        Command::Maximal {
            family,
            f,
            grid,
            per_decade,
        } => {
            family.apply(&mut cfg);
            set(&mut cfg.transform.per_decade, per_decade);
            cfg.validate()?;
            commands::maximal_cmd(&cfg, fmt, &f, grid.as_deref())?
        }
        Command::Norms {
            family,
            covering,
            suite,
            f,
        } => {
            family.apply(&mut cfg);
            covering.apply(&mut cfg);
            cfg.validate()?;
            commands::norms_cmd(&cfg, fmt, suite, &f)?
        }
        Command::Decompose {
            family,
            covering,
            f,
            tolerance,
            max_level,
        } => {
            family.apply(&mut cfg);
            covering.apply(&mut cfg);
            set(&mut cfg.decompose.tolerance, tolerance);
            set(&mut cfg.decompose.max_level, max_level);
            cfg.validate()?;
            commands::decompose_cmd(&cfg, fmt, &f)?
        }
        Command::Verify {
            family,
            covering,
            assumption,
            widen,
            gamma,
            deltas,
            y_samples,
            cells_per_scale,
            c,
        } => {
            family.apply(&mut cfg);
            covering.apply(&mut cfg);
            set(&mut cfg.covering.widen, widen);
            let a = &mut cfg.assumption;
            set(&mut a.gamma, gamma);
            set(&mut a.deltas, deltas);
            set(&mut a.y_samples, y_samples);
            set(&mut a.cells_per_scale, cells_per_scale);
            set(&mut a.c, c);
            cfg.validate()?;
            commands::verify_cmd(&cfg, fmt, &assumption)?
        }
        Command::Covering { action } => match action {
            CoveringCommand::Dump { family, covering } => {
                family.apply(&mut cfg);
                covering.apply(&mut cfg);
                cfg.validate()?;
                commands::covering_dump_cmd(&cfg, fmt)?
            }
            CoveringCommand::Check {
                family,
                covering,
                samples,
            } => {
                family.apply(&mut cfg);
                covering.apply(&mut cfg);
                cfg.validate()?;
                commands::covering_check_cmd(&cfg, fmt, samples)?
            }
        },
    };
    Ok((outcome, out))
}

fn emit(outcome: &Outcome, path: Option<PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(&p, &outcome.body).map_err(|e| CliError::Io(p.display().to_string(), e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(outcome.body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io("stdout".into(), e))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK } as u8);
        }
    };
    let code = match run(cli).and_then(|(o, path)| emit(&o, path).map(|_| o.code)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
