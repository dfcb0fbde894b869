//! `permlab`: exact and asymptotic permanents of block-uniform matrices.
//!
//! Exit status is 0 on success, 1 on bad input or a failed computation, and
//! 2 when a verification subcommand ran but its checks failed.

mod input;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use permlab_core::asymptotics::{predict_ratio, verify_sweep, SweepOptions, SweepReport};
use permlab_core::fluctuations::{spectrum_pairing_check, verify_lemma_identity, FluctuationModel};
use permlab_core::kernel::{
    bridge_potentials, conjecture_trend, fredholm_determinant, KernelFamily, KernelSpec,
    TrendOptions,
};
use permlab_core::logmath::log_factorial;
use permlab_core::permanent::{
    expand_blocks, permanent_naive, permanent_ryser_with, RyserOptions, RYSER_MAX_DIM,
};
use permlab_core::scaling::{sinkhorn_scale, DEFAULT_MAX_ITER, DEFAULT_TOL};
use permlab_core::tables::{block_permanent_ratio_with, EnumerationOptions, DEFAULT_TABLE_BUDGET};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "permlab",
    version,
    about = "Exact and asymptotic permanents of block-uniform matrices"
)]
struct Cli {
    /// Worker threads for the exact kernels (results do not depend on it).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sinkhorn-scale a seed and print v, w, t as JSON.
    Scale {
        #[command(flatten)]
        seed: SeedArgs,
        #[command(flatten)]
        scaling: ScalingArgs,
    },
    /// ln[perm(A)/(mn)!] for the block expansion of a seed.
    Perm {
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long, value_enum, default_value_t = Method::Pinsky)]
        method: Method,
        /// Block size.
        #[arg(long)]
        n: u32,
        /// Accept zero entries (contingency-table method only).
        #[arg(long)]
        allow_zero: bool,
        /// Largest matrix order for the Ryser method.
        #[arg(long, default_value_t = RYSER_MAX_DIM)]
        max_dim: usize,
        /// Cap on the estimated number of contingency tables.
        #[arg(long, default_value_t = DEFAULT_TABLE_BUDGET)]
        budget: f64,
    },
    /// Leading term, fluctuation determinant and predicted log-ratio.
    Predict {
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        n: u32,
        #[command(flatten)]
        scaling: ScalingArgs,
    },
    /// Exact against predicted log-ratio over a list of block sizes.
    Sweep {
        #[command(flatten)]
        seed: SeedArgs,
        /// Strictly increasing block sizes, e.g. 10,100,1000.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u32>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, default_value_t = DEFAULT_TABLE_BUDGET)]
        budget: f64,
        #[command(flatten)]
        scaling: ScalingArgs,
    },
    /// Fluctuation objects of the scaled seed, or with --verify the
    /// determinant identities and spectrum check.
    Fluct {
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long)]
        verify: bool,
        /// Relative tolerance for the identities.
        #[arg(long, default_value_t = 1e-9)]
        identity_tol: f64,
        #[command(flatten)]
        scaling: ScalingArgs,
    },
    /// Discretized cost kernels: bridge and Fredholm determinant, or the
    /// exact-vs-predicted trend.
    Kernel(KernelArgs),
}

#[derive(Debug, Args)]
struct SeedArgs {
    /// Seed JSON: {"m": <int>, "entries": [[...], ...]}.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct ScalingArgs {
    /// Sinkhorn stopping tolerance on row and column residuals.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
}

#[derive(Debug, Args)]
struct KernelArgs {
    #[arg(long, value_enum)]
    mode: KernelMode,
    #[arg(long, value_enum)]
    family: Family,
    /// Amplitude for cosine and gaussian-bump.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Width for gaussian-bump.
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    /// Seed JSON for the block family.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Grid CSV for the grid family: first line N, then N rows of N values.
    #[arg(long)]
    grid_file: Option<PathBuf>,
    /// Grid size for fredholm mode.
    #[arg(long, default_value_t = 128)]
    grid: usize,
    /// Matrix sizes for trend mode.
    #[arg(long, value_delimiter = ',')]
    n: Vec<u32>,
    /// Grid for the refined Fredholm determinant in trend mode.
    #[arg(long, default_value_t = permlab_core::kernel::DEFAULT_REFINED_GRID)]
    refined_grid: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    scaling: ScalingArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Naive,
    Ryser,
    Pinsky,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KernelMode {
    Fredholm,
    Trend,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Zero,
    Cosine,
    GaussianBump,
    Block,
    Grid,
}

/// Rendered report plus whether every requested check passed.
struct Outcome {
    text: String,
    verified: bool,
}

impl Outcome {
    fn json<T: Serialize>(value: &T) -> Result<Self> {
        Ok(Self {
            text: serde_json::to_string_pretty(value)? + "\n",
            verified: true,
        })
    }
}

fn check_tolerance(s: &ScalingArgs) -> Result<()> {
    if s.tol.is_nan() || s.tol <= 0.0 {
        bail!("--tol must be positive, got {}", s.tol);
    }
    if s.max_iter == 0 {
        bail!("--max-iter must be positive");
    }
    Ok(())
}

fn check_sizes(ns: &[u32]) -> Result<()> {
    if ns.is_empty() {
        bail!("--n needs at least one block size");
    }
    if ns[0] == 0 {
        bail!("block sizes must be positive");
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        bail!("block sizes must be strictly increasing, got {ns:?}");
    }
    Ok(())
}

#[derive(Serialize)]
struct PermReport {
    method: &'static str,
    m: usize,
    n: u32,
    log_ratio: f64,
    log_permanent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    table_count: Option<u64>,
}

#[derive(Serialize)]
struct PredictReport {
    m: usize,
    n: u32,
    log_leading: f64,
    fluct_det: f64,
    log_predicted_ratio: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    pass: bool,
    lemma: permlab_core::fluctuations::IdentityReport,
    spectrum: permlab_core::fluctuations::SpectrumReport,
}

#[derive(Serialize)]
struct FredholmReport {
    grid: usize,
    lambda_rate: f64,
    fredholm_determinant: f64,
    residual: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

fn sweep_text(report: &SweepReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Csv => report.to_csv_string()?,
        Format::Json => report.to_json()? + "\n",
    })
}

fn run(cli: &Cli) -> Result<Outcome> {
    if cli.workers == 0 {
        bail!("--workers must be at least 1");
    }
    match &cli.command {
        Command::Scale { seed, scaling } => {
            check_tolerance(scaling)?;
            let b = input::read_positive_seed(&seed.input)?;
            Outcome::json(&sinkhorn_scale(&b, scaling.tol, scaling.max_iter)?)
        }
        Command::Perm {
            seed,
            method,
            n,
            allow_zero,
            max_dim,
            budget,
        } => {
            let b = if *allow_zero {
                if !matches!(method, Method::Pinsky) {
                    bail!("--allow-zero is only supported with --method pinsky");
                }
                input::read_seed(&seed.input)?
            } else {
                input::read_positive_seed(&seed.input)?.matrix().clone()
            };
            if *n == 0 {
                bail!("--n must be positive");
            }
            let m = b.rows();
            let log_mn_fact = log_factorial(m as u64 * *n as u64);
            let (name, log_ratio, table_count) = match method {
                Method::Pinsky => {
                    let opts = EnumerationOptions {
                        budget: *budget,
                        workers: cli.workers,
                    };
                    let r = block_permanent_ratio_with(&b, *n, &opts)?;
                    ("pinsky", r.log_ratio, Some(r.table_count))
                }
                Method::Naive => {
                    let a = expand_blocks(&b, *n as usize)?;
                    (
                        "naive",
                        permanent_naive(a.matrix())?.ln() - log_mn_fact,
                        None,
                    )
                }
                Method::Ryser => {
                    let a = expand_blocks(&b, *n as usize)?;
                    let opts = RyserOptions {
                        max_dim: *max_dim,
                        workers: cli.workers,
                    };
                    (
                        "ryser",
                        permanent_ryser_with(a.matrix(), &opts)?.ln() - log_mn_fact,
                        None,
                    )
                }
            };
            Outcome::json(&PermReport {
                method: name,
                m,
                n: *n,
                log_ratio,
                log_permanent: log_ratio + log_mn_fact,
                table_count,
            })
        }
        Command::Predict { seed, n, scaling } => {
            check_tolerance(scaling)?;
            let b = input::read_positive_seed(&seed.input)?;
            let sol = sinkhorn_scale(&b, scaling.tol, scaling.max_iter)?;
            let p = predict_ratio(&b, *n, &sol)?;
            Outcome::json(&PredictReport {
                m: b.m(),
                n: *n,
                log_leading: p.log_leading,
                fluct_det: p.fluct_det,
                log_predicted_ratio: p.log_predicted_ratio,
            })
        }
        Command::Sweep {
            seed,
            n,
            format,
            budget,
            scaling,
        } => {
            check_tolerance(scaling)?;
            check_sizes(n)?;
            let b = input::read_positive_seed(&seed.input)?;
            let opts = SweepOptions {
                enumeration: EnumerationOptions {
                    budget: *budget,
                    workers: cli.workers,
                },
                tol: scaling.tol,
                max_iter: scaling.max_iter,
            };
            let report = verify_sweep(&b, n, &opts)?;
            Ok(Outcome {
                text: sweep_text(&report, *format)?,
                verified: true,
            })
        }
        Command::Fluct {
            seed,
            verify,
            identity_tol,
            scaling,
        } => {
            check_tolerance(scaling)?;
            if identity_tol.is_nan() || *identity_tol <= 0.0 {
                bail!("--identity-tol must be positive");
            }
            let b = input::read_positive_seed(&seed.input)?;
            let sol = sinkhorn_scale(&b, scaling.tol, scaling.max_iter)?;
            if *verify {
                let lemma = verify_lemma_identity(sol.t(), *identity_tol)?;
                let spectrum = spectrum_pairing_check(sol.t())?;
                let pass = lemma.pass && spectrum.pass;
                let mut out = Outcome::json(&VerifyReport {
                    pass,
                    lemma,
                    spectrum,
                })?;
                out.verified = pass;
                Ok(out)
            } else {
                Outcome::json(&FluctuationModel::new(sol.t())?)
            }
        }
        Command::Kernel(k) => run_kernel(k, cli.workers),
    }
}

fn build_kernel(k: &KernelArgs) -> Result<KernelSpec> {
    Ok(match k.family {
        Family::Zero => KernelSpec::zero(),
        Family::Cosine => KernelSpec::cosine(k.eps)?,
        Family::GaussianBump => KernelSpec::gaussian_bump(k.eps, k.sigma)?,
        Family::Block => {
            let path = k.input.as_deref().context("--family block needs --input")?;
            KernelSpec::new(KernelFamily::Block {
                b: input::read_positive_seed(path)?.matrix().clone(),
            })?
        }
        Family::Grid => {
            let path = k
                .grid_file
                .as_deref()
                .context("--family grid needs --grid-file")?;
            let file = std::fs::File::open(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            KernelSpec::from_grid_csv(file)
                .with_context(|| format!("malformed grid file {}", path.display()))?
        }
    })
}

fn run_kernel(k: &KernelArgs, workers: usize) -> Result<Outcome> {
    check_tolerance(&k.scaling)?;
    let kernel = build_kernel(k)?;
    match k.mode {
        KernelMode::Fredholm => {
            if k.grid == 0 {
                bail!("--grid must be positive");
            }
            let bridge = bridge_potentials(&kernel, k.grid, k.scaling.tol, k.scaling.max_iter)?;
            let det = fredholm_determinant(&bridge)?;
            Outcome::json(&FredholmReport {
                grid: k.grid,
                lambda_rate: bridge.lambda_rate,
                fredholm_determinant: det,
                residual: bridge.residual,
                alpha: bridge.alpha,
                beta: bridge.beta,
            })
        }
        KernelMode::Trend => {
            check_sizes(&k.n)?;
            let opts = TrendOptions {
                refined_grid: k.refined_grid,
                tol: k.scaling.tol,
                max_iter: k.scaling.max_iter,
                ryser: RyserOptions {
                    workers,
                    ..Default::default()
                },
            };
            let report = conjecture_trend(&kernel, &k.n, &opts)?;
            let text = match k.format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    report.write_csv(&mut buf)?;
                    String::from_utf8(buf)?
                }
                Format::Json => serde_json::to_string_pretty(&report)? + "\n",
            };
            Ok(Outcome {
                text,
                verified: true,
            })
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own status for usage errors is 2, which is reserved here
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = run(&cli).and_then(|o| emit(&o.text, cli.out.as_deref()).map(|_| o.verified));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("permlab: verification failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("permlab: {e:#}");
            ExitCode::from(1)
        }
    }
}
