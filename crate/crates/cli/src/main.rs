use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hhf_cli::{
    metric_factor, read_matrix_file, run_apply, run_bench, run_bounds, run_metric_demo, run_ortho_sweep, run_sym_sweep,
    save_factor, Ensemble, MetricDemo, OrthoMethod, Source, SweepSpec, SymMethod,
};
use householder::metric::BlobSpec;

#[derive(Parser)]
#[command(name = "hhf", version, about = "Householder reflector factorizations: sweeps, bounds, benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Matrix dimension.
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// Single reflector count (overrides --h-min/--h-max).
    #[arg(long)]
    h: Option<usize>,
    #[arg(long, default_value_t = 0)]
    h_min: usize,
    #[arg(long)]
    h_max: Option<usize>,
    /// Realizations; realization i uses seed `seed + i`.
    #[arg(long, default_value_t = 100)]
    seeds: usize,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn spec(&self, source: Source, default_h_max: usize) -> Result<SweepSpec> {
        let (lo, hi) = match self.h {
            Some(h) => (h, h),
            None => (self.h_min, self.h_max.unwrap_or(default_h_max)),
        };
        SweepSpec::new(self.n, lo, hi, self.seeds, self.seed, source)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Orthonormal approximation sweep.
    Ortho {
        #[command(flatten)]
        common: Common,
        /// Comma-separated: constrained, unconstrained, unconstrained-d, qr-baseline.
        #[arg(long, value_delimiter = ',', default_value = "constrained,unconstrained")]
        method: Vec<OrthoMethod>,
        #[arg(long, default_value = "haar")]
        ensemble: Ensemble,
        /// Approximate this CSV matrix instead of sampling.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Save the factor (single h and method only).
        #[arg(long)]
        factor_out: Option<PathBuf>,
    },
    /// Symmetric approximation sweep.
    Sym {
        #[command(flatten)]
        common: Common,
        /// Comma-separated: shf, shf-su, eig-baseline.
        #[arg(long, value_delimiter = ',', default_value = "shf,shf-su,eig-baseline")]
        method: Vec<SymMethod>,
        #[arg(long, default_value = "indefinite")]
        ensemble: Ensemble,
        /// Maximum outer iterations.
        #[arg(long, default_value_t = 100)]
        iters: usize,
        /// Write per-iteration errors to this CSV file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        factor_out: Option<PathBuf>,
    },
    /// Closed-form bounds against Monte-Carlo means.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// `haar` for the orthonormal bound, `indefinite`/`posdef` for the
        /// baseline identity.
        #[arg(long, default_value = "haar")]
        ensemble: Ensemble,
    },
    /// Dense versus factored apply.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Timing repetitions.
        #[arg(long, default_value_t = 100)]
        iters: usize,
    },
    /// Metric learning demo on blobs or a labeled CSV.
    Metric {
        #[command(flatten)]
        common: Common,
        /// Training iterations (half dense, half projected).
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 600)]
        points: usize,
        /// CSV with coordinates then an integer label per row.
        #[arg(long)]
        input: Option<PathBuf>,
        /// The input CSV has a header row.
        #[arg(long)]
        header: bool,
        /// Save the last projected metric.
        #[arg(long)]
        factor_out: Option<PathBuf>,
    },
    /// Apply a stored factor to a CSV vector.
    Apply {
        /// HHF1 factor file.
        #[arg(long)]
        factor: PathBuf,
        /// Vector as one CSV row or column.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn source(ensemble: Ensemble, input: Option<&Path>) -> Result<Source> {
    Ok(match input {
        Some(path) => Source::Matrix(read_matrix_file(path)?),
        None => Source::Ensemble(ensemble),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ortho {
            common,
            method,
            ensemble,
            input,
            factor_out,
        } => {
            let spec = common.spec(source(ensemble, input.as_deref())?, common.n)?;
            let csv = run_ortho_sweep(&spec, &method, factor_out.as_deref())?;
            emit(common.out.as_deref(), &csv)
        }
        Command::Sym {
            common,
            method,
            ensemble,
            iters,
            trace,
            input,
            factor_out,
        } => {
            let spec = common.spec(source(ensemble, input.as_deref())?, common.n / 2)?;
            let res = run_sym_sweep(&spec, &method, iters, factor_out.as_deref())?;
            if let Some(path) = trace {
                emit(Some(&path), &res.traces)?;
            }
            emit(common.out.as_deref(), &res.table)
        }
        Command::Bounds { common, ensemble } => {
            let spec = common.spec(Source::Ensemble(ensemble), common.n)?;
            let sym = (ensemble != Ensemble::Haar).then_some(ensemble);
            emit(common.out.as_deref(), &run_bounds(&spec, sym)?)
        }
        Command::Bench { common, iters } => {
            let spec = common.spec(Source::Ensemble(Ensemble::Haar), common.n / 2)?;
            emit(common.out.as_deref(), &run_bench(&spec, iters)?)
        }
        Command::Metric {
            common,
            iters,
            k,
            classes,
            points,
            input,
            header,
            factor_out,
        } => {
            let h = common.h.unwrap_or(3);
            let spec = common.spec(Source::Ensemble(Ensemble::Posdef), h)?;
            let demo = MetricDemo {
                h,
                iters,
                k,
                input,
                header,
                blobs: BlobSpec {
                    classes,
                    points,
                    ..BlobSpec::default()
                },
            };
            let (csv, model) = run_metric_demo(&spec, &demo)?;
            if let Some(path) = factor_out {
                save_factor(&path, &metric_factor(&model)?)?;
            }
            emit(common.out.as_deref(), &csv)
        }
        Command::Apply { factor, input, out } => emit(out.as_deref(), &run_apply(&factor, &input)?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
