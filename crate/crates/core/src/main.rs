use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nlspike::coefficients::{default_tolerance, info_index, NonlinearitySpec, DEFAULT_K_MAX};
use nlspike::distributions::{NoiseSpec, SignalSpec};
use nlspike::harness::{self, emit, emit_spectrum, Experiment, ExperimentConfig, TableRow};
use nlspike::theory::predict_from_report;
use nlspike::{Error, Result};

/// Non-linear spiked Wigner models: coefficients, predictions and experiments.
#[derive(Parser)]
#[command(name = "nlspike", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Information coefficients, index and noise scale as JSON.
    Coeffs {
        #[arg(long)]
        f: String,
        #[arg(long, default_value = "gaussian")]
        noise: String,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        kmax: usize,
        /// Index-detection tolerance (default 1e-8·max(1, ‖f‖)).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Limits of the leading eigenpair as JSON.
    Predict {
        #[arg(long)]
        f: String,
        #[arg(long, default_value = "gaussian")]
        noise: String,
        #[arg(long, default_value = "gaussian")]
        signal: String,
        #[arg(long, allow_negative_numbers = true)]
        gamma0: f64,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        kmax: usize,
    },
    /// Leading eigenpair across an (n, γ₀) grid.
    Sweep(RunArgs),
    /// Operator norm of Y − Y₀ − P across an (n, γ₀) grid.
    Equivalence(RunArgs),
    /// Rank-K sweep plus the rank report of P_K.
    #[command(name = "rank-k")]
    RankK(RunArgs),
    /// Symmetrization identities of the rectangular model.
    Rectangular(RunArgs),
    /// Bulk-spectrum histogram.
    Spectrum {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        bins: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output file (default: the config's `output`, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `format` (csv, json or plotdata).
    #[arg(long)]
    format: Option<String>,
}

fn load(args: &RunArgs, expected: Experiment) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if cfg.experiment != expected {
        return Err(Error::Config {
            line: 0,
            msg: format!("config describes a `{}` experiment, not `{expected}`", cfg.experiment),
        });
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(f) = &args.format {
        cfg.format = f.parse()?;
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    cfg.finish()?;
    Ok(cfg)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_table<T: TableRow>(cfg: &ExperimentConfig, rows: &[T]) -> Result<()> {
    let mut w = open_output(cfg.output.as_deref())?;
    emit(rows, cfg.format, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Exit status after writing a table: 2 when any replica failed.
fn finish(failures: usize, total: usize) -> Result<ExitCode> {
    if failures > 0 {
        eprintln!("{failures} of {total} replicas failed; flagged rows were written");
        Ok(ExitCode::from(2))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Coeffs { f, noise, kmax, tol } => {
            let f: NonlinearitySpec = f.parse()?;
            let noise: NoiseSpec = noise.parse()?;
            let tol = match tol {
                Some(t) => t,
                None => default_tolerance(&f, &noise)?,
            };
            print_json(&info_index(&f, &noise, kmax, tol)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Predict { f, noise, signal, gamma0, kmax } => {
            let f: NonlinearitySpec = f.parse()?;
            let noise: NoiseSpec = noise.parse()?;
            let signal: SignalSpec = signal.parse()?;
            let report = info_index(&f, &noise, kmax, default_tolerance(&f, &noise)?)?;
            print_json(&predict_from_report(gamma0, &report, &signal)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let cfg = load(&args, Experiment::Sweep)?;
            let out = harness::run_sweep(&cfg)?;
            write_table(&cfg, &out.rows)?;
            finish(out.failures, out.rows.len())
        }
        Command::Equivalence(args) => {
            let cfg = load(&args, Experiment::Equivalence)?;
            let out = harness::run_equivalence(&cfg)?;
            write_table(&cfg, &out.rows)?;
            finish(out.failures, out.rows.len())
        }
        Command::RankK(args) => {
            let cfg = load(&args, Experiment::RankK)?;
            let (out, rank) = harness::run_rank_k(&cfg)?;
            write_table(&cfg, &out.rows)?;
            match &cfg.output {
                Some(p) => {
                    let mut path = p.as_os_str().to_owned();
                    path.push(".rank.json");
                    let mut w = BufWriter::new(File::create(PathBuf::from(path))?);
                    serde_json::to_writer_pretty(&mut w, &rank)?;
                    writeln!(w)?;
                    w.flush()?;
                }
                None => {
                    let mut e = io::stderr().lock();
                    serde_json::to_writer(&mut e, &rank)?;
                    writeln!(e)?;
                }
            }
            finish(out.failures, out.rows.len())
        }
        Command::Rectangular(args) => {
            let cfg = load(&args, Experiment::Rectangular)?;
            let out = harness::run_rectangular(&cfg)?;
            write_table(&cfg, &out.rows)?;
            finish(out.failures, out.rows.len())
        }
        Command::Spectrum { run, bins } => {
            let mut cfg = load(&run, Experiment::Spectrum)?;
            if let Some(b) = bins {
                cfg.bins = b;
                cfg.finish()?;
            }
            let out = harness::run_spectrum(&cfg)?;
            let mut w = open_output(cfg.output.as_deref())?;
            emit_spectrum(&out, cfg.format, &mut w)?;
            w.flush()?;
            eprintln!("n = {}, sigma = {}, ks_distance = {}", out.n, out.sigma, out.ks_distance);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("nlspike: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
