use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use hermite_spectral::experiments::{run, ExperimentConfig, ExperimentKind, ExperimentReport};
use hermite_spectral::Error;

/// Numerical experiments for Hermite spectral multipliers and their
/// commutators with BMO functions.
#[derive(Parser, Debug)]
#[command(name = "hermite-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Weighted trace norms of spectral projections and their decay slope.
    TraceDecay(RunArgs),
    /// Growth of the commutator square function in delta.
    DeltaScaling(RunArgs),
    /// Commutators with Bochner-Riesz means as R grows.
    Convergence(RunArgs),
    /// Weighted ratio of the maximal commutator under band doubling.
    TheoremRatio(RunArgs),
    /// Subordination identity and dyadic multiplier checks.
    IdentitySuite(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::TraceDecay(a) => (ExperimentKind::TraceDecay, a),
            Command::DeltaScaling(a) => (ExperimentKind::DeltaScaling, a),
            Command::Convergence(a) => (ExperimentKind::Convergence, a),
            Command::TheoremRatio(a) => (ExperimentKind::TheoremRatio, a),
            Command::IdentitySuite(a) => (ExperimentKind::IdentitySuite, a),
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// File of `key=value` lines applied before the flags.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Dimension.
    #[arg(short = 'n', long)]
    dim: Option<usize>,
    /// Weight exponent of `(1+|x|)^-alpha`.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Bochner-Riesz order.
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma-separated geometric list of deltas.
    #[arg(long, value_name = "LIST")]
    deltas: Option<String>,
    /// Largest eigenvalue of the trial band.
    #[arg(long)]
    band: Option<usize>,
    /// Gauss-Hermite nodes per axis.
    #[arg(long)]
    grid_m: Option<usize>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    r_per_octave: Option<usize>,
    /// Dyadic samples of t per octave in the square function.
    #[arg(long)]
    t_per_octave: Option<usize>,
    /// BMO symbol by name: sin, log1p_abs, sign_times_log or const:<c>.
    #[arg(long, short = 'b')]
    symbol: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Seed of the random trials; required by experiments that draw trials.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated eigenvalues for the trace decay.
    #[arg(long, value_name = "LIST")]
    ks: Option<String>,
    /// One subordination tuple `lambda,rho,m,R`.
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    tuple: Option<String>,
    #[arg(long)]
    bmo_half_width: Option<f64>,
    #[arg(long)]
    bmo_levels: Option<u32>,
    /// CSV destination; standard output when absent.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Evaluate over threads.
    #[arg(long)]
    parallel: bool,
    /// Extra `key=value` settings applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn settings(&self) -> Vec<(&'static str, String)> {
        fn put<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        let mut out = Vec::new();
        put(&mut out, "alpha", &self.alpha);
        put(&mut out, "lambda", &self.lambda);
        put(&mut out, "deltas", &self.deltas);
        put(&mut out, "band", &self.band);
        put(&mut out, "grid_m", &self.grid_m);
        put(&mut out, "r_min", &self.r_min);
        put(&mut out, "r_max", &self.r_max);
        put(&mut out, "r_per_octave", &self.r_per_octave);
        put(&mut out, "t_per_octave", &self.t_per_octave);
        put(&mut out, "symbol", &self.symbol);
        put(&mut out, "trials", &self.trials);
        put(&mut out, "seed", &self.seed);
        put(&mut out, "ks", &self.ks);
        put(&mut out, "tuple", &self.tuple);
        put(&mut out, "bmo_half_width", &self.bmo_half_width);
        put(&mut out, "bmo_levels", &self.bmo_levels);
        put(
            &mut out,
            "output",
            &self.output.as_ref().map(|p| p.display().to_string()),
        );
        if self.parallel {
            out.push(("parallel", "true".into()));
        }
        out
    }
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::defaults(kind, 1);
    if let Some(path) = &args.config {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
        if cfg.experiment != kind {
            return Err(Error::Config(format!(
                "config file names experiment {} but the subcommand is {kind}",
                cfg.experiment
            )));
        }
    }
    if let Some(n) = args.dim {
        cfg.set("n", &n.to_string())?;
    }
    for (k, v) in args.settings() {
        cfg.set(k, &v)?;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if cfg.experiment != kind {
        return Err(Error::Config("the experiment is fixed by the subcommand".into()));
    }
    Ok(cfg)
}

fn print_checks(report: &ExperimentReport) {
    for c in &report.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        eprintln!("{mark} {}: {}", c.name, c.detail);
    }
    eprintln!("runtime {:.3} s", report.runtime.as_secs_f64());
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> Result<bool, Error> {
    let cfg = build_config(kind, args)?;
    let report = run(&cfg)?;
    match &cfg.output {
        Some(path) => report.write_atomic(path)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            report.write_csv(&mut lock)?;
            lock.flush()?;
        }
    }
    print_checks(&report);
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let (kind, args) = cli.command.split();
    match execute(kind, &args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
