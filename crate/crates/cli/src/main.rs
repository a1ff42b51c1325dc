use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use paqt_core::diagnostics::{postselection_sweep, Estimator};
use paqt_core::harness::output::{format_float, write_aggregate_csv, AGGREGATE_FILE};
use paqt_core::harness::{
    aggregate, emit, preset, read_raw_csv, run_trials, trial_summaries, Metric, NamedConfig, RunConfig,
};
use paqt_core::Error;

/// Simulated quantum state tomography: self-guided tomography against
/// least-squares and Bayesian estimators.
#[derive(Parser, Debug)]
#[command(name = "paqt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a batch of trials and write raw.csv, aggregate.csv and run.json.
    Run(RunArgs),
    /// Recompute the aggregate table of a raw CSV.
    Aggregate {
        raw: PathBuf,
        /// Output file; defaults to aggregate.csv next to the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep an ESS postselection threshold over the trials of a raw CSV.
    Postselect(PostselectArgs),
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["config", "preset"]))]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset: smoke, fig1 ... fig7.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. The PAQT_OUT environment variable takes precedence.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Use the original iteration, trial and particle counts.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args, Debug)]
struct PostselectArgs {
    raw: PathBuf,
    /// Thresholds as a comma list (`0,100,500`) or a range `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    threshold_grid: String,
    #[arg(long, default_value = "bme")]
    estimator: String,
    #[arg(long, default_value = "infidelity")]
    metric: String,
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = || Error::Config(format!("bad threshold grid '{spec}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| start + i as f64 * step).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

fn run(args: RunArgs) -> Result<(), Error> {
    let mut set: Vec<NamedConfig> = match (&args.config, &args.preset) {
        (Some(path), _) => vec![NamedConfig {
            name: String::new(),
            config: RunConfig::load(path)?,
        }],
        (None, Some(name)) => preset(name, args.full_scale)?,
        (None, None) => unreachable!("clap requires a source"),
    };
    let single = set.len() == 1;
    let out_root = std::env::var_os("PAQT_OUT")
        .map(PathBuf::from)
        .or(args.out.clone())
        .or_else(|| set[0].config.output.clone())
        .unwrap_or_else(|| PathBuf::from("paqt-out"));

    for member in &mut set {
        if let Some(t) = args.trials {
            member.config.trials = t;
        }
        if let Some(s) = args.seed {
            member.config.seed = s;
        }
        member.config.validate()?;
    }
    for member in &set {
        let dir = if single {
            out_root.clone()
        } else {
            out_root.join(&member.name)
        };
        let logs = run_trials(&member.config, args.workers)?;
        let paths = emit(&member.config, &logs, &dir)?;
        eprintln!(
            "{}: {} trials, config {} -> {}",
            if member.name.is_empty() { "run" } else { &member.name },
            logs.len(),
            member.config.hash(),
            paths.raw.display()
        );
    }
    Ok(())
}

fn aggregate_cmd(raw: &Path, out: Option<PathBuf>) -> Result<(), Error> {
    let rows = read_raw_csv(raw)?;
    let out = out.unwrap_or_else(|| raw.with_file_name(AGGREGATE_FILE));
    write_aggregate_csv(&out, &aggregate(&rows)?)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn postselect_cmd(args: PostselectArgs) -> Result<(), Error> {
    let grid = parse_grid(&args.threshold_grid)?;
    let estimator: Estimator = args.estimator.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let metric: Metric = args.metric.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let rows = read_raw_csv(&args.raw)?;
    let trials = trial_summaries(&rows, estimator, metric)?;
    println!("threshold,accepted,acceptance_probability,mean,median");
    for p in postselection_sweep(&trials, &grid, |t| t.value) {
        println!(
            "{},{},{},{},{}",
            format_float(Some(p.threshold)),
            p.accepted,
            format_float(Some(p.acceptance_probability)),
            format_float(Some(p.mean)),
            format_float(Some(p.median)),
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Aggregate { raw, out } => aggregate_cmd(&raw, out),
        Command::Postselect(args) => postselect_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
