use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pint::controller::SchedulerKind;
use pint::harness::{self, Overrides, RunConfig, SolverKind, SweepConfig};
use pint::parareal::NormRule;
use pint::Error;

#[derive(Parser)]
#[command(
    name = "pint",
    version,
    about = "Decentralized Parareal runs, sweeps and self-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one Parareal simulation and compare it with the serial fine solution.
    Run(Box<RunArgs>),
    /// Run every configuration of a sweep file and print the CSV report.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in property checks at small scale.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    ranks: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt_coarse: Option<f64>,
    #[arg(long)]
    dt_fine: Option<f64>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// l2, lmax or min
    #[arg(long)]
    norm: Option<String>,
    /// det or conc
    #[arg(long)]
    scheduler: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long)]
    dump_fields: Option<PathBuf>,
    #[arg(long)]
    timeout_secs: Option<f64>,
}

impl RunArgs {
    fn overrides(&self) -> Result<Overrides, Error> {
        Ok(Overrides {
            solver: self
                .solver
                .as_deref()
                .map(str::parse::<SolverKind>)
                .transpose()?,
            ranks: self.ranks,
            t_end: self.t_end,
            dt_coarse: self.dt_coarse,
            dt_fine: self.dt_fine,
            resolution: self.resolution,
            threshold: self.threshold,
            norm: self
                .norm
                .as_deref()
                .map(str::parse::<NormRule>)
                .transpose()?,
            scheduler: self
                .scheduler
                .as_deref()
                .map(str::parse::<SchedulerKind>)
                .transpose()?,
            seed: self.seed,
            metrics_out: self.metrics_out.clone(),
            trace_out: self.trace_out.clone(),
            dump_fields: self.dump_fields.clone(),
            timeout_secs: self.timeout_secs,
        })
    }
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let base = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = base.with_overrides(&args.overrides()?)?;
    let result = harness::run_parareal(&cfg)?;
    print!("{}", result.metrics.to_record());
    if !result.metrics.converged() {
        return Err(Error::Numerical(format!(
            "final error {:e} is not below the threshold {:e}",
            result.metrics.final_error_min, cfg.threshold
        )));
    }
    Ok(())
}

fn sweep(path: &Path) -> Result<(), Error> {
    let sweep = SweepConfig::load(path)?;
    let report = harness::sweep(&sweep.expand());
    let csv = report.to_csv();
    match &sweep.report_out {
        Some(out) => {
            std::fs::write(out, &csv).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?
        }
        None => print!("{csv}"),
    }
    for (cfg, err) in report.failures() {
        eprintln!(
            "{} with {} ranks failed: {err}",
            cfg.solver.name(),
            cfg.ranks
        );
    }
    Ok(())
}

fn verify(seed: u64) -> Result<(), Error> {
    let report = harness::verify(seed);
    print!("{}", report.to_text());
    if report.all_passed() {
        Ok(())
    } else {
        Err(Error::Protocol("verification failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep { config } => sweep(config),
        Command::Verify { seed } => verify(*seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
