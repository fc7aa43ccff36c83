use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rwfront::io_cli::{
    cmd_bench, cmd_compare, cmd_run_ref, cmd_run_rwm, cmd_validate, load_config, RunOptions,
};
use rwfront::{Error, ObservableError};

#[derive(Parser)]
#[command(name = "rwfront", version, about = "Random-walk and reference solvers for a moving reaction front")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fail when the time-step condition does not hold.
    #[arg(long)]
    strict: bool,
    /// Run an ensemble of N independent streams of the seed.
    #[arg(long, value_name = "N")]
    seeds: Option<u64>,
    /// Also write timing.csv with the wall-clock time.
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            out: self.out.clone(),
            strict: self.strict,
            seeds: self.seeds,
            timing: self.timing,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the random-walk solver.
    RunRwm(RunArgs),
    /// Run the reference solver.
    RunRef(RunArgs),
    /// Compare a random-walk run directory against a reference run.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rwm: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Directory for errors.csv (defaults to the random-walk directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the random walk over walker counts and time steps.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "n", value_delimiter = ',', required = true)]
        n_list: Vec<u64>,
        /// Time steps in the config's time unit (defaults to the configured one).
        #[arg(long = "dtau", value_delimiter = ',')]
        dtau_list: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the time-step condition of a configuration.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        strict: bool,
    },
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::RunRwm(args) => {
            let cfg = load_config(&args.config)?;
            let s = cmd_run_rwm(&cfg, &args.options())?;
            println!(
                "wrote {} (members {}, h(T) = {}, violators {})",
                s.out_dir.display(),
                s.members,
                s.final_front,
                s.violators
            );
        }
        Command::RunRef(args) => {
            let cfg = load_config(&args.config)?;
            let s = cmd_run_ref(&cfg, &args.options())?;
            println!("wrote {} (h(T) = {})", s.out_dir.display(), s.final_front);
        }
        Command::Compare {
            config,
            rwm,
            reference,
            out,
        } => {
            let cfg = load_config(&config)?;
            let outcome = cmd_compare(&cfg, &rwm, &reference, out.as_deref())?;
            for v in &outcome.verdicts {
                println!("{v}");
            }
            if !outcome.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Bench {
            config,
            n_list,
            dtau_list,
            repeats,
            out,
        } => {
            let cfg = load_config(&config)?;
            let dtau_list = if dtau_list.is_empty() {
                vec![cfg.numerics.dtau * time_unit_inverse(&cfg)]
            } else {
                dtau_list
            };
            let report = cmd_bench(&cfg, &n_list, &dtau_list, repeats, out.as_deref())?;
            println!("n,time_step,median_seconds");
            for r in &report.rows {
                println!("{},{:e},{:.6}", r.n, r.dtau, r.median_seconds);
            }
            for (dt, f) in &report.fits {
                println!(
                    "fit time_step={dt:e}: slope={:e} s/walker, R^2={:.4}",
                    f.slope, f.r_squared
                );
            }
        }
        Command::Validate { config, strict } => {
            let cfg = load_config(&config)?;
            let report = cmd_validate(&cfg, strict)?;
            println!("{report}");
            println!("{}", if report.ok() { "ok" } else { "violation" });
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Factor from dimensionless time back to the config's time unit.
fn time_unit_inverse(cfg: &rwfront::io_cli::RunConfig) -> f64 {
    cfg.physical
        .as_ref()
        .map(|p| p.scales().time_scale())
        .unwrap_or(1.0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Observable(ObservableError::Incompatible(_))) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
