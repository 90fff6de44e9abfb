use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wrof_core::flows::{
    iterate_regularization, multiscale, FlowOptions, ScaleSchedule, DEFAULT_MULTISCALE_STAGES,
};
use wrof_core::{check_energy_identity, solve_transport, solve_wrof, CostKind, DiscreteMeasure};

use crate::error::{CliError, Result};
use crate::format::to_json;
use crate::io::{load_measure, measure_json, parse_domain, write_file};
use crate::report::{
    displacement_csv, ledger_csv, plan_report, trace_csv, wrof_report, LedgerReport,
};
use crate::verify::{self, Suite, VerifyConfig};

#[derive(Debug, Parser)]
#[command(
    name = "wrof",
    version,
    about = "Exact discrete optimal transport and Wasserstein-ROF"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal transport plan between two measures.
    Ot {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value_t = CostArg::Quadratic)]
        cost: CostArg,
        /// Huber threshold; required for `--cost huber`.
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Solve min_rho W2^2(mu, rho) / 2 + lambda W1(rho, nu).
    Wrof {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        lambda: f64,
        /// Also write `displacements.csv` with (displacement, mass) rows.
        #[arg(long, requires = "out_dir")]
        emit_plots: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Iterative regularization mu_{n+1} = WROF(mu_n, nu, lambda_n).
    Iterate {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// Stop once W1(mu_n, nu) is at most this.
        #[arg(long)]
        early_stop: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Multiscale transport nu_{n+1} = WROF(mu, nu_n, lambda0 / 2^n).
    Multiscale {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        lambda0: f64,
        #[arg(long, default_value_t = DEFAULT_MULTISCALE_STAGES)]
        stages: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Run invariant suites over seeded random instances.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest atom count per measure (default depends on the suite).
        #[arg(long)]
        max_atoms: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Source measure (.json, .csv or .pgm).
    pub mu: PathBuf,
    /// Target measure (.json, .csv or .pgm).
    pub nu: PathBuf,
    /// Box for image inputs as lower bounds then upper bounds, e.g. `0,0,1,1`.
    #[arg(long)]
    pub domain: Option<String>,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write report files here instead of printing the main report.
    #[arg(short, long)]
    pub out_dir: Option<PathBuf>,
    /// Write one measure JSON per stage under `<out-dir>/snapshots`.
    #[arg(long, requires = "out_dir")]
    pub snapshots: bool,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Constant step size.
    #[arg(long, conflicts_with_all = ["halving", "schedule"])]
    pub lambda: Option<f64>,
    /// Halving schedule starting at this value.
    #[arg(long, conflicts_with = "schedule")]
    pub halving: Option<f64>,
    /// Comma-separated step sizes.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub stages: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostArg {
    Quadratic,
    Euclidean,
    Huber,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}

/// Runs a parsed command; returns the exit code on success paths
/// (0, or 1 for a failed verification).
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Ot {
            inputs,
            cost,
            lambda,
            output,
        } => {
            let kind = match (cost, lambda) {
                (CostArg::Quadratic, _) => CostKind::Quadratic,
                (CostArg::Euclidean, _) => CostKind::Euclidean,
                (CostArg::Huber, Some(l)) => CostKind::Huber(l),
                (CostArg::Huber, None) => {
                    return Err(CliError::Usage("--cost huber needs --lambda".into()))
                }
            };
            let (mu, nu) = inputs.load()?;
            let plan = solve_transport(&mu, &nu, kind)?;
            let report = plan_report(&plan, &mu, &nu);
            output.emit("plan.json", &to_json(&report), &report.summary.line())?;
        }
        Command::Wrof {
            inputs,
            lambda,
            emit_plots,
            output,
        } => {
            let (mu, nu) = inputs.load()?;
            let sol = solve_wrof(&mu, &nu, lambda)?;
            let report = wrof_report(&sol, &mu, &nu)?;
            if emit_plots {
                output.write("displacements.csv", &displacement_csv(&sol))?;
            }
            output.emit("wrof.json", &to_json(&report), &report.line())?;
        }
        Command::Iterate {
            inputs,
            schedule,
            early_stop,
            output,
        } => {
            let (mu, nu) = inputs.load()?;
            let schedule = schedule.build()?;
            let options = FlowOptions {
                early_stop,
                ..FlowOptions::default()
            };
            let reg = iterate_regularization(&mu, &nu, &schedule, &options)?;
            output.snapshots("mu", &reg.measures)?;
            if output.out_dir.is_some() {
                output.write("trace.json", &to_json(&reg.trace))?;
            }
            let line = format!(
                "stages {} final_w1 {}",
                reg.trace.stages.len(),
                reg.trace.final_w1().unwrap_or(f64::NAN)
            );
            output.emit("trace.csv", &trace_csv(&reg.trace), &line)?;
        }
        Command::Multiscale {
            inputs,
            lambda0,
            stages,
            output,
        } => {
            let (mu, nu) = inputs.load()?;
            let ms = multiscale(&mu, &nu, lambda0, stages, &FlowOptions::default())?;
            output.snapshots("nu", &ms.measures)?;
            let identity_error = check_energy_identity(&ms.ledger);
            if output.out_dir.is_some() {
                let report = LedgerReport {
                    ledger: &ms.ledger,
                    tail: ms.ledger.tail(),
                    identity_error,
                };
                output.write("ledger.json", &to_json(&report))?;
            }
            let line = format!(
                "total {} tail {} residual {:e}",
                ms.ledger.total_left,
                ms.ledger.tail(),
                identity_error
            );
            output.emit("ledger.csv", &ledger_csv(&ms.ledger), &line)?;
        }
        Command::Verify {
            suite,
            instances,
            seed,
            max_atoms,
            output,
        } => {
            let config = VerifyConfig {
                suite,
                instances,
                seed,
                max_atoms,
                threads: verify::threads_from_env(),
            };
            let report = verify::run(&config)?;
            output.emit("verify.json", &to_json(&report), &report.line())?;
            return Ok(if report.all_passed() { 0 } else { 1 });
        }
    }
    Ok(0)
}

impl Inputs {
    fn load(&self) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        let domain = self.domain.as_deref().map(parse_domain).transpose()?;
        let mu = load_measure(&self.mu, domain.as_ref())?;
        let nu = load_measure(&self.nu, domain.as_ref())?;
        if mu.dim() != nu.dim() {
            return Err(wrof_core::Error::DimensionMismatch {
                expected: mu.dim(),
                found: nu.dim(),
            }
            .into());
        }
        Ok((mu, nu))
    }
}

impl ScheduleArgs {
    fn build(&self) -> Result<ScaleSchedule> {
        let schedule = match (self.lambda, self.halving, &self.schedule) {
            (Some(l), None, None) => ScaleSchedule::constant(l, self.stages)?,
            (None, Some(l), None) => ScaleSchedule::halving(l, self.stages)?,
            (None, None, Some(values)) => ScaleSchedule::custom(values.clone())?,
            _ => {
                return Err(CliError::Usage(
                    "give exactly one of --lambda, --halving, --schedule".into(),
                ))
            }
        };
        Ok(schedule)
    }
}

impl Output {
    /// The main report goes to `<out-dir>/<name>` with the summary on stdout,
    /// or to stdout with the summary on stderr.
    fn emit(&self, name: &str, contents: &str, summary: &str) -> Result<()> {
        match &self.out_dir {
            Some(dir) => {
                write_file(&dir.join(name), contents)?;
                println!("{summary}");
            }
            None => {
                print!("{contents}");
                eprintln!("{summary}");
            }
        }
        Ok(())
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let dir = self.out_dir.as_deref().unwrap_or(Path::new("."));
        write_file(&dir.join(name), contents)
    }

    fn snapshots(&self, prefix: &str, measures: &[DiscreteMeasure]) -> Result<()> {
        if !self.snapshots {
            return Ok(());
        }
        for (n, m) in measures.iter().enumerate() {
            self.write(&format!("snapshots/{prefix}_{n:03}.json"), &measure_json(m))?;
        }
        Ok(())
    }
}
