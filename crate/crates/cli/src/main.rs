use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ibc_cli::{compare, load_config, run, CliError, Mode, Overrides};
use ibc_core::ScheduleKind;

#[derive(Parser)]
#[command(
    name = "ibc",
    version,
    about = "Open-loop broadcast control of jump-diffusion ensembles"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Overrides `seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output_dir` from the config file.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the control and write all artifacts.
    Run {
        config: PathBuf,
        /// Only run the verification checks and write verify_report.json.
        #[arg(long)]
        verify_only: bool,
    },
    /// Same as `run --verify-only`.
    Verify { config: PathBuf },
    /// Optimize several schedule kinds under one seed and compare final costs.
    Compare {
        config: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "feedforward,state_linear"
        )]
        kinds: Vec<String>,
    },
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let overrides = Overrides {
        seed: cli.global.seed,
        output_dir: cli.global.output_dir,
    };
    let status = match cli.command {
        Command::Run {
            config,
            verify_only,
        } => {
            let mode = if verify_only {
                Mode::VerifyOnly
            } else {
                Mode::Full
            };
            run(&load_config(&config, &overrides)?, mode)?
        }
        Command::Verify { config } => run(&load_config(&config, &overrides)?, Mode::VerifyOnly)?,
        Command::Compare { config, kinds } => {
            let kinds = kinds
                .iter()
                .map(|k| {
                    ScheduleKind::from_name(k)
                        .ok_or_else(|| CliError::Usage(format!("unknown schedule kind `{k}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let (status, report) = compare(&load_config(&config, &overrides)?, &kinds)?;
            for e in &report.entries {
                println!(
                    "{}: cost {:.6} ± {:.6}, converged {}, iterations {}",
                    e.schedule_kind, e.final_cost, e.final_cost_se, e.converged, e.iterations_used
                );
            }
            status
        }
    };
    Ok(status.exit_code())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => {
            if code == 2 {
                eprintln!("ibc: not converged (see the reports in the output directory)");
            }
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("ibc: {e}");
            ExitCode::from(1)
        }
    }
}
