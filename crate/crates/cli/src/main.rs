use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stepcox_cli::commands::{self, EstimateOptions, SimulateOptions, VerifyOptions};
use stepcox_cli::config::{parse_variants, Config};
use stepcox_cli::telemetry::write_telemetry;
use stepcox_cli::{synth, CliError};

#[derive(Parser)]
#[command(name = "stepcox", version, about = "Step-noise Cox survival analysis and on-line MRL estimation")]
struct Cli {
    /// Worker threads for Monte Carlo work (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in BJT defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Stream telemetry through the on-line MRL estimator.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Telemetry CSV (`t_h,v_V[,T_K]`); stdin when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Model variant (repeatable); defaults to the configured list.
        #[arg(long = "variant")]
        variants: Vec<u8>,
        #[arg(long)]
        riemann_step: Option<f64>,
        /// Moving-average window, samples.
        #[arg(long)]
        window: Option<usize>,
        /// Multiplies telemetry timestamps.
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
    },
    /// Simulate one intensity path and its failure times.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        grid_points: Option<usize>,
        /// Failure-time CSV.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Oracle summary JSON over the configured number of replications.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Check every closed form against the Monte Carlo oracle.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        replications: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1.0, hide = true)]
        kappa_scale: f64,
    },
    /// MRL curves of all models under a voltage step.
    Stepcompare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        riemann_step: Option<f64>,
        #[arg(long)]
        step_time: Option<f64>,
        #[arg(long)]
        height: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Write a synthetic telemetry trace.
    Synth {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        hours: usize,
        #[arg(long, default_value_t = 120.0)]
        centre: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config, CliError> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_input(path: Option<&Path>) -> Result<Box<dyn Read>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(
            File::open(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdin().lock()),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    match cli.command {
        Command::Estimate {
            common,
            input,
            variants,
            riemann_step,
            window,
            time_scale,
        } => {
            let config = load_config(common.config.as_deref())?;
            let variants = if variants.is_empty() {
                config.variants()?
            } else {
                parse_variants(&variants)?
            };
            let opts = EstimateOptions {
                variants,
                riemann_step: riemann_step.unwrap_or(config.estimator.riemann_step),
                window,
                time_scale,
                json: common.json,
            };
            commands::estimate(
                &config,
                open_input(input.as_deref())?,
                open_output(common.output.as_deref())?,
                &opts,
            )?;
        }
        Command::Simulate {
            common,
            horizon,
            seed,
            grid_points,
            events,
            summary,
        } => {
            let config = load_config(common.config.as_deref())?;
            let opts = SimulateOptions {
                horizon: horizon.unwrap_or(config.simulate.horizon),
                seed: seed.unwrap_or(config.simulate.seed),
                grid_points: grid_points.unwrap_or(config.simulate.grid_points),
            };
            let events_out = events.as_deref().map(|p| open_output(Some(p))).transpose()?;
            commands::simulate_path(&config, &opts, open_output(common.output.as_deref())?, events_out)?;
            if let Some(path) = summary {
                let s = commands::simulate_summary(&config, &opts)?;
                let mut out = open_output(Some(&path))?;
                serde_json::to_writer_pretty(&mut out, &s).map_err(|e| CliError::Io(e.to_string()))?;
                out.write_all(b"\n")?;
                out.flush()?;
            }
        }
        Command::Verify {
            common,
            points,
            replications,
            seed,
            kappa_scale,
        } => {
            let config = load_config(common.config.as_deref())?;
            let opts = VerifyOptions {
                points: points.unwrap_or(config.verify.points),
                replications: replications.unwrap_or(config.verify.replications),
                seed: seed.unwrap_or(config.verify.seed),
                kappa_scale,
                json: common.json,
            };
            let mut out = open_output(common.output.as_deref())?;
            let report = commands::verify(&config, &opts, &mut out)?;
            out.flush()?;
            let summary = commands::verify_summary(&report);
            if !report.passed() {
                return Err(CliError::Verification(summary));
            }
            eprint!("{summary}");
        }
        Command::Stepcompare {
            common,
            riemann_step,
            step_time,
            height,
            horizon,
        } => {
            let config = load_config(common.config.as_deref())?;
            let mut step = config.stepcompare.clone();
            step.step_time = step_time.unwrap_or(step.step_time);
            step.height = height.unwrap_or(step.height);
            step.horizon = horizon.unwrap_or(step.horizon);
            let cmp = commands::step_compare(&config, &step, riemann_step.unwrap_or(config.estimator.riemann_step))?;
            commands::write_step_comparison(&cmp, open_output(common.output.as_deref())?, common.json)?;
            for (i, (settle, last)) in cmp.settling.iter().zip(&cmp.long_run).enumerate() {
                let settle = settle.map_or("n/a".to_string(), |h| format!("{h} h"));
                eprintln!("variant {}: settling {settle}, long-run MRL {last:.6e} h", i + 1);
            }
        }
        Command::Synth {
            output,
            hours,
            centre,
            seed,
        } => {
            let trace = synth::battery_trace(hours, centre, seed);
            write_telemetry(open_output(output.as_deref())?, &trace)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stepcox: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
