use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use holo_core::{sample_channel, CapacityReport};
use holo_experiments::emit::{emit_with, write_channel_csv, write_lattice_csv};
use holo_experiments::sweep::{multi_user_realization, single_user_realization};
use holo_experiments::{
    emit, preset, run_sweep, write_sweep_csv, write_sweep_json, ExperimentError, Format, Result, Scenario,
    ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "holo", version, about = "Holographic MIMO channel synthesis and capacity sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the harmonic lattice of one link end as `ix,iy,integral`.
    Lattice {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = End::Bs)]
        end: End,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one channel realization and dump it as `row,col,re,im`.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Element spacing from the config's list (defaults to the first).
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long, default_value_t = 0)]
        realization: u64,
    },
    /// Capacity of one realization, printed as JSON.
    Capacity {
        #[arg(value_enum)]
        mode: CapacityMode,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long, default_value_t = 0)]
        realization: u64,
    },
    /// Monte Carlo sweep over the spacing list.
    Sweep {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        realizations: Option<usize>,
        /// Output file; `.json` writes JSON, anything else CSV. Defaults to CSV on stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum End {
    Bs,
    Ue,
}

#[derive(Clone, Copy, ValueEnum)]
enum CapacityMode {
    Su,
    Mu,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

fn spacing_index(config: &ScenarioConfig, spacing: Option<f64>) -> Result<usize> {
    match spacing {
        None => Ok(0),
        Some(d) => config
            .spacing_list
            .iter()
            .position(|&s| s == d)
            .ok_or_else(|| ExperimentError::Config(format!("spacing {d} is not in spacing_list"))),
    }
}

fn write_out(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => emit_with(path, |mut file| f(&mut file)),
        None => f(&mut std::io::stdout().lock()),
    }
}

fn report_json(report: &CapacityReport, spacing: f64, realization: u64) -> serde_json::Value {
    serde_json::json!({
        "spacing_wl": spacing,
        "realization": realization,
        "value_bits": report.value_bits,
        "iterations": report.iterations,
        "converged": report.converged,
        "powers": report.allocations.iter().map(|a| a.powers.clone()).collect::<Vec<_>>(),
        "rate_trace": report.rate_trace,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lattice { config, end, out } => {
            let scenario = Scenario::prepare(&ScenarioConfig::load(&config)?)?;
            let lattice = match end {
                End::Bs => &scenario.bs_lattice,
                End::Ue => &scenario.ue_lattice,
            };
            write_out(out.as_deref(), |w| write_lattice_csv(lattice, w))
        }
        Command::Synth {
            config,
            out,
            spacing,
            realization,
        } => {
            let config = ScenarioConfig::load(&config)?;
            let k = spacing_index(&config, spacing)?;
            let scenario = Scenario::prepare(&config)?;
            let plan = scenario.plan(&scenario.spacing_setup(k)?)?;
            let h = sample_channel(&plan, config.seed, realization).matrix;
            write_out(out.as_deref(), |w| write_channel_csv(&h, w))
        }
        Command::Capacity {
            mode,
            config,
            spacing,
            realization,
        } => {
            let config = ScenarioConfig::load(&config)?;
            let k = spacing_index(&config, spacing)?;
            let scenario = Scenario::prepare(&config)?;
            let report = match mode {
                CapacityMode::Su => single_user_realization(&scenario, k, realization)?,
                CapacityMode::Mu => multi_user_realization(&scenario, k, realization)?,
            };
            println!("{}", report_json(&report, config.spacing_list[k], realization));
            Ok(())
        }
        Command::Sweep {
            preset: name,
            config,
            seed,
            realizations,
            out,
            format,
            jobs,
        } => {
            let mut scenario = match (name, config) {
                (Some(name), _) => preset(&name)?,
                (None, Some(path)) => ScenarioConfig::load(&path)?,
                (None, None) => unreachable!("clap requires one of --preset and --config"),
            };
            if let Some(s) = seed {
                scenario.seed = s;
            }
            if let Some(r) = realizations {
                scenario.realizations = r;
            }
            scenario.validate()?;
            let result = run_sweep(&scenario, jobs)?;
            let format = match (format, &out) {
                (Some(OutputFormat::Csv), _) => Format::Csv,
                (Some(OutputFormat::Json), _) => Format::Json,
                (None, Some(path)) => Format::from_path(path),
                (None, None) => Format::Csv,
            };
            match out {
                Some(path) => emit(&result, &path, format),
                None => {
                    let stdout = std::io::stdout().lock();
                    match format {
                        Format::Csv => write_sweep_csv(&result, stdout),
                        Format::Json => write_sweep_json(&result, stdout),
                    }
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("holo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
