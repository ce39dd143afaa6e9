use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use land_sim::harness::export::{write_detector_csv, write_summary_csv, write_trial_csv, write_wind_csv};
use land_sim::harness::metrics::aggregate;
use land_sim::harness::sweep::hover_pose;
use land_sim::harness::{
    detector_noise_sweep, run_experiment, run_trial, summarize_errors, wind_sweep, ControllerKind, HarnessError,
    TrialConfig,
};
use land_sim::simworld::NoiseModel;

#[derive(Parser)]
#[command(name = "land-sim", version, about = "Closed-loop visual landing simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single landing trial.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        controller: Option<ControllerKind>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run several seeded trials and summarize them.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        controller: Option<ControllerKind>,
        #[arg(long)]
        trials: usize,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Compare raw and filtered detections while hovering.
    DetectorSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        frames: usize,
        #[arg(long, value_delimiter = ',', default_value = "sift-like,orb-like,surf-like")]
        presets: Vec<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Landing success under increasing bias wind.
    WindSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5")]
        bias_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

enum Outcome {
    Done,
    Timeout,
}

fn prepare_out(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| HarnessError::Io { path: dir.to_path_buf(), message: e.to_string() })
}

fn load(path: &Path, controller: Option<ControllerKind>, seed: Option<u64>) -> Result<TrialConfig, HarnessError> {
    let mut cfg = TrialConfig::load(path)?;
    if let Some(c) = controller {
        cfg.controller = c;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<Outcome, HarnessError> {
    match cmd {
        Command::Run { config, controller, seed, out } => {
            let cfg = load(&config, controller, seed)?;
            prepare_out(&out)?;
            let log = run_trial(&cfg)?;
            let summary = summarize_errors(&log)?;
            write_trial_csv(&log, &out.join(format!("trial_{}_seed{}.csv", cfg.controller, cfg.seed)))?;
            write_summary_csv(std::slice::from_ref(&summary), None, &out.join("summary.csv"))?;
            match summary.touchdown_s {
                Some(t) => {
                    println!("touchdown at {t:.2} s, offset {:.3} m", summary.planar_offset());
                    Ok(Outcome::Done)
                }
                None => {
                    eprintln!("no touchdown within {} s", cfg.max_duration);
                    Ok(Outcome::Timeout)
                }
            }
        }
        Command::Experiment { config, controller, trials, seeds, out } => {
            let cfg = load(&config, controller, None)?;
            prepare_out(&out)?;
            let exp = run_experiment(&cfg, trials, &seeds)?;
            for log in &exp.logs {
                write_trial_csv(log, &out.join(format!("trial_{}_seed{}.csv", log.controller, log.seed)))?;
            }
            write_summary_csv(&exp.summaries, aggregate(&exp.summaries).as_ref(), &out.join("summary.csv"))?;
            println!(
                "success rate {:.2}, mean touchdown {:.2} s, mean offset {:.3} m",
                exp.success_rate,
                exp.mean_touchdown_s(),
                exp.mean_planar_offset()
            );
            Ok(Outcome::Done)
        }
        Command::DetectorSweep { config, frames, presets, out } => {
            let cfg = load(&config, None, None)?;
            prepare_out(&out)?;
            for name in &presets {
                let nm = NoiseModel::preset(name, cfg.seed)
                    .ok_or_else(|| HarnessError::Config(format!("unknown noise preset {name:?}")))?;
                let rows = detector_noise_sweep(&cfg, &[(name.clone(), nm)], &hover_pose(&cfg), frames, cfg.seed)?;
                write_detector_csv(&rows, &out.join(format!("detector_{name}.csv")))?;
            }
            Ok(Outcome::Done)
        }
        Command::WindSweep { config, bias_list, seeds, out } => {
            let cfg = load(&config, None, None)?;
            prepare_out(&out)?;
            let rows = wind_sweep(&cfg, &bias_list, &seeds)?;
            write_wind_csv(&rows, &out.join("wind_sweep.csv"))?;
            let landed = rows.iter().filter(|r| r.touchdown_s.is_some()).count();
            println!("{landed}/{} trials reached touchdown", rows.len());
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Timeout) => ExitCode::from(3),
        Err(e @ HarnessError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
