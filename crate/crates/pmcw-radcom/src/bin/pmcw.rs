//! Thin command-line front end over the scenario harness.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pmcw_radcom::scenario::{
    params_report, parse_scenario, run_comm, run_radar, run_sweep, write_comm_artifacts,
    write_radar_artifacts, Mode, Scenario,
};
use pmcw_radcom::sysparams::{preset, FramePlan, DESK_PRESETS, FULL_PRESETS};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "pmcw",
    about = "PMCW joint radar-communication baseband simulator",
    long_about = "Configuration-driven Monte Carlo simulator for shift-register-based \
                  PMCW joint radar-communication baseband processing.\n\n\
                  Scenario files are TOML with a [scenario] section (keys: preset, mode, \
                  trials, seed_base, enable_sc, enable_tsai, enable_pilot_corrections, \
                  residual_cfo_hz, detect_threshold_db, dump_iq), an optional [plan] \
                  section overriding the preset (n, a, m_blocks, n_sc, m_sfo, dm_pil, fs, \
                  fc), an optional [channel] section (paths, sto_samples, cfo_hz, cpo_rad, \
                  sfo_ppm, snr_db, noise_seed), and optional [[targets]] entries (range_m, \
                  velocity_mps, gain_db). Every resolved value, defaults included, is \
                  written to manifest.toml."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name (pmcw1..pmcw4, pmcw1s..pmcw4s) when no config is given.
    #[arg(long)]
    preset: Option<String>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the seed base.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived performance report for presets or a config.
    Params {
        /// Preset names; defaults to the four full-scale presets.
        #[arg(long)]
        preset: Vec<String>,
        /// Scenario TOML whose plan should be reported.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write params.csv here.
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Run communication trials and write CSV artifacts.
    Simulate(ScenarioArgs),
    /// Run the monostatic radar chain and write the map plus detections.
    Radar(ScenarioArgs),
    /// Grid sweep over SNR / CFO / SFO.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// SNR grid points, dB.
        #[arg(long, value_delimiter = ',')]
        snr: Vec<f64>,
        /// CFO grid points, Hz.
        #[arg(long, value_delimiter = ',')]
        cfo: Vec<f64>,
        /// SFO grid points, ppm.
        #[arg(long, value_delimiter = ',')]
        sfo: Vec<f64>,
    },
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario> {
    let mut sc = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_scenario(&text)?
        }
        (None, Some(name)) => Scenario::from_preset(name)?,
        (None, None) => bail!("either --config or --preset is required"),
    };
    if let Some(t) = args.trials {
        sc.trials = t;
    }
    if let Some(s) = args.seed {
        sc.seed_base = s;
    }
    sc.validate()?;
    Ok(sc)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Params { preset: names, config, output } => {
            let mut plans: Vec<(String, FramePlan)> = Vec::new();
            if let Some(path) = config {
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let sc = parse_scenario(&text)?;
                plans.push(("config".into(), sc.plan));
            }
            let names: Vec<String> = if names.is_empty() && plans.is_empty() {
                FULL_PRESETS.iter().map(|s| s.to_string()).collect()
            } else {
                names
            };
            for name in names {
                let plan = preset(&name)
                    .with_context(|| format!("unknown preset '{name}' (known: {FULL_PRESETS:?} {DESK_PRESETS:?})"))?;
                plans.push((name, plan));
            }
            let (text, csv) = params_report(&plans)?;
            print!("{text}");
            if let Some(dir) = output {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("params.csv"), csv)?;
            }
        }
        Command::Simulate(args) => {
            let sc = load_scenario(&args)?;
            let summary = run_comm(&sc)?;
            if let Some(dir) = &args.output {
                write_comm_artifacts(&sc, &summary, dir)?;
            }
            print!("{}", summary.summary_csv());
            eprintln!(
                "{} trials, {} acquisition failures, {} fatal errors",
                summary.results.len(),
                summary.acquisition_failures,
                summary.fatal_errors
            );
            if summary.fatal_errors > 0 {
                bail!("{} trials errored fatally", summary.fatal_errors);
            }
        }
        Command::Radar(args) => {
            let mut sc = load_scenario(&args)?;
            sc.mode = Mode::Radar;
            let run = run_radar(&sc)?;
            if let Some(dir) = &args.output {
                write_radar_artifacts(&sc, &run, dir)?;
            }
            for d in &run.detections {
                println!(
                    "detection: {:.2} m, {:.2} m/s, {:.1} dB over median",
                    d.range_m, d.velocity_mps, d.power_db
                );
            }
            if run.detections.is_empty() {
                eprintln!("no detections above threshold");
            }
        }
        Command::Sweep { scenario, snr, cfo, sfo } => {
            let sc = load_scenario(&scenario)?;
            let one = vec![0.0];
            let snr = if snr.is_empty() { vec![sc.channel.snr_db] } else { snr };
            let cfo = if cfo.is_empty() { one.clone() } else { cfo };
            let sfo = if sfo.is_empty() { one } else { sfo };
            let csv = run_sweep(&sc, &snr, &cfo, &sfo)?;
            print!("{csv}");
            if let Some(dir) = &scenario.output {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("sweep.csv"), csv)?;
            }
        }
    }
    Ok(())
}
