//! Configuration-driven Monte Carlo harness: resolves scenarios from TOML,
//! runs seeded trials through the full transmit / channel / receive chain,
//! and writes every file artifact (CSV reports, constellation dumps, I/Q
//! dumps, range-velocity maps, manifest).
//!
//! Determinism contract: identical scenario and seed base produce
//! byte-identical CSV artifacts. Trials run in a worker pool keyed by
//! seed; rows are sorted by trial index before writing.

use crate::acquisition::{synchronize, SyncOptions, SyncReport};
use crate::commdemod::demodulate;
use crate::error::{Error, Result};
use crate::impairments::{apply_channel, apply_multipath, apply_sto_and_noise, ChannelConfig, PathSpec};
use crate::iq::IqBuffer;
use crate::radarproc::{detect, detections_to_csv, range_doppler, range_profiles, Detection, RangeDopplerMap};
use crate::sysparams::{derive_parameters, preset, FramePlan, PerformanceReport, SPEED_OF_LIGHT};
use crate::txframe::{assemble_frame, FrameSequences, TxFrame};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::Path;

/// Simulation mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Full chain with impairments and acquisition.
    Comm,
    /// Monostatic radar: shared clock, no acquisition.
    Radar,
    /// Identity channel, acquisition still optional.
    Loopback,
}

/// One point target for radar mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub gain_db: f64,
}

impl TargetSpec {
    pub fn to_path(&self, plan: &FramePlan) -> PathSpec {
        PathSpec {
            delay_s: 2.0 * self.range_m / SPEED_OF_LIGHT,
            gain_re: 10f64.powf(self.gain_db / 20.0),
            gain_im: 0.0,
            doppler_hz: 2.0 * self.velocity_mps / plan.wavelength(),
        }
    }
}

/// Fully resolved experiment description. The manifest and the scenario
/// hash are derived from this structure, so every field appears in the
/// artifacts even when it came from a default.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub plan: FramePlan,
    pub channel: ChannelConfig,
    pub mode: Mode,
    pub trials: usize,
    pub seed_base: u64,
    pub enable_sc: bool,
    pub enable_tsai: bool,
    pub enable_pilot_corrections: bool,
    /// Carrier error injected after acquisition, Hz. Models an imperfect
    /// carrier-recovery stage so the pilot ambiguity can be exercised.
    pub residual_cfo_hz: f64,
    pub targets: Vec<TargetSpec>,
    pub detect_threshold_db: f64,
    pub dump_iq: bool,
}

impl Scenario {
    pub fn from_preset(name: &str) -> Result<Self> {
        let plan = preset(name)
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?;
        Ok(Scenario {
            plan,
            channel: ChannelConfig::identity(),
            mode: Mode::Loopback,
            trials: 100,
            seed_base: 1,
            enable_sc: true,
            enable_tsai: true,
            enable_pilot_corrections: true,
            residual_cfo_hz: 0.0,
            targets: Vec::new(),
            detect_threshold_db: 13.0,
            dump_iq: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.channel.validate(self.plan.fs)?;
        if self.trials < 1 {
            return Err(Error::Config("trial count must be >= 1".into()));
        }
        if self.mode == Mode::Radar && self.targets.is_empty() {
            return Err(Error::Config("radar mode needs at least one target".into()));
        }
        Ok(())
    }

    /// Canonical TOML of every resolved field.
    pub fn manifest_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Hex digest over the canonical manifest; names every artifact.
    pub fn hash(&self) -> Result<String> {
        let text = self.manifest_toml()?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(hex::encode(&digest[..8]))
    }
}

/// On-disk configuration: `[scenario]` plus optional `[plan]`, `[channel]`,
/// and `[[targets]]` sections. A preset seeds the plan; explicit plan
/// fields override it.
#[derive(Debug, Deserialize)]
struct ScenarioFile {
    scenario: ScenarioSection,
    plan: Option<FramePlan>,
    channel: Option<ChannelConfig>,
    #[serde(default)]
    targets: Vec<TargetSpec>,
}

#[derive(Debug, Deserialize)]
struct ScenarioSection {
    preset: Option<String>,
    mode: Option<Mode>,
    trials: Option<usize>,
    seed_base: Option<u64>,
    enable_sc: Option<bool>,
    enable_tsai: Option<bool>,
    enable_pilot_corrections: Option<bool>,
    residual_cfo_hz: Option<f64>,
    detect_threshold_db: Option<f64>,
    dump_iq: Option<bool>,
}

/// Parses a TOML scenario file into a fully resolved [`Scenario`].
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("bad scenario file: {e}")))?;
    let s = &file.scenario;
    let plan = match (&s.preset, file.plan) {
        (_, Some(plan)) => plan,
        (Some(name), None) => preset(name)
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}'")))?,
        (None, None) => {
            return Err(Error::Config("scenario needs a preset or a [plan] section".into()))
        }
    };
    let mut sc = Scenario {
        plan,
        channel: file.channel.unwrap_or_else(ChannelConfig::identity),
        mode: s.mode.unwrap_or(Mode::Comm),
        trials: s.trials.unwrap_or(100),
        seed_base: s.seed_base.unwrap_or(1),
        enable_sc: s.enable_sc.unwrap_or(true),
        enable_tsai: s.enable_tsai.unwrap_or(true),
        enable_pilot_corrections: s.enable_pilot_corrections.unwrap_or(true),
        residual_cfo_hz: s.residual_cfo_hz.unwrap_or(0.0),
        targets: file.targets,
        detect_threshold_db: s.detect_threshold_db.unwrap_or(13.0),
        dump_iq: s.dump_iq.unwrap_or(false),
    };
    if sc.mode == Mode::Loopback {
        sc.channel = ChannelConfig::identity();
    }
    sc.validate()?;
    Ok(sc)
}

/// Outcome of a single communication trial.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub sync: Option<SyncReport>,
    pub ber: f64,
    pub mer_db: f64,
    pub bit_errors: usize,
    pub residual_cfo_hz: f64,
    pub residual_sfo_ppm: f64,
    pub post_sfo_ppm: f64,
    /// Soft symbols, kept for the first trial only (constellation dump).
    pub soft: Vec<Complex64>,
    /// Recorded failure. Acquisition failures are non-fatal; the run
    /// continues and the row carries the message.
    pub error: Option<String>,
    pub fatal: bool,
}

impl TrialResult {
    fn failed(trial: usize, seed: u64, err: &Error) -> Self {
        let fatal = !matches!(err, Error::AcquisitionFailed(_));
        TrialResult {
            trial,
            seed,
            sync: None,
            ber: f64::NAN,
            mer_db: f64::NAN,
            bit_errors: 0,
            residual_cfo_hz: f64::NAN,
            residual_sfo_ppm: f64::NAN,
            post_sfo_ppm: f64::NAN,
            soft: Vec::new(),
            error: Some(err.to_string()),
            fatal,
        }
    }
}

/// Seeded transmit frame for a trial: bits come from the trial's own RNG.
pub fn build_trial_frame(plan: &FramePlan, seed: u64) -> Result<TxFrame> {
    let seqs = FrameSequences::for_plan(plan)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits: Vec<u8> = (0..plan.payload_bit_count()).map(|_| rng.gen_range(0..2)).collect();
    assemble_frame(plan, seqs, bits)
}

fn inject_residual_cfo(stream: &mut IqBuffer, f_hz: f64) {
    if f_hz == 0.0 {
        return;
    }
    let omega = 2.0 * PI * f_hz / stream.sample_rate;
    for (i, s) in stream.samples.iter_mut().enumerate() {
        *s *= Complex64::from_polar(1.0, omega * i as f64);
    }
}

/// Runs one communication trial end to end.
pub fn run_comm_trial(sc: &Scenario, trial: usize) -> TrialResult {
    let seed = sc.seed_base.wrapping_add(trial as u64);
    match comm_trial_inner(sc, trial, seed) {
        Ok(r) => r,
        Err(e) => TrialResult::failed(trial, seed, &e),
    }
}

fn comm_trial_inner(sc: &Scenario, trial: usize, seed: u64) -> Result<TrialResult> {
    let plan = &sc.plan;
    let frame = build_trial_frame(plan, seed)?;
    let mut channel = sc.channel.clone();
    channel.noise_seed = channel.noise_seed.wrapping_add(seed);
    let rx = apply_channel(&frame.buffer, &channel)?;

    let payload_off = 6 * plan.n_sc + plan.m_sfo * plan.n;
    let (sync, mut stream) = if sc.enable_sc {
        let opts = SyncOptions {
            enable_sfo: sc.enable_tsai,
            ..SyncOptions::default()
        };
        let (report, stream) = synchronize(&rx, plan, &frame.sequences, &opts)?;
        (Some(report), stream)
    } else {
        (None, rx)
    };
    inject_residual_cfo(&mut stream, sc.residual_cfo_hz);

    if stream.len() < payload_off + plan.n {
        return Err(Error::AcquisitionFailed("stream too short for payload".into()));
    }
    let payload = &stream.samples[payload_off..];
    let (report, pilots) = demodulate(
        payload,
        plan,
        &frame.sequences.payload,
        sc.enable_pilot_corrections,
        Some(&frame.bits),
    )?;
    Ok(TrialResult {
        trial,
        seed,
        sync,
        ber: report.ber.unwrap_or(f64::NAN),
        mer_db: report.mer_db,
        bit_errors: report
            .ber
            .map(|b| (b * frame.bits.len() as f64).round() as usize)
            .unwrap_or(0),
        residual_cfo_hz: pilots.residual_cfo_hz,
        residual_sfo_ppm: pilots.residual_sfo_ppm,
        post_sfo_ppm: pilots.post_correction_sfo_ppm,
        soft: if trial == 0 { report.soft_symbols } else { Vec::new() },
        error: None,
        fatal: false,
    })
}

/// Mean and standard deviation over finite entries.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    if finite.len() < 2 {
        return (mean, 0.0);
    }
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregate of a simulation run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub results: Vec<TrialResult>,
    pub scenario_hash: String,
    pub fatal_errors: usize,
    pub acquisition_failures: usize,
}

impl RunSummary {
    pub fn column(&self, f: impl Fn(&TrialResult) -> f64) -> Vec<f64> {
        self.results.iter().map(f).collect()
    }

    /// Summary CSV mirroring the mean-and-standard-deviation report
    /// format: one metric per row.
    pub fn summary_csv(&self) -> String {
        let mut s = format!("# scenario={}\nmetric,mean,std,count\n", self.scenario_hash);
        let mut push = |name: &str, values: Vec<f64>| {
            let (m, d) = mean_std(&values);
            let count = values.iter().filter(|v| v.is_finite()).count();
            s.push_str(&format!("{name},{m:.9e},{d:.9e},{count}\n"));
        };
        push(
            "sto_samples",
            self.column(|r| r.sync.as_ref().map_or(f64::NAN, |s| s.sto_samples as f64)),
        );
        push(
            "cfo_total_hz",
            self.column(|r| r.sync.as_ref().map_or(f64::NAN, |s| s.cfo_total_hz)),
        );
        push(
            "sfo_ppm",
            self.column(|r| r.sync.as_ref().map_or(f64::NAN, |s| s.sfo_ppm)),
        );
        push("residual_cfo_hz", self.column(|r| r.residual_cfo_hz));
        push("residual_sfo_ppm", self.column(|r| r.residual_sfo_ppm));
        push("post_sfo_ppm", self.column(|r| r.post_sfo_ppm));
        push("ber", self.column(|r| r.ber));
        push("mer_db", self.column(|r| r.mer_db));
        s
    }

    pub fn sync_csv(&self) -> String {
        let mut s = format!(
            "# scenario={}\ntrial,seed,status,sto_samples,cfo_frac_hz,cfo_int_hz,\
             cfo_total_hz,sfo_ppm,plateau_peak,plateau_width,cfo_int_confident\n",
            self.scenario_hash
        );
        for r in &self.results {
            match (&r.sync, &r.error) {
                (Some(y), _) => s.push_str(&format!(
                    "{},{},ok,{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}\n",
                    r.trial,
                    r.seed,
                    y.sto_samples,
                    y.cfo_frac_hz,
                    y.cfo_int_hz,
                    y.cfo_total_hz,
                    y.sfo_ppm,
                    y.plateau_peak,
                    y.plateau_width,
                    y.cfo_int_confident
                )),
                (None, Some(e)) => s.push_str(&format!(
                    "{},{},error:{},,,,,,,\n",
                    r.trial,
                    r.seed,
                    e.replace([',', '\n'], ";")
                )),
                (None, None) => s.push_str(&format!("{},{},bypassed,,,,,,,\n", r.trial, r.seed)),
            }
        }
        s
    }

    pub fn demod_csv(&self) -> String {
        let mut s = format!(
            "# scenario={}\ntrial,seed,status,ber,mer_db,bit_errors,residual_cfo_hz,\
             residual_sfo_ppm,post_sfo_ppm\n",
            self.scenario_hash
        );
        for r in &self.results {
            match &r.error {
                Some(e) => s.push_str(&format!(
                    "{},{},error:{},,,,,,\n",
                    r.trial,
                    r.seed,
                    e.replace([',', '\n'], ";")
                )),
                None => s.push_str(&format!(
                    "{},{},ok,{:.9},{:.4},{},{:.6},{:.6},{:.6}\n",
                    r.trial,
                    r.seed,
                    r.ber,
                    r.mer_db,
                    r.bit_errors,
                    r.residual_cfo_hz,
                    r.residual_sfo_ppm,
                    r.post_sfo_ppm
                )),
            }
        }
        s
    }

    pub fn constellation_dump(&self) -> String {
        let mut s = format!("# scenario={} re im\n", self.scenario_hash);
        if let Some(first) = self.results.iter().find(|r| !r.soft.is_empty()) {
            for v in &first.soft {
                s.push_str(&format!("{:.9e} {:.9e}\n", v.re, v.im));
            }
        }
        s
    }
}

/// Runs all communication trials of a scenario in parallel and gathers
/// the rows in trial order.
pub fn run_comm(sc: &Scenario) -> Result<RunSummary> {
    sc.validate()?;
    let hash = sc.hash()?;
    let mut results: Vec<TrialResult> = (0..sc.trials)
        .into_par_iter()
        .map(|t| run_comm_trial(sc, t))
        .collect();
    results.sort_by_key(|r| r.trial);
    let fatal = results.iter().filter(|r| r.fatal).count();
    let acq = results
        .iter()
        .filter(|r| r.error.is_some() && !r.fatal)
        .count();
    Ok(RunSummary {
        results,
        scenario_hash: hash,
        fatal_errors: fatal,
        acquisition_failures: acq,
    })
}

/// Writes all communication-run artifacts into `outdir`.
pub fn write_comm_artifacts(sc: &Scenario, summary: &RunSummary, outdir: &Path) -> Result<()> {
    std::fs::create_dir_all(outdir)?;
    write_manifest(sc, outdir)?;
    std::fs::write(outdir.join("sync.csv"), summary.sync_csv())?;
    std::fs::write(outdir.join("demod.csv"), summary.demod_csv())?;
    std::fs::write(outdir.join("summary.csv"), summary.summary_csv())?;
    std::fs::write(outdir.join("constellation.txt"), summary.constellation_dump())?;
    if sc.dump_iq {
        let frame = build_trial_frame(&sc.plan, sc.seed_base)?;
        let mut channel = sc.channel.clone();
        channel.noise_seed = channel.noise_seed.wrapping_add(sc.seed_base);
        let rx = apply_channel(&frame.buffer, &channel)?;
        let path = outdir.join("trial0_rx.iq");
        rx.write_to(&path)?;
        rx.write_sidecar(&path, &summary.scenario_hash)?;
    }
    Ok(())
}

fn write_manifest(sc: &Scenario, outdir: &Path) -> Result<()> {
    let mut text = sc.manifest_toml()?;
    text.push_str(&format!(
        "\n[provenance]\nscenario_hash = \"{}\"\n",
        sc.hash()?
    ));
    std::fs::write(outdir.join("manifest.toml"), text)?;
    Ok(())
}

/// Outcome of a radar run.
#[derive(Clone, Debug)]
pub struct RadarRun {
    pub map: RangeDopplerMap,
    pub detections: Vec<Detection>,
    pub scenario_hash: String,
}

/// Monostatic radar run: the transmit payload is echoed by the configured
/// targets, noise is added at the configured per-sample SNR, and the
/// block symbols are known at the processor.
pub fn run_radar(sc: &Scenario) -> Result<RadarRun> {
    sc.validate()?;
    let plan = &sc.plan;
    let seed = sc.seed_base;
    let frame = build_trial_frame(plan, seed)?;
    let payload = IqBuffer::new(
        frame.buffer.samples[frame.layout.payload.0..].to_vec(),
        plan.fs,
    );
    let paths: Vec<PathSpec> = sc.targets.iter().map(|t| t.to_path(plan)).collect();
    let echo = apply_multipath(&payload, &paths)?;
    let noisy = apply_sto_and_noise(
        &echo,
        0.0,
        sc.channel.snr_db,
        sc.channel.noise_seed.wrapping_add(seed),
    )?;

    let mut next = frame.bits.iter();
    let symbols: Vec<f64> = (0..plan.m_blocks)
        .map(|k| {
            if plan.is_pilot_block(k) {
                1.0
            } else if *next.next().unwrap() == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    let profiles = range_profiles(&noisy.samples, plan, &frame.sequences.payload, &symbols)?;
    let map = range_doppler(&profiles, plan, None)?;
    let detections = detect(&map, sc.detect_threshold_db);
    Ok(RadarRun {
        map,
        detections,
        scenario_hash: sc.hash()?,
    })
}

pub fn write_radar_artifacts(sc: &Scenario, run: &RadarRun, outdir: &Path) -> Result<()> {
    std::fs::create_dir_all(outdir)?;
    write_manifest(sc, outdir)?;
    run.map.write_to(&outdir.join("range_doppler.bin"))?;
    let mut csv = format!("# scenario={}\n", run.scenario_hash);
    csv.push_str(&detections_to_csv(&run.detections));
    std::fs::write(outdir.join("detections.csv"), csv)?;
    Ok(())
}

/// Parameter report for a list of presets or plans.
pub fn params_report(plans: &[(String, FramePlan)]) -> Result<(String, String)> {
    let mut text = String::new();
    let mut csv = format!("{}\n", PerformanceReport::CSV_HEADER);
    for (name, plan) in plans {
        let report = derive_parameters(plan)?;
        text.push_str(&format!("[{name}]\n{}\n", report.to_text()));
        csv.push_str(&report.to_csv_row(name));
        csv.push('\n');
    }
    Ok((text, csv))
}

/// One sweep point: channel overrides applied to a base scenario.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub cfo_hz: f64,
    pub sfo_ppm: f64,
}

/// Grid sweep over SNR / CFO / SFO. Returns the CSV of per-point
/// aggregates.
pub fn run_sweep(
    base: &Scenario,
    snr_db: &[f64],
    cfo_hz: &[f64],
    sfo_ppm: &[f64],
) -> Result<String> {
    let mut csv = format!(
        "# scenario={}\nsnr_db,cfo_hz,sfo_ppm,trials,fatal,acq_failures,ber_mean,mer_mean_db,\
         cfo_est_mean_hz,cfo_est_std_hz,sfo_est_mean_ppm,sfo_est_std_ppm\n",
        base.hash()?
    );
    for &snr in snr_db {
        for &cfo in cfo_hz {
            for &sfo in sfo_ppm {
                let mut sc = base.clone();
                sc.channel.snr_db = snr;
                sc.channel.cfo_hz = cfo;
                sc.channel.sfo_ppm = sfo;
                let summary = run_comm(&sc)?;
                let (ber_m, _) = mean_std(&summary.column(|r| r.ber));
                let (mer_m, _) = mean_std(&summary.column(|r| r.mer_db));
                let (cfo_m, cfo_s) = mean_std(
                    &summary.column(|r| r.sync.as_ref().map_or(f64::NAN, |s| s.cfo_total_hz)),
                );
                let (sfo_m, sfo_s) =
                    mean_std(&summary.column(|r| r.sync.as_ref().map_or(f64::NAN, |s| s.sfo_ppm)));
                csv.push_str(&format!(
                    "{snr},{cfo},{sfo},{},{},{},{ber_m:.9},{mer_m:.4},{cfo_m:.6},{cfo_s:.6},\
                     {sfo_m:.6},{sfo_s:.6}\n",
                    sc.trials, summary.fatal_errors, summary.acquisition_failures
                ));
            }
        }
    }
    Ok(csv)
}
