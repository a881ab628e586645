//! Preamble-based synchronization: sliding correlation metric, timing
//! estimate, fractional and integer carrier-offset estimates, the
//! PRBS-pair sampling-clock estimator, and the correcting resampler.
//!
//! The integer-CFO comparison for binary preamble blocks is an adaptation:
//! candidate offsets are scanned by de-rotating the two preamble blocks
//! and scoring their correlation against the known sequences. The
//! PRBS-pair clock estimator uses identical pairs, so it reduces to a
//! weighted least-squares fit of the inter-pair phase slope across
//! frequency bins; bin weights are |REF[k]|^2 |Y2[k] Y1*[k]| with the DC
//! bin excluded.

use crate::dsp::dft;
use crate::error::{Error, Result};
use crate::iq::IqBuffer;
use crate::seqgen::{circular_correlate, ChipSequence};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Detection threshold relative to the metric maximum.
pub const PLATEAU_REL_THRESHOLD: f64 = 0.9;
/// Absolute floor below which acquisition is declared failed.
pub const PLATEAU_ABS_FLOOR: f64 = 0.5;
/// Gaps up to this many samples are merged into one plateau.
pub const PLATEAU_GAP_MERGE: usize = 2;
/// Default integer-CFO search range in bins of Fs/(2 N_sc).
pub const DEFAULT_INT_CFO_BINS: i32 = 8;

/// Sliding-window correlation metric over a receive stream.
#[derive(Clone, Debug)]
pub struct ScMetric {
    /// Normalized metric, in [0, 1] up to numerical tolerance.
    pub gamma: Vec<f64>,
    /// Complex numerator sum before squaring; its phase carries the
    /// fractional carrier offset.
    pub p: Vec<Complex64>,
    /// Window length N_sc.
    pub window: usize,
}

/// One detected plateau of the metric.
#[derive(Clone, Copy, Debug)]
pub struct Plateau {
    pub start: usize,
    pub end: usize, // inclusive
    pub midpoint: usize,
    pub peak: f64,
}

impl Plateau {
    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Synchronization estimates for one acquisition.
#[derive(Clone, Debug)]
pub struct SyncReport {
    /// Estimated index of the first preamble sample.
    pub sto_samples: i64,
    pub cfo_frac_hz: f64,
    pub cfo_int_hz: f64,
    pub cfo_total_hz: f64,
    pub sfo_ppm: f64,
    pub plateau_peak: f64,
    pub plateau_width: usize,
    /// False when the integer-CFO argmax had a close runner-up.
    pub cfo_int_confident: bool,
}

/// Computes the sliding metric gamma[n] = |P[n]|^2 / R[n]^2 with
/// P[n] = sum_eta r*[n+eta] r[n+eta+N] and R[n] = sum_eta |r[n+eta+N]|^2,
/// incrementally in O(1) per shift. The running sums are re-anchored
/// periodically to bound floating-point drift.
pub fn sc_metric(y: &[Complex64], n_sc: usize) -> Result<ScMetric> {
    if y.len() < 2 * n_sc + 1 {
        return Err(Error::Argument(format!(
            "buffer of {} samples is too short for window {n_sc}",
            y.len()
        )));
    }
    let count = y.len() - 2 * n_sc;
    let mut gamma = Vec::with_capacity(count);
    let mut p_out = Vec::with_capacity(count);

    let fresh = |n: usize| -> (Complex64, f64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut r = 0.0;
        for eta in 0..n_sc {
            p += y[n + eta].conj() * y[n + eta + n_sc];
            r += y[n + eta + n_sc].norm_sqr();
        }
        (p, r)
    };

    let (mut p, mut r) = fresh(0);
    const REANCHOR: usize = 8192;
    for n in 0..count {
        if n > 0 {
            if n % REANCHOR == 0 {
                let (pf, rf) = fresh(n);
                p = pf;
                r = rf;
            } else {
                p -= y[n - 1].conj() * y[n - 1 + n_sc];
                p += y[n - 1 + n_sc].conj() * y[n - 1 + 2 * n_sc];
                r -= y[n - 1 + n_sc].norm_sqr();
                r += y[n - 1 + 2 * n_sc].norm_sqr();
            }
        }
        let g = if r > 1e-300 { p.norm_sqr() / (r * r) } else { 0.0 };
        gamma.push(g);
        p_out.push(p);
    }
    Ok(ScMetric {
        gamma,
        p: p_out,
        window: n_sc,
    })
}

/// Finds all plateaus above max(rel * max_gamma, abs_floor), merging gaps
/// of up to `PLATEAU_GAP_MERGE` samples.
pub fn find_plateaus(metric: &ScMetric) -> Vec<Plateau> {
    let max_g = metric.gamma.iter().cloned().fold(0.0f64, f64::max);
    let threshold = (PLATEAU_REL_THRESHOLD * max_g).max(PLATEAU_ABS_FLOOR);
    let mut plateaus: Vec<Plateau> = Vec::new();
    let mut current: Option<(usize, usize, f64)> = None;
    let mut gap = 0usize;
    for (n, &g) in metric.gamma.iter().enumerate() {
        if g >= threshold {
            match current {
                Some((s, _, pk)) => current = Some((s, n, pk.max(g))),
                None => current = Some((n, n, g)),
            }
            gap = 0;
        } else if let Some((s, e, pk)) = current {
            gap += 1;
            if gap > PLATEAU_GAP_MERGE {
                plateaus.push(Plateau {
                    start: s,
                    end: e,
                    midpoint: (s + e + 1) / 2,
                    peak: pk,
                });
                current = None;
                gap = 0;
            }
        }
    }
    if let Some((s, e, pk)) = current {
        plateaus.push(Plateau {
            start: s,
            end: e,
            midpoint: (s + e + 1) / 2,
            peak: pk,
        });
    }
    plateaus
}

/// Timing estimate: first plateau wide enough to be a preamble block,
/// midpoint minus the fixed calibration offset ceil((N_sc+1)/2), so the
/// returned index is the first sample of the first preamble block.
pub fn estimate_sto(metric: &ScMetric) -> Result<(i64, Plateau)> {
    let min_width = (metric.window / 8).max(2);
    let plateau = find_plateaus(metric)
        .into_iter()
        .find(|p| p.width() >= min_width)
        .ok_or_else(|| {
            Error::AcquisitionFailed(format!(
                "no plateau above floor {PLATEAU_ABS_FLOOR} with width >= {min_width}"
            ))
        })?;
    let offset = (metric.window + 2) / 2; // ceil((N_sc + 1) / 2)
    Ok((plateau.midpoint as i64 - offset as i64, plateau))
}

/// Fractional carrier offset from the phase of the numerator sum at a
/// plateau point: f = angle(P) * Fs / (2 pi N_sc).
pub fn estimate_cfo_fractional(p_at_plateau: Complex64, n_sc: usize, fs: f64) -> f64 {
    p_at_plateau.arg() * fs / (2.0 * PI * n_sc as f64)
}

/// Integer carrier offset in bins of Fs/(2 N_sc), found by de-rotating
/// both preamble blocks by each candidate and scoring the circular
/// correlation against the known sequences. Returns (frequency, confident);
/// `confident` is false when the runner-up score is within 1% of the best.
pub fn estimate_cfo_integer(
    block1: &[Complex64],
    block2: &[Complex64],
    sc1: &ChipSequence,
    sc2: &ChipSequence,
    fs: f64,
    search_bins: i32,
) -> Result<(f64, bool)> {
    let n_sc = sc1.len();
    if block1.len() < 3 * n_sc || block2.len() < 3 * n_sc {
        return Err(Error::Argument(format!(
            "preamble blocks must hold 3 * {n_sc} samples"
        )));
    }
    let bin_hz = fs / (2.0 * n_sc as f64);
    let mut scores = Vec::with_capacity((2 * search_bins + 1) as usize);
    for g in -search_bins..=search_bins {
        let f = g as f64 * bin_hz;
        let score = candidate_score(block1, sc1, f, fs)? + candidate_score(block2, sc2, f, fs)?;
        scores.push((g, score));
    }
    let (best_g, best_s) = scores
        .iter()
        .cloned()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let runner_up = scores
        .iter()
        .filter(|(g, _)| *g != best_g)
        .map(|(_, s)| *s)
        .fold(0.0f64, f64::max);
    let confident = best_s > 0.0 && (best_s - runner_up) / best_s > 0.01;
    Ok((best_g as f64 * bin_hz, confident))
}

/// Correlation peak of the (de-rotated, CP-discarded) block against its
/// reference sequence; repetitions two and three are averaged first.
fn candidate_score(block: &[Complex64], seq: &ChipSequence, f: f64, fs: f64) -> Result<f64> {
    let n = seq.len();
    let omega = -2.0 * PI * f / fs;
    let avg: Vec<Complex64> = (0..n)
        .map(|i| {
            let a = block[n + i] * Complex64::from_polar(1.0, omega * (n + i) as f64);
            let b = block[2 * n + i] * Complex64::from_polar(1.0, omega * (2 * n + i) as f64);
            (a + b) * 0.5
        })
        .collect();
    let corr = circular_correlate(&avg, seq.chips())?;
    Ok(corr.iter().map(|c| c.norm()).fold(0.0f64, f64::max))
}

/// Sampling-clock offset in ppm from the identical-PRBS-pair preamble.
///
/// For each pair the phase of Y2[k] Y1*[k] grows linearly in the signed
/// bin index with slope -2 pi delta; the slope is fitted by weighted
/// least squares per pair (weights |REF[k]|^2 |Y2[k] Y1*[k]|, DC excluded,
/// phases unwrapped outward from the low bins) and pairs are averaged
/// with their weight sums.
pub fn estimate_sfo_tsai(y: &[Complex64], ref_seq: &ChipSequence, m_sfo: usize) -> Result<f64> {
    let n = ref_seq.len();
    if m_sfo < 3 || m_sfo % 2 == 0 {
        return Err(Error::Config(format!("M_sfo = {m_sfo} must be odd and >= 3")));
    }
    if y.len() < m_sfo * n {
        return Err(Error::Argument(format!(
            "need {} samples for the SFO preamble, got {}",
            m_sfo * n,
            y.len()
        )));
    }
    let ref_spec = dft(&ref_seq.as_complex());
    let pairs = (m_sfo - 1) / 2;
    let specs: Vec<Vec<Complex64>> = (1..=2 * pairs)
        .map(|rep| dft(&y[n * rep..n * (rep + 1)]))
        .collect();

    // Stage 1: adjacent disjoint pairs (separation N). Unambiguous over
    // the full supported SFO range, but the short baseline limits
    // precision to a few ppm at moderate SNR.
    let mut num = 0.0;
    let mut den = 0.0;
    for pair in 0..pairs {
        let (slope, weight) = pair_phase_slope(&specs[2 * pair], &specs[2 * pair + 1], &ref_spec)?;
        num += slope * weight;
        den += weight;
    }
    if den <= 0.0 {
        return Err(Error::AcquisitionFailed("SFO preamble pairs carry no energy".into()));
    }
    let delta1 = -(num / den) / (2.0 * PI);

    // Stage 2: the same inter-pair phase-slope fit over wide pairs
    // (separation `pairs`*N) after removing the stage-1 prediction. The
    // residual slope is far from the wrap limit, and the longer baseline
    // divides the phase-noise floor by the separation.
    let gap = pairs; // reps (r, r + gap), r = 1..=pairs
    let mut num2 = 0.0;
    let mut den2 = 0.0;
    for r in 0..pairs {
        let x1 = &specs[r];
        let x2_adj: Vec<Complex64> = specs[r + gap]
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let ks = crate::dsp::signed_bin(k, n);
                v * Complex64::from_polar(1.0, 2.0 * PI * ks * delta1 * gap as f64)
            })
            .collect();
        let (slope, weight) = pair_phase_slope(x1, &x2_adj, &ref_spec)?;
        num2 += slope * weight;
        den2 += weight;
    }
    let delta_res = -(num2 / den2) / (2.0 * PI * gap as f64);
    Ok((delta1 + delta_res) * 1e6)
}

/// Fraction of the band used by the SFO phase fit. Fractional-delay
/// resampling kernels distort phases near Nyquist (the distortion grows
/// with the accumulated fractional delay of later preamble copies), so
/// the outer bins are excluded from the fit.
const SFO_FIT_BAND: f64 = 0.65;

/// WLS fit of arg(x2[k] x1*[k]) against the signed bin index.
fn pair_phase_slope(
    x1: &[Complex64],
    x2: &[Complex64],
    ref_spec: &[Complex64],
) -> Result<(f64, f64)> {
    let n = x1.len();
    let half = (n - 1) / 2;
    let k_lim = (SFO_FIT_BAND * half as f64).floor() as i64;
    // signed bins ascending: -k_lim..-1, then 1..k_lim (DC excluded)
    let mut entries: Vec<(f64, f64, f64)> = Vec::with_capacity(n - 1); // (k, phase, weight)
    for k_signed in -k_lim..=k_lim {
        if k_signed == 0 {
            continue;
        }
        let k = k_signed.rem_euclid(n as i64) as usize;
        let prod = x2[k] * x1[k].conj();
        let w = ref_spec[k].norm_sqr() * prod.norm();
        entries.push((k_signed as f64, prod.arg(), w));
    }
    // seed the unwrap from the 10 bins closest to DC
    let mut near: Vec<&(f64, f64, f64)> = entries.iter().collect();
    near.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    let seed = {
        let mut acc = Complex64::new(0.0, 0.0);
        for e in near.iter().take(10) {
            acc += Complex64::from_polar(e.2.max(1e-300), e.1);
        }
        acc.arg()
    };
    // unwrap outward in both directions starting from the seed
    let zero_idx = entries.iter().position(|e| e.0 > 0.0).unwrap();
    let mut phases = vec![0.0; entries.len()];
    let mut prev = seed;
    for i in zero_idx..entries.len() {
        phases[i] = unwrap_step(prev, entries[i].1);
        prev = phases[i];
    }
    prev = seed;
    for i in (0..zero_idx).rev() {
        phases[i] = unwrap_step(prev, entries[i].1);
        prev = phases[i];
    }
    // weighted least squares with intercept
    let (mut sw, mut sk, mut sp, mut skk, mut skp) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &(k, _, w)) in entries.iter().enumerate() {
        let phi = phases[i];
        sw += w;
        sk += w * k;
        sp += w * phi;
        skk += w * k * k;
        skp += w * k * phi;
    }
    let det = sw * skk - sk * sk;
    if det.abs() < 1e-30 {
        return Err(Error::AcquisitionFailed("degenerate SFO phase fit".into()));
    }
    let slope = (sw * skp - sk * sp) / det;
    if slope.abs() > PI {
        return Err(Error::OutOfRange(format!(
            "phase slope {slope:.3} rad/bin exceeds half a cycle; SFO beyond usable range"
        )));
    }
    Ok((slope, sw))
}

fn unwrap_step(prev: f64, raw: f64) -> f64 {
    let mut v = raw;
    while v - prev > PI {
        v -= 2.0 * PI;
    }
    while prev - v > PI {
        v += 2.0 * PI;
    }
    v
}

/// Matched-filter timing refinement: correlates the carrier-corrected
/// stream against the full known preamble over lags within +/-12 samples
/// of the coarse estimate.
fn refine_timing(
    y: &[Complex64],
    coarse: usize,
    seqs: &crate::txframe::FrameSequences,
    cfo_hz: f64,
    fs: f64,
) -> Result<usize> {
    let template = crate::txframe::build_sc_preamble(&seqs.sc1, &seqs.sc2)?;
    let len = template.len();
    // The plateau midpoint bias grows with the window length, so the
    // search span must scale with it.
    let span = seqs.sc1.len() / 8 + 16;
    let lo = coarse.saturating_sub(span);
    let hi = coarse + span;
    let omega = -2.0 * PI * cfo_hz / fs;
    let mut best = (coarse, -1.0f64);
    for n0 in lo..=hi {
        if n0 + len > y.len() {
            break;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &c) in template.iter().enumerate() {
            acc += y[n0 + i] * Complex64::from_polar(1.0, omega * i as f64) * c;
        }
        let score = acc.norm();
        if score > best.1 {
            best = (n0, score);
        }
    }
    Ok(best.0)
}

/// Undoes a sampling-clock offset by resampling with ratio 1/(1 + ppm e-6).
pub fn correct_sfo(y: &IqBuffer, ppm: f64) -> IqBuffer {
    crate::impairments::resample_by_ratio(y, 1.0 / (1.0 + ppm * 1e-6))
}

/// Options for the one-shot synchronization driver.
#[derive(Clone, Debug)]
pub struct SyncOptions {
    pub enable_integer_cfo: bool,
    pub int_search_bins: i32,
    pub enable_sfo: bool,
    /// Restrict the sliding metric to the first `metric_limit` samples.
    pub metric_limit: Option<usize>,
}

impl Default for SyncOptions {
    fn default() -> Self {
        SyncOptions {
            enable_integer_cfo: true,
            int_search_bins: DEFAULT_INT_CFO_BINS,
            enable_sfo: true,
            metric_limit: None,
        }
    }
}

/// Full acquisition: timing, carrier correction, clock correction.
/// Returns the report and the corrected stream re-based to the first
/// preamble sample (payload begins at `6 n_sc + m_sfo n`).
pub fn synchronize(
    y: &IqBuffer,
    plan: &crate::sysparams::FramePlan,
    seqs: &crate::txframe::FrameSequences,
    opts: &SyncOptions,
) -> Result<(SyncReport, IqBuffer)> {
    let n_sc = plan.n_sc;
    let limit = opts.metric_limit.unwrap_or(y.len()).min(y.len());
    let metric = sc_metric(&y.samples[..limit], n_sc)?;
    let (sto, plateau) = estimate_sto(&metric)?;
    if sto < -8 {
        return Err(Error::AcquisitionFailed(format!(
            "estimated frame start {sto} is before the buffer start"
        )));
    }
    let sto = sto.max(0);
    let cfo_frac = estimate_cfo_fractional(metric.p[plateau.midpoint], n_sc, plan.fs);

    // The plateau midpoint is only good to a few samples: the threshold
    // crossing extends past the flat top, and the extension is clipped
    // when the frame starts at the buffer edge. Refine with a matched
    // filter against the known preamble over a small lag window.
    let n0 = refine_timing(&y.samples, sto as usize, seqs, cfo_frac, plan.fs)?;

    let need = 6 * n_sc;
    if n0 + need > y.len() {
        return Err(Error::AcquisitionFailed("buffer ends inside the preamble".into()));
    }
    // fractional correction, phase referenced to the frame start
    let derot = |f: f64, base: usize, seg: &[Complex64]| -> Vec<Complex64> {
        let omega = -2.0 * PI * f / plan.fs;
        seg.iter()
            .enumerate()
            .map(|(i, s)| s * Complex64::from_polar(1.0, omega * (base + i) as f64))
            .collect()
    };
    let (cfo_int, confident) = if opts.enable_integer_cfo {
        let b1 = derot(cfo_frac, 0, &y.samples[n0..n0 + 3 * n_sc]);
        let b2 = derot(cfo_frac, 3 * n_sc, &y.samples[n0 + 3 * n_sc..n0 + 6 * n_sc]);
        estimate_cfo_integer(&b1, &b2, &seqs.sc1, &seqs.sc2, plan.fs, opts.int_search_bins)?
    } else {
        (0.0, true)
    };
    let cfo_total = cfo_frac + cfo_int;

    // carrier-corrected stream from the frame start on
    let corrected = derot(cfo_total, 0, &y.samples[n0..]);
    let mut stream = IqBuffer::new(corrected, y.sample_rate);

    let sfo_ppm = if opts.enable_sfo {
        let sfo_off = 6 * n_sc;
        if stream.len() < sfo_off + plan.m_sfo * plan.n {
            return Err(Error::AcquisitionFailed("buffer ends inside the SFO preamble".into()));
        }
        let ppm = estimate_sfo_tsai(
            &stream.samples[sfo_off..sfo_off + plan.m_sfo * plan.n],
            &seqs.payload,
            plan.m_sfo,
        )?;
        stream = correct_sfo(&stream, ppm);
        ppm
    } else {
        0.0
    };

    Ok((
        SyncReport {
            sto_samples: n0 as i64,
            cfo_frac_hz: cfo_frac,
            cfo_int_hz: cfo_int,
            cfo_total_hz: cfo_total,
            sfo_ppm,
            plateau_peak: plateau.peak,
            plateau_width: plateau.width(),
            cfo_int_confident: confident,
        },
        stream,
    ))
}
