//! Post-synchronization communication receive chain: block extraction
//! with cyclic-prefix discard, accumulation, circular correlation,
//! pilot-based residual-clock / Doppler / channel estimation,
//! equalization, and BPSK decisions with MER and BER.
//!
//! Processing order for the pilot corrections is fixed: residual-SFO
//! correction first (per-block cyclic shift), then Doppler de-rotation,
//! then channel-response averaging. Equalization divides in the
//! frequency domain before correlating (equalize-then-correlate).

use crate::dsp::{cyclic_fractional_shift, dft, idft, parabolic_offset};
use crate::error::{Error, Result};
use crate::seqgen::ChipSequence;
use crate::sysparams::FramePlan;
use num_complex::Complex64;
use std::f64::consts::PI;

/// MER is clamped here when the error power underflows.
pub const MER_CLAMP_DB: f64 = 300.0;

/// Accumulated payload blocks: M rows of N samples plus the pilot set.
#[derive(Clone, Debug)]
pub struct BlockMatrix {
    pub rows: Vec<Vec<Complex64>>,
    pub pilot_blocks: Vec<usize>,
    pub n: usize,
    pub a: usize,
}

/// Pilot-derived estimates.
#[derive(Clone, Debug)]
pub struct PilotEstimates {
    /// Averaged channel frequency response over N bins (DC forced to 1 and
    /// excluded from equalization).
    pub cfr: Vec<Complex64>,
    /// Residual carrier offset seen by the pilots, Hz.
    pub residual_cfo_hz: f64,
    /// Residual sampling-clock offset from the pilot peak drift, ppm.
    pub residual_sfo_ppm: f64,
    /// Re-estimated drift after the correction was applied, ppm.
    pub post_correction_sfo_ppm: f64,
    /// Sub-sample pilot correlation peak positions before correction.
    pub peak_positions: Vec<f64>,
}

/// Demodulation output.
#[derive(Clone, Debug)]
pub struct DemodReport {
    pub bits: Vec<u8>,
    /// Normalized soft symbols, one per data block.
    pub soft_symbols: Vec<Complex64>,
    pub mer_db: f64,
    /// Only present when the transmitted bits are known.
    pub ber: Option<f64>,
    /// Correlation lag used for symbol extraction.
    pub main_lag: usize,
}

/// Splits the payload-aligned stream into blocks, discards the first PRBS
/// repetition of each block (cyclic prefix), and accumulates the
/// remaining A-1 repetitions. Missing tail samples read as zero.
pub fn accumulate_blocks(y: &[Complex64], plan: &FramePlan) -> Result<BlockMatrix> {
    let (n, a, m) = (plan.n, plan.a, plan.m_blocks);
    let block_len = n * a;
    if y.len() + block_len < block_len * m {
        return Err(Error::Argument(format!(
            "payload needs {} samples, got {} (more than one block short)",
            block_len * m,
            y.len()
        )));
    }
    let mut rows = Vec::with_capacity(m);
    for k in 0..m {
        let base = k * block_len;
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        for rep in 1..a {
            let off = base + rep * n;
            for (i, r) in row.iter_mut().enumerate() {
                if off + i < y.len() {
                    *r += y[off + i];
                }
            }
        }
        rows.push(row);
    }
    Ok(BlockMatrix {
        rows,
        pilot_blocks: (0..m).filter(|k| plan.is_pilot_block(*k)).collect(),
        n,
        a,
    })
}

/// Circularly correlates every row with the reference sequence.
pub fn correlate_blocks(bm: &BlockMatrix, reference: &ChipSequence) -> Result<BlockMatrix> {
    if reference.len() != bm.n {
        return Err(Error::Argument(format!(
            "reference length {} does not match row length {}",
            reference.len(),
            bm.n
        )));
    }
    let rows = bm
        .rows
        .iter()
        .map(|row| crate::seqgen::circular_correlate(row, reference.chips()))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockMatrix { rows, ..bm.clone() })
}

/// Common main-path lag: argmax of the pilot-averaged correlation
/// magnitude.
pub fn main_path_lag(corr: &BlockMatrix) -> usize {
    let n = corr.n;
    let mut avg = vec![0.0f64; n];
    for &k in &corr.pilot_blocks {
        for (i, v) in corr.rows[k].iter().enumerate() {
            avg[i] += v.norm();
        }
    }
    (0..n).max_by(|&i, &j| avg[i].total_cmp(&avg[j])).unwrap_or(0)
}

/// Residual carrier offset from consecutive pilot correlation peaks:
/// f = angle(sum conj(p_i) p_{i+1}) / (2 pi dm_pil NA / Fs). The result
/// lives in [-f_D,max, +f_D,max); anything larger aliases.
pub fn estimate_pilot_doppler(corr: &BlockMatrix, plan: &FramePlan) -> Result<f64> {
    let pilots = &corr.pilot_blocks;
    if pilots.len() < 2 {
        return Err(Error::Argument("Doppler estimation needs at least two pilots".into()));
    }
    let lag = main_path_lag(corr);
    let mut acc = Complex64::new(0.0, 0.0);
    for w in pilots.windows(2) {
        if w[1] - w[0] != plan.dm_pil {
            continue;
        }
        acc += corr.rows[w[0]][lag].conj() * corr.rows[w[1]][lag];
    }
    let dt = plan.dm_pil as f64 * plan.block_duration();
    Ok(acc.arg() / (2.0 * PI * dt))
}

/// Sub-sample pilot correlation peak positions (parabolic interpolation),
/// expressed as drift relative to the first pilot, wrapped into
/// (-N/2, N/2].
pub fn pilot_peak_positions(corr: &BlockMatrix) -> Vec<f64> {
    let n = corr.n as f64;
    let mut positions = Vec::with_capacity(corr.pilot_blocks.len());
    for &k in &corr.pilot_blocks {
        let mags: Vec<f64> = corr.rows[k].iter().map(|c| c.norm()).collect();
        let idx = (0..corr.n)
            .max_by(|&i, &j| mags[i].total_cmp(&mags[j]))
            .unwrap_or(0);
        positions.push(idx as f64 + parabolic_offset(&mags, idx));
    }
    if let Some(&first) = positions.first() {
        for p in &mut positions {
            let mut d = *p - first;
            while d > n / 2.0 {
                d -= n;
            }
            while d <= -n / 2.0 {
                d += n;
            }
            *p = first + d;
        }
    }
    positions
}

/// Residual sampling-clock offset from the linear drift of pilot peak
/// positions across blocks. Returns (ppm, slope in samples per block).
pub fn estimate_residual_sfo(corr: &BlockMatrix, plan: &FramePlan) -> Result<(f64, f64)> {
    let pilots = &corr.pilot_blocks;
    if pilots.len() < 2 {
        return Err(Error::Argument("residual SFO needs at least two pilots".into()));
    }
    let positions = pilot_peak_positions(corr);
    // least-squares line fit: position vs pilot block index
    let xs: Vec<f64> = pilots.iter().map(|&k| k as f64).collect();
    let np = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / np;
    let my = positions.iter().sum::<f64>() / np;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(positions.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        return Err(Error::Argument("degenerate pilot geometry".into()));
    }
    let slope = num / den; // samples per block
    let ppm = slope / (plan.n * plan.a) as f64 * 1e6;
    Ok((ppm, slope))
}

/// Cyclically shifts row k by -slope*k samples (frequency-domain phase
/// ramp) to undo a linearly increasing delay.
pub fn correct_block_drift(bm: &BlockMatrix, slope_samples_per_block: f64) -> BlockMatrix {
    let rows = bm
        .rows
        .iter()
        .enumerate()
        .map(|(k, row)| cyclic_fractional_shift(row, -slope_samples_per_block * k as f64))
        .collect();
    BlockMatrix { rows, ..bm.clone() }
}

/// De-rotates row k by exp(-j 2 pi f t_k) with t_k = k * NA / Fs.
pub fn correct_doppler(bm: &BlockMatrix, f_hz: f64, plan: &FramePlan) -> BlockMatrix {
    let dt = plan.block_duration();
    let rows = bm
        .rows
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let rot = Complex64::from_polar(1.0, -2.0 * PI * f_hz * dt * k as f64);
            row.iter().map(|v| v * rot).collect()
        })
        .collect();
    BlockMatrix { rows, ..bm.clone() }
}

/// Averaged channel frequency response from the (corrected) raw pilot
/// rows: H[j] = mean_p DFT(row_p)[j] / ((A-1) REF[j]). The DC bin sits at
/// the reference-spectrum minimum and is excluded (forced to 1).
pub fn estimate_cfr(bm: &BlockMatrix, reference: &ChipSequence) -> Result<Vec<Complex64>> {
    if bm.pilot_blocks.is_empty() {
        return Err(Error::Argument("CFR estimation needs at least one pilot".into()));
    }
    let n = bm.n;
    let ref_spec = dft(&reference.as_complex());
    let scale = (bm.a - 1) as f64;
    let mut cfr = vec![Complex64::new(0.0, 0.0); n];
    for &k in &bm.pilot_blocks {
        let spec = dft(&bm.rows[k]);
        for j in 1..n {
            cfr[j] += spec[j] / (scale * ref_spec[j]);
        }
    }
    let pn = bm.pilot_blocks.len() as f64;
    for v in cfr.iter_mut().skip(1) {
        *v /= pn;
    }
    cfr[0] = Complex64::new(1.0, 0.0);
    Ok(cfr)
}

/// Equalizes each row in the frequency domain, correlates with the
/// reference, reads the symbol at the main-path lag, normalizes by the
/// pilot-derived scale, and slices the sign of the real part.
pub fn equalize_and_decide(
    bm: &BlockMatrix,
    cfr: &[Complex64],
    reference: &ChipSequence,
    tx_bits: Option<&[u8]>,
) -> Result<DemodReport> {
    let n = bm.n;
    if cfr.len() != n {
        return Err(Error::Argument(format!(
            "CFR length {} does not match row length {n}",
            cfr.len()
        )));
    }
    let ref_spec = dft(&reference.as_complex());
    // equalize-then-correlate, one inverse transform per row
    let corr_rows: Vec<Vec<Complex64>> = bm
        .rows
        .iter()
        .map(|row| {
            let mut spec = dft(row);
            for (j, v) in spec.iter_mut().enumerate() {
                if j != 0 {
                    *v /= cfr[j];
                }
                *v *= ref_spec[j].conj();
            }
            idft(&spec)
        })
        .collect();
    let corr = BlockMatrix {
        rows: corr_rows,
        ..bm.clone()
    };
    let lag = main_path_lag(&corr);

    let pilot_set: std::collections::HashSet<usize> = bm.pilot_blocks.iter().copied().collect();
    let mut scale = Complex64::new(0.0, 0.0);
    for &k in &bm.pilot_blocks {
        scale += corr.rows[k][lag];
    }
    scale /= bm.pilot_blocks.len() as f64;
    if scale.norm() < 1e-300 {
        return Err(Error::Argument("pilot scale is zero; nothing to normalize by".into()));
    }

    let mut soft = Vec::new();
    let mut bits = Vec::new();
    for (k, row) in corr.rows.iter().enumerate() {
        if pilot_set.contains(&k) {
            continue;
        }
        let s = row[lag] / scale;
        soft.push(s);
        bits.push(if s.re < 0.0 { 1u8 } else { 0u8 });
    }

    let mut err_power = 0.0;
    for (s, &b) in soft.iter().zip(bits.iter()) {
        let ideal = if b == 0 { 1.0 } else { -1.0 };
        err_power += (s - Complex64::new(ideal, 0.0)).norm_sqr();
    }
    let sig_power = soft.len() as f64; // ideal symbols are unit power
    let mer_db = if soft.is_empty() {
        f64::NAN
    } else if err_power <= sig_power * 1e-30 {
        MER_CLAMP_DB
    } else {
        (10.0 * (sig_power / err_power).log10()).min(MER_CLAMP_DB)
    };

    let ber = tx_bits.map(|tx| {
        let errors = tx.iter().zip(bits.iter()).filter(|(a, b)| a != b).count();
        if tx.is_empty() {
            0.0
        } else {
            errors as f64 / tx.len() as f64
        }
    });

    Ok(DemodReport {
        bits,
        soft_symbols: soft,
        mer_db,
        ber,
        main_lag: lag,
    })
}

/// Full post-synchronization receive chain. `pilot_corrections` enables
/// the residual-SFO and Doppler loops; without them only CFR estimation
/// and equalization run.
pub fn demodulate(
    payload: &[Complex64],
    plan: &FramePlan,
    reference: &ChipSequence,
    pilot_corrections: bool,
    tx_bits: Option<&[u8]>,
) -> Result<(DemodReport, PilotEstimates)> {
    let mut bm = accumulate_blocks(payload, plan)?;
    let mut corr = correlate_blocks(&bm, reference)?;

    let mut residual_sfo_ppm = 0.0;
    let mut post_sfo_ppm = 0.0;
    let mut residual_cfo_hz = 0.0;
    let peak_positions = pilot_peak_positions(&corr);

    if pilot_corrections && bm.pilot_blocks.len() >= 2 {
        let (ppm, slope) = estimate_residual_sfo(&corr, plan)?;
        residual_sfo_ppm = ppm;
        bm = correct_block_drift(&bm, slope);
        corr = correlate_blocks(&bm, reference)?;
        let (post, _) = estimate_residual_sfo(&corr, plan)?;
        post_sfo_ppm = post;

        residual_cfo_hz = estimate_pilot_doppler(&corr, plan)?;
        bm = correct_doppler(&bm, residual_cfo_hz, plan);
    }

    let cfr = estimate_cfr(&bm, reference)?;
    let report = equalize_and_decide(&bm, &cfr, reference, tx_bits)?;
    Ok((
        report,
        PilotEstimates {
            cfr,
            residual_cfo_hz,
            residual_sfo_ppm,
            post_correction_sfo_ppm: post_sfo_ppm,
            peak_positions,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqgen::{generate_mls, LfsrSpec, PolySelect};
    use crate::sysparams::preset;
    use crate::txframe::{build_payload, FrameSequences};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_plan(m_blocks: usize) -> FramePlan {
        FramePlan {
            m_blocks,
            ..preset("pmcw1").unwrap()
        }
    }

    fn payload_for(plan: &FramePlan, bits: &[u8]) -> (Vec<Complex64>, ChipSequence) {
        let seqs = FrameSequences::for_plan(plan).unwrap();
        let samples = build_payload(&seqs.payload, bits, plan).unwrap();
        (
            samples.into_iter().map(|c| Complex64::new(c, 0.0)).collect(),
            seqs.payload,
        )
    }

    #[test]
    fn accumulation_basics() {
        let plan = FramePlan { a: 2, ..small_plan(10) };
        let bits = vec![0u8; plan.payload_bit_count()];
        let (payload, _) = payload_for(&plan, &bits);
        let bm = accumulate_blocks(&payload, &plan).unwrap();
        // A=2: row equals the second repetition only
        for k in 0..plan.m_blocks {
            for i in 0..plan.n {
                assert_eq!(bm.rows[k][i], payload[k * plan.n * 2 + plan.n + i]);
            }
        }

        // noiseless pilot amplitude is (A-1)|s|
        let plan = small_plan(10);
        let bits = vec![0u8; plan.payload_bit_count()];
        let (payload, seq) = payload_for(&plan, &bits);
        let bm = accumulate_blocks(&payload, &plan).unwrap();
        for i in 0..plan.n {
            assert_abs_diff_eq!(bm.rows[0][i].re, 4.0 * seq.chips()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn accumulation_snr_gain() {
        // noise-only rows: accumulated noise power grows by A-1, while a
        // coherent signal amplitude would grow by A-1; SNR gain is
        // 10 log10(A-1) = 6.02 dB for A=5
        let plan = small_plan(10);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let total = plan.n * plan.a * plan.m_blocks;
        let trials = 40;
        let mut ratio_sum = 0.0;
        for _ in 0..trials {
            let noise: Vec<Complex64> = (0..total)
                .map(|_| {
                    Complex64::new(
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                        rng.sample::<f64, _>(rand_distr::StandardNormal),
                    )
                })
                .collect();
            let bm = accumulate_blocks(&noise, &plan).unwrap();
            let acc_power: f64 = bm
                .rows
                .iter()
                .flat_map(|r| r.iter())
                .map(|c| c.norm_sqr())
                .sum::<f64>()
                / (plan.n * plan.m_blocks) as f64;
            ratio_sum += acc_power / 2.0; // input noise power is 2 per complex sample
        }
        let noise_growth_db = 10.0 * (ratio_sum / trials as f64).log10();
        // signal amplitude gain is 20 log10(A-1) = 12.04 dB, so SNR gain is
        // 12.04 - noise_growth = 6.02 +/- tolerance
        assert_abs_diff_eq!(20.0 * 4.0f64.log10() - noise_growth_db, 6.02, epsilon = 0.3);
    }

    #[test]
    fn correlation_peak_is_processing_gain() {
        let plan = small_plan(10);
        let bits = vec![0u8; plan.payload_bit_count()];
        let (payload, seq) = payload_for(&plan, &bits);
        let bm = accumulate_blocks(&payload, &plan).unwrap();
        let corr = correlate_blocks(&bm, &seq).unwrap();
        // pilot block: peak 255 * 4 = 1020
        assert_abs_diff_eq!(corr.rows[0][0].re, 1020.0, epsilon = 1e-9);
        // zero row stays zero
        let mut zbm = bm.clone();
        zbm.rows[1] = vec![Complex64::new(0.0, 0.0); plan.n];
        let zcorr = correlate_blocks(&zbm, &seq).unwrap();
        assert!(zcorr.rows[1].iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn single_repetition_row_is_autocorrelation() {
        let seq = generate_mls(&LfsrSpec::from_table(8, PolySelect::Primary).unwrap());
        let bm = BlockMatrix {
            rows: vec![seq.as_complex()],
            pilot_blocks: vec![0],
            n: 255,
            a: 2,
        };
        let corr = correlate_blocks(&bm, &seq).unwrap();
        assert_abs_diff_eq!(corr.rows[0][0].re, 255.0, epsilon = 1e-9);
        for lag in 1..255 {
            assert_abs_diff_eq!(corr.rows[0][lag].re, -1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn doppler_estimator_recovers_phase_ramp() {
        // constructed ramp on pmcw3 geometry: -15 kHz, |f| < f_D,max
        let plan = FramePlan { m_blocks: 64, ..preset("pmcw3").unwrap() };
        let bits = vec![0u8; plan.payload_bit_count()];
        let (mut payload, seq) = payload_for(&plan, &bits);
        let f = -15e3;
        for (i, s) in payload.iter_mut().enumerate() {
            *s *= Complex64::from_polar(1.0, 2.0 * PI * f * i as f64 / plan.fs);
        }
        let bm = accumulate_blocks(&payload, &plan).unwrap();
        let corr = correlate_blocks(&bm, &seq).unwrap();
        let est = estimate_pilot_doppler(&corr, &plan).unwrap();
        assert!((est - f).abs() < 50.0, "est {est}");

        // zero ramp: zero estimate
        let (payload, seq) = payload_for(&plan, &bits);
        let bm = accumulate_blocks(&payload, &plan).unwrap();
        let corr = correlate_blocks(&bm, &seq).unwrap();
        assert_abs_diff_eq!(estimate_pilot_doppler(&corr, &plan).unwrap(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn doppler_estimator_wraps_beyond_unambiguous_range() {
        // pmcw4 geometry: f_D,max = 9.77 kHz; -15 kHz wraps to about +4.54 kHz
        let plan = FramePlan { m_blocks: 32, ..preset("pmcw4").unwrap() };
        let bits = vec![0u8; plan.payload_bit_count()];
        let (mut payload, seq) = payload_for(&plan, &bits);
        let f = -15e3;
        for (i, s) in payload.iter_mut().enumerate() {
            *s *= Complex64::from_polar(1.0, 2.0 * PI * f * i as f64 / plan.fs);
        }
        let bm = accumulate_blocks(&payload, &plan).unwrap();
        let corr = correlate_blocks(&bm, &seq).unwrap();
        let est = estimate_pilot_doppler(&corr, &plan).unwrap();
        let fdmax = plan.doppler_max();
        let expected = f + 2.0 * fdmax; // wrap by 2 f_D,max
        assert!((est - expected).abs() < 100.0, "est {est} expected {expected}");
    }

    #[test]
    fn residual_sfo_from_linear_drift() {
        // 2 ppm drift over many blocks (about 10 samples end to end),
        // synthesized directly as per-block cyclic shifts of identical
        // accumulated rows; parabolic refinement plus the LS fit recovers
        // the slope within 5%
        let plan = small_plan(4096);
        let seq = generate_mls(&LfsrSpec::from_table(8, PolySelect::Primary).unwrap());
        let row: Vec<Complex64> = seq.chips().iter().map(|&c| Complex64::new(4.0 * c, 0.0)).collect();
        let bm = BlockMatrix {
            rows: vec![row; plan.m_blocks],
            pilot_blocks: (0..plan.m_blocks).filter(|k| plan.is_pilot_block(*k)).collect(),
            n: plan.n,
            a: plan.a,
        };
        let ppm_true = 2.0;
        let slope_true = ppm_true * 1e-6 * (plan.n * plan.a) as f64;
        let drifted = correct_block_drift(&bm, -slope_true); // inject +drift
        let corr = correlate_blocks(&drifted, &seq).unwrap();
        let (ppm, slope) = estimate_residual_sfo(&corr, &plan).unwrap();
        assert!((ppm - ppm_true).abs() / ppm_true < 0.05, "ppm {ppm}");
        assert!((slope - slope_true).abs() / slope_true < 0.05);

        // undoing the estimated drift leaves a sub-percent residual
        let fixed = correct_block_drift(&drifted, slope);
        let refit = correlate_blocks(&fixed, &seq).unwrap();
        let (ppm_left, _) = estimate_residual_sfo(&refit, &plan).unwrap();
        assert!(ppm_left.abs() < 0.05 * ppm_true, "residual {ppm_left}");

        // zero drift: slope ~ 0
        let corr = correlate_blocks(&bm, &seq).unwrap();
        let (_, slope) = estimate_residual_sfo(&corr, &plan).unwrap();
        assert!(slope.abs() < 0.01, "slope {slope}");
    }

    #[test]
    fn three_point_fit_matches_two_point_form() {
        // pilots at 0, 5, 10 with exactly collinear positions: the LS
        // slope equals the end-point slope
        let plan = small_plan(11);
        let bits = vec![0u8; plan.payload_bit_count()];
        let (payload, seq) = payload_for(&plan, &bits);
        let bm = accumulate_blocks(&payload, &plan).unwrap();
        let slope_true = 0.013;
        let drifted = correct_block_drift(&bm, -slope_true);
        let corr = correlate_blocks(&drifted, &seq).unwrap();
        assert_eq!(corr.pilot_blocks, vec![0, 5, 10]);
        let (_, slope) = estimate_residual_sfo(&corr, &plan).unwrap();
        let positions = pilot_peak_positions(&corr);
        let two_point = (positions[2] - positions[0]) / 10.0;
        assert_abs_diff_eq!(slope, two_point, epsilon = 1e-3);
    }

    #[test]
    fn cfr_identity_and_two_path() {
        let plan = small_plan(10);
        let bits = vec![0u8; plan.payload_bit_count()];
        let (payload, seq) = payload_for(&plan, &bits);
        let bm = accumulate_blocks(&payload, &plan).unwrap();
        let cfr = estimate_cfr(&bm, &seq).unwrap();
        for j in 1..plan.n {
            assert!((cfr[j] - Complex64::new(1.0, 0.0)).norm() < 1e-6, "bin {j}");
        }

        // two-path channel (1, 0.3j at 7 samples): impulse response taps
        let iq = crate::iq::IqBuffer::new(payload.clone(), plan.fs);
        let paths = [
            crate::impairments::PathSpec::direct(),
            crate::impairments::PathSpec {
                delay_s: 7e-9,
                gain_re: 0.0,
                gain_im: 0.3,
                doppler_hz: 0.0,
            },
        ];
        let faded = crate::impairments::apply_multipath(&iq, &paths).unwrap();
        let bm = accumulate_blocks(&faded.samples, &plan).unwrap();
        let cfr = estimate_cfr(&bm, &seq).unwrap();
        let mut cir = idft(&cfr);
        cir[0] += Complex64::new(0.0, 0.0); // DC forced to 1 perturbs taps slightly
        assert!((cir[0] - Complex64::new(1.0, 0.0)).norm() < 1e-2, "tap0 {}", cir[0]);
        assert!((cir[7] - Complex64::new(0.0, 0.3)).norm() < 1e-2, "tap7 {}", cir[7]);

        // a path beyond N samples aliases back (delay N+1 -> tap 1)
        let paths = [
            crate::impairments::PathSpec::direct(),
            crate::impairments::PathSpec {
                delay_s: (plan.n + 1) as f64 / plan.fs,
                gain_re: 0.4,
                gain_im: 0.0,
                doppler_hz: 0.0,
            },
        ];
        let faded = crate::impairments::apply_multipath(&iq, &paths).unwrap();
        // skip the first block, whose leading samples miss the echo
        let bm = accumulate_blocks(&faded.samples[plan.n * plan.a..], &plan).unwrap();
        let cfr = estimate_cfr(&bm, &seq).unwrap();
        let cir = idft(&cfr);
        assert!((cir[1] - Complex64::new(0.4, 0.0)).norm() < 1e-2, "tap1 {}", cir[1]);
    }

    #[test]
    fn noiseless_loop_back_recovers_bits() {
        let plan = small_plan(50);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bits: Vec<u8> = (0..plan.payload_bit_count()).map(|_| rng.gen_range(0..2)).collect();
        let (payload, seq) = payload_for(&plan, &bits);
        let (report, _) = demodulate(&payload, &plan, &seq, true, Some(&bits)).unwrap();
        assert_eq!(report.ber, Some(0.0));
        assert!(report.mer_db >= 60.0, "MER {}", report.mer_db);
        assert_eq!(report.bits, bits);
    }

    #[test]
    fn chain_is_scale_invariant() {
        let plan = small_plan(20);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bits: Vec<u8> = (0..plan.payload_bit_count()).map(|_| rng.gen_range(0..2)).collect();
        let (payload, seq) = payload_for(&plan, &bits);
        let alpha = Complex64::new(-0.3, 1.7);
        let scaled: Vec<Complex64> = payload.iter().map(|s| s * alpha).collect();
        let (r1, _) = demodulate(&payload, &plan, &seq, true, Some(&bits)).unwrap();
        let (r2, _) = demodulate(&scaled, &plan, &seq, true, Some(&bits)).unwrap();
        assert_eq!(r1.bits, r2.bits);
        assert_eq!(r1.ber, r2.ber);
        // both MERs are at the numerical clamp or equal to within noise
        assert!((r1.mer_db - r2.mer_db).abs() < 1.0);
    }

    #[test]
    fn single_pilot_rejects_doppler_estimate() {
        let plan = small_plan(5); // only block 0 is a pilot
        let bits = vec![0u8; plan.payload_bit_count()];
        let (payload, seq) = payload_for(&plan, &bits);
        let bm = accumulate_blocks(&payload, &plan).unwrap();
        let corr = correlate_blocks(&bm, &seq).unwrap();
        assert!(estimate_pilot_doppler(&corr, &plan).is_err());
    }
}
