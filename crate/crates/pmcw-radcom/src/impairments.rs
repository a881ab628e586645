//! Channel and front-end mismatch emulation: multipath with per-path
//! delay/Doppler/gain, carrier frequency offset (with its phase offset),
//! sampling frequency offset, symbol timing offset, and additive noise.
//!
//! Composition order is fixed: multipath -> CFO -> SFO -> STO+noise.
//! Fractional delays and the SFO resampler share the 8-tap windowed-sinc
//! interpolator from [`crate::dsp`].

use crate::dsp::sinc_interp;
use crate::error::{Error, Result};
use crate::iq::IqBuffer;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// One propagation path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    /// Delay in seconds (fractional sample delays permitted).
    pub delay_s: f64,
    pub gain_re: f64,
    pub gain_im: f64,
    /// Doppler shift in Hz.
    pub doppler_hz: f64,
}

impl PathSpec {
    pub fn gain(&self) -> Complex64 {
        Complex64::new(self.gain_re, self.gain_im)
    }

    pub fn direct() -> Self {
        PathSpec {
            delay_s: 0.0,
            gain_re: 1.0,
            gain_im: 0.0,
            doppler_hz: 0.0,
        }
    }
}

/// Complete channel description. Entry 0 of `paths` is the main path and
/// must carry the largest gain magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub paths: Vec<PathSpec>,
    /// Symbol timing offset in samples (integer + fractional).
    pub sto_samples: f64,
    pub cfo_hz: f64,
    /// Carrier phase offset at sample 0, rad.
    pub cpo_rad: f64,
    /// Receiver sampling clock offset, ppm.
    pub sfo_ppm: f64,
    /// Per-complex-sample SNR at the receiver input, dB. Infinity disables
    /// the noise source.
    pub snr_db: f64,
    pub noise_seed: u64,
}

impl ChannelConfig {
    pub fn identity() -> Self {
        ChannelConfig {
            paths: vec![PathSpec::direct()],
            sto_samples: 0.0,
            cfo_hz: 0.0,
            cpo_rad: 0.0,
            sfo_ppm: 0.0,
            snr_db: f64::INFINITY,
            noise_seed: 0,
        }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::Config("channel needs at least one path".into()));
        }
        let main = self.paths[0].gain().norm();
        for (i, p) in self.paths.iter().enumerate() {
            if p.delay_s < 0.0 {
                return Err(Error::Config(format!("path {i} has negative delay")));
            }
            if i > 0 && p.gain().norm() > main {
                return Err(Error::Config(
                    "path 0 must be the main path with the largest gain".into(),
                ));
            }
        }
        if self.cfo_hz.abs() >= fs / 2.0 {
            return Err(Error::Config("|CFO| must be below Fs/2".into()));
        }
        if self.sfo_ppm.abs() >= 1000.0 {
            return Err(Error::Config("|SFO| must be below 1000 ppm".into()));
        }
        if self.sto_samples < 0.0 {
            return Err(Error::Config("STO must be non-negative".into()));
        }
        Ok(())
    }
}

/// Superimposes delayed, Doppler-shifted, scaled copies of the input.
/// Output length grows by the largest integer path delay.
pub fn apply_multipath(x: &IqBuffer, paths: &[PathSpec]) -> Result<IqBuffer> {
    if paths.is_empty() {
        return Err(Error::Config("channel needs at least one path".into()));
    }
    let fs = x.sample_rate;
    let max_delay = paths
        .iter()
        .map(|p| (p.delay_s * fs).ceil() as usize)
        .max()
        .unwrap();
    let out_len = x.len() + max_delay;
    let mut out = vec![Complex64::new(0.0, 0.0); out_len];
    for p in paths {
        let d = p.delay_s * fs;
        let gain = p.gain();
        let d_int = d.round();
        let integer_delay = (d - d_int).abs() < 1e-9;
        let omega = 2.0 * std::f64::consts::PI * p.doppler_hz / fs;
        for (n, o) in out.iter_mut().enumerate() {
            let v = if integer_delay {
                let idx = n as f64 - d_int;
                if idx >= 0.0 && (idx as usize) < x.len() {
                    x.samples[idx as usize]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            } else {
                sinc_interp(&x.samples, n as f64 - d)
            };
            *o += gain * v * Complex64::from_polar(1.0, omega * n as f64);
        }
    }
    Ok(IqBuffer::new(out, fs))
}

/// Rotates the stream by a carrier frequency offset and initial phase:
/// y[n] = x[n] * exp(j(2 pi cfo n / Fs + phi0)).
pub fn apply_cfo(x: &IqBuffer, cfo_hz: f64, phi0_rad: f64) -> IqBuffer {
    let omega = 2.0 * std::f64::consts::PI * cfo_hz / x.sample_rate;
    let samples = x
        .samples
        .iter()
        .enumerate()
        .map(|(n, s)| s * Complex64::from_polar(1.0, omega * n as f64 + phi0_rad))
        .collect();
    IqBuffer::new(samples, x.sample_rate)
}

/// Resamples with a receiver clock running (1 + ppm*1e-6) faster than the
/// transmitter clock: output sample n reads position n/(1+delta), so the
/// apparent timing drifts by delta*n samples at sample n.
pub fn apply_sfo(x: &IqBuffer, ppm: f64) -> IqBuffer {
    resample_by_ratio(x, 1.0 + ppm * 1e-6)
}

/// Resamples so that output sample n reads input position n * ratio_inv...
/// specifically position n / ratio. `ratio > 1` stretches the stream.
pub fn resample_by_ratio(x: &IqBuffer, ratio: f64) -> IqBuffer {
    if (ratio - 1.0).abs() < 1e-15 {
        return x.clone();
    }
    let out_len = (x.len() as f64 * ratio).floor() as usize;
    let samples = (0..out_len)
        .map(|n| sinc_interp(&x.samples, n as f64 / ratio))
        .collect();
    IqBuffer::new(samples, x.sample_rate)
}

/// Prepends the timing offset (noise-only lead-in for the integer part,
/// windowed-sinc shift for the fractional part) and adds circularly
/// symmetric complex Gaussian noise at the requested per-sample SNR.
/// Signal power is measured over the input buffer, before noise.
pub fn apply_sto_and_noise(x: &IqBuffer, sto_samples: f64, snr_db: f64, seed: u64) -> Result<IqBuffer> {
    if sto_samples < 0.0 {
        return Err(Error::Config("STO must be non-negative".into()));
    }
    let int_part = sto_samples.floor() as usize;
    let frac = sto_samples - int_part as f64;

    let shifted: Vec<Complex64> = if frac.abs() < 1e-12 {
        x.samples.clone()
    } else {
        (0..x.len() + 1)
            .map(|n| sinc_interp(&x.samples, n as f64 - frac))
            .collect()
    };

    let mut out = vec![Complex64::new(0.0, 0.0); int_part];
    out.extend(shifted);

    if snr_db.is_finite() {
        let signal_power = x.power();
        let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
        let sigma = (noise_power / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        for s in &mut out {
            *s += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(IqBuffer::new(out, x.sample_rate))
}

/// Full impairment chain in the fixed order multipath -> CFO -> SFO ->
/// STO+noise.
pub fn apply_channel(x: &IqBuffer, cfg: &ChannelConfig) -> Result<IqBuffer> {
    cfg.validate(x.sample_rate)?;
    let y = apply_multipath(x, &cfg.paths)?;
    let y = apply_cfo(&y, cfg.cfo_hz, cfg.cpo_rad);
    let y = apply_sfo(&y, cfg.sfo_ppm);
    apply_sto_and_noise(&y, cfg.sto_samples, cfg.snr_db, cfg.noise_seed)
}
