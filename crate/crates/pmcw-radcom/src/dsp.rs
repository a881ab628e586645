//! Shared DFT helpers and interpolation primitives.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Forward DFT, unnormalized (matches the textbook analysis equation).
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(x.len()).process(&mut buf);
    buf
}

/// Inverse DFT with 1/L normalization.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(x.len()).process(&mut buf);
    let scale = 1.0 / x.len() as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Signed frequency index for bin `k` of a length-`n` DFT.
pub fn signed_bin(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Cyclically shifts `x` by the (possibly fractional) amount `delay` in
/// samples, via a frequency-domain phase ramp over signed bins.
pub fn cyclic_fractional_shift(x: &[Complex64], delay: f64) -> Vec<Complex64> {
    let n = x.len();
    let mut spec = dft(x);
    for (k, v) in spec.iter_mut().enumerate() {
        let f = signed_bin(k, n);
        let phase = -2.0 * std::f64::consts::PI * f * delay / n as f64;
        *v *= Complex64::from_polar(1.0, phase);
    }
    idft(&spec)
}

/// Number of taps used by the windowed-sinc interpolator.
pub const SINC_TAPS: usize = 8;

/// Evaluates `x` at the fractional position `t` (in samples) with an 8-tap
/// Hann-windowed sinc kernel. Positions outside the buffer read as zero.
pub fn sinc_interp(x: &[Complex64], t: f64) -> Complex64 {
    let half = (SINC_TAPS / 2) as isize;
    let base = t.floor() as isize;
    let frac = t - base as f64;
    // On-grid positions short-circuit so identity resampling is exact.
    if frac.abs() < 1e-12 {
        return sample_or_zero(x, base);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut wsum = 0.0;
    for i in (1 - half)..=half {
        let u = frac - i as f64; // distance from tap to target
        let w = normalized_sinc(u) * hann(u / half as f64);
        acc += sample_or_zero(x, base + i) * w;
        wsum += w;
    }
    // Renormalize so a constant input stays constant.
    if wsum.abs() > 1e-12 {
        acc / wsum
    } else {
        acc
    }
}

fn sample_or_zero(x: &[Complex64], idx: isize) -> Complex64 {
    if idx >= 0 && (idx as usize) < x.len() {
        x[idx as usize]
    } else {
        Complex64::new(0.0, 0.0)
    }
}

fn normalized_sinc(u: f64) -> f64 {
    if u.abs() < 1e-12 {
        1.0
    } else {
        let pu = std::f64::consts::PI * u;
        pu.sin() / pu
    }
}

fn hann(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * u).cos())
    }
}

/// Refines a peak position to sub-bin precision by fitting a parabola
/// through the sample and its two neighbours (log-magnitude domain).
/// `mags` are magnitudes; `idx` is the integer peak. Returns the offset in
/// (-0.5, 0.5) to add to `idx`.
pub fn parabolic_offset(mags: &[f64], idx: usize) -> f64 {
    let n = mags.len();
    if n < 3 {
        return 0.0;
    }
    let l = mags[(idx + n - 1) % n].max(1e-300).ln();
    let c = mags[idx].max(1e-300).ln();
    let r = mags[(idx + 1) % n].max(1e-300).ln();
    let denom = l - 2.0 * c + r;
    if denom.abs() < 1e-30 {
        0.0
    } else {
        (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    }
}
