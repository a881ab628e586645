//! Maximum-length sequence generation and correlation primitives.
//!
//! Sequences come from Fibonacci-configuration linear-feedback shift
//! registers: the feedback bit is the XOR of the tapped stages, the output
//! is taken from stage `m`, and chips map register bit 0 to +1 and bit 1 to
//! -1. Generator polynomials are validated against a built-in table of
//! primitive polynomials with two entries per degree; the second entry
//! backs the second synchronization preamble block, which needs a distinct
//! register.

use crate::dsp::{dft, idft};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Built-in primitive polynomial tap sets, two per degree for m in 3..=11.
/// Taps are exponents of the polynomial x^m + ... + 1 (the constant term is
/// implicit). The pair members generate distinct sequences with low mutual
/// cross-correlation.
pub const PRIMITIVE_POLYS: &[(u32, &[u32], &[u32])] = &[
    (3, &[3, 2], &[3, 1]),
    (4, &[4, 1], &[4, 3]),
    (5, &[5, 2], &[5, 3]),
    (6, &[6, 1], &[6, 5]),
    (7, &[7, 1], &[7, 3]),
    (8, &[8, 4, 3, 2], &[8, 6, 5, 3]),
    (9, &[9, 4], &[9, 5]),
    (10, &[10, 3], &[10, 7]),
    (11, &[11, 2], &[11, 9]),
];

/// Which table entry to use for a given degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolySelect {
    Primary,
    Secondary,
}

/// A validated LFSR configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LfsrSpec {
    degree: u32,
    taps: Vec<u32>,
    seed: u64,
}

impl LfsrSpec {
    /// Builds a spec, validating the tap set against the built-in table and
    /// rejecting the all-zero seed.
    pub fn new(degree: u32, taps: &[u32], seed: u64) -> Result<Self> {
        if seed == 0 {
            return Err(Error::Config("LFSR seed must be nonzero".into()));
        }
        if degree >= 64 || seed >= (1u64 << degree) {
            return Err(Error::Config(format!(
                "seed 0x{seed:x} does not fit in {degree} bits"
            )));
        }
        let mut sorted: Vec<u32> = taps.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let known = PRIMITIVE_POLYS.iter().any(|(m, p, s)| {
            *m == degree && (sorted.as_slice() == *p || sorted.as_slice() == *s)
        });
        if !known {
            return Err(Error::Config(format!(
                "tap set {taps:?} is not a known primitive polynomial of degree {degree}"
            )));
        }
        Ok(Self {
            degree,
            taps: sorted,
            seed,
        })
    }

    /// Table lookup: degree plus pair selection, all-ones seed.
    pub fn from_table(degree: u32, select: PolySelect) -> Result<Self> {
        let entry = PRIMITIVE_POLYS
            .iter()
            .find(|(m, _, _)| *m == degree)
            .ok_or_else(|| {
                Error::Config(format!("no built-in primitive polynomial of degree {degree}"))
            })?;
        let taps = match select {
            PolySelect::Primary => entry.1,
            PolySelect::Secondary => entry.2,
        };
        let seed = (1u64 << degree) - 1;
        Self::new(degree, taps, seed)
    }

    /// Table lookup by sequence length N = 2^m - 1.
    pub fn for_length(n: usize, select: PolySelect) -> Result<Self> {
        let m = degree_for_length(n)?;
        Self::from_table(m, select)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn taps(&self) -> &[u32] {
        &self.taps
    }

    /// Sequence length 2^m - 1.
    pub fn sequence_len(&self) -> usize {
        (1usize << self.degree) - 1
    }
}

/// Returns m such that n = 2^m - 1, or an error if n is not of that form.
pub fn degree_for_length(n: usize) -> Result<u32> {
    let m = (n + 1).trailing_zeros();
    if n >= 3 && n + 1 == 1usize << m {
        Ok(m)
    } else {
        Err(Error::Config(format!("{n} is not of the form 2^m - 1 with m >= 2")))
    }
}

/// A +/-1-valued maximum-length chip sequence with its originating spec.
#[derive(Clone, Debug, PartialEq)]
pub struct ChipSequence {
    chips: Vec<f64>,
    spec: LfsrSpec,
}

impl ChipSequence {
    pub fn chips(&self) -> &[f64] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn spec(&self) -> &LfsrSpec {
        &self.spec
    }

    pub fn as_complex(&self) -> Vec<Complex64> {
        self.chips.iter().map(|&c| Complex64::new(c, 0.0)).collect()
    }
}

/// Clocks the Fibonacci register 2^m - 1 times and maps output bits to
/// chips (bit 0 -> +1, bit 1 -> -1).
pub fn generate_mls(spec: &LfsrSpec) -> ChipSequence {
    let m = spec.degree;
    let n = spec.sequence_len();
    // state bit i-1 holds stage i; output is stage m
    let mut state = spec.seed;
    let mut chips = Vec::with_capacity(n);
    for _ in 0..n {
        let out = (state >> (m - 1)) & 1;
        chips.push(if out == 0 { 1.0 } else { -1.0 });
        let mut fb = 0u64;
        for &t in &spec.taps {
            fb ^= (state >> (t - 1)) & 1;
        }
        state = ((state << 1) | fb) & ((1u64 << m) - 1);
    }
    ChipSequence {
        chips,
        spec: spec.clone(),
    }
}

/// Circular correlation `out[l] = sum_k a[(k+l) mod L] * b[k]` computed via
/// a length-L DFT product (odd lengths permitted, no zero padding).
pub fn circular_correlate(a: &[Complex64], b: &[f64]) -> Result<Vec<Complex64>> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "circular correlation length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let bc: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fa = dft(a);
    let fb = dft(&bc);
    let prod: Vec<Complex64> = fa.iter().zip(fb.iter()).map(|(x, y)| x * y.conj()).collect();
    Ok(idft(&prod))
}

/// Maximum absolute circular cross-correlation of two equal-length chip
/// sequences, normalized by the length.
pub fn cross_correlation_bound(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "cross-correlation length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let ac: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let corr = circular_correlate(&ac, b)?;
    let max = corr.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    Ok(max / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// O(L^2) double-loop oracle for the circular correlation.
    fn correlate_oracle(a: &[Complex64], b: &[f64]) -> Vec<Complex64> {
        let l = a.len();
        (0..l)
            .map(|lag| {
                (0..l)
                    .map(|k| a[(k + lag) % l] * b[k])
                    .sum::<Complex64>()
            })
            .collect()
    }

    #[test]
    fn hand_simulated_degree_3_register() {
        // hand simulation of taps {3,2}, all-ones seed:
        // output bits 1,1,1,0,0,1,0 -> chips -1,-1,-1,+1,+1,-1,+1
        let spec = LfsrSpec::new(3, &[3, 2], 0b111).unwrap();
        let seq = generate_mls(&spec);
        assert_eq!(seq.chips(), &[-1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0]);
        let minus = seq.chips().iter().filter(|&&c| c < 0.0).count();
        assert_eq!(minus, 4);
        assert_eq!(seq.len() - minus, 3);
    }

    #[test]
    fn degree_8_has_length_255() {
        let spec = LfsrSpec::from_table(8, PolySelect::Primary).unwrap();
        assert_eq!(generate_mls(&spec).len(), 255);
    }

    #[test]
    fn degree_7_autocorrelation_two_valued() {
        let seq = generate_mls(&LfsrSpec::from_table(7, PolySelect::Primary).unwrap());
        let corr = correlate_oracle(&seq.as_complex(), seq.chips());
        assert_abs_diff_eq!(corr[0].re, 127.0, epsilon = 1e-9);
        for lag in 1..127 {
            assert_abs_diff_eq!(corr[lag].re, -1.0, epsilon = 1e-9);
            assert_abs_diff_eq!(corr[lag].im, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn all_builtin_polys_yield_valid_mls() {
        for &(m, p, s) in PRIMITIVE_POLYS {
            for taps in [p, s] {
                let spec = LfsrSpec::new(m, taps, (1u64 << m) - 1).unwrap();
                let seq = generate_mls(&spec);
                let n = (1usize << m) - 1;
                assert_eq!(seq.len(), n);
                // balance: one more -1 than +1
                let minus = seq.chips().iter().filter(|&&c| c < 0.0).count();
                assert_eq!(minus, (n + 1) / 2, "balance failed for m={m} taps={taps:?}");
                // two-valued autocorrelation via FFT path
                let corr = circular_correlate(&seq.as_complex(), seq.chips()).unwrap();
                assert_abs_diff_eq!(corr[0].re, n as f64, epsilon = 1e-6);
                for lag in 1..n {
                    assert_abs_diff_eq!(corr[lag].re, -1.0, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn fft_correlation_matches_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for l in [7usize, 31, 127] {
            let a: Vec<Complex64> = (0..l)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let b: Vec<f64> = (0..l)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            let fast = circular_correlate(&a, &b).unwrap();
            let slow = correlate_oracle(&a, &b);
            for (x, y) in fast.iter().zip(slow.iter()) {
                assert!((x - y).norm() <= 1e-9 * (1.0 + y.norm()));
            }
        }
    }

    #[test]
    fn constant_sequences_correlate_to_length() {
        let a = vec![Complex64::new(1.0, 0.0); 4];
        let b = vec![1.0; 4];
        let corr = circular_correlate(&a, &b).unwrap();
        for v in corr {
            assert_abs_diff_eq!(v.re, 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn delayed_mls_peaks_at_lag() {
        let seq = generate_mls(&LfsrSpec::from_table(8, PolySelect::Primary).unwrap());
        let n = seq.len();
        let delayed: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(seq.chips()[(i + n - 3) % n], 0.0))
            .collect();
        let corr = circular_correlate(&delayed, seq.chips()).unwrap();
        let peak = (0..n).max_by(|&i, &j| corr[i].norm().total_cmp(&corr[j].norm())).unwrap();
        assert_eq!(peak, 3);
        assert_abs_diff_eq!(corr[3].re, 255.0, epsilon = 1e-6);
    }

    #[test]
    fn cross_correlation_bounds() {
        let a = generate_mls(&LfsrSpec::from_table(7, PolySelect::Primary).unwrap());
        let b = generate_mls(&LfsrSpec::from_table(7, PolySelect::Secondary).unwrap());
        // self
        assert_abs_diff_eq!(
            cross_correlation_bound(a.chips(), a.chips()).unwrap(),
            1.0,
            epsilon = 1e-9
        );
        // built-in degree-7 pair
        assert!(cross_correlation_bound(a.chips(), b.chips()).unwrap() <= 0.18);
        // all-ones vs MLS: balance property leaves |sum| = 1 at every lag
        let ones = vec![1.0; a.len()];
        assert_abs_diff_eq!(
            cross_correlation_bound(&ones, a.chips()).unwrap(),
            1.0 / a.len() as f64,
            epsilon = 1e-9
        );
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(LfsrSpec::new(3, &[3, 2], 0).is_err());
        assert!(LfsrSpec::new(7, &[7, 2], 1).is_err());
        assert!(LfsrSpec::from_table(12, PolySelect::Primary).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = LfsrSpec::from_table(9, PolySelect::Secondary).unwrap();
        assert_eq!(generate_mls(&spec), generate_mls(&spec));
    }
}
