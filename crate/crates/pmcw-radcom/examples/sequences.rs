//! Maximal-length sequence generation and correlation properties.
//!
//! Usage: sequences [degree]   (default 8)

use pmcw_radcom::seqgen::{
    circular_correlate, cross_correlation_bound, generate_mls, LfsrSpec, PolySelect,
};

fn main() -> pmcw_radcom::Result<()> {
    let degree: u32 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(8);

    let a = generate_mls(&LfsrSpec::from_table(degree, PolySelect::Primary)?);
    let b = generate_mls(&LfsrSpec::from_table(degree, PolySelect::Secondary)?);
    let n = a.len();
    println!("degree {degree}: N = {n}");
    println!("primary taps:   {:?}", a.spec().taps());
    println!("secondary taps: {:?}", b.spec().taps());

    let balance: f64 = a.chips().iter().sum();
    println!("chip sum (balance): {balance}");

    let ac = circular_correlate(&a.as_complex(), a.chips())?;
    let peak = ac[0].re;
    let off: Vec<f64> = ac[1..].iter().map(|v| v.re).collect();
    let (min, max) = off
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    println!("autocorrelation: peak {peak:.1}, off-peak range [{min:.6}, {max:.6}]");

    let bound = cross_correlation_bound(a.chips(), b.chips())?;
    println!("primary/secondary cross-correlation bound: {bound:.4} (x N = {:.1})", bound * n as f64);
    Ok(())
}
