//! Full impaired link: frame through STO + CFO + SFO + noise, acquired,
//! corrected, demodulated. Prints per-trial estimates and summary
//! statistics.
//!
//! Usage: impaired_link [trials]

use pmcw_radcom::impairments::ChannelConfig;
use pmcw_radcom::scenario::{mean_std, run_comm, Scenario};

fn main() -> pmcw_radcom::Result<()> {
    let trials: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);

    let mut sc = Scenario::from_preset("pmcw1")?;
    sc.plan.m_blocks = 1024;
    sc.trials = trials;
    sc.mode = pmcw_radcom::scenario::Mode::Comm;
    sc.channel = ChannelConfig {
        sto_samples: 12_345.0,
        cfo_hz: -85e3,
        sfo_ppm: 100.0,
        snr_db: 16.23,
        ..ChannelConfig::identity()
    };

    let t0 = std::time::Instant::now();
    let summary = run_comm(&sc)?;
    let dt = t0.elapsed();

    println!("trial  sto      cfo_total_hz  sfo_ppm   resid_cfo_hz  resid_sfo  post_sfo  ber      mer_db");
    for r in &summary.results {
        if let Some(e) = &r.error {
            println!("{:<5}  error: {e}", r.trial);
            continue;
        }
        let s = r.sync.as_ref().unwrap();
        println!(
            "{:<5}  {:<7}  {:<12.1}  {:<8.3}  {:<12.2}  {:<9.4}  {:<8.4}  {:<7.5}  {:.2}",
            r.trial,
            s.sto_samples,
            s.cfo_total_hz,
            s.sfo_ppm,
            r.residual_cfo_hz,
            r.residual_sfo_ppm,
            r.post_sfo_ppm,
            r.ber,
            r.mer_db
        );
    }

    let sto_err: Vec<f64> = summary
        .results
        .iter()
        .filter_map(|r| r.sync.as_ref().map(|s| s.sto_samples as f64 - 12_345.0))
        .collect();
    let cfo_err: Vec<f64> = summary
        .results
        .iter()
        .filter_map(|r| {
            r.sync
                .as_ref()
                .map(|s| s.cfo_total_hz + r.residual_cfo_hz - (-85e3))
        })
        .collect();
    let sfo_err: Vec<f64> = summary
        .results
        .iter()
        .filter_map(|r| r.sync.as_ref().map(|s| s.sfo_ppm - 100.0))
        .collect();
    let (m, s) = mean_std(&sto_err);
    println!("\nsto error:       {m:.3} +/- {s:.3} samples");
    let (m, s) = mean_std(&cfo_err);
    println!("total cfo error: {m:.2} +/- {s:.2} Hz");
    let (m, s) = mean_std(&sfo_err);
    println!("tsai sfo error:  {m:.4} +/- {s:.4} ppm");
    let (m, s) = mean_std(&summary.column(|r| r.post_sfo_ppm));
    println!("post-pilot sfo:  {m:.5} +/- {s:.5} ppm");
    let (m, _) = mean_std(&summary.column(|r| r.ber));
    println!("mean ber:        {m:.6}");
    println!(
        "{} trials in {:.2} s ({} acquisition failures, {} fatal)",
        summary.results.len(),
        dt.as_secs_f64(),
        summary.acquisition_failures,
        summary.fatal_errors
    );
    Ok(())
}
