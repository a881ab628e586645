//! Acquisition walk-through on an impaired stream: sliding timing metric,
//! plateau structure, and the resulting offset estimates.

use pmcw_radcom::acquisition::{find_plateaus, sc_metric, synchronize, SyncOptions};
use pmcw_radcom::impairments::{apply_channel, ChannelConfig};
use pmcw_radcom::scenario::build_trial_frame;
use pmcw_radcom::sysparams::preset;

fn main() -> pmcw_radcom::Result<()> {
    let plan = preset("pmcw1s").unwrap();
    let sto = 4321.0;
    let cfo = -85e3;
    let sfo = 100.0;

    let frame = build_trial_frame(&plan, 7)?;
    let channel = ChannelConfig {
        sto_samples: sto,
        cfo_hz: cfo,
        sfo_ppm: sfo,
        snr_db: 16.23,
        ..ChannelConfig::identity()
    };
    let rx = apply_channel(&frame.buffer, &channel)?;

    // metric over the search region only; the frame tail is irrelevant
    let metric = sc_metric(&rx.samples[..20_000], plan.n_sc)?;
    let plateaus = find_plateaus(&metric);
    println!("timing metric plateaus (true start {sto}):");
    for p in &plateaus {
        println!(
            "  [{:>6}..{:>6}]  width {:>4}  peak {:.4}",
            p.start,
            p.end,
            p.width(),
            p.peak
        );
    }

    let (report, _stream) = synchronize(&rx, &plan, &frame.sequences, &SyncOptions::default())?;
    println!("\nestimates vs truth:");
    println!("  sto  {:>12}   (true {sto})", report.sto_samples);
    println!(
        "  cfo  {:>12.1}   (true {cfo}; fractional {:.1} + integer {:.1})",
        report.cfo_total_hz, report.cfo_frac_hz, report.cfo_int_hz
    );
    println!("  sfo  {:>12.4}   (true {sfo} ppm)", report.sfo_ppm);
    Ok(())
}
