//! Noiseless loopback through the full transmit / acquire / demodulate
//! chain for every desk-scale preset.

use pmcw_radcom::scenario::{run_comm, Mode, Scenario};
use pmcw_radcom::sysparams::DESK_PRESETS;

fn main() -> pmcw_radcom::Result<()> {
    println!("preset   trials  ber       mer_db   sto");
    for name in DESK_PRESETS {
        let mut sc = Scenario::from_preset(name)?;
        sc.mode = Mode::Loopback;
        sc.trials = 3;
        let summary = run_comm(&sc)?;
        for r in &summary.results {
            let sync = r.sync.as_ref().map(|s| s.sto_samples).unwrap_or(-1);
            println!(
                "{name:<8} {:<7} {:<9.6} {:<8.2} {sync}",
                r.trial, r.ber, r.mer_db
            );
        }
    }
    Ok(())
}
