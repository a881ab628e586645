//! Monostatic radar run: two point targets, range-velocity map, detection
//! list. Pass an output directory to also write the binary map and the
//! detection CSV.
//!
//! Usage: range_doppler_map [outdir]

use pmcw_radcom::scenario::{run_radar, write_radar_artifacts, Mode, Scenario, TargetSpec};

fn main() -> pmcw_radcom::Result<()> {
    let mut sc = Scenario::from_preset("pmcw1s")?;
    sc.mode = Mode::Radar;
    sc.channel.snr_db = -10.0;
    sc.targets = vec![
        TargetSpec {
            range_m: 15.0,
            velocity_mps: 20.0,
            gain_db: 0.0,
        },
        TargetSpec {
            range_m: 27.5,
            velocity_mps: -8.0,
            gain_db: -6.0,
        },
    ];

    let run = run_radar(&sc)?;
    println!(
        "map: {} range bins x {} velocity bins (dR {:.3} m, dv {:.3} m/s)",
        run.map.magnitudes.len(),
        run.map.velocity_axis_mps.len(),
        run.map.range_res_m,
        run.map.vel_res_mps
    );
    println!("detections (threshold {} dB over median):", sc.detect_threshold_db);
    for d in &run.detections {
        println!(
            "  range {:>7.3} m  velocity {:>8.3} m/s  power {:>6.2} dB",
            d.range_m, d.velocity_mps, d.power_db
        );
    }

    if let Some(outdir) = std::env::args().nth(1) {
        let path = std::path::PathBuf::from(outdir);
        write_radar_artifacts(&sc, &run, &path)?;
        println!("artifacts written to {}", path.display());
    }
    Ok(())
}
