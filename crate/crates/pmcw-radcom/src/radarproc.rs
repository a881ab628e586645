//! Monostatic radar processing: per-block range profiles, slow-time DFT
//! across blocks, range-velocity map, and fixed-threshold detection.
//!
//! The monostatic receiver shares the transmit clock, so no timing or
//! carrier recovery runs here; the transmit frame itself is the
//! correlation reference and the block symbols are known.

use crate::commdemod::{accumulate_blocks, correlate_blocks, BlockMatrix};
use crate::dsp::{dft, parabolic_offset};
use crate::error::{Error, Result};
use crate::seqgen::ChipSequence;
use crate::sysparams::{FramePlan, SPEED_OF_LIGHT};
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::{Read as _, Write as _};
use std::path::Path;

const MAP_MAGIC: &[u8; 8] = b"PMCWRD1\0";

/// Range-velocity magnitude map. Rows are range bins (0..N), columns are
/// velocity bins after the DFT shift (negative velocities first, zero in
/// the center).
#[derive(Clone, Debug)]
pub struct RangeDopplerMap {
    /// magnitudes[range_bin][velocity_bin]
    pub magnitudes: Vec<Vec<f64>>,
    pub range_axis_m: Vec<f64>,
    pub velocity_axis_mps: Vec<f64>,
    pub range_res_m: f64,
    pub vel_res_mps: f64,
}

/// One detected target.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub range_m: f64,
    pub velocity_mps: f64,
    /// Peak power relative to the map median, dB.
    pub power_db: f64,
    pub range_bin: usize,
    pub velocity_bin: usize,
}

/// Per-block range profiles: accumulate the A-1 post-prefix repetitions of
/// each block, circularly correlate with the reference, and strip the
/// known BPSK block symbols. `symbols` holds one value in {+1, -1} per
/// block, pilots included.
pub fn range_profiles(
    payload: &[Complex64],
    plan: &FramePlan,
    reference: &ChipSequence,
    symbols: &[f64],
) -> Result<BlockMatrix> {
    if symbols.len() != plan.m_blocks {
        return Err(Error::Argument(format!(
            "need one symbol per block ({}), got {}",
            plan.m_blocks,
            symbols.len()
        )));
    }
    let bm = accumulate_blocks(payload, plan)?;
    let mut corr = correlate_blocks(&bm, reference)?;
    for (row, &s) in corr.rows.iter_mut().zip(symbols.iter()) {
        if s != 1.0 {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
    }
    Ok(corr)
}

/// Slow-time DFT across blocks for each range bin, shifted so velocity
/// zero sits in the center column. `window` optionally tapers the slow
/// time samples (length M); default processing is rectangular.
pub fn range_doppler(
    profiles: &BlockMatrix,
    plan: &FramePlan,
    window: Option<&[f64]>,
) -> Result<RangeDopplerMap> {
    let n = profiles.n;
    let m = profiles.rows.len();
    if m != plan.m_blocks {
        return Err(Error::Argument(format!(
            "profile count {m} does not match plan block count {}",
            plan.m_blocks
        )));
    }
    if let Some(w) = window {
        if w.len() != m {
            return Err(Error::Argument(format!(
                "window length {} must equal block count {m}",
                w.len()
            )));
        }
    }
    let half = m / 2;
    let magnitudes: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|l| {
            let slow: Vec<Complex64> = (0..m)
                .map(|k| {
                    let v = profiles.rows[k][l];
                    match window {
                        Some(w) => v * w[k],
                        None => v,
                    }
                })
                .collect();
            let spec = dft(&slow);
            // shift: output column j holds DFT bin (j - floor(M/2)) mod M
            (0..m)
                .map(|j| spec[(j + m - half) % m].norm())
                .collect()
        })
        .collect();

    let range_res_m = SPEED_OF_LIGHT / (2.0 * plan.fs);
    let vel_res_mps = plan.wavelength() / (2.0 * m as f64 * plan.block_duration());
    let range_axis_m = (0..n).map(|l| l as f64 * range_res_m).collect();
    let velocity_axis_mps = (0..m)
        .map(|j| (j as f64 - half as f64) * vel_res_mps)
        .collect();
    Ok(RangeDopplerMap {
        magnitudes,
        range_axis_m,
        velocity_axis_mps,
        range_res_m,
        vel_res_mps,
    })
}

/// Fixed-threshold local-maximum detector. A cell is a detection when its
/// magnitude exceeds the map median by `threshold_db` and is strictly
/// larger than its four neighbors (circular in both axes; periodic
/// correlation and DFT make both dimensions wrap). Peak positions are
/// refined with quadratic interpolation on each axis.
pub fn detect(map: &RangeDopplerMap, threshold_db: f64) -> Vec<Detection> {
    let n = map.magnitudes.len();
    if n == 0 {
        return Vec::new();
    }
    let m = map.magnitudes[0].len();
    let mut flat: Vec<f64> = map.magnitudes.iter().flatten().copied().collect();
    flat.sort_by(f64::total_cmp);
    let median = flat[flat.len() / 2].max(f64::MIN_POSITIVE);
    let gate = median * 10f64.powf(threshold_db / 20.0);

    let half = m / 2;
    let mut out = Vec::new();
    for l in 0..n {
        for j in 0..m {
            let v = map.magnitudes[l][j];
            if v <= gate {
                continue;
            }
            let up = map.magnitudes[(l + n - 1) % n][j];
            let dn = map.magnitudes[(l + 1) % n][j];
            let lf = map.magnitudes[l][(j + m - 1) % m];
            let rt = map.magnitudes[l][(j + 1) % m];
            if v <= up || v < dn || v <= lf || v < rt {
                continue;
            }
            let dj = parabolic_offset(&map.magnitudes[l], j);
            let col: Vec<f64> = (0..n).map(|i| map.magnitudes[i][j]).collect();
            let dl = parabolic_offset(&col, l);
            let range_m = ((l as f64 + dl).rem_euclid(n as f64)) * map.range_res_m;
            let velocity_mps = (j as f64 + dj - half as f64) * map.vel_res_mps;
            out.push(Detection {
                range_m,
                velocity_mps,
                power_db: 20.0 * (v / median).log10(),
                range_bin: l,
                velocity_bin: j,
            });
        }
    }
    out.sort_by(|a, b| b.power_db.total_cmp(&a.power_db));
    out
}

impl RangeDopplerMap {
    /// Writes the map as row-major little-endian 32-bit floats behind a
    /// self-describing header: magic, row count, column count, range bin
    /// width, velocity bin width.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let n = self.magnitudes.len();
        let m = if n == 0 { 0 } else { self.magnitudes[0].len() };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAP_MAGIC)?;
        f.write_all(&(n as u64).to_le_bytes())?;
        f.write_all(&(m as u64).to_le_bytes())?;
        f.write_all(&self.range_res_m.to_le_bytes())?;
        f.write_all(&self.vel_res_mps.to_le_bytes())?;
        for row in &self.magnitudes {
            for &v in row {
                f.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        f.read_exact(&mut magic)?;
        if &magic != MAP_MAGIC {
            return Err(Error::Format("bad range-Doppler map magic".into()));
        }
        let mut b8 = [0u8; 8];
        f.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        f.read_exact(&mut b8)?;
        let m = u64::from_le_bytes(b8) as usize;
        f.read_exact(&mut b8)?;
        let range_res_m = f64::from_le_bytes(b8);
        f.read_exact(&mut b8)?;
        let vel_res_mps = f64::from_le_bytes(b8);
        let mut magnitudes = Vec::with_capacity(n);
        let mut b4 = [0u8; 4];
        for _ in 0..n {
            let mut row = Vec::with_capacity(m);
            for _ in 0..m {
                f.read_exact(&mut b4).map_err(|_| {
                    Error::Format(format!("map payload truncated, expected {n}x{m} cells"))
                })?;
                row.push(f32::from_le_bytes(b4) as f64);
            }
            magnitudes.push(row);
        }
        let half = m / 2;
        Ok(RangeDopplerMap {
            magnitudes,
            range_axis_m: (0..n).map(|l| l as f64 * range_res_m).collect(),
            velocity_axis_mps: (0..m)
                .map(|j| (j as f64 - half as f64) * vel_res_mps)
                .collect(),
            range_res_m,
            vel_res_mps,
        })
    }
}

pub const DETECTION_CSV_HEADER: &str = "range_m,velocity_mps,power_db,range_bin,velocity_bin";

pub fn detections_to_csv(detections: &[Detection]) -> String {
    let mut s = String::from(DETECTION_CSV_HEADER);
    s.push('\n');
    for d in detections {
        s.push_str(&format!(
            "{:.6},{:.6},{:.3},{},{}\n",
            d.range_m, d.velocity_mps, d.power_db, d.range_bin, d.velocity_bin
        ));
    }
    s
}
