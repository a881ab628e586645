//! Frame-plan validation and derived communication / radar performance
//! figures. This module is the numerical contract for the rest of the
//! crate: every axis, gain, and rate elsewhere must agree with it.

use crate::error::{Error, Result};
use crate::seqgen::degree_for_length;
use serde::{Deserialize, Serialize};

/// Exact speed of light. The rounded 3e8 value is not good enough to
/// reproduce the published range figures.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Structural parameters of a PMCW frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    /// Payload PRBS length in chips (2^m - 1).
    pub n: usize,
    /// PRBS repetitions per block (first acts as cyclic prefix).
    pub a: usize,
    /// Payload + pilot block count.
    pub m_blocks: usize,
    /// Sync preamble PRBS length in chips.
    pub n_sc: usize,
    /// PRBS count in the SFO preamble (odd; one CP copy plus pairs).
    pub m_sfo: usize,
    /// Pilot block spacing in blocks.
    pub dm_pil: usize,
    /// Sample rate, Hz (equals the chip rate and signal bandwidth).
    pub fs: f64,
    /// Carrier frequency, Hz (only enters through the wavelength).
    pub fc: f64,
}

impl FramePlan {
    pub fn validate(&self) -> Result<()> {
        degree_for_length(self.n)
            .map_err(|_| Error::Config(format!("N = {} is not 2^m - 1", self.n)))?;
        degree_for_length(self.n_sc)
            .map_err(|_| Error::Config(format!("N_sc = {} is not 2^m - 1", self.n_sc)))?;
        if self.n_sc != (self.n + 1) / 2 - 1 {
            return Err(Error::Config(format!(
                "N_sc = {} must equal (N+1)/2 - 1 = {}",
                self.n_sc,
                (self.n + 1) / 2 - 1
            )));
        }
        if self.m_sfo < 3 || self.m_sfo % 2 == 0 {
            return Err(Error::Config(format!(
                "M_sfo = {} must be odd and >= 3",
                self.m_sfo
            )));
        }
        if self.a < 2 {
            return Err(Error::Config(format!("A = {} must be >= 2", self.a)));
        }
        if self.dm_pil < 1 {
            return Err(Error::Config("pilot spacing must be >= 1".into()));
        }
        if self.m_blocks < self.dm_pil {
            return Err(Error::Config(format!(
                "M = {} must be >= pilot spacing {}",
                self.m_blocks, self.dm_pil
            )));
        }
        if self.fs <= 0.0 || self.fc <= 0.0 {
            return Err(Error::Config("sample rate and carrier must be positive".into()));
        }
        Ok(())
    }

    /// Carrier wavelength, m.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.fc
    }

    /// Block duration NA/Fs, s.
    pub fn block_duration(&self) -> f64 {
        (self.n * self.a) as f64 / self.fs
    }

    /// Pilots sit at block indices 0, dm_pil, 2*dm_pil, ...
    pub fn pilot_count(&self) -> usize {
        (self.m_blocks + self.dm_pil - 1) / self.dm_pil
    }

    pub fn payload_bit_count(&self) -> usize {
        self.m_blocks - self.pilot_count()
    }

    pub fn is_pilot_block(&self, k: usize) -> bool {
        k % self.dm_pil == 0
    }

    /// Total frame length in samples: two sync blocks, SFO preamble, payload.
    pub fn frame_len(&self) -> usize {
        6 * self.n_sc + self.m_sfo * self.n + self.n * self.a * self.m_blocks
    }

    /// Frame duration, s.
    pub fn dwell_time(&self) -> f64 {
        self.frame_len() as f64 / self.fs
    }

    /// Pilot-limited unambiguous Doppler span, Hz.
    pub fn doppler_max(&self) -> f64 {
        1.0 / (2.0 * self.block_duration() * self.dm_pil as f64)
    }
}

/// Every derived performance figure for a frame plan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerformanceReport {
    /// Communication processing gain 10*log10(N(A-1)), dB.
    pub gp_comm_db: f64,
    /// Maximum estimable channel delay N/Fs, s.
    pub tau_max_s: f64,
    /// Maximum unambiguous Doppler at the main path, Hz.
    pub doppler_max_hz: f64,
    /// Payload data rate at 100% duty cycle, bit/s.
    pub data_rate_bps: f64,
    /// Radar processing gain 10*log10(N(A-1)M), dB.
    pub gp_rad_db: f64,
    /// Range resolution c/(2Fs), m.
    pub range_res_m: f64,
    /// Maximum unambiguous range, m.
    pub range_max_m: f64,
    /// Velocity resolution, m/s.
    pub vel_res_mps: f64,
    /// Maximum unambiguous velocity, m/s.
    pub vel_max_mps: f64,
    /// Frame duration including preamble, s.
    pub dwell_time_s: f64,
    pub pilot_count: usize,
    pub payload_bits: usize,
}

/// Derives the full performance report from a validated frame plan.
pub fn derive_parameters(plan: &FramePlan) -> Result<PerformanceReport> {
    plan.validate()?;
    let n = plan.n as f64;
    let a = plan.a as f64;
    let m = plan.m_blocks as f64;
    let lambda = plan.wavelength();
    let block = plan.block_duration();
    let dwell = plan.dwell_time();
    let pilots = plan.pilot_count();
    let bits = plan.payload_bit_count();
    Ok(PerformanceReport {
        gp_comm_db: 10.0 * (n * (a - 1.0)).log10(),
        tau_max_s: n / plan.fs,
        doppler_max_hz: plan.doppler_max(),
        data_rate_bps: bits as f64 / dwell,
        gp_rad_db: 10.0 * (n * (a - 1.0) * m).log10(),
        range_res_m: SPEED_OF_LIGHT / (2.0 * plan.fs),
        range_max_m: n * SPEED_OF_LIGHT / (2.0 * plan.fs),
        vel_res_mps: lambda / (2.0 * m * block),
        vel_max_mps: lambda / (4.0 * block),
        dwell_time_s: dwell,
        pilot_count: pilots,
        payload_bits: bits,
    })
}

/// Returns the sync PRBS length (N+1)/2 - 1 for a payload length N,
/// checking that both are of maximal-length form.
pub fn validate_s_and_c_length(n: usize) -> Result<usize> {
    degree_for_length(n)?;
    let n_sc = (n + 1) / 2 - 1;
    degree_for_length(n_sc)?;
    Ok(n_sc)
}

impl PerformanceReport {
    /// Flat key = value text block.
    pub fn to_text(&self) -> String {
        format!(
            "gp_comm_db = {:.4}\ntau_max_us = {:.4}\ndoppler_max_khz = {:.4}\n\
             data_rate_kbps = {:.4}\ngp_rad_db = {:.4}\nrange_res_m = {:.4}\n\
             range_max_m = {:.4}\nvel_res_mps = {:.4}\nvel_max_mps = {:.4}\n\
             dwell_time_ms = {:.4}\npilot_count = {}\npayload_bits = {}\n",
            self.gp_comm_db,
            self.tau_max_s * 1e6,
            self.doppler_max_hz * 1e-3,
            self.data_rate_bps * 1e-3,
            self.gp_rad_db,
            self.range_res_m,
            self.range_max_m,
            self.vel_res_mps,
            self.vel_max_mps,
            self.dwell_time_s * 1e3,
            self.pilot_count,
            self.payload_bits
        )
    }

    pub const CSV_HEADER: &'static str = "config,gp_comm_db,tau_max_s,doppler_max_hz,\
data_rate_bps,gp_rad_db,range_res_m,range_max_m,vel_res_mps,vel_max_mps,dwell_time_s,\
pilot_count,payload_bits";

    /// One CSV row; column order matches [`PerformanceReport`] field order.
    pub fn to_csv_row(&self, config_id: &str) -> String {
        format!(
            "{},{:.6},{:.9e},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.9e},{},{}",
            config_id,
            self.gp_comm_db,
            self.tau_max_s,
            self.doppler_max_hz,
            self.data_rate_bps,
            self.gp_rad_db,
            self.range_res_m,
            self.range_max_m,
            self.vel_res_mps,
            self.vel_max_mps,
            self.dwell_time_s,
            self.pilot_count,
            self.payload_bits
        )
    }
}

/// Full-scale presets matching the four published parameterizations, plus
/// desk-scale variants (suffix `s`) with the block count reduced for fast
/// runs. Returns `None` for unknown names.
pub fn preset(name: &str) -> Option<FramePlan> {
    let (n, m_blocks) = match name {
        "pmcw1" => (255, 8192),
        "pmcw2" => (511, 4096),
        "pmcw3" => (1023, 2048),
        "pmcw4" => (2047, 1024),
        "pmcw1s" => (255, 256),
        "pmcw2s" => (511, 256),
        "pmcw3s" => (1023, 256),
        "pmcw4s" => (2047, 128),
        _ => return None,
    };
    Some(FramePlan {
        n,
        a: 5,
        m_blocks,
        n_sc: (n + 1) / 2 - 1,
        m_sfo: 21,
        dm_pil: 5,
        fs: 1e9,
        fc: 79e9,
    })
}

pub const FULL_PRESETS: [&str; 4] = ["pmcw1", "pmcw2", "pmcw3", "pmcw4"];
pub const DESK_PRESETS: [&str; 4] = ["pmcw1s", "pmcw2s", "pmcw3s", "pmcw4s"];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn round2(x: f64) -> f64 {
        (x * 100.0).round() / 100.0
    }

    #[test]
    fn published_table_column_1() {
        let r = derive_parameters(&preset("pmcw1").unwrap()).unwrap();
        assert_abs_diff_eq!(round2(r.gp_comm_db), 30.09);
        assert_abs_diff_eq!(round2(r.tau_max_s * 1e6), 0.26);
        assert_abs_diff_eq!(round2(r.doppler_max_hz * 1e-3), 78.43);
        assert_abs_diff_eq!(round2(r.data_rate_bps * 1e-3), 627.03);
        assert_abs_diff_eq!(round2(r.gp_rad_db), 69.22);
        assert_abs_diff_eq!(round2(r.range_res_m), 0.15);
        assert_abs_diff_eq!(round2(r.range_max_m), 38.22);
        assert_abs_diff_eq!(round2(r.vel_res_mps), 0.18);
        assert_abs_diff_eq!(round2(r.vel_max_mps), 744.09);
    }

    #[test]
    fn published_table_column_4() {
        let r = derive_parameters(&preset("pmcw4").unwrap()).unwrap();
        assert_abs_diff_eq!(round2(r.data_rate_bps * 1e-3), 77.78);
        assert_abs_diff_eq!(round2(r.doppler_max_hz * 1e-3), 9.77);
        assert_abs_diff_eq!(round2(r.range_max_m), 306.84);
        assert_abs_diff_eq!(round2(r.vel_max_mps), 92.69);
    }

    #[test]
    fn dwell_times_cluster_near_10_5_ms() {
        for name in FULL_PRESETS {
            let r = derive_parameters(&preset(name).unwrap()).unwrap();
            let ms = r.dwell_time_s * 1e3;
            assert!((10.44..=10.54).contains(&ms), "{name}: {ms} ms");
        }
    }

    #[test]
    fn degenerate_single_pilot_plan() {
        let plan = FramePlan {
            n: 255,
            a: 2,
            m_blocks: 1,
            n_sc: 127,
            m_sfo: 3,
            dm_pil: 1,
            fs: 1e9,
            fc: 79e9,
        };
        let r = derive_parameters(&plan).unwrap();
        assert_eq!(r.pilot_count, 1);
        assert_eq!(r.payload_bits, 0);
        assert_eq!(r.data_rate_bps, 0.0);
    }

    #[test]
    fn sync_length_relation() {
        assert_eq!(validate_s_and_c_length(255).unwrap(), 127);
        assert_eq!(validate_s_and_c_length(511).unwrap(), 255);
        assert_eq!(validate_s_and_c_length(7).unwrap(), 3);
        assert!(validate_s_and_c_length(256).is_err());
    }

    #[test]
    fn monotonicity_in_n_at_fixed_a() {
        let mut prev: Option<PerformanceReport> = None;
        for name in FULL_PRESETS {
            let r = derive_parameters(&preset(name).unwrap()).unwrap();
            if let Some(p) = prev {
                assert!(r.gp_comm_db > p.gp_comm_db);
                assert!(r.tau_max_s > p.tau_max_s);
                assert!(r.range_max_m > p.range_max_m);
                assert!(r.doppler_max_hz < p.doppler_max_hz);
                assert!(r.data_rate_bps < p.data_rate_bps);
                assert!(r.vel_max_mps < p.vel_max_mps);
            }
            prev = Some(r);
        }
    }

    #[test]
    fn invariant_violations_name_the_constraint() {
        let mut plan = preset("pmcw1").unwrap();
        plan.m_sfo = 20;
        let err = derive_parameters(&plan).unwrap_err();
        assert!(err.to_string().contains("M_sfo"));
        let mut plan = preset("pmcw1").unwrap();
        plan.n_sc = 255;
        assert!(derive_parameters(&plan).unwrap_err().to_string().contains("N_sc"));
    }
}
