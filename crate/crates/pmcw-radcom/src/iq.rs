//! Complex baseband sample buffers and the on-disk I/Q dump format.
//!
//! File layout: 16-byte header (magic `PMCWIQ1\0` + little-endian u64 sample
//! count) followed by interleaved little-endian f32 pairs (I, Q). A sidecar
//! `.meta` text file carries sample rate and scenario hash.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"PMCWIQ1\0";

/// Complex baseband sample stream with sample-rate metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct IqBuffer {
    pub samples: Vec<Complex64>,
    /// Sample rate in Hz.
    pub sample_rate: f64,
}

impl IqBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power per complex sample.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Writes the buffer in the binary I/Q dump format.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(MAGIC)?;
        f.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for s in &self.samples {
            f.write_all(&(s.re as f32).to_le_bytes())?;
            f.write_all(&(s.im as f32).to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }

    /// Reads a buffer previously written with [`IqBuffer::write_to`].
    ///
    /// The sample rate is not part of the binary format; callers supply it
    /// (normally from the sidecar metadata).
    pub fn read_from(path: &Path, sample_rate: f64) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut header = [0u8; 16];
        f.read_exact(&mut header)
            .map_err(|_| Error::Format("file shorter than 16-byte header".into()))?;
        if &header[..8] != MAGIC {
            return Err(Error::Format("bad magic, not a PMCWIQ1 file".into()));
        }
        let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
        let mut payload = Vec::new();
        f.read_to_end(&mut payload)?;
        if payload.len() != count * 8 {
            return Err(Error::Format(format!(
                "truncated payload: expected {} samples ({} bytes), found {} bytes",
                count,
                count * 8,
                payload.len()
            )));
        }
        let mut samples = Vec::with_capacity(count);
        for chunk in payload.chunks_exact(8) {
            let re = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
            let im = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
            samples.push(Complex64::new(re as f64, im as f64));
        }
        Ok(Self::new(samples, sample_rate))
    }

    /// Writes the sidecar metadata file next to an I/Q dump.
    pub fn write_sidecar(&self, iq_path: &Path, scenario_hash: &str) -> Result<()> {
        let meta = iq_path.with_extension("meta");
        let mut f = std::fs::File::create(meta)?;
        writeln!(f, "sample_rate_hz = {}", self.sample_rate)?;
        writeln!(f, "sample_count = {}", self.samples.len())?;
        writeln!(f, "scenario_hash = {}", scenario_hash)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.iq");
        // f32-representable values so the f64->f32->f64 trip is exact
        let buf = IqBuffer::new(
            vec![
                Complex64::new(1.0, -1.0),
                Complex64::new(0.5, 0.25),
                Complex64::new(-3.0, 7.0),
            ],
            1e9,
        );
        buf.write_to(&path).unwrap();
        let back = IqBuffer::read_from(&path, 1e9).unwrap();
        assert_eq!(buf, back);
    }

    #[test]
    fn empty_buffer_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.iq");
        IqBuffer::new(vec![], 1e9).write_to(&path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 16);
        assert!(IqBuffer::read_from(&path, 1e9).unwrap().is_empty());
    }

    #[test]
    fn truncated_payload_names_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.iq");
        let buf = IqBuffer::new(vec![Complex64::new(1.0, 2.0); 4], 1e9);
        buf.write_to(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        let err = IqBuffer::read_from(&path, 1e9).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(err.to_string().contains("expected 4"));
    }
}
