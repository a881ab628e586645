//! Transmit frame assembly: two sync preamble blocks, the SFO preamble,
//! and the BPSK-modulated payload with pilot blocks.

use crate::error::{Error, Result};
use crate::iq::IqBuffer;
use crate::seqgen::{generate_mls, ChipSequence, LfsrSpec, PolySelect};
use crate::sysparams::FramePlan;
use num_complex::Complex64;

/// Sample offsets of every structural part of the frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameLayout {
    /// Offset and length of sync preamble block 1 (3 * n_sc samples).
    pub sc_block1: (usize, usize),
    pub sc_block2: (usize, usize),
    /// Offset and length of the SFO preamble (m_sfo * n samples).
    pub sfo_preamble: (usize, usize),
    /// Offset of the payload region; each block is n * a samples.
    pub payload: (usize, usize),
    pub block_len: usize,
    pub pilot_blocks: Vec<usize>,
}

impl FrameLayout {
    pub fn from_plan(plan: &FramePlan) -> Self {
        let sc_len = 3 * plan.n_sc;
        let sfo_len = plan.m_sfo * plan.n;
        let block_len = plan.n * plan.a;
        let payload_len = block_len * plan.m_blocks;
        FrameLayout {
            sc_block1: (0, sc_len),
            sc_block2: (sc_len, sc_len),
            sfo_preamble: (2 * sc_len, sfo_len),
            payload: (2 * sc_len + sfo_len, payload_len),
            block_len,
            pilot_blocks: (0..plan.m_blocks).filter(|k| k % plan.dm_pil == 0).collect(),
        }
    }

    pub fn total_len(&self) -> usize {
        self.payload.0 + self.payload.1
    }
}

/// The three chip sequences a frame needs: two distinct sync sequences of
/// length n_sc and the payload sequence of length n.
#[derive(Clone, Debug)]
pub struct FrameSequences {
    pub sc1: ChipSequence,
    pub sc2: ChipSequence,
    pub payload: ChipSequence,
}

impl FrameSequences {
    /// Generates the three sequences from the built-in polynomial table.
    pub fn for_plan(plan: &FramePlan) -> Result<Self> {
        plan.validate()?;
        let sc1 = generate_mls(&LfsrSpec::for_length(plan.n_sc, PolySelect::Primary)?);
        let sc2 = generate_mls(&LfsrSpec::for_length(plan.n_sc, PolySelect::Secondary)?);
        let payload = generate_mls(&LfsrSpec::for_length(plan.n, PolySelect::Primary)?);
        Ok(Self { sc1, sc2, payload })
    }
}

/// Assembled transmit frame.
#[derive(Clone, Debug)]
pub struct TxFrame {
    pub buffer: IqBuffer,
    pub layout: FrameLayout,
    pub sequences: FrameSequences,
    pub bits: Vec<u8>,
}

/// Three repetitions of each sync sequence back to back; the first
/// repetition of each triple acts as cyclic prefix.
pub fn build_sc_preamble(seq1: &ChipSequence, seq2: &ChipSequence) -> Result<Vec<f64>> {
    if seq1.len() != seq2.len() {
        return Err(Error::Argument(format!(
            "sync sequences must have equal length, got {} and {}",
            seq1.len(),
            seq2.len()
        )));
    }
    if seq1.spec() == seq2.spec() {
        return Err(Error::Config(
            "sync preamble blocks need distinct generator polynomials; identical \
             sequences merge the two detection plateaus"
                .into(),
        ));
    }
    let mut out = Vec::with_capacity(6 * seq1.len());
    for _ in 0..3 {
        out.extend_from_slice(seq1.chips());
    }
    for _ in 0..3 {
        out.extend_from_slice(seq2.chips());
    }
    Ok(out)
}

/// `m_sfo` back-to-back copies of the payload sequence: one cyclic-prefix
/// copy plus (m_sfo - 1)/2 identical pairs.
pub fn build_sfo_preamble(seq: &ChipSequence, m_sfo: usize) -> Result<Vec<f64>> {
    if m_sfo < 3 || m_sfo % 2 == 0 {
        return Err(Error::Config(format!("M_sfo = {m_sfo} must be odd and >= 3")));
    }
    let mut out = Vec::with_capacity(m_sfo * seq.len());
    for _ in 0..m_sfo {
        out.extend_from_slice(seq.chips());
    }
    Ok(out)
}

/// BPSK payload: block k carries symbol +1 if k is a pilot index, else the
/// next data bit under the mapping bit 0 -> +1, bit 1 -> -1. Each block is
/// the sequence repeated `a` times, scaled by its symbol.
pub fn build_payload(seq: &ChipSequence, bits: &[u8], plan: &FramePlan) -> Result<Vec<f64>> {
    let expected = plan.payload_bit_count();
    if bits.len() != expected {
        return Err(Error::Argument(format!(
            "payload expects {expected} data bits, got {}",
            bits.len()
        )));
    }
    let mut out = Vec::with_capacity(plan.n * plan.a * plan.m_blocks);
    let mut next_bit = bits.iter();
    for k in 0..plan.m_blocks {
        let symbol = if plan.is_pilot_block(k) {
            1.0
        } else {
            match *next_bit.next().unwrap() {
                0 => 1.0,
                _ => -1.0,
            }
        };
        for _ in 0..plan.a {
            out.extend(seq.chips().iter().map(|&c| c * symbol));
        }
    }
    Ok(out)
}

/// Concatenates preambles and payload into a complete transmit frame.
pub fn assemble_frame(plan: &FramePlan, seqs: FrameSequences, bits: Vec<u8>) -> Result<TxFrame> {
    plan.validate()?;
    if seqs.sc1.len() != plan.n_sc || seqs.sc2.len() != plan.n_sc {
        return Err(Error::Config(format!(
            "sync sequences must have length n_sc = {}",
            plan.n_sc
        )));
    }
    if seqs.payload.len() != plan.n {
        return Err(Error::Config(format!(
            "payload sequence must have length n = {}",
            plan.n
        )));
    }
    let layout = FrameLayout::from_plan(plan);
    let mut samples = Vec::with_capacity(layout.total_len());
    samples.extend(build_sc_preamble(&seqs.sc1, &seqs.sc2)?);
    samples.extend(build_sfo_preamble(&seqs.payload, plan.m_sfo)?);
    samples.extend(build_payload(&seqs.payload, &bits, plan)?);
    debug_assert_eq!(samples.len(), layout.total_len());
    let buffer = IqBuffer::new(
        samples.into_iter().map(|c| Complex64::new(c, 0.0)).collect(),
        plan.fs,
    );
    Ok(TxFrame {
        buffer,
        layout,
        sequences: seqs,
        bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysparams::preset;

    fn plan1() -> FramePlan {
        preset("pmcw1").unwrap()
    }

    #[test]
    fn sc_preamble_shape_and_repetition() {
        let plan = plan1();
        let seqs = FrameSequences::for_plan(&plan).unwrap();
        let pre = build_sc_preamble(&seqs.sc1, &seqs.sc2).unwrap();
        assert_eq!(pre.len(), 762);
        assert_eq!(&pre[..127], &pre[127..254]);
        assert_eq!(&pre[381..508], &pre[508..635]);
        assert_ne!(&pre[..127], &pre[381..508]);
    }

    #[test]
    fn sc_preamble_rejects_identical_specs() {
        let plan = plan1();
        let seqs = FrameSequences::for_plan(&plan).unwrap();
        assert!(build_sc_preamble(&seqs.sc1, &seqs.sc1.clone()).is_err());
    }

    #[test]
    fn sfo_preamble_is_periodic_copies() {
        let plan = plan1();
        let seqs = FrameSequences::for_plan(&plan).unwrap();
        let pre = build_sfo_preamble(&seqs.payload, 21).unwrap();
        assert_eq!(pre.len(), 5355);
        for i in 0..pre.len() - 255 {
            assert_eq!(pre[i], pre[i + 255]);
        }
        assert!(build_sfo_preamble(&seqs.payload, 4).is_err());
        assert_eq!(build_sfo_preamble(&seqs.payload, 3).unwrap().len(), 3 * 255);
    }

    #[test]
    fn payload_bit_count_and_pilots() {
        let plan = plan1();
        assert_eq!(plan.payload_bit_count(), 6553);
        let seqs = FrameSequences::for_plan(&plan).unwrap();
        let err = build_payload(&seqs.payload, &[0u8; 10], &plan).unwrap_err();
        assert!(err.to_string().contains("6553"));

        // all-zero bits: every block is +1-scaled repetitions
        let small = FramePlan { m_blocks: 10, ..plan.clone() };
        let bits = vec![0u8; small.payload_bit_count()];
        let pl = build_payload(&seqs.payload, &bits, &small).unwrap();
        for (i, &v) in pl.iter().enumerate() {
            assert_eq!(v, seqs.payload.chips()[i % 255]);
        }

        // tiny frame: block 0 is the single pilot
        let tiny = FramePlan { m_blocks: 2, ..plan1() };
        assert_eq!(tiny.pilot_count(), 1);
        assert_eq!(tiny.payload_bit_count(), 1);
    }

    #[test]
    fn full_frame_lengths_match_arithmetic() {
        let plan = plan1();
        let seqs = FrameSequences::for_plan(&plan).unwrap();
        let bits = vec![0u8; plan.payload_bit_count()];
        let frame = assemble_frame(&plan, seqs, bits).unwrap();
        assert_eq!(frame.buffer.len(), 10_450_917);

        let plan4 = preset("pmcw4").unwrap();
        let seqs4 = FrameSequences::for_plan(&plan4).unwrap();
        let bits4 = vec![1u8; plan4.payload_bit_count()];
        let frame4 = assemble_frame(&plan4, seqs4, bits4).unwrap();
        assert_eq!(frame4.buffer.len(), 10_529_765);
    }

    #[test]
    fn every_sample_is_binary() {
        let plan = FramePlan { m_blocks: 20, ..plan1() };
        let seqs = FrameSequences::for_plan(&plan).unwrap();
        let bits: Vec<u8> = (0..plan.payload_bit_count()).map(|i| (i % 2) as u8).collect();
        let frame = assemble_frame(&plan, seqs, bits).unwrap();
        for s in &frame.buffer.samples {
            assert!(s.im == 0.0 && (s.re == 1.0 || s.re == -1.0));
        }
    }

    #[test]
    fn layout_offsets() {
        let plan = plan1();
        let layout = FrameLayout::from_plan(&plan);
        assert_eq!(layout.sc_block1, (0, 381));
        assert_eq!(layout.sc_block2, (381, 381));
        assert_eq!(layout.sfo_preamble, (762, 5355));
        assert_eq!(layout.payload.0, 6117);
        assert_eq!(layout.pilot_blocks[..4], [0, 5, 10, 15]);
    }
}
