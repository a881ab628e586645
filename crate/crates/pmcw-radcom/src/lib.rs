//! Baseband simulation laboratory for shift-register-based PMCW joint
//! radar-communication systems.
//!
//! The crate covers the full desk-scale chain:
//!
//! - [`seqgen`]: maximum-length sequences from Fibonacci LFSRs plus
//!   circular-correlation primitives;
//! - [`sysparams`]: frame plans and every derived communication / radar
//!   performance figure;
//! - [`txframe`]: frame assembly (sync preamble, SFO preamble, BPSK
//!   payload with pilot blocks);
//! - [`impairments`]: multipath, CFO, SFO, STO, and noise emulation;
//! - [`acquisition`]: preamble-based timing, carrier, and sampling-clock
//!   synchronization;
//! - [`commdemod`]: accumulation, correlation, pilot-based corrections,
//!   equalization, and BPSK decisions with MER/BER;
//! - [`radarproc`]: range profiles, range-velocity maps, and detection;
//! - [`scenario`]: configuration-driven Monte Carlo harness and file
//!   artifacts.
//!
//! See the `examples/` directory for one runnable program per capability,
//! and the `pmcw` binary for the command-line front end.

pub mod acquisition;
pub mod commdemod;
pub mod dsp;
pub mod error;
pub mod impairments;
pub mod iq;
pub mod radarproc;
pub mod scenario;
pub mod seqgen;
pub mod sysparams;
pub mod txframe;

pub use error::{Error, Result};
pub use iq::IqBuffer;
