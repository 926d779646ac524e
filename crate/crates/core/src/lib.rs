//! Desk-scale Monte Carlo simulator and statistical toolchain for a
//! microring-resonator Franson (time-energy entanglement) experiment.
//!
//! The crate is organized around the stages of the experiment:
//!
//! * [`ring`] — deterministic optical model of the microring source
//!   (transmission spectrum, resonance comb, pair-generation rate law).
//! * [`source`] — stochastic pair emission, loss channels, fixed delays,
//!   and detector response producing time-tag streams.
//! * [`tags`] — time-tag streams and the FTAG binary file format.
//! * [`franson`] — the double unbalanced Michelson interferometer:
//!   per-pair outcome sampling with second-order interference.
//! * [`coincidence`] — arrival-time-difference histograms, peak
//!   integration, accidentals, and SNR.
//! * [`fit`] — Levenberg-Marquardt fringe regression, visibility, and
//!   Bell-violation significance.
//! * [`stabilize`] — closed-loop interferometer phase stabilization on a
//!   synthetic line camera.
//! * [`config`] / [`scan`] — experiment configuration, orchestration of
//!   phase and power scans, and report persistence.
//!
//! With the default `parallel` feature, Monte Carlo generation and scan
//! points run on rayon; disabling it selects an identical sequential
//! path (outputs are bit-identical either way).

pub mod coincidence;
pub mod config;
pub mod error;
pub mod fit;
pub mod franson;
pub mod ring;
pub mod scan;
pub mod seed;
pub mod source;
pub mod stabilize;
pub mod stats;
pub mod tags;

pub use error::{Error, Result};
