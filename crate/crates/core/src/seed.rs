//! Deterministic sub-seed derivation.
//!
//! Every stochastic stage derives its RNG seed from the master seed, a
//! domain tag, and an index, so that scan points and generation chunks
//! can run in any order (or in parallel) and still reproduce bit-identical
//! output.

/// Domain tags keep seeds for unrelated stages statistically independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    PairEmission,
    SignalLoss,
    IdlerLoss,
    JointOutcome,
    Background,
    DetectorSignal,
    DetectorIdler,
    PhasePoint,
    PowerPoint,
    Stabilization,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::PairEmission => 0x01,
            Domain::SignalLoss => 0x02,
            Domain::IdlerLoss => 0x03,
            Domain::JointOutcome => 0x04,
            Domain::Background => 0x05,
            Domain::DetectorSignal => 0x06,
            Domain::DetectorIdler => 0x07,
            Domain::PhasePoint => 0x08,
            Domain::PowerPoint => 0x09,
            Domain::Stabilization => 0x0a,
        }
    }
}

/// splitmix64 finalizer; full-period mixing of a 64-bit state.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive the seed for stage `domain`, element `index`, from `master`.
pub fn derive(master: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ domain.tag().wrapping_mul(0xa076_1d64_78bd_642f)) ^ index)
}
