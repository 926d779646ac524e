//! Quantum model of the double unbalanced Michelson interferometer.
//!
//! Each photon enters its interferometer, takes the short or the long
//! arm, and is collected from one output port; the amplitude for any
//! (arm, collected) combination is 1/2, so a specific joint path pair
//! carries probability 1/16. The short-short and long-long path pairs
//! are indistinguishable when the pump coherence time far exceeds the
//! arm imbalance, and interfere with contrast `w`:
//!
//! * side categories (distinguishable): probability 1/16 each,
//! * central category: (1/8)·(1 + w·cos(φ_s + φ_i + ϑ)).
//!
//! On the conventional weight scale where each side peak is 1 this is
//! `(1, 2(1 + w cos φ), 1)`; the remaining probability is the pair being
//! lost from the measured coincidence channel (wrong output port).
//! Component losses of the interferometer hardware (mirrors, coupling)
//! are *not* modeled here; they sit in the loss budget.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Default regime margin for "much greater than" checks.
pub const REGIME_MARGIN: f64 = 10.0;

/// Arm blocking state of one interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmMask {
    Open,
    ShortBlocked,
    LongBlocked,
    /// Unphysical but constructible; every operation reports a
    /// no-throughput error for it.
    BothBlocked,
}

impl ArmMask {
    /// Amplitudes (short, long) into the collected port.
    fn amplitudes(self) -> (f64, f64) {
        match self {
            ArmMask::Open => (0.5, 0.5),
            ArmMask::ShortBlocked => (0.0, 0.5),
            ArmMask::LongBlocked => (0.5, 0.0),
            ArmMask::BothBlocked => (0.0, 0.0),
        }
    }
}

/// Parameters of the signal/idler interferometer pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerPair {
    /// Arm imbalance ΔT, ps.
    pub delta_t_ps: i64,
    pub phase_signal_rad: f64,
    pub phase_idler_rad: f64,
    /// Constant offset ϑ set by the unknown absolute arm lengths.
    pub theta_offset_rad: f64,
    /// First-order visibility w of the interferometers.
    pub visibility_w: f64,
    pub mask_signal: ArmMask,
    pub mask_idler: ArmMask,
}

impl Default for InterferometerPair {
    fn default() -> Self {
        InterferometerPair {
            delta_t_ps: 670,
            phase_signal_rad: 0.0,
            phase_idler_rad: 0.0,
            theta_offset_rad: 0.0,
            visibility_w: 0.95,
            mask_signal: ArmMask::Open,
            mask_idler: ArmMask::Open,
        }
    }
}

impl InterferometerPair {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.visibility_w) {
            return Err(Error::invalid_config("visibility_w", "must be in [0, 1]"));
        }
        if self.delta_t_ps <= 0 {
            return Err(Error::invalid_config("delta_t_ps", "must be positive"));
        }
        Ok(())
    }

    /// Sum phase φ = φ_s + φ_i + ϑ entering the central fringe.
    pub fn total_phase(&self) -> f64 {
        self.phase_signal_rad + self.phase_idler_rad + self.theta_offset_rad
    }

    fn check_throughput(&self) -> Result<()> {
        if self.mask_signal == ArmMask::BothBlocked {
            return Err(Error::NoThroughput("signal"));
        }
        if self.mask_idler == ArmMask::BothBlocked {
            return Err(Error::NoThroughput("idler"));
        }
        Ok(())
    }
}

/// Timing quantities of the Franson regime τ_c ≪ ΔT ≪ τ_p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FransonRegime {
    pub tau_c_ps: f64,
    pub delta_t_ps: f64,
    /// Pump coherence time; several µs for the cw pump.
    pub tau_pump_ps: f64,
}

impl Default for FransonRegime {
    fn default() -> Self {
        FransonRegime {
            tau_c_ps: 12.3,
            delta_t_ps: 670.0,
            tau_pump_ps: 5e6,
        }
    }
}

impl FransonRegime {
    pub fn validate(&self) -> Result<()> {
        if self.tau_c_ps <= 0.0 || self.delta_t_ps <= 0.0 || self.tau_pump_ps <= 0.0 {
            return Err(Error::invalid_config(
                "regime",
                "all regime times must be positive",
            ));
        }
        Ok(())
    }
}

/// Coincidence delay category; named by the arms the photons took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Signal long, idler short: idler−signal delay −ΔT.
    LongShort,
    /// Both short or both long: zero relative delay (interfering).
    Central,
    /// Signal short, idler long: idler−signal delay +ΔT.
    ShortLong,
}

impl Outcome {
    /// Relative delay `t_idler − t_signal` contributed by the arms.
    pub fn relative_delay_ps(self, delta_t_ps: i64) -> i64 {
        match self {
            Outcome::LongShort => -delta_t_ps,
            Outcome::Central => 0,
            Outcome::ShortLong => delta_t_ps,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Outcome::LongShort => 0,
            Outcome::Central => 1,
            Outcome::ShortLong => 2,
        }
    }
}

/// Joint fate of one pair at the interferometers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFate {
    /// Both photons collected; `signal_long`/`idler_long` give the arm
    /// delays for the time tags.
    Both {
        category: Outcome,
        signal_long: bool,
        idler_long: bool,
    },
    SignalOnly { signal_long: bool },
    IdlerOnly { idler_long: bool },
    Neither,
}

/// Relative weights of the {−ΔT, 0, +ΔT} coincidence categories on the
/// scale where an unmasked side peak is 1 (16 × probability).
pub fn joint_delay_weights(ip: &InterferometerPair) -> Result<[f64; 3]> {
    ip.validate()?;
    ip.check_throughput()?;
    let (s_short, s_long) = ip.mask_signal.amplitudes();
    let (i_short, i_long) = ip.mask_idler.amplitudes();
    let w_ls = (s_long * i_short).powi(2);
    let w_sl = (s_short * i_long).powi(2);
    let a_ss = s_short * i_short;
    let a_ll = s_long * i_long;
    // partial coherence: contrast w on the SS/LL cross term
    let w_center = a_ss * a_ss
        + a_ll * a_ll
        + 2.0 * ip.visibility_w * a_ss * a_ll * ip.total_phase().cos();
    Ok([16.0 * w_ls, 16.0 * w_center, 16.0 * w_sl])
}

/// Category probabilities conditional on a coincidence being recorded
/// (the weights normalized by their sum).
pub fn category_probabilities(ip: &InterferometerPair) -> Result<[f64; 3]> {
    let w = joint_delay_weights(ip)?;
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return Err(Error::NoThroughput("signal and idler"));
    }
    Ok([w[0] / sum, w[1] / sum, w[2] / sum])
}

/// Marginal probability that one photon is collected: incoherent sum of
/// its open arms (no first-order interference in the Franson regime).
fn collection_marginal(mask: ArmMask) -> f64 {
    let (s, l) = mask.amplitudes();
    s * s + l * l
}

/// Sample the joint fate of one surviving pair.
///
/// Marginals are exactly `collection_marginal` per photon and flat in
/// the phases; the coincidence categories carry the second-order
/// interference.
pub fn sample_pair_fate<R: Rng>(ip: &InterferometerPair, rng: &mut R) -> Result<PairFate> {
    let weights = joint_delay_weights(ip)?;
    let p_cat = [weights[0] / 16.0, weights[1] / 16.0, weights[2] / 16.0];
    let p_both = p_cat[0] + p_cat[1] + p_cat[2];
    let m_s = collection_marginal(ip.mask_signal);
    let m_i = collection_marginal(ip.mask_idler);
    let p_sig_only = m_s - p_both;
    let p_idl_only = m_i - p_both;

    let u: f64 = rng.gen();
    if u < p_cat[0] {
        return Ok(PairFate::Both {
            category: Outcome::LongShort,
            signal_long: true,
            idler_long: false,
        });
    }
    if u < p_cat[0] + p_cat[1] {
        // the SS and LL histories are indistinguishable; either gives the
        // same relative delay, and an even split keeps the per-photon
        // arm marginal at 1/2
        let long = match (ip.mask_signal, ip.mask_idler) {
            (ArmMask::ShortBlocked, _) | (_, ArmMask::ShortBlocked) => true,
            (ArmMask::LongBlocked, _) | (_, ArmMask::LongBlocked) => false,
            _ => rng.gen::<bool>(),
        };
        return Ok(PairFate::Both {
            category: Outcome::Central,
            signal_long: long,
            idler_long: long,
        });
    }
    if u < p_both {
        return Ok(PairFate::Both {
            category: Outcome::ShortLong,
            signal_long: false,
            idler_long: true,
        });
    }
    if u < p_both + p_sig_only {
        return Ok(PairFate::SignalOnly {
            signal_long: sample_arm(ip.mask_signal, rng),
        });
    }
    if u < p_both + p_sig_only + p_idl_only {
        return Ok(PairFate::IdlerOnly {
            idler_long: sample_arm(ip.mask_idler, rng),
        });
    }
    Ok(PairFate::Neither)
}

fn sample_arm<R: Rng>(mask: ArmMask, rng: &mut R) -> bool {
    match mask {
        ArmMask::Open => rng.gen::<bool>(),
        ArmMask::ShortBlocked => true,
        ArmMask::LongBlocked => false,
        ArmMask::BothBlocked => unreachable!("checked by throughput validation"),
    }
}

/// Collection outcome of a lone photon whose partner was already lost:
/// `Some(took_long_arm)` when it reaches the measured port.
pub fn sample_single_collection<R: Rng>(mask: ArmMask, rng: &mut R) -> Result<Option<bool>> {
    if mask == ArmMask::BothBlocked {
        return Err(Error::NoThroughput("masked"));
    }
    if rng.gen::<f64>() < collection_marginal(mask) {
        Ok(Some(sample_arm(mask, rng)))
    } else {
        Ok(None)
    }
}

/// Sample the coincidence category of one pair, or `None` when the pair
/// leaves through an unmeasured port.
pub fn sample_pair_outcome<R: Rng>(
    ip: &InterferometerPair,
    rng: &mut R,
) -> Result<Option<Outcome>> {
    Ok(match sample_pair_fate(ip, rng)? {
        PairFate::Both { category, .. } => Some(category),
        _ => None,
    })
}

/// First-order (singles) fringe amplitude.
///
/// Zero by construction once the regime check ΔT ≥ margin·τ_c passes;
/// `w` in the balanced limit ΔT = 0; in between, the Lorentzian field
/// correlation `w·exp(−ΔT/τ_c)`.
pub fn singles_modulation(ip: &InterferometerPair, tau_c_ps: f64) -> f64 {
    if ip.delta_t_ps == 0 {
        return ip.visibility_w;
    }
    let dt = ip.delta_t_ps as f64;
    if dt >= REGIME_MARGIN * tau_c_ps {
        return 0.0;
    }
    ip.visibility_w * (-dt / tau_c_ps).exp()
}

/// True iff ΔT ≥ margin·τ_c and τ_p ≥ margin·ΔT.
pub fn check_franson_regime(regime: &FransonRegime, margin: f64) -> Result<bool> {
    regime.validate()?;
    if margin < 1.0 {
        return Err(Error::invalid_input("regime margin must be ≥ 1"));
    }
    Ok(regime.delta_t_ps >= margin * regime.tau_c_ps
        && regime.tau_pump_ps >= margin * regime.delta_t_ps)
}

/// Visibility of the arm-length alignment scan.
///
/// Only two of the four pulse paths overlap, capping the visibility at
/// 0.5; a Gaussian envelope describes the pulse overlap. Convention:
/// `pulse_coherence_length_um` is twice the Gaussian σ of the pulse
/// field envelope, giving `0.5·exp(−(mismatch/l_c)²)`.
pub fn alignment_visibility(mismatch_um: f64, pulse_coherence_length_um: f64) -> Result<f64> {
    if pulse_coherence_length_um <= 0.0 {
        return Err(Error::invalid_input("coherence length must be positive"));
    }
    let u = mismatch_um / pulse_coherence_length_um;
    Ok(0.5 * (-u * u).exp())
}
