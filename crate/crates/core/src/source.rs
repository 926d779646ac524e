//! Stochastic pair emission, loss channels, delays, and detector response.
//!
//! Emission is a homogeneous Poisson process generated in fixed 100 µs
//! chunks, each chunk seeded from the master seed and its own index.
//! Restricting a Poisson process to disjoint windows yields independent
//! Poisson processes, so per-chunk generation is statistically exact and
//! the merged stream is bit-identical whether chunks are produced
//! sequentially or in parallel.

use crate::error::{Error, Result};
use crate::tags::TimeTagStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Generation chunk length, ps (100 µs).
pub const CHUNK_PS: i64 = 100_000_000;

/// One emitted signal/idler pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairEvent {
    pub emission_time_ps: i64,
    pub signal_alive: bool,
    pub idler_alive: bool,
}

/// Which photon of a pair a loss stage acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Photon {
    Signal,
    Idler,
}

/// Per-stage losses of the collection chain, in dB.
///
/// The detector stages describe the same physics as
/// [`DetectorSpec::efficiency`]; the pipeline applies the pre-detector
/// stages with [`apply_loss`] and the detector stage inside [`detect`],
/// so each stage acts exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBudget {
    pub source_out_db: f64,
    pub splitter_db: f64,
    pub filter_db: f64,
    pub interferometer_db: f64,
    pub detector_1_db: f64,
    pub detector_2_db: f64,
}

impl LossBudget {
    /// The measured budget of the experiment: 31 dB total on the signal
    /// path, 34 dB on the idler path.
    pub fn paper() -> Self {
        LossBudget {
            source_out_db: 3.5,
            splitter_db: 4.0,
            filter_db: 3.5,
            interferometer_db: 10.0,
            detector_1_db: 10.0,
            detector_2_db: 13.0,
        }
    }

    /// Reduced budget (10 dB per channel) for desk-scale runs.
    pub fn desk() -> Self {
        LossBudget {
            source_out_db: 1.0,
            splitter_db: 1.5,
            filter_db: 1.0,
            interferometer_db: 3.5,
            detector_1_db: 3.0,
            detector_2_db: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("source_out_db", self.source_out_db),
            ("splitter_db", self.splitter_db),
            ("filter_db", self.filter_db),
            ("interferometer_db", self.interferometer_db),
            ("detector_1_db", self.detector_1_db),
            ("detector_2_db", self.detector_2_db),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid_config(name, "loss must be a finite dB ≥ 0"));
            }
        }
        Ok(())
    }

    fn shared_db(&self) -> f64 {
        self.source_out_db + self.splitter_db + self.filter_db + self.interferometer_db
    }

    /// Total signal-path loss including the detector stage.
    pub fn signal_total_db(&self) -> f64 {
        self.shared_db() + self.detector_1_db
    }

    /// Total idler-path loss including the detector stage.
    pub fn idler_total_db(&self) -> f64 {
        self.shared_db() + self.detector_2_db
    }

    /// Signal-path loss upstream of the detector.
    pub fn signal_pre_detector_db(&self) -> f64 {
        self.shared_db()
    }

    /// Idler-path loss upstream of the detector.
    pub fn idler_pre_detector_db(&self) -> f64 {
        self.shared_db()
    }
}

/// Single-photon detector model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub efficiency: f64,
    pub dark_count_rate_hz: f64,
    pub jitter_sigma_ps: f64,
    pub dead_time_ps: i64,
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::invalid_config("efficiency", "must be in [0, 1]"));
        }
        if self.dark_count_rate_hz < 0.0 {
            return Err(Error::invalid_config("dark_count_rate_hz", "must be ≥ 0"));
        }
        if self.jitter_sigma_ps < 0.0 {
            return Err(Error::invalid_config("jitter_sigma_ps", "must be ≥ 0"));
        }
        if self.dead_time_ps < 0 {
            return Err(Error::invalid_config("dead_time_ps", "must be ≥ 0"));
        }
        Ok(())
    }

    /// Equivalent detection loss in dB.
    pub fn loss_db(&self) -> f64 {
        -10.0 * self.efficiency.log10()
    }
}

/// Survival probability of a `loss_db` attenuation.
pub fn survival_probability(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Poisson arrival times on `[chunk_start, chunk_end)` from one RNG.
fn poisson_times_in(
    rng: &mut ChaCha8Rng,
    rate_hz: f64,
    chunk_start: i64,
    chunk_end: i64,
) -> Vec<i64> {
    let len_ps = (chunk_end - chunk_start) as f64;
    let mut out = Vec::new();
    if rate_hz <= 0.0 {
        return out;
    }
    let mean_gap_ps = 1e12 / rate_hz;
    let mut t = 0.0f64;
    loop {
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() * mean_gap_ps;
        if t >= len_ps {
            break;
        }
        out.push(chunk_start + t as i64);
    }
    out
}

fn chunk_count(duration_ps: i64) -> u64 {
    ((duration_ps + CHUNK_PS - 1) / CHUNK_PS) as u64
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Poisson time tags at `rate_hz` over `[0, duration_ps)`, chunked and
/// deterministic in `seed`. Used for emission, dark counts, and
/// uncorrelated background photons.
pub fn poisson_tags(rate_hz: f64, duration_ps: i64, seed: u64) -> Vec<i64> {
    let chunks = chunk_count(duration_ps);
    let per_chunk = |c: u64| {
        let start = c as i64 * CHUNK_PS;
        let end = (start + CHUNK_PS).min(duration_ps);
        poisson_times_in(&mut chunk_rng(seed, c), rate_hz, start, end)
    };
    #[cfg(feature = "parallel")]
    {
        (0..chunks)
            .into_par_iter()
            .map(per_chunk)
            .flatten_iter()
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).flat_map(per_chunk).collect()
    }
}

/// Number of generation chunks covering `duration_ps`.
pub fn n_chunks(duration_ps: i64) -> u64 {
    chunk_count(duration_ps)
}

/// Emission times of one chunk of the Poisson stream `(rate_hz, seed)`.
/// Concatenating all chunks in order reproduces [`poisson_tags`] exactly.
pub fn pair_chunk_times(rate_hz: f64, duration_ps: i64, chunk: u64, seed: u64) -> Vec<i64> {
    let start = chunk as i64 * CHUNK_PS;
    let end = (start + CHUNK_PS).min(duration_ps);
    poisson_times_in(&mut chunk_rng(seed, chunk), rate_hz, start, end)
}

/// Sequential reference path for [`poisson_tags`]; used by the benches
/// and the parallel-equivalence tests.
#[doc(hidden)]
pub fn poisson_tags_seq(rate_hz: f64, duration_ps: i64, seed: u64) -> Vec<i64> {
    (0..chunk_count(duration_ps))
        .flat_map(|c| {
            let start = c as i64 * CHUNK_PS;
            let end = (start + CHUNK_PS).min(duration_ps);
            poisson_times_in(&mut chunk_rng(seed, c), rate_hz, start, end)
        })
        .collect()
}

/// Pair emission as a homogeneous Poisson process: `rate_hz` in Hz,
/// `duration_s` in seconds. Both photons start alive.
pub fn generate_pairs(rate_hz: f64, duration_s: f64, seed: u64) -> Result<Vec<PairEvent>> {
    if rate_hz < 0.0 {
        return Err(Error::invalid_input("pair rate must be nonnegative"));
    }
    if duration_s <= 0.0 {
        return Err(Error::invalid_input("duration must be positive"));
    }
    let duration_ps = (duration_s * 1e12).round() as i64;
    Ok(poisson_tags(rate_hz, duration_ps, seed)
        .into_iter()
        .map(|t| PairEvent {
            emission_time_ps: t,
            signal_alive: true,
            idler_alive: true,
        })
        .collect())
}

/// Attenuate one leg of each pair: the selected photon survives
/// independently with probability `10^(−loss_db/10)`.
pub fn apply_loss(
    events: &[PairEvent],
    loss_db: f64,
    which: Photon,
    seed: u64,
) -> Result<Vec<PairEvent>> {
    if !(loss_db >= 0.0 && loss_db.is_finite()) {
        return Err(Error::invalid_input("loss must be a finite dB ≥ 0"));
    }
    let p = survival_probability(loss_db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(events
        .iter()
        .map(|e| {
            let survive = rng.gen::<f64>() < p;
            let mut out = *e;
            match which {
                Photon::Signal => out.signal_alive = e.signal_alive && survive,
                Photon::Idler => out.idler_alive = e.idler_alive && survive,
            }
            out
        })
        .collect())
}

/// Shift every tag by a constant path-length offset.
pub fn apply_delay(tags: &[i64], offset_ps: i64) -> Vec<i64> {
    tags.iter().map(|t| t + offset_ps).collect()
}

/// Detector response: efficiency thinning, Gaussian timing jitter, dark
/// counts, and dead-time enforcement. Tags jittered outside
/// `[0, duration_ps]` are dropped.
pub fn detect(
    tags: &[i64],
    spec: &DetectorSpec,
    duration_ps: i64,
    channel: u8,
    seed: u64,
) -> Result<TimeTagStream> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = if spec.jitter_sigma_ps > 0.0 {
        Some(Normal::new(0.0, spec.jitter_sigma_ps).expect("validated sigma"))
    } else {
        None
    };
    let mut clicks: Vec<i64> = Vec::with_capacity((tags.len() as f64 * spec.efficiency) as usize);
    for &t in tags {
        if rng.gen::<f64>() >= spec.efficiency {
            continue;
        }
        let jittered = match &jitter {
            Some(n) => t + n.sample(&mut rng).round() as i64,
            None => t,
        };
        if (0..=duration_ps).contains(&jittered) {
            clicks.push(jittered);
        }
    }
    // darks bypass efficiency and jitter; they are already detector events
    clicks.extend(poisson_tags(
        spec.dark_count_rate_hz,
        duration_ps,
        seed ^ 0xdead_c0de_dead_c0de,
    ));
    clicks.sort_unstable();
    let mut out = Vec::with_capacity(clicks.len());
    let mut last: Option<i64> = None;
    for t in clicks {
        if last.map_or(true, |p| t - p >= spec.dead_time_ps) {
            out.push(t);
            last = Some(t);
        }
    }
    TimeTagStream::new(channel, out, duration_ps, seed)
}
