//! Arrival-time-difference histograms, peak integration, accidentals,
//! and signal-to-noise.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Histogram of `t_b − t_a` differences, binned over `[min_ps, max_ps)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: i64,
    pub min_ps: i64,
    pub max_ps: i64,
    pub counts: Vec<u64>,
    /// Number of (a, b) pairs whose difference fell inside the range.
    pub total_pairs_examined: u64,
}

impl CoincidenceHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Center of bin `k`, in ps.
    pub fn bin_center(&self, k: usize) -> f64 {
        self.min_ps as f64 + (k as f64 + 0.5) * self.bin_width_ps as f64
    }

    /// Index of the bin containing difference `d_ps`.
    pub fn bin_of(&self, d_ps: i64) -> Option<usize> {
        if d_ps < self.min_ps || d_ps >= self.max_ps {
            return None;
        }
        Some(((d_ps - self.min_ps) / self.bin_width_ps) as usize)
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// A `(min, max)` range of `n_bins` bins of `bin_width` placed so
    /// that `center_ps` falls at the center of the middle bin (up to the
    /// half-ps truncation of integer bins).
    pub fn range_centered_on(center_ps: i64, bin_width_ps: i64, n_bins: usize) -> (i64, i64) {
        let half = bin_width_ps / 2;
        let min = center_ps - half - (n_bins as i64 / 2) * bin_width_ps;
        (min, min + n_bins as i64 * bin_width_ps)
    }
}

/// Integrated counts of the three Franson peaks plus the accidental
/// level normalized to one peak window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakCounts {
    pub c_ls: u64,
    pub c_center: u64,
    pub c_sl: u64,
    /// Baseline estimate: median out-of-window bin × window size.
    pub c_accidental: f64,
    pub window_halfwidth_ps: i64,
    /// Bins per peak window.
    pub window_bins: usize,
}

impl PeakCounts {
    /// Peak counts with the accidental level subtracted.
    pub fn background_subtracted(&self) -> [f64; 3] {
        [
            self.c_ls as f64 - self.c_accidental,
            self.c_center as f64 - self.c_accidental,
            self.c_sl as f64 - self.c_accidental,
        ]
    }

    /// Accidental-corrected central-to-side ratio (sides averaged).
    pub fn corrected_center_to_side_ratio(&self) -> f64 {
        let [ls, center, sl] = self.background_subtracted();
        center / (0.5 * (ls + sl))
    }

    /// Fig. 2c-mode figure for single-peak (masked-arm) runs:
    /// central counts over accidentals.
    pub fn center_to_accidental_ratio(&self) -> f64 {
        self.c_center as f64 / self.c_accidental
    }
}

fn check_sorted(tags: &[i64], name: &str) -> Result<()> {
    if tags.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid_input(format!("{name} tags are not sorted")));
    }
    Ok(())
}

fn histogram_slice(
    a: &[i64],
    b: &[i64],
    min: i64,
    max: i64,
    width: i64,
    n_bins: usize,
) -> Vec<u64> {
    let mut counts = vec![0u64; n_bins];
    if a.is_empty() || b.is_empty() {
        return counts;
    }
    let mut lo = b.partition_point(|&x| x < a[0] + min);
    for &ta in a {
        while lo < b.len() && b[lo] < ta + min {
            lo += 1;
        }
        let mut j = lo;
        while j < b.len() && b[j] < ta + max {
            counts[((b[j] - ta - min) / width) as usize] += 1;
            j += 1;
        }
    }
    counts
}

/// Histogram of differences `t_b − t_a` via a two-pointer sweep,
/// O(N + M + matches). With the `parallel` feature, stream `a` is
/// partitioned and per-partition counts are merged by exact integer
/// addition, so the result is independent of the thread schedule.
pub fn build_histogram(
    tags_a: &[i64],
    tags_b: &[i64],
    bin_width_ps: i64,
    range_ps: (i64, i64),
) -> Result<CoincidenceHistogram> {
    let (min, max) = range_ps;
    if bin_width_ps <= 0 {
        return Err(Error::invalid_input("bin width must be positive"));
    }
    if min >= max {
        return Err(Error::invalid_input("histogram range is empty"));
    }
    if (max - min) % bin_width_ps != 0 {
        return Err(Error::invalid_input(format!(
            "range length {} is not a multiple of the bin width {bin_width_ps}",
            max - min
        )));
    }
    check_sorted(tags_a, "stream a")?;
    check_sorted(tags_b, "stream b")?;
    let n_bins = ((max - min) / bin_width_ps) as usize;

    #[cfg(feature = "parallel")]
    let counts = {
        let chunk = (tags_a.len() / (4 * rayon::current_num_threads().max(1))).max(4096);
        tags_a
            .par_chunks(chunk)
            .map(|slice| histogram_slice(slice, tags_b, min, max, bin_width_ps, n_bins))
            .reduce(
                || vec![0u64; n_bins],
                |mut acc, local| {
                    for (a, l) in acc.iter_mut().zip(local) {
                        *a += l;
                    }
                    acc
                },
            )
    };
    #[cfg(not(feature = "parallel"))]
    let counts = histogram_slice(tags_a, tags_b, min, max, bin_width_ps, n_bins);

    let total = counts.iter().sum();
    Ok(CoincidenceHistogram {
        bin_width_ps,
        min_ps: min,
        max_ps: max,
        counts,
        total_pairs_examined: total,
    })
}

/// Sequential reference path for [`build_histogram`]; used by benches
/// and parallel-equivalence tests.
#[doc(hidden)]
pub fn build_histogram_seq(
    tags_a: &[i64],
    tags_b: &[i64],
    bin_width_ps: i64,
    range_ps: (i64, i64),
) -> Result<CoincidenceHistogram> {
    let (min, max) = range_ps;
    if bin_width_ps <= 0 || min >= max || (max - min) % bin_width_ps != 0 {
        return Err(Error::invalid_input("bad histogram parameters"));
    }
    check_sorted(tags_a, "stream a")?;
    check_sorted(tags_b, "stream b")?;
    let n_bins = ((max - min) / bin_width_ps) as usize;
    let counts = histogram_slice(tags_a, tags_b, min, max, bin_width_ps, n_bins);
    let total = counts.iter().sum();
    Ok(CoincidenceHistogram {
        bin_width_ps,
        min_ps: min,
        max_ps: max,
        counts,
        total_pairs_examined: total,
    })
}

/// Integrate the three peak windows and estimate the accidental level.
///
/// A window is the peak's bin plus `round(halfwidth/bin_width)` bins on
/// each side; the accidental level is the median of all out-of-window
/// bins scaled to the window size (the mean is available through
/// [`Baseline::Mean`]).
pub fn integrate_peaks(
    h: &CoincidenceHistogram,
    centers_ps: [i64; 3],
    halfwidth_ps: i64,
) -> Result<PeakCounts> {
    integrate_peaks_with(h, centers_ps, halfwidth_ps, Baseline::Median)
}

/// Baseline estimator for the accidental level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Median of out-of-window bins; robust to residual structure.
    Median,
    Mean,
}

pub fn integrate_peaks_with(
    h: &CoincidenceHistogram,
    centers_ps: [i64; 3],
    halfwidth_ps: i64,
    baseline: Baseline,
) -> Result<PeakCounts> {
    if halfwidth_ps < 0 {
        return Err(Error::invalid_input("window halfwidth must be ≥ 0"));
    }
    let n_off = ((halfwidth_ps as f64) / (h.bin_width_ps as f64)).round() as i64;
    let mut windows: Vec<(i64, i64)> = Vec::with_capacity(3);
    for &c in &centers_ps {
        let peak_bin = h.bin_of(c).ok_or_else(|| {
            Error::invalid_input(format!("peak center {c} ps outside histogram range"))
        })? as i64;
        let (lo, hi) = (peak_bin - n_off, peak_bin + n_off);
        if lo < 0 || hi >= h.n_bins() as i64 {
            return Err(Error::invalid_input(format!(
                "window around {c} ps extends outside the histogram"
            )));
        }
        windows.push((lo, hi));
    }
    let mut sorted_windows = windows.clone();
    sorted_windows.sort_unstable();
    if sorted_windows.windows(2).any(|w| w[0].1 >= w[1].0) {
        return Err(Error::invalid_input("peak windows overlap"));
    }

    let sum_window = |(lo, hi): (i64, i64)| -> u64 {
        (lo..=hi).map(|k| h.counts[k as usize]).sum()
    };
    let window_bins = (2 * n_off + 1) as usize;

    let mut outside: Vec<u64> = (0..h.n_bins() as i64)
        .filter(|k| !windows.iter().any(|&(lo, hi)| (lo..=hi).contains(k)))
        .map(|k| h.counts[k as usize])
        .collect();
    let per_bin = match baseline {
        Baseline::Median => {
            if outside.is_empty() {
                0.0
            } else {
                outside.sort_unstable();
                let n = outside.len();
                if n % 2 == 1 {
                    outside[n / 2] as f64
                } else {
                    (outside[n / 2 - 1] + outside[n / 2]) as f64 / 2.0
                }
            }
        }
        Baseline::Mean => {
            if outside.is_empty() {
                0.0
            } else {
                outside.iter().sum::<u64>() as f64 / outside.len() as f64
            }
        }
    };

    Ok(PeakCounts {
        c_ls: sum_window(windows[0]),
        c_center: sum_window(windows[1]),
        c_sl: sum_window(windows[2]),
        c_accidental: per_bin * window_bins as f64,
        window_halfwidth_ps: halfwidth_ps,
        window_bins,
    })
}

/// Signal-to-noise estimate `2(C_LS + C_SL)/C_A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    pub value: f64,
    /// Set when the accidental level is zero; `value` is then +∞.
    pub unbounded: bool,
}

/// SNR of the side peaks over the accidental level.
pub fn snr(p: &PeakCounts) -> SnrEstimate {
    let signal = 2.0 * (p.c_ls + p.c_sl) as f64;
    if p.c_accidental <= 0.0 {
        SnrEstimate {
            value: if signal > 0.0 { f64::INFINITY } else { 0.0 },
            unbounded: true,
        }
    } else {
        SnrEstimate {
            value: signal / p.c_accidental,
            unbounded: false,
        }
    }
}

/// Poisson error propagation for the SNR:
/// `σ = SNR·√((σ²_LS + σ²_SL)/(C_LS+C_SL)² + (σ_A/C_A)²)` with `σ_X = √X`.
pub fn snr_sigma(p: &PeakCounts) -> Result<f64> {
    for (name, v) in [
        ("c_ls", p.c_ls as f64),
        ("c_sl", p.c_sl as f64),
        ("c_accidental", p.c_accidental),
    ] {
        if v <= 0.0 {
            return Err(Error::Estimation(format!(
                "cannot propagate SNR error: count `{name}` is zero"
            )));
        }
    }
    let sides = (p.c_ls + p.c_sl) as f64;
    let value = 2.0 * sides / p.c_accidental;
    Ok(value * (sides / (sides * sides) + 1.0 / p.c_accidental).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{apply_delay, poisson_tags};
    use crate::stats;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    /// O(N·M) brute-force matcher for small inputs.
    fn brute_force(a: &[i64], b: &[i64], width: i64, range: (i64, i64)) -> Vec<u64> {
        let n_bins = ((range.1 - range.0) / width) as usize;
        let mut counts = vec![0u64; n_bins];
        for &ta in a {
            for &tb in b {
                let d = tb - ta;
                if d >= range.0 && d < range.1 {
                    counts[((d - range.0) / width) as usize] += 1;
                }
            }
        }
        counts
    }

    #[test]
    fn single_pair_lands_in_zero_bin() {
        let h = build_histogram(&[1000], &[1000], 75, (-1500, 1500)).unwrap();
        assert_eq!(h.total_counts(), 1);
        assert_eq!(h.counts[h.bin_of(0).unwrap()], 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_histogram(&[2, 1], &[1], 75, (-150, 150)).is_err());
        assert!(build_histogram(&[1], &[2, 1], 75, (-150, 150)).is_err());
        assert!(build_histogram(&[1], &[1], 0, (-150, 150)).is_err());
        assert!(build_histogram(&[1], &[1], -75, (-150, 150)).is_err());
        assert!(build_histogram(&[1], &[1], 75, (150, -150)).is_err());
        assert!(build_histogram(&[1], &[1], 75, (-100, 100)).is_err()); // not a multiple
    }

    #[test]
    fn uncorrelated_streams_flat_at_accidental_rate() {
        let duration: i64 = 2_000_000_000_000; // 2 s
        let r1 = 50_000.0;
        let r2 = 40_000.0;
        let a = poisson_tags(r1, duration, 11);
        let b = poisson_tags(r2, duration, 12);
        let h = build_histogram(&a, &b, 75, (-3000, 3000)).unwrap();
        let expected = r1 * r2 * (duration as f64 / 1e12) * 75e-12;
        let sigma = expected.sqrt();
        for (k, &c) in h.counts.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() < 5.0 * sigma,
                "bin {k}: {c} vs {expected}"
            );
        }
        let p = stats::chi2_flatness_pvalue(&h.counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
        assert!(p > 0.01, "flatness p {p}");
    }

    #[test]
    fn delayed_stream_peaks_at_offset() {
        let duration: i64 = 1_000_000_000_000;
        let a = poisson_tags(100_000.0, duration, 13);
        let b = apply_delay(&a, 3500);
        let h = build_histogram(&a, &b, 75, CoincidenceHistogram::range_centered_on(3500, 75, 41).into()).unwrap();
        let peak_bin = h.bin_of(3500).unwrap();
        let max_bin = h
            .counts
            .iter()
            .enumerate()
            .max_by_key(|(_, &c)| c)
            .unwrap()
            .0;
        assert_eq!(max_bin, peak_bin);
        assert!(h.counts[peak_bin] as usize >= a.len() * 9 / 10);
    }

    #[test]
    fn integrate_flat_histogram() {
        let h = CoincidenceHistogram {
            bin_width_ps: 75,
            min_ps: 0,
            max_ps: 75 * 41,
            counts: vec![7; 41],
            total_pairs_examined: 7 * 41,
        };
        let p = integrate_peaks(&h, [400, 1500, 2600], 150).unwrap();
        assert_eq!(p.window_bins, 5);
        assert_eq!(p.c_ls, 35);
        assert_eq!(p.c_center, 35);
        assert_eq!(p.c_sl, 35);
        assert_abs_diff_eq!(p.c_accidental, 35.0, epsilon = 1e-12);
    }

    #[test]
    fn integrate_delta_peak_zero_baseline() {
        let mut counts = vec![0u64; 41];
        counts[20] = 500;
        let h = CoincidenceHistogram {
            bin_width_ps: 75,
            min_ps: 0,
            max_ps: 75 * 41,
            counts,
            total_pairs_examined: 500,
        };
        let center = h.bin_center(20) as i64;
        let p = integrate_peaks(&h, [center - 750, center, center + 750], 150).unwrap();
        assert_eq!(p.c_center, 500);
        assert_eq!(p.c_ls, 0);
        assert_eq!(p.c_accidental, 0.0);
        assert!(snr(&p).unbounded);
    }

    #[test]
    fn overlapping_or_outside_windows_rejected() {
        let h = CoincidenceHistogram {
            bin_width_ps: 75,
            min_ps: 0,
            max_ps: 75 * 41,
            counts: vec![1; 41],
            total_pairs_examined: 41,
        };
        assert!(integrate_peaks(&h, [1000, 1150, 2600], 150).is_err());
        assert!(integrate_peaks(&h, [100, 1500, 2600], 150).is_err()); // window clipped at edge
        assert!(integrate_peaks(&h, [400, 1500, 9999], 150).is_err());
    }

    #[test]
    fn snr_examples() {
        let p = PeakCounts {
            c_ls: 50,
            c_center: 200,
            c_sl: 50,
            c_accidental: 4.0,
            window_halfwidth_ps: 150,
            window_bins: 5,
        };
        assert_abs_diff_eq!(snr(&p).value, 50.0, epsilon = 1e-12);
        let zero = PeakCounts { c_ls: 0, c_sl: 0, ..p.clone() };
        assert_eq!(snr(&zero).value, 0.0);
    }

    #[test]
    fn snr_sigma_example_and_scaling() {
        let p = PeakCounts {
            c_ls: 200,
            c_center: 800,
            c_sl: 200,
            c_accidental: 8.0,
            window_halfwidth_ps: 150,
            window_bins: 5,
        };
        let s = snr(&p);
        assert_abs_diff_eq!(s.value, 100.0, epsilon = 1e-12);
        let sigma = snr_sigma(&p).unwrap();
        assert_relative_eq!(sigma, 35.707, max_relative = 1e-4);

        // scaling all counts by 100 shrinks the relative error by 10
        let big = PeakCounts {
            c_ls: 20_000,
            c_center: 80_000,
            c_sl: 20_000,
            c_accidental: 800.0,
            window_halfwidth_ps: 150,
            window_bins: 5,
        };
        let rel_small = sigma / snr(&p).value;
        let rel_big = snr_sigma(&big).unwrap() / snr(&big).value;
        assert_relative_eq!(rel_small / rel_big, 10.0, max_relative = 1e-9);
    }

    #[test]
    fn snr_sigma_names_offending_count() {
        let p = PeakCounts {
            c_ls: 0,
            c_center: 10,
            c_sl: 5,
            c_accidental: 2.0,
            window_halfwidth_ps: 150,
            window_bins: 5,
        };
        let err = snr_sigma(&p).unwrap_err().to_string();
        assert!(err.contains("c_ls"), "{err}");
    }

    #[test]
    fn mirror_symmetry_on_centered_data() {
        // data built away from bin edges: swapping streams reflects the axis
        let a: Vec<i64> = (0..200).map(|i| 1_000_000 + i * 10_000).collect();
        let b: Vec<i64> = a.iter().map(|t| t + 337).collect();
        let h_ab = build_histogram(&a, &b, 75, (-3000, 3000)).unwrap();
        let h_ba = build_histogram(&b, &a, 75, (-3000, 3000)).unwrap();
        let reversed: Vec<u64> = h_ab.counts.iter().rev().copied().collect();
        assert_eq!(h_ba.counts, reversed);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            mut a in proptest::collection::vec(-5_000i64..5_000, 1..300),
            mut b in proptest::collection::vec(-5_000i64..5_000, 1..300),
            width in 1i64..200,
            n_bins in 1i64..40,
            min_mult in -20i64..20,
        ) {
            a.sort_unstable();
            b.sort_unstable();
            let min = min_mult * width;
            let range = (min, min + n_bins * width);
            let h = build_histogram(&a, &b, width, range).unwrap();
            let expected = brute_force(&a, &b, width, range);
            prop_assert_eq!(&h.counts, &expected);
            prop_assert_eq!(h.total_pairs_examined, expected.iter().sum::<u64>());
            // sequential path agrees with the (possibly parallel) default
            let h_seq = build_histogram_seq(&a, &b, width, range).unwrap();
            prop_assert_eq!(&h.counts, &h_seq.counts);
        }
    }
}
