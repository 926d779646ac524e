//! Acceptance suite: one test per criterion, each printing a PASS line
//! with the measured numbers (run with `--nocapture` to see them).
//!
//! The desk profile is the reference configuration: 10 dB per channel,
//! 0.1 s per phase point, 16 phases, w = 0.95. The paper's absolute
//! detected count levels through the 31/34 dB chain over 120 s are out
//! of desk-scale reach; the loss-composition property and the
//! desk/paper profile distinction cover that regime instead.

use franson_core::config::ExperimentConfig;
use franson_core::fit::{bell_sigmas, lm_fit, visibility_from_snr, FringeDataset, FringePoint};
use franson_core::ring::{self, RingSpec};
use franson_core::scan::{run_phase_scan, run_power_scan, PhaseScanResult};
use franson_core::source::poisson_tags;
use franson_core::stabilize::{run_closed_loop, DriftModel, StabilizationConfig};
use franson_core::{coincidence, stats};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use std::sync::OnceLock;
use std::time::Instant;

/// Criterion 1's run, shared with criteria 5 and 6.
fn reference_scan() -> &'static (PhaseScanResult, f64) {
    static SCAN: OnceLock<(PhaseScanResult, f64)> = OnceLock::new();
    SCAN.get_or_init(|| {
        let start = Instant::now();
        let scan = run_phase_scan(&ExperimentConfig::desk()).expect("desk scan runs");
        (scan, start.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_01_franson_fringe_law() {
    let (scan, elapsed) = reference_scan();
    let fit = scan.fit.as_ref().expect("fringe mode");
    let dataset = scan.dataset.as_ref().unwrap();

    // ≥ 300 expected central counts at the fringe maximum
    let max_counts = dataset
        .points
        .iter()
        .map(|p| p.counts)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(max_counts >= 300.0, "max central counts {max_counts}");

    // fitted V_Meas within 3σ_V of w(SNR−1)/(SNR+1) from the same run
    let predicted = scan.predicted_v_from_snr.unwrap().value;
    let dev = (fit.v_meas - predicted).abs();
    assert!(
        dev <= 3.0 * fit.sigma_v,
        "V_Meas {} vs predicted {predicted} (3σ = {})",
        fit.v_meas,
        3.0 * fit.sigma_v
    );

    // accidental-corrected central/side ratio at the fringe maximum
    let max_point = dataset
        .points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.counts.partial_cmp(&b.1.counts).unwrap())
        .unwrap()
        .0;
    let ratio = scan.points[max_point].peaks.corrected_center_to_side_ratio();
    assert!(
        (ratio - 3.9).abs() <= 0.3,
        "center/side ratio {ratio} at point {max_point}"
    );

    assert!(*elapsed < 120.0, "criterion 1 took {elapsed:.1} s");
    println!(
        "PASS criterion 1: V_Meas {:.4} ± {:.4} vs predicted {:.4}, peak ratio {:.2}, max counts {:.0}, {:.1} s",
        fit.v_meas, fit.sigma_v, predicted, ratio, max_counts, elapsed
    );
}

#[test]
fn criterion_02_table_statistics_pipeline() {
    let rows = [
        (94.8, 3.8, 6.4),
        (88.2, 4.8, 3.6),
        (91.8, 1.9, 11.2),
        (89.3, 2.6, 7.1),
        (83.8, 3.2, 4.1),
    ];
    for (v_pct, sigma_pct, published) in rows {
        let sigmas = bell_sigmas(v_pct / 100.0, sigma_pct / 100.0).unwrap();
        assert!(
            (sigmas - published).abs() <= 0.15,
            "({v_pct}, {sigma_pct}): {sigmas} vs {published}"
        );
    }
    println!("PASS criterion 2: five Bell-σ values reproduced within ±0.15");
}

#[test]
fn criterion_03_snr_visibility_consistency() {
    let w = 0.95;
    // (SNR, σ_SNR, V_Meas %, σ_V %)
    let rows = [
        (131.6, 16.5, 94.8, 3.8),
        (120.4, 7.9, 88.2, 4.8),
        (64.4, 3.3, 91.8, 1.9),
        (45.1, 2.2, 89.3, 2.6),
        (22.9, 1.0, 83.8, 3.2),
    ];
    for (snr, snr_sigma, v_pct, v_sigma_pct) in rows {
        let predicted = visibility_from_snr(snr, w).unwrap().value;
        // propagate the SNR error through dV/dSNR = 2w/(SNR+1)²
        let sigma_pred = 2.0 * w / ((snr + 1.0) * (snr + 1.0)) * snr_sigma;
        let combined = (sigma_pred.powi(2) + (v_sigma_pct / 100.0).powi(2)).sqrt();
        let dev = (predicted - v_pct / 100.0).abs();
        assert!(
            dev <= 2.0 * combined,
            "SNR {snr}: predicted {predicted:.4} vs {v_pct}% (2σ = {:.4})",
            2.0 * combined
        );
    }
    println!("PASS criterion 3: SNR→visibility matches all five rows within 2σ");
}

#[test]
fn criterion_04_quadratic_scaling() {
    let start = Instant::now();
    let powers = [0.25, 0.5, 1.0, 1.5, 2.0];
    let report = run_power_scan(&ExperimentConfig::desk(), &powers).unwrap();
    let slope = report.rate_slope_loglog.unwrap();
    assert!(
        (slope - 2.0).abs() <= 0.05,
        "log-log rate slope {slope}"
    );

    // Table rows (R MHz, σ MHz); the 1 mW anchor carries its own quoted
    // uncertainty, which propagates quadratically to the other powers
    let table = [(0.4, 0.11), (1.7, 0.3), (5.8, 0.8), (14.0, 1.9), (27.0, 3.1)];
    let anchor_rel = 0.8 / 5.8;
    for (row, (r_mhz, sigma_mhz)) in report.rows.iter().zip(table) {
        let simulated = row.rate_measured_hz / 1e6;
        let allowed = sigma_mhz + anchor_rel * simulated;
        assert!(
            (simulated - r_mhz).abs() <= allowed,
            "P {}: simulated {simulated:.3} MHz vs {r_mhz} ± {allowed:.3}",
            row.pump_power_mw
        );
    }

    // SNR column strictly decreasing with power
    for pair in report.rows.windows(2) {
        assert!(
            pair[1].snr < pair[0].snr,
            "SNR not decreasing: {} → {}",
            pair[0].snr,
            pair[1].snr
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "criterion 4 took {elapsed:.1} s");
    let snrs: Vec<String> = report.rows.iter().map(|r| format!("{:.1}", r.snr)).collect();
    println!(
        "PASS criterion 4: slope {slope:.4}, rates in bars, SNR column [{}], {elapsed:.1} s",
        snrs.join(", ")
    );
}

#[test]
fn criterion_05_histogram_geometry() {
    let (scan, _) = reference_scan();
    let h = &scan.total_histogram;
    for expected in [3500 - 670, 3500, 3500 + 670] {
        let peak_bin = h.bin_of(expected).unwrap();
        // the local maximum within ±5 bins must sit within one bin of
        // the expected center
        let lo = peak_bin.saturating_sub(5);
        let hi = (peak_bin + 5).min(h.n_bins() - 1);
        let max_bin = (lo..=hi).max_by_key(|&k| h.counts[k]).unwrap();
        let offset = h.bin_center(max_bin) - expected as f64;
        assert!(
            offset.abs() <= h.bin_width_ps as f64,
            "peak near {expected}: max bin center off by {offset} ps"
        );
    }
    println!("PASS criterion 5: three peaks at 3.5 ns ± 0.67 ns, each centered within one 75 ps bin");
}

#[test]
fn criterion_06_singles_flatness() {
    let (scan, _) = reference_scan();
    let [p_signal, p_idler] = scan.singles_flatness_pvalues;
    assert!(p_signal > 0.01, "signal singles χ² p = {p_signal}");
    assert!(p_idler > 0.01, "idler singles χ² p = {p_idler}");
    println!("PASS criterion 6: singles flat over the scan (p = {p_signal:.3}, {p_idler:.3})");
}

#[test]
fn criterion_07_accidentals_law() {
    let duration_ps: i64 = 2_000_000_000_000;
    let (r1, r2) = (50_000.0, 40_000.0);
    let a = poisson_tags(r1, duration_ps, 2024);
    let b = poisson_tags(r2, duration_ps, 2025);
    let h = coincidence::build_histogram(&a, &b, 75, (-3000, 3000)).unwrap();
    let expected = r1 * r2 * (duration_ps as f64 / 1e12) * 75e-12;
    let mean = h.counts.iter().sum::<u64>() as f64 / h.n_bins() as f64;
    let sigma_mean = (expected / h.n_bins() as f64).sqrt();
    assert!(
        (mean - expected).abs() < 5.0 * sigma_mean,
        "per-bin mean {mean} vs r₁r₂T·Δ = {expected}"
    );
    println!("PASS criterion 7: accidental mean {mean:.2}/bin vs r₁r₂TΔ = {expected:.2}");
}

#[test]
fn criterion_08_fit_oracle_equivalence() {
    // dense grid-search oracle on 10 randomized small instances
    fn model(phase: f64, p: &[f64; 3]) -> f64 {
        p[0] * (phase + p[1]).cos() + p[2]
    }
    fn chi2(d: &FringeDataset, p: &[f64; 3]) -> f64 {
        d.points
            .iter()
            .map(|pt| ((pt.counts - model(pt.phase_rad, p)) / pt.sigma).powi(2))
            .sum()
    }
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for instance in 0..10 {
        let truth = [
            30.0 + 5.0 * instance as f64,
            0.61 * instance as f64,
            80.0 + 3.0 * instance as f64,
        ];
        let points: Vec<FringePoint> = (0..12)
            .map(|k| {
                let phase = 2.0 * std::f64::consts::PI * k as f64 / 12.0;
                let mean = model(phase, &truth).max(1.0);
                let counts = Poisson::new(mean).unwrap().sample(&mut rng);
                FringePoint {
                    phase_rad: phase,
                    counts,
                    sigma: counts.max(1.0).sqrt(),
                }
            })
            .collect();
        let d = FringeDataset {
            points,
            integration_time_s: 1.0,
        };
        let fit = lm_fit(&d, None).unwrap();
        let mut grid_best = f64::INFINITY;
        let (na, nt, ny) = (60, 90, 60);
        for ia in 0..=na {
            let a = 80.0 * ia as f64 / na as f64;
            for it in 0..nt {
                let theta = 2.0 * std::f64::consts::PI * it as f64 / nt as f64;
                for iy in 0..=ny {
                    let y = 40.0 + 100.0 * iy as f64 / ny as f64;
                    grid_best = grid_best.min(chi2(&d, &[a, theta, y]));
                }
            }
        }
        assert!(
            fit.chi2 <= grid_best + 1e-9,
            "instance {instance}: LM χ² {} vs grid {grid_best}",
            fit.chi2
        );
    }

    // parameter coverage: each parameter within 3σ in ≥ 95/100 runs
    let truth = [60.0, 1.1, 140.0];
    let mut hits = [0u32; 3];
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let points: Vec<FringePoint> = (0..16)
            .map(|k| {
                let phase = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                let mean = model(phase, &truth).max(1.0);
                let counts = Poisson::new(mean).unwrap().sample(&mut rng);
                FringePoint {
                    phase_rad: phase,
                    counts,
                    sigma: counts.max(1.0).sqrt(),
                }
            })
            .collect();
        let d = FringeDataset {
            points,
            integration_time_s: 1.0,
        };
        let fit = lm_fit(&d, None).unwrap();
        let est = [fit.amplitude, fit.theta_rad, fit.y0];
        for k in 0..3 {
            let mut delta = (est[k] - truth[k]).abs();
            if k == 1 {
                delta = delta.min(2.0 * std::f64::consts::PI - delta);
            }
            if delta <= 3.0 * fit.covariance[k][k].sqrt() {
                hits[k] += 1;
            }
        }
    }
    for (k, h) in hits.iter().enumerate() {
        assert!(*h >= 95, "parameter {k} covered in {h}/100 runs");
    }
    println!(
        "PASS criterion 8: LM ≤ grid χ² on 10 instances; coverage {}/{}/{} per parameter",
        hits[0], hits[1], hits[2]
    );
}

#[test]
fn criterion_09_stabilization() {
    let start = Instant::now();
    let cfg = StabilizationConfig::default();
    let closed = run_closed_loop(&cfg, 10_000, true, 99).unwrap();
    assert!(closed.rms_nm <= 1.0, "closed-loop RMS {} nm", closed.rms_nm);
    assert!(closed.rms_deg <= 0.5, "closed-loop RMS {}°", closed.rms_deg);

    // open loop: random-walk variance grows linearly with steps
    let open_cfg = StabilizationConfig {
        drift: DriftModel {
            random_walk_sigma_nm: 0.3,
            slow_sine_amplitude_nm: 0.0,
            slow_sine_period_steps: 0.0,
        },
        ..cfg
    };
    let steps = 4000;
    let (mut var_quarter, mut var_full) = (0.0, 0.0);
    for seed in 0..64 {
        let open = run_closed_loop(&open_cfg, steps, false, 500 + seed).unwrap();
        var_quarter += open.rows[steps / 4 - 1].residual_nm.powi(2);
        var_full += open.rows[steps - 1].residual_nm.powi(2);
    }
    let ratio = var_full / var_quarter;
    assert!(
        (2.5..=6.0).contains(&ratio),
        "variance growth ratio {ratio} (linear growth gives ≈ 4)"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "criterion 9 took {elapsed:.1} s");
    println!(
        "PASS criterion 9: closed-loop RMS {:.3} nm / {:.3}°, open-loop variance ratio {:.2}, {:.1} s",
        closed.rms_nm, closed.rms_deg, ratio, elapsed
    );
}

#[test]
fn criterion_10_brightness_figure() {
    let ring = RingSpec::calibrated();
    let rate = ring::pair_generation_rate(&ring, 1.0).unwrap();
    let brightness = ring::spectral_brightness(rate, ring.linewidth_nm(), 1.0).unwrap();
    let relative = (brightness - 6e7).abs() / 6e7;
    assert!(relative <= 0.20, "brightness {brightness:.3e} ({relative:.1o}% off)");
    println!(
        "PASS criterion 10: spectral brightness {brightness:.3e} nm⁻¹mW⁻²s⁻¹ within {:.0}% of 6×10⁷",
        relative * 100.0
    );
}

#[test]
fn acceptance_statistics_helpers_agree() {
    // the χ² helper backing criterion 6 rejects an obviously sloped set
    let sloped: Vec<f64> = (0..16).map(|k| 1000.0 + 40.0 * k as f64).collect();
    assert!(stats::chi2_flatness_pvalue(&sloped) < 1e-6);
}
