//! End-to-end orchestration: simulate tag streams for one setting, run
//! phase and power scans, and persist reports.
//!
//! Everything derives from the configuration and the master seed; runs
//! with the same pair are byte-identical, whether points and chunks are
//! processed in parallel or sequentially.

use crate::coincidence::{
    build_histogram, integrate_peaks, snr, snr_sigma, CoincidenceHistogram, PeakCounts,
    SnrEstimate,
};
use crate::config::{ExperimentConfig, TOOL_VERSION};
use crate::error::{Error, Result};
use crate::fit::{
    lm_fit_with, visibility_from_snr, FitOptions, FringeDataset, FringeFit, FringePoint,
    SnrVisibility,
};
use crate::franson::{
    check_franson_regime, joint_delay_weights, sample_pair_fate, sample_single_collection,
    ArmMask, InterferometerPair, PairFate, REGIME_MARGIN,
};
use crate::ring::{self, transmission, RingSpec};
use crate::seed::{derive, Domain};
use crate::source::{self, apply_delay, detect, poisson_tags, survival_probability};
use crate::stabilize::StabilizationTrace;
use crate::stats;
use crate::tags::TimeTagStream;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Simulated detector streams of one acquisition.
pub struct SimulatedPoint {
    pub signal: TimeTagStream,
    pub idler: TimeTagStream,
    pub pairs_generated: u64,
}

struct ChunkTags {
    signal: Vec<i64>,
    idler: Vec<i64>,
    pairs: u64,
}

/// Simulate the two detector streams for one interferometer setting.
///
/// Pipeline per pair: Poisson emission, pre-detector losses per leg,
/// joint interferometer outcome (categories, arms, port loss), fixed
/// idler offset, uncorrelated background photons, detector response.
pub fn simulate_point(
    cfg: &ExperimentConfig,
    phase_signal_rad: f64,
    point_seed: u64,
) -> Result<SimulatedPoint> {
    let ip = InterferometerPair {
        phase_signal_rad,
        ..cfg.interferometers.clone()
    };
    joint_delay_weights(&ip)?; // throughput check up front
    let rate = ring::pair_generation_rate(&cfg.ring, cfg.pump_power_mw)?;
    let duration_ps = (cfg.integration_time_s * 1e12).round() as i64;
    let p_sig = survival_probability(cfg.losses.signal_pre_detector_db());
    let p_idl = survival_probability(cfg.losses.idler_pre_detector_db());
    let delta_t = ip.delta_t_ps;
    let emission_seed = derive(point_seed, Domain::PairEmission, 0);
    let outcome_seed = derive(point_seed, Domain::JointOutcome, 0);

    let process_chunk = |chunk: u64| -> Result<ChunkTags> {
        let times = source::pair_chunk_times(rate, duration_ps, chunk, emission_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(derive(outcome_seed, Domain::JointOutcome, chunk));
        let mut out = ChunkTags {
            signal: Vec::new(),
            idler: Vec::new(),
            pairs: times.len() as u64,
        };
        for t in times {
            let signal_alive = rng.gen::<f64>() < p_sig;
            let idler_alive = rng.gen::<f64>() < p_idl;
            match (signal_alive, idler_alive) {
                (true, true) => match sample_pair_fate(&ip, &mut rng)? {
                    PairFate::Both {
                        signal_long,
                        idler_long,
                        ..
                    } => {
                        out.signal.push(t + if signal_long { delta_t } else { 0 });
                        out.idler.push(t + if idler_long { delta_t } else { 0 });
                    }
                    PairFate::SignalOnly { signal_long } => {
                        out.signal.push(t + if signal_long { delta_t } else { 0 });
                    }
                    PairFate::IdlerOnly { idler_long } => {
                        out.idler.push(t + if idler_long { delta_t } else { 0 });
                    }
                    PairFate::Neither => {}
                },
                (true, false) => {
                    if let Some(long) = sample_single_collection(ip.mask_signal, &mut rng)? {
                        out.signal.push(t + if long { delta_t } else { 0 });
                    }
                }
                (false, true) => {
                    if let Some(long) = sample_single_collection(ip.mask_idler, &mut rng)? {
                        out.idler.push(t + if long { delta_t } else { 0 });
                    }
                }
                (false, false) => {}
            }
        }
        Ok(out)
    };

    let chunks = source::n_chunks(duration_ps);
    #[cfg(feature = "parallel")]
    let chunk_tags: Vec<ChunkTags> = (0..chunks)
        .into_par_iter()
        .map(process_chunk)
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let chunk_tags: Vec<ChunkTags> = (0..chunks).map(process_chunk).collect::<Result<_>>()?;

    let mut signal_tags = Vec::new();
    let mut idler_tags = Vec::new();
    let mut pairs_generated = 0;
    for c in chunk_tags {
        signal_tags.extend(c.signal);
        idler_tags.extend(c.idler);
        pairs_generated += c.pairs;
    }
    idler_tags = apply_delay(&idler_tags, cfg.idler_offset_ps);

    // parasitic photons at the detector inputs, scaled with pump power
    signal_tags.extend(poisson_tags(
        cfg.background_rates_hz_per_mw[0] * cfg.pump_power_mw,
        duration_ps,
        derive(point_seed, Domain::Background, 0),
    ));
    idler_tags.extend(poisson_tags(
        cfg.background_rates_hz_per_mw[1] * cfg.pump_power_mw,
        duration_ps,
        derive(point_seed, Domain::Background, 1),
    ));
    signal_tags.sort_unstable();
    idler_tags.sort_unstable();

    let signal = detect(
        &signal_tags,
        &cfg.detectors[0],
        duration_ps,
        0,
        derive(point_seed, Domain::DetectorSignal, 0),
    )?;
    let idler = detect(
        &idler_tags,
        &cfg.detectors[1],
        duration_ps,
        1,
        derive(point_seed, Domain::DetectorIdler, 0),
    )?;
    Ok(SimulatedPoint {
        signal,
        idler,
        pairs_generated,
    })
}

/// Per-phase-point artifacts of a scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub phase_rad: f64,
    pub pairs_generated: u64,
    pub singles_signal: u64,
    pub singles_idler: u64,
    pub histogram: CoincidenceHistogram,
    pub peaks: PeakCounts,
}

/// Shape of a scan: a fringe scan, or the single-peak (masked-arm)
/// coincidence mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Fringe,
    SinglePeak,
}

/// Result of a full phase scan.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseScanResult {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub mode: ScanMode,
    pub points: Vec<PointRecord>,
    pub total_histogram: CoincidenceHistogram,
    pub total_peaks: PeakCounts,
    /// Side-peak SNR `2(C_LS+C_SL)/C_A` over the whole scan.
    pub snr: SnrEstimate,
    pub snr_sigma: Option<f64>,
    /// Fig. 2c-mode ratio for masked runs: central counts / accidentals.
    pub snr_single_peak: Option<f64>,
    pub dataset: Option<FringeDataset>,
    pub fit: Option<FringeFit>,
    pub predicted_v_from_snr: Option<SnrVisibility>,
    /// χ² flatness p-values of the per-point singles (signal, idler).
    pub singles_flatness_pvalues: [f64; 2],
    pub regime_satisfied: bool,
    pub measured_pair_rate_hz: f64,
    pub background_note: String,
    pub warnings: Vec<String>,
}

fn background_note(cfg: &ExperimentConfig) -> String {
    format!(
        "background is a fitted knob: {:.3e}/{:.3e} Hz per mW at the detector inputs, \
         scaled linearly with pump power",
        cfg.background_rates_hz_per_mw[0], cfg.background_rates_hz_per_mw[1]
    )
}

/// Simulate every phase point, build histograms, integrate peaks, and
/// fit the central-peak fringe.
pub fn run_phase_scan(cfg: &ExperimentConfig) -> Result<PhaseScanResult> {
    cfg.validate()?;
    let mut warnings = Vec::new();
    let regime_satisfied = check_franson_regime(&cfg.regime, REGIME_MARGIN)?;
    if !regime_satisfied {
        warnings.push(format!(
            "Franson regime violated (τc = {} ps, ΔT = {} ps, τp = {} ps, margin {REGIME_MARGIN}); \
             central-peak contrast is unreliable",
            cfg.regime.tau_c_ps, cfg.regime.delta_t_ps, cfg.regime.tau_pump_ps
        ));
    }

    let range = cfg.analysis_range();
    let centers = cfg.peak_centers();
    let build_point = |(index, &phase_rad): (usize, &f64)| -> Result<PointRecord> {
        let point_seed = derive(cfg.master_seed, Domain::PhasePoint, index as u64);
        let sim = simulate_point(cfg, phase_rad, point_seed)?;
        let histogram = build_histogram(&sim.signal.tags, &sim.idler.tags, cfg.bin_width_ps, range)?;
        let peaks = integrate_peaks(&histogram, centers, cfg.peak_window_halfwidth_ps)?;
        Ok(PointRecord {
            index,
            phase_rad,
            pairs_generated: sim.pairs_generated,
            singles_signal: sim.signal.len() as u64,
            singles_idler: sim.idler.len() as u64,
            histogram,
            peaks,
        })
    };

    #[cfg(feature = "parallel")]
    let points: Vec<PointRecord> = cfg
        .phase_grid_rad
        .par_iter()
        .enumerate()
        .map(build_point)
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let points: Vec<PointRecord> = cfg
        .phase_grid_rad
        .iter()
        .enumerate()
        .map(build_point)
        .collect::<Result<_>>()?;

    let mut total_histogram = points[0].histogram.clone();
    for p in &points[1..] {
        for (acc, c) in total_histogram.counts.iter_mut().zip(&p.histogram.counts) {
            *acc += c;
        }
    }
    total_histogram.total_pairs_examined = total_histogram.counts.iter().sum();
    let total_peaks = integrate_peaks(&total_histogram, centers, cfg.peak_window_halfwidth_ps)?;
    if total_peaks.c_ls + total_peaks.c_center + total_peaks.c_sl == 0 {
        return Err(Error::EmptyCoincidences(
            "no counts in any peak window; increase integration_time_s, raise the pump power, \
             or reduce the loss budget"
            .into(),
        ));
    }

    let mode = if cfg.interferometers.mask_signal != ArmMask::Open
        && cfg.interferometers.mask_idler != ArmMask::Open
    {
        ScanMode::SinglePeak
    } else {
        ScanMode::Fringe
    };

    let snr_estimate = snr(&total_peaks);
    let snr_sigma_value = snr_sigma(&total_peaks).ok();
    let snr_single_peak = match mode {
        ScanMode::SinglePeak => Some(total_peaks.center_to_accidental_ratio()),
        ScanMode::Fringe => None,
    };

    let (dataset, fit, predicted) = match mode {
        ScanMode::SinglePeak => (None, None, None),
        ScanMode::Fringe => {
            let dataset = FringeDataset {
                points: points
                    .iter()
                    .map(|p| FringePoint {
                        phase_rad: p.phase_rad,
                        counts: p.peaks.c_center as f64,
                        sigma: (p.peaks.c_center as f64).max(1.0).sqrt(),
                    })
                    .collect(),
                integration_time_s: cfg.integration_time_s,
            };
            let options = FitOptions {
                phase_sigma_rad: (cfg.phase_sigma_deg > 0.0)
                    .then(|| cfg.phase_sigma_deg.to_radians()),
                ..FitOptions::default()
            };
            let mut fit = lm_fit_with(&dataset, None, &options)?;
            fit.apply_interferometer_visibility(cfg.interferometers.visibility_w)?;
            let predicted = if snr_estimate.unbounded {
                None
            } else {
                Some(visibility_from_snr(
                    snr_estimate.value,
                    cfg.interferometers.visibility_w,
                )?)
            };
            (Some(dataset), Some(fit), predicted)
        }
    };

    let singles_sig: Vec<f64> = points.iter().map(|p| p.singles_signal as f64).collect();
    let singles_idl: Vec<f64> = points.iter().map(|p| p.singles_idler as f64).collect();
    let total_pairs: u64 = points.iter().map(|p| p.pairs_generated).sum();
    let measured_pair_rate_hz =
        total_pairs as f64 / (points.len() as f64 * cfg.integration_time_s);

    Ok(PhaseScanResult {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        mode,
        total_histogram,
        total_peaks,
        snr: snr_estimate,
        snr_sigma: snr_sigma_value,
        snr_single_peak,
        dataset,
        fit,
        predicted_v_from_snr: predicted,
        singles_flatness_pvalues: [
            stats::chi2_flatness_pvalue(&singles_sig),
            stats::chi2_flatness_pvalue(&singles_idl),
        ],
        regime_satisfied,
        measured_pair_rate_hz,
        background_note: background_note(cfg),
        warnings,
        points,
    })
}

/// One row of the five-power summary, mirroring the published table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerScanRow {
    pub pump_power_mw: f64,
    /// Rate-law value k·Q³·P²/r².
    pub rate_internal_hz: f64,
    /// Estimated from the generated pair count.
    pub rate_measured_hz: f64,
    pub snr: f64,
    pub snr_sigma: Option<f64>,
    pub v_meas: f64,
    pub sigma_v: f64,
    pub bell_sigmas: f64,
    pub v_corrected: f64,
    pub v_corrected_sigma: f64,
}

/// Power-scan report with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<PowerScanRow>,
    /// Log-log slope of measured rate vs power (None below 3 powers).
    pub rate_slope_loglog: Option<f64>,
    pub config_hash: String,
    pub master_seed: u64,
    pub tool_version: String,
    pub background_note: String,
    pub warnings: Vec<String>,
}

/// One phase scan per pump power; each power gets its own derived seed.
pub fn run_power_scan(cfg: &ExperimentConfig, powers: &[f64]) -> Result<RunReport> {
    cfg.validate()?;
    if powers.is_empty() {
        return Err(Error::invalid_input("need at least one pump power"));
    }
    if cfg.interferometers.mask_signal != ArmMask::Open
        || cfg.interferometers.mask_idler != ArmMask::Open
    {
        return Err(Error::invalid_input(
            "power scans need the fringe configuration (no masked arms)",
        ));
    }

    let scan_power = |(k, &p): (usize, &f64)| -> Result<(PowerScanRow, Vec<String>)> {
        if p <= 0.0 {
            return Err(Error::invalid_config("powers", "pump powers must be > 0"));
        }
        let mut sub = cfg.clone();
        sub.pump_power_mw = p;
        sub.master_seed = derive(cfg.master_seed, Domain::PowerPoint, k as u64);
        let scan = run_phase_scan(&sub)?;
        let fit = scan.fit.as_ref().expect("fringe mode produces a fit");
        Ok((
            PowerScanRow {
                pump_power_mw: p,
                rate_internal_hz: ring::pair_generation_rate(&sub.ring, p)?,
                rate_measured_hz: scan.measured_pair_rate_hz,
                snr: scan.snr.value,
                snr_sigma: scan.snr_sigma,
                v_meas: fit.v_meas,
                sigma_v: fit.sigma_v,
                bell_sigmas: fit.bell_sigmas,
                v_corrected: fit.v_corrected.unwrap_or(f64::NAN),
                v_corrected_sigma: fit.v_corrected_sigma.unwrap_or(f64::NAN),
            },
            scan.warnings,
        ))
    };

    #[cfg(feature = "parallel")]
    let outcomes: Vec<(PowerScanRow, Vec<String>)> = powers
        .par_iter()
        .enumerate()
        .map(scan_power)
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<(PowerScanRow, Vec<String>)> = powers
        .iter()
        .enumerate()
        .map(scan_power)
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut warnings = Vec::new();
    for (row, w) in outcomes {
        rows.push(row);
        warnings.extend(w);
    }
    warnings.dedup();

    let rate_slope_loglog = if rows.len() >= 3 {
        let xs: Vec<f64> = rows.iter().map(|r| r.pump_power_mw.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.rate_measured_hz.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        Some(cov / var)
    } else {
        None
    };

    Ok(RunReport {
        rows,
        rate_slope_loglog,
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed,
        tool_version: TOOL_VERSION.into(),
        background_note: background_note(cfg),
        warnings,
    })
}

// ---------------------------------------------------------------------
// artifact persistence
// ---------------------------------------------------------------------

fn write_string(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Two-column transmission spectrum CSV with a header line.
pub fn spectrum_csv(ring: &RingSpec, span_nm: f64, points: usize) -> Result<String> {
    if points < 2 || span_nm <= 0.0 {
        return Err(Error::invalid_input("need a positive span and ≥ 2 points"));
    }
    let mut out = String::from("wavelength_nm,transmission\n");
    let lo = ring.center_wavelength_nm - span_nm / 2.0;
    for k in 0..points {
        let w = lo + span_nm * k as f64 / (points - 1) as f64;
        out.push_str(&format!("{},{}\n", w, transmission(ring, w)?));
    }
    Ok(out)
}

/// Histogram CSV: `bin_center_ps,counts`.
pub fn histogram_csv(h: &CoincidenceHistogram) -> String {
    let mut out = String::from("bin_center_ps,counts\n");
    for (k, &c) in h.counts.iter().enumerate() {
        out.push_str(&format!("{},{}\n", h.bin_center(k), c));
    }
    out
}

/// Fringe CSV: `phase_deg,counts` (the format `analyze` reads back).
pub fn fringe_csv(dataset: &FringeDataset) -> String {
    let mut out = String::from("phase_deg,counts\n");
    for p in &dataset.points {
        out.push_str(&format!("{},{}\n", p.phase_rad.to_degrees(), p.counts));
    }
    out
}

/// Parse a `phase_deg,counts` CSV into a dataset with Poisson σ.
pub fn read_fringe_csv(path: &Path) -> Result<FringeDataset> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("phase_deg")) {
            continue;
        }
        let mut fields = line.split(',');
        let bad = || Error::invalid_input(format!("fringe CSV line {}: `{line}`", lineno + 1));
        let phase_deg: f64 = fields.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let counts: f64 = fields.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        if fields.next().is_some() {
            return Err(bad());
        }
        points.push(FringePoint {
            phase_rad: phase_deg.to_radians(),
            counts,
            sigma: counts.max(1.0).sqrt(),
        });
    }
    Ok(FringeDataset {
        points,
        integration_time_s: 0.0,
    })
}

/// Summary block persisted with every phase scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary<'a> {
    pub mode: ScanMode,
    pub config_hash: &'a str,
    pub master_seed: u64,
    pub tool_version: &'a str,
    pub snr: &'a SnrEstimate,
    pub snr_sigma: &'a Option<f64>,
    pub snr_single_peak: &'a Option<f64>,
    pub total_peaks: &'a PeakCounts,
    pub predicted_v_from_snr: &'a Option<SnrVisibility>,
    pub singles_flatness_pvalues: [f64; 2],
    pub regime_satisfied: bool,
    pub measured_pair_rate_hz: f64,
    pub background_note: &'a str,
    pub warnings: &'a [String],
}

/// Write the run directory of a phase scan: config snapshot, per-point
/// histograms and peak counts, fringe data, fit, and summary.
pub fn write_phase_scan(result: &PhaseScanResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("points"))?;
    write_string(&dir.join("config.json"), &json_pretty(&result.config)?)?;
    for p in &result.points {
        write_string(
            &dir.join(format!("points/point_{:02}.csv", p.index)),
            &histogram_csv(&p.histogram),
        )?;
        #[derive(Serialize)]
        struct PointSummary<'a> {
            index: usize,
            phase_rad: f64,
            pairs_generated: u64,
            singles_signal: u64,
            singles_idler: u64,
            peaks: &'a PeakCounts,
        }
        write_string(
            &dir.join(format!("points/point_{:02}.peaks.json", p.index)),
            &json_pretty(&PointSummary {
                index: p.index,
                phase_rad: p.phase_rad,
                pairs_generated: p.pairs_generated,
                singles_signal: p.singles_signal,
                singles_idler: p.singles_idler,
                peaks: &p.peaks,
            })?,
        )?;
    }
    write_string(&dir.join("histogram_total.csv"), &histogram_csv(&result.total_histogram))?;
    if let Some(dataset) = &result.dataset {
        write_string(&dir.join("fringe.csv"), &fringe_csv(dataset))?;
    }
    if let Some(fit) = &result.fit {
        write_string(&dir.join("fit.json"), &json_pretty(fit)?)?;
    }
    let summary = ScanSummary {
        mode: result.mode,
        config_hash: &result.config_hash,
        master_seed: result.config.master_seed,
        tool_version: TOOL_VERSION,
        snr: &result.snr,
        snr_sigma: &result.snr_sigma,
        snr_single_peak: &result.snr_single_peak,
        total_peaks: &result.total_peaks,
        predicted_v_from_snr: &result.predicted_v_from_snr,
        singles_flatness_pvalues: result.singles_flatness_pvalues,
        regime_satisfied: result.regime_satisfied,
        measured_pair_rate_hz: result.measured_pair_rate_hz,
        background_note: &result.background_note,
        warnings: &result.warnings,
    };
    write_string(&dir.join("summary.json"), &json_pretty(&summary)?)?;
    Ok(())
}

fn format_pm(value: f64, sigma: Option<f64>) -> String {
    match sigma {
        Some(s) => format!("{value:.1}±{s:.1}"),
        None => format!("{value:.1}"),
    }
}

/// Render the power-scan report as a fixed-width text table.
pub fn report_text(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8} {:<12} {:<14} {:<14} {:<8} {:<14}\n",
        "P (mW)", "R int (MHz)", "SNR", "V_Meas (%)", "Bell σ", "V (%)"
    ));
    for r in &report.rows {
        out.push_str(&format!(
            "{:<8} {:<12.3} {:<14} {:<14} {:<8.1} {:<14}\n",
            r.pump_power_mw,
            r.rate_internal_hz / 1e6,
            format_pm(r.snr, r.snr_sigma),
            format_pm(r.v_meas * 100.0, Some(r.sigma_v * 100.0)),
            r.bell_sigmas,
            format_pm(r.v_corrected * 100.0, Some(r.v_corrected_sigma * 100.0)),
        ));
    }
    if let Some(slope) = report.rate_slope_loglog {
        out.push_str(&format!("\nlog-log rate slope: {slope:.4}\n"));
    }
    out.push_str(&format!("\nconfig: {}\nseed: {}\nversion: {}\n", report.config_hash, report.master_seed, report.tool_version));
    out.push_str(&format!("note: {}\n", report.background_note));
    for w in &report.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    out
}

/// Power-scan rows as CSV.
pub fn report_csv(report: &RunReport) -> String {
    let mut out = String::from(
        "pump_power_mw,rate_internal_hz,rate_measured_hz,snr,snr_sigma,v_meas,sigma_v,bell_sigmas,v_corrected,v_corrected_sigma\n",
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.pump_power_mw,
            r.rate_internal_hz,
            r.rate_measured_hz,
            r.snr,
            r.snr_sigma.unwrap_or(f64::NAN),
            r.v_meas,
            r.sigma_v,
            r.bell_sigmas,
            r.v_corrected,
            r.v_corrected_sigma,
        ));
    }
    out
}

/// Persist a power-scan report as JSON, CSV, and a text table.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_string(&dir.join("report.json"), &json_pretty(report)?)?;
    write_string(&dir.join("report.csv"), &report_csv(report))?;
    write_string(&dir.join("report.txt"), &report_text(report))?;
    Ok(())
}

/// Load a persisted power-scan report.
pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Stabilization trace CSV: step, drift, actuation, residuals.
pub fn stabilization_csv(trace: &StabilizationTrace) -> String {
    let mut out = String::from("step,drift_nm,actuation_nm,residual_nm,residual_deg\n");
    for r in &trace.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.step, r.drift_nm, r.actuation_nm, r.residual_nm, r.residual_deg
        ));
    }
    out
}

/// Summary JSON for a stabilization run.
#[derive(Debug, Clone, Serialize)]
pub struct StabilizationSummary {
    pub rms_nm: f64,
    pub rms_deg: f64,
    pub max_abs_nm: f64,
    pub saturation_count: usize,
    pub settle_steps: usize,
    pub steps: usize,
}

pub fn write_stabilization(trace: &StabilizationTrace, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_string(&dir.join("trace.csv"), &stabilization_csv(trace))?;
    let summary = StabilizationSummary {
        rms_nm: trace.rms_nm,
        rms_deg: trace.rms_deg,
        max_abs_nm: trace.max_abs_nm,
        saturation_count: trace.saturation_count,
        settle_steps: trace.settle_steps,
        steps: trace.rows.len(),
    };
    write_string(&dir.join("summary.json"), &json_pretty(&summary)?)?;
    Ok(())
}
