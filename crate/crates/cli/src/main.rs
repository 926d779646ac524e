//! Command-line driver for the microring Franson experiment simulator.
//!
//! Exit codes: 0 success, 2 validation error (bad config, bad flags,
//! malformed inputs), 3 runtime or statistical failure.

use clap::{Args, Parser, Subcommand};
use franson_core::config::{load_config, ExperimentConfig, Profile};
use franson_core::error::Error;
use franson_core::scan::{
    self, read_fringe_csv, read_report, run_phase_scan, run_power_scan, simulate_point,
};
use franson_core::seed::{derive, Domain};
use franson_core::stabilize::run_closed_loop;
use franson_core::tags::{read_ftag, write_ftag};
use franson_core::{coincidence, fit};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "franson",
    version,
    about = "Monte Carlo simulator and analysis pipeline for a microring time-energy entanglement experiment"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (JSON). Defaults to the selected
    /// profile's built-in parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "franson-out")]
    out_dir: PathBuf,
    /// Built-in parameter profile when no --config is given.
    #[arg(long, global = true, default_value = "desk")]
    profile: String,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ring transmission spectrum as CSV.
    Spectrum {
        /// Scanned span around the center wavelength, nm.
        #[arg(long, default_value_t = 25.0)]
        span_nm: f64,
        /// Number of sample points.
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
    /// Simulate one acquisition and write FTAG time-tag files.
    Simulate {
        /// Signal interferometer phase for this run, rad (defaults to
        /// the configured value).
        #[arg(long)]
        phase_rad: Option<f64>,
    },
    /// Build a coincidence histogram from two FTAG files.
    Histogram {
        /// Signal-channel FTAG file.
        signal: PathBuf,
        /// Idler-channel FTAG file.
        idler: PathBuf,
    },
    /// Fit a fringe CSV (phase_deg,counts) and write the fit report.
    Analyze {
        /// Input fringe CSV.
        input: PathBuf,
        /// First-order interferometer visibility w.
        #[arg(long, default_value_t = 0.95)]
        w: f64,
        /// Fit without 1/σ² weights.
        #[arg(long)]
        unweighted: bool,
        /// Phase uncertainty folded into the fit, deg.
        #[arg(long, default_value_t = 0.0)]
        phase_sigma_deg: f64,
    },
    /// Run a full phase scan and persist the run directory.
    ScanPhase,
    /// Run a phase scan per pump power and write the summary report.
    ScanPower {
        /// Comma-separated pump powers in mW.
        #[arg(long, default_value = "0.25,0.5,1.0,1.5,2.0")]
        powers: String,
    },
    /// Simulate the interferometer stabilization loop.
    Stabilize {
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        /// Disable feedback and record the raw drift.
        #[arg(long)]
        open_loop: bool,
    },
    /// Re-render a persisted report.json as text and CSV.
    Report {
        /// Path to a report.json produced by scan-power.
        input: PathBuf,
    },
}

fn effective_config(common: &Common) -> franson_core::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::profile(common.profile.parse::<Profile>()?),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> franson_core::Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn run(cli: &Cli) -> franson_core::Result<()> {
    let cfg = effective_config(&cli.common)?;
    let out = &cli.common.out_dir;
    std::fs::create_dir_all(out)?;
    match &cli.command {
        Command::Spectrum { span_nm, points } => {
            let csv = scan::spectrum_csv(&cfg.ring, *span_nm, *points)?;
            let path = out.join("spectrum.csv");
            write(&path, &csv)?;
            println!("wrote {}", path.display());
        }
        Command::Simulate { phase_rad } => {
            let phase = phase_rad.unwrap_or(cfg.interferometers.phase_signal_rad);
            let point_seed = derive(cfg.master_seed, Domain::PhasePoint, 0);
            let sim = simulate_point(&cfg, phase, point_seed)?;
            let signal_path = out.join("signal.ftag");
            let idler_path = out.join("idler.ftag");
            write_ftag(&signal_path, &sim.signal)?;
            write_ftag(&idler_path, &sim.idler)?;
            #[derive(Serialize)]
            struct SimulateMeta<'a> {
                config_hash: String,
                master_seed: u64,
                tool_version: &'a str,
                phase_rad: f64,
                pairs_generated: u64,
                singles_signal: usize,
                singles_idler: usize,
            }
            let meta = SimulateMeta {
                config_hash: cfg.hash(),
                master_seed: cfg.master_seed,
                tool_version: franson_core::config::TOOL_VERSION,
                phase_rad: phase,
                pairs_generated: sim.pairs_generated,
                singles_signal: sim.signal.len(),
                singles_idler: sim.idler.len(),
            };
            write(
                &out.join("simulate.json"),
                &format!("{}\n", serde_json::to_string_pretty(&meta)?),
            )?;
            println!(
                "wrote {} ({} tags) and {} ({} tags)",
                signal_path.display(),
                sim.signal.len(),
                idler_path.display(),
                sim.idler.len()
            );
        }
        Command::Histogram { signal, idler } => {
            let (_, signal_tags) = read_ftag(signal)?;
            let (_, idler_tags) = read_ftag(idler)?;
            let h = coincidence::build_histogram(
                &signal_tags,
                &idler_tags,
                cfg.bin_width_ps,
                cfg.analysis_range(),
            )?;
            let peaks =
                coincidence::integrate_peaks(&h, cfg.peak_centers(), cfg.peak_window_halfwidth_ps)?;
            let snr = coincidence::snr(&peaks);
            #[derive(Serialize)]
            struct HistogramSidecar {
                peaks: coincidence::PeakCounts,
                snr: coincidence::SnrEstimate,
                snr_sigma: Option<f64>,
                center_to_accidental: f64,
            }
            let sidecar = HistogramSidecar {
                snr_sigma: coincidence::snr_sigma(&peaks).ok(),
                center_to_accidental: peaks.center_to_accidental_ratio(),
                snr,
                peaks,
            };
            write(&out.join("histogram.csv"), &scan::histogram_csv(&h))?;
            write(
                &out.join("peaks.json"),
                &format!("{}\n", serde_json::to_string_pretty(&sidecar)?),
            )?;
            println!(
                "wrote {} and {} (total coincidences in range: {})",
                out.join("histogram.csv").display(),
                out.join("peaks.json").display(),
                h.total_counts()
            );
        }
        Command::Analyze {
            input,
            w,
            unweighted,
            phase_sigma_deg,
        } => {
            let dataset = read_fringe_csv(input)?;
            let options = fit::FitOptions {
                weighted: !unweighted,
                phase_sigma_rad: (*phase_sigma_deg > 0.0).then(|| phase_sigma_deg.to_radians()),
                ..fit::FitOptions::default()
            };
            let mut fringe_fit = fit::lm_fit_with(&dataset, None, &options)?;
            fringe_fit.apply_interferometer_visibility(*w)?;
            #[derive(Serialize)]
            struct AnalyzeReport<'a> {
                fit: &'a fit::FringeFit,
                interferometer_w: f64,
                n_points: usize,
                weighted: bool,
                phase_sigma_deg: f64,
                tool_version: &'a str,
            }
            let report = AnalyzeReport {
                fit: &fringe_fit,
                interferometer_w: *w,
                n_points: dataset.points.len(),
                weighted: !unweighted,
                phase_sigma_deg: *phase_sigma_deg,
                tool_version: franson_core::config::TOOL_VERSION,
            };
            let path = out.join("analysis.json");
            write(
                &path,
                &format!("{}\n", serde_json::to_string_pretty(&report)?),
            )?;
            println!(
                "V_Meas = {:.4} ± {:.4}, V = {:.4}, Bell violation: {:.2}σ ({} iterations)",
                fringe_fit.v_meas,
                fringe_fit.sigma_v,
                fringe_fit.v_corrected.unwrap_or(f64::NAN),
                fringe_fit.bell_sigmas,
                fringe_fit.iterations
            );
            println!("wrote {}", path.display());
        }
        Command::ScanPhase => {
            let result = run_phase_scan(&cfg)?;
            scan::write_phase_scan(&result, out)?;
            match (&result.fit, result.snr_single_peak) {
                (Some(f), _) => println!(
                    "fringe scan: SNR = {:.1}, V_Meas = {:.4} ± {:.4}, Bell violation {:.2}σ",
                    result.snr.value, f.v_meas, f.sigma_v, f.bell_sigmas
                ),
                (None, Some(ratio)) => println!(
                    "single-peak (masked) run: center/accidental = {ratio:.1}, central counts = {}",
                    result.total_peaks.c_center
                ),
                (None, None) => {}
            }
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            println!("run directory: {}", out.display());
        }
        Command::ScanPower { powers } => {
            let powers: Vec<f64> = powers
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid_input(format!("bad power value `{p}`")))
                })
                .collect::<franson_core::Result<_>>()?;
            let report = run_power_scan(&cfg, &powers)?;
            scan::write_report(&report, out)?;
            print!("{}", scan::report_text(&report));
            println!("report directory: {}", out.display());
        }
        Command::Stabilize { steps, open_loop } => {
            let trace = run_closed_loop(
                &cfg.stabilization,
                *steps,
                !open_loop,
                derive(cfg.master_seed, Domain::Stabilization, 0),
            )?;
            scan::write_stabilization(&trace, out)?;
            println!(
                "{} loop, {} steps: RMS {:.3} nm ({:.3}°), max |residual| {:.2} nm, {} saturations",
                if *open_loop { "open" } else { "closed" },
                steps,
                trace.rms_nm,
                trace.rms_deg,
                trace.max_abs_nm,
                trace.saturation_count
            );
            println!("wrote {}", out.join("trace.csv").display());
        }
        Command::Report { input } => {
            let report = read_report(input)?;
            scan::write_report(&report, out)?;
            print!("{}", scan::report_text(&report));
        }
    }
    Ok(())
}

/// 2 for validation problems, 3 for runtime/statistical failures.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_)
        | Error::InvalidConfig { .. }
        | Error::NoThroughput(_)
        | Error::Json(_)
        | Error::TagFile(_) => 2,
        Error::Fit(_) | Error::Estimation(_) | Error::EmptyCoincidences(_) | Error::Io(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
