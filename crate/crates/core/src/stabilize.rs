//! Closed-loop simulation of the interferometer phase stabilization.
//!
//! A tilted mirror converts the He:Ne reference beam's temporal phase
//! into spatial fringes on a line camera; the fringe phase estimate
//! feeds a PID controller driving the piezo mirror. Reported residuals
//! are per-interferometer mirror displacements in nm and in degrees of
//! the signal/idler interference phase (one period per 775 nm of mirror
//! travel, half the pump wavelength).

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Mirror travel per 2π of signal/idler phase, nm (half the pump
/// wavelength).
pub const IR_PERIOD_NM: f64 = 775.0;

/// Mirror travel per 2π of the He:Ne reference fringe, nm (half the
/// reference wavelength; the Michelson doubles the path change).
pub const REFERENCE_PERIOD_NM: f64 = 316.4;

/// Convert a mirror displacement to signal/idler phase degrees.
pub fn nm_to_ir_degrees(nm: f64) -> f64 {
    nm / IR_PERIOD_NM * 360.0
}

/// Synthetic spatial fringe pattern on the line camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeSpec {
    pub pixels: usize,
    /// Spatial fringe periods across the sensor (~3 for the wedge).
    pub n_fringes: f64,
    pub amplitude: f64,
    pub background: f64,
    pub noise_sigma: f64,
    pub reference_wavelength_nm: f64,
}

impl Default for FringeSpec {
    fn default() -> Self {
        FringeSpec {
            pixels: 1024,
            n_fringes: 3.0,
            amplitude: 1000.0,
            background: 100.0,
            noise_sigma: 20.0,
            reference_wavelength_nm: 632.8,
        }
    }
}

impl FringeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.pixels < 64 {
            return Err(Error::invalid_config("pixels", "must be ≥ 64"));
        }
        if self.n_fringes <= 0.5 {
            return Err(Error::invalid_config("n_fringes", "must be > 0.5"));
        }
        if self.amplitude < 0.0 || self.background < 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::invalid_config(
                "fringe",
                "amplitude, background and noise must be ≥ 0",
            ));
        }
        Ok(())
    }
}

/// Piezo actuator with finite resolution and range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiezoState {
    pub position_nm: f64,
    /// Positioning quantum; moves are rounded to it.
    pub resolution_nm: f64,
    pub range_nm: f64,
}

impl Default for PiezoState {
    fn default() -> Self {
        PiezoState {
            position_nm: 0.0,
            resolution_nm: 0.8,
            range_nm: 10_000.0,
        }
    }
}

impl PiezoState {
    /// Move by `delta_nm`, quantized to the resolution and clamped to
    /// the range. Returns true when the range clipped the move.
    pub fn actuate(&mut self, delta_nm: f64) -> bool {
        let target = self.position_nm + delta_nm;
        let quantized = if self.resolution_nm > 0.0 {
            (target / self.resolution_nm).round() * self.resolution_nm
        } else {
            target
        };
        let clamped = quantized.clamp(-self.range_nm, self.range_nm);
        self.position_nm = clamped;
        clamped != quantized
    }
}

/// Environmental drift: a random walk plus a slow sine (thermal cycle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftModel {
    pub random_walk_sigma_nm: f64,
    pub slow_sine_amplitude_nm: f64,
    pub slow_sine_period_steps: f64,
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel {
            random_walk_sigma_nm: 0.3,
            slow_sine_amplitude_nm: 30.0,
            slow_sine_period_steps: 2000.0,
        }
    }
}

impl DriftModel {
    pub fn validate(&self) -> Result<()> {
        if self.random_walk_sigma_nm < 0.0
            || self.slow_sine_amplitude_nm < 0.0
            || self.slow_sine_period_steps < 0.0
        {
            return Err(Error::invalid_config("drift", "must be nonnegative"));
        }
        Ok(())
    }
}

/// PID gains; dimensionless on the nm-valued error, with an integral
/// clamp in nm·steps. Defaults tuned on the default plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_limit_nm: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains {
            kp: 0.8,
            ki: 0.2,
            kd: 0.0,
            integral_limit_nm: 50.0,
        }
    }
}

/// Controller state across steps.
#[derive(Debug, Clone, Default)]
pub struct PidController {
    pub integral_nm: f64,
    pub previous_error_nm: Option<f64>,
}

impl PidController {
    /// One PID update on an error already expressed in nm of mirror
    /// travel. Returns the commanded move in nm.
    pub fn step(&mut self, error_nm: f64, gains: &PidGains) -> f64 {
        self.integral_nm = (self.integral_nm + error_nm)
            .clamp(-gains.integral_limit_nm, gains.integral_limit_nm);
        let derivative = match self.previous_error_nm {
            Some(prev) => error_nm - prev,
            None => 0.0,
        };
        self.previous_error_nm = Some(error_nm);
        gains.kp * error_nm + gains.ki * self.integral_nm + gains.kd * derivative
    }

    /// One PID update on a phase error in radians of the signal/idler
    /// phase; converted at 775 nm per 2π.
    pub fn step_phase(&mut self, error_rad: f64, gains: &PidGains) -> f64 {
        self.step(error_rad / (2.0 * std::f64::consts::PI) * IR_PERIOD_NM, gains)
    }
}

/// Camera frame: I[x] = B + A·(1 + cos(2π·f·x/N + φ))/2 + noise.
pub fn synth_frame<R: Rng>(spec: &FringeSpec, phase_rad: f64, rng: &mut R) -> Vec<f64> {
    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).expect("validated sigma"))
    } else {
        None
    };
    (0..spec.pixels)
        .map(|x| {
            let arg =
                2.0 * std::f64::consts::PI * spec.n_fringes * x as f64 / spec.pixels as f64
                    + phase_rad;
            let clean = spec.background + spec.amplitude * (1.0 + arg.cos()) / 2.0;
            match &noise {
                Some(n) => clean + n.sample(rng),
                None => clean,
            }
        })
        .collect()
}

/// Fringe phase in [0, 2π) by complex demodulation at the known spatial
/// frequency. Errors when the demodulated amplitude sits at the noise
/// floor.
pub fn estimate_phase(frame: &[f64], spec: &FringeSpec) -> Result<f64> {
    if frame.len() != spec.pixels {
        return Err(Error::invalid_input(format!(
            "frame length {} does not match the {}-pixel camera",
            frame.len(),
            spec.pixels
        )));
    }
    let n = spec.pixels as f64;
    let (mut zr, mut zi) = (0.0f64, 0.0f64);
    for (x, &i_x) in frame.iter().enumerate() {
        let arg = 2.0 * std::f64::consts::PI * spec.n_fringes * x as f64 / n;
        zr += i_x * arg.cos();
        zi -= i_x * arg.sin();
    }
    let amplitude_estimate = 4.0 * (zr * zr + zi * zi).sqrt() / n;
    // demodulated amplitude noise is 2√2·σ/√N per quadrature pair
    let noise_floor = 2.0 * std::f64::consts::SQRT_2 * spec.noise_sigma / n.sqrt();
    if amplitude_estimate < 5.0 * noise_floor + 1e-12 {
        return Err(Error::Estimation(format!(
            "fringe amplitude {amplitude_estimate:.3} below the noise floor; cannot lock"
        )));
    }
    Ok(zi.atan2(zr).rem_euclid(2.0 * std::f64::consts::PI))
}

/// Least-squares variant: fit a·cos + b·sin + c at the known frequency.
/// Agrees with [`estimate_phase`] to well under 0.1° on integer fringe
/// counts; kept as a cross-check.
pub fn estimate_phase_least_squares(frame: &[f64], spec: &FringeSpec) -> Result<f64> {
    if frame.len() != spec.pixels {
        return Err(Error::invalid_input("frame length mismatch"));
    }
    let n = spec.pixels as f64;
    let (mut sc, mut ss, mut scc, mut sss, mut scs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sic, mut sis, mut si) = (0.0, 0.0, 0.0);
    for (x, &i_x) in frame.iter().enumerate() {
        let arg = 2.0 * std::f64::consts::PI * spec.n_fringes * x as f64 / n;
        let (s, c) = arg.sin_cos();
        sc += c;
        ss += s;
        scc += c * c;
        sss += s * s;
        scs += c * s;
        sic += i_x * c;
        sis += i_x * s;
        si += i_x;
    }
    // normal equations for [a, b, c] in a·cos + b·sin + c
    let m = [[scc, scs, sc], [scs, sss, ss], [sc, ss, n]];
    let rhs = [sic, sis, si];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-9 {
        return Err(Error::Estimation("degenerate fringe design matrix".into()));
    }
    let solve_col = |k: usize| {
        let mut mm = m;
        for r in 0..3 {
            mm[r][k] = rhs[r];
        }
        (mm[0][0] * (mm[1][1] * mm[2][2] - mm[1][2] * mm[2][1])
            - mm[0][1] * (mm[1][0] * mm[2][2] - mm[1][2] * mm[2][0])
            + mm[0][2] * (mm[1][0] * mm[2][1] - mm[1][1] * mm[2][0]))
            / det
    };
    let a = solve_col(0);
    let b = solve_col(1);
    Ok((-b).atan2(a).rem_euclid(2.0 * std::f64::consts::PI))
}

/// Full stabilization plant configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizationConfig {
    pub fringe: FringeSpec,
    pub piezo: PiezoState,
    pub drift: DriftModel,
    pub gains: PidGains,
    /// Lock setpoint as signal/idler phase, rad.
    pub setpoint_rad: f64,
}

impl Default for StabilizationConfig {
    fn default() -> Self {
        StabilizationConfig {
            fringe: FringeSpec::default(),
            piezo: PiezoState::default(),
            drift: DriftModel::default(),
            gains: PidGains::default(),
            setpoint_rad: 0.0,
        }
    }
}

impl StabilizationConfig {
    pub fn validate(&self) -> Result<()> {
        self.fringe.validate()?;
        self.drift.validate()?;
        if self.piezo.resolution_nm < 0.0 || self.piezo.range_nm <= 0.0 {
            return Err(Error::invalid_config(
                "piezo",
                "resolution ≥ 0 and range > 0 required",
            ));
        }
        Ok(())
    }
}

/// One record per control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub drift_nm: f64,
    pub actuation_nm: f64,
    pub residual_nm: f64,
    pub residual_deg: f64,
}

/// Closed- or open-loop run result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationTrace {
    pub rows: Vec<TraceRow>,
    pub rms_nm: f64,
    pub rms_deg: f64,
    pub max_abs_nm: f64,
    pub saturation_count: usize,
    /// Steps excluded from the RMS while the loop settles.
    pub settle_steps: usize,
}

/// Simulate `steps` control periods. With `feedback` off the piezo
/// stays put and the trace records the raw drift.
pub fn run_closed_loop(
    cfg: &StabilizationConfig,
    steps: usize,
    feedback: bool,
    seed: u64,
) -> Result<StabilizationTrace> {
    cfg.validate()?;
    if steps < 100 {
        return Err(Error::invalid_input("need at least 100 steps"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let walk = if cfg.drift.random_walk_sigma_nm > 0.0 {
        Some(Normal::new(0.0, cfg.drift.random_walk_sigma_nm).expect("validated sigma"))
    } else {
        None
    };
    let setpoint_nm = cfg.setpoint_rad / (2.0 * std::f64::consts::PI) * IR_PERIOD_NM;
    let setpoint_red = setpoint_nm / REFERENCE_PERIOD_NM * 2.0 * std::f64::consts::PI;

    let mut piezo = cfg.piezo.clone();
    let mut pid = PidController::default();
    let mut walk_nm = 0.0f64;
    let mut rows = Vec::with_capacity(steps);
    let mut saturation_count = 0;

    for step in 0..steps {
        if let Some(w) = &walk {
            walk_nm += w.sample(&mut rng);
        }
        let sine = if cfg.drift.slow_sine_period_steps > 0.0 {
            cfg.drift.slow_sine_amplitude_nm
                * (2.0 * std::f64::consts::PI * step as f64 / cfg.drift.slow_sine_period_steps)
                    .sin()
        } else {
            0.0
        };
        let drift_nm = walk_nm + sine;
        let displacement_nm = drift_nm + piezo.position_nm;

        let mut actuation_nm = 0.0;
        if feedback {
            let red_phase =
                displacement_nm / REFERENCE_PERIOD_NM * 2.0 * std::f64::consts::PI;
            let frame = synth_frame(&cfg.fringe, red_phase, &mut rng);
            let estimate = estimate_phase(&frame, &cfg.fringe)?;
            let mut error_red = setpoint_red - estimate;
            // wrap to (−π, π]: the lock tracks the nearest fringe
            error_red = error_red
                - (error_red / (2.0 * std::f64::consts::PI)).round() * 2.0 * std::f64::consts::PI;
            let error_nm = error_red / (2.0 * std::f64::consts::PI) * REFERENCE_PERIOD_NM;
            actuation_nm = pid.step(error_nm, &cfg.gains);
            if piezo.actuate(actuation_nm) {
                saturation_count += 1;
            }
        }

        let residual_nm = drift_nm + piezo.position_nm - setpoint_nm;
        rows.push(TraceRow {
            step,
            drift_nm,
            actuation_nm,
            residual_nm,
            residual_deg: nm_to_ir_degrees(residual_nm),
        });
    }

    let settle_steps = if feedback { (steps / 20).clamp(10, 200) } else { 0 };
    let tail = &rows[settle_steps..];
    let ms =
        tail.iter().map(|r| r.residual_nm * r.residual_nm).sum::<f64>() / tail.len() as f64;
    let rms_nm = ms.sqrt();
    let max_abs_nm = rows
        .iter()
        .map(|r| r.residual_nm.abs())
        .fold(0.0f64, f64::max);
    Ok(StabilizationTrace {
        rows,
        rms_nm,
        rms_deg: nm_to_ir_degrees(rms_nm),
        max_abs_nm,
        saturation_count,
        settle_steps,
    })
}
