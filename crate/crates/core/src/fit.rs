//! Levenberg-Marquardt regression of the two-photon fringe
//! `F(φ) = A·cos(φ + ϑ) + y₀`, visibility extraction, the
//! SNR-visibility relation, and Bell-violation significance.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One phase point of the central-peak fringe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub phase_rad: f64,
    pub counts: f64,
    pub sigma: f64,
}

/// The measured fringe: central-peak counts versus total phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeDataset {
    pub points: Vec<FringePoint>,
    pub integration_time_s: f64,
}

impl FringeDataset {
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 4 {
            return Err(Error::Fit(format!(
                "need at least 4 fringe points, got {}",
                self.points.len()
            )));
        }
        if self.points.iter().any(|p| p.sigma <= 0.0) {
            return Err(Error::Fit("every fringe point needs σ > 0".into()));
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.min(p.phase_rad);
            hi = hi.max(p.phase_rad);
        }
        if hi - lo < std::f64::consts::PI * (1.0 - 1e-9) {
            return Err(Error::Fit(format!(
                "phase span {:.3} rad is below half a period; fit is not identifiable",
                hi - lo
            )));
        }
        Ok(())
    }
}

/// Fit options. The defaults are a σ-weighted fit with no phase-error
/// augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Weight residuals by 1/σ (the default). When false the covariance
    /// is rescaled by χ²/(n−3) as usual for unweighted least squares.
    pub weighted: bool,
    /// Phase uncertainty folded into the counts via the effective
    /// variance σ_eff² = σ² + (A·sin(φ+ϑ)·σ_φ)², iterated once.
    pub phase_sigma_rad: Option<f64>,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            weighted: true,
            phase_sigma_rad: None,
            max_iterations: 200,
        }
    }
}

/// Converged fringe fit and the derived Table-1 statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    /// Fringe amplitude A ≥ 0 (canonical sign).
    pub amplitude: f64,
    /// Phase offset ϑ, canonical in [0, 2π).
    pub theta_rad: f64,
    pub y0: f64,
    /// Covariance of (A, ϑ, y₀) from the final normal matrix.
    pub covariance: [[f64; 3]; 3],
    pub chi2: f64,
    pub v_meas: f64,
    pub sigma_v: f64,
    /// V = V_Meas/w; set once the interferometer visibility is applied.
    pub v_corrected: Option<f64>,
    pub v_corrected_sigma: Option<f64>,
    pub bell_sigmas: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FringeFit {
    /// Fill `v_corrected` from the first-order interferometer
    /// visibility `w`.
    pub fn apply_interferometer_visibility(&mut self, w: f64) -> Result<()> {
        let corrected = corrected_visibility(self.v_meas, self.sigma_v, w)?;
        self.v_corrected = Some(corrected.value);
        self.v_corrected_sigma = Some(corrected.sigma);
        Ok(())
    }
}

fn model(phase: f64, p: &[f64; 3]) -> f64 {
    p[0] * (phase + p[1]).cos() + p[2]
}

fn chi2_of(d: &FringeDataset, sigmas: &[f64], p: &[f64; 3]) -> f64 {
    d.points
        .iter()
        .zip(sigmas)
        .map(|(pt, s)| {
            let r = (pt.counts - model(pt.phase_rad, p)) / s;
            r * r
        })
        .sum()
}

/// Solve the 3×3 system M·x = b by Gaussian elimination with partial
/// pivoting. Returns None when M is numerically singular.
fn solve3(m: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut a = [[0.0f64; 4]; 3];
    let mut scale: f64 = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            a[r][c] = m[r][c];
            scale = scale.max(m[r][c].abs());
        }
        a[r][3] = b[r];
    }
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let pivot_row = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot_row][col].abs() < 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = [0.0f64; 3];
    for r in (0..3).rev() {
        let mut acc = a[r][3];
        for c in r + 1..3 {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Some(x)
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let cols = [
        solve3(m, &[1.0, 0.0, 0.0])?,
        solve3(m, &[0.0, 1.0, 0.0])?,
        solve3(m, &[0.0, 0.0, 1.0])?,
    ];
    let mut inv = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            inv[r][c] = cols[c][r];
        }
    }
    Some(inv)
}

/// Weighted normal matrix JᵀJ and gradient Jᵀr at parameters `p`.
fn normal_system(
    d: &FringeDataset,
    sigmas: &[f64],
    p: &[f64; 3],
) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut jtj = [[0.0f64; 3]; 3];
    let mut jtr = [0.0f64; 3];
    for (pt, s) in d.points.iter().zip(sigmas) {
        let arg = pt.phase_rad + p[1];
        let j = [arg.cos() / s, -p[0] * arg.sin() / s, 1.0 / s];
        let r = (pt.counts - model(pt.phase_rad, p)) / s;
        for a in 0..3 {
            for b in 0..3 {
                jtj[a][b] += j[a] * j[b];
            }
            jtr[a] += j[a] * r;
        }
    }
    (jtj, jtr)
}

/// Default starting point: y₀ from the mean, A from the count range,
/// ϑ from the phase of the first discrete Fourier coefficient.
pub fn initial_guess(d: &FringeDataset) -> [f64; 3] {
    let n = d.points.len() as f64;
    let mean = d.points.iter().map(|p| p.counts).sum::<f64>() / n;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut zr, mut zi) = (0.0f64, 0.0f64);
    for p in &d.points {
        lo = lo.min(p.counts);
        hi = hi.max(p.counts);
        zr += p.counts * p.phase_rad.cos();
        zi -= p.counts * p.phase_rad.sin();
    }
    let theta = zi.atan2(zr).rem_euclid(2.0 * std::f64::consts::PI);
    [(hi - lo) / 2.0, theta, mean]
}

fn lm_minimize(
    d: &FringeDataset,
    sigmas: &[f64],
    start: [f64; 3],
    max_iterations: usize,
) -> Result<([f64; 3], f64, usize, bool)> {
    let mut p = start;
    let mut chi2 = chi2_of(d, sigmas, &p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=max_iterations {
        iterations = iter;
        let (jtj, jtr) = normal_system(d, sigmas, &p);
        let mut damped = jtj;
        for k in 0..3 {
            damped[k][k] += lambda * jtj[k][k];
        }
        let Some(step) = solve3(&damped, &jtr) else {
            return Err(Error::Fit(
                "rank-deficient design matrix (degenerate phases or zero amplitude)".into(),
            ));
        };
        let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
        let trial_chi2 = chi2_of(d, sigmas, &trial);
        if trial_chi2 <= chi2 {
            let rel_drop = (chi2 - trial_chi2) / chi2.max(f64::MIN_POSITIVE);
            let rel_step = (step.iter().map(|s| s * s).sum::<f64>()
                / p.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE))
            .sqrt();
            p = trial;
            chi2 = trial_chi2;
            lambda = (lambda / 10.0).max(1e-15);
            if rel_drop < 1e-10 || rel_step < 1e-12 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e14 {
                return Err(Error::Fit(format!(
                    "damping stalled at iteration {iter} (λ = {lambda:.1e}, χ² = {chi2:.6e})"
                )));
            }
        }
    }
    if !converged {
        return Err(Error::Fit(format!(
            "no convergence in {max_iterations} iterations (χ² = {chi2:.6e}, A = {:.3e}, ϑ = {:.3}, y₀ = {:.3e})",
            p[0], p[1], p[2]
        )));
    }
    Ok((p, chi2, iterations, converged))
}

/// Map (A, ϑ) to the canonical representative with A ≥ 0 and ϑ ∈ [0, 2π).
fn canonicalize(p: &mut [f64; 3]) {
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[1] += std::f64::consts::PI;
    }
    p[1] = p[1].rem_euclid(2.0 * std::f64::consts::PI);
}

/// σ-weighted Levenberg-Marquardt fit with the default options.
pub fn lm_fit(d: &FringeDataset, initial: Option<[f64; 3]>) -> Result<FringeFit> {
    lm_fit_with(d, initial, &FitOptions::default())
}

pub fn lm_fit_with(
    d: &FringeDataset,
    initial: Option<[f64; 3]>,
    options: &FitOptions,
) -> Result<FringeFit> {
    d.validate()?;
    let base_sigmas: Vec<f64> = if options.weighted {
        d.points.iter().map(|p| p.sigma).collect()
    } else {
        vec![1.0; d.points.len()]
    };
    let start = initial.unwrap_or_else(|| initial_guess(d));
    let (mut p, mut chi2, mut iterations, converged) =
        lm_minimize(d, &base_sigmas, start, options.max_iterations)?;

    let mut sigmas = base_sigmas.clone();
    if let Some(sigma_phi) = options.phase_sigma_rad {
        // effective-variance augmentation, one pass
        sigmas = d
            .points
            .iter()
            .zip(&base_sigmas)
            .map(|(pt, s)| {
                let slope = p[0] * (pt.phase_rad + p[1]).sin() * sigma_phi;
                (s * s + slope * slope).sqrt()
            })
            .collect();
        let (p2, chi2_2, it2, _) = lm_minimize(d, &sigmas, p, options.max_iterations)?;
        p = p2;
        chi2 = chi2_2;
        iterations += it2;
    }
    canonicalize(&mut p);

    let (jtj, _) = normal_system(d, &sigmas, &p);
    let mut covariance = invert3(&jtj)
        .ok_or_else(|| Error::Fit("singular normal matrix at the optimum".into()))?;
    if !options.weighted {
        let dof = (d.points.len() - 3).max(1) as f64;
        let s2 = chi2 / dof;
        for row in covariance.iter_mut() {
            for v in row.iter_mut() {
                *v *= s2;
            }
        }
    }

    let mut fit = FringeFit {
        amplitude: p[0],
        theta_rad: p[1],
        y0: p[2],
        covariance,
        chi2,
        v_meas: 0.0,
        sigma_v: 0.0,
        v_corrected: None,
        v_corrected_sigma: None,
        bell_sigmas: 0.0,
        converged,
        iterations,
    };
    let (v, sigma_v) = visibility(&fit)?;
    fit.v_meas = v;
    fit.sigma_v = sigma_v;
    fit.bell_sigmas = bell_sigmas(v, sigma_v)?;
    Ok(fit)
}

/// Fringe visibility `V_Meas = |A|/y₀` and its propagated error
/// `σ_V = V·√((σ_A/A)² + (σ_y0/y₀)²)`.
pub fn visibility(f: &FringeFit) -> Result<(f64, f64)> {
    if !f.converged {
        return Err(Error::Fit("visibility requires a converged fit".into()));
    }
    if f.y0 <= 0.0 {
        return Err(Error::Fit(format!(
            "visibility undefined for y₀ = {} ≤ 0",
            f.y0
        )));
    }
    let a = f.amplitude.abs();
    let v = a / f.y0;
    if a == 0.0 {
        return Ok((0.0, f.covariance[0][0].sqrt() / f.y0));
    }
    let rel_a = f.covariance[0][0].sqrt() / a;
    let rel_y = f.covariance[2][2].sqrt() / f.y0;
    Ok((v, v * (rel_a * rel_a + rel_y * rel_y).sqrt()))
}

/// Visibility predicted from the signal-to-noise ratio:
/// `V_Meas = w·(SNR−1)/(SNR+1)`, clipped at zero below SNR = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrVisibility {
    pub value: f64,
    pub clipped: bool,
}

pub fn visibility_from_snr(snr: f64, w: f64) -> Result<SnrVisibility> {
    if snr < 0.0 {
        return Err(Error::invalid_input("SNR must be nonnegative"));
    }
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::invalid_input("w must be in [0, 1]"));
    }
    let raw = w * (snr - 1.0) / (snr + 1.0);
    if raw < 0.0 {
        Ok(SnrVisibility {
            value: 0.0,
            clipped: true,
        })
    } else {
        Ok(SnrVisibility {
            value: raw,
            clipped: false,
        })
    }
}

/// Visibility corrected for the interferometer contrast, `V = V_Meas/w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedVisibility {
    pub value: f64,
    pub sigma: f64,
    /// Set when the corrected value exceeds 1 by more than 3σ.
    pub unphysical: bool,
}

pub fn corrected_visibility(v_meas: f64, sigma_v: f64, w: f64) -> Result<CorrectedVisibility> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::invalid_input("w must be in (0, 1]"));
    }
    let value = v_meas / w;
    let sigma = sigma_v / w;
    Ok(CorrectedVisibility {
        value,
        sigma,
        unphysical: value > 1.0 + 3.0 * sigma,
    })
}

/// Number of standard deviations by which `v_meas` exceeds the Bell
/// bound 1/√2. Negative values report a non-violation.
pub fn bell_sigmas(v_meas: f64, sigma_v: f64) -> Result<f64> {
    if sigma_v <= 0.0 {
        return Err(Error::invalid_input("σ_V must be positive"));
    }
    Ok((v_meas - std::f64::consts::FRAC_1_SQRT_2) / sigma_v)
}
