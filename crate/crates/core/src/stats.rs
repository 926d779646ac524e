//! Small statistical tests shared by the analysis pipeline and the
//! verification suites.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Asymptotic Kolmogorov distribution tail Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test of `samples` against
/// Exponential(rate). Returns the asymptotic p-value.
pub fn ks_test_exponential(samples: &[f64], rate: f64) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        let lo = i as f64 / n;
        let hi = (i as f64 + 1.0) / n;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    kolmogorov_q(lambda)
}

/// Pearson χ² test of `counts` against a constant (their mean).
/// Returns the p-value with `len − 1` degrees of freedom.
///
/// Used for the flat-singles and flat-accidentals checks: Poisson counts
/// with a common rate should be χ²-consistent with their mean.
pub fn chi2_flatness_pvalue(counts: &[f64]) -> f64 {
    if counts.len() < 2 {
        return 1.0;
    }
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    if mean <= 0.0 {
        return 1.0;
    }
    let chi2: f64 = counts.iter().map(|&c| (c - mean).powi(2) / mean).sum();
    let dof = (counts.len() - 1) as f64;
    let dist = ChiSquared::new(dof).expect("dof ≥ 1");
    1.0 - dist.cdf(chi2)
}

/// Sample mean and (population) standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
