//! Closed-form comparators: batch power, oracle sample sizes and stopping
//! time envelopes.
//!
//! For the linear-time mean statistic with `V_N0 = 4N tr(Σ²)` and
//! `V_N1 = N(4 tr(Σ²) + 4 δᵀΣδ)` the CLT gives the batch power
//!
//! ```text
//! Φ( √N ‖δ‖² / sqrt(8 tr(Σ²) + 8 δᵀΣδ) − z_α sqrt(tr(Σ²) / (tr(Σ²) + δᵀΣδ)) )
//! ```
//!
//! and the smallest `N` reaching power `1 − β` is at most
//! `8 (z_β + z_α)² (tr(Σ²) + δᵀΣδ) / ‖δ‖⁴`.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::domain::ProblemSpec;
use crate::error::{Error, Result};
use crate::thresholds::{batch_hoeffding_threshold, normal_cdf, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    #[serde(rename = "N")]
    pub n: u64,
    pub alpha: f64,
    pub beta: f64,
    pub predicted_power: f64,
    #[serde(rename = "V_N0")]
    pub v_n0: f64,
    #[serde(rename = "V_N1")]
    pub v_n1: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Asymptotic power of the known-variance batch mean test at size `n`.
pub fn batch_power(n: u64, spec: &ProblemSpec, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("batch size must be at least 1".into()));
    }
    check_alpha(alpha)?;
    let tr = spec.trace_sigma_sq();
    let dsd = spec.delta_sigma_delta();
    let dn2 = spec.delta_norm_sq();
    if tr == 0.0 && dn2 == 0.0 {
        return Err(Error::DegenerateSigma);
    }
    let denom = (8.0 * tr + 8.0 * dsd).sqrt();
    if denom == 0.0 {
        // Noise-free alternative: T_N is deterministic and positive.
        return Ok(1.0);
    }
    let z_alpha = normal_quantile(alpha)?;
    let arg = (n as f64).sqrt() * dn2 / denom - z_alpha * (tr / (tr + dsd)).sqrt();
    Ok(normal_cdf(arg))
}

pub fn power_report(n: u64, spec: &ProblemSpec, alpha: f64, beta: f64) -> Result<PowerReport> {
    let predicted_power = batch_power(n, spec, alpha)?;
    let nf = n as f64;
    Ok(PowerReport {
        n,
        alpha,
        beta,
        predicted_power,
        v_n0: 4.0 * nf * spec.trace_sigma_sq(),
        v_n1: nf * spec.increment_variance(),
    })
}

/// Oracle batch sample size `n*_β(δ)` for the mean test.
pub fn oracle_sample_size(spec: &ProblemSpec, alpha: f64, beta: f64) -> Result<u64> {
    check_alpha(alpha)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    let dn2 = spec.delta_norm_sq();
    if dn2 == 0.0 {
        return Err(Error::NullDelta);
    }
    let z = normal_quantile(beta)? + normal_quantile(alpha)?;
    let n = 8.0 * z * z * (spec.trace_sigma_sq() + spec.delta_sigma_delta()) / (dn2 * dn2);
    Ok((n.ceil() as u64).max(1))
}

/// `P(Binomial(n, ρ) ≤ m)`, summed in log-anchored form from the tail that
/// holds the smaller mass.
pub fn binomial_cdf(m: i64, n: u64, rho: f64) -> f64 {
    if m < 0 {
        return 0.0;
    }
    if m as u64 >= n {
        return 1.0;
    }
    if rho <= 0.0 {
        return 1.0;
    }
    if rho >= 1.0 {
        return 0.0;
    }
    let m = m as u64;
    let log_pmf = |k: u64| ln_binomial(n, k) + k as f64 * rho.ln() + (n - k) as f64 * (-rho).ln_1p();
    let mean = n as f64 * rho;
    if (m as f64) < mean {
        lower_tail(m, n, rho, log_pmf(m))
    } else {
        1.0 - upper_tail(m + 1, n, rho, log_pmf(m + 1))
    }
}

/// `Σ_{k ≤ m} pmf(k)` walking down from `m`, where terms shrink.
fn lower_tail(m: u64, n: u64, rho: f64, log_pmf_m: f64) -> f64 {
    let odds = (1.0 - rho) / rho;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = m;
    while k > 0 {
        term *= k as f64 / (n - k + 1) as f64 * odds;
        sum += term;
        k -= 1;
        if term < 1e-18 * sum {
            break;
        }
    }
    (log_pmf_m + sum.ln()).exp()
}

/// `Σ_{k ≥ start} pmf(k)` walking up from `start`, where terms shrink.
fn upper_tail(start: u64, n: u64, rho: f64, log_pmf_start: f64) -> f64 {
    let odds = rho / (1.0 - rho);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = start;
    while k < n {
        term *= (n - k) as f64 / (k + 1) as f64 * odds;
        sum += term;
        k += 1;
        if term < 1e-18 * sum {
            break;
        }
    }
    (log_pmf_start + sum.ln()).exp()
}

/// Coin oracle sample size: the smallest `n ≤ n_cap` with
/// `P_{ρ = 1/2 + δ}(S_n ≤ p_n) ≤ β`, where `S_n = 2·Bin(n, ρ) − n` and
/// `p_n = sqrt((n/2) ln(1/α))`. Uses the exact binomial law.
pub fn coin_oracle_sample_size(delta: f64, alpha: f64, beta: f64, n_cap: u64) -> Result<u64> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::Domain(format!("delta must lie in (0, 1/2], got {delta}")));
    }
    check_alpha(alpha)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    let rho = 0.5 + delta;
    for n in 1..=n_cap {
        let p_n = batch_hoeffding_threshold(n, alpha)?;
        // S_n ≤ p_n  ⟺  heads ≤ (n + p_n) / 2
        let m = ((n as f64 + p_n) / 2.0).floor() as i64;
        if binomial_cdf(m, n, rho) <= beta {
            return Ok(n);
        }
    }
    Err(Error::CapExceeded { n_cap })
}

/// `(1 + K1 β^K2 / ln(1/β)) · n*`, an expected-stopping-time envelope for
/// caller-supplied constants.
pub fn stopping_bound(n_star: u64, beta: f64, k1: f64, k2: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(k1 >= 0.0) || !(k2 > 0.0) {
        return Err(Error::Domain(format!("constants must satisfy K1 >= 0, K2 > 0; got {k1}, {k2}")));
    }
    Ok((1.0 + k1 * beta.powf(k2) / (1.0 / beta).ln()) * n_star as f64)
}

/// `exp(−K n δ²)`.
pub fn tail_survival_coin(n: u64, delta: f64, k: f64) -> f64 {
    (-k * n as f64 * delta * delta).exp()
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Domain("a line fit needs at least 2 points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("a line fit needs distinct abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit { slope, intercept, slope_stderr })
}

/// Fits `ln P̂(τ ≥ n) ≈ c − K δ² n` to stopping times and returns the decay
/// rate `K`. Uses the integer points `n` up to the last one where at least
/// `min_count` trials survive.
pub fn fit_coin_tail_rate(taus: &[u64], delta: f64, min_count: usize) -> Result<f64> {
    if taus.is_empty() {
        return Err(Error::Domain("no stopping times to fit".into()));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_unstable();
    let total = sorted.len() as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut idx = 0;
    let last = *sorted.last().unwrap();
    for n in 1..=last {
        while idx < sorted.len() && sorted[idx] < n {
            idx += 1;
        }
        let surviving = sorted.len() - idx;
        if surviving < min_count.max(1) {
            break;
        }
        xs.push(n as f64);
        ys.push((surviving as f64 / total).ln());
    }
    let fit = least_squares(&xs, &ys)?;
    Ok(-fit.slope / (delta * delta))
}

/// CLT-corrected power approximation for the coin's sequential test at cap
/// `N`: batch power at `p_N` minus the normal mass between `p_N` and `q_N`.
/// Returns `(exact batch power, corrected sequential lower approximation)`.
pub fn coin_power_correction(n: u64, delta: f64, alpha: f64, q_n: f64) -> Result<(f64, f64)> {
    if !(delta >= 0.0 && delta < 0.5) {
        return Err(Error::Domain(format!("delta must lie in [0, 1/2), got {delta}")));
    }
    let p_n = batch_hoeffding_threshold(n, alpha)?;
    let nf = n as f64;
    let m = ((nf + p_n) / 2.0).floor() as i64;
    let batch = 1.0 - binomial_cdf(m, n, 0.5 + delta);
    let mean = 2.0 * delta * nf;
    let sd = (nf * (1.0 - 4.0 * delta * delta)).sqrt();
    let band = normal_cdf((q_n - mean) / sd) - normal_cdf((p_n - mean) / sd);
    Ok((batch, batch - band))
}
