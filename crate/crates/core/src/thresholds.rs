//! Rejection boundaries.
//!
//! Sequential boundaries are uniform in time (finite-time LIL); batch
//! boundaries hold at a single fixed `N`. All of them are functions of the
//! walk state only, so the engine can evaluate one after every increment.
//!
//! Practical sequential boundary, with `[ln ln]₊(x) = ln ln max(x, eᵉ)`:
//!
//! ```text
//! q_n = C0 + sqrt(C · V̂_n · ([ln ln]₊ V̂_n + ln(1/α)))
//! ```
//!
//! The LIL coefficient sits inside the square root, so `C = 2` is the
//! asymptotic `√2` envelope.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::domain::WalkState;
use crate::error::{Error, Result};

const E: f64 = std::f64::consts::E;

/// `C_1 = 6(e − 2)`.
pub const C1: f64 = 6.0 * (E - 2.0);

pub const DEFAULT_C: f64 = 2.0;
pub const DEFAULT_C3: f64 = 48.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    SequentialTheoretical,
    SequentialPractical,
    SequentialOracle,
    BatchHoeffding,
    BatchGaussian,
    BatchEmpiricalBernstein,
}

impl ThresholdMode {
    pub fn is_sequential(self) -> bool {
        matches!(
            self,
            ThresholdMode::SequentialTheoretical
                | ThresholdMode::SequentialPractical
                | ThresholdMode::SequentialOracle
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ThresholdMode::SequentialTheoretical => "sequential_theoretical",
            ThresholdMode::SequentialPractical => "sequential_practical",
            ThresholdMode::SequentialOracle => "sequential_oracle",
            ThresholdMode::BatchHoeffding => "batch_hoeffding",
            ThresholdMode::BatchGaussian => "batch_gaussian",
            ThresholdMode::BatchEmpiricalBernstein => "batch_empirical_bernstein",
        }
    }
}

fn default_c() -> f64 {
    DEFAULT_C
}

fn default_c3() -> f64 {
    DEFAULT_C3
}

fn default_multiplier() -> f64 {
    1.0
}

/// A rule mapping a walk state to a rejection boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub mode: ThresholdMode,
    pub alpha: f64,
    /// LIL coefficient inside the square root (practical mode).
    #[serde(rename = "C", default = "default_c")]
    pub c: f64,
    /// Additive constant (practical mode); `ln(1/α)` when absent.
    #[serde(rename = "C0", default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    /// Variance inflation for the theoretical empirical boundary.
    #[serde(rename = "C3", default = "default_c3")]
    pub c3: f64,
    /// Known per-step variance (oracle sequential mode and Gaussian batch mode).
    #[serde(rename = "V0", default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    /// Global factor applied to the boundary.
    #[serde(default = "default_multiplier")]
    pub multiplier: f64,
}

impl ThresholdPolicy {
    pub fn new(mode: ThresholdMode, alpha: f64) -> Self {
        Self {
            mode,
            alpha,
            c: DEFAULT_C,
            c0: None,
            c3: DEFAULT_C3,
            v0: None,
            multiplier: 1.0,
        }
    }

    pub fn practical(alpha: f64) -> Self {
        Self::new(ThresholdMode::SequentialPractical, alpha)
    }

    pub fn theoretical(alpha: f64) -> Self {
        Self::new(ThresholdMode::SequentialTheoretical, alpha)
    }

    pub fn oracle(alpha: f64, v0: f64) -> Self {
        Self { v0: Some(v0), ..Self::new(ThresholdMode::SequentialOracle, alpha) }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = Some(c0);
        self
    }

    pub fn with_c3(mut self, c3: f64) -> Self {
        self.c3 = c3;
        self
    }

    pub fn with_v0(mut self, v0: f64) -> Self {
        self.v0 = Some(v0);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// The practical additive constant actually used.
    pub fn effective_c0(&self) -> f64 {
        self.c0.unwrap_or_else(|| (1.0 / self.alpha).ln())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::Domain(format!("C must be positive, got {}", self.c)));
        }
        if !(self.c3 > 0.0) || !self.c3.is_finite() {
            return Err(Error::Domain(format!("C3 must be positive, got {}", self.c3)));
        }
        if !(self.multiplier > 0.0) || !self.multiplier.is_finite() {
            return Err(Error::Domain(format!("multiplier must be positive, got {}", self.multiplier)));
        }
        if let Some(c0) = self.c0 {
            if !c0.is_finite() {
                return Err(Error::Domain(format!("C0 must be finite, got {c0}")));
            }
        }
        let needs_v0 = matches!(self.mode, ThresholdMode::SequentialOracle | ThresholdMode::BatchGaussian);
        match self.v0 {
            None if needs_v0 => {
                return Err(Error::Domain(format!("{} mode requires V0", self.mode.name())));
            }
            Some(v0) if !(v0 >= 0.0) || !v0.is_finite() => {
                return Err(Error::Domain(format!("V0 must be nonnegative, got {v0}")));
            }
            _ => {}
        }
        Ok(())
    }
}

/// `ln ln max(x, eᵉ)`.
pub fn ln_ln_plus(x: f64) -> f64 {
    x.max(E.powf(E)).ln().ln()
}

/// `C_0(ξ) = 3(e−2)e² + 2(1 + √(1/3)) ln(8/ξ)`.
pub fn c0_of_xi(xi: f64) -> Result<f64> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::Domain(format!("xi must lie in (0, 1), got {xi}")));
    }
    Ok(3.0 * (E - 2.0) * E * E + 2.0 * (1.0 + (1.0f64 / 3.0).sqrt()) * (8.0 / xi).ln())
}

/// Sequential boundary `q_n` for the current walk state.
pub fn sequential_threshold(state: &WalkState, policy: &ThresholdPolicy) -> Result<f64> {
    if !policy.mode.is_sequential() {
        return Err(Error::PolicyModeMismatch { got: policy.mode.name().into(), expected: "sequential" });
    }
    policy.validate()?;
    let alpha = policy.alpha;
    let vhat = state.vhat().max(0.0);
    let q = match policy.mode {
        ThresholdMode::SequentialPractical => {
            let c0 = policy.effective_c0();
            c0 + (policy.c * vhat * (ln_ln_plus(vhat) + (1.0 / alpha).ln())).sqrt()
        }
        ThresholdMode::SequentialTheoretical => {
            let c0 = c0_of_xi(alpha)?;
            let log_term = (4.0 / alpha).ln();
            // The small-variance branch of the inversion floors V̂* at 108 ln(4/ξ).
            let vstar = (policy.c3 * (vhat + c0)).max(108.0 * log_term);
            c0 + (2.0 * vstar * (ln_ln_plus(vstar) + log_term)).sqrt()
        }
        ThresholdMode::SequentialOracle => {
            let c0 = c0_of_xi(alpha)?;
            let v0 = policy.v0.expect("validated");
            let nv = state.n() as f64 * v0;
            c0 + (2.0 * C1 * nv * ln_ln_plus(nv) + C1 * nv * (4.0 / alpha).ln()).sqrt()
        }
        _ => unreachable!(),
    };
    Ok(q * policy.multiplier)
}

/// Fixed-`N` boundary for a batch-mode policy applied to a walk of
/// increments in `[-1, 1]`.
///
/// The Hoeffding boundary for a sum of `N` steps of range 2 is
/// `2 · p_N` with `p_N` from [`batch_hoeffding_threshold`].
pub fn batch_threshold(state: &WalkState, policy: &ThresholdPolicy) -> Result<f64> {
    if policy.mode.is_sequential() {
        return Err(Error::PolicyModeMismatch { got: policy.mode.name().into(), expected: "batch" });
    }
    policy.validate()?;
    let n = state.n();
    let q = match policy.mode {
        ThresholdMode::BatchHoeffding => 2.0 * batch_hoeffding_threshold(n, policy.alpha)?,
        ThresholdMode::BatchGaussian => {
            let v0 = policy.v0.expect("validated");
            batch_gaussian_threshold(n as f64 * v0, policy.alpha)?
        }
        ThresholdMode::BatchEmpiricalBernstein => {
            batch_empirical_bernstein_threshold(state.vhat(), n, policy.alpha)?
        }
        _ => unreachable!(),
    };
    Ok(q * policy.multiplier)
}

/// `p_N = sqrt((N/2) ln(1/α))`, the Hoeffding bound for a sum of `N`
/// unit-range steps.
pub fn batch_hoeffding_threshold(n: u64, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("batch size must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok((n as f64 / 2.0 * (1.0 / alpha).ln()).sqrt())
}

/// `sqrt(V_N0) · z_α`.
pub fn batch_gaussian_threshold(v_n0: f64, alpha: f64) -> Result<f64> {
    if !(v_n0 >= 0.0) || !v_n0.is_finite() {
        return Err(Error::Domain(format!("V_N0 must be nonnegative, got {v_n0}")));
    }
    Ok(v_n0.sqrt() * normal_quantile(alpha)?)
}

/// `sqrt(2 V̂_N ln(2/α)) + 7N ln(2/α) / (3(N − 1))`.
pub fn batch_empirical_bernstein_threshold(vhat_n: f64, n: u64, alpha: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("empirical Bernstein needs N >= 2, got {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(vhat_n >= 0.0) {
        return Err(Error::Domain(format!("V̂_N must be nonnegative, got {vhat_n}")));
    }
    let log_term = (2.0 / alpha).ln();
    let nf = n as f64;
    Ok((2.0 * vhat_n * log_term).sqrt() + 7.0 * nf * log_term / (3.0 * (nf - 1.0)))
}

/// Upper quantile: `z` with `Φ(z) = 1 − p`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(std::f64::consts::SQRT_2 * erfc_inv(2.0 * p))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}
