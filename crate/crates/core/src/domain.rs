//! Shared domain types: observations, increments, the running walk state,
//! verdicts and ground-truth problem specifications.
//!
//! The walk state is the whole memory of a sequential test: the step count
//! `n`, the running sum `T_n = Σ h_i` and the running sum of squares
//! `V̂_n = Σ h_i²`. Both sums are accumulated with Neumaier compensation so
//! that boundary crossings after millions of steps reflect the data and not
//! accumulated rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A data point scaled so that its Euclidean norm is at most 1/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation(Vec<f64>);

impl Observation {
    /// Wraps already-scaled values without checking the norm.
    pub fn new_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        euclidean_norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Observation {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maps a raw vector with `‖raw‖ ≤ bound` to `raw / (2·bound)`, so the
/// result has norm at most 1/2 and inner-product increments stay in [-1, 1].
pub fn rescale(raw: &[f64], bound: f64) -> Result<Observation> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(Error::Domain(format!("norm bound must be positive, got {bound}")));
    }
    let norm = euclidean_norm(raw);
    if norm > bound {
        return Err(Error::NormBoundViolated { norm, bound });
    }
    let factor = 1.0 / (2.0 * bound);
    Ok(Observation(raw.iter().map(|x| x * factor).collect()))
}

/// Which statistic produced an increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Coin,
    Mean,
    Mmd,
    Dcov,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::Coin => "coin",
            Family::Mean => "mean",
            Family::Mmd => "mmd",
            Family::Dcov => "dcov",
        };
        f.write_str(s)
    }
}

/// One scalar step of the test random walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Increment {
    pub value: f64,
    pub family: Family,
}

impl Increment {
    pub fn new(value: f64, family: Family) -> Self {
        Self { value, family }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Running `(n, T_n, V̂_n)` of the walk. Holds no history.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WalkState {
    n: u64,
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl WalkState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a state from already-known totals (used for threshold evaluation
    /// at arbitrary points, e.g. in tests and analysis).
    pub fn from_parts(n: u64, t: f64, vhat: f64) -> Self {
        let mut sum = CompensatedSum::default();
        sum.add(t);
        let mut sum_sq = CompensatedSum::default();
        sum_sq.add(vhat);
        Self { n, sum, sum_sq }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Running sum `T_n`.
    pub fn t(&self) -> f64 {
        self.sum.value()
    }

    /// Running sum of squares `V̂_n`.
    pub fn vhat(&self) -> f64 {
        self.sum_sq.value()
    }

    pub fn push(&mut self, h: f64) {
        self.n += 1;
        self.sum.add(h);
        self.sum_sq.add(h * h);
    }
}

/// Pure form of [`WalkState::push`].
pub fn update_walk(state: WalkState, h: Increment) -> WalkState {
    let mut next = state;
    next.push(h.value);
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    FailToReject,
}

/// Outcome of a batch or sequential run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub decision: Decision,
    pub tau: u64,
    #[serde(rename = "boundary")]
    pub boundary_at_stop: f64,
    #[serde(rename = "statistic")]
    pub statistic_at_stop: f64,
    /// The input ended before the step cap was reached.
    pub exhausted: bool,
}

impl TestVerdict {
    pub fn rejected(&self) -> bool {
        self.decision == Decision::Reject
    }
}

/// Ground truth for simulations: means, shared covariance and coin bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    /// Row-major `d × d` covariance.
    pub sigma: Vec<Vec<f64>>,
    pub rho: f64,
}

impl ProblemSpec {
    pub fn new(mu1: Vec<f64>, mu2: Vec<f64>, sigma: Vec<Vec<f64>>, rho: f64) -> Result<Self> {
        let d = mu1.len();
        if mu2.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: mu2.len() });
        }
        if sigma.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: sigma.len() });
        }
        for row in &sigma {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Domain(format!("coin probability must lie in [0, 1], got {rho}")));
        }
        let spec = Self { mu1, mu2, sigma, rho };
        spec.check_psd()?;
        Ok(spec)
    }

    /// `X ~ N(0, σ²I_d)`, `Y ~ N((δ, 0, …, 0), σ²I_d)`.
    pub fn isotropic(d: usize, sigma: f64, delta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        let mut mu2 = vec![0.0; d];
        mu2[0] = delta;
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { sigma * sigma } else { 0.0 }).collect())
            .collect();
        Self::new(vec![0.0; d], mu2, cov, 0.5)
    }

    /// Coin problem with heads probability `1/2 + delta`.
    pub fn coin(delta: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![0.0], vec![vec![0.0]], 0.5 + delta)
    }

    pub fn dim(&self) -> usize {
        self.mu1.len()
    }

    /// `δ = μ1 − μ2`.
    pub fn delta(&self) -> Vec<f64> {
        self.mu1.iter().zip(&self.mu2).map(|(a, b)| a - b).collect()
    }

    pub fn delta_norm_sq(&self) -> f64 {
        self.delta().iter().map(|x| x * x).sum()
    }

    /// `tr(Σ²)` from the explicit product `Σ·Σ`.
    pub fn trace_sigma_sq(&self) -> f64 {
        let d = self.dim();
        let mut trace = 0.0;
        for i in 0..d {
            for k in 0..d {
                trace += self.sigma[i][k] * self.sigma[k][i];
            }
        }
        trace
    }

    /// `δᵀΣδ`.
    pub fn delta_sigma_delta(&self) -> f64 {
        let delta = self.delta();
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += delta[i] * self.sigma[i][j] * delta[j];
            }
        }
        acc
    }

    /// Signal-to-noise ratio `‖δ‖/σ`, defined for isotropic covariances.
    pub fn snr(&self) -> Option<f64> {
        let s2 = self.sigma[0][0];
        let d = self.dim();
        let isotropic = (0..d).all(|i| {
            (0..d).all(|j| if i == j { self.sigma[i][j] == s2 } else { self.sigma[i][j] == 0.0 })
        });
        (isotropic && s2 > 0.0).then(|| self.delta_norm_sq().sqrt() / s2.sqrt())
    }

    /// Per-step increment variance `4 tr(Σ²) + 4 δᵀΣδ`.
    pub fn increment_variance(&self) -> f64 {
        4.0 * self.trace_sigma_sq() + 4.0 * self.delta_sigma_delta()
    }

    fn check_psd(&self) -> Result<()> {
        let d = self.dim();
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (self.sigma[i][j], self.sigma[j][i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Domain(format!("covariance not symmetric at ({i}, {j})")));
                }
            }
        }
        // Cholesky on Σ + εI; a negative pivot means an eigenvalue below -ε.
        let scale = (0..d).map(|i| self.sigma[i][i].abs()).fold(0.0, f64::max).max(1.0);
        let eps = 1e-10 * scale;
        let mut l = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.sigma[i][j] + if i == j { eps } else { 0.0 };
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::Domain("covariance is not positive semidefinite".into()));
                    }
                    l[i][i] = s.sqrt();
                } else {
                    l[i][j] = s / l[j][j];
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale(&[0.0, 0.0, 0.0], 1.0).unwrap().values(), &[0.0, 0.0, 0.0]);
        assert_eq!(rescale(&[2.0, 0.0], 2.0).unwrap().values(), &[0.5, 0.0]);
        let o = rescale(&[3.0, 4.0], 5.0).unwrap();
        assert!((o.values()[0] - 0.3).abs() < 1e-15);
        assert!((o.values()[1] - 0.4).abs() < 1e-15);
        assert!((o.norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rescale_rejects_misdeclared_bound() {
        assert!(matches!(rescale(&[3.0, 4.0], 4.9), Err(Error::NormBoundViolated { .. })));
        assert!(matches!(rescale(&[1.0], 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rescale_twice_quarters() {
        let once = rescale(&[0.8, 0.6], 1.0).unwrap();
        let twice = rescale(once.values(), 1.0).unwrap();
        assert!((twice.values()[0] - 0.2).abs() < 1e-15);
        assert!((twice.values()[1] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn update_walk_examples() {
        let s = update_walk(WalkState::new(), Increment::new(0.25, Family::Mean));
        assert_eq!((s.n(), s.t(), s.vhat()), (1, 0.25, 0.0625));

        let s = update_walk(WalkState::from_parts(5, 1.0, 2.0), Increment::new(0.0, Family::Mean));
        assert_eq!((s.n(), s.t(), s.vhat()), (6, 1.0, 2.0));

        let s = update_walk(WalkState::from_parts(1, -1.0, 1.0), Increment::new(-1.0, Family::Coin));
        assert_eq!((s.n(), s.t(), s.vhat()), (2, -2.0, 2.0));
    }

    #[test]
    fn problem_spec_moments() {
        let spec = ProblemSpec::isotropic(10, 1.0, 1.0).unwrap();
        assert_eq!(spec.trace_sigma_sq(), 10.0);
        assert_eq!(spec.delta_sigma_delta(), 1.0);
        assert_eq!(spec.delta_norm_sq(), 1.0);
        assert_eq!(spec.increment_variance(), 44.0);
        assert_eq!(spec.snr(), Some(1.0));
    }

    #[test]
    fn problem_spec_rejects_bad_covariance() {
        let asym = vec![vec![1.0, 0.5], vec![0.0, 1.0]];
        assert!(ProblemSpec::new(vec![0.0; 2], vec![0.0; 2], asym, 0.5).is_err());
        let indefinite = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(ProblemSpec::new(vec![0.0; 2], vec![0.0; 2], indefinite, 0.5).is_err());
        let singular = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(ProblemSpec::new(vec![0.0; 2], vec![0.0; 2], singular, 0.5).is_ok());
        assert!(ProblemSpec::coin(0.6).is_err());
    }
}
