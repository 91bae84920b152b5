use serde::{Deserialize, Serialize};

use crate::domain::Family;
use crate::engine::Sidedness;
use crate::error::{Error, Result};
use crate::thresholds::ThresholdPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Type1Coin,
    Type1Gaussian,
    PowerCurve,
    StoppingDistribution,
    MomentCheck,
}

/// Ground-truth grid. For coin experiments each δ means `ρ = 1/2 + δ`; for
/// Gaussian experiments `μ2 = (δ, 0, …, 0)` with `Σ = σ²I_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecGrid {
    pub deltas: Vec<f64>,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Coin heads probability for the null experiments; must be 1/2 there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

fn default_d() -> usize {
    10
}

fn default_sigma() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Coin or mean; defaults from the experiment kind (mean for the
    /// Gaussian experiments, coin for `type1_coin`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    pub spec: SpecGrid,
    pub policy: ThresholdPolicy,
    #[serde(rename = "N_max")]
    pub n_max: u64,
    pub trials: u64,
    #[serde(default)]
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidedness: Option<Sidedness>,
    /// Checkpoints for `power_curve`; a geometric grid up to `N_max` when absent.
    #[serde(rename = "N_grid", default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u64>>,
    /// Declared norm bound `B` for Gaussian data (observations scaled by `1/(2B)`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescale_bound: Option<f64>,
    /// Batch comparator for `power_curve`; Gaussian-CLT with the known null
    /// variance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_policy: Option<ThresholdPolicy>,
}

impl ExperimentConfig {
    pub fn family(&self) -> Family {
        self.family.unwrap_or(match self.experiment {
            ExperimentKind::Type1Coin => Family::Coin,
            _ => Family::Mean,
        })
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness.unwrap_or_else(|| Sidedness::default_for(self.family()))
    }

    pub fn alphas(&self) -> Vec<f64> {
        if self.alpha_grid.is_empty() {
            vec![self.policy.alpha]
        } else {
            self.alpha_grid.clone()
        }
    }

    /// Observation scale factor `1/(2B)`, or 1 without a declared bound.
    pub fn scale(&self) -> f64 {
        self.rescale_bound.map_or(1.0, |b| 1.0 / (2.0 * b))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_max == 0 {
            return bad("N_max must be at least 1".into());
        }
        if self.spec.deltas.is_empty() {
            return bad("spec.deltas must be nonempty".into());
        }
        if !self.policy.mode.is_sequential() {
            return bad(format!("policy must be sequential, got {}", self.policy.mode.name()));
        }
        self.policy.validate().map_err(|e| Error::Config(e.to_string()))?;
        for &a in &self.alphas() {
            if !(a > 0.0 && a < 1.0) {
                return bad(format!("alpha {a} outside (0, 1)"));
            }
        }
        if let Some(b) = self.rescale_bound {
            if !(b > 0.0) {
                return bad(format!("rescale_bound must be positive, got {b}"));
            }
        }
        match self.family() {
            Family::Coin => {
                for &d in &self.spec.deltas {
                    if !(0.0..=0.5).contains(&d) {
                        return bad(format!("coin delta {d} outside [0, 1/2]"));
                    }
                }
            }
            Family::Mean => {
                if self.spec.d == 0 || !(self.spec.sigma > 0.0) {
                    return bad("Gaussian spec needs d >= 1 and sigma > 0".into());
                }
            }
            f => return bad(format!("experiments support coin and mean families, got {f}")),
        }
        let null = self.spec.deltas.iter().all(|&d| d == 0.0);
        match self.experiment {
            ExperimentKind::Type1Coin => {
                if self.family() != Family::Coin {
                    return bad("type1_coin runs the coin family".into());
                }
                if !null || self.spec.rho.is_some_and(|r| r != 0.5) {
                    return bad("type1_coin needs a fair coin (rho = 1/2, delta = 0)".into());
                }
            }
            ExperimentKind::Type1Gaussian => {
                if self.family() != Family::Mean {
                    return bad("type1_gaussian runs the mean family".into());
                }
                if !null {
                    return bad("type1_gaussian needs delta = 0".into());
                }
            }
            ExperimentKind::MomentCheck => {
                if self.family() != Family::Mean {
                    return bad("moment_check runs the mean family".into());
                }
            }
            ExperimentKind::PowerCurve => {
                if let Some(grid) = &self.n_grid {
                    if grid.is_empty() || grid.iter().any(|&n| n == 0 || n > self.n_max) {
                        return bad("N_grid entries must lie in [1, N_max]".into());
                    }
                }
                if let Some(bp) = &self.batch_policy {
                    if bp.mode.is_sequential() {
                        return bad("batch_policy must be a batch mode".into());
                    }
                }
            }
            ExperimentKind::StoppingDistribution => {}
        }
        Ok(())
    }

    /// Replaces the desk-scale trial count and horizon with the published
    /// protocol sizes.
    pub fn paper_scale(mut self) -> Self {
        match self.experiment {
            ExperimentKind::Type1Coin | ExperimentKind::Type1Gaussian => {
                self.trials = 10_000;
                self.n_max = 1_000_000;
            }
            ExperimentKind::PowerCurve | ExperimentKind::StoppingDistribution => {
                self.trials = 1_000;
                self.n_max = 50_000;
                self.n_grid = None;
            }
            ExperimentKind::MomentCheck => {
                self.trials = 100_000;
            }
        }
        self
    }
}
