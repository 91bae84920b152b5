//! Scalar random-walk increments for the four test families.
//!
//! Every increment has mean zero under its null hypothesis, so the running
//! sum is a mean-zero random walk under H0 and drifts upward under H1:
//!
//! - coin: `±1` per flip;
//! - mean: `(x1 − y1)ᵀ(x2 − y2)`, with expectation `‖μ1 − μ2‖²`;
//! - mmd: the linear-time MMD term
//!   `k(x1, x2) + k(y1, y2) − k(x1, y2) − k(x2, y1)`;
//! - dcov: a four-pair block statistic whose expectation is the distance
//!   covariance of the pair distribution.

use serde::{Deserialize, Serialize};

use crate::domain::{Family, Increment, Observation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flip {
    Heads,
    Tails,
}

pub fn coin_increment(flip: Flip) -> Increment {
    let value = match flip {
        Flip::Heads => 1.0,
        Flip::Tails => -1.0,
    };
    Increment::new(value, Family::Coin)
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// `(x1 − y1)ᵀ(x2 − y2)`.
pub fn mean_increment(x1: &[f64], y1: &[f64], x2: &[f64], y2: &[f64]) -> Result<Increment> {
    let d = x1.len();
    check_dim(d, y1.len())?;
    check_dim(d, x2.len())?;
    check_dim(d, y2.len())?;
    let value = x1
        .iter()
        .zip(y1)
        .zip(x2.iter().zip(y2))
        .map(|((a, b), (c, e))| (a - b) * (c - e))
        .sum();
    Ok(Increment::new(value, Family::Mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    /// `exp(−‖a − b‖²/γ²)`.
    Gaussian { gamma: f64 },
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!("gaussian bandwidth must be positive, got {gamma}")));
        }
        Ok(KernelSpec::Gaussian { gamma })
    }

    fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Gaussian { gamma } => (-sq_dist(a, b) / (gamma * gamma)).exp(),
        }
    }
}

pub fn kernel_eval(k: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    if let KernelSpec::Gaussian { gamma } = *k {
        if !(gamma > 0.0) {
            return Err(Error::Domain(format!("gaussian bandwidth must be positive, got {gamma}")));
        }
    }
    Ok(k.eval_unchecked(a, b))
}

/// `k(x1, x2) + k(y1, y2) − k(x1, y2) − k(x2, y1)`.
///
/// With the linear kernel this is algebraically `(x1 − y1)ᵀ(x2 − y2)`, and
/// it is evaluated through [`mean_increment`] so the two agree bit-for-bit.
pub fn mmd_increment(
    k: &KernelSpec,
    x1: &[f64],
    x2: &[f64],
    y1: &[f64],
    y2: &[f64],
) -> Result<Increment> {
    let d = x1.len();
    check_dim(d, x2.len())?;
    check_dim(d, y1.len())?;
    check_dim(d, y2.len())?;
    let value = match *k {
        KernelSpec::Linear => mean_increment(x1, y1, x2, y2)?.value,
        KernelSpec::Gaussian { gamma } => {
            if !(gamma > 0.0) {
                return Err(Error::Domain(format!("gaussian bandwidth must be positive, got {gamma}")));
            }
            k.eval_unchecked(x1, x2) + k.eval_unchecked(y1, y2)
                - k.eval_unchecked(x1, y2)
                - k.eval_unchecked(x2, y1)
        }
    };
    Ok(Increment::new(value, Family::Mmd))
}

/// Block of paired observations. Mean and MMD blocks hold two points per
/// stream; dcov blocks hold four `(X, Y)` pairs, `x[i]` paired with `y[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairBlock {
    pub x: Vec<Observation>,
    pub y: Vec<Observation>,
}

impl PairBlock {
    pub fn new(x: Vec<Observation>, y: Vec<Observation>) -> Self {
        Self { x, y }
    }
}

/// The 3 perfect matchings of {0,1,2,3}, each as two complementary pairs.
const MATCHINGS: [[(usize, usize); 2]; 3] = [[(0, 1), (2, 3)], [(0, 2), (1, 3)], [(0, 3), (1, 2)]];

/// Distance-covariance increment over a block of four pairs:
///
/// ```text
/// h = (1/6)  Σ_{pairs {a,b}, complement {c,d}} ‖X_a − X_b‖‖Y_c − Y_d‖
///   + (1/6)  Σ_{pairs {a,b}}                   ‖X_a − X_b‖‖Y_a − Y_b‖
///   − (1/12) Σ_{distinct ordered (a,b,c)}      ‖X_a − X_b‖‖Y_a − Y_c‖
/// ```
///
/// so that `E h = E‖X−X′‖‖Y−Y′‖ + E‖X−X′‖ E‖Y−Y′‖ − 2 E‖X−X′‖‖Y−Y″‖`.
pub fn dcov_increment(block: &PairBlock) -> Result<Increment> {
    if block.x.len() != 4 {
        return Err(Error::BlockSizeMismatch { expected: 4, got: block.x.len() });
    }
    if block.y.len() != 4 {
        return Err(Error::BlockSizeMismatch { expected: 4, got: block.y.len() });
    }
    let p = block.x[0].dim();
    let q = block.y[0].dim();
    for (x, y) in block.x.iter().zip(&block.y) {
        check_dim(p, x.dim())?;
        check_dim(q, y.dim())?;
    }

    let mut dx = [[0.0; 4]; 4];
    let mut dy = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in (a + 1)..4 {
            dx[a][b] = dist(block.x[a].values(), block.x[b].values());
            dx[b][a] = dx[a][b];
            dy[a][b] = dist(block.y[a].values(), block.y[b].values());
            dy[b][a] = dy[a][b];
        }
    }

    // Each matching contributes both orientations: X on one pair, Y on the other.
    let cross: f64 = MATCHINGS
        .iter()
        .map(|[(a, b), (c, d)]| dx[*a][*b] * dy[*c][*d] + dx[*c][*d] * dy[*a][*b])
        .sum();

    let mut joint = 0.0;
    for a in 0..4 {
        for b in (a + 1)..4 {
            joint += dx[a][b] * dy[a][b];
        }
    }

    let mut triples = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                if a != b && b != c && a != c {
                    triples += dx[a][b] * dy[a][c];
                }
            }
        }
    }

    let value = cross / 6.0 + joint / 6.0 - triples / 12.0;
    Ok(Increment::new(value, Family::Dcov))
}

/// Dcov increment divided by `2D²`, where `D` bounds every pairwise distance
/// within the X and Y streams; the result lies in [-1, 1].
pub fn dcov_increment_bounded(block: &PairBlock, distance_bound: f64) -> Result<Increment> {
    if !(distance_bound > 0.0) || !distance_bound.is_finite() {
        return Err(Error::Domain(format!("distance bound must be positive, got {distance_bound}")));
    }
    let raw = dcov_increment(block)?;
    let scaled = raw.value / (2.0 * distance_bound * distance_bound);
    if scaled.abs() > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "dcov increment {} exceeds the declared distance bound {distance_bound}",
            raw.value
        )));
    }
    Ok(Increment::new(scaled, Family::Dcov))
}
