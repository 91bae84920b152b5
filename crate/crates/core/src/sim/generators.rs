//! Synthetic increment sources.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{Family, Increment, Observation};
use crate::error::{Error, Result};
use crate::increments::{dcov_increment_bounded, mean_increment, mmd_increment, KernelSpec, PairBlock};
use crate::sim::rng::{trial_rng, TrialRng};

/// i.i.d. `±1` flips with `P(+1) = ρ`.
#[derive(Debug, Clone)]
pub struct CoinStream {
    rho: f64,
    rng: TrialRng,
}

impl CoinStream {
    pub fn new(rho: f64, rng: TrialRng) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Domain(format!("rho must lie in [0, 1], got {rho}")));
        }
        Ok(Self { rho, rng })
    }
}

pub fn gen_coin_stream(rho: f64, seed: u64) -> Result<CoinStream> {
    CoinStream::new(rho, trial_rng(seed, 0))
}

impl Iterator for CoinStream {
    type Item = Increment;

    fn next(&mut self) -> Option<Increment> {
        let heads = self.rng.random::<f64>() < self.rho;
        Some(Increment::new(if heads { 1.0 } else { -1.0 }, Family::Coin))
    }
}

/// Two-sample Gaussian blocks: `X ~ N(0, σ²I_d)`, `Y ~ N((δ, 0, …, 0), σ²I_d)`.
///
/// Observations are multiplied by `scale` before the increment is formed
/// (`scale = 1/(2B)` reproduces rescaling by a declared bound `B`; Gaussian
/// data has no hard bound, so no norm check is made).
#[derive(Debug, Clone)]
pub struct GaussianPairStream {
    delta: f64,
    sigma: f64,
    scale: f64,
    kernel: Option<KernelSpec>,
    rng: TrialRng,
    x1: Vec<f64>,
    x2: Vec<f64>,
    y1: Vec<f64>,
    y2: Vec<f64>,
}

impl GaussianPairStream {
    pub fn new(d: usize, delta: f64, sigma: f64, rng: TrialRng) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            delta,
            sigma,
            scale: 1.0,
            kernel: None,
            rng,
            x1: vec![0.0; d],
            x2: vec![0.0; d],
            y1: vec![0.0; d],
            y2: vec![0.0; d],
        })
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Emit MMD increments with `kernel` instead of mean increments.
    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = Some(kernel);
        self
    }

    fn fill(&mut self) {
        let (s, sigma) = (self.scale, self.sigma);
        for buf in [&mut self.x1, &mut self.x2, &mut self.y1, &mut self.y2] {
            for v in buf.iter_mut() {
                let z: f64 = self.rng.sample(StandardNormal);
                *v = z * sigma;
            }
        }
        self.y1[0] += self.delta;
        self.y2[0] += self.delta;
        if s != 1.0 {
            for buf in [&mut self.x1, &mut self.x2, &mut self.y1, &mut self.y2] {
                buf.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
}

pub fn gen_gaussian_pair_stream(d: usize, delta: f64, sigma: f64, seed: u64) -> Result<GaussianPairStream> {
    GaussianPairStream::new(d, delta, sigma, trial_rng(seed, 0))
}

impl Iterator for GaussianPairStream {
    type Item = Increment;

    fn next(&mut self) -> Option<Increment> {
        self.fill();
        let h = match &self.kernel {
            None => mean_increment(&self.x1, &self.y1, &self.x2, &self.y2),
            Some(k) => mmd_increment(k, &self.x1, &self.x2, &self.y1, &self.y2),
        };
        Some(h.expect("buffers share one dimension"))
    }
}

/// Dependent pairs on the unit cube: `X ~ U[0,1]^p`,
/// `Y = w·X + (1 − w)·U` with `U ~ U[0,1]^p` independent. `w = 0` is the
/// independence null. Increments are scaled by the diameter `√p`.
#[derive(Debug, Clone)]
pub struct DcovStream {
    p: usize,
    dependence: f64,
    rng: TrialRng,
}

impl DcovStream {
    pub fn new(p: usize, dependence: f64, rng: TrialRng) -> Result<Self> {
        if p == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&dependence) {
            return Err(Error::Domain(format!("dependence must lie in [0, 1], got {dependence}")));
        }
        Ok(Self { p, dependence, rng })
    }
}

impl Iterator for DcovStream {
    type Item = Increment;

    fn next(&mut self) -> Option<Increment> {
        let w = self.dependence;
        let mut xs = Vec::with_capacity(4);
        let mut ys = Vec::with_capacity(4);
        for _ in 0..4 {
            let x: Vec<f64> = (0..self.p).map(|_| self.rng.random::<f64>()).collect();
            let y: Vec<f64> = x.iter().map(|xi| w * xi + (1.0 - w) * self.rng.random::<f64>()).collect();
            xs.push(Observation::new_unchecked(x));
            ys.push(Observation::new_unchecked(y));
        }
        let block = PairBlock::new(xs, ys);
        Some(dcov_increment_bounded(&block, (self.p as f64).sqrt()).expect("unit-cube block"))
    }
}

/// JSON description of a generator for the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    Coin {
        rho: f64,
    },
    Gaussian {
        #[serde(default = "default_d")]
        d: usize,
        delta: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
        /// Declared norm bound `B`; observations are scaled by `1/(2B)`.
        #[serde(default)]
        bound: Option<f64>,
        /// Kernel for MMD increments.
        #[serde(default)]
        kernel: Option<KernelSpec>,
    },
    Dcov {
        p: usize,
        dependence: f64,
    },
}

fn default_d() -> usize {
    10
}

fn default_sigma() -> f64 {
    1.0
}

impl GeneratorSpec {
    pub fn family(&self) -> Family {
        match self {
            GeneratorSpec::Coin { .. } => Family::Coin,
            GeneratorSpec::Gaussian { kernel: None, .. } => Family::Mean,
            GeneratorSpec::Gaussian { kernel: Some(_), .. } => Family::Mmd,
            GeneratorSpec::Dcov { .. } => Family::Dcov,
        }
    }

    pub fn build(&self, rng: TrialRng) -> Result<Box<dyn Iterator<Item = Increment> + Send>> {
        Ok(match self {
            GeneratorSpec::Coin { rho } => Box::new(CoinStream::new(*rho, rng)?),
            GeneratorSpec::Gaussian { d, delta, sigma, bound, kernel } => {
                let mut g = GaussianPairStream::new(*d, *delta, *sigma, rng)?;
                if let Some(b) = bound {
                    if !(*b > 0.0) {
                        return Err(Error::Domain(format!("norm bound must be positive, got {b}")));
                    }
                    g = g.with_scale(1.0 / (2.0 * b));
                }
                if let Some(k) = kernel {
                    g = g.with_kernel(*k);
                }
                Box::new(g)
            }
            GeneratorSpec::Dcov { p, dependence } => Box::new(DcovStream::new(*p, *dependence, rng)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, var)
    }

    #[test]
    fn coin_extremes_and_means() {
        assert!(gen_coin_stream(1.0, 3).unwrap().take(1000).all(|h| h.value == 1.0));
        let n = 100_000;
        let fair: Vec<f64> = gen_coin_stream(0.5, 11).unwrap().take(n).map(|h| h.value).collect();
        let (m, _) = mean_and_var(&fair);
        assert!(m.abs() < 3.0 / (n as f64).sqrt(), "{m}");
        let biased: Vec<f64> = gen_coin_stream(0.6, 12).unwrap().take(n).map(|h| h.value).collect();
        let (m, _) = mean_and_var(&biased);
        let se = (1.0f64 - 0.04).sqrt() / (n as f64).sqrt();
        assert!((m - 0.2).abs() < 3.0 * se, "{m}");
        assert!(gen_coin_stream(1.2, 0).is_err());
    }

    #[test]
    fn gaussian_null_moments() {
        let n = 100_000;
        let h: Vec<f64> = gen_gaussian_pair_stream(10, 0.0, 1.0, 5).unwrap().take(n).map(|h| h.value).collect();
        let (m, var) = mean_and_var(&h);
        // E h = 0, Var h = 4 tr(Σ²) = 40.
        assert!(m.abs() < 3.0 * (40.0 / n as f64).sqrt(), "{m}");
        assert!((var - 40.0).abs() / 40.0 < 0.05, "{var}");
    }

    #[test]
    fn gaussian_alternative_moments() {
        let n = 100_000;
        let (d, delta, sigma) = (10, 1.0, 1.0);
        let h: Vec<f64> = gen_gaussian_pair_stream(d, delta, sigma, 6).unwrap().take(n).map(|h| h.value).collect();
        let (m, var) = mean_and_var(&h);
        let expected_var = 4.0 * sigma.powi(4) * d as f64 + 4.0 * delta * delta * sigma * sigma;
        assert!((m - delta * delta).abs() < 3.0 * (expected_var / n as f64).sqrt(), "{m}");
        assert!((var - expected_var).abs() / expected_var < 0.05, "{var}");
    }

    #[test]
    fn gaussian_deterministic_per_seed() {
        let a: Vec<Increment> = gen_gaussian_pair_stream(3, 0.5, 1.0, 99).unwrap().take(100).collect();
        let b: Vec<Increment> = gen_gaussian_pair_stream(3, 0.5, 1.0, 99).unwrap().take(100).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_scale_quadratic() {
        let a: Vec<f64> = gen_gaussian_pair_stream(4, 0.5, 1.0, 1).unwrap().take(10).map(|h| h.value).collect();
        let b: Vec<f64> = gen_gaussian_pair_stream(4, 0.5, 1.0, 1)
            .unwrap()
            .with_scale(0.5)
            .take(10)
            .map(|h| h.value)
            .collect();
        for (x, y) in a.iter().zip(&b) {
            assert!((x / 4.0 - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mmd_null_mean_zero() {
        let n = 100_000;
        let k = KernelSpec::gaussian(1.0).unwrap();
        let h: Vec<f64> = GaussianPairStream::new(2, 0.0, 0.5, trial_rng(4, 0))
            .unwrap()
            .with_kernel(k)
            .take(n)
            .map(|h| h.value)
            .collect();
        let (m, var) = mean_and_var(&h);
        assert!(m.abs() < 3.0 * (var / n as f64).sqrt(), "{m}");
    }

    #[test]
    fn dcov_stream_bounded() {
        let s = DcovStream::new(2, 0.7, trial_rng(1, 0)).unwrap();
        for h in s.take(2000) {
            assert!(h.value.abs() <= 1.0);
        }
    }

    #[test]
    fn generator_spec_json() {
        let g: GeneratorSpec = serde_json::from_str(r#"{"kind":"gaussian","delta":0.5}"#).unwrap();
        assert_eq!(g.family(), Family::Mean);
        let g: GeneratorSpec =
            serde_json::from_str(r#"{"kind":"gaussian","delta":0.5,"kernel":{"kind":"gaussian","gamma":1.0}}"#)
                .unwrap();
        assert_eq!(g.family(), Family::Mmd);
        let g: GeneratorSpec = serde_json::from_str(r#"{"kind":"coin","rho":0.7}"#).unwrap();
        assert_eq!(g.build(trial_rng(0, 0)).unwrap().next().unwrap().family, Family::Coin);
    }
}
