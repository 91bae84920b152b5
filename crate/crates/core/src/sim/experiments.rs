//! Monte Carlo drivers.
//!
//! Each driver runs independent trials (seeded per grid cell and trial
//! index), gathers results in trial order and summarizes them. Trials run on
//! the rayon pool; collection preserves index order, so output does not
//! depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analysis::{batch_power, least_squares, LineFit};
use crate::domain::{Family, Increment, ProblemSpec, WalkState};
use crate::engine::{batch_verdict, SequentialTest, Sidedness, StepOutcome};
use crate::error::{Error, Result};
use crate::sim::config::{ExperimentConfig, ExperimentKind};
use crate::sim::format::{fmt_g9, round9};
use crate::sim::generators::{CoinStream, GaussianPairStream};
use crate::sim::rng::{cell_seed, trial_rng};
use crate::thresholds::{normal_cdf, normal_quantile, ThresholdMode, ThresholdPolicy};

/// Increment source for one trial of one grid cell.
fn trial_stream(cfg: &ExperimentConfig, delta: f64, cell: u64, trial: u64) -> Result<Box<dyn Iterator<Item = Increment>>> {
    let rng = trial_rng(cell_seed(cfg.seed, cell), trial);
    Ok(match cfg.family() {
        Family::Coin => Box::new(CoinStream::new(0.5 + delta, rng)?),
        _ => Box::new(GaussianPairStream::new(cfg.spec.d, delta, cfg.spec.sigma, rng)?.with_scale(cfg.scale())),
    })
}

/// Known per-step variance of the increments under H0, in emitted units.
fn null_increment_variance(cfg: &ExperimentConfig) -> f64 {
    match cfg.family() {
        Family::Coin => 1.0,
        _ => {
            let s2 = cfg.scale() * cfg.scale();
            let sig2 = cfg.spec.sigma * cfg.spec.sigma;
            4.0 * cfg.spec.d as f64 * sig2 * sig2 * s2 * s2
        }
    }
}

fn binomial_stderr(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// `count` geometrically spaced integers in `[1, n_max]`, deduplicated.
pub fn log_grid(n_max: u64, count: usize) -> Vec<u64> {
    if count <= 1 || n_max <= 1 {
        return vec![n_max.max(1)];
    }
    let ratio = (n_max as f64).ln() / (count - 1) as f64;
    let mut grid: Vec<u64> = (0..count)
        .map(|i| ((i as f64 * ratio).exp().round() as u64).clamp(1, n_max))
        .collect();
    grid.push(n_max);
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Runs `tests` in lockstep on one stream until all decided or capped.
/// Returns each test's rejection step.
fn run_lockstep(mut tests: Vec<SequentialTest>, stream: &mut dyn Iterator<Item = Increment>, n_max: u64) -> Result<Vec<Option<u64>>> {
    let mut open = tests.len();
    let mut n = 0;
    while open > 0 && n < n_max {
        let h = stream.next().ok_or_else(|| Error::Stream("generator ended".into()))?;
        n += 1;
        for t in tests.iter_mut().filter(|t| !t.is_decided()) {
            if t.step(h)? == StepOutcome::Reject {
                open -= 1;
            }
        }
    }
    Ok(tests.iter().map(|t| t.verdict().rejected().then(|| t.verdict().tau)).collect())
}

// ---------------------------------------------------------------- type I

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Type1Row {
    pub alpha: f64,
    pub n: u64,
    pub cum_reject_frac: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type1Result {
    pub rows: Vec<Type1Row>,
    /// `(α, fraction of trials rejecting by N_max)`.
    pub terminal: Vec<(f64, f64)>,
}

/// Cumulative null rejection fraction `P(τ ≤ n)` on a 50-point log grid,
/// one curve per α. All α levels share each trial's stream.
pub fn run_type1_experiment(cfg: &ExperimentConfig) -> Result<Type1Result> {
    if !matches!(cfg.experiment, ExperimentKind::Type1Coin | ExperimentKind::Type1Gaussian) {
        return Err(Error::Config("not a type I experiment".into()));
    }
    cfg.validate()?;
    let alphas = cfg.alphas();
    let policies: Vec<ThresholdPolicy> = alphas.iter().map(|&a| cfg.policy.with_alpha(a)).collect();
    let sided = cfg.sidedness();

    let per_trial: Vec<Vec<Option<u64>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let tests = policies
                .iter()
                .map(|p| SequentialTest::new(*p, cfg.n_max, sided))
                .collect::<Result<Vec<_>>>()?;
            let mut stream = trial_stream(cfg, 0.0, 0, trial)?;
            run_lockstep(tests, stream.as_mut(), cfg.n_max)
        })
        .collect::<Result<_>>()?;

    let grid = log_grid(cfg.n_max, 50);
    let mut rows = Vec::new();
    let mut terminal = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        let mut taus: Vec<u64> = per_trial.iter().filter_map(|t| t[ai]).collect();
        taus.sort_unstable();
        for &n in &grid {
            let count = taus.partition_point(|&t| t <= n);
            let frac = count as f64 / cfg.trials as f64;
            rows.push(Type1Row { alpha, n, cum_reject_frac: frac, stderr: binomial_stderr(frac, cfg.trials) });
        }
        terminal.push((alpha, taus.len() as f64 / cfg.trials as f64));
    }
    Ok(Type1Result { rows, terminal })
}

// ---------------------------------------------------------------- power

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub delta: f64,
    #[serde(rename = "N")]
    pub n: u64,
    pub seq_power: f64,
    pub batch_power_emp: f64,
    pub batch_power_pred: f64,
    pub stderr: f64,
}

fn resolve_batch_policy(cfg: &ExperimentConfig) -> ThresholdPolicy {
    let v0 = null_increment_variance(cfg);
    match cfg.batch_policy {
        Some(mut p) => {
            if p.mode == ThresholdMode::BatchGaussian && p.v0.is_none() {
                p.v0 = Some(v0);
            }
            p
        }
        None => ThresholdPolicy::new(ThresholdMode::BatchGaussian, cfg.policy.alpha).with_v0(v0),
    }
}

/// CLT power of the known-variance batch test.
fn predicted_batch_power(cfg: &ExperimentConfig, delta: f64, n: u64, alpha: f64) -> Result<f64> {
    match cfg.family() {
        Family::Coin => {
            let nf = n as f64;
            let sd = (nf * (1.0 - 4.0 * delta * delta)).sqrt();
            let threshold = nf.sqrt() * normal_quantile(alpha)?;
            if sd == 0.0 {
                return Ok(if 2.0 * delta * nf > threshold { 1.0 } else { 0.0 });
            }
            Ok(normal_cdf((2.0 * delta * nf - threshold) / sd))
        }
        _ => batch_power(n, &ProblemSpec::isotropic(cfg.spec.d, cfg.spec.sigma, delta)?, alpha),
    }
}

/// Sequential power `P(τ ≤ N)` and batch power at each `N`, computed on the
/// same trial streams. The batch comparator is one-sided.
pub fn run_power_experiment(cfg: &ExperimentConfig) -> Result<Vec<PowerRow>> {
    cfg.validate()?;
    let mut grid = cfg.n_grid.clone().unwrap_or_else(|| log_grid(cfg.n_max, 12));
    grid.sort_unstable();
    grid.dedup();
    let horizon = *grid.last().expect("nonempty grid");
    let batch_policy = resolve_batch_policy(cfg);
    let sided = cfg.sidedness();

    let mut rows = Vec::new();
    for (cell, &delta) in cfg.spec.deltas.iter().enumerate() {
        let per_trial: Vec<(Option<u64>, Vec<bool>)> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let mut stream = trial_stream(cfg, delta, cell as u64, trial)?;
                let mut seq = SequentialTest::new(cfg.policy, horizon, sided)?;
                let mut walk = WalkState::new();
                let mut batch = Vec::with_capacity(grid.len());
                let mut next = 0;
                while next < grid.len() {
                    let h = stream.next().ok_or_else(|| Error::Stream("generator ended".into()))?;
                    if !seq.is_decided() {
                        seq.step(h)?;
                    }
                    walk.push(h.value);
                    while next < grid.len() && walk.n() == grid[next] {
                        batch.push(batch_verdict(&walk, &batch_policy, Sidedness::OneSidedUpper)?.rejected());
                        next += 1;
                    }
                }
                let v = seq.verdict();
                Ok((v.rejected().then_some(v.tau), batch))
            })
            .collect::<Result<_>>()?;

        for (gi, &n) in grid.iter().enumerate() {
            let seq = per_trial.iter().filter(|(tau, _)| tau.is_some_and(|t| t <= n)).count();
            let bat = per_trial.iter().filter(|(_, b)| b[gi]).count();
            let seq_power = seq as f64 / cfg.trials as f64;
            rows.push(PowerRow {
                delta,
                n,
                seq_power,
                batch_power_emp: bat as f64 / cfg.trials as f64,
                batch_power_pred: predicted_batch_power(cfg, delta, n, batch_policy.alpha)?,
                stderr: binomial_stderr(seq_power, cfg.trials),
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------- stopping

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRow {
    pub delta: f64,
    pub q10: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q90: f64,
    pub reject_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingResult {
    pub rows: Vec<StoppingRow>,
    /// Least-squares fit of `ln(median τ)` on `ln(1/δ)` over uncensored cells.
    pub fit: LineFit,
    /// Stopping times per δ (censored trials recorded as `N_max`).
    pub taus: Vec<Vec<u64>>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[u64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 * (1.0 - frac) + sorted[hi] as f64 * frac
}

/// Stopping time of every trial in one δ cell, with whether it rejected.
/// Censored trials report `N_max`.
pub fn stopping_times(cfg: &ExperimentConfig, delta: f64, cell: u64, sided: Sidedness) -> Result<Vec<(u64, bool)>> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut stream = trial_stream(cfg, delta, cell, trial)?;
            let test = SequentialTest::new(cfg.policy, cfg.n_max, sided)?;
            let tau = run_lockstep(vec![test], stream.as_mut(), cfg.n_max)?[0];
            Ok(tau.map_or((cfg.n_max, false), |t| (t, true)))
        })
        .collect()
}

/// Minimum rejection fraction for a δ cell to enter the slope fit.
pub const MIN_REJECT_FRAC: f64 = 0.99;

/// Stopping-time quantiles per δ and the slope of median `ln τ` against
/// `ln(1/δ)`. Cells rejecting in fewer than 99% of trials are censored and
/// left out of the fit.
pub fn run_stopping_experiment(cfg: &ExperimentConfig) -> Result<StoppingResult> {
    cfg.validate()?;
    let sided = cfg.sidedness();
    let mut rows = Vec::new();
    let mut all_taus = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (cell, &delta) in cfg.spec.deltas.iter().enumerate() {
        let per_trial = stopping_times(cfg, delta, cell as u64, sided)?;
        let mut taus: Vec<u64> = per_trial.iter().map(|(t, _)| *t).collect();
        let reject_frac = per_trial.iter().filter(|(_, r)| *r).count() as f64 / cfg.trials as f64;
        all_taus.push(taus.clone());
        taus.sort_unstable();
        let row = StoppingRow {
            delta,
            q10: quantile(&taus, 0.10),
            q25: quantile(&taus, 0.25),
            q50: quantile(&taus, 0.50),
            q75: quantile(&taus, 0.75),
            q90: quantile(&taus, 0.90),
            reject_frac,
        };
        if reject_frac >= MIN_REJECT_FRAC && delta > 0.0 {
            xs.push((1.0 / delta).ln());
            ys.push(row.q50.ln());
        }
        rows.push(row);
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientRejections { usable: xs.len() });
    }
    let fit = least_squares(&xs, &ys)?;
    Ok(StoppingResult { rows, fit, taus: all_taus })
}

// ---------------------------------------------------------------- moments

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub delta: f64,
    pub n: u64,
    pub mean_over_n: f64,
    pub expected_mean_over_n: f64,
    pub mean_rel_err: f64,
    /// `|mean(T_n)| / sqrt(n V1 / trials)`; a CLT z-score of the sample mean.
    pub mean_z: f64,
    pub var_over_n: f64,
    pub expected_var_over_n: f64,
    pub var_rel_err: f64,
}

/// Sample mean and variance of `T_n` at `n = N_max` against
/// `E T_n = n‖δ‖²` and `Var T_n = n(4 tr(Σ²) + 4 δᵀΣδ)`.
pub fn run_moment_check(cfg: &ExperimentConfig) -> Result<Vec<MomentRow>> {
    cfg.validate()?;
    let n = cfg.n_max;
    let s2 = cfg.scale() * cfg.scale();
    let mut rows = Vec::new();
    for (cell, &delta) in cfg.spec.deltas.iter().enumerate() {
        let totals: Vec<f64> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let stream = trial_stream(cfg, delta, cell as u64, trial)?;
                let mut walk = WalkState::new();
                stream.take(n as usize).for_each(|h| walk.push(h.value));
                Ok(walk.t())
            })
            .collect::<Result<_>>()?;
        let trials = totals.len() as f64;
        let mean = totals.iter().sum::<f64>() / trials;
        let var = totals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (trials - 1.0).max(1.0);
        let spec = ProblemSpec::isotropic(cfg.spec.d, cfg.spec.sigma, delta)?;
        let expected_mean = spec.delta_norm_sq() * s2;
        let expected_var = spec.increment_variance() * s2 * s2;
        let nf = n as f64;
        let rel = |got: f64, want: f64| if want == 0.0 { got.abs() } else { (got - want).abs() / want.abs() };
        rows.push(MomentRow {
            delta,
            n,
            mean_over_n: mean / nf,
            expected_mean_over_n: expected_mean,
            mean_rel_err: rel(mean / nf, expected_mean),
            mean_z: (mean - nf * expected_mean).abs() / (nf * expected_var / trials).sqrt(),
            var_over_n: var / nf,
            expected_var_over_n: expected_var,
            var_rel_err: rel(var / nf, expected_var),
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------- output

/// Rendered experiment: CSV body plus a JSON summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub csv: String,
    pub summary: serde_json::Value,
}

fn csv_table(header: &str, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Runs whichever experiment `cfg` names and renders it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let echo = serde_json::to_value(cfg)?;
    let g = fmt_g9;
    Ok(match cfg.experiment {
        ExperimentKind::Type1Coin | ExperimentKind::Type1Gaussian => {
            let r = run_type1_experiment(cfg)?;
            let csv = csv_table(
                "alpha,n,cum_reject_frac,stderr",
                r.rows.iter().map(|row| vec![g(row.alpha), row.n.to_string(), g(row.cum_reject_frac), g(row.stderr)]),
            );
            let terminal: Vec<_> = r
                .terminal
                .iter()
                .map(|(a, f)| json!({"alpha": round9(*a), "cum_reject_frac": round9(*f)}))
                .collect();
            ExperimentOutput { csv, summary: json!({"terminal": terminal, "config_echo": echo}) }
        }
        ExperimentKind::PowerCurve => {
            let rows = run_power_experiment(cfg)?;
            let csv = csv_table(
                "delta,N,seq_power,batch_power_emp,batch_power_pred,stderr",
                rows.iter().map(|r| {
                    vec![
                        g(r.delta),
                        r.n.to_string(),
                        g(r.seq_power),
                        g(r.batch_power_emp),
                        g(r.batch_power_pred),
                        g(r.stderr),
                    ]
                }),
            );
            ExperimentOutput { csv, summary: json!({"config_echo": echo}) }
        }
        ExperimentKind::StoppingDistribution => {
            let r = run_stopping_experiment(cfg)?;
            let csv = csv_table(
                "delta,q10,q25,q50,q75,q90,reject_frac",
                r.rows.iter().map(|r| {
                    vec![g(r.delta), g(r.q10), g(r.q25), g(r.q50), g(r.q75), g(r.q90), g(r.reject_frac)]
                }),
            );
            let summary = json!({
                "slope": round9(r.fit.slope),
                "slope_stderr": round9(r.fit.slope_stderr),
                "config_echo": echo,
            });
            ExperimentOutput { csv, summary }
        }
        ExperimentKind::MomentCheck => {
            let rows = run_moment_check(cfg)?;
            let csv = csv_table(
                "delta,n,mean_over_n,expected_mean_over_n,mean_rel_err,mean_z,var_over_n,expected_var_over_n,var_rel_err",
                rows.iter().map(|r| {
                    vec![
                        g(r.delta),
                        r.n.to_string(),
                        g(r.mean_over_n),
                        g(r.expected_mean_over_n),
                        g(r.mean_rel_err),
                        g(r.mean_z),
                        g(r.var_over_n),
                        g(r.expected_var_over_n),
                        g(r.var_rel_err),
                    ]
                }),
            );
            ExperimentOutput { csv, summary: json!({"config_echo": echo}) }
        }
    })
}

/// Writes the CSV to `path` and the summary next to it as
/// `<stem>.summary.json`. Returns the summary path.
pub fn write_output(out: &ExperimentOutput, path: &std::path::Path) -> Result<std::path::PathBuf> {
    std::fs::write(path, &out.csv)?;
    let summary_path = path.with_extension("summary.json");
    let mut text = serde_json::to_string_pretty(&out.summary)?;
    text.push('\n');
    std::fs::write(&summary_path, text)?;
    Ok(summary_path)
}
