//! Batch and sequential test drivers.
//!
//! The sequential driver updates the walk after each increment, evaluates
//! the boundary for the new state and stops at the first crossing. The batch
//! driver consumes exactly `N` increments and compares once.

use serde::{Deserialize, Serialize};

use crate::domain::{Decision, Family, Increment, TestVerdict, WalkState};
use crate::error::{Error, Result};
use crate::thresholds::{batch_threshold, sequential_threshold, ThresholdPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// Reject when `T_n > q_n`.
    OneSidedUpper,
    /// Reject when `|T_n| > q_n`.
    TwoSided,
}

impl Sidedness {
    /// Coin tests look for a bias towards heads; the two-sample families
    /// bound `|T_n|`.
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Coin => Sidedness::OneSidedUpper,
            Family::Mean | Family::Mmd | Family::Dcov => Sidedness::TwoSided,
        }
    }

    pub fn statistic(self, t: f64) -> f64 {
        match self {
            Sidedness::OneSidedUpper => t,
            Sidedness::TwoSided => t.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    Reject,
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub n: u64,
    pub t: f64,
    pub q: f64,
}

/// A running sequential test.
#[derive(Debug, Clone)]
pub struct SequentialTest {
    walk: WalkState,
    policy: ThresholdPolicy,
    n_max: u64,
    sidedness: Sidedness,
    trajectory: Option<Vec<TrajectoryPoint>>,
    last_boundary: f64,
    decided: Option<TestVerdict>,
}

impl SequentialTest {
    pub fn new(policy: ThresholdPolicy, n_max: u64, sidedness: Sidedness) -> Result<Self> {
        if !policy.mode.is_sequential() {
            return Err(Error::PolicyModeMismatch { got: policy.mode.name().into(), expected: "sequential" });
        }
        policy.validate()?;
        let last_boundary = sequential_threshold(&WalkState::new(), &policy)?;
        Ok(Self {
            walk: WalkState::new(),
            policy,
            n_max,
            sidedness,
            trajectory: None,
            last_boundary,
            decided: None,
        })
    }

    /// Keep every `(n, T_n, q_n)`; memory then grows with `n`.
    pub fn record_trajectory(mut self) -> Self {
        self.trajectory = Some(Vec::new());
        self
    }

    pub fn walk(&self) -> &WalkState {
        &self.walk
    }

    pub fn policy(&self) -> &ThresholdPolicy {
        &self.policy
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn trajectory(&self) -> Option<&[TrajectoryPoint]> {
        self.trajectory.as_deref()
    }

    pub fn is_decided(&self) -> bool {
        self.decided.is_some()
    }

    pub fn step(&mut self, h: Increment) -> Result<StepOutcome> {
        if let Some(v) = &self.decided {
            return Err(Error::TestAlreadyDecided { tau: v.tau });
        }
        if self.walk.n() >= self.n_max {
            return Err(Error::CapReached { n_max: self.n_max });
        }
        self.walk.push(h.value);
        let q = sequential_threshold(&self.walk, &self.policy)?;
        self.last_boundary = q;
        let t = self.walk.t();
        if let Some(traj) = &mut self.trajectory {
            traj.push(TrajectoryPoint { n: self.walk.n(), t, q });
        }
        let stat = self.sidedness.statistic(t);
        if stat > q {
            self.decided = Some(TestVerdict {
                decision: Decision::Reject,
                tau: self.walk.n(),
                boundary_at_stop: q,
                statistic_at_stop: stat,
                exhausted: false,
            });
            Ok(StepOutcome::Reject)
        } else {
            Ok(StepOutcome::Continue)
        }
    }

    /// Verdict so far: the frozen rejection, or fail-to-reject at the
    /// current step. `exhausted` marks input that ended before `n_max`.
    pub fn verdict(&self) -> TestVerdict {
        if let Some(v) = self.decided {
            return v;
        }
        TestVerdict {
            decision: Decision::FailToReject,
            tau: self.walk.n(),
            boundary_at_stop: self.last_boundary,
            statistic_at_stop: self.sidedness.statistic(self.walk.t()),
            exhausted: self.walk.n() < self.n_max,
        }
    }
}

/// Runs a sequential test over a stream until it rejects, reaches `n_max`
/// or the stream ends.
pub fn run_sequential<I>(
    stream: I,
    policy: ThresholdPolicy,
    n_max: u64,
    sidedness: Sidedness,
) -> Result<TestVerdict>
where
    I: IntoIterator<Item = Result<Increment>>,
{
    let mut test = SequentialTest::new(policy, n_max, sidedness)?;
    drive(&mut test, stream)?;
    Ok(test.verdict())
}

/// Feeds `stream` into `test` until a decision or the cap. Pulls no more
/// items than needed.
pub fn drive<I>(test: &mut SequentialTest, stream: I) -> Result<()>
where
    I: IntoIterator<Item = Result<Increment>>,
{
    if test.is_decided() || test.walk().n() >= test.n_max() {
        return Ok(());
    }
    for item in stream {
        if test.step(item?)? == StepOutcome::Reject || test.walk().n() >= test.n_max() {
            break;
        }
    }
    Ok(())
}

/// Fixed-`N` test: consumes exactly `n` increments and compares once.
pub fn run_batch<I>(stream: I, n: u64, policy: ThresholdPolicy, sidedness: Sidedness) -> Result<TestVerdict>
where
    I: IntoIterator<Item = Result<Increment>>,
{
    if policy.mode.is_sequential() {
        return Err(Error::PolicyModeMismatch { got: policy.mode.name().into(), expected: "batch" });
    }
    policy.validate()?;
    let mut walk = WalkState::new();
    let mut it = stream.into_iter();
    while walk.n() < n {
        match it.next() {
            Some(item) => walk.push(item?.value),
            None => return Err(Error::InsufficientData { needed: n, got: walk.n() }),
        }
    }
    batch_verdict(&walk, &policy, sidedness)
}

/// Batch decision for an already-accumulated walk.
pub fn batch_verdict(walk: &WalkState, policy: &ThresholdPolicy, sidedness: Sidedness) -> Result<TestVerdict> {
    let q = batch_threshold(walk, policy)?;
    let stat = sidedness.statistic(walk.t());
    Ok(TestVerdict {
        decision: if stat > q { Decision::Reject } else { Decision::FailToReject },
        tau: walk.n(),
        boundary_at_stop: q,
        statistic_at_stop: stat,
        exhausted: false,
    })
}
