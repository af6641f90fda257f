//! Single-player arm selection over an eligible subset of arms.
//!
//! Selection rules are pure functions of a statistics table, the eligible
//! arms and a decision-epoch counter. Keeping the statistics outside the rule
//! lets the TDFS wrapper feed either one shared table (coupled) or a table per
//! mini-sequence (uncoupled) to the same rule.

use serde::{Deserialize, Serialize};

use crate::reward::RewardFamily;
use crate::tdfs::oslash;
use crate::{Error, Result};

/// Estimates at the edge of the parameter space are pulled this far inside
/// before a KL divergence is taken.
pub const ESTIMATE_CLAMP: f64 = 1e-6;

/// What a learner knows about one arm.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmStatistics {
    count: u64,
    sum: f64,
    mean: f64,
}

impl ArmStatistics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// Sample mean, `None` before the first observation.
    pub fn point_estimate(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    pub fn observe(&mut self, value: f64) {
        self.count += 1;
        self.sum += value;
        // Incremental form keeps a constant stream's mean exact.
        self.mean += (value - self.mean) / self.count as f64;
    }
}

fn clamp_estimate(family: RewardFamily, h: f64) -> f64 {
    match family {
        RewardFamily::Bernoulli => h.clamp(ESTIMATE_CLAMP, 1.0 - ESTIMATE_CLAMP),
        RewardFamily::Poisson { .. } | RewardFamily::Exponential { .. } => h.max(ESTIMATE_CLAMP),
        RewardFamily::Gaussian { .. } => h,
    }
}

/// Lai-Robbins leader test in its two-condition form.
///
/// Returns `true` when the leader should be played: the candidate's estimate
/// is strictly below the leader's and `I(h_cand, h_lead) > ln(t - 1) / τ_cand`.
/// Both arms must have at least one observation.
pub fn lr_comparison(
    leader: &ArmStatistics,
    candidate: &ArmStatistics,
    family: RewardFamily,
    local_time: u64,
) -> bool {
    let (Some(h_lead), Some(h_cand)) = (leader.point_estimate(), candidate.point_estimate()) else {
        return false;
    };
    if h_cand >= h_lead {
        return false;
    }
    let divergence = family
        .kl(
            clamp_estimate(family, h_cand),
            clamp_estimate(family, h_lead),
        )
        .unwrap_or(f64::INFINITY);
    let threshold = ((local_time.max(2) - 1) as f64).ln() / candidate.count() as f64;
    divergence > threshold
}

/// A rule choosing one arm of `eligible` given the per-arm statistics.
pub trait SelectionRule {
    /// `eligible` is nonempty and lists arm ids in ascending order; `seq_time`
    /// counts decision epochs (starting at 1) of the sequence being served.
    fn select(&self, stats: &[ArmStatistics], eligible: &[usize], seq_time: u64) -> usize;
}

/// Round-robin initialization shared by all rules: epoch `s <= |eligible|`
/// plays the `s`-th eligible arm.
fn initialization(eligible: &[usize], seq_time: u64) -> Option<usize> {
    assert!(!eligible.is_empty(), "eligible arm set is empty");
    let idx = seq_time.max(1) as usize - 1;
    eligible.get(idx).copied()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaiRobbins {
    family: RewardFamily,
    delta: f64,
}

impl LaiRobbins {
    /// `delta` must lie in `(0, 1/arms)`.
    pub fn new(family: RewardFamily, delta: f64, arms: usize) -> Result<Self> {
        check_delta(delta, arms)?;
        Ok(Self { family, delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

pub fn check_delta(delta: f64, arms: usize) -> Result<()> {
    if delta > 0.0 && delta < 1.0 / arms as f64 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "delta = {delta} must lie in (0, 1/N) with N = {arms}"
        )))
    }
}

/// `1 / (2N)`.
pub fn default_delta(arms: usize) -> f64 {
    0.5 / arms as f64
}

impl SelectionRule for LaiRobbins {
    fn select(&self, stats: &[ArmStatistics], eligible: &[usize], seq_time: u64) -> usize {
        if let Some(arm) = initialization(eligible, seq_time) {
            return arm;
        }
        let candidate = eligible[oslash(seq_time, eligible.len() as u64) as usize - 1];

        let min_count = (seq_time - 1) as f64 * self.delta;
        let mut leader: Option<(usize, f64)> = None;
        for &arm in eligible {
            let s = &stats[arm];
            if (s.count() as f64) < min_count {
                continue;
            }
            let Some(h) = s.point_estimate() else {
                continue;
            };
            // Strict comparison keeps the lowest arm id on ties.
            if leader.is_none_or(|(_, best)| h > best) {
                leader = Some((arm, h));
            }
        }
        match leader {
            Some((arm, _)) if arm == candidate => candidate,
            Some((arm, _))
                if lr_comparison(&stats[arm], &stats[candidate], self.family, seq_time) =>
            {
                arm
            }
            _ => candidate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    /// Agrawal's per-family sample-mean index.
    Agrawal,
    /// `x + sqrt(2 ln(t-1) / τ)`.
    Auer,
}

/// `ln(t-1) + 2 ln ln(t-1)` with the double logarithm floored at zero for small `t`.
fn agrawal_exploration(local_time: u64) -> f64 {
    let l = ((local_time.max(2) - 1) as f64).ln();
    let ll = if l > 0.0 { l.ln().max(0.0) } else { 0.0 };
    l + 2.0 * ll
}

pub fn agrawal_index(family: RewardFamily, x: f64, local_time: u64, tau: u64) -> f64 {
    let e = agrawal_exploration(local_time);
    let root = (2.0 * e / tau as f64).sqrt();
    match family {
        RewardFamily::Gaussian { .. } => x + root,
        RewardFamily::Bernoulli => x + (root / 2.0).min(1.0),
        RewardFamily::Poisson { a } => x + ((2.0 * a * e / tau as f64).sqrt() / 2.0).min(a),
        RewardFamily::Exponential { b } => x + b * root.min(1.0),
    }
}

pub fn auer_index(x: f64, local_time: u64, tau: u64) -> f64 {
    let l = ((local_time.max(2) - 1) as f64).ln();
    x + (2.0 * l / tau as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexPolicy {
    kind: IndexKind,
    family: RewardFamily,
}

impl IndexPolicy {
    pub fn new(kind: IndexKind, family: RewardFamily) -> Self {
        Self { kind, family }
    }

    pub fn index(&self, s: &ArmStatistics, local_time: u64) -> f64 {
        let Some(x) = s.point_estimate() else {
            return f64::INFINITY;
        };
        match self.kind {
            IndexKind::Agrawal => agrawal_index(self.family, x, local_time, s.count()),
            IndexKind::Auer => auer_index(x, local_time, s.count()),
        }
    }
}

impl SelectionRule for IndexPolicy {
    fn select(&self, stats: &[ArmStatistics], eligible: &[usize], seq_time: u64) -> usize {
        if let Some(arm) = initialization(eligible, seq_time) {
            return arm;
        }
        let mut best = (eligible[0], f64::NEG_INFINITY);
        for &arm in eligible {
            let v = self.index(&stats[arm], seq_time);
            if v > best.1 {
                best = (arm, v);
            }
        }
        best.0
    }
}

/// Configuration-level choice of single-player policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasePolicy {
    LaiRobbins,
    AgrawalIndex,
    AuerIndex,
}

impl BasePolicy {
    pub fn build(
        self,
        family: RewardFamily,
        delta: f64,
        arms: usize,
    ) -> Result<SinglePlayerPolicy> {
        Ok(match self {
            Self::LaiRobbins => {
                SinglePlayerPolicy::LaiRobbins(LaiRobbins::new(family, delta, arms)?)
            }
            Self::AgrawalIndex => {
                SinglePlayerPolicy::Index(IndexPolicy::new(IndexKind::Agrawal, family))
            }
            Self::AuerIndex => SinglePlayerPolicy::Index(IndexPolicy::new(IndexKind::Auer, family)),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LaiRobbins => "lai-robbins",
            Self::AgrawalIndex => "agrawal-index",
            Self::AuerIndex => "auer-index",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SinglePlayerPolicy {
    LaiRobbins(LaiRobbins),
    Index(IndexPolicy),
}

impl SelectionRule for SinglePlayerPolicy {
    fn select(&self, stats: &[ArmStatistics], eligible: &[usize], seq_time: u64) -> usize {
        match self {
            Self::LaiRobbins(p) => p.select(stats, eligible, seq_time),
            Self::Index(p) => p.select(stats, eligible, seq_time),
        }
    }
}

/// A standalone single-player learner over all arms: the rule plus its own
/// statistics and clock.
#[derive(Debug, Clone)]
pub struct Learner<P> {
    rule: P,
    stats: Vec<ArmStatistics>,
    eligible: Vec<usize>,
    time: u64,
}

pub type LaiRobbinsState = Learner<LaiRobbins>;
pub type IndexPolicyState = Learner<IndexPolicy>;

impl<P: SelectionRule> Learner<P> {
    pub fn new(rule: P, arms: usize) -> Self {
        Self {
            rule,
            stats: vec![ArmStatistics::new(); arms],
            eligible: (0..arms).collect(),
            time: 0,
        }
    }

    /// Advances the clock and picks the arm for the new slot.
    pub fn next_arm(&mut self) -> usize {
        self.time += 1;
        self.rule.select(&self.stats, &self.eligible, self.time)
    }

    pub fn observe(&mut self, arm: usize, value: f64) {
        self.stats[arm].observe(value);
    }

    pub fn stats(&self) -> &[ArmStatistics] {
        &self.stats
    }
}
