//! Regret curves and closed-form regret constants.
//!
//! With `σ` the ranking of arms by mean, `μ_i = μ(θ_σ(i))` and `I` the KL
//! divergence:
//!
//! * centralized lower-bound constant:
//!   `Σ_{j: μ_j < μ_M} (μ_M − μ_j) / I(θ_j, θ_σ(M))`
//! * time-division-selection lower-bound constant:
//!   `Σ_{i=1..M} Σ_{j: μ_j < μ_M} (μ_M − μ_j) / I(θ_j, θ_σ(i))`
//! * `x_k = Σ_{i=1..k} Σ_{j: μ_j < μ_i} 1 / I(θ_j, θ_σ(i))`
//! * TDFS upper constants for both collision models (see [`upper_constant`]).
//!
//! These are asymptotic statements about `R_T / ln T`; they are reported next
//! to simulated estimates, never asserted as finite-horizon inequalities.

use crate::arena::{CollisionModel, Trajectory};
use crate::reward::{rank_arms, ArmRank, ParameterSet};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub checkpoints: Vec<u64>,
    /// Mean realized regret across trials.
    pub regret: Vec<f64>,
    /// Standard error of the mean across trials (0 for a single trial).
    pub stderr: Vec<f64>,
    /// `regret / ln t`; `None` at `t = 1`.
    pub regret_over_log: Vec<Option<f64>>,
}

impl RegretCurve {
    fn from_samples(checkpoints: Vec<u64>, samples: &[Vec<f64>]) -> Self {
        let mut regret = Vec::with_capacity(checkpoints.len());
        let mut stderr = Vec::with_capacity(checkpoints.len());
        for c in 0..checkpoints.len() {
            let column: Vec<f64> = samples.iter().map(|s| s[c]).collect();
            let (mean, se) = mean_stderr(&column);
            regret.push(mean);
            stderr.push(se);
        }
        let regret_over_log = checkpoints
            .iter()
            .zip(&regret)
            .map(|(&t, &r)| (t >= 2).then(|| r / (t as f64).ln()))
            .collect();
        Self {
            checkpoints,
            regret,
            stderr,
            regret_over_log,
        }
    }

    pub fn final_regret(&self) -> Option<f64> {
        self.regret.last().copied()
    }

    /// Regret accrued in the checkpoint window `(from, to]`.
    pub fn regret_between(&self, from: u64, to: u64) -> Option<f64> {
        let at = |t: u64| -> Option<f64> {
            if t == 0 {
                return Some(0.0);
            }
            self.checkpoints
                .binary_search(&t)
                .ok()
                .map(|i| self.regret[i])
        };
        Some(at(to)? - at(from)?)
    }
}

/// Sample mean and its standard error (0 for fewer than two samples).
///
/// Deviations are taken from the first sample, so identical samples give an
/// exact zero rather than rounding noise.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let Some(&pivot) = xs.first() else {
        return (f64::NAN, f64::NAN);
    };
    let n = xs.len() as f64;
    let shift = xs.iter().map(|x| x - pivot).sum::<f64>() / n;
    let mean = pivot + shift;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - pivot - shift).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_trials(trajectories: &[Trajectory]) -> Result<&Trajectory> {
    let first = trajectories.first().ok_or(Error::EmptyTrialSet)?;
    if trajectories
        .iter()
        .any(|t| t.checkpoints != first.checkpoints || t.players() != first.players())
    {
        return Err(Error::Validation(
            "trajectories do not share a configuration".into(),
        ));
    }
    Ok(first)
}

/// Per-trial realized system regret at each checkpoint.
pub fn system_regret_samples(
    trajectories: &[Trajectory],
    params: &ParameterSet,
    m: usize,
) -> Result<Vec<Vec<f64>>> {
    let first = check_trials(trajectories)?;
    let best = rank_arms(params, m)?.top_sum(m);
    Ok(trajectories
        .iter()
        .map(|tr| {
            first
                .checkpoints
                .iter()
                .zip(&tr.system_reward)
                .map(|(&t, &y)| t as f64 * best - y)
                .collect()
        })
        .collect())
}

/// `R_t = t Σ_{j≤M} μ_σ(j) − E[Σ Y(s)]`, estimated by the mean across trials.
pub fn system_regret(
    trajectories: &[Trajectory],
    params: &ParameterSet,
    m: usize,
) -> Result<RegretCurve> {
    let samples = system_regret_samples(trajectories, params, m)?;
    Ok(RegretCurve::from_samples(
        trajectories[0].checkpoints.clone(),
        &samples,
    ))
}

/// Each player's local regret `(t/M) Σ_{j≤M} μ_σ(j) − E[Σ Y_i(s)]`.
pub fn per_player_regret(
    trajectories: &[Trajectory],
    params: &ParameterSet,
    m: usize,
) -> Result<Vec<RegretCurve>> {
    let first = check_trials(trajectories)?;
    let share = rank_arms(params, m)?.top_sum(m) / m as f64;
    Ok((0..first.players())
        .map(|p| {
            let samples: Vec<Vec<f64>> = trajectories
                .iter()
                .map(|tr| {
                    first
                        .checkpoints
                        .iter()
                        .zip(&tr.player_reward[p])
                        .map(|(&t, &y)| t as f64 * share - y)
                        .collect()
                })
                .collect();
            RegretCurve::from_samples(first.checkpoints.clone(), &samples)
        })
        .collect())
}

/// `R_T / ln T` at the final checkpoint.
pub fn leading_constant_estimate(curve: &RegretCurve) -> Result<f64> {
    match (curve.checkpoints.last(), curve.regret_over_log.last()) {
        (Some(&t), Some(Some(v))) if t >= 2 => Ok(*v),
        _ => Err(Error::Validation(
            "leading constant needs a final checkpoint t >= 2".into(),
        )),
    }
}

struct Ranked<'a> {
    params: &'a ParameterSet,
    rank: ArmRank,
}

impl<'a> Ranked<'a> {
    fn new(params: &'a ParameterSet, m: usize) -> Result<Self> {
        Ok(Self {
            params,
            rank: rank_arms(params, m)?,
        })
    }

    fn mu(&self, arm: usize) -> f64 {
        self.rank.means()[arm]
    }

    /// Arms strictly below rank `r` in mean.
    fn below(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        let cut = self.rank.mean_at(r);
        (0..self.params.arms()).filter(move |&j| self.mu(j) < cut)
    }

    /// `1 / I(θ_j, θ_σ(r))`.
    fn inv_kl(&self, j: usize, r: usize) -> Result<f64> {
        Ok(1.0 / self.params.kl(j, self.rank.arm_at(r))?)
    }

    /// `Σ_{j below rank m} (μ_σ(m) − μ_j) / I(θ_j, θ_σ(i))`.
    fn gap_sum(&self, m: usize, i: usize) -> Result<f64> {
        let top = self.rank.mean_at(m);
        self.below(m)
            .map(|j| Ok((top - self.mu(j)) * self.inv_kl(j, i)?))
            .sum()
    }

    fn x(&self, k: usize) -> Result<f64> {
        let mut total = 0.0;
        for i in 1..=k {
            for j in self.below(i) {
                total += self.inv_kl(j, i)?;
            }
        }
        Ok(total)
    }
}

/// Lower-bound constant for any uniformly good policy (centralized benchmark).
pub fn centralized_constant(params: &ParameterSet, m: usize) -> Result<f64> {
    let r = Ranked::new(params, m)?;
    r.gap_sum(m, m)
}

/// Lower-bound constant for uniformly good policies in the time-division-selection class.
pub fn tds_constant(params: &ParameterSet, m: usize) -> Result<f64> {
    let r = Ranked::new(params, m)?;
    let mut total = 0.0;
    for i in 1..=m {
        total += r.gap_sum(m, i)?;
    }
    Ok(total)
}

/// `x_k` for `1 <= k <= m`.
pub fn x_k(params: &ParameterSet, m: usize, k: usize) -> Result<f64> {
    if k == 0 || k > m {
        return Err(Error::Validation(format!(
            "x_k needs 1 <= k <= M, got k = {k}, M = {m}"
        )));
    }
    Ranked::new(params, m)?.x(k)
}

/// Upper constant `C(Θ)` on `limsup R_T / ln T` under TDFS.
///
/// Share model: `M (Σ_i x_i μ_i − Σ_{n below M} μ_n / I(θ_n, θ_σ(M)))`.
/// No-reward model: `M (Σ_i Σ_k x_k μ_i − Σ_{n below M} μ_n max{1/I(θ_n, θ_σ(M)) − Σ_{i<M} 1/I(θ_n, θ_σ(i)), 0})`.
pub fn upper_constant(params: &ParameterSet, m: usize, model: CollisionModel) -> Result<f64> {
    let r = Ranked::new(params, m)?;
    let xs = (1..=m).map(|k| r.x(k)).collect::<Result<Vec<_>>>()?;
    let mu_top: Vec<f64> = (1..=m).map(|i| r.rank.mean_at(i)).collect();
    let value = match model {
        CollisionModel::Share => {
            let gain: f64 = xs.iter().zip(&mu_top).map(|(x, mu)| x * mu).sum();
            let mut credit = 0.0;
            for n in r.below(m) {
                credit += r.mu(n) * r.inv_kl(n, m)?;
            }
            gain - credit
        }
        CollisionModel::NoReward => {
            let gain = xs.iter().sum::<f64>() * mu_top.iter().sum::<f64>();
            let mut credit = 0.0;
            for n in r.below(m) {
                let mut spare = r.inv_kl(n, m)?;
                for i in 1..m {
                    spare -= r.inv_kl(n, i)?;
                }
                credit += r.mu(n) * spare.max(0.0);
            }
            gain - credit
        }
    };
    Ok(m as f64 * value)
}

/// All analytic constants for `(Θ, M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub centralized_constant: f64,
    pub tds_constant: f64,
    pub upper_model1: f64,
    pub upper_model2: f64,
    /// `x_1 … x_M`.
    pub x: Vec<f64>,
}

pub fn bound_report(params: &ParameterSet, m: usize) -> Result<BoundReport> {
    Ok(BoundReport {
        centralized_constant: centralized_constant(params, m)?,
        tds_constant: tds_constant(params, m)?,
        upper_model1: upper_constant(params, m, CollisionModel::Share)?,
        upper_model2: upper_constant(params, m, CollisionModel::NoReward)?,
        x: (1..=m).map(|k| x_k(params, m, k)).collect::<Result<_>>()?,
    })
}
