//! Experiment configuration documents (TOML).
//!
//! ```toml
//! players = 2
//! horizon = 5000
//! trials = 200
//! seed = 4
//! policy = "lai-robbins"          # or one entry per player
//! collision_model = "no-reward"
//!
//! [family]
//! kind = "bernoulli"
//!
//! [theta]                         # or: theta = [0.1, 0.5, 0.9]
//! start = 0.1
//! step = 0.1
//! count = 9
//! ```

use std::fmt;
use std::path::PathBuf;

use decbandit::arena::{CheckpointPlan, CollisionModel, Environment, PlayerPresence, TrialSetup};
use decbandit::policy::{check_delta, default_delta, BasePolicy};
use decbandit::reward::{rank_arms, ParameterSet, RewardFamily};
use decbandit::tdfs::{TdfsConfig, MAX_ARMS};
use serde::Deserialize;

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Bernoulli,
    Gaussian,
    Poisson,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub sigma: Option<f64>,
    /// Poisson upper bound on θ; defaults to the largest θ.
    pub a: Option<f64>,
    /// Exponential upper bound on θ; defaults to the largest θ.
    pub b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Values(Vec<f64>),
    Arithmetic(Arithmetic),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arithmetic {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl ThetaSpec {
    pub fn expand(&self) -> Vec<f64> {
        match self {
            Self::Values(v) => v.clone(),
            Self::Arithmetic(a) => (0..a.count).map(|i| a.start + a.step * i as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Values(v) => v.len(),
            Self::Arithmetic(a) => a.count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Shared(BasePolicy),
    PerPlayer(Vec<BasePolicy>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointKind {
    /// Dense up to 10^4 slots, geometric beyond.
    #[default]
    Auto,
    Dense,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilySpec,
    pub theta: ThetaSpec,
    pub players: usize,
    pub horizon: u64,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "lai_robbins")]
    pub policy: PolicySpec,
    #[serde(default = "yes")]
    pub coupled: bool,
    #[serde(default = "yes")]
    pub pre_agreement: bool,
    /// Defaults to `1 / (2N)`.
    pub delta: Option<f64>,
    pub collision_model: CollisionModel,
    #[serde(default)]
    pub presence: Vec<PlayerPresence>,
    #[serde(default)]
    pub checkpoints: CheckpointKind,
    pub checkpoint_ratio: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn lai_robbins() -> PolicySpec {
    PolicySpec::Shared(BasePolicy::LaiRobbins)
}

/// One validation failure, tied to the key it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

struct Issues(Vec<Issue>);

impl Issues {
    fn push(&mut self, key: impl Into<String>, message: impl fmt::Display) {
        self.0.push(Issue {
            key: key.into(),
            message: message.to_string(),
        });
    }
}

/// Parses and validates a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, BenchError> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| BenchError::Parse(e.to_string()))?;
    cfg.check()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text)
}

impl ExperimentConfig {
    pub fn arms(&self) -> usize {
        self.theta.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| default_delta(self.arms()))
    }

    pub fn policies(&self) -> Vec<BasePolicy> {
        match &self.policy {
            PolicySpec::Shared(p) => vec![*p; self.players],
            PolicySpec::PerPlayer(v) => v.clone(),
        }
    }

    pub fn family(&self) -> RewardFamily {
        let theta = self.theta.expand();
        let max = theta.iter().copied().fold(f64::NAN, f64::max);
        match self.family.kind {
            FamilyKind::Bernoulli => RewardFamily::Bernoulli,
            FamilyKind::Gaussian => RewardFamily::Gaussian {
                sigma: self.family.sigma.unwrap_or(1.0),
            },
            FamilyKind::Poisson => RewardFamily::Poisson {
                a: self.family.a.unwrap_or(max),
            },
            FamilyKind::Exponential => RewardFamily::Exponential {
                b: self.family.b.unwrap_or(max),
            },
        }
    }

    pub fn params(&self) -> Result<ParameterSet, BenchError> {
        Ok(ParameterSet::new(self.family(), self.theta.expand())?)
    }

    pub fn checkpoint_plan(&self) -> CheckpointPlan {
        match self.checkpoints {
            CheckpointKind::Auto => CheckpointPlan::auto(self.horizon),
            CheckpointKind::Dense => CheckpointPlan::Dense,
            CheckpointKind::Geometric => CheckpointPlan::Geometric {
                ratio: self.checkpoint_ratio.unwrap_or(1.01),
            },
        }
    }

    /// Copy with `N` arms; an arithmetic θ is re-expanded to the new length.
    pub fn with_arms(&self, n: usize) -> Result<Self, BenchError> {
        let ThetaSpec::Arithmetic(a) = self.theta else {
            return Err(BenchError::invalid(
                "theta",
                "sweeping N needs an arithmetic theta {start, step, count}",
            ));
        };
        let mut cfg = self.clone();
        cfg.theta = ThetaSpec::Arithmetic(Arithmetic { count: n, ..a });
        // a default delta follows N
        cfg.check()?;
        Ok(cfg)
    }

    pub fn with_players(&self, m: usize) -> Result<Self, BenchError> {
        let mut cfg = self.clone();
        cfg.players = m;
        if cfg.presence.len() > m {
            cfg.presence.truncate(m);
        }
        if let PolicySpec::PerPlayer(v) = &cfg.policy {
            if v.len() != m {
                return Err(BenchError::invalid(
                    "policy",
                    "a per-player policy list cannot be swept over M",
                ));
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Builds the trial setup every trial of this experiment runs.
    pub fn setup(&self) -> Result<TrialSetup, BenchError> {
        let params = self.params()?;
        let tdfs = TdfsConfig {
            players: self.players,
            arms: self.arms(),
            coupled: self.coupled,
            pre_agreement: self.pre_agreement,
            delta: self.delta(),
        };
        let mut presence = self.presence.clone();
        presence.resize(self.players, PlayerPresence::always());
        let setup = TrialSetup {
            env: Environment::common(params),
            tdfs,
            policies: self.policies(),
            model: self.collision_model,
            presence,
            horizon: self.horizon,
            checkpoints: self.checkpoint_plan(),
        };
        setup.validate()?;
        Ok(setup)
    }

    /// Every semantic problem with the document, not just the first.
    pub fn issues(&self) -> Vec<Issue> {
        let mut out = Issues(Vec::new());
        let n = self.arms();
        let m = self.players;

        if self.trials < 1 {
            out.push("trials", "must be >= 1");
        }
        if self.horizon < 1 {
            out.push("horizon", "must be >= 1");
        }

        let spec = &self.family;
        let kind = spec.kind;
        for (key, value, owner) in [
            ("family.sigma", spec.sigma, FamilyKind::Gaussian),
            ("family.a", spec.a, FamilyKind::Poisson),
            ("family.b", spec.b, FamilyKind::Exponential),
        ] {
            if value.is_some() && kind != owner {
                out.push(
                    key,
                    format!("not used by the {kind:?} family").to_lowercase(),
                );
            }
        }
        let family_ok = match self.family().validate() {
            Ok(()) => true,
            Err(e) => {
                let key = match kind {
                    FamilyKind::Gaussian => "family.sigma",
                    FamilyKind::Poisson => "family.a",
                    FamilyKind::Exponential => "family.b",
                    FamilyKind::Bernoulli => "family",
                };
                out.push(key, e);
                false
            }
        };

        if let ThetaSpec::Arithmetic(a) = self.theta {
            if !(a.start.is_finite() && a.step.is_finite()) {
                out.push("theta", "start and step must be finite");
            }
        }
        if n < 2 {
            out.push("theta", format!("needs at least 2 arms, got {n}"));
        }
        if n > MAX_ARMS {
            out.push(
                "theta",
                format!("at most {MAX_ARMS} arms are supported, got {n}"),
            );
        }
        let theta = self.theta.expand();
        let mut theta_ok = family_ok;
        if family_ok {
            let family = self.family();
            for (i, &t) in theta.iter().enumerate() {
                if let Err(e) = family.check_theta(t) {
                    out.push(format!("theta[{i}]"), e);
                    theta_ok = false;
                }
            }
        }

        if m == 0 || m >= n {
            out.push(
                "players",
                format!("must satisfy 1 <= M < N, got M = {m}, N = {n}"),
            );
        } else if theta_ok && n >= 2 {
            if let Ok(params) = ParameterSet::new(self.family(), theta) {
                if let Err(e) = rank_arms(&params, m) {
                    out.push("theta", e);
                }
            }
        }

        if let Some(d) = self.delta {
            if n >= 1 {
                if let Err(e) = check_delta(d, n) {
                    out.push("delta", e);
                }
            }
        }

        if let PolicySpec::PerPlayer(v) = &self.policy {
            if v.len() != m {
                out.push(
                    "policy",
                    format!("lists {} policies for {m} players", v.len()),
                );
            }
        }

        if self.presence.len() > m {
            out.push(
                "presence",
                format!("has {} entries for {m} players", self.presence.len()),
            );
        }
        for (i, p) in self.presence.iter().enumerate() {
            if let Err(e) = p.validate() {
                out.push(format!("presence[{i}]"), e);
            }
        }

        match (self.checkpoints, self.checkpoint_ratio) {
            (CheckpointKind::Geometric, Some(r)) if !(r > 1.0 && r.is_finite()) => {
                out.push("checkpoint_ratio", format!("must exceed 1, got {r}"));
            }
            (CheckpointKind::Auto | CheckpointKind::Dense, Some(_)) => {
                out.push(
                    "checkpoint_ratio",
                    "only used with checkpoints = \"geometric\"",
                );
            }
            _ => {}
        }
        out.0
    }

    pub fn check(&self) -> Result<(), BenchError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(BenchError::Invalid(issues))
        }
    }
}
