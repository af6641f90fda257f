//! Multi-player environment and trial loop.
//!
//! Every slot the environment draws a state for each arm, each present player
//! picks an arm, and collisions are resolved under one of two models:
//!
//! * [`CollisionModel::Share`]: an arm chosen by at least one player yields
//!   its state once, credited to one chooser drawn uniformly at random.
//! * [`CollisionModel::NoReward`]: an arm chosen by two or more players yields
//!   nothing.
//!
//! Players always sense the state of the arm they chose, collision or not.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::policy::BasePolicy;
use crate::reward::{rank_arms, ArmSampler, ParameterSet, RewardFamily};
use crate::rng::{self, StreamRng, ARBITER_STREAM, ENVIRONMENT_STREAM};
use crate::tdfs::{TdfsConfig, TdfsPlayer};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollisionModel {
    /// Model 1: colliders share the reward (one uniformly drawn winner).
    #[serde(rename = "share")]
    Share,
    /// Model 2: colliders all get nothing.
    #[serde(rename = "no-reward")]
    NoReward,
}

impl CollisionModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Share => "share",
            Self::NoReward => "no-reward",
        }
    }
}

/// When a player is in the system. Slots are 1-based; absence windows are
/// inclusive `(first, last)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlayerPresence {
    pub join_time: u64,
    #[serde(default)]
    pub absences: Vec<(u64, u64)>,
}

impl PlayerPresence {
    pub fn always() -> Self {
        Self {
            join_time: 1,
            absences: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.join_time < 1 {
            return Err(Error::Config("join_time must be >= 1".into()));
        }
        let mut windows = self.absences.clone();
        windows.sort_unstable();
        let mut last_end = self.join_time;
        for (i, &(start, end)) in windows.iter().enumerate() {
            if start > end {
                return Err(Error::Config(format!(
                    "absence window ({start}, {end}) is reversed"
                )));
            }
            if start <= self.join_time {
                return Err(Error::Config(format!(
                    "absence window ({start}, {end}) must start after join_time {}",
                    self.join_time
                )));
            }
            if i > 0 && start <= last_end {
                return Err(Error::Config(format!(
                    "absence window ({start}, {end}) overlaps a previous window"
                )));
            }
            last_end = end;
        }
        Ok(())
    }

    pub fn is_present(&self, t: u64) -> bool {
        t >= self.join_time && !self.absences.iter().any(|&(s, e)| (s..=e).contains(&t))
    }
}

/// Arm states drawn in one slot, either shared by all players or one row per player.
#[derive(Debug, Clone, PartialEq)]
pub enum ArmStates {
    Common(Vec<f64>),
    PerPlayer(Vec<Vec<f64>>),
}

impl ArmStates {
    pub fn get(&self, player: usize, arm: usize) -> f64 {
        match self {
            Self::Common(s) => s[arm],
            Self::PerPlayer(rows) => rows[player][arm],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub states: ArmStates,
    /// `None` for absent players.
    pub actions: Vec<Option<usize>>,
    pub observations: Vec<Option<f64>>,
    pub collided: Vec<bool>,
    pub rewards: Vec<f64>,
    pub system_reward: f64,
}

impl SlotOutcome {
    /// Arms chosen by two or more players.
    pub fn collided_arms(&self) -> BTreeSet<usize> {
        self.actions
            .iter()
            .zip(&self.collided)
            .filter_map(|(a, &c)| if c { *a } else { None })
            .collect()
    }
}

/// Resolves one slot given the actions of present players.
pub fn resolve<R: Rng + ?Sized>(
    actions: &[Option<usize>],
    states: ArmStates,
    model: CollisionModel,
    rng: &mut R,
) -> SlotOutcome {
    let players = actions.len();
    let mut choosers: Vec<(usize, Vec<usize>)> = Vec::new();
    for (p, a) in actions.iter().enumerate() {
        if let Some(arm) = *a {
            match choosers.iter_mut().find(|(x, _)| *x == arm) {
                Some((_, who)) => who.push(p),
                None => choosers.push((arm, vec![p])),
            }
        }
    }

    let mut collided = vec![false; players];
    let mut rewards = vec![0.0; players];
    for (arm, who) in &choosers {
        if who.len() == 1 {
            let p = who[0];
            rewards[p] = states.get(p, *arm);
            continue;
        }
        for &p in who {
            collided[p] = true;
        }
        if model == CollisionModel::Share {
            let winner = who[rng.random_range(0..who.len())];
            rewards[winner] = states.get(winner, *arm);
        }
    }

    let observations = actions
        .iter()
        .enumerate()
        .map(|(p, a)| a.map(|arm| states.get(p, arm)))
        .collect();
    let system_reward = rewards.iter().sum();
    SlotOutcome {
        states,
        actions: actions.to_vec(),
        observations,
        collided,
        rewards,
        system_reward,
    }
}

/// Anything that can play in the arena.
pub trait Agent {
    fn act(&mut self) -> usize;

    /// Feedback for the slot just played; `rng` is this agent's private stream.
    fn feedback(&mut self, arm: usize, observation: f64, collided: bool, rng: &mut StreamRng);

    /// Rank targeted in the last slot, for agents that time-share ranks.
    fn target_rank(&self) -> Option<usize> {
        None
    }

    fn offset(&self) -> Option<usize> {
        None
    }

    fn regenerations(&self) -> u64 {
        0
    }
}

impl Agent for TdfsPlayer {
    fn act(&mut self) -> usize {
        self.step()
    }

    fn feedback(&mut self, arm: usize, observation: f64, collided: bool, rng: &mut StreamRng) {
        self.observe(arm, observation, collided);
        if self.at_round_boundary() {
            self.offset_round_end(rng);
        }
    }

    fn target_rank(&self) -> Option<usize> {
        Some(TdfsPlayer::target_rank(self))
    }

    fn offset(&self) -> Option<usize> {
        Some(TdfsPlayer::offset(self))
    }

    fn regenerations(&self) -> u64 {
        TdfsPlayer::regenerations(self)
    }
}

/// How arm states are produced each slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateDraw {
    /// Independent draws from each arm's distribution.
    #[default]
    Random,
    /// Every state equals its arm's mean (a noiseless oracle environment).
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    /// One parameter set shared by everyone, or one per player.
    params: Vec<ParameterSet>,
    per_player: bool,
    draw: StateDraw,
}

impl Environment {
    pub fn common(params: ParameterSet) -> Self {
        Self {
            params: vec![params],
            per_player: false,
            draw: StateDraw::Random,
        }
    }

    /// One parameter set per player. All must share the family, the arm count,
    /// the set of `m` best arms and the means of those arms.
    pub fn per_player(params: Vec<ParameterSet>, m: usize) -> Result<Self> {
        if params.len() != m {
            return Err(Error::Validation(format!(
                "{} per-player parameter sets for {m} players",
                params.len()
            )));
        }
        let first = &params[0];
        let reference = rank_arms(first, m)?;
        let mut top: Vec<usize> = reference.top(m).to_vec();
        top.sort_unstable();
        for (p, set) in params.iter().enumerate().skip(1) {
            if set.family() != first.family() || set.arms() != first.arms() {
                return Err(Error::Validation(format!(
                    "player {} uses a different family or arm count",
                    p + 1
                )));
            }
            let rank = rank_arms(set, m)?;
            let mut other: Vec<usize> = rank.top(m).to_vec();
            other.sort_unstable();
            if other != top {
                return Err(Error::Validation(format!(
                    "player {} has a different set of the {m} best arms",
                    p + 1
                )));
            }
            for &arm in &top {
                if rank.means()[arm] != reference.means()[arm] {
                    return Err(Error::Validation(format!(
                        "player {} sees mean {} on top arm {} instead of {}",
                        p + 1,
                        rank.means()[arm],
                        arm + 1,
                        reference.means()[arm]
                    )));
                }
            }
        }
        Ok(Self {
            params,
            per_player: true,
            draw: StateDraw::Random,
        })
    }

    pub fn with_draw(mut self, draw: StateDraw) -> Self {
        self.draw = draw;
        self
    }

    /// The reference parameter set (player 1's when per-player).
    pub fn params(&self) -> &ParameterSet {
        &self.params[0]
    }

    pub fn family(&self) -> RewardFamily {
        self.params[0].family()
    }

    pub fn arms(&self) -> usize {
        self.params[0].arms()
    }

    pub fn is_per_player(&self) -> bool {
        self.per_player
    }
}

struct StateSource {
    samplers: Vec<Vec<ArmSampler>>,
    means: Vec<Vec<f64>>,
    per_player: bool,
    draw: StateDraw,
    players: usize,
}

impl StateSource {
    fn new(env: &Environment, players: usize) -> Self {
        Self {
            samplers: env.params.iter().map(ParameterSet::samplers).collect(),
            means: env.params.iter().map(ParameterSet::means).collect(),
            per_player: env.per_player,
            draw: env.draw,
            players,
        }
    }

    fn draw(&self, rng: &mut StreamRng) -> ArmStates {
        let row = |i: usize, rng: &mut StreamRng| -> Vec<f64> {
            match self.draw {
                StateDraw::Random => self.samplers[i].iter().map(|s| s.sample(rng)).collect(),
                StateDraw::Mean => self.means[i].clone(),
            }
        };
        if self.per_player {
            ArmStates::PerPlayer((0..self.players).map(|p| row(p, rng)).collect())
        } else {
            ArmStates::Common(row(0, rng))
        }
    }
}

/// Which slots the cumulative series are recorded at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointPlan {
    Dense,
    /// Roughly geometric spacing with the given ratio (always includes 1 and T).
    Geometric {
        ratio: f64,
    },
}

pub const DENSE_LIMIT: u64 = 10_000;

impl CheckpointPlan {
    /// Dense up to 10^4 slots, geometric beyond.
    pub fn auto(horizon: u64) -> Self {
        if horizon <= DENSE_LIMIT {
            Self::Dense
        } else {
            Self::Geometric { ratio: 1.01 }
        }
    }

    pub fn points(self, horizon: u64) -> Vec<u64> {
        match self {
            Self::Dense => (1..=horizon).collect(),
            Self::Geometric { ratio } => {
                let mut pts = vec![1];
                let mut t = 1u64;
                while t < horizon {
                    t = ((t as f64 * ratio).ceil() as u64).max(t + 1).min(horizon);
                    pts.push(t);
                }
                pts
            }
        }
    }
}

/// Aggregates of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
    /// Cumulative `Y(t)` at each checkpoint.
    pub system_reward: Vec<f64>,
    /// `player_reward[p][c]`: cumulative `Y_p(t)` at checkpoint `c`.
    pub player_reward: Vec<Vec<f64>>,
    /// Cumulative number of collided arms at each checkpoint.
    pub collisions: Vec<u64>,
    /// `plays[p][arm]`.
    pub plays: Vec<Vec<u64>>,
    pub arm_collisions: Vec<u64>,
    pub present_slots: Vec<u64>,
    pub regenerations: Vec<u64>,
    /// Last slot in which two present players targeted the same rank.
    pub last_rank_conflict: Option<u64>,
    pub final_offsets: Vec<Option<usize>>,
}

impl Trajectory {
    pub fn players(&self) -> usize {
        self.player_reward.len()
    }

    pub fn total_system_reward(&self) -> f64 {
        *self.system_reward.last().unwrap_or(&0.0)
    }

    pub fn total_collisions(&self) -> u64 {
        *self.collisions.last().unwrap_or(&0)
    }

    /// Cumulative collisions at slot `t` (must be a checkpoint).
    pub fn collisions_at(&self, t: u64) -> Option<u64> {
        self.checkpoints
            .binary_search(&t)
            .ok()
            .map(|i| self.collisions[i])
    }
}

/// Everything a TDFS trial needs except the seed.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub env: Environment,
    pub tdfs: TdfsConfig,
    /// One base policy per player.
    pub policies: Vec<BasePolicy>,
    pub model: CollisionModel,
    pub presence: Vec<PlayerPresence>,
    pub horizon: u64,
    pub checkpoints: CheckpointPlan,
}

impl TrialSetup {
    /// All players present throughout, dense/geometric checkpoints chosen automatically.
    pub fn new(
        env: Environment,
        tdfs: TdfsConfig,
        policy: BasePolicy,
        model: CollisionModel,
        horizon: u64,
    ) -> Result<Self> {
        let setup = Self {
            policies: vec![policy; tdfs.players],
            presence: vec![PlayerPresence::always(); tdfs.players],
            checkpoints: CheckpointPlan::auto(horizon),
            env,
            tdfs,
            model,
            horizon,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        self.tdfs.validate()?;
        let m = self.tdfs.players;
        if self.env.arms() != self.tdfs.arms {
            return Err(Error::Config(format!(
                "environment has {} arms but the policy expects {}",
                self.env.arms(),
                self.tdfs.arms
            )));
        }
        rank_arms(self.env.params(), m)?;
        if self.policies.len() != m || self.presence.len() != m {
            return Err(Error::Config(format!(
                "need one policy and one presence entry per player (M = {m})"
            )));
        }
        if self.env.is_per_player() && self.env.params.len() != m {
            return Err(Error::Config(
                "per-player parameter sets must match M".into(),
            ));
        }
        for p in &self.presence {
            p.validate()?;
        }
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if let CheckpointPlan::Geometric { ratio } = self.checkpoints {
            if !(ratio > 1.0 && ratio.is_finite()) {
                return Err(Error::Config(format!(
                    "geometric checkpoint ratio {ratio} must exceed 1"
                )));
            }
        }
        Ok(())
    }

    /// Runs one TDFS trial; bit-deterministic in `(self, seed)`.
    pub fn run(&self, seed: u64) -> Result<Trajectory> {
        self.validate()?;
        let mut rngs: Vec<StreamRng> = (0..self.tdfs.players)
            .map(|p| rng::player_stream(seed, p))
            .collect();
        let players = rngs
            .iter_mut()
            .enumerate()
            .map(|(p, rng)| TdfsPlayer::new(p, self.tdfs, self.policies[p], self.env.family(), rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(run_agents(
            &self.env,
            players,
            rngs,
            self.model,
            &self.presence,
            self.horizon,
            self.checkpoints,
            seed,
        ))
    }
}

/// Runs arbitrary agents in the arena.
///
/// `rngs[p]` is agent `p`'s private stream; the environment and the collision
/// arbiter draw from streams derived from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn run_agents<A: Agent>(
    env: &Environment,
    mut agents: Vec<A>,
    mut rngs: Vec<StreamRng>,
    model: CollisionModel,
    presence: &[PlayerPresence],
    horizon: u64,
    plan: CheckpointPlan,
    seed: u64,
) -> Trajectory {
    let m = agents.len();
    let n = env.arms();
    assert_eq!(rngs.len(), m);
    assert_eq!(presence.len(), m);
    let source = StateSource::new(env, m);
    let mut env_rng = rng::stream(seed, ENVIRONMENT_STREAM);
    let mut arbiter = rng::stream(seed, ARBITER_STREAM);

    let checkpoints = plan.points(horizon);
    let mut traj = Trajectory {
        horizon,
        checkpoints: checkpoints.clone(),
        system_reward: Vec::with_capacity(checkpoints.len()),
        player_reward: vec![Vec::with_capacity(checkpoints.len()); m],
        collisions: Vec::with_capacity(checkpoints.len()),
        plays: vec![vec![0; n]; m],
        arm_collisions: vec![0; n],
        present_slots: vec![0; m],
        regenerations: vec![0; m],
        last_rank_conflict: None,
        final_offsets: vec![None; m],
    };

    let mut cum_system = 0.0;
    let mut cum_player = vec![0.0; m];
    let mut cum_collisions = 0u64;
    let mut next_cp = 0usize;
    let mut actions = vec![None; m];
    let mut ranks_seen = Vec::with_capacity(m);

    for t in 1..=horizon {
        let states = source.draw(&mut env_rng);
        for (p, agent) in agents.iter_mut().enumerate() {
            actions[p] = presence[p].is_present(t).then(|| agent.act());
        }
        let outcome = resolve(&actions, states, model, &mut arbiter);

        ranks_seen.clear();
        for (p, agent) in agents.iter_mut().enumerate() {
            let Some(arm) = actions[p] else { continue };
            let obs = outcome.observations[p].expect("present player observes");
            agent.feedback(arm, obs, outcome.collided[p], &mut rngs[p]);
            traj.plays[p][arm] += 1;
            traj.present_slots[p] += 1;
            cum_player[p] += outcome.rewards[p];
            if let Some(r) = agent.target_rank() {
                ranks_seen.push(r);
            }
        }
        ranks_seen.sort_unstable();
        if ranks_seen.windows(2).any(|w| w[0] == w[1]) {
            traj.last_rank_conflict = Some(t);
        }
        for arm in outcome.collided_arms() {
            traj.arm_collisions[arm] += 1;
            cum_collisions += 1;
        }
        cum_system += outcome.system_reward;

        if next_cp < checkpoints.len() && checkpoints[next_cp] == t {
            traj.system_reward.push(cum_system);
            for (series, &total) in traj.player_reward.iter_mut().zip(&cum_player) {
                series.push(total);
            }
            traj.collisions.push(cum_collisions);
            next_cp += 1;
        }
    }
    for (p, agent) in agents.iter().enumerate() {
        traj.regenerations[p] = agent.regenerations();
        traj.final_offsets[p] = agent.offset();
    }
    traj
}
