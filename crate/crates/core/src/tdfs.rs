//! Time-division fair sharing (TDFS).
//!
//! Each player splits its local time into `M` interleaved subsequences and,
//! in subsequence `k`, targets the `j`-th best arm with `j` determined by `k`
//! and the player's offset. Players with distinct offsets therefore target
//! distinct ranks in every slot, and each player cycles through all `M` ranks.
//!
//! A rank-`j` slot (`j > 1`) belongs to the mini-sequence keyed by the arms the
//! player did *not* play in its previous `j - 1` slots (the arms it just
//! deemed better). Inside that arm subset the embedded single-player policy
//! looks for the best arm, which is the `j`-th best overall.
//!
//! Statistics are either shared by all of a player's sequences (coupled) or
//! kept per `(offset, arm subset)` context (uncoupled). Without pre-agreement
//! a player draws its offset at random and redraws it after any round of `M`
//! acted slots in which it observed a collision.

use std::collections::HashMap;

use rand::Rng;

use crate::policy::{check_delta, ArmStatistics, BasePolicy, SelectionRule, SinglePlayerPolicy};
use crate::reward::RewardFamily;
use crate::{Error, Result};

/// `k ⊘ l = ((k - 1) mod l) + 1`, a 1-based modulus.
pub fn oslash(k: u64, l: u64) -> u64 {
    assert!(
        k >= 1 && l >= 1,
        "oslash needs positive operands ({k}, {l})"
    );
    (k - 1) % l + 1
}

/// Rank (1-based) targeted in subsequence `k` by the player with `offset`:
/// `(k - i + M + 1) ⊘ M` with `i = offset + 1`.
pub fn target_rank(k: usize, offset: usize, m: usize) -> usize {
    debug_assert!((1..=m).contains(&k) && offset < m);
    oslash((k + m - offset) as u64, m as u64) as usize
}

/// A subset of at most 64 arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArmSet(u64);

pub const MAX_ARMS: usize = 64;

impl ArmSet {
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_ARMS);
        if n == MAX_ARMS {
            Self(u64::MAX)
        } else {
            Self((1u64 << n) - 1)
        }
    }

    pub fn contains(self, arm: usize) -> bool {
        self.0 >> arm & 1 == 1
    }

    pub fn remove(self, arm: usize) -> Self {
        Self(self.0 & !(1u64 << arm))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Members in ascending order.
    pub fn arms(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..MAX_ARMS).filter(move |&a| bits >> a & 1 == 1)
    }
}

/// The arm subset a rank-`rank` slot works on: all `n` arms minus the distinct
/// arms among the last `rank - 1` entries of `recent`.
pub fn mini_sequence_key(recent: &[usize], rank: usize, n: usize) -> ArmSet {
    let take = rank.saturating_sub(1).min(recent.len());
    recent[recent.len() - take..]
        .iter()
        .fold(ArmSet::full(n), |set, &a| set.remove(a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdfsConfig {
    /// Number of players `M`.
    pub players: usize,
    /// Number of arms `N`.
    pub arms: usize,
    pub coupled: bool,
    pub pre_agreement: bool,
    pub delta: f64,
}

impl TdfsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.players == 0 || self.players >= self.arms {
            return Err(Error::Config(format!(
                "players M = {} must satisfy 1 <= M < N = {}",
                self.players, self.arms
            )));
        }
        if self.arms > MAX_ARMS {
            return Err(Error::Config(format!(
                "at most {MAX_ARMS} arms are supported, got {}",
                self.arms
            )));
        }
        check_delta(self.delta, self.arms)
    }
}

type ContextKey = (usize, ArmSet);

#[derive(Debug, Clone, Copy)]
struct PendingAction {
    arm: usize,
    offset: usize,
    /// Context whose statistics the observation also feeds (uncoupled mode).
    context: Option<ArmSet>,
}

/// One player's TDFS state.
#[derive(Debug, Clone)]
pub struct TdfsPlayer {
    id: usize,
    cfg: TdfsConfig,
    policy: SinglePlayerPolicy,
    offset: usize,
    acted: u64,
    global_stats: Vec<ArmStatistics>,
    context_stats: HashMap<ContextKey, Vec<ArmStatistics>>,
    /// `subseq_counters[offset][k - 1]` = m_k for that offset.
    subseq_counters: Vec<Vec<u64>>,
    mini_counters: HashMap<ContextKey, u64>,
    recent_actions: Vec<usize>,
    round_collision: bool,
    regenerations: u64,
    target: usize,
    pending: Option<PendingAction>,
    eligible: Vec<usize>,
}

impl TdfsPlayer {
    /// Creates player `id` (0-based). Without pre-agreement the initial offset
    /// is drawn uniformly from `rng`; with it the offset is `id`.
    pub fn new<R: Rng + ?Sized>(
        id: usize,
        cfg: TdfsConfig,
        base: BasePolicy,
        family: RewardFamily,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        if id >= cfg.players {
            return Err(Error::Config(format!(
                "player id {id} out of range for M = {}",
                cfg.players
            )));
        }
        let policy = base.build(family, cfg.delta, cfg.arms)?;
        let offset = if cfg.pre_agreement {
            id
        } else {
            rng.random_range(0..cfg.players)
        };
        Ok(Self {
            id,
            cfg,
            policy,
            offset,
            acted: 0,
            global_stats: vec![ArmStatistics::new(); cfg.arms],
            context_stats: HashMap::new(),
            subseq_counters: vec![vec![0; cfg.players]; cfg.players],
            mini_counters: HashMap::new(),
            recent_actions: Vec::with_capacity(cfg.players),
            round_collision: false,
            regenerations: 0,
            target: 0,
            pending: None,
            eligible: Vec::with_capacity(cfg.arms),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Slots this player has acted in.
    pub fn acted(&self) -> u64 {
        self.acted
    }

    /// Rank targeted in the most recent slot (0 before the first slot).
    pub fn target_rank(&self) -> usize {
        self.target
    }

    pub fn regenerations(&self) -> u64 {
        self.regenerations
    }

    pub fn global_stats(&self) -> &[ArmStatistics] {
        &self.global_stats
    }

    pub fn context_stats(&self, offset: usize, key: ArmSet) -> Option<&[ArmStatistics]> {
        self.context_stats.get(&(offset, key)).map(Vec::as_slice)
    }

    pub fn recent_actions(&self) -> &[usize] {
        &self.recent_actions
    }

    pub fn subsequence_counter(&self, offset: usize, k: usize) -> u64 {
        self.subseq_counters[offset][k - 1]
    }

    pub fn mini_counter(&self, offset: usize, key: ArmSet) -> u64 {
        self.mini_counters.get(&(offset, key)).copied().unwrap_or(0)
    }

    /// All mini-sequence counters as `((offset, key), count)`.
    pub fn mini_counters(&self) -> impl Iterator<Item = (ContextKey, u64)> + '_ {
        self.mini_counters.iter().map(|(k, v)| (*k, *v))
    }

    /// The position (0-based) of the next slot within the current round.
    pub fn round_position(&self) -> usize {
        (self.acted % self.cfg.players as u64) as usize
    }

    /// True right after the last slot of a round of `M` acted slots.
    pub fn at_round_boundary(&self) -> bool {
        self.acted > 0 && self.round_position() == 0
    }

    /// Chooses this player's arm for its next acted slot.
    pub fn step(&mut self) -> usize {
        let m = self.cfg.players;
        let n = self.cfg.arms;
        self.acted += 1;
        let k = oslash(self.acted, m as u64) as usize;
        let offset = self.offset;
        let rank = target_rank(k, offset, m);
        self.target = rank;
        if rank == 1 {
            self.recent_actions.clear();
        }

        let counter = &mut self.subseq_counters[offset][k - 1];
        *counter += 1;
        let m_k = *counter;

        let (arm, context) = if m_k <= n as u64 {
            // Subsequence initialization: play arm m_k.
            let arm = m_k as usize - 1;
            let context = (rank == 1).then(|| ArmSet::full(n));
            (arm, context)
        } else {
            let key = mini_sequence_key(&self.recent_actions, rank, n);
            let mini = self.mini_counters.entry((offset, key)).or_insert(0);
            *mini += 1;
            // Rank-1 slots run the policy on the subsequence clock itself, so the
            // subsequence initialization doubles as the policy's own.
            let seq_time = if rank == 1 { m_k } else { *mini };

            self.eligible.clear();
            self.eligible.extend(key.arms());
            let stats: &[ArmStatistics] = if self.cfg.coupled {
                &self.global_stats
            } else {
                self.context_stats
                    .entry((offset, key))
                    .or_insert_with(|| vec![ArmStatistics::new(); n])
            };
            (
                self.policy.select(stats, &self.eligible, seq_time),
                Some(key),
            )
        };

        self.recent_actions.push(arm);
        if self.recent_actions.len() > m.saturating_sub(1) {
            self.recent_actions.remove(0);
        }
        self.pending = Some(PendingAction {
            arm,
            offset,
            context,
        });
        arm
    }

    /// Records what was sensed on the arm played in the last [`step`](Self::step).
    pub fn observe(&mut self, arm: usize, value: f64, collided: bool) {
        let pending = self
            .pending
            .take()
            .expect("observe without a preceding step");
        assert_eq!(
            pending.arm, arm,
            "observation for an arm that was not played"
        );
        self.global_stats[arm].observe(value);
        if !self.cfg.coupled {
            if let Some(key) = pending.context {
                self.context_stats
                    .entry((pending.offset, key))
                    .or_insert_with(|| vec![ArmStatistics::new(); self.cfg.arms])[arm]
                    .observe(value);
            }
        }
        if collided && !self.cfg.pre_agreement {
            self.round_collision = true;
        }
    }

    /// End-of-round offset update (no pre-agreement): after a round with a
    /// collision the offset is redrawn uniformly from `{0, …, M-1}`.
    pub fn offset_round_end<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.cfg.pre_agreement {
            return;
        }
        if self.round_collision {
            let fresh = rng.random_range(0..self.cfg.players);
            self.regenerations += 1;
            if fresh != self.offset {
                self.offset = fresh;
                // The rank cycle restarts at a different phase.
                self.recent_actions.clear();
            }
        }
        self.round_collision = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn cfg(m: usize, n: usize, pre: bool) -> TdfsConfig {
        TdfsConfig {
            players: m,
            arms: n,
            coupled: true,
            pre_agreement: pre,
            delta: 0.5 / n as f64,
        }
    }

    #[test]
    fn oslash_examples() {
        assert_eq!(oslash(5, 3), 2);
        assert_eq!(oslash(3, 3), 3);
        for l in 1..10 {
            assert_eq!(oslash(1, l), 1);
        }
    }

    #[test]
    fn target_rank_examples() {
        assert_eq!(target_rank(1, 0, 2), 1);
        assert_eq!(target_rank(1, 1, 2), 2);
        for m in 1..8 {
            for i in 0..m {
                assert_eq!(target_rank(i + 1, i, m), 1);
            }
        }
    }

    #[test]
    fn distinct_offsets_target_distinct_ranks() {
        for m in 2..7 {
            for k in 1..=m {
                let ranks: Vec<usize> = (0..m).map(|o| target_rank(k, o, m)).collect();
                let mut sorted = ranks.clone();
                sorted.sort();
                assert_eq!(sorted, (1..=m).collect::<Vec<_>>(), "k={k} m={m}");
            }
        }
    }

    #[test]
    fn mini_sequence_keys() {
        assert_eq!(mini_sequence_key(&[0, 1], 1, 5), ArmSet::full(5));
        let key = mini_sequence_key(&[0], 2, 3);
        assert_eq!(key.arms().collect::<Vec<_>>(), vec![1, 2]);
        // Duplicates collapse, so the subset can be larger than N - j + 1.
        let dup = mini_sequence_key(&[2, 2], 3, 4);
        assert_eq!(dup.len(), 3);
        let distinct: std::collections::BTreeSet<ArmSet> =
            (0..3).map(|a| mini_sequence_key(&[a], 2, 3)).collect();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(2, 3, true).validate().is_ok());
        assert!(cfg(3, 3, true).validate().is_err());
        assert!(cfg(0, 3, true).validate().is_err());
        let mut c = cfg(2, 3, true);
        c.delta = 0.5;
        assert!(c.validate().is_err());
        assert!(cfg(2, 65, true).validate().is_err());
    }

    #[test]
    fn pre_agreement_offset_is_player_id() {
        let mut rng = stream(0, 0);
        for id in 0..3 {
            let p = TdfsPlayer::new(
                id,
                cfg(3, 5, true),
                BasePolicy::LaiRobbins,
                RewardFamily::Bernoulli,
                &mut rng,
            )
            .unwrap();
            assert_eq!(p.offset(), id);
        }
    }

    #[test]
    fn round_without_collision_keeps_offset() {
        let mut rng = stream(3, 0);
        let mut p = TdfsPlayer::new(
            0,
            cfg(3, 5, false),
            BasePolicy::LaiRobbins,
            RewardFamily::Bernoulli,
            &mut rng,
        )
        .unwrap();
        let before = p.offset();
        for _ in 0..3 {
            let a = p.step();
            p.observe(a, 1.0, false);
        }
        assert!(p.at_round_boundary());
        p.offset_round_end(&mut rng);
        assert_eq!(p.offset(), before);
        assert_eq!(p.regenerations(), 0);
    }

    #[test]
    fn collision_regenerations_are_uniform() {
        let m = 4;
        let mut rng = stream(11, 0);
        let mut p = TdfsPlayer::new(
            0,
            cfg(m, 6, false),
            BasePolicy::LaiRobbins,
            RewardFamily::Bernoulli,
            &mut rng,
        )
        .unwrap();
        let draws = 100_000;
        let mut freq = vec![0u32; m];
        for _ in 0..draws {
            p.round_collision = true;
            p.offset_round_end(&mut rng);
            freq[p.offset()] += 1;
        }
        for f in freq {
            assert!((f as f64 / draws as f64 - 0.25).abs() < 0.01);
        }
        assert_eq!(p.regenerations(), draws);
    }

    #[test]
    fn single_player_offset_is_always_zero() {
        let mut rng = stream(5, 0);
        let mut p = TdfsPlayer::new(
            0,
            cfg(1, 3, false),
            BasePolicy::AuerIndex,
            RewardFamily::Bernoulli,
            &mut rng,
        )
        .unwrap();
        for _ in 0..50 {
            let a = p.step();
            p.observe(a, 0.0, true);
            p.offset_round_end(&mut rng);
            assert_eq!(p.offset(), 0);
        }
    }

    #[test]
    fn pre_agreement_ignores_collisions() {
        let mut rng = stream(5, 0);
        let mut p = TdfsPlayer::new(
            1,
            cfg(2, 3, true),
            BasePolicy::LaiRobbins,
            RewardFamily::Bernoulli,
            &mut rng,
        )
        .unwrap();
        for _ in 0..10 {
            let a = p.step();
            p.observe(a, 1.0, true);
            p.offset_round_end(&mut rng);
        }
        assert_eq!(p.offset(), 1);
        assert_eq!(p.regenerations(), 0);
    }

    #[test]
    fn coupled_observation_touches_one_statistic() {
        let mut rng = stream(5, 0);
        let mut p = TdfsPlayer::new(
            0,
            cfg(2, 3, true),
            BasePolicy::LaiRobbins,
            RewardFamily::Bernoulli,
            &mut rng,
        )
        .unwrap();
        let a = p.step();
        p.observe(a, 1.0, false);
        let counts: Vec<u64> = p.global_stats().iter().map(|s| s.count()).collect();
        assert_eq!(counts.iter().sum::<u64>(), 1);
        assert_eq!(counts[a], 1);
        assert!(p.context_stats.is_empty());
    }

    #[test]
    fn uncoupled_observation_stays_in_its_context() {
        let mut rng = stream(5, 0);
        let mut c = cfg(2, 3, true);
        c.coupled = false;
        let mut p = TdfsPlayer::new(
            0,
            c,
            BasePolicy::LaiRobbins,
            RewardFamily::Bernoulli,
            &mut rng,
        )
        .unwrap();
        // Run through both subsequence initializations (6 slots) and a few more.
        for _ in 0..10 {
            let a = p.step();
            p.observe(a, 1.0, false);
        }
        // Slot 11 is rank 1 (offset 0, k = 1) and runs in the full-set context.
        let a = p.step();
        let full = ArmSet::full(3);
        let before: Vec<ArmStatistics> = p.context_stats(0, full).unwrap().to_vec();
        let others: Vec<(ContextKey, Vec<ArmStatistics>)> = p
            .context_stats
            .iter()
            .filter(|(k, _)| **k != (0, full))
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        p.observe(a, 1.0, false);
        let after = p.context_stats(0, full).unwrap();
        assert_eq!(after[a].count(), before[a].count() + 1);
        for (key, stats) in others {
            assert_eq!(p.context_stats(key.0, key.1).unwrap(), stats.as_slice());
        }
    }
}
