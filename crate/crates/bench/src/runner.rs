//! Parallel trial execution, reduction and CSV output.

use std::fs;
use std::path::Path;

use decbandit::analytics::{
    bound_report, mean_stderr, per_player_regret, system_regret, system_regret_samples,
    BoundReport, RegretCurve,
};
use decbandit::arena::{Trajectory, TrialSetup};
use decbandit::rng::derive_seed;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::BenchError;

pub const REGRET_CSV: &str = "regret.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SWEEP_CSV: &str = "sweep.csv";

/// Seed of trial `i`; independent of how trials are scheduled.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, trial as u64)
}

/// Runs `trials` trials on `threads` workers; results are in trial order.
pub fn run_trials(
    setup: &TrialSetup,
    trials: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<Trajectory>, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| BenchError::Runtime(e.to_string()))?;
    let runs: Vec<_> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| setup.run(trial_seed(seed, i)))
            .collect()
    });
    Ok(runs.into_iter().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub trials: usize,
    pub system: RegretCurve,
    pub players: Vec<RegretCurve>,
    /// Mean cumulative collisions at each checkpoint.
    pub collisions_mean: Vec<f64>,
    /// Mean of the per-trial `R_T / ln T`.
    pub leading_constant: f64,
    pub leading_constant_stderr: f64,
    pub bounds: BoundReport,
    pub regenerations_mean: f64,
    /// Mean total reward of each player at `T`.
    pub player_reward_mean: Vec<f64>,
}

impl ExperimentReport {
    pub fn from_trials(cfg: &ExperimentConfig, trajs: &[Trajectory]) -> Result<Self, BenchError> {
        let params = cfg.params()?;
        let m = cfg.players;
        let system = system_regret(trajs, &params, m)?;
        let players = per_player_regret(trajs, &params, m)?;
        let n = trajs.len() as f64;

        let horizon = *system.checkpoints.last().expect("at least one checkpoint");
        let ln_t = (horizon as f64).ln();
        let finals: Vec<f64> = system_regret_samples(trajs, &params, m)?
            .iter()
            .map(|s| s.last().copied().unwrap_or(0.0) / ln_t)
            .collect();
        let (leading_constant, leading_constant_stderr) = if horizon >= 2 {
            mean_stderr(&finals)
        } else {
            (f64::NAN, f64::NAN)
        };

        let checkpoints = system.checkpoints.len();
        let collisions_mean = (0..checkpoints)
            .map(|c| trajs.iter().map(|t| t.collisions[c] as f64).sum::<f64>() / n)
            .collect();
        let regenerations_mean = trajs
            .iter()
            .map(|t| t.regenerations.iter().sum::<u64>() as f64)
            .sum::<f64>()
            / n;
        let player_reward_mean = (0..m)
            .map(|p| {
                trajs
                    .iter()
                    .map(|t| *t.player_reward[p].last().unwrap_or(&0.0))
                    .sum::<f64>()
                    / n
            })
            .collect();
        Ok(Self {
            trials: trajs.len(),
            system,
            players,
            collisions_mean,
            leading_constant,
            leading_constant_stderr,
            bounds: bound_report(&params, m)?,
            regenerations_mean,
            player_reward_mean,
        })
    }

    pub fn total_collisions_mean(&self) -> f64 {
        self.collisions_mean.last().copied().unwrap_or(0.0)
    }

    pub fn regret_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "t".to_string(),
            "regret_mean".into(),
            "regret_stderr".into(),
            "regret_over_logt".into(),
        ];
        header.extend((1..=self.players.len()).map(|p| format!("regret_p{p}")));
        header.push("collisions_cum_mean".into());
        w.write_record(&header).map_err(csv_error)?;
        let c = &self.system;
        for i in 0..c.checkpoints.len() {
            let mut row = vec![
                c.checkpoints[i].to_string(),
                g9(c.regret[i]),
                g9(c.stderr[i]),
                c.regret_over_log[i].map(g9).unwrap_or_default(),
            ];
            row.extend(self.players.iter().map(|p| g9(p.regret[i])));
            row.push(g9(self.collisions_mean[i]));
            w.write_record(&row).map_err(csv_error)?;
        }
        finish(w)
    }

    pub fn summary_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = [
            "trials",
            "horizon",
            "leading_constant",
            "leading_constant_stderr",
            "centralized_constant",
            "tds_constant",
            "upper_model1",
            "upper_model2",
            "collisions_total_mean",
            "regenerations_mean",
        ]
        .map(String::from)
        .into();
        header.extend((1..=self.player_reward_mean.len()).map(|p| format!("reward_p{p}")));
        w.write_record(&header).map_err(csv_error)?;
        let b = &self.bounds;
        let mut row = vec![
            self.trials.to_string(),
            self.system
                .checkpoints
                .last()
                .map(u64::to_string)
                .unwrap_or_default(),
            g9(self.leading_constant),
            g9(self.leading_constant_stderr),
            g9(b.centralized_constant),
            g9(b.tds_constant),
            g9(b.upper_model1),
            g9(b.upper_model2),
            g9(self.total_collisions_mean()),
            g9(self.regenerations_mean),
        ];
        row.extend(self.player_reward_mean.iter().map(|&r| g9(r)));
        w.write_record(&row).map_err(csv_error)?;
        finish(w)
    }
}

fn csv_error(e: csv::Error) -> BenchError {
    BenchError::Runtime(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, BenchError> {
    let bytes = w
        .into_inner()
        .map_err(|e| BenchError::Runtime(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| BenchError::Runtime(e.to_string()))
}

/// `%.9g`: nine significant digits, trailing zeros dropped.
pub fn g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!(
            "{}e{sign}{:02}",
            trim_zeros(mantissa.to_string()),
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), BenchError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| BenchError::Io { path, source })
}

fn create_dir(dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(dir).map_err(|source| BenchError::Io {
        path: dir.to_owned(),
        source,
    })
}

/// Runs every trial of `cfg` and reduces them.
pub fn simulate(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentReport, BenchError> {
    cfg.check()?;
    let setup = cfg.setup()?;
    let trajs = run_trials(&setup, cfg.trials, cfg.seed, threads)?;
    ExperimentReport::from_trials(cfg, &trajs)
}

/// Runs the experiment and writes `regret.csv` and `summary.csv` into `out`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    threads: usize,
    out: &Path,
) -> Result<ExperimentReport, BenchError> {
    let report = simulate(cfg, threads)?;
    create_dir(out)?;
    write(out, REGRET_CSV, &report.regret_csv()?)?;
    write(out, SUMMARY_CSV, &report.summary_csv()?)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Arms,
    Players,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "N" | "n" => Ok(Self::Arms),
            "M" | "m" => Ok(Self::Players),
            _ => Err(format!("sweep parameter must be N or M, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: usize,
    pub leading_constant_mean: f64,
    pub stderr: f64,
    pub bounds: BoundReport,
}

pub fn sweep_configs(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[usize],
) -> Result<Vec<ExperimentConfig>, BenchError> {
    let mut issues = Vec::new();
    let mut cfgs = Vec::new();
    for &v in values {
        let cfg = match param {
            SweepParam::Arms => base.with_arms(v),
            SweepParam::Players => base.with_players(v),
        };
        match cfg {
            Ok(c) => cfgs.push(c),
            Err(BenchError::Invalid(found)) => issues.extend(found.into_iter().map(|mut i| {
                i.key = format!("sweep[{v}].{}", i.key);
                i
            })),
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(BenchError::invalid(
            "values",
            "need at least one sweep value",
        ));
    }
    if issues.is_empty() {
        Ok(cfgs)
    } else {
        Err(BenchError::Invalid(issues))
    }
}

/// One experiment per sweep value; writes `sweep.csv` into `out`.
pub fn run_sweep(
    base: &ExperimentConfig,
    param: SweepParam,
    values: &[usize],
    threads: usize,
    out: &Path,
) -> Result<Vec<SweepRow>, BenchError> {
    let cfgs = sweep_configs(base, param, values)?;
    let mut rows = Vec::with_capacity(cfgs.len());
    for (cfg, &value) in cfgs.iter().zip(values) {
        let report = simulate(cfg, threads)?;
        rows.push(SweepRow {
            value,
            leading_constant_mean: report.leading_constant,
            stderr: report.leading_constant_stderr,
            bounds: report.bounds,
        });
    }
    create_dir(out)?;
    write(out, SWEEP_CSV, &sweep_csv(&rows)?)?;
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "value",
        "leading_constant_mean",
        "stderr",
        "centralized_constant",
        "tds_constant",
        "upper_model1",
        "upper_model2",
    ])
    .map_err(csv_error)?;
    for r in rows {
        let b = &r.bounds;
        w.write_record([
            r.value.to_string(),
            g9(r.leading_constant_mean),
            g9(r.stderr),
            g9(b.centralized_constant),
            g9(b.tds_constant),
            g9(b.upper_model1),
            g9(b.upper_model2),
        ])
        .map_err(csv_error)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(g9(0.0), "0");
        assert_eq!(g9(1.0), "1");
        assert_eq!(g9(-2.5), "-2.5");
        assert_eq!(g9(std::f64::consts::PI), "3.14159265");
        assert_eq!(g9(123456789.0), "123456789");
        assert_eq!(g9(1234567890.0), "1.23456789e+09");
        assert_eq!(g9(0.0001234), "0.0001234");
        assert_eq!(g9(0.00001234), "1.234e-05");
        assert_eq!(g9(1.0 / 3.0), "0.333333333");
        assert_eq!(g9(99999.99999), "100000");
        assert_eq!(g9(f64::NAN), "nan");
    }

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 1000);
        assert_eq!(trial_seed(7, 3), seeds[3]);
    }
}
