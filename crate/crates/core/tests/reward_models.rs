mod common;

use common::kl_oracle;
use decbandit::reward::{rank_arms, ParameterSet, RewardFamily};
use decbandit::rng::stream;
use proptest::prelude::*;

const SIGMAS: [f64; 3] = [0.5, 1.0, 2.0];

fn families() -> Vec<(RewardFamily, f64, f64)> {
    vec![
        (RewardFamily::Bernoulli, 0.02, 0.98),
        (RewardFamily::Gaussian { sigma: 1.0 }, -3.0, 3.0),
        (RewardFamily::Poisson { a: 20.0 }, 0.1, 20.0),
        (RewardFamily::Exponential { b: 20.0 }, 0.1, 20.0),
    ]
}

fn oracle(family: RewardFamily, p: f64, q: f64) -> f64 {
    match family {
        RewardFamily::Bernoulli => kl_oracle::bernoulli(p, q),
        RewardFamily::Gaussian { sigma } => kl_oracle::gaussian(p, q, sigma),
        RewardFamily::Poisson { .. } => kl_oracle::poisson(p, q),
        RewardFamily::Exponential { .. } => kl_oracle::exponential(p, q),
    }
}

#[test]
fn kl_matches_numerical_oracle_on_grid() {
    for (family, lo, hi) in families() {
        for (p, q) in kl_oracle::pair_grid(lo, hi) {
            let closed = family.kl(p, q).unwrap();
            let numeric = oracle(family, p, q);
            assert!(
                (closed - numeric).abs() <= 1e-6,
                "{family} I({p}, {q}): {closed} vs {numeric}"
            );
        }
    }
    for sigma in SIGMAS {
        let family = RewardFamily::Gaussian { sigma };
        for (p, q) in kl_oracle::pair_grid(-2.0, 2.0) {
            assert!((family.kl(p, q).unwrap() - kl_oracle::gaussian(p, q, sigma)).abs() <= 1e-6);
        }
    }
}

#[test]
fn oracle_spot_values() {
    assert!((kl_oracle::bernoulli(0.1, 0.2) - 0.036_690).abs() < 1e-6);
    assert!((kl_oracle::exponential(1.0, 2.0) - 0.193_147).abs() < 1e-6);
    assert!((kl_oracle::poisson(1.0, 2.0) - 0.306_853).abs() < 1e-6);
    assert!((kl_oracle::gaussian(1.0, 2.0, 1.0) - 0.5).abs() < 1e-9);
}

#[test]
fn gaussian_kl_monte_carlo_cross_check() {
    // E_θ[log f(Y;θ) - log f(Y;θ')] for θ = 1, θ' = 2, σ = 1, estimated from draws.
    let family = RewardFamily::Gaussian { sigma: 1.0 };
    let mut rng = stream(9, 0);
    let n = 200_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let y = family.sample(1.0, &mut rng).unwrap();
            ((y - 2.0).powi(2) - (y - 1.0).powi(2)) / 2.0
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - family.kl(1.0, 2.0).unwrap()).abs() <= 3.0 * se);
}

#[test]
fn kl_nonnegative_and_zero_only_on_diagonal() {
    for (family, lo, hi) in families() {
        let grid: Vec<f64> = (0..10).map(|i| lo + (hi - lo) * i as f64 / 9.0).collect();
        for &p in &grid {
            for &q in &grid {
                let v = family.kl(p, q).unwrap();
                assert!(v >= 0.0);
                assert_eq!(v == 0.0, p == q, "{family} I({p}, {q}) = {v}");
            }
        }
    }
}

#[test]
fn sample_means_converge() {
    // family, three θ, standard deviation of one draw
    type Case = (RewardFamily, [f64; 3], fn(f64) -> f64);
    let cases: Vec<Case> = vec![
        (RewardFamily::Bernoulli, [0.1, 0.5, 0.85], |t| {
            (t * (1.0 - t)).sqrt()
        }),
        (
            RewardFamily::Gaussian { sigma: 2.0 },
            [-1.0, 0.0, 3.5],
            |_| 2.0,
        ),
        (
            RewardFamily::Poisson { a: 10.0 },
            [0.3, 2.0, 9.0],
            f64::sqrt,
        ),
        (
            RewardFamily::Exponential { b: 10.0 },
            [0.5, 1.0, 7.0],
            |t| t,
        ),
    ];
    let n = 1_000_000;
    for (i, (family, thetas, sd)) in cases.into_iter().enumerate() {
        for (j, theta) in thetas.into_iter().enumerate() {
            let mut rng = stream(100 + i as u64, j as u64);
            let mean = (0..n)
                .map(|_| family.sample(theta, &mut rng).unwrap())
                .sum::<f64>()
                / n as f64;
            let se = sd(theta) / (n as f64).sqrt();
            assert!(
                (mean - family.mean(theta).unwrap()).abs() <= 4.0 * se,
                "{family} θ={theta}: {mean}"
            );
        }
    }
}

fn distinct_thetas() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(1u32..999, 3..9)
        .prop_map(|s| s.into_iter().map(|v| v as f64 / 1000.0).collect::<Vec<_>>())
        .prop_shuffle()
}

proptest! {
    #[test]
    fn ranking_is_permutation_equivariant(theta in distinct_thetas(), seed in any::<u64>()) {
        let n = theta.len();
        let m = 1 + (seed as usize % (n - 1));
        let params = ParameterSet::new(RewardFamily::Bernoulli, theta.clone()).unwrap();
        let rank = rank_arms(&params, m).unwrap();

        // perm[i] = new position of old arm i
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(seed as usize % n);
        let mut permuted = vec![0.0; n];
        for (old, &new) in perm.iter().enumerate() {
            permuted[new] = theta[old];
        }
        let re = rank_arms(&ParameterSet::new(RewardFamily::Bernoulli, permuted).unwrap(), m).unwrap();
        let mapped: Vec<usize> = rank.order().iter().map(|&a| perm[a]).collect();
        prop_assert_eq!(re.order(), mapped.as_slice());

        let means = rank.means();
        prop_assert!(rank.order().windows(2).all(|w| means[w[0]] >= means[w[1]]));
    }
}
