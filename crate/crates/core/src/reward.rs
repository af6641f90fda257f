//! Reward families, ground-truth parameter sets and arm ranking.
//!
//! Every family is mean-parameterized, so `mean(θ) = θ`:
//!
//! | family      | density                         | KL I(θ, θ')                          |
//! |-------------|---------------------------------|--------------------------------------|
//! | Bernoulli   | θ^s (1-θ)^(1-s)                 | θ ln(θ/θ') + (1-θ) ln((1-θ)/(1-θ'))  |
//! | Gaussian    | N(θ, σ²), σ known               | (θ-θ')² / 2σ²                        |
//! | Poisson     | e^-θ θ^s / s!                   | θ ln(θ/θ') + θ' - θ                  |
//! | Exponential | (1/θ) e^(-s/θ)                  | ln(θ'/θ) + θ/θ' - 1                  |
//!
//! All logarithms are natural, so divergences are in nats.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RewardFamily {
    Bernoulli,
    /// Gaussian with known common standard deviation.
    Gaussian {
        sigma: f64,
    },
    /// Poisson; `a` bounds every admissible θ and scales the Agrawal index.
    Poisson {
        a: f64,
    },
    /// Exponential; `b` bounds every admissible θ and scales the Agrawal index.
    Exponential {
        b: f64,
    },
}

impl RewardFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Bernoulli => "bernoulli",
            Self::Gaussian { .. } => "gaussian",
            Self::Poisson { .. } => "poisson",
            Self::Exponential { .. } => "exponential",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (name, value) = match *self {
            Self::Bernoulli => return Ok(()),
            Self::Gaussian { sigma } => ("sigma", sigma),
            Self::Poisson { a } => ("a", a),
            Self::Exponential { b } => ("b", b),
        };
        if value.is_finite() && value > 0.0 {
            Ok(())
        } else {
            Err(Error::FamilyConstant(format!(
                "{name} = {value} must be positive for the {} family",
                self.name()
            )))
        }
    }

    /// Checks that `theta` is an admissible ground-truth parameter.
    pub fn check_theta(&self, theta: f64) -> Result<()> {
        let ok = theta.is_finite()
            && match *self {
                Self::Bernoulli => theta > 0.0 && theta < 1.0,
                Self::Gaussian { .. } => true,
                Self::Poisson { a } => theta > 0.0 && theta <= a,
                Self::Exponential { b } => theta > 0.0 && theta <= b,
            };
        if ok {
            Ok(())
        } else {
            Err(self.domain_error(theta))
        }
    }

    fn domain_error(&self, theta: f64) -> Error {
        Error::ParameterDomain {
            family: self.name(),
            theta,
        }
    }

    pub fn mean(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(theta)
    }

    /// KL divergence `I(θ, θ')` in nats.
    ///
    /// Accepts the closure of the natural parameter space (θ = 0 for Bernoulli
    /// or Poisson, θ = 1 for Bernoulli) since it is also evaluated on sample
    /// means; the `a`/`b` bounds are not enforced here.
    pub fn kl(&self, theta: f64, theta_prime: f64) -> Result<f64> {
        for &p in &[theta, theta_prime] {
            let ok = p.is_finite()
                && match self {
                    Self::Bernoulli => (0.0..=1.0).contains(&p),
                    Self::Gaussian { .. } => true,
                    Self::Poisson { .. } => p >= 0.0,
                    Self::Exponential { .. } => p > 0.0,
                };
            if !ok {
                return Err(self.domain_error(p));
            }
        }
        if theta == theta_prime {
            return Ok(0.0);
        }
        let infinite = Error::InfiniteDivergence { theta, theta_prime };
        let value = match *self {
            Self::Bernoulli => {
                if theta_prime == 0.0 || theta_prime == 1.0 {
                    return Err(infinite);
                }
                xlogy(theta, theta / theta_prime)
                    + xlogy(1.0 - theta, (1.0 - theta) / (1.0 - theta_prime))
            }
            Self::Gaussian { sigma } => (theta - theta_prime).powi(2) / (2.0 * sigma * sigma),
            Self::Poisson { .. } => {
                if theta_prime == 0.0 {
                    return Err(infinite);
                }
                xlogy(theta, theta / theta_prime) + theta_prime - theta
            }
            Self::Exponential { .. } => {
                let r = theta / theta_prime;
                r - 1.0 - r.ln()
            }
        };
        // Rounding can leave a tiny negative residue near θ ≈ θ'.
        Ok(value.max(0.0))
    }

    /// One draw from `f(·; θ)`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> Result<f64> {
        Ok(ArmSampler::new(*self, theta)?.sample(rng))
    }
}

impl fmt::Display for RewardFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Bernoulli => write!(f, "bernoulli"),
            Self::Gaussian { sigma } => write!(f, "gaussian(sigma={sigma})"),
            Self::Poisson { a } => write!(f, "poisson(a={a})"),
            Self::Exponential { b } => write!(f, "exponential(b={b})"),
        }
    }
}

/// `x ln y` with the convention `0 ln(·) = 0`.
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// A prebuilt sampler for one arm, so the slot loop does not revalidate.
#[derive(Debug, Clone, Copy)]
pub enum ArmSampler {
    Bernoulli(f64),
    Gaussian(Normal<f64>),
    Poisson(Poisson<f64>),
    Exponential(Exp<f64>),
}

impl ArmSampler {
    pub fn new(family: RewardFamily, theta: f64) -> Result<Self> {
        family.validate()?;
        family.check_theta(theta)?;
        Ok(match family {
            RewardFamily::Bernoulli => Self::Bernoulli(theta),
            RewardFamily::Gaussian { sigma } => {
                Self::Gaussian(Normal::new(theta, sigma).map_err(|_| family.domain_error(theta))?)
            }
            RewardFamily::Poisson { .. } => {
                Self::Poisson(Poisson::new(theta).map_err(|_| family.domain_error(theta))?)
            }
            RewardFamily::Exponential { .. } => {
                Self::Exponential(Exp::new(1.0 / theta).map_err(|_| family.domain_error(theta))?)
            }
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Bernoulli(p) => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Gaussian(d) => d.sample(rng),
            Self::Poisson(d) => d.sample(rng),
            Self::Exponential(d) => d.sample(rng),
        }
    }
}

/// Ground truth for one environment: a family and one parameter per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    family: RewardFamily,
    theta: Vec<f64>,
}

impl ParameterSet {
    pub fn new(family: RewardFamily, theta: Vec<f64>) -> Result<Self> {
        family.validate()?;
        if theta.len() < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 arms, got {}",
                theta.len()
            )));
        }
        for &t in &theta {
            family.check_theta(t)?;
        }
        Ok(Self { family, theta })
    }

    /// `Θ = [start, start + step, …]` with `count` arms.
    pub fn arithmetic(family: RewardFamily, start: f64, step: f64, count: usize) -> Result<Self> {
        Self::new(
            family,
            (0..count).map(|i| start + step * i as f64).collect(),
        )
    }

    pub fn family(&self) -> RewardFamily {
        self.family
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn arms(&self) -> usize {
        self.theta.len()
    }

    pub fn means(&self) -> Vec<f64> {
        // Mean-parameterized families: μ(θ) = θ.
        self.theta.clone()
    }

    pub fn kl(&self, arm: usize, other: usize) -> Result<f64> {
        self.family.kl(self.theta[arm], self.theta[other])
    }

    pub fn samplers(&self) -> Vec<ArmSampler> {
        self.theta
            .iter()
            .map(|&t| ArmSampler::new(self.family, t).expect("validated at construction"))
            .collect()
    }
}

/// Arms sorted by descending mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmRank {
    order: Vec<usize>,
    means: Vec<f64>,
}

impl ArmRank {
    /// Arm ids, best first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Means indexed by arm id.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// The arm holding rank `rank` (1-based).
    pub fn arm_at(&self, rank: usize) -> usize {
        self.order[rank - 1]
    }

    pub fn mean_at(&self, rank: usize) -> f64 {
        self.means[self.arm_at(rank)]
    }

    pub fn top(&self, m: usize) -> &[usize] {
        &self.order[..m]
    }

    /// `Σ_{j≤m} μ(θ_σ(j))`, the best achievable reward per slot with `m` players.
    pub fn top_sum(&self, m: usize) -> f64 {
        self.top(m).iter().map(|&a| self.means[a]).sum()
    }
}

/// Ranks arms by mean for a system with `m` players.
///
/// The `m + 1` best means must be pairwise distinct and the `m` best must be
/// nonnegative; ties further down keep ascending arm-id order.
pub fn rank_arms(params: &ParameterSet, m: usize) -> Result<ArmRank> {
    let n = params.arms();
    if m == 0 || m >= n {
        return Err(Error::Validation(format!(
            "player count M = {m} must satisfy 1 <= M < N = {n}"
        )));
    }
    let means = params.means();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]));

    let mut problems = Vec::new();
    for r in 0..m {
        let (a, b) = (order[r], order[r + 1]);
        if means[a] == means[b] {
            problems.push(format!(
                "arms {} and {} tie at mean {} within the top {}",
                a + 1,
                b + 1,
                means[a],
                m + 1
            ));
        }
        if means[a] < 0.0 {
            problems.push(format!(
                "arm {} has negative mean {} but ranks within the top {m}",
                a + 1,
                means[a]
            ));
        }
    }
    if problems.is_empty() {
        Ok(ArmRank { order, means })
    } else {
        Err(Error::Validation(problems.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    const BERN: RewardFamily = RewardFamily::Bernoulli;
    const GAUSS: RewardFamily = RewardFamily::Gaussian { sigma: 1.0 };

    #[test]
    fn means_are_the_parameter() {
        assert_eq!(BERN.mean(0.3).unwrap(), 0.3);
        assert_eq!(GAUSS.mean(1.5).unwrap(), 1.5);
        assert_eq!(
            RewardFamily::Exponential { b: 10.0 }.mean(2.0).unwrap(),
            2.0
        );
        assert!(BERN.mean(1.0).is_err());
        assert!(RewardFamily::Poisson { a: 2.0 }.mean(3.0).is_err());
        assert!(RewardFamily::Exponential { b: 2.0 }.mean(0.0).is_err());
    }

    #[test]
    fn family_constants_must_be_positive() {
        assert!(RewardFamily::Gaussian { sigma: 0.0 }.validate().is_err());
        assert!(RewardFamily::Poisson { a: -1.0 }.validate().is_err());
        assert!(RewardFamily::Exponential { b: f64::NAN }
            .validate()
            .is_err());
        assert!(ParameterSet::new(RewardFamily::Gaussian { sigma: 0.0 }, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn kl_spot_values() {
        // Frozen from closed-form KL cross-checked against summation and quadrature.
        assert!((BERN.kl(0.1, 0.2).unwrap() - 0.036_690_014_034_750_58).abs() < 1e-12);
        assert_eq!(GAUSS.kl(1.0, 2.0).unwrap(), 0.5);
        let e = RewardFamily::Exponential { b: 10.0 };
        assert!((e.kl(1.0, 2.0).unwrap() - 0.193_147_180_559_945_3).abs() < 1e-12);
        let p = RewardFamily::Poisson { a: 10.0 };
        assert!((p.kl(1.0, 2.0).unwrap() - 0.306_852_819_440_054_7).abs() < 1e-12);
        for f in [BERN, GAUSS, e, p] {
            assert_eq!(f.kl(0.4, 0.4).unwrap(), 0.0);
        }
    }

    #[test]
    fn kl_boundary_cases() {
        assert!(matches!(
            BERN.kl(0.5, 1.0),
            Err(Error::InfiniteDivergence { .. })
        ));
        assert!(matches!(
            BERN.kl(0.5, 0.0),
            Err(Error::InfiniteDivergence { .. })
        ));
        // 0 ln 0 = 0 on the left argument.
        assert!((BERN.kl(0.0, 0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(BERN.kl(1.2, 0.5).is_err());
        let p = RewardFamily::Poisson { a: 1.0 };
        assert!(matches!(
            p.kl(1.0, 0.0),
            Err(Error::InfiniteDivergence { .. })
        ));
        assert_eq!(p.kl(0.0, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn samples_respect_support() {
        let mut rng = stream(1, 0);
        for _ in 0..1000 {
            let b = BERN.sample(0.3, &mut rng).unwrap();
            assert!(b == 0.0 || b == 1.0);
            let p = RewardFamily::Poisson { a: 5.0 }
                .sample(2.5, &mut rng)
                .unwrap();
            assert!(p >= 0.0 && p.fract() == 0.0);
            let e = RewardFamily::Exponential { b: 5.0 }
                .sample(2.5, &mut rng)
                .unwrap();
            assert!(e >= 0.0);
        }
    }

    #[test]
    fn bernoulli_sample_mean_clt() {
        let mut rng = stream(42, 0);
        let n = 1_000_000;
        let hits: f64 = (0..n).map(|_| BERN.sample(0.3, &mut rng).unwrap()).sum();
        let mean = hits / n as f64;
        assert!(
            (mean - 0.3).abs() <= 3.0 * (0.21f64 / n as f64).sqrt(),
            "{mean}"
        );
    }

    #[test]
    fn ranking_examples() {
        let p = ParameterSet::new(BERN, vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(rank_arms(&p, 1).unwrap().order(), &[2, 1, 0]);

        let tie = ParameterSet::new(BERN, vec![0.5, 0.5, 0.1]).unwrap();
        let err = rank_arms(&tie, 1).unwrap_err().to_string();
        assert!(err.contains("arms 1 and 2"), "{err}");

        let g = ParameterSet::new(GAUSS, vec![-1.0, 2.0, 3.0]).unwrap();
        assert_eq!(rank_arms(&g, 2).unwrap().order(), &[2, 1, 0]);
        let neg = ParameterSet::new(GAUSS, vec![-1.0, -2.0, 3.0]).unwrap();
        assert!(rank_arms(&neg, 2).is_err());
    }

    #[test]
    fn ranking_allows_ties_below_the_boundary() {
        let p = ParameterSet::new(BERN, vec![0.5, 0.5, 0.9, 0.6]).unwrap();
        let r = rank_arms(&p, 2).unwrap();
        assert_eq!(r.order(), &[2, 3, 0, 1]);
        assert!(rank_arms(&p, 3).is_err());
        assert!(rank_arms(&p, 4).is_err());
        assert!(rank_arms(&p, 0).is_err());
    }

    #[test]
    fn parameter_set_validation() {
        assert!(ParameterSet::new(BERN, vec![0.5]).is_err());
        assert!(ParameterSet::new(BERN, vec![0.5, 1.0]).is_err());
        let ar = ParameterSet::arithmetic(BERN, 0.1, 0.1, 4).unwrap();
        assert_eq!(ar.arms(), 4);
        assert!((ar.theta()[3] - 0.4).abs() < 1e-12);
    }
}
