use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter {theta} is outside the domain of the {family} family")]
    ParameterDomain { family: &'static str, theta: f64 },

    #[error("invalid family constant: {0}")]
    FamilyConstant(String),

    #[error("KL divergence I({theta}, {theta_prime}) is infinite")]
    InfiniteDivergence { theta: f64, theta_prime: f64 },

    #[error("invalid parameter set: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no trajectories to aggregate")]
    EmptyTrialSet,
}
