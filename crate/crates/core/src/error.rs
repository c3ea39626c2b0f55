use thiserror::Error;

/// Errors raised by the exact operators, particle engine, analyzers and bound calculators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero mass: the measure integrates the potential to {0}")]
    ZeroMass(f64),

    #[error("operation requires a finite state space")]
    UnsupportedSpace,

    #[error("path enumeration needs {paths} paths, cap is {cap}")]
    EnumerationCap { paths: u128, cap: u64 },

    #[error("potential at time {time} evaluated to {value}, outside the admissible range")]
    PotentialRange { time: usize, value: f64 },

    #[error("measures live on different supports ({left} vs {right} atoms)")]
    SupportMismatch { left: usize, right: usize },

    #[error("epsilon * G = {product} exceeds 1 at time {time}")]
    EpsilonTooLarge { time: usize, product: f64 },

    #[error("all particles have zero potential at time {0}")]
    AllDead(usize),

    #[error("genealogy retention was disabled for this run")]
    MissingStates,

    #[error("kernel is not stationary for the target marginal (defect {defect:e})")]
    StationarityViolated { defect: f64 },

    #[error("backward row {row} at time {time} has zero normalizer")]
    ZeroRow { time: usize, row: usize },

    #[error("model provides no transition density at time {0}")]
    MissingDensity(usize),

    #[error("gradient of log(G H) missing at time {0}")]
    MissingGradient(usize),

    #[error("kernel supports differ over the window starting at time {window}: mixing ratio is infinite")]
    NotMixing { window: usize },

    #[error("b_n = {b_n} is below kappa(n) = {kappa}")]
    InvalidBn { b_n: f64, kappa: f64 },

    #[error("Legendre transform evaluated at negative lambda {0}")]
    NegativeLambda(f64),

    #[error("entropy integral does not converge: {0}")]
    DivergentEntropy(String),

    #[error("Perron-Frobenius assumptions fail: {0}")]
    NonPositiveEigenvector(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
