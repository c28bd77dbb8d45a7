use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("skewness beta = {0} must lie in (-1, 1)")]
    BetaOutOfRange(f64),
    #[error("discount rate q = {0} must be positive")]
    NonPositiveDiscount(f64),
    #[error("skew level a = {0} must be positive")]
    NonPositiveSkewLevel(f64),
    #[error("drift {name} = {value} is not finite")]
    NonFiniteDrift { name: &'static str, value: f64 },
    #[error("ordering violated: {0}")]
    OrderingViolation(String),
    #[error("invalid barrier level: {0}")]
    InvalidLevel(String),
    #[error("invalid band: {0}")]
    InvalidBand(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("grid step {step} exceeds a quarter of the minimum kink spacing {spacing}")]
    GridTooCoarse { step: f64, spacing: f64 },
    #[error("no candidate strategy passed verification: {0}")]
    Unclassified(String),
    #[error("lattice step too coarse: {0}")]
    StepTooCoarse(String),
    #[error("level {value} is not a lattice point for dx = {dx}")]
    OffLattice { value: f64, dx: f64 },
    #[error("invalid lattice config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
