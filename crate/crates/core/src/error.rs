use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("cannot parse distribution spec `{spec}`: {reason}")]
    DistSpec { spec: String, reason: String },
    #[error("quantile level {0} outside [0, 1]")]
    QuantileOutOfRange(f64),
    #[error("density is zero at t = {0}; virtual value undefined")]
    ZeroDensity(f64),
    #[error("operation `{0}` requires a continuous distribution")]
    NeedsContinuous(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(
        "strategy profile is not an approximate equilibrium: regret {regret:.3e} > {tolerance:.3e} for bidder {bidder}"
    )]
    NotEquilibrium { bidder: usize, regret: f64, tolerance: f64 },
    #[error("strategy overbids: b({t}) = {bid} > t")]
    Overbidding { t: f64, bid: f64 },
    #[error("ghost region for bidder {bidder} is empty or negligible")]
    GhostRegionNegligible { bidder: usize },
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("linear program is unbounded")]
    Unbounded,
}

pub type Result<T> = std::result::Result<T, Error>;
