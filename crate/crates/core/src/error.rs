use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(
        "eigensolver did not converge within {sweeps} sweeps (off-diagonal norm {off_norm:e})"
    )]
    NonConvergence { sweeps: usize, off_norm: f64 },
    #[error("cannot assign (F, m) labels: {0}")]
    LabelAmbiguity(String),
    #[error("level |F={f}, m={m}> does not exist")]
    MissingLevel { f: i32, m: i32 },
    #[error("all bath coupling rates are zero")]
    AllRatesZero,
    #[error("transitions do not form a quasi-degenerate pair: {0}")]
    StateCollision(String),
    #[error("grid cell at ({x:e}, {y:e}) m lies inside the conductor")]
    GridOverlapsConductor { x: f64, y: f64 },
    #[error("coupling distribution has no support")]
    EmptySupport,
    #[error("coupling distribution is empty")]
    EmptyDistribution,
    #[error("adaptive step fell below {min_dt:e} s at t = {t:e} s")]
    StepUnderflow { t: f64, min_dt: f64 },
    #[error("integration window contains no samples")]
    EmptyWindow,
    #[error("fit did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("data do not bracket the resonance frequency {omega0:e} Hz")]
    InsufficientSpan { omega0: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
