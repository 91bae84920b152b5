use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("observation norm {norm} exceeds declared bound {bound}")]
    NormBoundViolated { norm: f64, bound: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("block size mismatch: expected {expected} observations, got {got}")]
    BlockSizeMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("threshold policy mode {got} cannot be used here (expected a {expected} mode)")]
    PolicyModeMismatch { got: String, expected: &'static str },

    #[error("test already decided at step {tau}")]
    TestAlreadyDecided { tau: u64 },

    #[error("step cap {n_max} reached")]
    CapReached { n_max: u64 },

    #[error("stream ended after {got} increments, {needed} required")]
    InsufficientData { needed: u64, got: u64 },

    #[error("stream error: {0}")]
    Stream(String),

    #[error("covariance is degenerate: tr(Sigma^2) = 0 and delta = 0")]
    DegenerateSigma,

    #[error("delta is zero; oracle sample size is unbounded")]
    NullDelta,

    #[error("no sample size up to the cap {n_cap} satisfies the power requirement")]
    CapExceeded { n_cap: u64 },

    #[error("invalid experiment configuration: {0}")]
    Config(String),

    #[error("only {usable} delta cells rejected in at least 99% of trials; need 2 for a slope fit")]
    InsufficientRejections { usable: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
