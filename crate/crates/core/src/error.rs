use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("module vector side {got:?} cannot be used where {expected:?} is required")]
    SideMismatch {
        expected: crate::scheme::Side,
        got: crate::scheme::Side,
    },

    #[error("singular basis: |det| = {det:e}")]
    SingularBasis { det: f64 },

    #[error("degenerate projection: {0}")]
    DegenerateProjection(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("singular hull point: internal coordinate within {margin:e} of the window boundary")]
    Singular { margin: f64 },

    #[error("hull sampling gave up after {attempts} attempts")]
    RetryExhausted { attempts: usize },

    #[error("enumeration would visit about {estimate} candidates (cap {cap})")]
    ResourceCap { estimate: u64, cap: u64 },

    #[error("patch is empty")]
    EmptyPatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("margin violation: need {required}, have {available}")]
    MarginViolation { required: f64, available: f64 },

    #[error("translate grid is empty")]
    EmptyGrid,

    #[error("cycle entries do not sum to zero (sum {sum:?})")]
    NonZeroSum { sum: Vec<i64> },

    #[error("no Bragg decomposition found for target {target:?}")]
    OracleFailure { target: Vec<i64> },

    #[error("{coords:?} is not a Bragg peak of the table")]
    NotBragg { coords: Vec<i64> },

    #[error("leakage bound {bound:e} exceeds tolerance {tolerance:e}")]
    Leakage { bound: f64, tolerance: f64 },

    #[error("truncation tail {tail:e} exceeds budget {budget:e}")]
    TailBudget { tail: f64, budget: f64 },

    #[error("no cycle-function value for canonical cycle {0}")]
    MissingCycleValue(String),

    #[error("amplitudes were taken from a different patch (table {table:016x}, patch {patch:016x})")]
    PatchMismatch { table: u64, patch: u64 },

    #[error("patch and table describe different sets: {0}")]
    SchemeMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of an injected search oracle rather than of the numerics.
    pub fn is_oracle_failure(&self) -> bool {
        matches!(self, Error::OracleFailure { .. })
    }
}
