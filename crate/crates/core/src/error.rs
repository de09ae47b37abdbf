use thiserror::Error;

/// Errors shared across the toolkit.
///
/// Recoverable conditions that the callers are expected to react to
/// (raising an iterate count, refining a grid, fixing a config) are kept
/// as dedicated variants; soft diagnostics such as a non-decaying norm
/// sequence are reported through result structs instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} lies on a branch partition endpoint")]
    BoundaryPoint(f64),

    #[error("point {0} is outside [0,1]")]
    OutOfDomain(f64),

    #[error("oscillation radius {eps} outside (0, {a1}]")]
    BadRadius { eps: f64, a1: f64 },

    #[error("variation exponent {0} must be >= 1")]
    BadExponent(f64),

    #[error("Lasota-Yorke quantity {quantity} >= 1 at iterate {k}; raise k")]
    InsufficientIterate { k: usize, quantity: f64 },

    #[error("cylinder count {count} for iterate {k} exceeds cap {cap}")]
    CylinderBlowup { k: usize, count: u64, cap: u64 },

    #[error("total masses differ by {0}; equal-mass path requires a match")]
    MassMismatch(f64),

    #[error("image position {0} leaves [0,1] beyond tolerance")]
    RangeViolation(f64),

    #[error("density has a negative cell (index {0}) in a positive-measure constructor")]
    BadDensity(usize),

    #[error("fiber atom count {count} exceeds budget {budget} after compaction")]
    AtomBudgetExceeded { count: usize, budget: usize },

    #[error("grids differ: {0} vs {1}")]
    GridMismatch(usize, usize),

    #[error("rate input {name} = {value} outside [0,1)")]
    BadInput { name: &'static str, value: f64 },

    #[error("iteration did not converge: residual {residual} after {steps} steps")]
    NotConverged { residual: f64, steps: usize },

    #[error("seed has nonzero average {0}; zero-average seeds required")]
    NonZeroMeanSeed(f64),

    #[error("conjugator is not a diffeomorphism: sigma' = {slope} at x = {x}")]
    NotDiffeomorphism { x: f64, slope: f64 },

    #[error("uniform-family checklist item {item} failed at delta = {delta}: {detail}")]
    ChecklistFailure {
        item: &'static str,
        delta: f64,
        detail: String,
    },

    #[error("need at least {need} rows, got {got}")]
    InsufficientData { need: usize, got: usize },

    #[error("table must have at least 2 rows to plot")]
    EmptyTable,

    #[error("config error: {0}")]
    Config(String),

    #[error("experiment error: {0}")]
    Experiment(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
