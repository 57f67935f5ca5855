use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shift space: {0}")]
    InvalidSpace(String),

    #[error("transition matrix is not primitive")]
    NotPrimitive,

    #[error("connector gap {gap} is smaller than the primitivity index {index}")]
    GapTooSmall { gap: usize, index: usize },

    #[error("word is not admissible at position {position}")]
    NotAdmissible { position: usize },

    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: u8, alphabet: usize },

    #[error("words too short: need length {needed}, got {got}")]
    WordsTooShort { needed: usize, got: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("empirical depth {have} is below requested depth {want}")]
    DepthExceedsEmpirical { have: usize, want: usize },

    #[error("separated family stalled at {achieved} of {target} words")]
    ShortFamily { achieved: usize, target: usize },

    #[error("separation margin violated: delta*log(m(m-1)) = {lhs:.6} must be below eta = {eta:.6}")]
    InfeasibleMargin { lhs: f64, eta: f64 },

    #[error("cylinder has zero mass")]
    ZeroCylinder,

    #[error("target cylinder visited fewer than two times")]
    NotRecurrent,

    #[error("degenerate regression input: {0}")]
    Degenerate(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("level {a} outside [{lo}, {hi}]")]
    OutsideLf { a: f64, lo: f64, hi: f64 },

    #[error("invalid cocycle: {0}")]
    InvalidCocycle(String),

    #[error("matrix product is numerically singular")]
    SingularProduct,

    #[error("infeasible schedule parameters: {0}")]
    InfeasibleParams(String),

    #[error("family words are not pairwise separated ({0} vs {1})")]
    FamilyNotSeparated(usize, usize),

    #[error("periodic orbits are not disjoint")]
    OrbitsNotDisjoint,

    #[error("block sampler stalled after {attempts} attempts (stage {stage})")]
    SamplerStalled { stage: usize, attempts: usize },

    #[error("schedule has an unfilled family slot")]
    UnfilledFamily,

    #[error("tree too large to enumerate: {0} leaves")]
    TreeTooLarge(String),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
