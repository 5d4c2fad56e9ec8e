use thiserror::Error;

/// Errors produced by the strip engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("path has {got} labels but width is {width}")]
    LabelLength { width: usize, got: usize },

    #[error("path width must be positive")]
    ZeroWidth,

    #[error("path escapes the strip 0 <= y <= x <= y + N: lowest vertex at height {anchor}")]
    OutsideStrip { anchor: i64 },

    #[error("invalid path literal {0:?}: expected a string over {{U, R}}")]
    PathLiteral(String),

    #[error("local move {kind:?} at position {position} is not applicable: {reason}")]
    InapplicableMove {
        kind: crate::lattice::MoveKind,
        position: usize,
        reason: &'static str,
    },

    #[error("target path does not sit weakly above the source path")]
    TargetBelow,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("configuration length {got} does not match path width {width}")]
    ConfigLength { width: usize, got: usize },

    #[error("width {n} exceeds the exact-enumeration cap {cap}")]
    OverCap { n: usize, cap: usize },

    #[error("chain is reducible: {closed_classes} closed communicating classes, stationary measure is not unique")]
    Reducible { closed_classes: usize },

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("singular matrix-ansatz case: alpha*beta = q^{l} * gamma*delta (within tolerance)")]
    Singular { l: usize },

    #[error("matrix-ansatz normalizer is {0}, cannot normalize")]
    Normalizer(f64),

    #[error("scaling parameter eps = {eps} is infeasible: scaled weight {name} = {value} is not in (0, 1)")]
    InfeasibleEpsilon { eps: f64, name: &'static str, value: f64 },

    #[error("Askey-Wilson parameters inadmissible: {0}")]
    Inadmissible(String),

    #[error("atom generated by {chi} is within {gap:e} of the threshold |chi q^j| = 1")]
    NearDegenerateAtom { chi: f64, gap: f64 },

    #[error("quadrature did not reach relative tolerance {tol:e} within {panels} panels (estimate {estimate:e})")]
    Quadrature { tol: f64, panels: usize, estimate: f64 },

    #[error("shock region (A*C = {ac} >= 1): the Askey-Wilson representation needs A*C < 1")]
    ShockRegion { ac: f64 },

    #[error("coupling hypothesis violated: {0}")]
    Coupling(String),
}

pub type Result<T> = std::result::Result<T, Error>;
