use alloc::string::String;

use crate::proxy::ProxyKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("normal {index} is not unit length (norm {norm})")]
    NonUnitNormal { index: usize, norm: f64 },
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("k = {k} is out of range for {n} points")]
    KOutOfRange { k: usize, n: usize },
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("all points coincide")]
    CoincidentPoints,
    #[error("degenerate labeling: single class")]
    DegenerateLabeling,
    #[error("need at least {needed} distinct values, got {got}")]
    TooFewDistinctValues { needed: usize, got: usize },
    #[error("expected {expected:?} proxy values, got {got:?}")]
    WrongProxyKind { expected: ProxyKind, got: ProxyKind },
    #[error("subset size {m} is too large for {n} points (source and target need 2m <= n)")]
    SubsetTooLarge { m: usize, n: usize },
    #[error("the {class} class is empty")]
    EmptyClass { class: &'static str },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(&'static str),
    #[error(
        "parameter layout does not match the architecture ({expected} scalars expected, got {got})"
    )]
    ParamShape { expected: usize, got: usize },
    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: String },
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(
        "no sharp edges below the threshold (smallest dihedral angle {min_dihedral_deg:.2} deg)"
    )]
    NoSharpEdges { min_dihedral_deg: f64 },
    #[error("no points lie in the sharp region")]
    NoPointsInSharpRegion,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("sink failed after {written} points: {message}")]
    Sink { written: usize, message: String },
}
