use alloc::string::String;

/// Errors produced by the warping kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid dimensions: every extent must be at least 1")]
    EmptyExtent,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("cannot split {channels} channels into {depth} depth layers of {per_layer}")]
    ChannelSplit {
        channels: usize,
        depth: usize,
        per_layer: usize,
    },
    #[error("unknown joint `{0}`")]
    MissingJoint(String),
    #[error("duplicate joint `{0}`")]
    DuplicateJoint(String),
    #[error("invalid skeleton: {0}")]
    Skeleton(String),
    #[error("pose coordinate spaces differ or are not {0}")]
    Space(&'static str),
    #[error("need at least {need} correspondences, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("correspondence count mismatch: {src} source vs {dst} target points")]
    CountMismatch { src: usize, dst: usize },
    #[error("degenerate point set: {0}")]
    Degenerate(&'static str),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
