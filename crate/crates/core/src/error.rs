use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point lies behind the second camera (depth {0})")]
    DepthBehindCamera(f64),
    #[error("rays are parallel; cannot triangulate")]
    DegenerateRays,
    #[error("essential matrix has rank < 2")]
    RankDeficient,
    #[error("matrix is not a valid essential matrix: {0}")]
    NotEssential(String),
    #[error("cheirality vote tied at {0} positive points")]
    AmbiguousCheirality(usize),
    #[error("need at least {needed} correspondences, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("depth-ratio denominator vanished ({0:e})")]
    DegenerateDepth(f64),
    #[error("projection denominator vanished ({0:e})")]
    DegenerateProjection(f64),
    #[error("eigen solver failed: {0}")]
    IllConditioned(String),
    #[error("RANSAC found no consensus (best {best} inliers)")]
    NoConsensus { best: usize },
    #[error("constraint Jacobian lost rank")]
    RankLoss,
    #[error("only {found} of {wanted} visible points after {attempts} attempts")]
    VisibilityExhausted {
        found: usize,
        wanted: usize,
        attempts: usize,
    },
}
