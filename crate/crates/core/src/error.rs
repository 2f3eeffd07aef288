use thiserror::Error;

/// A problem with a model description. Every variant names the offending element.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("cycle in joint graph through joint `{0}`")]
    Cycle(String),
    #[error("joint `{0}`: non-unit axis")]
    NonUnitAxis(String),
    #[error("link `{0}`: inertia not SPD")]
    InertiaNotSpd(String),
    #[error("joint `{joint}` references unknown link `{link}`")]
    UnknownLink { joint: String, link: String },
    #[error("link `{0}` has more than one parent joint")]
    MultipleParents(String),
    #[error("link `{0}` is not connected to the base")]
    Disconnected(String),
    #[error("base link `{0}` is a joint child")]
    BaseHasParent(String),
    #[error("unknown base link `{0}`")]
    UnknownBase(String),
    #[error("`{0}` has non-finite values")]
    NonFinite(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("matrix is not skew-symmetric (symmetric part norm {0:e})")]
    NotSkew(f64),
    #[error("matrix is not a twist (bottom row norm {0:e})")]
    NotTwist(f64),
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("expected {expected} values for `{what}`, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("non-finite value at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape loop is not closed: endpoint gap {0:e}")]
    OpenLoop(f64),
    #[error("trajectory: {0}")]
    Trajectory(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
