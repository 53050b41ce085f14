use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("residual undefined for identical distributions")]
    ResidualUndefined,
    #[error("drafted token {token} at position {position} has zero draft probability")]
    ZeroDraftProbability { position: usize, token: u32 },
    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),
    #[error("speedup formula is singular at alpha = 1")]
    SingularAlpha,
    #[error("cannot adapt on empty cluster")]
    EmptyAdaptationCorpus,
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("need at least {k} points for k = {k}, got {points}")]
    TooFewPoints { points: usize, k: usize },
    #[error("label count mismatch: {labels} labels for {records} records")]
    LabelMismatch { labels: usize, records: usize },
    #[error("{distinct} distinct labels but clustering has k = {k}")]
    LabelCardinality { distinct: usize, k: usize },
    #[error("router training needs at least two classes")]
    SingleClass,
    #[error("unknown task tag {0:?}")]
    UnknownTag(String),
    #[error("router has {router} classes but draft set has {drafts} drafts")]
    ClassCountMismatch { router: usize, drafts: usize },
    #[error("vocabulary of {vocab} tokens is too small for generator order {order}")]
    VocabTooSmall { vocab: usize, order: usize },
    #[error("no timing samples")]
    EmptyTimings,
}
