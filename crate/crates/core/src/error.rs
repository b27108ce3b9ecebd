use thiserror::Error;

/// Errors raised by the measure, the binning strategies, the predictors and
/// the experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NuvError {
    /// An argument violates a precondition (lengths, finiteness, ranges).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// More bins were requested than there are distinct template values.
    #[error("infeasible binning: {bins} bins requested over {unique} unique values")]
    Infeasible { bins: usize, unique: usize },

    /// A bin count that the requested formula cannot accept.
    #[error("invalid bin count: {0}")]
    BinCount(String),

    /// The window has zero variance, so the measure is undefined.
    #[error("degenerate window: variance is zero, dissimilarity is undefined")]
    DegenerateVariance,

    /// A distortion or prediction model that cannot be evaluated.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// A partition has an empty bin or malformed cut vector.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// The greedy optimizer did not converge within its iteration cap.
    #[error("greedy binning exceeded {limit} iterations without converging")]
    IterationLimit { limit: usize },

    /// Experiment configuration problems.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, NuvError>;
