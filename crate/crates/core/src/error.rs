use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("period {t} minus lag {lag} is before the first period")]
    OutOfRange { t: usize, lag: usize },

    #[error("undefined rate: {0}")]
    UndefinedRate(String),

    #[error("empty vocabulary: no token survives the frequency filter")]
    EmptyVocabulary,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no training examples: {0}")]
    NoTrainingExamples(String),

    #[error("undefined similarity: zero-norm vector")]
    UndefinedSimilarity,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("degenerate batch: no observed prices")]
    DegenerateBatch,

    #[error("training diverged at epoch {epoch}: {message}")]
    TrainingDiverged { epoch: usize, message: String },

    #[error("unknown product: {0}")]
    UnknownProduct(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("no overlap between periods {current} and {base}")]
    NoOverlap { current: usize, base: usize },

    #[error("degenerate basket: {0}")]
    DegenerateBasket(String),

    #[error("hedonic coverage error between periods {current} and {base}: missing {missing:?}")]
    Coverage {
        current: usize,
        base: usize,
        missing: Vec<String>,
    },

    #[error("chain step {step}: {source}")]
    ChainStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid market spec: {0}")]
    InvalidSpec(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
