use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{kind}: shape mismatch {lhs:?} vs {rhs:?}")]
    Shape {
        kind: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{kind}: non-finite input")]
    NonFinite { kind: &'static str },
    #[error("{kind}: index {index} out of range for {len} rows")]
    Index {
        kind: &'static str,
        index: usize,
        len: usize,
    },
    #[error("backward needs a 1x1 loss, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),
    #[error("graph builder is not deterministic: {0} vs {1}")]
    NonDeterministic(f64, f64),
    #[error("triple set has no (you, in, <room>) triple")]
    MissingPlayerLocation,
    #[error("unknown partition strategy `{0}`")]
    UnknownStrategy(String),
    #[error("unknown model variant `{0}`")]
    UnknownVariant(String),
    #[error("unknown aggregation method `{0}`")]
    UnknownAggregation(String),
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("template `{template}` has {slots} slot(s) but {given} object(s) were given")]
    SlotCount {
        template: String,
        slots: usize,
        given: usize,
    },
    #[error("object token {0} is masked out")]
    MaskedObject(usize),
    #[error("template index {0} out of range")]
    UnknownTemplate(usize),
    #[error("non-finite {0} loss")]
    NonFiniteLoss(&'static str),
    #[error("probability {0} outside (0, 1) after clamping")]
    Probability(f64),
    #[error("invalid template `{0}`")]
    Template(String),
    #[error("invalid world spec: {0}")]
    World(String),
    #[error("walkthrough replay mismatch at step {step}: {reason}")]
    Replay { step: usize, reason: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error("environment {env}: {reason}")]
    Env { env: usize, reason: String },
    #[error("vocabulary: {0}")]
    Vocab(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
