use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("all samples are missing")]
    AllMissing,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("batch mixes sources `{0}` and `{1}`")]
    MixedSources(String, String),
    #[error("non-finite {task} loss")]
    NonFiniteLoss { task: &'static str },
    #[error("class {0} has no examples")]
    EmptyClass(usize),
    #[error("fold {fold} has a single class; use stratified folds or more data")]
    SingleClassFold { fold: usize },
    #[error("not enough data for an episode: {0}")]
    Episode(String),
}
