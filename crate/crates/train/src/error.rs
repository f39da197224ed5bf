use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("{stage}: loss became {loss} after {utterances} utterances; aborting")]
    Diverged {
        stage: String,
        utterances: u64,
        loss: f64,
    },
    #[error(transparent)]
    Neural(#[from] wbeam_neural::NeuralError),
    #[error(transparent)]
    Core(#[from] wbeam_core::Error),
}

pub type Result<T> = std::result::Result<T, TrainError>;
