use thiserror::Error;
use wbeam_neural::NeuralError;
use wbeam_train::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] wbeam_core::Error),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

fn core_code(e: &wbeam_core::Error) -> u8 {
    use wbeam_core::Error::*;
    match e {
        Io { .. } | Wav { .. } | Manifest { .. } => EXIT_IO,
        UndefinedSnr(_) | SingularNoise { .. } | Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn neural_code(e: &NeuralError) -> u8 {
    match e {
        NeuralError::Io { .. } | NeuralError::Checkpoint { .. } => EXIT_IO,
        NeuralError::NonFinite(_) => EXIT_NUMERICAL,
        NeuralError::Core(c) => core_code(c),
        _ => EXIT_CONFIG,
    }
}

impl CliError {
    /// Process exit status: 2 configuration, 3 I/O, 4 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => core_code(e),
            CliError::Neural(e) => neural_code(e),
            CliError::Train(TrainError::Diverged { .. }) => EXIT_NUMERICAL,
            CliError::Train(TrainError::Config(_)) => EXIT_CONFIG,
            CliError::Train(TrainError::Neural(e)) => neural_code(e),
            CliError::Train(TrainError::Core(e)) => core_code(e),
        }
    }
}
