use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("MIDI parse error: {0}")]
    Midi(String),

    #[error("unsupported MIDI feature: {0}")]
    UnsupportedMidi(String),

    #[error("roll format error: {0}")]
    RollFormat(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArg(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training failed: {0}")]
    Train(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
