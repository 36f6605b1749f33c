use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value in layer {layer}: {context}")]
    Numerical { layer: usize, context: &'static str },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("block {block} of sequence {sequence}: {source}")]
    Block {
        sequence: usize,
        block: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
