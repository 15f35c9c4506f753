use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("index out of range: {what} = {index}, expected < {bound}")]
    IndexOutOfRange { what: &'static str, index: usize, bound: usize },

    #[error("stage {stage} outside 1..={horizon}")]
    StageOutOfRange { stage: usize, horizon: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("gain estimate did not converge within horizon cap {cap} (last change {last_change:e})")]
    GainNotConverged { cap: usize, last_change: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("run with seed {seed} failed: {source}")]
    SeedFailed {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_index(what: &'static str, index: usize, bound: usize) -> Result<()> {
    if index < bound {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, bound })
    }
}
