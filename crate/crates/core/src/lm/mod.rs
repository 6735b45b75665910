//! N-gram language models over token streams: interpolated (Jelinek-Mercer)
//! global models, a per-file cache blend, and abstracted-token streams.

mod abstraction;
mod cache;
mod io;
mod model;

pub use abstraction::{abstract_stream, abstract_token, concrete_stream, AbstractionOptions};
pub use cache::{score_file, CacheState};
pub use io::{load, read_model, save, write_model, FORMAT_VERSION, MAGIC};
pub use model::{FileIds, NgramModel, Vocab, MAX_ORDER};

use thiserror::Error;

pub const DEFAULT_ORDER: usize = 6;
pub const DEFAULT_LAMBDA_JM: f64 = 0.5;
pub const DEFAULT_LAMBDA_CACHE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("order must be in 1..={max}, got {0}", max = MAX_ORDER)]
    BadOrder(usize),
    #[error("interpolation weight must be in (0, 1), got {0}")]
    BadLambda(f64),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model file is truncated")]
    Truncated,
    #[error("model file is corrupt: {0}")]
    Corrupt(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

/// Negative base-2 log probability.
pub fn surprisal(p: f64) -> f64 {
    -p.log2()
}

/// Mean surprisal of a sequence; `None` for an empty one.
pub fn cross_entropy(surprisals: &[f64]) -> Option<f64> {
    if surprisals.is_empty() {
        None
    } else {
        Some(surprisals.iter().sum::<f64>() / surprisals.len() as f64)
    }
}
