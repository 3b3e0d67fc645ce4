use thiserror::Error;

use crate::al_sim::SimError;
use crate::config::ConfigError;
use crate::corpus::CorpusError;
use crate::ngram::LmError;
use crate::prune::PruneError;
use crate::quality::QualityError;
use crate::tokenizer::TokenizerError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for pipeline-level calls that cross module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
