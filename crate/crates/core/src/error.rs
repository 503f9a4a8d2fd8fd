use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::toktree::TokenId;

/// Errors produced by the core pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// The input decoded to nothing but whitespace.
    EmptyDocument,
    /// `concat_documents` was handed no documents.
    EmptyDocumentSet,
    /// A refinement asked for a granularity that is not strictly finer.
    InvalidGranularity { current: usize, requested: usize },
    /// Deleting every block still leaves the output over the limit.
    BudgetUnattainable { minimal: usize, limit: usize },
    /// Two blocks render to the same block path.
    DuplicatePath(String),
    /// A block path crosses a token whose probability was never computed.
    IncompleteProbabilities(String),
    /// The logits provider failed for the given prefix.
    Provider {
        prefix: Vec<TokenId>,
        message: String,
    },
    /// A relevance scorer could not produce scores.
    ScorerUnavailable(String),
    /// A scorer returned the wrong number of scores, or a non-finite one.
    InvalidScores(String),
    /// A pruning schedule or budget failed validation.
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyDocument => f.write_str("document is empty"),
            Error::EmptyDocumentSet => f.write_str("document set is empty"),
            Error::InvalidGranularity { current, requested } => write!(
                f,
                "granularity {requested} is not finer than the current {current}"
            ),
            Error::BudgetUnattainable { minimal, limit } => write!(
                f,
                "budget {limit} cannot be met; minimal achievable length is {minimal}"
            ),
            Error::DuplicatePath(path) => write!(f, "duplicate block path {path}"),
            Error::IncompleteProbabilities(path) => {
                write!(f, "probabilities missing along block path {path}")
            }
            Error::Provider { prefix, message } => write!(
                f,
                "logits provider failed after a {}-token prefix: {message}",
                prefix.len()
            ),
            Error::ScorerUnavailable(msg) => write!(f, "scorer unavailable: {msg}"),
            Error::InvalidScores(msg) => write!(f, "invalid scores: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
