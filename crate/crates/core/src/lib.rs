//! HTML refinement for retrieval-augmented generation.
//!
//! Raw pages are parsed leniently, cleaned, split into a block tree of
//! adjustable granularity and pruned block by block until the serialized
//! HTML fits a length budget. Blocks are ranked by a pluggable relevance
//! scorer: lexical, embedding (remote) or generative via a token tree over
//! block paths.
#![no_std]

extern crate alloc;

pub mod blocktree;
pub mod cleaner;
pub mod dom;
pub mod error;
pub mod pruner;
pub mod scorers;
pub mod toktree;

pub use blocktree::{BlockNode, BlockPath, BlockTree};
pub use cleaner::{clean, clean_set, compress_set, compress_structure, CleanConfig};
pub use dom::{concat_documents, parse_html, Document, DocumentSet, Element, Node};
pub use error::{Error, Result};
pub use pruner::{
    prune, two_stage_pipeline, Budget, CharCounter, LengthCounter, PruneOutcome, Schedule,
    TokenCounter, WordCounter,
};
pub use scorers::{BlockScorer, GenerativeScorer, LexicalScorer, RelevanceScorer};
pub use toktree::{HashLogits, LogitsProvider, RuleTokenizer, TokenId, TokenTree, Tokenizer};
