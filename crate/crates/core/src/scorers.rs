//! Relevance scorers.
//!
//! [`RelevanceScorer`] scores plain block texts against a query; any such
//! scorer is a [`BlockScorer`]. The generative scorer needs the whole block
//! tree (paths, not texts) and implements [`BlockScorer`] directly.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::Cell;

use crate::blocktree::BlockTree;
use crate::dom::serialize_set;
use crate::error::Result;
use crate::toktree::{CallStats, LogitsProvider, TokenTree, Tokenizer};

/// Scores block texts against a query; higher means more relevant. Output
/// has one finite score per input text, in input order.
pub trait RelevanceScorer {
    fn score_blocks(&self, query: &str, blocks: &[&str]) -> Result<Vec<f64>>;
}

impl<T: RelevanceScorer + ?Sized> RelevanceScorer for &T {
    fn score_blocks(&self, query: &str, blocks: &[&str]) -> Result<Vec<f64>> {
        (**self).score_blocks(query, blocks)
    }
}

impl<T: RelevanceScorer + ?Sized> RelevanceScorer for Box<T> {
    fn score_blocks(&self, query: &str, blocks: &[&str]) -> Result<Vec<f64>> {
        (**self).score_blocks(query, blocks)
    }
}

/// Scores every block of a tree, in block order.
pub trait BlockScorer {
    fn score_tree(&self, query: &str, tree: &BlockTree) -> Result<Vec<f64>>;
}

impl<T: RelevanceScorer + ?Sized> BlockScorer for T {
    fn score_tree(&self, query: &str, tree: &BlockTree) -> Result<Vec<f64>> {
        self.score_blocks(query, &tree.texts())
    }
}

/// Lowercased alphanumeric runs.
pub fn terms(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Okapi BM25 with corpus statistics taken from the blocks being scored.
///
/// `idf(t) = ln(1 + (N - n + 0.5) / (n + 0.5))`, which stays positive for
/// terms present in most blocks. Each distinct query term counts once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalScorer {
    pub k1: f64,
    pub b: f64,
}

impl Default for LexicalScorer {
    fn default() -> Self {
        LexicalScorer { k1: 1.2, b: 0.75 }
    }
}

impl RelevanceScorer for LexicalScorer {
    fn score_blocks(&self, query: &str, blocks: &[&str]) -> Result<Vec<f64>> {
        let query: BTreeSet<String> = terms(query).into_iter().collect();
        let docs: Vec<BTreeMap<String, usize>> = blocks
            .iter()
            .map(|b| {
                let mut tf = BTreeMap::new();
                for t in terms(b) {
                    *tf.entry(t).or_insert(0) += 1;
                }
                tf
            })
            .collect();
        let lens: Vec<f64> = docs
            .iter()
            .map(|tf| tf.values().sum::<usize>() as f64)
            .collect();
        let n = blocks.len() as f64;
        let avgdl = if blocks.is_empty() {
            0.0
        } else {
            lens.iter().sum::<f64>() / n
        };
        let idf: Vec<(&String, f64)> = query
            .iter()
            .map(|t| {
                let df = docs.iter().filter(|tf| tf.contains_key(t)).count() as f64;
                (t, libm::log(1.0 + (n - df + 0.5) / (df + 0.5)))
            })
            .collect();
        Ok(docs
            .iter()
            .zip(&lens)
            .map(|(tf, &dl)| {
                let norm = if avgdl > 0.0 { dl / avgdl } else { 0.0 };
                idf.iter()
                    .map(|&(t, w)| match tf.get(t) {
                        Some(&f) => {
                            let f = f as f64;
                            w * f * (self.k1 + 1.0) / (f + self.k1 * (1.0 - self.b + self.b * norm))
                        }
                        None => 0.0,
                    })
                    .sum()
            })
            .collect())
    }
}

/// Scores blocks by the probability a generative model assigns to their
/// paths, with the serialized HTML and the query as model input.
pub struct GenerativeScorer<T, P> {
    pub tokenizer: T,
    pub provider: P,
    last: Cell<Option<CallStats>>,
}

impl<T: Tokenizer, P: LogitsProvider> GenerativeScorer<T, P> {
    pub fn new(tokenizer: T, provider: P) -> Self {
        GenerativeScorer {
            tokenizer,
            provider,
            last: Cell::new(None),
        }
    }

    /// Model input placed before the path tokens.
    pub fn model_input(&self, query: &str, tree: &BlockTree) -> Vec<u32> {
        let mut text = serialize_set(&tree.docs);
        text.push('\n');
        text.push_str(query);
        self.tokenizer.encode(&text)
    }

    /// Call statistics of the most recent scoring run.
    pub fn last_stats(&self) -> Option<CallStats> {
        self.last.get()
    }
}

impl<T: Tokenizer, P: LogitsProvider> BlockScorer for GenerativeScorer<T, P> {
    fn score_tree(&self, query: &str, tree: &BlockTree) -> Result<Vec<f64>> {
        let input = self.model_input(query, tree);
        let mut trie = TokenTree::build(tree, &self.tokenizer)?;
        let stats = trie.compute_probabilities(&input, &self.provider)?;
        self.last.set(Some(stats));
        Ok(trie.block_scores()?.into_iter().map(|s| s.score).collect())
    }
}
