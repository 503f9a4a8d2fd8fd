//! Remote embedding-similarity scorer.
//!
//! Wire format: `{query, texts}` in, `{scores}` out, one score per text.

use std::cell::Cell;
use std::sync::Arc;

use blockprune_core::{Error, RelevanceScorer, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cassette::Exchange;

pub const KIND: &str = "embed";

#[derive(Serialize)]
struct EmbedRequest<'a> {
    query: &'a str,
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    scores: Vec<f64>,
}

pub struct EmbeddingClient {
    exchange: Arc<dyn Exchange>,
    pub batch_size: usize,
}

impl EmbeddingClient {
    pub fn new(exchange: Arc<dyn Exchange>, batch_size: usize) -> EmbeddingClient {
        EmbeddingClient {
            exchange,
            batch_size: batch_size.max(1),
        }
    }

    fn batch(&self, query: &str, texts: &[&str]) -> std::result::Result<Vec<f64>, String> {
        let req = serde_json::to_value(EmbedRequest { query, texts }).map_err(|e| e.to_string())?;
        let resp: EmbedResponse = serde_json::from_value(self.exchange.exchange(&req)?)
            .map_err(|e| format!("malformed embedding response: {e}"))?;
        if resp.scores.len() != texts.len() {
            return Err(format!(
                "embedding service returned {} scores for {} texts",
                resp.scores.len(),
                texts.len()
            ));
        }
        if let Some(bad) = resp.scores.iter().find(|s| !s.is_finite()) {
            return Err(format!("embedding service returned score {bad}"));
        }
        Ok(resp.scores)
    }
}

impl RelevanceScorer for EmbeddingClient {
    fn score_blocks(&self, query: &str, blocks: &[&str]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(blocks.len());
        for chunk in blocks.chunks(self.batch_size) {
            out.extend(self.batch(query, chunk).map_err(Error::ScorerUnavailable)?);
        }
        Ok(out)
    }
}

/// Tries `primary`; if it is unavailable, scores with `secondary` instead
/// and remembers that it did.
pub struct Fallback<A, B> {
    pub primary: A,
    pub secondary: B,
    used: Cell<bool>,
}

impl<A, B> Fallback<A, B> {
    pub fn new(primary: A, secondary: B) -> Self {
        Fallback {
            primary,
            secondary,
            used: Cell::new(false),
        }
    }

    pub fn fell_back(&self) -> bool {
        self.used.get()
    }
}

impl<A: RelevanceScorer, B: RelevanceScorer> RelevanceScorer for Fallback<A, B> {
    fn score_blocks(&self, query: &str, blocks: &[&str]) -> Result<Vec<f64>> {
        match self.primary.score_blocks(query, blocks) {
            Err(Error::ScorerUnavailable(_)) => {
                self.used.set(true);
                self.secondary.score_blocks(query, blocks)
            }
            other => other,
        }
    }
}

/// Test double answering `{scores}` from a function of `(query, text)`.
pub struct FnExchange<F>(pub F);

impl<F: Fn(&str, &str) -> f64 + Send + Sync> Exchange for FnExchange<F> {
    fn exchange(&self, request: &Value) -> std::result::Result<Value, String> {
        let query = request["query"].as_str().ok_or("missing query")?;
        let texts = request["texts"].as_array().ok_or("missing texts")?;
        let scores: Vec<f64> = texts
            .iter()
            .map(|t| (self.0)(query, t.as_str().unwrap_or("")))
            .collect();
        Ok(serde_json::json!({ "scores": scores }))
    }
}
