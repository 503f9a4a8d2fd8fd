//! Remote logits provider.
//!
//! Wire format: `{session_id, prefix_tokens, candidates}` in, `{logits}` out.
//! Token ids are those of the rule tokenizer, so the service must share its
//! vocabulary.

use std::sync::Arc;

use blockprune_core::{LogitsProvider, TokenId};
use serde::{Deserialize, Serialize};

use crate::cassette::Exchange;

pub const KIND: &str = "logits";

#[derive(Serialize)]
struct LogitsRequest<'a> {
    session_id: &'a str,
    prefix_tokens: &'a [TokenId],
    candidates: &'a [TokenId],
}

#[derive(Deserialize)]
struct LogitsResponse {
    logits: Vec<f64>,
}

pub struct RemoteLogits {
    exchange: Arc<dyn Exchange>,
    /// Lets the service reuse its cache across the calls of one traversal.
    pub session_id: String,
}

impl RemoteLogits {
    pub fn new(exchange: Arc<dyn Exchange>, session_id: impl Into<String>) -> RemoteLogits {
        RemoteLogits {
            exchange,
            session_id: session_id.into(),
        }
    }
}

impl LogitsProvider for RemoteLogits {
    fn logits(&self, prefix: &[TokenId], candidates: &[TokenId]) -> Result<Vec<f64>, String> {
        let req = serde_json::to_value(LogitsRequest {
            session_id: &self.session_id,
            prefix_tokens: prefix,
            candidates,
        })
        .map_err(|e| e.to_string())?;
        let resp: LogitsResponse = serde_json::from_value(self.exchange.exchange(&req)?)
            .map_err(|e| format!("malformed logits response: {e}"))?;
        if resp.logits.len() != candidates.len() {
            return Err(format!(
                "logits service returned {} values for {} candidates",
                resp.logits.len(),
                candidates.len()
            ));
        }
        Ok(resp.logits)
    }
}
