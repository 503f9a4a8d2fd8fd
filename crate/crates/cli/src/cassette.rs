//! Request/response recording for the remote scorers.
//!
//! Remote clients talk through an [`Exchange`]: one JSON request, one JSON
//! reply. [`HttpExchange`] goes over the network; a [`Cassette`] can wrap it
//! to record every reply, or stand in for it to replay them offline. Entries
//! are keyed by the SHA-256 of the service kind and the request body and
//! saved as JSONL sorted by key, so a cassette is stable across runs and
//! worker counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::http;

pub trait Exchange: Send + Sync {
    fn exchange(&self, request: &Value) -> Result<Value, String>;
}

pub struct HttpExchange {
    agent: ureq::Agent,
    url: String,
    retries: u32,
}

impl HttpExchange {
    pub fn new(url: impl Into<String>, timeout: Duration, retries: u32) -> HttpExchange {
        HttpExchange {
            agent: http::agent(timeout),
            url: url.into(),
            retries,
        }
    }
}

impl Exchange for HttpExchange {
    fn exchange(&self, request: &Value) -> Result<Value, String> {
        http::post_json(&self.agent, &self.url, request, self.retries)
    }
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    kind: String,
    response: Value,
}

#[derive(Default)]
pub struct Cassette {
    entries: Mutex<BTreeMap<String, Entry>>,
}

pub fn request_key(kind: &str, request: &Value) -> String {
    let mut h = Sha256::new();
    h.update(kind.as_bytes());
    h.update(b"\n");
    h.update(request.to_string().as_bytes());
    let mut out = String::with_capacity(64);
    for b in h.finalize() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

impl Cassette {
    pub fn new() -> Cassette {
        Cassette::default()
    }

    pub fn load(path: &Path) -> Result<Cassette, String> {
        let file = std::fs::File::open(path)
            .map_err(|e| format!("cannot open cassette {}: {e}", path.display()))?;
        let mut entries = BTreeMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let e: Entry = serde_json::from_str(&line)
                .map_err(|e| format!("{} line {}: {e}", path.display(), n + 1))?;
            entries.insert(e.key.clone(), e);
        }
        Ok(Cassette {
            entries: Mutex::new(entries),
        })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let entries = self.entries.lock().unwrap();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in entries.values() {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, kind: &str, request: &Value) -> Option<Value> {
        let key = request_key(kind, request);
        self.entries
            .lock()
            .unwrap()
            .get(&key)
            .map(|e| e.response.clone())
    }

    pub fn put(&self, kind: &str, request: &Value, response: Value) {
        let key = request_key(kind, request);
        self.entries.lock().unwrap().insert(
            key.clone(),
            Entry {
                key,
                kind: kind.to_string(),
                response,
            },
        );
    }
}

/// Forwards to `inner` and stores each successful reply.
pub struct Recording {
    pub inner: Arc<dyn Exchange>,
    pub cassette: Arc<Cassette>,
    pub kind: &'static str,
}

impl Exchange for Recording {
    fn exchange(&self, request: &Value) -> Result<Value, String> {
        let resp = self.inner.exchange(request)?;
        self.cassette.put(self.kind, request, resp.clone());
        Ok(resp)
    }
}

/// Answers from the cassette only; a missing entry is an error.
pub struct Replaying {
    pub cassette: Arc<Cassette>,
    pub kind: &'static str,
}

impl Exchange for Replaying {
    fn exchange(&self, request: &Value) -> Result<Value, String> {
        self.cassette.get(self.kind, request).ok_or_else(|| {
            format!(
                "no recorded {} response for request {}",
                self.kind,
                &request_key(self.kind, request)[..12]
            )
        })
    }
}
