//! Deletion audit log: one JSON line per deleted block.

use std::io::Write;

use blockprune_core::pruner::Deletion;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub id: String,
    pub stage: String,
    pub path: String,
    pub score: f64,
    pub length_after: usize,
}

impl AuditEntry {
    pub fn from_deletion(id: &str, stage: &str, d: &Deletion) -> AuditEntry {
        AuditEntry {
            id: id.to_string(),
            stage: stage.to_string(),
            path: d.path.to_string(),
            score: d.score,
            length_after: d.length_after,
        }
    }
}

pub fn write_audit<'a>(
    out: &mut impl Write,
    entries: impl IntoIterator<Item = &'a AuditEntry>,
) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut *out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
