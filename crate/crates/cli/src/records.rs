//! JSONL input records and per-record results.

use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fetch;

/// A raw page: inline markup or a file path relative to the input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HtmlSource {
    Inline(String),
    File { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub query: String,
    #[serde(default)]
    pub htmls: Vec<HtmlSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub urls: Option<Vec<String>>,
}

/// A page ready for parsing.
#[derive(Debug, Clone)]
pub struct RawPage {
    pub source: String,
    pub bytes: Vec<u8>,
}

impl QueryRecord {
    /// Collects the record's pages. Files resolve against `base`; URLs are
    /// looked up in `fetched` (a `fetch` output directory) when given.
    pub fn pages(&self, base: &Path, fetched: Option<&Path>) -> Result<Vec<RawPage>, String> {
        let mut out = Vec::new();
        for (i, h) in self.htmls.iter().enumerate() {
            match h {
                HtmlSource::Inline(s) => out.push(RawPage {
                    source: format!("{}#{}", self.id, i + 1),
                    bytes: s.clone().into_bytes(),
                }),
                HtmlSource::File { file } => {
                    let path = base.join(file);
                    let bytes = std::fs::read(&path)
                        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                    out.push(RawPage {
                        source: file.display().to_string(),
                        bytes,
                    });
                }
            }
        }
        if let (Some(urls), Some(dir)) = (&self.urls, fetched) {
            for url in urls {
                let path = dir.join(fetch::file_name(url));
                if let Ok(bytes) = std::fs::read(&path) {
                    out.push(RawPage {
                        source: url.clone(),
                        bytes,
                    });
                }
            }
        }
        if out.is_empty() {
            return Err(format!("record {} has no HTML", self.id));
        }
        Ok(out)
    }
}

/// One line of input: a record, or the reason it could not be read.
pub type RecordLine = Result<QueryRecord, (String, String)>;

/// Reads JSONL records. A malformed line yields an error entry labelled by
/// its line number; blank lines are skipped.
pub fn read_records(reader: impl BufRead) -> std::io::Result<Vec<RecordLine>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str::<QueryRecord>(&line)
                .map_err(|e| (format!("line {}", n + 1), format!("malformed record: {e}"))),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lengths {
    pub raw: usize,
    pub clean: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage2: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub clean_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prune_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerativeCalls {
    pub calls: usize,
    pub nodes: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordResult {
    pub id: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruned_html: Option<String>,
    /// Unit of `lengths`.
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub lengths: Lengths,
    /// Serialized size in bytes at each stage.
    #[serde(default)]
    pub bytes: Lengths,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generative: Option<GenerativeCalls>,
    /// Stage one was scored lexically after the embedding service failed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fell_back: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RecordResult {
    pub fn failed(id: impl Into<String>, error: impl Into<String>) -> RecordResult {
        RecordResult {
            id: id.into(),
            ok: false,
            error: Some(error.into()),
            ..RecordResult::default()
        }
    }
}

pub fn read_results(reader: impl BufRead) -> Result<Vec<RecordResult>, String> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", n + 1))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_and_file_sources() {
        let line = r#"{"id":"q1","query":"who?","htmls":["<p>a</p>",{"file":"page.html"}]}"#;
        let rec: QueryRecord = serde_json::from_str(line).unwrap();
        assert_eq!(rec.htmls[0], HtmlSource::Inline("<p>a</p>".into()));
        assert_eq!(
            rec.htmls[1],
            HtmlSource::File {
                file: "page.html".into()
            }
        );
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("page.html"), "<p>b</p>").unwrap();
        let pages = rec.pages(dir.path(), None).unwrap();
        assert_eq!(pages[1].bytes, b"<p>b</p>");
        assert_eq!(pages[0].source, "q1#1");
    }

    #[test]
    fn malformed_lines_are_isolated() {
        let input = "{\"id\":\"a\",\"query\":\"q\",\"htmls\":[\"x\"]}\n\nnot json\n";
        let recs = read_records(input.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs[0].is_ok());
        assert_eq!(recs[1].as_ref().unwrap_err().0, "line 3");
    }

    #[test]
    fn empty_record_rejected() {
        let rec = QueryRecord {
            id: "e".into(),
            query: "q".into(),
            htmls: vec![],
            urls: None,
        };
        assert!(rec.pages(Path::new("."), None).is_err());
    }

    #[test]
    fn results_round_trip() {
        let r = RecordResult {
            id: "x".into(),
            ok: true,
            unit: "words".into(),
            lengths: Lengths {
                raw: 10,
                clean: 8,
                stage1: Some(4),
                stage2: None,
            },
            ..RecordResult::default()
        };
        let line = serde_json::to_string(&r).unwrap();
        assert!(!line.contains("stage2"));
        assert_eq!(read_results(line.as_bytes()).unwrap(), [r]);
    }
}
