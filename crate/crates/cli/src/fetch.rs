//! Downloads pages verbatim into a directory with a JSONL manifest.
//!
//! Each URL is stored as `<sha256(url)>.html`. A URL whose manifest row
//! succeeded and whose file still exists is skipped on later runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::http;

pub const MANIFEST: &str = "manifest.jsonl";
const MAX_BODY: u64 = 64 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub url: String,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    /// SHA-256 of the saved body.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FetchReport {
    pub fetched: usize,
    pub skipped: usize,
    pub failed: usize,
}

impl FetchReport {
    /// Every attempted URL failed.
    pub fn all_failed(&self) -> bool {
        self.failed > 0 && self.fetched == 0 && self.skipped == 0
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(64);
    for b in Sha256::digest(bytes) {
        let _ = write!(out, "{b:02x}");
    }
    out
}

pub fn file_name(url: &str) -> String {
    format!("{}.html", hex_sha256(url.as_bytes()))
}

pub fn read_manifest(dir: &Path) -> std::io::Result<Vec<ManifestRow>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for line in BufReader::new(std::fs::File::open(path)?).lines() {
        let line = line?;
        if let Ok(row) = serde_json::from_str(&line) {
            rows.push(row);
        }
    }
    Ok(rows)
}

fn get(agent: &ureq::Agent, url: &str) -> Result<(u16, Option<String>, Vec<u8>), String> {
    let mut resp = agent.get(url).call().map_err(|e| e.to_string())?;
    let status = resp.status().as_u16();
    let content_type = resp
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    let body = resp
        .body_mut()
        .with_config()
        .limit(MAX_BODY)
        .read_to_vec()
        .map_err(|e| e.to_string())?;
    Ok((status, content_type, body))
}

pub fn fetch_urls(
    urls: &[String],
    out_dir: &Path,
    timeout: Duration,
) -> std::io::Result<FetchReport> {
    std::fs::create_dir_all(out_dir)?;
    let mut rows: BTreeMap<String, ManifestRow> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for row in read_manifest(out_dir)? {
        if !rows.contains_key(&row.url) {
            order.push(row.url.clone());
        }
        rows.insert(row.url.clone(), row);
    }
    let agent = http::agent(timeout);
    let mut report = FetchReport::default();
    for url in urls {
        let file = file_name(url);
        if rows.get(url).is_some_and(|r| r.ok()) && out_dir.join(&file).exists() {
            report.skipped += 1;
            continue;
        }
        let mut row = ManifestRow {
            url: url.clone(),
            file: file.clone(),
            status: None,
            sha256: None,
            content_type: None,
            error: None,
        };
        match get(&agent, url) {
            Ok((status, ct, body)) if (200..300).contains(&status) => {
                std::fs::write(out_dir.join(&file), &body)?;
                row.status = Some(status);
                row.sha256 = Some(hex_sha256(&body));
                row.content_type = ct;
                report.fetched += 1;
            }
            Ok((status, _, _)) => {
                row.status = Some(status);
                row.error = Some(format!("HTTP {status}"));
                report.failed += 1;
            }
            Err(e) => {
                row.error = Some(e);
                report.failed += 1;
            }
        }
        if !rows.contains_key(url) {
            order.push(url.clone());
        }
        rows.insert(url.clone(), row);
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(out_dir.join(MANIFEST))?);
    for url in &order {
        serde_json::to_writer(&mut out, &rows[url])?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(report)
}
