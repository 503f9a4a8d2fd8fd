//! Character-set sniffing for raw HTML bytes.

use blockprune_core::{parse_html, Document};
use encoding_rs::{Encoding, UTF_16BE, UTF_16LE, UTF_8, WINDOWS_1252};

const PRESCAN_BYTES: usize = 1024;

fn charset_param(s: &str) -> Option<&str> {
    let at = s.to_ascii_lowercase().find("charset")?;
    let rest = s[at + "charset".len()..].trim_start();
    let rest = rest.strip_prefix('=')?.trim_start();
    let rest = rest.trim_start_matches(['"', '\'']);
    let end = rest
        .find(|c: char| c == '"' || c == '\'' || c == ';' || c == '>' || c.is_whitespace())
        .unwrap_or(rest.len());
    let label = &rest[..end];
    (!label.is_empty()).then_some(label)
}

/// Looks for `<meta charset=...>` or an `http-equiv` content type in the
/// first kilobyte.
fn prescan(bytes: &[u8]) -> Option<&'static Encoding> {
    let head = &bytes[..bytes.len().min(PRESCAN_BYTES)];
    let text = String::from_utf8_lossy(head);
    let lower = text.to_ascii_lowercase();
    let mut from = 0;
    while let Some(i) = lower[from..].find("<meta") {
        let start = from + i;
        let end = lower[start..].find('>').map_or(lower.len(), |e| start + e);
        if let Some(label) = charset_param(&text[start..end]) {
            if let Some(enc) = Encoding::for_label(label.as_bytes()) {
                // A meta declaration of UTF-16 cannot be right: the bytes
                // were readable as ASCII.
                return Some(if enc == UTF_16LE || enc == UTF_16BE {
                    UTF_8
                } else {
                    enc
                });
            }
        }
        from = end;
    }
    None
}

/// Picks the encoding: byte-order mark, then the transport content type,
/// then a meta declaration, then UTF-8 if the bytes are valid UTF-8 and
/// windows-1252 otherwise.
pub fn sniff_encoding(bytes: &[u8], content_type: Option<&str>) -> &'static Encoding {
    if let Some((enc, _)) = Encoding::for_bom(bytes) {
        return enc;
    }
    if let Some(enc) = content_type
        .and_then(charset_param)
        .and_then(|l| Encoding::for_label(l.as_bytes()))
    {
        return enc;
    }
    if let Some(enc) = prescan(bytes) {
        return enc;
    }
    if std::str::from_utf8(bytes).is_ok() {
        UTF_8
    } else {
        WINDOWS_1252
    }
}

pub fn decode_html(bytes: &[u8], content_type: Option<&str>) -> String {
    let enc = sniff_encoding(bytes, content_type);
    let (text, _, _) = enc.decode(bytes);
    text.into_owned()
}

pub fn parse_bytes(bytes: &[u8], content_type: Option<&str>) -> blockprune_core::Result<Document> {
    parse_html(&decode_html(bytes, content_type))
}
