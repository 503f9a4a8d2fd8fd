//! Query-independent cleaning: content removal followed by lossless
//! structural compression.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dom::{count_words, Document, DocumentSet, Element, Node};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanConfig {
    /// Attributes kept verbatim. Every other attribute is dropped.
    pub attr_allowlist: BTreeSet<String>,
    /// Elements removed together with their payload.
    pub drop_tags: BTreeSet<String>,
    pub strip_comments: bool,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            attr_allowlist: BTreeSet::new(),
            drop_tags: ["script", "style"].iter().map(|s| s.to_string()).collect(),
            strip_comments: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Content cleaning

fn clean_nodes(nodes: Vec<Node>, cfg: &CleanConfig) -> Vec<Node> {
    nodes
        .into_iter()
        .filter_map(|node| match node {
            Node::Element(el) => {
                if cfg.drop_tags.contains(&el.tag) {
                    None
                } else {
                    Some(Node::Element(clean_element(el, cfg)))
                }
            }
            Node::Comment(_) if cfg.strip_comments => None,
            Node::Doctype(_) => None,
            other => Some(other),
        })
        .collect()
}

fn clean_element(mut el: Element, cfg: &CleanConfig) -> Element {
    el.attrs
        .retain(|(name, _)| cfg.attr_allowlist.contains(name));
    el.children = clean_nodes(el.children, cfg);
    el
}

/// Removes dropped elements (with their payload), comments, declarations
/// and every attribute outside the allowlist. Text runs are untouched.
pub fn clean_content(doc: Document, cfg: &CleanConfig) -> Document {
    Document {
        children: clean_nodes(doc.children, cfg),
    }
}

// ---------------------------------------------------------------------------
// Structural compression

fn is_blank(text: &str) -> bool {
    count_words(text) == 0
}

/// Joins two adjacent text runs. A space is inserted when neither side
/// already provides whitespace, so the runs stay separate words.
fn join_text(prev: &mut String, next: &str) {
    let boundary = prev.ends_with(char::is_whitespace) || next.starts_with(char::is_whitespace);
    if !boundary && !prev.is_empty() && !next.is_empty() {
        prev.push(' ');
    }
    prev.push_str(next);
}

pub(crate) fn push_merged(out: &mut Vec<Node>, node: Node) {
    if let Node::Text(t) = &node {
        if let Some(Node::Text(prev)) = out.last_mut() {
            join_text(prev, t);
            return;
        }
    }
    out.push(node);
}

fn compress_nodes(nodes: Vec<Node>) -> Vec<Node> {
    let mut out = Vec::with_capacity(nodes.len());
    for node in nodes {
        match node {
            Node::Text(t) if is_blank(&t) => {}
            Node::Element(el) => {
                if let Some(n) = compress_element(el) {
                    push_merged(&mut out, n);
                }
            }
            other => push_merged(&mut out, other),
        }
    }
    out
}

/// Compresses one element: children first, then the element disappears if
/// it ended up with no children, or is replaced by its only child element.
fn compress_element(mut el: Element) -> Option<Node> {
    el.children = compress_nodes(el.children);
    match el.children.len() {
        0 => None,
        1 if matches!(el.children[0], Node::Element(_)) => el.children.pop(),
        _ => Some(Node::Element(el)),
    }
}

/// Merges chains of single-nested tags into their innermost element and
/// removes elements without text or children. Whitespace-only text runs
/// are dropped and adjacent runs merged. The result is a fixed point.
pub fn compress_structure(doc: Document) -> Document {
    Document {
        children: compress_nodes(doc.children),
    }
}

/// Structural compression for a document set. Document roots keep their
/// numbered tags; a root left without content is dropped from the set.
pub fn compress_set(set: DocumentSet) -> DocumentSet {
    let docs = set
        .docs
        .into_iter()
        .filter_map(|mut d| {
            d.root.children = compress_nodes(d.root.children);
            (!d.root.children.is_empty()).then_some(d)
        })
        .collect();
    DocumentSet { docs }
}

pub fn clean(doc: Document, cfg: &CleanConfig) -> Document {
    compress_structure(clean_content(doc, cfg))
}

pub fn clean_set(set: DocumentSet, cfg: &CleanConfig) -> DocumentSet {
    let docs = set
        .docs
        .into_iter()
        .map(|mut d| {
            d.root = clean_element(d.root, cfg);
            d
        })
        .collect();
    compress_set(DocumentSet { docs })
}

/// True when no element is empty and no element is a single-nested wrapper
/// around exactly one element.
pub fn is_compressed(nodes: &[Node]) -> bool {
    nodes.iter().all(|n| match n {
        Node::Text(t) => !is_blank(t),
        Node::Element(el) => {
            let single = el.children.len() == 1 && matches!(el.children[0], Node::Element(_));
            !el.children.is_empty() && !single && is_compressed(&el.children)
        }
        _ => true,
    }) && !nodes
        .windows(2)
        .any(|w| matches!(w, [Node::Text(_), Node::Text(_)]))
}
