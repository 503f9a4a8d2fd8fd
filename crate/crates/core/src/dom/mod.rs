//! Owned HTML trees: parsing, serialization and visible-text extraction.
//!
//! Text runs keep the source bytes untouched (character references are not
//! decoded in storage). Decoding and whitespace collapsing only happen when
//! visible text is extracted, so serializing a tree reproduces its source
//! markup for every run that survived.

mod entities;
mod parser;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub use entities::decode_entities;
pub use parser::{parse_html, visible_word_count};

/// A node of a parsed HTML tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Element(Element),
    /// A run of character data, stored exactly as it appeared in the source.
    Text(String),
    Comment(String),
    /// Unparsed payload of a `<script>`/`<style>`-like element.
    Raw(String),
    /// Contents of a `<!...>` declaration, without the delimiters.
    Doctype(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Element {
    /// Lower-cased tag name.
    pub tag: String,
    /// Attributes in source order. Values are stored raw.
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Node>,
}

/// Result of parsing one HTML source: the top-level nodes, with no
/// synthesized `<html>`/`<body>` wrapper.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub children: Vec<Node>,
}

/// One retrieved document inside a [`DocumentSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourcedRoot {
    /// URL or file path the document came from.
    pub source: String,
    /// The document root, tagged `html1`, `html2`, ... in retrieval order.
    pub root: Element,
}

/// Retrieved documents concatenated in retrieval order. The roots are
/// siblings; there is no synthetic wrapper above them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DocumentSet {
    pub docs: Vec<SourcedRoot>,
}

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "keygen", "link", "meta", "param",
    "source", "track", "wbr",
];

pub fn is_void(tag: &str) -> bool {
    VOID_ELEMENTS.contains(&tag)
}

impl Node {
    pub fn text(s: impl Into<String>) -> Node {
        Node::Text(s.into())
    }

    pub fn as_element(&self) -> Option<&Element> {
        match self {
            Node::Element(el) => Some(el),
            _ => None,
        }
    }
}

impl Element {
    pub fn new(tag: impl Into<String>) -> Element {
        Element {
            tag: tag.into(),
            attrs: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn with_children(tag: impl Into<String>, children: Vec<Node>) -> Element {
        Element {
            tag: tag.into(),
            attrs: Vec::new(),
            children,
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn element_children(&self) -> impl Iterator<Item = (usize, &Element)> {
        self.children
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_element().map(|e| (i, e)))
    }

    /// True when no child is an element (Alg. "leaf node").
    pub fn is_leaf(&self) -> bool {
        !self.children.iter().any(|n| matches!(n, Node::Element(_)))
    }

    /// Directly-attached text: this element's own text runs, excluding
    /// anything wrapped by child tags.
    pub fn own_text(&self) -> String {
        let mut words = Vec::new();
        for child in &self.children {
            if let Node::Text(t) = child {
                push_words(t, &mut words);
            }
        }
        words.join(" ")
    }

    /// All visible text under the element, see [`extract_text`].
    pub fn content(&self) -> String {
        extract_text_nodes(&self.children)
    }
}

impl Document {
    pub fn new(children: Vec<Node>) -> Document {
        Document { children }
    }
}

impl DocumentSet {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn roots(&self) -> impl Iterator<Item = &Element> {
        self.docs.iter().map(|d| &d.root)
    }
}

// ---------------------------------------------------------------------------
// Visible text

/// Splits `raw` (a stored text run) into words after decoding character
/// references. A word is a maximal run of non-whitespace scalar values.
pub fn words(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    push_words(raw, &mut out);
    out
}

fn push_words(raw: &str, out: &mut Vec<String>) {
    let decoded = decode_entities(raw);
    out.extend(decoded.split_whitespace().map(String::from));
}

pub fn count_words(raw: &str) -> usize {
    decode_entities(raw).split_whitespace().count()
}

fn collect_words(nodes: &[Node], out: &mut Vec<String>) {
    for node in nodes {
        match node {
            Node::Text(t) => push_words(t, out),
            Node::Element(el) => collect_words(&el.children, out),
            Node::Comment(_) | Node::Raw(_) | Node::Doctype(_) => {}
        }
    }
}

fn extract_text_nodes(nodes: &[Node]) -> String {
    let mut out = Vec::new();
    collect_words(nodes, &mut out);
    out.join(" ")
}

/// Visible text of a node: every text run in document order, character
/// references decoded, runs joined by one space, whitespace collapsed and
/// trimmed. Script/style payloads and comments are not text.
pub fn extract_text(node: &Node) -> String {
    extract_text_nodes(core::slice::from_ref(node))
}

pub fn document_text(doc: &Document) -> String {
    extract_text_nodes(&doc.children)
}

pub fn document_set_text(set: &DocumentSet) -> String {
    let mut out = Vec::new();
    for root in set.roots() {
        collect_words(&root.children, &mut out);
    }
    out.join(" ")
}

/// Number of visible words under the given nodes.
pub fn word_count_nodes(nodes: &[Node]) -> usize {
    nodes
        .iter()
        .map(|n| match n {
            Node::Text(t) => count_words(t),
            Node::Element(el) => word_count_nodes(&el.children),
            _ => 0,
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Serialization

pub fn serialize(node: &Node) -> String {
    let mut out = String::new();
    write_node(node, &mut out);
    out
}

pub fn serialize_element(el: &Element) -> String {
    let mut out = String::new();
    write_element(el, &mut out);
    out
}

pub fn serialize_document(doc: &Document) -> String {
    let mut out = String::new();
    for n in &doc.children {
        write_node(n, &mut out);
    }
    out
}

pub fn serialize_set(set: &DocumentSet) -> String {
    let mut out = String::new();
    for root in set.roots() {
        write_element(root, &mut out);
    }
    out
}

pub(crate) fn write_node(node: &Node, out: &mut String) {
    match node {
        Node::Element(el) => write_element(el, out),
        Node::Text(t) | Node::Raw(t) => out.push_str(t),
        Node::Comment(c) => {
            out.push_str("<!--");
            out.push_str(c);
            out.push_str("-->");
        }
        Node::Doctype(d) => {
            out.push_str("<!");
            out.push_str(d);
            out.push('>');
        }
    }
}

pub(crate) fn write_start_tag(tag: &str, attrs: &[(String, String)], out: &mut String) {
    out.push('<');
    out.push_str(tag);
    for (name, value) in attrs {
        out.push(' ');
        out.push_str(name);
        if value.is_empty() {
            continue;
        }
        out.push('=');
        if !value.contains('"') {
            out.push('"');
            out.push_str(value);
            out.push('"');
        } else if !value.contains('\'') {
            out.push('\'');
            out.push_str(value);
            out.push('\'');
        } else {
            out.push('"');
            out.push_str(&value.replace('"', "&quot;"));
            out.push('"');
        }
    }
    out.push('>');
}

pub(crate) fn write_end_tag(tag: &str, out: &mut String) {
    out.push_str("</");
    out.push_str(tag);
    out.push('>');
}

fn write_element(el: &Element, out: &mut String) {
    write_start_tag(&el.tag, &el.attrs, out);
    if is_void(&el.tag) && el.children.is_empty() {
        return;
    }
    for child in &el.children {
        write_node(child, out);
    }
    write_end_tag(&el.tag, out);
}

// ---------------------------------------------------------------------------
// Concatenation

/// Concatenates retrieved documents in retrieval order, renaming each root
/// to `html1`, `html2`, ... A document whose top level is a single `<html>`
/// element keeps that element as its root; anything else is wrapped in a
/// fresh one. Top-level declarations and comments outside the root are
/// dropped.
pub fn concat_documents<S: Into<String>>(docs: Vec<(S, Document)>) -> Result<DocumentSet> {
    if docs.is_empty() {
        return Err(Error::EmptyDocumentSet);
    }
    let docs = docs
        .into_iter()
        .enumerate()
        .map(|(i, (source, doc))| {
            let mut root = document_root(doc);
            root.tag = format!("html{}", i + 1);
            SourcedRoot {
                source: source.into(),
                root,
            }
        })
        .collect();
    Ok(DocumentSet { docs })
}

fn document_root(doc: Document) -> Element {
    let significant: Vec<&Node> = doc
        .children
        .iter()
        .filter(|n| match n {
            Node::Element(_) => true,
            Node::Text(t) => count_words(t) > 0,
            _ => false,
        })
        .collect();
    if let [Node::Element(el)] = significant.as_slice() {
        if el.tag == "html" {
            let el = (*el).clone();
            return el;
        }
    }
    let children = doc
        .children
        .into_iter()
        .filter(|n| !matches!(n, Node::Doctype(_)))
        .collect();
    Element::with_children("html", children)
}
