//! A lenient HTML parser.
//!
//! Tokenizes with a hand-written scanner and builds the tree with a stack of
//! open elements, applying the implied-end-tag rules that matter for real
//! pages (`<p>` closed by block content, `<li>`/`<dd>`/`<dt>`/`<option>`
//! siblings, table cells). It never rejects input: unmatched end tags are
//! dropped and everything still open at EOF is closed.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{count_words, is_void, Document, Element, Node};
use crate::error::{Error, Result};

/// Elements whose content is not parsed as markup. The payload of the
/// first group is stored as [`Node::Raw`]; the second group holds text.
const RAW_TEXT: &[&str] = &["script", "style", "xmp", "iframe", "noembed", "noframes"];
const ESCAPABLE_RAW_TEXT: &[&str] = &["textarea", "title"];

/// Start tags that close an open `<p>`.
const CLOSES_P: &[&str] = &[
    "address",
    "article",
    "aside",
    "blockquote",
    "center",
    "details",
    "dialog",
    "dir",
    "div",
    "dl",
    "fieldset",
    "figcaption",
    "figure",
    "footer",
    "form",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "header",
    "hgroup",
    "hr",
    "li",
    "dd",
    "dt",
    "listing",
    "main",
    "menu",
    "nav",
    "ol",
    "p",
    "plaintext",
    "pre",
    "section",
    "summary",
    "table",
    "ul",
    "xmp",
];

const FORMATTING: &[&str] = &[
    "a", "b", "big", "code", "em", "font", "i", "nobr", "s", "small", "strike", "strong", "tt", "u",
];

const HEADINGS: &[&str] = &["h1", "h2", "h3", "h4", "h5", "h6"];

/// Elements that bound the search for an element "in scope".
const SCOPE_BOUNDARY: &[&str] = &[
    "applet", "caption", "html", "table", "td", "th", "marquee", "object", "template",
];

/// Elements that stop an end tag from closing anything above them, and
/// stop `<li>`/`<dd>`/`<dt>` from closing a sibling item above them.
const SPECIAL: &[&str] = &[
    "address",
    "applet",
    "area",
    "article",
    "aside",
    "base",
    "blockquote",
    "body",
    "caption",
    "center",
    "col",
    "colgroup",
    "dd",
    "details",
    "dir",
    "div",
    "dl",
    "dt",
    "embed",
    "fieldset",
    "figcaption",
    "figure",
    "footer",
    "form",
    "frame",
    "frameset",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "head",
    "header",
    "hgroup",
    "hr",
    "html",
    "iframe",
    "img",
    "input",
    "li",
    "link",
    "listing",
    "main",
    "marquee",
    "menu",
    "meta",
    "nav",
    "noembed",
    "noframes",
    "noscript",
    "object",
    "ol",
    "p",
    "param",
    "plaintext",
    "pre",
    "script",
    "section",
    "select",
    "source",
    "style",
    "summary",
    "table",
    "tbody",
    "td",
    "template",
    "textarea",
    "tfoot",
    "th",
    "thead",
    "title",
    "tr",
    "track",
    "ul",
    "wbr",
    "xmp",
];

enum Token {
    Text(String),
    Comment(String),
    Doctype(String),
    StartTag {
        name: String,
        attrs: Vec<(String, String)>,
        self_closing: bool,
    },
    EndTag(String),
}

struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
}

fn is_tag_name_end(b: u8) -> bool {
    b.is_ascii_whitespace() || b == b'/' || b == b'>'
}

impl<'a> Tokenizer<'a> {
    fn new(src: &'a str) -> Self {
        Tokenizer { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bytes(&self) -> &'a [u8] {
        self.rest().as_bytes()
    }

    fn next_token(&mut self) -> Option<Token> {
        let rest = self.rest();
        if rest.is_empty() {
            return None;
        }
        let b = rest.as_bytes();
        if b[0] == b'<' {
            if let Some(tok) = self.markup() {
                return Some(tok);
            }
            // A `<` that does not open markup is literal text.
            let end = rest[1..].find('<').map_or(rest.len(), |i| i + 1);
            self.pos += end;
            return Some(Token::Text(rest[..end].to_string()));
        }
        let end = rest.find('<').unwrap_or(rest.len());
        self.pos += end;
        Some(Token::Text(rest[..end].to_string()))
    }

    fn markup(&mut self) -> Option<Token> {
        let b = self.bytes();
        match b.get(1) {
            Some(b'!') => Some(self.declaration()),
            Some(b'?') => Some(self.bogus_comment(2)),
            Some(b'/') => match b.get(2) {
                Some(c) if c.is_ascii_alphabetic() => Some(self.end_tag()),
                Some(b'>') => {
                    self.pos += 3;
                    Some(Token::Comment(String::new()))
                }
                Some(_) => Some(self.bogus_comment(2)),
                None => None,
            },
            Some(c) if c.is_ascii_alphabetic() => Some(self.start_tag()),
            _ => None,
        }
    }

    fn declaration(&mut self) -> Token {
        let rest = self.rest();
        if let Some(body) = rest.strip_prefix("<!--") {
            // `<!-->` and `<!--->` are complete, empty comments.
            if body.starts_with('>') {
                self.pos += 5;
                return Token::Comment(String::new());
            }
            if body.starts_with("->") {
                self.pos += 6;
                return Token::Comment(String::new());
            }
            return match body.find("-->") {
                Some(end) => {
                    self.pos += 4 + end + 3;
                    Token::Comment(body[..end].to_string())
                }
                None => {
                    self.pos = self.src.len();
                    Token::Comment(body.to_string())
                }
            };
        }
        if rest.len() >= 9 && rest[2..9].eq_ignore_ascii_case("doctype") {
            let end = rest.find('>').unwrap_or(rest.len());
            self.pos += (end + 1).min(rest.len());
            return Token::Doctype(rest[2..end].to_string());
        }
        self.bogus_comment(2)
    }

    fn bogus_comment(&mut self, skip: usize) -> Token {
        let rest = self.rest();
        match rest.find('>') {
            Some(end) => {
                self.pos += end + 1;
                Token::Comment(rest[skip..end].to_string())
            }
            None => {
                self.pos = self.src.len();
                Token::Comment(rest[skip..].to_string())
            }
        }
    }

    fn end_tag(&mut self) -> Token {
        let rest = self.rest();
        let name_len = rest[2..]
            .bytes()
            .take_while(|&b| !is_tag_name_end(b))
            .count();
        let name = rest[2..2 + name_len].to_ascii_lowercase();
        let after = 2 + name_len;
        let close = self.scan_tag_end(after);
        self.pos += close;
        Token::EndTag(name)
    }

    /// Finds the end of a tag starting at `from` (relative to pos), honouring
    /// quoted attribute values. Returns the offset just past `>` or the end
    /// of input.
    fn scan_tag_end(&self, from: usize) -> usize {
        let b = self.bytes();
        let mut i = from;
        let mut quote: Option<u8> = None;
        while i < b.len() {
            match quote {
                Some(q) if b[i] == q => quote = None,
                Some(_) => {}
                None => match b[i] {
                    b'>' => return i + 1,
                    b'"' | b'\'' if i > 0 && b[i - 1] == b'=' => quote = Some(b[i]),
                    _ => {}
                },
            }
            i += 1;
        }
        b.len()
    }

    fn start_tag(&mut self) -> Token {
        let rest = self.rest();
        let b = rest.as_bytes();
        let name_len = b[1..].iter().take_while(|&&c| !is_tag_name_end(c)).count();
        let name = rest[1..1 + name_len].to_ascii_lowercase();
        let mut i = 1 + name_len;
        let mut attrs: Vec<(String, String)> = Vec::new();
        let mut self_closing = false;
        loop {
            while i < b.len() && (b[i].is_ascii_whitespace() || b[i] == b'/') {
                self_closing = b[i] == b'/';
                i += 1;
            }
            if i >= b.len() {
                break;
            }
            if b[i] == b'>' {
                i += 1;
                break;
            }
            self_closing = false;
            let start = i;
            // The first character may be `=`; later ones stop at it.
            i += rest[i..].chars().next().map_or(1, char::len_utf8);
            while i < b.len()
                && !b[i].is_ascii_whitespace()
                && b[i] != b'='
                && b[i] != b'>'
                && b[i] != b'/'
            {
                i += 1;
            }
            let attr_name = rest[start..i].to_ascii_lowercase();
            let mut j = i;
            while j < b.len() && b[j].is_ascii_whitespace() {
                j += 1;
            }
            let mut value = String::new();
            if j < b.len() && b[j] == b'=' {
                j += 1;
                while j < b.len() && b[j].is_ascii_whitespace() {
                    j += 1;
                }
                if j < b.len() && (b[j] == b'"' || b[j] == b'\'') {
                    let q = b[j];
                    let vstart = j + 1;
                    let vend = b[vstart..]
                        .iter()
                        .position(|&c| c == q)
                        .map_or(b.len(), |p| vstart + p);
                    value = rest[vstart..vend].to_string();
                    j = (vend + 1).min(b.len());
                } else {
                    let vstart = j;
                    while j < b.len() && !b[j].is_ascii_whitespace() && b[j] != b'>' {
                        j += 1;
                    }
                    value = rest[vstart..j].to_string();
                }
                i = j;
            }
            if !attrs.iter().any(|(n, _)| *n == attr_name) {
                attrs.push((attr_name, value));
            }
        }
        self.pos += i;
        Token::StartTag {
            name,
            attrs,
            self_closing,
        }
    }

    /// Consumes the payload of a raw-text element up to (not including) its
    /// end tag.
    fn raw_text(&mut self, tag: &str) -> String {
        let rest = self.rest();
        let bytes = rest.as_bytes();
        let mut search = 0;
        while let Some(off) = rest[search..].find("</") {
            let at = search + off;
            let name_end = at + 2 + tag.len();
            if name_end <= rest.len()
                && rest.is_char_boundary(name_end)
                && rest[at + 2..name_end].eq_ignore_ascii_case(tag)
                && bytes.get(name_end).is_none_or(|&c| is_tag_name_end(c))
            {
                self.pos += at;
                return rest[..at].to_string();
            }
            search = at + 2;
        }
        self.pos = self.src.len();
        rest.to_string()
    }
}

/// Elements whose start pushes a marker onto the formatting list, so
/// formatting opened outside them is not reopened inside.
const FORMATTING_MARKER: &[&str] = &[
    "applet", "caption", "marquee", "object", "td", "template", "th",
];

/// An open (or implicitly closed) formatting element that text inserted
/// later may need reopened.
struct Formatting {
    id: usize,
    tag: String,
    attrs: Vec<(String, String)>,
}

struct TreeBuilder {
    /// Open elements. Index 0 is a pseudo-root holding the top level.
    stack: Vec<Element>,
    /// Identity of each open element, parallel to `stack`.
    ids: Vec<usize>,
    next_id: usize,
    /// Active formatting elements; `None` is a marker.
    active: Vec<Option<Formatting>>,
    /// Next text run must not merge into the current trailing run.
    split_text: bool,
}

impl TreeBuilder {
    fn new() -> Self {
        TreeBuilder {
            stack: alloc::vec![Element::new("")],
            ids: alloc::vec![0],
            next_id: 1,
            active: Vec::new(),
            split_text: false,
        }
    }

    fn push(&mut self, el: Element) -> usize {
        let id = self.next_id;
        self.next_id += 1;
        self.stack.push(el);
        self.ids.push(id);
        id
    }

    fn after_marker(&self) -> usize {
        self.active
            .iter()
            .rposition(Option::is_none)
            .map_or(0, |i| i + 1)
    }

    /// Reopens formatting elements that were closed implicitly by a block
    /// end tag, so later inline content keeps them.
    fn reconstruct(&mut self) {
        let start = self.after_marker();
        let Some(first) = (start..self.active.len()).find(|&i| {
            let id = self.active[i].as_ref().map(|f| f.id);
            !id.is_some_and(|id| self.ids.contains(&id))
        }) else {
            return;
        };
        for i in first..self.active.len() {
            let Some(f) = &self.active[i] else { continue };
            let el = Element {
                tag: f.tag.clone(),
                attrs: f.attrs.clone(),
                children: Vec::new(),
            };
            let id = self.push(el);
            if let Some(f) = &mut self.active[i] {
                f.id = id;
            }
        }
    }

    fn push_formatting(&mut self, id: usize) {
        let el = &self.stack[self.stack.len() - 1];
        let start = self.after_marker();
        let same: Vec<usize> = (start..self.active.len())
            .filter(|&i| {
                self.active[i]
                    .as_ref()
                    .is_some_and(|f| f.tag == el.tag && f.attrs == el.attrs)
            })
            .collect();
        if same.len() >= 3 {
            self.active.remove(same[0]);
        }
        let f = Formatting {
            id,
            tag: el.tag.clone(),
            attrs: el.attrs.clone(),
        };
        self.active.push(Some(f));
    }

    fn text(&mut self, t: String) {
        if !self.in_foreign_content() {
            self.reconstruct();
        }
        self.append(Node::Text(t));
    }

    fn current(&mut self) -> &mut Element {
        self.stack.last_mut().expect("pseudo-root is never popped")
    }

    fn current_tag(&self) -> &str {
        &self.stack[self.stack.len() - 1].tag
    }

    fn append(&mut self, node: Node) {
        let split = core::mem::take(&mut self.split_text);
        let cur = self.current();
        if split {
            cur.children.push(node);
            return;
        }
        if let (Node::Text(t), Some(Node::Text(prev))) = (&node, cur.children.last_mut()) {
            prev.push_str(t);
            return;
        }
        cur.children.push(node);
    }

    fn pop(&mut self) {
        if self.stack.len() > 1 {
            let el = self.stack.pop().unwrap();
            self.ids.pop();
            if FORMATTING_MARKER.contains(&el.tag.as_str()) {
                let start = self.after_marker();
                self.active.truncate(start.saturating_sub(1));
            }
            self.current().children.push(Node::Element(el));
        }
    }

    fn pop_to(&mut self, depth: usize) {
        while self.stack.len() > depth {
            self.pop();
        }
    }

    fn in_foreign_content(&self) -> bool {
        self.stack.iter().any(|e| e.tag == "svg" || e.tag == "math")
    }

    /// Stack index of `tag` if it is open without crossing a scope boundary.
    fn in_scope(&self, tag: &str, extra_boundary: &[&str]) -> Option<usize> {
        for i in (1..self.stack.len()).rev() {
            let t = self.stack[i].tag.as_str();
            if t == tag {
                return Some(i);
            }
            if SCOPE_BOUNDARY.contains(&t) || extra_boundary.contains(&t) {
                return None;
            }
        }
        None
    }

    /// Like `in_scope`, but only a table (or the root) bounds the search, so
    /// a row or cell can be found from inside a cell.
    fn in_table_scope(&self, tag: &str) -> Option<usize> {
        for i in (1..self.stack.len()).rev() {
            let t = self.stack[i].tag.as_str();
            if t == tag {
                return Some(i);
            }
            if matches!(t, "html" | "table" | "template") {
                return None;
            }
        }
        None
    }

    fn close_p(&mut self) {
        if let Some(i) = self.in_scope("p", &["button"]) {
            self.pop_to(i);
        }
    }

    /// `<li>`, `<dd>`, `<dt>`: close an open sibling item unless a special
    /// element other than address/div/p intervenes.
    fn close_list_item(&mut self, closes: &[&str]) {
        for i in (1..self.stack.len()).rev() {
            let t = self.stack[i].tag.as_str();
            if closes.contains(&t) {
                self.pop_to(i);
                return;
            }
            if SPECIAL.contains(&t) && !matches!(t, "address" | "div" | "p") {
                return;
            }
        }
    }

    fn start_tag(&mut self, name: String, attrs: Vec<(String, String)>, self_closing: bool) {
        let foreign = self.in_foreign_content();
        if !foreign {
            match name.as_str() {
                "li" => self.close_list_item(&["li"]),
                "dd" | "dt" => self.close_list_item(&["dd", "dt"]),
                "option" | "optgroup" => {
                    if self.current_tag() == "option" {
                        self.pop();
                    }
                }
                "tr" => {
                    if let Some(i) = self.in_table_scope("tr") {
                        self.pop_to(i);
                    }
                }
                "td" | "th" => {
                    let open = self
                        .in_table_scope("td")
                        .into_iter()
                        .chain(self.in_table_scope("th"))
                        .max();
                    if let Some(i) = open {
                        self.pop_to(i);
                    }
                }
                "a" => {
                    let start = self.after_marker();
                    let open = self.active[start..]
                        .iter()
                        .flatten()
                        .find(|f| f.tag == "a")
                        .map(|f| f.id);
                    if let Some(id) = open {
                        self.end_tag("a");
                        self.active
                            .retain(|f| f.as_ref().is_none_or(|f| f.id != id));
                        if let Some(i) = self.ids.iter().position(|&x| x == id) {
                            self.remove_open(i);
                        }
                    }
                }
                _ => {}
            }
            if CLOSES_P.contains(&name.as_str()) {
                self.close_p();
            }
            if HEADINGS.contains(&name.as_str()) && HEADINGS.contains(&self.current_tag()) {
                self.pop();
            }
        }
        let reopen = !SPECIAL.contains(&name.as_str())
            || matches!(
                name.as_str(),
                "applet" | "marquee" | "object" | "area" | "br" | "embed" | "img" | "wbr" | "input"
            );
        if !foreign && reopen {
            self.reconstruct();
        }
        let el = Element {
            tag: name,
            attrs,
            children: Vec::new(),
        };
        if is_void(&el.tag) || (self_closing && foreign) {
            self.current().children.push(Node::Element(el));
            return;
        }
        let formatting = !foreign && FORMATTING.contains(&el.tag.as_str());
        let marker = !foreign && FORMATTING_MARKER.contains(&el.tag.as_str());
        let id = self.push(el);
        if formatting {
            self.push_formatting(id);
        } else if marker {
            self.active.push(None);
        }
    }

    /// Closes the open element at stack index `i` while leaving the elements
    /// above it open; they attach after it once closed.
    fn remove_open(&mut self, i: usize) {
        let el = self.stack.remove(i);
        self.ids.remove(i);
        self.stack[i - 1].children.push(Node::Element(el));
        self.split_text = true;
    }

    fn end_tag(&mut self, name: &str) {
        if name == "br" {
            self.current()
                .children
                .push(Node::Element(Element::new("br")));
            return;
        }
        if matches!(name, "tr" | "td" | "th" | "tbody" | "thead" | "tfoot") {
            if let Some(i) = self.in_table_scope(name) {
                self.pop_to(i);
            }
            return;
        }
        if HEADINGS.contains(&name) {
            // Any open heading matches any heading end tag.
            if let Some(i) = HEADINGS.iter().filter_map(|h| self.in_scope(h, &[])).max() {
                self.pop_to(i);
            }
            return;
        }
        if SPECIAL.contains(&name) {
            // Block-level end tags close everything above a match in scope.
            let extra: &[&str] = match name {
                "p" => &["button"],
                "li" => &["ol", "ul"],
                _ => &[],
            };
            if let Some(i) = self.in_scope(name, extra) {
                self.pop_to(i);
            } else if name == "p" {
                // A stray `</p>` still breaks the text flow.
                self.current()
                    .children
                    .push(Node::Element(Element::new("p")));
            }
            return;
        }
        if FORMATTING.contains(&name) && !self.in_foreign_content() {
            let start = self.after_marker();
            let entry = (start..self.active.len())
                .rev()
                .find(|&k| self.active[k].as_ref().is_some_and(|f| f.tag == name));
            if let Some(k) = entry {
                let id = self.active[k].as_ref().map(|f| f.id).unwrap_or(0);
                let Some(i) = self.ids.iter().position(|&x| x == id) else {
                    self.active.remove(k);
                    return;
                };
                if self.in_scope(name, &[]) != Some(i) {
                    return;
                }
                self.active.remove(k);
                if !self.stack[i + 1..]
                    .iter()
                    .any(|e| SPECIAL.contains(&e.tag.as_str()))
                {
                    self.pop_to(i);
                } else {
                    // Misnested: close the formatting element but keep the
                    // blocks opened inside it. Text on either side of the
                    // tag stays separate.
                    self.remove_open(i);
                }
                return;
            }
        }
        for i in (1..self.stack.len()).rev() {
            let t = self.stack[i].tag.as_str();
            if t == name {
                self.pop_to(i);
                return;
            }
            if SPECIAL.contains(&t) {
                return;
            }
        }
    }

    fn finish(mut self) -> Document {
        self.pop_to(1);
        let root = self.stack.pop().unwrap();
        Document {
            children: root.children,
        }
    }
}

/// Parses HTML leniently. Fails only when the input holds nothing but
/// whitespace.
pub fn parse_html(src: &str) -> Result<Document> {
    if src.trim().is_empty() {
        return Err(Error::EmptyDocument);
    }
    let src = src.strip_prefix('\u{feff}').unwrap_or(src);
    let mut tokenizer = Tokenizer::new(src);
    let mut builder = TreeBuilder::new();
    while let Some(token) = tokenizer.next_token() {
        match token {
            Token::Text(t) => builder.text(t),
            Token::Comment(c) => builder.append(Node::Comment(c)),
            Token::Doctype(d) => builder.append(Node::Doctype(d)),
            Token::EndTag(name) => builder.end_tag(&name),
            Token::StartTag {
                name,
                attrs,
                self_closing,
            } => {
                let raw = RAW_TEXT.contains(&name.as_str());
                let escapable = ESCAPABLE_RAW_TEXT.contains(&name.as_str());
                let plaintext = name == "plaintext";
                let foreign = builder.in_foreign_content();
                builder.start_tag(name.clone(), attrs, self_closing);
                if foreign || !(raw || escapable || plaintext) || builder.current_tag() != name {
                    continue;
                }
                let payload = if plaintext {
                    let rest = tokenizer.rest().to_string();
                    tokenizer.pos = tokenizer.src.len();
                    rest
                } else {
                    tokenizer.raw_text(&name)
                };
                if !payload.is_empty() {
                    builder.append(if raw {
                        Node::Raw(payload)
                    } else {
                        Node::Text(payload)
                    });
                }
            }
        }
    }
    Ok(builder.finish())
}

/// Words of visible text in `src`, found by tokenizing alone. Every tag is a
/// word boundary, so the count does not depend on how a tree builder would
/// nest or merge the text.
pub fn visible_word_count(src: &str) -> usize {
    let mut tokenizer = Tokenizer::new(src.strip_prefix('\u{feff}').unwrap_or(src));
    let mut count = 0;
    while let Some(token) = tokenizer.next_token() {
        match token {
            Token::Text(t) => count += count_words(&t),
            Token::StartTag { name, .. } => {
                if name == "plaintext" {
                    count += count_words(tokenizer.rest());
                    tokenizer.pos = tokenizer.src.len();
                } else if RAW_TEXT.contains(&name.as_str()) {
                    tokenizer.raw_text(&name);
                } else if ESCAPABLE_RAW_TEXT.contains(&name.as_str()) {
                    count += count_words(&tokenizer.raw_text(&name));
                }
            }
            _ => {}
        }
    }
    count
}
