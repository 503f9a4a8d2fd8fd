//! Generators and independent reference implementations shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use blockprune_core::dom::{decode_entities, parse_html, serialize_document};
use blockprune_core::toktree::{LogitsProvider, TokenId, Tokenizer};
use blockprune_core::{
    clean, concat_documents, BlockTree, CleanConfig, Document, DocumentSet, Element, Node,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

const TAGS: &[&str] = &[
    "div",
    "p",
    "span",
    "section",
    "article",
    "ul",
    "li",
    "a",
    "b",
    "em",
    "nav",
    "header",
    "footer",
    "h2",
    "h3",
    "blockquote",
    "main",
    "aside",
    "strong",
    "code",
];

const WORDS: &[&str] = &[
    "royal",
    "rumble",
    "2018",
    "match",
    "the",
    "of",
    "winner",
    "crowd",
    "&amp;",
    "caf&eacute;",
    "x",
    "entry",
    "number",
    "thirty",
    "wrestler",
    "night",
    "main",
    "event",
    "ring",
    "title",
];

fn random_text<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(0..7);
    let mut s = String::new();
    if rng.gen_bool(0.2) {
        s.push(' ');
    }
    for i in 0..n {
        if i > 0 {
            s.push_str(if rng.gen_bool(0.1) { "\n  " } else { " " });
        }
        s.push_str(WORDS.choose(rng).unwrap());
    }
    if rng.gen_bool(0.2) {
        s.push('\t');
    }
    s
}

/// Random element tree with at most `budget` nodes in total. Text runs are
/// never adjacent, so a serialize/parse round trip keeps the word sequence.
pub fn random_element<R: Rng>(rng: &mut R, budget: &mut usize, depth: usize) -> Element {
    let mut el = Element::new(*TAGS.choose(rng).unwrap());
    if rng.gen_bool(0.3) {
        el.attrs
            .push(("class".into(), format!("c{}", rng.gen_range(0..9))));
    }
    if rng.gen_bool(0.1) {
        el.attrs.push(("id".into(), "a\"b".into()));
    }
    *budget = budget.saturating_sub(1);
    let kids = if depth > 8 { 0 } else { rng.gen_range(0..5) };
    let mut last_text = false;
    for _ in 0..kids {
        if *budget == 0 {
            break;
        }
        let roll = rng.gen_range(0..10);
        if roll < 4 && !last_text {
            *budget -= 1;
            el.children.push(Node::Text(random_text(rng)));
            last_text = true;
        } else if roll == 4 {
            *budget -= 1;
            el.children.push(Node::Comment(" c ".into()));
            last_text = false;
        } else if roll == 5 {
            *budget -= 1;
            el.children
                .push(Node::Element(Element::new(if rng.gen_bool(0.5) {
                    "br"
                } else {
                    "img"
                })));
            last_text = false;
        } else {
            el.children
                .push(Node::Element(random_element(rng, budget, depth + 1)));
            last_text = false;
        }
    }
    el
}

pub fn random_document<R: Rng>(rng: &mut R, max_nodes: usize) -> Document {
    let mut budget = max_nodes;
    let mut children = Vec::new();
    while budget > 0 && (children.is_empty() || rng.gen_bool(0.5)) {
        children.push(Node::Element(random_element(rng, &mut budget, 0)));
    }
    Document { children }
}

pub fn random_set<R: Rng>(rng: &mut R, max_nodes: usize) -> DocumentSet {
    let n = rng.gen_range(1..4);
    let docs = (0..n)
        .map(|i| (format!("doc{i}"), random_document(rng, max_nodes / n)))
        .collect();
    concat_documents(docs).unwrap()
}

/// A random page as the pipeline sees it: serialized, reparsed and cleaned.
/// `None` when cleaning leaves nothing.
pub fn random_clean_set<R: Rng>(rng: &mut R, max_nodes: usize) -> Option<DocumentSet> {
    let n = rng.gen_range(1..4);
    let mut docs = Vec::new();
    for i in 0..n {
        let html = serialize_document(&random_document(rng, max_nodes / n));
        let doc = match parse_html(&html) {
            Ok(d) => clean(d, &CleanConfig::default()),
            Err(_) => continue,
        };
        if !doc.children.is_empty() {
            docs.push((format!("doc{i}"), doc));
        }
    }
    if docs.is_empty() {
        return None;
    }
    let set = blockprune_core::compress_set(concat_documents(docs).unwrap());
    (!set.is_empty()).then_some(set)
}

/// Messy HTML: unclosed and misnested tags, stray end tags, comments,
/// scripts, entities, odd attribute quoting.
pub fn malformed_page<R: Rng>(rng: &mut R, with_tables: bool) -> String {
    let mut s = String::new();
    if rng.gen_bool(0.5) {
        s.push_str("<!DOCTYPE html>");
    }
    if rng.gen_bool(0.6) {
        s.push_str("<html><head><title>");
        s.push_str(&random_text(rng));
        s.push_str("</title>");
        if rng.gen_bool(0.5) {
            s.push_str("<style>p { color: red } a>b{}</style>");
        }
        s.push_str("</head><body>");
    }
    let mut open: Vec<&str> = Vec::new();
    let mut pool: Vec<&str> = TAGS.to_vec();
    pool.extend(["p", "li", "dd", "dt", "i", "h1"]);
    if with_tables {
        pool.extend(["table", "tr", "td"]);
    }
    for _ in 0..rng.gen_range(5..80) {
        match rng.gen_range(0..14) {
            0..=3 => {
                let tag = *pool.choose(rng).unwrap();
                s.push('<');
                s.push_str(tag);
                match rng.gen_range(0..6) {
                    0 => s.push_str(" class=\"k v\""),
                    1 => s.push_str(" data-x='1>2'"),
                    2 => s.push_str(" hidden"),
                    3 => s.push_str(" href=/a/b?c=d&e=f"),
                    _ => {}
                }
                s.push('>');
                open.push(tag);
            }
            4..=7 => s.push_str(&random_text(rng)),
            8 => {
                if let Some(tag) = open.pop() {
                    s.push_str(&format!("</{tag}>"));
                }
            }
            9 => {
                let tag = *pool.choose(rng).unwrap();
                s.push_str(&format!("</{tag}>"));
            }
            10 => s.push_str("<!-- comment <p>not text</p> -->"),
            11 => s.push_str("<script>if (a < b && c > d) { x = \"</p>\"; }</script>"),
            12 => s.push_str("<br>"),
            _ => s.push_str("<img src=\"x.png\" alt=\"pic\">"),
        }
    }
    if rng.gen_bool(0.5) {
        while let Some(tag) = open.pop() {
            s.push_str(&format!("</{tag}>"));
        }
    }
    s
}

/// Whitespace-collapsed visible words, walking the tree independently of
/// the library's text helpers.
pub fn visible_words(nodes: &[Node]) -> Vec<String> {
    fn walk(nodes: &[Node], out: &mut Vec<String>) {
        for n in nodes {
            match n {
                Node::Text(t) => out.extend(
                    decode_entities(t)
                        .split(char::is_whitespace)
                        .filter(|w| !w.is_empty())
                        .map(str::to_string),
                ),
                Node::Element(e) => walk(&e.children, out),
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    walk(nodes, &mut out);
    out
}

pub fn set_words(set: &DocumentSet) -> Vec<String> {
    set.docs
        .iter()
        .flat_map(|d| visible_words(&d.root.children))
        .collect()
}

// ---------------------------------------------------------------------------
// Block tree reference

#[derive(Debug, Clone, PartialEq)]
pub struct RefBlock {
    pub addr: Vec<usize>,
    pub text: String,
    pub is_leaf: bool,
    pub words: usize,
    pub path: String,
}

fn ref_path(root: &Element, addr: &[usize]) -> String {
    let mut out = format!("<{}>", root.tag);
    let mut cur = root;
    for &i in addr {
        let elems: Vec<(usize, &Element)> = cur
            .children
            .iter()
            .enumerate()
            .filter_map(|(j, n)| match n {
                Node::Element(e) => Some((j, e)),
                _ => None,
            })
            .collect();
        let me = elems.iter().find(|(j, _)| *j == i).unwrap().1;
        let same: Vec<usize> = elems
            .iter()
            .filter(|(_, e)| e.tag == me.tag)
            .map(|(j, _)| *j)
            .collect();
        if same.len() > 1 {
            let ord = same.iter().position(|&j| j == i).unwrap() + 1;
            out.push_str(&format!("<{}{}>", me.tag, ord));
        } else {
            out.push_str(&format!("<{}>", me.tag));
        }
        cur = me;
    }
    out
}

/// Breadth-first block construction written directly from the algorithm:
/// leaf or small node becomes one block, otherwise children are queued and
/// attached text becomes its own block.
pub fn reference_blocks(set: &DocumentSet, max_words: usize) -> Vec<RefBlock> {
    let mut out = Vec::new();
    let mut queue: VecDeque<(usize, Vec<usize>)> =
        (0..set.docs.len()).map(|d| (d, Vec::new())).collect();
    while let Some((d, addr)) = queue.pop_front() {
        let root = &set.docs[d].root;
        let mut el = root;
        for &i in &addr {
            el = match &el.children[i] {
                Node::Element(e) => e,
                _ => unreachable!(),
            };
        }
        let all = visible_words(&el.children);
        let has_elem = el.children.iter().any(|n| matches!(n, Node::Element(_)));
        let mut full_addr = vec![d];
        full_addr.extend(&addr);
        if !has_elem || all.len() < max_words {
            out.push(RefBlock {
                addr: full_addr,
                words: all.len(),
                text: all.join(" "),
                is_leaf: true,
                path: ref_path(root, &addr),
            });
            continue;
        }
        for (i, n) in el.children.iter().enumerate() {
            if matches!(n, Node::Element(_)) {
                let mut a = addr.clone();
                a.push(i);
                queue.push_back((d, a));
            }
        }
        let own: Vec<String> = el
            .children
            .iter()
            .filter(|n| matches!(n, Node::Text(_)))
            .flat_map(|n| visible_words(std::slice::from_ref(n)))
            .collect();
        if !own.is_empty() {
            out.push(RefBlock {
                addr: full_addr,
                words: own.len(),
                text: own.join(" "),
                is_leaf: false,
                path: ref_path(root, &addr),
            });
        }
    }
    out.sort_by(|a, b| a.addr.cmp(&b.addr));
    out
}

pub fn blocks_as_ref(tree: &BlockTree) -> Vec<RefBlock> {
    tree.blocks
        .iter()
        .map(|b| RefBlock {
            addr: b.source.clone(),
            text: b.text.clone(),
            is_leaf: b.is_leaf,
            words: b.word_count,
            path: b.path.to_string(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Greedy pruning reference

/// Deletion order and the number of deletions a word-budgeted greedy prune
/// must perform, computed by word arithmetic over text-run identities.
/// `None` when even deleting everything does not fit.
pub fn reference_prune(
    tree: &BlockTree,
    scores: &[f64],
    limit: usize,
) -> Option<(Vec<usize>, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .unwrap()
            .then_with(|| b.cmp(&a))
    });
    // Each text run is identified by (address of its parent, child index).
    let mut runs: BTreeMap<(Vec<usize>, usize), usize> = BTreeMap::new();
    fn collect(
        el: &Element,
        addr: &mut Vec<usize>,
        runs: &mut BTreeMap<(Vec<usize>, usize), usize>,
    ) {
        for (i, n) in el.children.iter().enumerate() {
            match n {
                Node::Text(t) => {
                    runs.insert(
                        (addr.clone(), i),
                        visible_words(&[Node::Text(t.clone())]).len(),
                    );
                }
                Node::Element(e) => {
                    addr.push(i);
                    collect(e, addr, runs);
                    addr.pop();
                }
                _ => {}
            }
        }
    }
    for (d, doc) in tree.docs.docs.iter().enumerate() {
        collect(&doc.root, &mut vec![d], &mut runs);
    }
    let total: usize = runs.values().sum();
    let removes = |b: usize| -> Vec<(Vec<usize>, usize)> {
        let blk = &tree.blocks[b];
        runs.keys()
            .filter(|(parent, _)| {
                if blk.is_leaf {
                    parent.starts_with(&blk.source)
                } else {
                    *parent == blk.source
                }
            })
            .cloned()
            .collect()
    };
    let mut gone: BTreeSet<(Vec<usize>, usize)> = BTreeSet::new();
    if total <= limit {
        return Some((order, 0));
    }
    for k in 1..=order.len() {
        gone.extend(removes(order[k - 1]));
        let left: usize = total - gone.iter().map(|r| runs[r]).sum::<usize>();
        if left <= limit {
            return Some((order, k));
        }
    }
    None
}

pub fn no_empty_elements(nodes: &[Node]) -> bool {
    nodes.iter().all(|n| match n {
        Node::Element(e) => {
            !visible_words(&e.children).is_empty() && no_empty_elements(&e.children)
        }
        _ => true,
    })
}

// ---------------------------------------------------------------------------
// Token-tree reference

/// Scores every path by asking the provider about every token position,
/// singletons and first tokens included, with no trie.
pub fn brute_force_scores(
    paths: &[String],
    tok: &dyn Tokenizer,
    input: &[TokenId],
    provider: &dyn LogitsProvider,
) -> Vec<f64> {
    let seqs: Vec<Vec<TokenId>> = paths.iter().map(|p| tok.encode(p)).collect();
    seqs.iter()
        .map(|seq| {
            let mut total = 0.0;
            for i in 0..seq.len() {
                let prefix = &seq[..i];
                let mut cands: Vec<TokenId> = Vec::new();
                for s in &seqs {
                    if s.len() > i && s[..i] == *prefix && !cands.contains(&s[i]) {
                        cands.push(s[i]);
                    }
                }
                let p = if i == 0 {
                    // The first token is certain by definition.
                    1.0
                } else {
                    let mut full = input.to_vec();
                    full.extend_from_slice(prefix);
                    let logits = provider.logits(&full, &cands).unwrap();
                    let z: f64 = logits.iter().map(|l| l.exp()).sum();
                    let me = cands.iter().position(|&c| c == seq[i]).unwrap();
                    logits[me].exp() / z
                };
                total += p.ln();
            }
            total
        })
        .collect()
}

/// Distinct proper prefixes (length ≥ 1) followed by two or more distinct
/// tokens across the given sequences.
pub fn branching_prefixes(seqs: &[Vec<TokenId>]) -> usize {
    let mut next: BTreeMap<&[TokenId], BTreeSet<TokenId>> = BTreeMap::new();
    for s in seqs {
        for i in 1..s.len() {
            next.entry(&s[..i]).or_default().insert(s[i]);
        }
    }
    next.values().filter(|v| v.len() >= 2).count()
}

/// Counts provider calls made through it.
pub struct Counting<P> {
    pub inner: P,
    pub calls: std::cell::Cell<usize>,
    pub prefixes: std::cell::RefCell<Vec<Vec<TokenId>>>,
}

impl<P> Counting<P> {
    pub fn new(inner: P) -> Self {
        Counting {
            inner,
            calls: Default::default(),
            prefixes: Default::default(),
        }
    }
}

impl<P: LogitsProvider> LogitsProvider for Counting<P> {
    fn logits(&self, prefix: &[TokenId], candidates: &[TokenId]) -> Result<Vec<f64>, String> {
        self.calls.set(self.calls.get() + 1);
        self.prefixes.borrow_mut().push(prefix.to_vec());
        self.inner.logits(prefix, candidates)
    }
}

/// Tokens recomputed when moving through `prefixes` in order with a cache
/// that keeps the longest common prefix of consecutive calls.
pub fn prefix_cost(prefixes: &[Vec<TokenId>]) -> usize {
    let mut prev: &[TokenId] = &[];
    let mut cost = 0;
    for p in prefixes {
        let lcp = prev.iter().zip(p).take_while(|(a, b)| a == b).count();
        cost += p.len() - lcp;
        prev = p;
    }
    cost
}

// ---------------------------------------------------------------------------
// BM25 reference

/// Okapi BM25 in its textbook form over the given blocks as the corpus.
pub fn textbook_bm25(query: &str, blocks: &[&str], k1: f64, b: f64) -> Vec<f64> {
    let tokenize = |s: &str| -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for c in s.chars() {
            if c.is_alphanumeric() {
                cur.extend(c.to_lowercase());
            } else if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    };
    let docs: Vec<Vec<String>> = blocks.iter().map(|d| tokenize(d)).collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
    let mut q = tokenize(query);
    q.sort();
    q.dedup();
    docs.iter()
        .map(|d| {
            let dl = d.len() as f64;
            q.iter()
                .map(|t| {
                    let nq = docs.iter().filter(|d| d.contains(t)).count() as f64;
                    let idf = ((n - nq + 0.5) / (nq + 0.5) + 1.0).ln();
                    let f = d.iter().filter(|w| *w == t).count() as f64;
                    idf * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * dl / avgdl))
                })
                .sum()
        })
        .collect()
}
