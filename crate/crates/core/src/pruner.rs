//! Greedy budget-constrained block pruning.
//!
//! Blocks are scored once, then deleted lowest score first until the
//! serialized HTML fits the budget. Deleting a leaf block removes its whole
//! subtree; deleting a non-leaf block removes only the node's attached text.
//! Ancestors left without text are removed on the way up, and the surviving
//! HTML is re-compressed at the end.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::blocktree::{BlockPath, BlockTree};
use crate::cleaner::{compress_set, push_merged};
use crate::dom::{
    self, count_words, is_void, write_end_tag, write_node, write_start_tag, DocumentSet, Element,
    Node, SourcedRoot,
};
use crate::error::{Error, Result};
use crate::scorers::BlockScorer;
use crate::toktree::Tokenizer;

/// Length function over serialized HTML. Implementations must return 0 for
/// the empty string and never grow when a substring is removed.
pub trait LengthCounter {
    fn length(&self, html: &str) -> usize;
    fn unit(&self) -> &'static str;
}

/// Counts visible words: the words of every text run, with markup, comments
/// and script payloads excluded. Tags always separate words.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordCounter;

impl LengthCounter for WordCounter {
    fn length(&self, html: &str) -> usize {
        dom::visible_word_count(html)
    }

    fn unit(&self) -> &'static str {
        "words"
    }
}

/// Counts Unicode scalar values of the serialized HTML.
#[derive(Debug, Clone, Copy, Default)]
pub struct CharCounter;

impl LengthCounter for CharCounter {
    fn length(&self, html: &str) -> usize {
        html.chars().count()
    }

    fn unit(&self) -> &'static str {
        "chars"
    }
}

/// Counts tokens produced by a tokenizer over the serialized HTML.
pub struct TokenCounter<'a> {
    pub tokenizer: &'a dyn Tokenizer,
}

impl LengthCounter for TokenCounter<'_> {
    fn length(&self, html: &str) -> usize {
        self.tokenizer.encode(html).len()
    }

    fn unit(&self) -> &'static str {
        "tokens"
    }
}

/// Maximum allowed length of the pruned HTML under a counter.
pub struct Budget<'a> {
    pub limit: usize,
    pub counter: &'a dyn LengthCounter,
}

impl<'a> Budget<'a> {
    pub fn new(limit: usize, counter: &'a dyn LengthCounter) -> Budget<'a> {
        Budget { limit, counter }
    }

    pub fn words(limit: usize) -> Budget<'static> {
        Budget {
            limit,
            counter: &WordCounter,
        }
    }

    pub fn measure(&self, set: &DocumentSet) -> usize {
        self.counter.length(&dom::serialize_set(set))
    }
}

/// One deletion, in the order it happened.
#[derive(Debug, Clone, PartialEq)]
pub struct Deletion {
    pub block: usize,
    pub path: BlockPath,
    pub score: f64,
    /// Length of the serialized HTML right after this deletion.
    pub length_after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOutcome {
    pub docs: DocumentSet,
    /// Deleted block indices, in deletion order.
    pub deleted: Vec<usize>,
    pub scores: Vec<f64>,
    pub initial_length: usize,
    pub final_length: usize,
    /// Filled when auditing was requested.
    pub audit: Vec<Deletion>,
}

/// Block indices ordered for deletion: ascending score, and among equal
/// scores the block later in document order goes first.
pub fn deletion_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match scores[a].total_cmp(&scores[b]) {
        Ordering::Equal => b.cmp(&a),
        o => o,
    });
    order
}

// ---------------------------------------------------------------------------
// Working copy of the document set with tombstones.

#[derive(Debug, Clone)]
enum Kind {
    Element {
        tag: String,
        attrs: Vec<(String, String)>,
    },
    Text {
        words: usize,
    },
    Other,
}

#[derive(Debug, Clone)]
struct Slot {
    parent: Option<usize>,
    kind: Kind,
    /// Original node (text or other) for leaves of the arena.
    payload: Option<Node>,
    children: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Arena {
    slots: Vec<Slot>,
    roots: Vec<usize>,
    sources: Vec<String>,
}

#[derive(Debug, Clone)]
struct State {
    alive: Vec<bool>,
    /// Live words under each slot.
    words: Vec<usize>,
}

impl Arena {
    fn from_set(set: &DocumentSet) -> Arena {
        let mut arena = Arena {
            slots: Vec::new(),
            roots: Vec::new(),
            sources: Vec::new(),
        };
        for doc in &set.docs {
            let id = arena.push_element(&doc.root, None);
            arena.roots.push(id);
            arena.sources.push(doc.source.clone());
        }
        arena
    }

    fn push_element(&mut self, el: &Element, parent: Option<usize>) -> usize {
        let id = self.slots.len();
        self.slots.push(Slot {
            parent,
            kind: Kind::Element {
                tag: el.tag.clone(),
                attrs: el.attrs.clone(),
            },
            payload: None,
            children: Vec::new(),
        });
        for child in &el.children {
            let cid = match child {
                Node::Element(c) => self.push_element(c, Some(id)),
                Node::Text(t) => self.push_leaf(
                    Kind::Text {
                        words: count_words(t),
                    },
                    child.clone(),
                    id,
                ),
                other => self.push_leaf(Kind::Other, other.clone(), id),
            };
            self.slots[id].children.push(cid);
        }
        id
    }

    fn push_leaf(&mut self, kind: Kind, node: Node, parent: usize) -> usize {
        let id = self.slots.len();
        self.slots.push(Slot {
            parent: Some(parent),
            kind,
            payload: Some(node),
            children: Vec::new(),
        });
        id
    }

    fn resolve(&self, addr: &[usize]) -> Option<usize> {
        let (first, rest) = addr.split_first()?;
        let mut id = *self.roots.get(*first)?;
        for &i in rest {
            id = *self.slots[id].children.get(i)?;
        }
        Some(id)
    }

    fn initial_state(&self) -> State {
        let mut words = alloc::vec![0; self.slots.len()];
        // Children always have larger ids than their parent.
        for id in (0..self.slots.len()).rev() {
            if let Kind::Text { words: w } = self.slots[id].kind {
                words[id] += w;
            }
            if let Some(p) = self.slots[id].parent {
                words[p] += words[id];
            }
        }
        State {
            alive: alloc::vec![true; self.slots.len()],
            words,
        }
    }

    fn kill(&self, st: &mut State, id: usize) {
        if !st.alive[id] {
            return;
        }
        st.alive[id] = false;
        let lost = st.words[id];
        let mut cur = self.slots[id].parent;
        while let Some(p) = cur {
            st.words[p] -= lost;
            cur = self.slots[p].parent;
        }
    }

    /// Removes `start` and then each ancestor while it holds no text.
    fn cascade(&self, st: &mut State, start: usize) {
        let mut cur = Some(start);
        while let Some(id) = cur {
            if !st.alive[id] || st.words[id] > 0 {
                break;
            }
            let parent = self.slots[id].parent;
            self.kill(st, id);
            cur = parent;
        }
    }

    fn delete_block(&self, st: &mut State, node: usize, is_leaf: bool) {
        if !st.alive[node] {
            return;
        }
        if is_leaf {
            let parent = self.slots[node].parent;
            self.kill(st, node);
            if let Some(p) = parent {
                self.cascade(st, p);
            }
        } else {
            for &c in &self.slots[node].children {
                if matches!(self.slots[c].kind, Kind::Text { .. }) {
                    self.kill(st, c);
                }
            }
            self.cascade(st, node);
        }
    }

    fn is_alive(&self, st: &State, id: usize) -> bool {
        st.alive[id]
    }

    /// Serializes live slots. Text runs that end up adjacent are written
    /// with the same separator rule used when they are merged.
    fn serialize(&self, st: &State) -> String {
        let mut out = String::new();
        for &r in &self.roots {
            if self.is_alive(st, r) {
                let mut last_text = false;
                self.write_slot(st, r, &mut out, &mut last_text);
            }
        }
        out
    }

    fn write_slot(&self, st: &State, id: usize, out: &mut String, last_text: &mut bool) {
        let slot = &self.slots[id];
        match (&slot.kind, &slot.payload) {
            (Kind::Element { tag, attrs }, _) => {
                write_start_tag(tag, attrs, out);
                *last_text = false;
                let live: Vec<usize> = slot
                    .children
                    .iter()
                    .copied()
                    .filter(|&c| st.alive[c])
                    .collect();
                if is_void(tag) && live.is_empty() {
                    return;
                }
                for c in live {
                    self.write_slot(st, c, out, last_text);
                }
                write_end_tag(tag, out);
                *last_text = false;
            }
            (Kind::Text { .. }, Some(Node::Text(t))) => {
                if *last_text
                    && !out.ends_with(char::is_whitespace)
                    && !t.starts_with(char::is_whitespace)
                    && !t.is_empty()
                {
                    out.push(' ');
                }
                out.push_str(t);
                *last_text = true;
            }
            (_, Some(node)) => {
                write_node(node, out);
                *last_text = false;
            }
            _ => {}
        }
    }

    fn materialize(&self, st: &State) -> DocumentSet {
        let docs = self
            .roots
            .iter()
            .zip(&self.sources)
            .filter(|(r, _)| st.alive[**r])
            .filter_map(|(&r, src)| match self.build_node(st, r) {
                Node::Element(root) => Some(SourcedRoot {
                    source: src.clone(),
                    root,
                }),
                _ => None,
            })
            .collect();
        DocumentSet { docs }
    }

    fn build_node(&self, st: &State, id: usize) -> Node {
        let slot = &self.slots[id];
        match (&slot.kind, &slot.payload) {
            (Kind::Element { tag, attrs }, _) => {
                let mut children = Vec::new();
                for &c in &slot.children {
                    if st.alive[c] {
                        push_merged(&mut children, self.build_node(st, c));
                    }
                }
                Node::Element(Element {
                    tag: tag.clone(),
                    attrs: attrs.clone(),
                    children,
                })
            }
            (_, Some(node)) => node.clone(),
            _ => Node::Text(String::new()),
        }
    }
}

/// Scores every block of `tree` against `query` and prunes to `budget`.
pub fn prune(
    tree: &BlockTree,
    query: &str,
    scorer: &dyn BlockScorer,
    budget: &Budget<'_>,
) -> Result<PruneOutcome> {
    let scores = scorer.score_tree(query, tree)?;
    prune_with_scores(tree, &scores, budget, false)
}

/// Same as [`prune`], recording the length after every deletion.
pub fn prune_audited(
    tree: &BlockTree,
    query: &str,
    scorer: &dyn BlockScorer,
    budget: &Budget<'_>,
) -> Result<PruneOutcome> {
    let scores = scorer.score_tree(query, tree)?;
    prune_with_scores(tree, &scores, budget, true)
}

fn check_scores(tree: &BlockTree, scores: &[f64]) -> Result<()> {
    if scores.len() != tree.len() {
        return Err(Error::InvalidScores(alloc::format!(
            "expected {} scores, got {}",
            tree.len(),
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::InvalidScores(alloc::format!(
            "score for block {i} is not finite"
        )));
    }
    Ok(())
}

/// Greedy deletion with precomputed scores.
///
/// The deleted set is the shortest prefix of [`deletion_order`] after which
/// the serialized HTML fits. Without auditing the prefix is found by binary
/// search, which relies on the counter being monotone under deletion.
pub fn prune_with_scores(
    tree: &BlockTree,
    scores: &[f64],
    budget: &Budget<'_>,
    audit: bool,
) -> Result<PruneOutcome> {
    if budget.limit == 0 {
        return Err(Error::InvalidConfig(
            "budget limit must be at least 1".into(),
        ));
    }
    check_scores(tree, scores)?;
    let arena = Arena::from_set(&tree.docs);
    let nodes: Vec<usize> = tree
        .blocks
        .iter()
        .map(|b| arena.resolve(&b.source).expect("block sources resolve"))
        .collect();
    let order = deletion_order(scores);
    let base = arena.initial_state();
    let measure = |st: &State| budget.counter.length(&arena.serialize(st));
    let state_after = |k: usize| {
        let mut st = base.clone();
        for &b in &order[..k] {
            arena.delete_block(&mut st, nodes[b], tree.blocks[b].is_leaf);
        }
        st
    };

    let initial_length = measure(&base);
    let mut trail = Vec::new();
    let mut k = if initial_length <= budget.limit {
        0
    } else if audit {
        let mut st = base.clone();
        let mut k = order.len() + 1;
        for (i, &b) in order.iter().enumerate() {
            arena.delete_block(&mut st, nodes[b], tree.blocks[b].is_leaf);
            let len = measure(&st);
            trail.push(Deletion {
                block: b,
                path: tree.blocks[b].path.clone(),
                score: scores[b],
                length_after: len,
            });
            if len <= budget.limit {
                k = i + 1;
                break;
            }
        }
        k
    } else {
        // Smallest k in 1..=n whose length fits; n + 1 when none does.
        let (mut lo, mut hi) = (1, order.len() + 1);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if mid <= order.len() && measure(&state_after(mid)) <= budget.limit {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    };
    if k > order.len() {
        let minimal = measure(&state_after(order.len()));
        return Err(Error::BudgetUnattainable {
            minimal,
            limit: budget.limit,
        });
    }

    // Re-compression only removes markup, but a custom counter may still
    // disagree; keep deleting until the compressed output fits.
    loop {
        let st = state_after(k);
        let docs = compress_set(arena.materialize(&st));
        let final_length = budget.measure(&docs);
        if final_length <= budget.limit {
            return Ok(PruneOutcome {
                docs,
                deleted: order[..k].to_vec(),
                scores: scores.to_vec(),
                initial_length,
                final_length,
                audit: trail,
            });
        }
        if k == order.len() {
            return Err(Error::BudgetUnattainable {
                minimal: final_length,
                limit: budget.limit,
            });
        }
        k += 1;
        if audit && trail.len() < k {
            let b = order[k - 1];
            trail.push(Deletion {
                block: b,
                path: tree.blocks[b].path.clone(),
                score: scores[b],
                length_after: measure(&state_after(k)),
            });
        }
    }
}

/// Post-deletion structural re-adjustment.
pub fn readjust(set: DocumentSet) -> DocumentSet {
    compress_set(set)
}

// ---------------------------------------------------------------------------
// Two-stage schedule

/// Granularities and budgets of the coarse (embedding) and fine
/// (generative) pruning stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub coarse_granularity: usize,
    pub fine_granularity: usize,
    pub intermediate_budget: usize,
    pub final_budget: usize,
}

impl Schedule {
    pub const DEFAULT_COARSE: usize = 256;
    pub const DEFAULT_FINE: usize = 128;

    pub fn new(intermediate_budget: usize, final_budget: usize) -> Schedule {
        Schedule {
            coarse_granularity: Self::DEFAULT_COARSE,
            fine_granularity: Self::DEFAULT_FINE,
            intermediate_budget,
            final_budget,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fine_granularity == 0 || self.fine_granularity >= self.coarse_granularity {
            return Err(Error::InvalidConfig(alloc::format!(
                "fine granularity {} must be in 1..{}",
                self.fine_granularity,
                self.coarse_granularity
            )));
        }
        if self.final_budget == 0 {
            return Err(Error::InvalidConfig("budgets must be at least 1".into()));
        }
        if self.intermediate_budget < self.final_budget {
            return Err(Error::InvalidConfig(alloc::format!(
                "intermediate budget {} is below final budget {}",
                self.intermediate_budget,
                self.final_budget
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub blocks: usize,
    pub prune: PruneOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub coarse: StageOutcome,
    pub fine: Option<StageOutcome>,
}

impl PipelineOutcome {
    pub fn docs(&self) -> &DocumentSet {
        match &self.fine {
            Some(f) => &f.prune.docs,
            None => &self.coarse.prune.docs,
        }
    }

    pub fn into_docs(self) -> DocumentSet {
        match self.fine {
            Some(f) => f.prune.docs,
            None => self.coarse.prune.docs,
        }
    }
}

/// Coarse tree, embedding-stage prune, finer tree over the survivors,
/// generative-stage prune. With no generative scorer the coarse result is
/// returned as is.
pub fn two_stage_pipeline(
    docs: DocumentSet,
    query: &str,
    embed_scorer: &dyn BlockScorer,
    gen_scorer: Option<&dyn BlockScorer>,
    schedule: &Schedule,
    counter: &dyn LengthCounter,
    audit: bool,
) -> Result<PipelineOutcome> {
    schedule.validate()?;
    let run = |tree: &BlockTree, scorer: &dyn BlockScorer, limit: usize| {
        let budget = Budget::new(limit, counter);
        let scores = scorer.score_tree(query, tree)?;
        prune_with_scores(tree, &scores, &budget, audit)
    };
    let coarse_tree = BlockTree::build(docs, schedule.coarse_granularity)?;
    let coarse = StageOutcome {
        blocks: coarse_tree.len(),
        prune: run(&coarse_tree, embed_scorer, schedule.intermediate_budget)?,
    };
    let fine = match gen_scorer {
        None => None,
        Some(scorer) => {
            let fine_tree = BlockTree::build(coarse.prune.docs.clone(), schedule.fine_granularity)?;
            Some(StageOutcome {
                blocks: fine_tree.len(),
                prune: run(&fine_tree, scorer, schedule.final_budget)?,
            })
        }
    };
    Ok(PipelineOutcome { coarse, fine })
}
