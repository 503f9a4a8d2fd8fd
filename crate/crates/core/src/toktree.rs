//! Token trees over block paths.
//!
//! Every block path is tokenized and inserted into a trie, so blocks whose
//! paths share a prefix share trie nodes. A generative model then assigns a
//! probability to each node given the tokens above it. Nodes on the first
//! level and nodes without siblings get probability 1 without asking the
//! model; only sibling groups of two or more trigger a provider call. A
//! block's score is the sum of the log-probabilities along its path.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::blocktree::{BlockPath, BlockTree};
use crate::error::{Error, Result};

pub type TokenId = u32;

pub trait Tokenizer {
    fn encode(&self, text: &str) -> Vec<TokenId>;
    fn decode(&self, ids: &[TokenId]) -> String;
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Splits text on `"><"`, `"<"`, `">"` and whitespace runs; everything else
/// forms runs between those. `"<html1><body>"` becomes
/// `["<", "html1", "><", "body", ">"]`.
///
/// Ids are hashes of the piece, so the same piece gets the same id in any
/// tokenizer that has not seen a colliding piece first. The id-to-piece
/// table is interior-mutable; a tokenizer is not `Sync`.
#[derive(Debug, Default)]
pub struct RuleTokenizer {
    vocab: RefCell<BTreeMap<TokenId, String>>,
}

impl RuleTokenizer {
    pub fn new() -> RuleTokenizer {
        RuleTokenizer::default()
    }

    /// Splits `text` into pieces without assigning ids.
    pub fn pieces(text: &str) -> Vec<&str> {
        #[derive(PartialEq, Clone, Copy)]
        enum Run {
            Space,
            Word,
        }
        let mut out = Vec::new();
        let mut start = 0;
        let mut run: Option<Run> = None;
        let mut iter = text.char_indices().peekable();
        while let Some((i, c)) = iter.next() {
            if c == '<' || c == '>' {
                if run.take().is_some() {
                    out.push(&text[start..i]);
                }
                let len = if c == '>' && matches!(iter.peek(), Some((_, '<'))) {
                    iter.next();
                    2
                } else {
                    1
                };
                out.push(&text[i..i + len]);
                start = i + len;
                continue;
            }
            let kind = if c.is_whitespace() {
                Run::Space
            } else {
                Run::Word
            };
            match run {
                Some(r) if r == kind => {}
                Some(_) => {
                    out.push(&text[start..i]);
                    start = i;
                    run = Some(kind);
                }
                None => {
                    start = i;
                    run = Some(kind);
                }
            }
        }
        if run.is_some() {
            out.push(&text[start..]);
        }
        out
    }

    fn id_for(&self, piece: &str) -> TokenId {
        let mut vocab = self.vocab.borrow_mut();
        let mut id = fnv1a(piece.as_bytes()) as TokenId;
        loop {
            match vocab.get(&id) {
                Some(p) if p == piece => return id,
                Some(_) => id = id.wrapping_add(1),
                None => {
                    vocab.insert(id, piece.to_string());
                    return id;
                }
            }
        }
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.borrow().len()
    }
}

impl Tokenizer for RuleTokenizer {
    fn encode(&self, text: &str) -> Vec<TokenId> {
        Self::pieces(text)
            .into_iter()
            .map(|p| self.id_for(p))
            .collect()
    }

    fn decode(&self, ids: &[TokenId]) -> String {
        let vocab = self.vocab.borrow();
        ids.iter()
            .map(|id| vocab.get(id).map(String::as_str).unwrap_or("\u{fffd}"))
            .collect()
    }
}

/// Next-token logits for a set of candidates given a prefix.
pub trait LogitsProvider {
    /// One logit per candidate, in candidate order.
    fn logits(
        &self,
        prefix: &[TokenId],
        candidates: &[TokenId],
    ) -> core::result::Result<Vec<f64>, String>;
}

impl<P: LogitsProvider + ?Sized> LogitsProvider for &P {
    fn logits(
        &self,
        prefix: &[TokenId],
        candidates: &[TokenId],
    ) -> core::result::Result<Vec<f64>, String> {
        (**self).logits(prefix, candidates)
    }
}

impl<P: LogitsProvider + ?Sized> LogitsProvider for Box<P> {
    fn logits(
        &self,
        prefix: &[TokenId],
        candidates: &[TokenId],
    ) -> core::result::Result<Vec<f64>, String> {
        (**self).logits(prefix, candidates)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic stand-in for a model: the logit is a seeded hash of the
/// prefix and candidate, mapped to `[-2, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HashLogits {
    pub seed: u64,
}

impl HashLogits {
    pub fn logit(&self, prefix: &[TokenId], candidate: TokenId) -> f64 {
        let mut h = splitmix64(self.seed);
        for &t in prefix {
            h = splitmix64(h ^ u64::from(t));
        }
        h = splitmix64(h ^ (u64::from(candidate) | 1 << 40));
        (h >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
    }
}

impl LogitsProvider for HashLogits {
    fn logits(
        &self,
        prefix: &[TokenId],
        candidates: &[TokenId],
    ) -> core::result::Result<Vec<f64>, String> {
        Ok(candidates.iter().map(|&c| self.logit(prefix, c)).collect())
    }
}

/// `ln softmax(logits)`, stable for large magnitudes.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&l| libm::exp(l - max)).sum();
    let log_sum = libm::log(sum) + max;
    logits.iter().map(|&l| l - log_sum).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenNode {
    pub token: TokenId,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Level of the token within its path, from 1. The virtual root is 0.
    pub depth: usize,
    /// Natural log of the probability, once computed.
    pub log_prob: Option<f64>,
    /// Block whose path ends here.
    pub block: Option<usize>,
}

impl TokenNode {
    pub fn prob(&self) -> Option<f64> {
        self.log_prob.map(libm::exp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockScore {
    pub path: BlockPath,
    /// Sum of the log-probabilities along the path; never positive.
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CallStats {
    /// Provider calls, one per sibling group of two or more.
    pub calls: usize,
    /// Trie nodes, excluding the virtual root.
    pub nodes: usize,
    /// Nodes whose probability needed no call.
    pub skipped: usize,
}

impl CallStats {
    pub fn skipped_fraction(&self) -> f64 {
        if self.nodes == 0 {
            1.0
        } else {
            self.skipped as f64 / self.nodes as f64
        }
    }
}

/// Trie of tokenized block paths. Node 0 is a virtual root above the first
/// token of every path.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenTree {
    pub nodes: Vec<TokenNode>,
    /// Trie node of each block, by block index.
    pub block_nodes: Vec<usize>,
    pub paths: Vec<BlockPath>,
}

pub const ROOT: usize = 0;

impl TokenTree {
    pub fn build(tree: &BlockTree, tok: &dyn Tokenizer) -> Result<TokenTree> {
        let paths: Vec<BlockPath> = tree.blocks.iter().map(|b| b.path.clone()).collect();
        TokenTree::from_paths(&paths, tok)
    }

    pub fn from_paths(paths: &[BlockPath], tok: &dyn Tokenizer) -> Result<TokenTree> {
        let mut t = TokenTree {
            nodes: alloc::vec![TokenNode {
                token: 0,
                parent: None,
                children: Vec::new(),
                depth: 0,
                log_prob: Some(0.0),
                block: None,
            }],
            block_nodes: Vec::with_capacity(paths.len()),
            paths: paths.to_vec(),
        };
        for (i, path) in paths.iter().enumerate() {
            let rendered = path.to_string();
            let mut cur = ROOT;
            for token in tok.encode(&rendered) {
                cur = t.child(cur, token);
            }
            if cur == ROOT || t.nodes[cur].block.is_some() {
                return Err(Error::DuplicatePath(rendered));
            }
            t.nodes[cur].block = Some(i);
            t.block_nodes.push(cur);
        }
        Ok(t)
    }

    fn child(&mut self, parent: usize, token: TokenId) -> usize {
        if let Some(&c) = self.nodes[parent]
            .children
            .iter()
            .find(|&&c| self.nodes[c].token == token)
        {
            return c;
        }
        let id = self.nodes.len();
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(TokenNode {
            token,
            parent: Some(parent),
            children: Vec::new(),
            depth,
            log_prob: None,
            block: None,
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes with no children.
    pub fn leaf_count(&self) -> usize {
        self.nodes[1..]
            .iter()
            .filter(|n| n.children.is_empty())
            .count()
    }

    /// Tokens from the first level down to `node`, inclusive.
    pub fn tokens_to(&self, node: usize) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(self.nodes[node].depth);
        let mut cur = node;
        while cur != ROOT {
            out.push(self.nodes[cur].token);
            cur = self.nodes[cur].parent.expect("non-root nodes have parents");
        }
        out.reverse();
        out
    }

    /// Nodes whose children need a provider call, in depth-first order.
    pub fn call_sites(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![ROOT];
        while let Some(n) = stack.pop() {
            if n != ROOT && self.nodes[n].children.len() >= 2 {
                out.push(n);
            }
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// Provider calls and skipped nodes implied by the trie's shape.
    pub fn call_stats(&self) -> CallStats {
        let calls = self.call_sites();
        let called: usize = calls.iter().map(|&n| self.nodes[n].children.len()).sum();
        CallStats {
            calls: calls.len(),
            nodes: self.len(),
            skipped: self.len() - called,
        }
    }

    /// Assigns every node's probability, visiting the trie depth-first so
    /// consecutive calls share as much prefix as possible. `input` is the
    /// model input placed before the path tokens.
    pub fn compute_probabilities(
        &mut self,
        input: &[TokenId],
        provider: &dyn LogitsProvider,
    ) -> Result<CallStats> {
        let mut stats = CallStats {
            nodes: self.len(),
            ..CallStats::default()
        };
        let mut prefix: Vec<TokenId> = input.to_vec();
        let base = prefix.len();
        let mut stack = alloc::vec![ROOT];
        while let Some(n) = stack.pop() {
            let children = self.nodes[n].children.clone();
            if n == ROOT || children.len() == 1 {
                for &c in &children {
                    self.nodes[c].log_prob = Some(0.0);
                }
                stats.skipped += children.len();
            } else if children.len() >= 2 {
                prefix.truncate(base);
                prefix.extend(self.tokens_to(n));
                let candidates: Vec<TokenId> =
                    children.iter().map(|&c| self.nodes[c].token).collect();
                let logits =
                    provider
                        .logits(&prefix, &candidates)
                        .map_err(|message| Error::Provider {
                            prefix: prefix.clone(),
                            message,
                        })?;
                if logits.len() != candidates.len() || logits.iter().any(|l| !l.is_finite()) {
                    return Err(Error::Provider {
                        prefix,
                        message: alloc::format!(
                            "expected {} finite logits, got {:?}",
                            candidates.len(),
                            logits
                        ),
                    });
                }
                for (&c, lp) in children.iter().zip(log_softmax(&logits)) {
                    self.nodes[c].log_prob = Some(lp);
                }
                stats.calls += 1;
            }
            stack.extend(children.iter().rev());
        }
        Ok(stats)
    }

    /// Per-block sum of log-probabilities along the path.
    pub fn block_scores(&self) -> Result<Vec<BlockScore>> {
        self.block_nodes
            .iter()
            .zip(&self.paths)
            .map(|(&node, path)| {
                let mut score = 0.0;
                let mut cur = node;
                while cur != ROOT {
                    let n = &self.nodes[cur];
                    score += n
                        .log_prob
                        .ok_or_else(|| Error::IncompleteProbabilities(path.to_string()))?;
                    cur = n.parent.expect("non-root nodes have parents");
                }
                Ok(BlockScore {
                    path: path.clone(),
                    score,
                })
            })
            .collect()
    }
}

/// Builds the trie, computes probabilities and writes the scores back onto
/// the tree's blocks.
pub fn score_tree(
    tree: &mut BlockTree,
    tok: &dyn Tokenizer,
    input: &[TokenId],
    provider: &dyn LogitsProvider,
) -> Result<(Vec<BlockScore>, CallStats)> {
    let mut trie = TokenTree::build(tree, tok)?;
    let stats = trie.compute_probabilities(input, provider)?;
    let scores = trie.block_scores()?;
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    tree.set_scores(&values)?;
    Ok((scores, stats))
}
