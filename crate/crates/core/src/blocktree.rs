//! Granularity-adjustable block trees.
//!
//! A block is the smallest prunable unit. The tree is built breadth-first
//! over the document set: a DOM leaf becomes a block, a node whose content
//! has fewer than `max_words` words is merged into one block, and any other
//! node expands its children while its directly-attached text (if any)
//! forms a non-leaf block.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::dom::{count_words, DocumentSet, Element};
use crate::error::{Error, Result};

/// Location of an element: the document index followed by child indices
/// (counting every child node, not only elements). Lexicographic order on
/// addresses is document order.
pub type NodeAddr = Vec<usize>;

/// Disambiguated tag sequence from a document root down to a block.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockPath {
    pub segments: Vec<String>,
}

impl fmt::Display for BlockPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for seg in &self.segments {
            write!(f, "<{seg}>")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockNode {
    /// Address of the element the block came from.
    pub source: NodeAddr,
    /// Plain text of the block, whitespace-collapsed.
    pub text: String,
    /// Whole-subtree block (true) or the node's attached text only (false).
    pub is_leaf: bool,
    pub word_count: usize,
    pub path: BlockPath,
    /// Index of the nearest ancestor block, if any.
    pub parent: Option<usize>,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTree {
    pub docs: DocumentSet,
    /// Maximum words per merged block.
    pub granularity: usize,
    /// Blocks in document order.
    pub blocks: Vec<BlockNode>,
}

pub fn element_at<'a>(docs: &'a DocumentSet, addr: &[usize]) -> Option<&'a Element> {
    let (first, rest) = addr.split_first()?;
    let mut el = &docs.docs.get(*first)?.root;
    for &i in rest {
        el = el.children.get(i)?.as_element()?;
    }
    Some(el)
}

/// Path segment names for the element children of `parent`, keyed by child
/// index. Tags shared by several element siblings get ordinals from 1 in
/// document order; unique tags keep their bare name.
fn sibling_segments(parent: &Element) -> BTreeMap<usize, String> {
    let mut totals: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, child) in parent.element_children() {
        *totals.entry(child.tag.as_str()).or_default() += 1;
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    parent
        .element_children()
        .map(|(i, child)| {
            let tag = child.tag.as_str();
            let name = if totals[tag] > 1 {
                let n = seen.entry(tag).or_default();
                *n += 1;
                alloc::format!("{tag}{n}")
            } else {
                String::from(tag)
            };
            (i, name)
        })
        .collect()
}

/// Block path of the element at `addr`. Roots contribute their own
/// (already numbered) tag.
pub fn path_of(docs: &DocumentSet, addr: &[usize]) -> Option<BlockPath> {
    let (first, rest) = addr.split_first()?;
    let mut el = &docs.docs.get(*first)?.root;
    let mut segments = alloc::vec![el.tag.clone()];
    for &i in rest {
        let names = sibling_segments(el);
        segments.push(names.get(&i)?.clone());
        el = el.children.get(i)?.as_element()?;
    }
    Some(BlockPath { segments })
}

fn content_words(el: &Element) -> usize {
    crate::dom::word_count_nodes(&el.children)
}

impl BlockTree {
    /// Builds the block tree breadth-first. `max_words` must be at least 1.
    pub fn build(docs: DocumentSet, max_words: usize) -> Result<BlockTree> {
        if max_words == 0 {
            return Err(Error::InvalidGranularity {
                current: 0,
                requested: 0,
            });
        }
        let mut raw: Vec<(NodeAddr, String, bool, usize)> = Vec::new();
        let mut queue: VecDeque<NodeAddr> = (0..docs.len()).map(|i| alloc::vec![i]).collect();
        while let Some(addr) = queue.pop_front() {
            let el = element_at(&docs, &addr).expect("queued addresses are valid");
            if el.is_leaf() || content_words(el) < max_words {
                let text = el.content();
                let wc = count_words(&text);
                raw.push((addr, text, true, wc));
                continue;
            }
            for (i, _) in el.element_children() {
                let mut child = addr.clone();
                child.push(i);
                queue.push_back(child);
            }
            let text = el.own_text();
            let wc = count_words(&text);
            if wc > 0 {
                raw.push((addr, text, false, wc));
            }
        }
        raw.sort_by(|a, b| a.0.cmp(&b.0));
        let mut tree = BlockTree {
            docs,
            granularity: max_words,
            blocks: Vec::with_capacity(raw.len()),
        };
        let index: BTreeMap<NodeAddr, usize> = raw
            .iter()
            .enumerate()
            .map(|(i, r)| (r.0.clone(), i))
            .collect();
        for (source, text, is_leaf, word_count) in raw {
            let parent = (1..source.len())
                .rev()
                .find_map(|len| index.get(&source[..len]).copied());
            tree.blocks.push(BlockNode {
                source,
                text,
                is_leaf,
                word_count,
                path: BlockPath::default(),
                parent,
                score: None,
            });
        }
        tree.assign_paths();
        Ok(tree)
    }

    /// (Re)computes every block's path from the document structure.
    pub fn assign_paths(&mut self) {
        for i in 0..self.blocks.len() {
            let path = path_of(&self.docs, &self.blocks[i].source)
                .expect("block sources address live elements");
            self.blocks[i].path = path;
        }
    }

    /// Rebuilds the tree over the same documents with a finer granularity.
    pub fn refine(&self, finer_max_words: usize) -> Result<BlockTree> {
        if finer_max_words >= self.granularity || finer_max_words == 0 {
            return Err(Error::InvalidGranularity {
                current: self.granularity,
                requested: finer_max_words,
            });
        }
        BlockTree::build(self.docs.clone(), finer_max_words)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.blocks.iter().map(|b| b.text.as_str()).collect()
    }

    pub fn element(&self, block: usize) -> Option<&Element> {
        element_at(&self.docs, &self.blocks[block].source)
    }

    /// Rendered paths of all blocks, in block order.
    pub fn rendered_paths(&self) -> Vec<String> {
        self.blocks
            .iter()
            .map(|b| alloc::format!("{}", b.path))
            .collect()
    }

    /// Writes scores back onto the blocks.
    pub fn set_scores(&mut self, scores: &[f64]) -> Result<()> {
        if scores.len() != self.blocks.len() {
            return Err(Error::InvalidScores(alloc::format!(
                "expected {} scores, got {}",
                self.blocks.len(),
                scores.len()
            )));
        }
        for (b, s) in self.blocks.iter_mut().zip(scores) {
            b.score = Some(*s);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::{concat_documents, parse_html};

    fn set(srcs: &[&str]) -> DocumentSet {
        let docs = srcs
            .iter()
            .enumerate()
            .map(|(i, s)| (alloc::format!("d{i}"), parse_html(s).unwrap()))
            .collect();
        concat_documents(docs).unwrap()
    }

    fn texts(tree: &BlockTree) -> Vec<(&str, bool)> {
        tree.blocks
            .iter()
            .map(|b| (b.text.as_str(), b.is_leaf))
            .collect()
    }

    #[test]
    fn merges_small_subtree() {
        let tree = BlockTree::build(set(&["<div><p>a b</p><p>c d</p></div>"]), 5).unwrap();
        assert_eq!(texts(&tree), [("a b c d", true)]);
        assert_eq!(tree.blocks[0].path.segments, ["html1"]);
    }

    #[test]
    fn expands_at_small_granularity() {
        let tree = BlockTree::build(set(&["<div><p>a b</p><p>c d</p></div>"]), 2).unwrap();
        assert_eq!(texts(&tree), [("a b", true), ("c d", true)]);
        assert_eq!(
            tree.rendered_paths(),
            ["<html1><div><p1>", "<html1><div><p2>"]
        );
    }

    #[test]
    fn attached_text_forms_non_leaf_block() {
        let tree =
            BlockTree::build(set(&["<div>x<p>long text of six words here</p></div>"]), 3).unwrap();
        assert_eq!(
            texts(&tree),
            [("x", false), ("long text of six words here", true)]
        );
        assert_eq!(tree.blocks[1].word_count, 6);
        assert_eq!(tree.blocks[1].parent, Some(0));
        assert_eq!(tree.rendered_paths(), ["<html1><div>", "<html1><div><p>"]);
    }

    #[test]
    fn figure_four_path() {
        let src = "<html><body><div><p>nav</p></div><div><p>At the historic 2018 Royal Rumble</p>\
                   <span>more words here</span></div></body></html>";
        let tree = BlockTree::build(set(&[src]), 4).unwrap();
        let paths = tree.rendered_paths();
        assert!(
            paths.contains(&"<html1><body><div2><p>".into()),
            "{paths:?}"
        );
        assert!(paths.contains(&"<html1><body><div1>".into()), "{paths:?}");
    }

    #[test]
    fn roots_always_numbered() {
        let tree = BlockTree::build(set(&["<p>a</p>", "<p>b</p>"]), 10).unwrap();
        assert_eq!(tree.rendered_paths(), ["<html1>", "<html2>"]);
    }

    #[test]
    fn refine_requires_finer() {
        let tree = BlockTree::build(set(&["<p>a</p>"]), 256).unwrap();
        assert_eq!(
            tree.refine(256),
            Err(Error::InvalidGranularity {
                current: 256,
                requested: 256
            })
        );
        let fine = tree.refine(128).unwrap();
        assert_eq!(fine.granularity, 128);
        assert_eq!(texts(&fine), texts(&tree));
    }

    #[test]
    fn refine_splits() {
        let tree = BlockTree::build(set(&["<div><p>a b c</p><p>d e f</p></div>"]), 8).unwrap();
        assert_eq!(tree.len(), 1);
        let fine = tree.refine(4).unwrap();
        assert_eq!(fine.len(), 2);
        assert!(fine.blocks.iter().all(|b| b.word_count < 4));
    }

    #[test]
    fn zero_granularity_rejected() {
        assert!(BlockTree::build(set(&["<p>a</p>"]), 0).is_err());
    }

    #[test]
    fn set_scores_checks_length() {
        let mut tree = BlockTree::build(set(&["<p>a</p>"]), 4).unwrap();
        assert!(tree.set_scores(&[]).is_err());
        tree.set_scores(&[0.5]).unwrap();
        assert_eq!(tree.blocks[0].score, Some(0.5));
    }
}
