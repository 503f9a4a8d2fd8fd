//! Debug dump of a block tree.

use blockprune_core::BlockTree;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpBlock {
    pub path: String,
    pub is_leaf: bool,
    pub word_count: usize,
    pub text: String,
}

pub fn dump_blocks(tree: &BlockTree) -> Vec<DumpBlock> {
    tree.blocks
        .iter()
        .map(|b| DumpBlock {
            path: b.path.to_string(),
            is_leaf: b.is_leaf,
            word_count: b.word_count,
            text: b.text.clone(),
        })
        .collect()
}
