//! Proactive querying: extra uncached tree nodes released alongside the paid
//! rows at no additional budget, because they leave `||P||_1` unchanged.

use std::collections::HashSet;

use crate::space::{AttributeSpace, NodeKey};
use crate::tree::StrategyTree;

/// `S(v) = M(v) + max over children S(c)`: the largest number of marked
/// nodes on any path from `v` down to a leaf.
pub fn subtree_norms(tree: &StrategyTree, marked: &[bool]) -> Vec<usize> {
    let mut s = vec![0; tree.len()];
    // children always have larger ids than their parent
    for v in (0..tree.len()).rev() {
        let below = tree.node(v).children.iter().map(|&c| s[c]).max().unwrap_or(0);
        s[v] = usize::from(marked[v]) + below;
    }
    s
}

/// Top-down walk with a per-path counter `r` starting at the root norm.
/// Marked nodes consume one unit; an unmarked, uncached node is taken when
/// its subtree still leaves room (`S(v) < r`) and also consumes one unit.
/// Descent stops where `r` reaches zero. Returns node ids, preorder.
pub fn search_proactive_nodes(tree: &StrategyTree, marked: &[bool], cached: &[bool]) -> Vec<usize> {
    let s = subtree_norms(tree, marked);
    let mut out = Vec::new();
    visit(tree, 0, s[0], marked, cached, &s, &mut out);
    out
}

fn visit(
    tree: &StrategyTree,
    v: usize,
    mut r: usize,
    marked: &[bool],
    cached: &[bool],
    s: &[usize],
    out: &mut Vec<usize>,
) {
    if marked[v] {
        r -= 1;
    } else if !cached[v] && s[v] < r {
        out.push(v);
        r -= 1;
    }
    if r > 0 {
        for &c in &tree.node(v).children {
            visit(tree, c, r, marked, cached, s, out);
        }
    }
}

/// Domains above this many cells skip multi-attribute proactive querying.
const MAX_PROACTIVE_CELLS: usize = 1 << 20;

/// Proactive rows for a paid strategy over `space`.
///
/// Single-attribute spaces use the tree walk above. For several attributes
/// the paid boxes are generally not nodes of the combined tree, so the
/// combined tree is scanned breadth-first instead and a node is taken when
/// every cell it covers still has coverage below `||P||_1`.
pub fn proactive_rows(space: &AttributeSpace, paid: &[NodeKey], is_cached: &dyn Fn(&NodeKey) -> bool) -> Vec<NodeKey> {
    if paid.is_empty() {
        return Vec::new();
    }
    if space.dims() == 1 {
        let tree = &space.trees()[0];
        let mut marked = vec![false; tree.len()];
        for k in paid {
            marked[k.0[0]] = true;
        }
        let cached: Vec<bool> = (0..tree.len()).map(|v| is_cached(&NodeKey(vec![v]))).collect();
        return search_proactive_nodes(tree, &marked, &cached)
            .into_iter()
            .map(|v| NodeKey(vec![v]))
            .collect();
    }
    if space.domain_size() > MAX_PROACTIVE_CELLS {
        return Vec::new();
    }
    let mut cover = vec![0usize; space.domain_size()];
    for k in paid {
        for c in space.cells(k) {
            cover[c] += 1;
        }
    }
    let norm = cover.iter().copied().max().unwrap_or(0);
    let paid: HashSet<&NodeKey> = paid.iter().collect();
    let mut out = Vec::new();
    for (key, _) in space.combined_tree() {
        if paid.contains(&key) || is_cached(&key) {
            continue;
        }
        let cells = space.cells(&key);
        if cells.iter().all(|&c| cover[c] < norm) {
            for c in cells {
                cover[c] += 1;
            }
            out.push(key);
        }
    }
    out
}
