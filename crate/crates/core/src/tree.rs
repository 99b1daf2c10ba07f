//! k-ary range trees over a single ordered attribute domain.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeNode {
    pub lo: usize,
    pub hi: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
}

impl TreeNode {
    pub fn len(&self) -> usize {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi == self.lo
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Hierarchical decomposition of `[0, n)`. Node 0 is the root; ids follow
/// breadth-first order, so parents always precede their children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyTree {
    k: usize,
    nodes: Vec<TreeNode>,
}

impl StrategyTree {
    /// Splits every node into at most `k` children as evenly as possible, with
    /// the larger parts on the left, until all leaves are unit ranges.
    pub fn build(n: usize, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Schema(format!("tree arity must be at least 2, got {k}")));
        }
        if n == 0 {
            return Err(Error::Schema("cannot build a tree over an empty domain".into()));
        }
        let mut nodes = vec![TreeNode { lo: 0, hi: n, parent: None, children: Vec::new(), depth: 0 }];
        let mut next = 0;
        while next < nodes.len() {
            let (lo, hi, depth) = (nodes[next].lo, nodes[next].hi, nodes[next].depth);
            let size = hi - lo;
            if size > 1 {
                let parts = k.min(size);
                let (base, extra) = (size / parts, size % parts);
                let mut start = lo;
                for p in 0..parts {
                    let len = base + usize::from(p < extra);
                    let id = nodes.len();
                    nodes.push(TreeNode {
                        lo: start,
                        hi: start + len,
                        parent: Some(next),
                        children: Vec::new(),
                        depth: depth + 1,
                    });
                    nodes[next].children.push(id);
                    start += len;
                }
            }
            next += 1;
        }
        Ok(Self { k, nodes })
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn domain_size(&self) -> usize {
        self.nodes[0].hi
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of levels; equals the L1 norm of the full tree strategy.
    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0) + 1
    }

    /// Node whose range is exactly `[lo, hi)`, if any.
    pub fn find(&self, lo: usize, hi: usize) -> Option<usize> {
        let mut cur = 0;
        loop {
            let n = &self.nodes[cur];
            if n.lo == lo && n.hi == hi {
                return Some(cur);
            }
            cur = *n.children.iter().find(|&&c| self.nodes[c].lo <= lo && hi <= self.nodes[c].hi)?;
        }
    }

    /// Minimal set of tree nodes whose disjoint union is `[lo, hi)`, found
    /// top-down and listed left to right.
    pub fn decompose(&self, lo: usize, hi: usize) -> Result<Vec<usize>> {
        if lo >= hi || hi > self.domain_size() {
            return Err(Error::InvalidRequest(format!(
                "range [{lo}, {hi}) is empty or outside [0, {})",
                self.domain_size()
            )));
        }
        let mut out = Vec::new();
        self.decompose_into(0, lo, hi, &mut out);
        Ok(out)
    }

    fn decompose_into(&self, v: usize, lo: usize, hi: usize, out: &mut Vec<usize>) {
        let n = &self.nodes[v];
        if n.lo == lo && n.hi == hi {
            out.push(v);
            return;
        }
        for &c in &n.children {
            let cn = &self.nodes[c];
            let (l, h) = (lo.max(cn.lo), hi.min(cn.hi));
            if l < h {
                self.decompose_into(c, l, h, out);
            }
        }
    }

    /// True when `a` is `b` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, a: usize, b: usize) -> bool {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        na.lo <= nb.lo && nb.hi <= na.hi && na.depth <= nb.depth
    }
}
