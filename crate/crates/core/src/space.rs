//! Strategy trees for an attribute set and the boxes built from them.
//!
//! A strategy row over attribute set `S` is a [`NodeKey`]: one node per
//! attribute tree, listed in sorted-attribute order. Its extent is the box
//! formed by the cross product of the node ranges. Flat domain cells are laid
//! out row-major over the sorted attributes, matching
//! [`Dataset::materialize`](crate::data::Dataset::materialize).

use std::collections::{BTreeMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::RangeQuery;
use crate::schema::{AttrSet, DomainSchema};
use crate::tree::StrategyTree;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeKey(pub Vec<usize>);

/// Node of the combined tree as exported to clients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportNode {
    pub id: usize,
    pub ranges: BTreeMap<String, (usize, usize)>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct AttributeSpace {
    attrs: AttrSet,
    trees: Vec<StrategyTree>,
    strides: Vec<usize>,
    /// Attribute positions by ascending domain size; coarser attributes sit
    /// higher in the combined tree.
    order: Vec<usize>,
}

impl AttributeSpace {
    pub fn new(schema: &DomainSchema, attrs: &AttrSet, k: usize) -> Result<Self> {
        if attrs.is_empty() {
            return Err(Error::InvalidRequest("empty attribute set".into()));
        }
        let mut trees = Vec::with_capacity(attrs.len());
        for name in attrs {
            trees.push(StrategyTree::build(schema.attribute(name)?.size(), k)?);
        }
        let mut strides = vec![1; attrs.len()];
        for j in (0..attrs.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * trees[j + 1].domain_size();
        }
        let mut order: Vec<usize> = (0..attrs.len()).collect();
        order.sort_by_key(|&j| (trees[j].domain_size(), j));
        Ok(Self { attrs: attrs.clone(), trees, strides, order })
    }

    pub fn attrs(&self) -> &AttrSet {
        &self.attrs
    }

    pub fn trees(&self) -> &[StrategyTree] {
        &self.trees
    }

    pub fn dims(&self) -> usize {
        self.trees.len()
    }

    pub fn domain_size(&self) -> usize {
        self.trees.iter().map(StrategyTree::domain_size).product()
    }

    /// Number of distinct strategy rows, the cache capacity.
    pub fn node_count(&self) -> usize {
        self.trees.iter().map(StrategyTree::len).product()
    }

    /// Attribute positions in combined-tree order.
    pub fn granularity_order(&self) -> &[usize] {
        &self.order
    }

    pub fn root(&self) -> NodeKey {
        NodeKey(vec![0; self.dims()])
    }

    pub fn contains_key(&self, key: &NodeKey) -> bool {
        key.0.len() == self.dims() && key.0.iter().zip(&self.trees).all(|(&v, t)| v < t.len())
    }

    pub fn key_box(&self, key: &NodeKey) -> Vec<(usize, usize)> {
        key.0
            .iter()
            .zip(&self.trees)
            .map(|(&v, t)| (t.node(v).lo, t.node(v).hi))
            .collect()
    }

    /// Sum of per-attribute node depths.
    pub fn depth(&self, key: &NodeKey) -> usize {
        key.0.iter().zip(&self.trees).map(|(&v, t)| t.node(v).depth).sum()
    }

    /// Sorted flat cells of a box.
    pub fn box_cells(&self, ranges: &[(usize, usize)]) -> Vec<usize> {
        let mut out = vec![0usize];
        for (j, &(lo, hi)) in ranges.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * (hi - lo));
            for &base in &out {
                for v in lo..hi {
                    next.push(base + v * self.strides[j]);
                }
            }
            out = next;
        }
        out
    }

    pub fn cells(&self, key: &NodeKey) -> Vec<usize> {
        self.box_cells(&self.key_box(key))
    }

    pub fn overlaps(&self, a: &NodeKey, b: &NodeKey) -> bool {
        self.key_box(a)
            .iter()
            .zip(self.key_box(b))
            .all(|(&(l1, h1), (l2, h2))| l1.max(l2) < h1.min(h2))
    }

    pub fn validate_query(&self, index: usize, q: &RangeQuery) -> Result<()> {
        if q.0.len() != self.dims() {
            return Err(Error::InvalidQuery {
                index,
                reason: format!("expected {} intervals, got {}", self.dims(), q.0.len()),
            });
        }
        for (j, (&(lo, hi), t)) in q.0.iter().zip(&self.trees).enumerate() {
            if lo >= hi {
                return Err(Error::InvalidQuery {
                    index,
                    reason: format!("interval [{lo}, {hi}) on `{}` is empty", self.attrs[j]),
                });
            }
            if hi > t.domain_size() {
                return Err(Error::InvalidQuery {
                    index,
                    reason: format!(
                        "interval [{lo}, {hi}) exceeds domain [0, {}) of `{}`",
                        t.domain_size(),
                        self.attrs[j]
                    ),
                });
            }
        }
        Ok(())
    }

    /// Cross product of the per-attribute tree decompositions of `q`, whose
    /// intervals are given in sorted-attribute order.
    pub fn decompose(&self, q: &RangeQuery) -> Result<Vec<NodeKey>> {
        self.validate_query(0, q)?;
        let mut per_attr = vec![Vec::new(); self.dims()];
        for &j in &self.order {
            let (lo, hi) = q.0[j];
            per_attr[j] = self.trees[j].decompose(lo, hi)?;
        }
        let mut out = vec![Vec::with_capacity(self.dims())];
        for nodes in &per_attr {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    nodes.iter().map(move |&v| {
                        let mut k = prefix.clone();
                        k.push(v);
                        k
                    })
                })
                .collect();
        }
        Ok(out.into_iter().map(NodeKey).collect())
    }

    /// Deduplicated union of the decompositions, in first-seen order.
    pub fn generate_strategy(&self, queries: &[RangeQuery]) -> Result<Vec<NodeKey>> {
        let mut seen = HashSet::new();
        let mut rows = Vec::new();
        for (i, q) in queries.iter().enumerate() {
            self.validate_query(i, q)?;
            for key in self.decompose(q)? {
                if seen.insert(key.clone()) {
                    rows.push(key);
                }
            }
        }
        Ok(rows)
    }

    /// Maximum number of rows covering any one domain cell.
    pub fn l1_norm(&self, rows: &[NodeKey]) -> usize {
        let mut cover = vec![0usize; self.domain_size()];
        for r in rows {
            for c in self.cells(r) {
                cover[c] += 1;
            }
        }
        cover.into_iter().max().unwrap_or(0)
    }

    /// Children of `key` in the combined tree: the first attribute in
    /// granularity order whose node still has children is refined.
    pub fn combined_children(&self, key: &NodeKey) -> Vec<NodeKey> {
        for &j in &self.order {
            let node = self.trees[j].node(key.0[j]);
            if !node.is_leaf() {
                return node
                    .children
                    .iter()
                    .map(|&c| {
                        let mut k = key.clone();
                        k.0[j] = c;
                        k
                    })
                    .collect();
            }
        }
        Vec::new()
    }

    /// Combined-tree nodes in breadth-first order, each with its parent index.
    pub fn combined_tree(&self) -> Vec<(NodeKey, Option<usize>)> {
        let mut out = vec![(self.root(), None)];
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for c in self.combined_children(&out[i].0) {
                out.push((c, Some(i)));
                queue.push_back(out.len() - 1);
            }
        }
        out
    }

    pub fn export_tree(&self) -> Vec<ExportNode> {
        let nodes = self.combined_tree();
        let mut out: Vec<ExportNode> = nodes
            .iter()
            .enumerate()
            .map(|(id, (key, parent))| ExportNode {
                id,
                ranges: self.attrs.iter().cloned().zip(self.key_box(key)).collect(),
                parent: *parent,
                children: Vec::new(),
            })
            .collect();
        for (id, (_, parent)) in nodes.iter().enumerate() {
            if let Some(p) = parent {
                out[*p].children.push(id);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::attr_set;

    fn space(json: &str, attrs: &[&str]) -> AttributeSpace {
        AttributeSpace::new(&DomainSchema::from_json(json).unwrap(), &attr_set(attrs), 2).unwrap()
    }

    fn two_attr() -> AttributeSpace {
        space(
            r#"{"attributes":[{"name":"a1","type":"int_range","lo":0,"hi":4},
                              {"name":"a2","type":"int_range","lo":0,"hi":8}]}"#,
            &["a1", "a2"],
        )
    }

    #[test]
    fn single_attribute_golden_strategies() {
        let s = space(r#"{"attributes":[{"name":"x","type":"int_range","lo":0,"hi":8}]}"#, &["x"]);
        let boxes = |qs: &[(usize, usize)]| {
            let qs: Vec<_> = qs.iter().map(|&(l, h)| RangeQuery::single(l, h)).collect();
            let rows = s.generate_strategy(&qs).unwrap();
            let b: Vec<_> = rows.iter().map(|k| s.key_box(k)[0]).collect();
            (b, s.l1_norm(&rows))
        };
        assert_eq!(boxes(&[(0, 7)]), (vec![(0, 4), (4, 6), (6, 7)], 1));
        assert_eq!(boxes(&[(2, 6), (3, 7)]), (vec![(2, 4), (4, 6), (3, 4), (6, 7)], 2));
        let all: Vec<_> = (0..15).map(|i| NodeKey(vec![i])).collect();
        assert_eq!(s.l1_norm(&all), 4);
    }

    #[test]
    fn multi_attribute_cross_product() {
        let s = two_attr();
        let rows = s.decompose(&RangeQuery(vec![(0, 3), (1, 6)])).unwrap();
        let mut boxes: Vec<_> = rows.iter().map(|k| s.key_box(k)).collect();
        boxes.sort();
        let mut want = Vec::new();
        for a in [(0, 2), (2, 3)] {
            for b in [(1, 2), (2, 4), (4, 6)] {
                want.push(vec![a, b]);
            }
        }
        want.sort();
        assert_eq!(boxes, want);
        let full = s.decompose(&RangeQuery(vec![(0, 4), (0, 8)])).unwrap();
        assert_eq!(full, vec![s.root()]);
    }

    #[test]
    fn cells_are_row_major() {
        let s = two_attr();
        let k = s.decompose(&RangeQuery(vec![(1, 2), (2, 4)])).unwrap();
        assert_eq!(s.cells(&k[0]), vec![10, 11]);
    }

    #[test]
    fn combined_tree_attaches_finer_attribute_under_leaves() {
        let s = two_attr();
        let t = s.combined_tree();
        // 7 nodes for the size-4 tree, then each of its 4 leaves carries the
        // 14 non-root nodes of the size-8 tree.
        assert_eq!(t.len(), 7 + 4 * 14);
        let keys: HashSet<_> = t.iter().map(|(k, _)| k.clone()).collect();
        assert_eq!(keys.len(), t.len());
        let exported = s.export_tree();
        assert_eq!(exported[0].ranges["a1"], (0, 4));
        assert_eq!(exported[0].children.len(), 2);
    }

    #[test]
    fn query_validation_names_index() {
        let s = two_attr();
        match s.validate_query(3, &RangeQuery(vec![(2, 2), (0, 1)])) {
            Err(Error::InvalidQuery { index, .. }) => assert_eq!(index, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(s.validate_query(0, &RangeQuery(vec![(0, 5), (0, 1)])).is_err());
        assert!(s.validate_query(0, &RangeQuery(vec![(0, 1)])).is_err());
    }
}
