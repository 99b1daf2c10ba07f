//! Full-rank transformation of a strategy onto disjoint domain buckets.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::scalar::Scalar;
use crate::space::{AttributeSpace, NodeKey};

const UNCOVERED: usize = usize::MAX;

/// Disjoint buckets supporting a list of rows, plus the number of buckets
/// each processed row added.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Buckets {
    pub buckets: Vec<Vec<usize>>,
    pub growth: Vec<usize>,
}

/// Refines the bucket partition row by row: every bucket a row cuts is split
/// into its inside and outside parts, and the row's uncovered cells become a
/// new bucket. Buckets are returned sorted by their first cell.
pub fn transformation_buckets(rows: &[Vec<usize>], n: usize) -> Buckets {
    let mut owner = vec![UNCOVERED; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut growth = Vec::with_capacity(rows.len());
    for row in rows {
        let mut touched: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &c in row {
            touched.entry(owner[c]).or_default().push(c);
        }
        let before = sizes.len();
        for (b, cells) in touched {
            if b == UNCOVERED || cells.len() < sizes[b] {
                let id = sizes.len();
                sizes.push(cells.len());
                if b != UNCOVERED {
                    sizes[b] -= cells.len();
                }
                for c in cells {
                    owner[c] = id;
                }
            }
        }
        growth.push(sizes.len() - before);
    }
    let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (c, &b) in owner.iter().enumerate() {
        if b != UNCOVERED {
            grouped.entry(b).or_default().push(c);
        }
    }
    let mut buckets: Vec<Vec<usize>> = grouped.into_values().collect();
    buckets.sort_by_key(|b| b[0]);
    Buckets { buckets, growth }
}

/// A strategy with its bucket-mapped matrix `A'`.
#[derive(Debug, Clone)]
pub struct MappedStrategy<T> {
    pub keys: Vec<NodeKey>,
    pub cells: Vec<Vec<usize>>,
    pub buckets: Vec<Vec<usize>>,
    pub growth: Vec<usize>,
    /// `A'[i, j] = 1` iff bucket `j` lies inside row `i`.
    pub a: DMatrix<T>,
    domain_size: usize,
    bucket_of: Vec<usize>,
}

impl<T: Scalar> MappedStrategy<T> {
    pub fn build(space: &AttributeSpace, keys: Vec<NodeKey>) -> Self {
        let cells = keys.iter().map(|k| space.cells(k)).collect();
        Self::from_cells(keys, cells, space.domain_size())
    }

    pub fn from_cells(keys: Vec<NodeKey>, cells: Vec<Vec<usize>>, domain_size: usize) -> Self {
        let Buckets { buckets, growth } = transformation_buckets(&cells, domain_size);
        let mut bucket_of = vec![UNCOVERED; domain_size];
        for (j, b) in buckets.iter().enumerate() {
            for &c in b {
                bucket_of[c] = j;
            }
        }
        let mut mapped = Self {
            keys,
            cells,
            buckets,
            growth,
            a: DMatrix::zeros(0, 0),
            domain_size,
            bucket_of,
        };
        mapped.a = mapped.map_rows(&mapped.cells);
        mapped
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    /// Maps rows given as cell sets onto the buckets: entry `(i, j)` is 1 iff
    /// bucket `j` lies entirely inside row `i`. Rows disjoint from every
    /// bucket become zero rows.
    pub fn map_rows(&self, rows: &[Vec<usize>]) -> DMatrix<T> {
        let mut m = DMatrix::zeros(rows.len(), self.buckets.len());
        let mut hit = vec![0usize; self.buckets.len()];
        for (i, r) in rows.iter().enumerate() {
            hit.iter_mut().for_each(|h| *h = 0);
            for &c in r {
                let b = self.bucket_of[c];
                if b != UNCOVERED {
                    hit[b] += 1;
                }
            }
            for (j, &h) in hit.iter().enumerate() {
                if h == self.buckets[j].len() {
                    m[(i, j)] = T::one();
                }
            }
        }
        m
    }

    /// Bucket-mapped data vector `T x`.
    pub fn map_data(&self, x: &[u64]) -> Vec<u64> {
        self.buckets.iter().map(|b| b.iter().map(|&c| x[c]).sum()).collect()
    }

    /// L1 norm of the raw rows selected by `rows`.
    pub fn l1_norm_of(&self, rows: &[usize]) -> usize {
        let mut cover = vec![0usize; self.domain_size];
        for &r in rows {
            for &c in &self.cells[r] {
                cover[c] += 1;
            }
        }
        cover.into_iter().max().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> usize {
        self.l1_norm_of(&(0..self.len()).collect::<Vec<_>>())
    }

    pub fn position(&self, key: &NodeKey) -> Option<usize> {
        self.keys.iter().position(|k| k == key)
    }
}
