//! Per-attribute-set cache of the latest noisy answer to each strategy row.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::NodeKey;

/// Latest noisy answer for one strategy row. Rows never answered have no entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CacheEntry<T> {
    /// Laplace scale the response was released at.
    pub b: T,
    /// Noisy response.
    pub y: T,
    /// Write event that produced the entry; starts at 1.
    pub t: u64,
}

/// Rows written by one event, all at a single scale.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampGroup<T> {
    pub t: u64,
    pub b: T,
    pub rows: Vec<NodeKey>,
    pub ys: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct CacheStats<T> {
    pub entries: usize,
    pub capacity: usize,
    pub by_timestamp: BTreeMap<u64, usize>,
    pub best_scale: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyCache<T> {
    entries: BTreeMap<NodeKey, CacheEntry<T>>,
    clock: u64,
    capacity: usize,
}

impl<T: Scalar> StrategyCache<T> {
    /// Empty cache over a global strategy with `capacity` rows.
    pub fn new(capacity: usize) -> Self {
        Self { entries: BTreeMap::new(), clock: 0, capacity }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Timestamp of the most recent write event, 0 if none.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn get(&self, key: &NodeKey) -> Option<&CacheEntry<T>> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &NodeKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeKey, &CacheEntry<T>)> {
        self.entries.iter()
    }

    /// Splits `rows` into cached hits and misses, preserving order.
    pub fn lookup(&self, rows: &[NodeKey]) -> (Vec<(NodeKey, CacheEntry<T>)>, Vec<NodeKey>) {
        let mut hits = Vec::new();
        let mut misses = Vec::new();
        for r in rows {
            match self.entries.get(r) {
                Some(e) => hits.push((r.clone(), *e)),
                None => misses.push(r.clone()),
            }
        }
        (hits, misses)
    }

    /// Cached scale of each row, `None` for misses.
    pub fn scales(&self, rows: &[NodeKey]) -> Vec<Option<T>> {
        rows.iter().map(|r| self.entries.get(r).map(|e| e.b)).collect()
    }

    /// Advances the clock and returns the new timestamp.
    pub fn tick(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    /// Overwrites the entries of `rows`; the latest write wins even when it is
    /// noisier. Only mechanisms call this, so every stored value is noisy.
    pub(crate) fn update(&mut self, rows: &[NodeKey], b: T, ys: &[T], t: u64) -> Result<()> {
        if rows.len() != ys.len() {
            return Err(Error::Dimension(format!("{} rows but {} responses", rows.len(), ys.len())));
        }
        if !(b > T::zero()) {
            return Err(Error::Internal("cache writes need a positive scale".into()));
        }
        if t == 0 || t > self.clock {
            return Err(Error::Internal(format!("timestamp {t} was not issued by this cache")));
        }
        for (r, &y) in rows.iter().zip(ys) {
            self.entries.insert(r.clone(), CacheEntry { b, y, t });
        }
        Ok(())
    }

    pub fn group_by_timestamp(&self) -> Vec<TimestampGroup<T>> {
        let mut groups: BTreeMap<u64, TimestampGroup<T>> = BTreeMap::new();
        for (k, e) in &self.entries {
            let g = groups.entry(e.t).or_insert_with(|| TimestampGroup {
                t: e.t,
                b: e.b,
                rows: Vec::new(),
                ys: Vec::new(),
            });
            g.rows.push(k.clone());
            g.ys.push(e.y);
        }
        groups.into_values().collect()
    }

    pub fn stats(&self) -> CacheStats<T> {
        let mut by_timestamp = BTreeMap::new();
        let mut best: Option<T> = None;
        for e in self.entries.values() {
            *by_timestamp.entry(e.t).or_insert(0) += 1;
            best = Some(match best {
                Some(b) if b <= e.b => b,
                _ => e.b,
            });
        }
        CacheStats { entries: self.entries.len(), capacity: self.capacity, by_timestamp, best_scale: best }
    }

    pub fn snapshot(&self) -> CacheSnapshot<T> {
        CacheSnapshot {
            clock: self.clock,
            capacity: self.capacity,
            entries: self.entries.iter().map(|(k, e)| (k.clone(), *e)).collect(),
        }
    }

    pub fn restore(s: CacheSnapshot<T>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, e) in s.entries {
            if e.t == 0 || e.t > s.clock || !(e.b > T::zero()) {
                return Err(Error::InvalidRequest(format!("invalid cache entry for {k:?}")));
            }
            entries.insert(k, e);
        }
        if entries.len() > s.capacity {
            return Err(Error::InvalidRequest("more cache entries than strategy rows".into()));
        }
        Ok(Self { entries, clock: s.clock, capacity: s.capacity })
    }
}

/// Serializable form of a cache; never contains ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CacheSnapshot<T> {
    pub clock: u64,
    pub capacity: usize,
    pub entries: Vec<(NodeKey, CacheEntry<T>)>,
}
