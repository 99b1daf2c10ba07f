//! Exploration clients. Each client issues one workload at a time and
//! decides its next workload from the noisy answers to the previous one.

use std::sync::Arc;

use noisecache::{AccuracyRequirement, StrategyTree, WorkloadRequest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::ATTRIBUTE;

pub trait Client {
    /// Next workload, or `None` once the client is finished.
    fn next(&mut self) -> Option<WorkloadRequest>;
    /// Answers to the last workload; `None` when it was rejected, which ends
    /// the client's session.
    fn observe(&mut self, answers: Option<&[f64]>);
}

fn request(tree: &StrategyTree, nodes: &[usize], accuracy: AccuracyRequirement) -> WorkloadRequest {
    let ranges: Vec<(usize, usize)> = nodes.iter().map(|&v| (tree.node(v).lo, tree.node(v).hi)).collect();
    WorkloadRequest::ranges(ATTRIBUTE, &ranges, accuracy)
}

/// Level-by-level descent: the next workload holds the children of every
/// node whose noisy count reached the threshold.
pub struct Bfs {
    tree: Arc<StrategyTree>,
    accuracy: AccuracyRequirement,
    threshold: f64,
    frontier: Vec<usize>,
}

impl Bfs {
    pub fn new(tree: Arc<StrategyTree>, accuracy: AccuracyRequirement, threshold: f64) -> Self {
        Self { tree, accuracy, threshold, frontier: vec![0] }
    }
}

impl Client for Bfs {
    fn next(&mut self) -> Option<WorkloadRequest> {
        (!self.frontier.is_empty()).then(|| request(&self.tree, &self.frontier, self.accuracy))
    }

    fn observe(&mut self, answers: Option<&[f64]>) {
        let Some(answers) = answers else {
            self.frontier.clear();
            return;
        };
        self.frontier = self
            .frontier
            .iter()
            .zip(answers)
            .filter(|(_, &a)| a >= self.threshold)
            .flat_map(|(&v, _)| self.tree.node(v).children.clone())
            .collect();
    }
}

struct Level {
    /// Children of the expanded node, ascending by noisy count.
    order: Vec<usize>,
    next: usize,
}

/// Depth-first search for a node with a small but non-zero count. Each
/// workload asks for the children of the current node; the search follows
/// the smallest child. At a leaf it backtracks a uniform number of levels in
/// `[1, depth]` and continues with the next smallest node there.
pub struct Dfs {
    tree: Arc<StrategyTree>,
    accuracy: AccuracyRequirement,
    low: f64,
    current: Option<usize>,
    path: Vec<Level>,
    rng: ChaCha8Rng,
    issued: usize,
    cap: usize,
}

impl Dfs {
    pub fn new(tree: Arc<StrategyTree>, accuracy: AccuracyRequirement, low: f64, seed: u64, cap: usize) -> Self {
        Self {
            tree,
            accuracy,
            low,
            current: Some(0),
            path: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            issued: 0,
            cap,
        }
    }

    /// Moves to the next expandable node, backtracking past leaves.
    fn advance(&mut self, mut candidate: usize) {
        loop {
            if !self.tree.node(candidate).is_leaf() {
                self.current = Some(candidate);
                return;
            }
            let steps = self.rng.random_range(1..=self.path.len());
            self.path.truncate(self.path.len() + 1 - steps);
            loop {
                let Some(top) = self.path.last_mut() else {
                    self.current = None;
                    return;
                };
                if top.next < top.order.len() {
                    candidate = top.order[top.next];
                    top.next += 1;
                    break;
                }
                self.path.pop();
            }
        }
    }
}

impl Client for Dfs {
    fn next(&mut self) -> Option<WorkloadRequest> {
        if self.issued >= self.cap {
            return None;
        }
        let v = self.current?;
        self.issued += 1;
        Some(request(&self.tree, &self.tree.node(v).children, self.accuracy))
    }

    fn observe(&mut self, answers: Option<&[f64]>) {
        let (Some(answers), Some(v)) = (answers, self.current) else {
            self.current = None;
            return;
        };
        if answers.iter().any(|&a| a >= 1.0 && a <= self.low) {
            self.current = None;
            return;
        }
        let mut order: Vec<(usize, f64)> = self.tree.node(v).children.iter().copied().zip(answers.iter().copied()).collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1));
        let order: Vec<usize> = order.into_iter().map(|(c, _)| c).collect();
        let first = order[0];
        self.path.push(Level { order, next: 1 });
        self.advance(first);
    }
}

/// Random range queries `[s, s + l)` with normally distributed start and
/// length, each asked alone under an expected-squared-error bound.
pub struct Rrq {
    domain: usize,
    remaining: usize,
    rng: ChaCha8Rng,
    start: Normal<f64>,
    length: Normal<f64>,
    alpha_sq: Normal<f64>,
}

impl Rrq {
    pub fn new(domain: usize, count: usize, seed: u64) -> Self {
        Self {
            domain,
            remaining: count,
            rng: ChaCha8Rng::seed_from_u64(seed),
            start: Normal::new(500.0, 10.0).expect("valid normal"),
            length: Normal::new(320.0, 10.0).expect("valid normal"),
            alpha_sq: Normal::new(250_000.0, 25_000.0).expect("valid normal"),
        }
    }
}

impl Client for Rrq {
    fn next(&mut self) -> Option<WorkloadRequest> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let n = self.domain;
        let s = (self.start.sample(&mut self.rng).round().max(0.0) as usize).min(n - 1);
        let l = self.length.sample(&mut self.rng).round().max(1.0) as usize;
        let alpha_sq = self.alpha_sq.sample(&mut self.rng).max(1.0);
        Some(WorkloadRequest::ranges(
            ATTRIBUTE,
            &[(s, (s + l).min(n))],
            AccuracyRequirement::ExpectedSquaredError { alpha_sq },
        ))
    }

    fn observe(&mut self, answers: Option<&[f64]>) {
        if answers.is_none() {
            self.remaining = 0;
        }
    }
}
