//! Range queries, workloads and accuracy requirements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One half-open interval `[lo, hi)` of domain positions per attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RangeQuery(pub Vec<(usize, usize)>);

impl RangeQuery {
    pub fn single(lo: usize, hi: usize) -> Self {
        Self(vec![(lo, hi)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum AccuracyRequirement<T> {
    /// `P(max_i |error_i| > alpha) <= beta`.
    WorstError { alpha: T, beta: T },
    /// Total squared error functional bounded by `alpha_sq`.
    ExpectedSquaredError { alpha_sq: T },
}

impl<T: Scalar> AccuracyRequirement<T> {
    pub fn worst(alpha: T, beta: T) -> Self {
        Self::WorstError { alpha, beta }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::WorstError { alpha, beta } => alpha > T::zero() && beta > T::zero() && beta < T::one(),
            Self::ExpectedSquaredError { alpha_sq } => alpha_sq > T::zero(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidRequest(format!("invalid accuracy requirement {self:?}")))
        }
    }

    /// True when `self` asks for no more accuracy than `other`.
    pub fn no_tighter_than(&self, other: &Self) -> bool {
        match (*self, *other) {
            (Self::WorstError { alpha, beta }, Self::WorstError { alpha: a2, beta: b2 }) => alpha >= a2 && beta >= b2,
            (Self::ExpectedSquaredError { alpha_sq }, Self::ExpectedSquaredError { alpha_sq: a2 }) => alpha_sq >= a2,
            _ => false,
        }
    }
}

/// A workload as submitted by an analyst. `queries[i].0[j]` is the interval
/// for `attributes[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct WorkloadRequest<T> {
    pub attributes: Vec<String>,
    pub queries: Vec<RangeQuery>,
    pub accuracy: AccuracyRequirement<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client: Option<String>,
}

impl<T: Scalar> WorkloadRequest<T> {
    pub fn new(attributes: &[&str], queries: Vec<RangeQuery>, accuracy: AccuracyRequirement<T>) -> Self {
        Self {
            attributes: attributes.iter().map(|s| s.to_string()).collect(),
            queries,
            accuracy,
            client: None,
        }
    }

    /// Single-attribute convenience constructor.
    pub fn ranges(attribute: &str, ranges: &[(usize, usize)], accuracy: AccuracyRequirement<T>) -> Self {
        Self::new(
            &[attribute],
            ranges.iter().map(|&(lo, hi)| RangeQuery::single(lo, hi)).collect(),
            accuracy,
        )
    }
}
