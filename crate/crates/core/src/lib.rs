//! Accuracy-aware differentially private answering of range-count workloads.
//!
//! Analysts submit workloads of range queries with an accuracy requirement.
//! Each workload is rewritten into nodes of a k-ary strategy tree and
//! answered with the matrix mechanism. Noisy strategy answers are cached per
//! attribute set, so later workloads can reuse them for free, expand onto
//! them, or tighten an earlier release while paying only the difference.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, with `*32` variants for `f32`.

// `!(x > 0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod calibration;
pub mod data;
pub mod engine;
pub mod error;
pub mod frt;
pub mod linalg;
pub mod mmm;
pub mod pq;
pub mod query;
pub mod rp;
pub mod scalar;
pub mod schema;
pub mod se;
pub mod space;
pub mod tree;

pub use data::{DataVector, Dataset, Strictness};
pub use engine::Mechanism;
pub use error::{Error, Result};
pub use query::RangeQuery;
pub use scalar::Scalar;
pub use schema::{attr_set, AttrSet, DomainSchema};
pub use space::{AttributeSpace, NodeKey};
pub use tree::StrategyTree;

pub type Engine = engine::Engine<f64>;
pub type EngineConfig = engine::EngineConfig<f64>;
pub type Outcome = engine::Outcome<f64>;
pub type Answer = engine::Answer<f64>;
pub type WorkloadRequest = query::WorkloadRequest<f64>;
pub type AccuracyRequirement = query::AccuracyRequirement<f64>;
pub type StrategyCache = cache::StrategyCache<f64>;
pub type CostPlan = mmm::CostPlan<f64>;
pub type AccuracyOracle = calibration::AccuracyOracle<f64>;
pub type MappedStrategy = frt::MappedStrategy<f64>;

pub type Engine32 = engine::Engine<f32>;
pub type EngineConfig32 = engine::EngineConfig<f32>;
pub type WorkloadRequest32 = query::WorkloadRequest<f32>;
pub type AccuracyRequirement32 = query::AccuracyRequirement<f32>;
