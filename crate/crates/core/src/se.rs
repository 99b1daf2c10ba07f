//! Strategy expansion: add accurate cached rows related to the strategy so
//! that constrained inference can lower the paid cost.

use crate::cache::StrategyCache;
use crate::scalar::Scalar;
use crate::space::{AttributeSpace, NodeKey};

/// Default cap on rows added to a strategy.
pub const DEFAULT_LIMIT: usize = 16;

/// Scans cached rows outside `rows` by ascending scale (shallower rows first
/// on ties) and appends each one that overlaps some row of the original
/// strategy. Stops after `limit` additions or at the first scale above
/// `b_paid`.
pub fn generate_expanded_strategy<T: Scalar>(
    space: &AttributeSpace,
    rows: &[NodeKey],
    cache: &StrategyCache<T>,
    b_paid: T,
    limit: usize,
) -> Vec<NodeKey> {
    let mut candidates: Vec<(T, usize, &NodeKey)> = cache
        .iter()
        .filter(|(k, _)| !rows.contains(k))
        .map(|(k, e)| (e.b, space.depth(k), k))
        .collect();
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite scales")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(b.2))
    });
    let mut expanded = rows.to_vec();
    for (b, _, key) in candidates {
        if expanded.len() >= rows.len() + limit || b > b_paid {
            break;
        }
        if rows.iter().any(|r| space.overlaps(r, key)) {
            expanded.push(key.clone());
        }
    }
    expanded
}
