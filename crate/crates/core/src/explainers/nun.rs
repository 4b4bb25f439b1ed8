use super::{ExplainContext, NunConfig, Proposal};
use crate::heom::knn_among;
use crate::scalar::Scalar;
use crate::schema::Instance;

/// Nearest unlike neighbours: the `k` training rows closest to the query
/// under HEOM whose model prediction differs from the query's.
///
/// Returns fewer than `k` proposals when the pool is smaller, and none when
/// the model predicts a single class on the whole training split.
pub fn nun<T: Scalar>(
    x: &Instance<T>,
    ctx: &ExplainContext<'_, T>,
    query_class: usize,
    cfg: &NunConfig,
) -> Vec<Proposal<T>> {
    let schema = ctx.data.schema();
    let pool: Vec<usize> = ctx
        .data
        .train_indices()
        .iter()
        .copied()
        .filter(|&i| Some(i) != x.id && ctx.row_prediction(i) != query_class)
        .filter(|&i| !cfg.restrict_to_actionable || schema.is_actionable(x, ctx.data.row(i)))
        .collect();
    let k = cfg.k.min(pool.len());
    if k == 0 {
        return Vec::new();
    }
    let neighbours = match knn_among(x, ctx.data, &pool, k, None) {
        Ok(n) => n,
        Err(e) => {
            log::warn!("nun: {e}");
            return Vec::new();
        }
    };
    neighbours
        .into_iter()
        .enumerate()
        .map(|(restart, n)| Proposal {
            x_prime: Instance::new(ctx.data.row(n.index).values.clone()),
            restart,
        })
        .collect()
}
