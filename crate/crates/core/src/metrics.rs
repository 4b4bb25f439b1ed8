//! Quality measures of a counterfactual and per-method summary statistics.
//!
//! Neighbour searches run over the training split only.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{DataError, EvalError};
use crate::explainers::{fingerprint, ExplainContext};
use crate::heom::knn;
use crate::mcda::Direction;
use crate::model::Model;
use crate::scalar::Scalar;
use crate::schema::{FeatureSchema, FeatureValue, Instance};

/// Neighbour count for feasibility and discriminative power.
pub const DEFAULT_NEIGHBORS: usize = 5;

/// Continuous values closer than this (raw units) count as unchanged.
pub const SPARSITY_TOLERANCE: f64 = 1e-9;

/// Scores of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CriteriaVector<T: Scalar> {
    pub proximity: T,
    pub feasibility: T,
    pub dpow: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instability: Option<T>,
}

impl<T: Scalar> CriteriaVector<T> {
    /// Directions of the three selection criteria.
    pub const SELECTION_DIRECTIONS: [Direction; 3] = [Direction::Min, Direction::Min, Direction::Max];

    pub fn new(proximity: T, feasibility: T, dpow: T) -> Self {
        Self {
            proximity,
            feasibility,
            dpow,
            sparsity: None,
            instability: None,
        }
    }

    /// `(proximity, feasibility, dpow)`.
    pub fn selection(&self) -> [T; 3] {
        [self.proximity, self.feasibility, self.dpow]
    }
}

pub fn proximity<T: Scalar>(x: &Instance<T>, x_prime: &Instance<T>, data: &Dataset<T>) -> T {
    data.heom().distance(x, x_prime)
}

/// Mean HEOM distance from `x_prime` to its `k` nearest training rows.
pub fn feasibility<T: Scalar>(x_prime: &Instance<T>, data: &Dataset<T>, k: usize) -> Result<T, DataError> {
    let nn = knn(x_prime, data, k, false)?;
    Ok(nn.iter().map(|n| n.distance).sum::<T>() / T::from_usize_lossy(k))
}

/// Number of features that differ.
pub fn sparsity<T: Scalar>(x: &Instance<T>, x_prime: &Instance<T>, schema: &FeatureSchema<T>) -> usize {
    let tol = T::lit(SPARSITY_TOLERANCE);
    debug_assert_eq!(x.values.len(), schema.len());
    x.values
        .iter()
        .zip(&x_prime.values)
        .filter(|(a, b)| match (a, b) {
            (FeatureValue::Num(a), FeatureValue::Num(b)) => (*a - *b).abs() > tol,
            (a, b) => a != b,
        })
        .count()
}

/// Share of `x_prime`'s `k` nearest training rows that the model assigns to
/// the same class as `x_prime`.
pub fn discriminative_power<T: Scalar>(
    x_prime: &Instance<T>,
    data: &Dataset<T>,
    model: &Model<T>,
    k: usize,
) -> Result<T, DataError> {
    let own = model.predict(x_prime);
    let nn = knn(x_prime, data, k, false)?;
    let agree = nn.iter().filter(|n| model.predict(data.row(n.index)) == own).count();
    Ok(T::from_usize_lossy(agree) / T::from_usize_lossy(k))
}

/// Proximity, feasibility, dpow and sparsity with a single neighbour search.
/// `predicted` is the model's class for `x_prime`.
pub fn score<T: Scalar>(
    x: &Instance<T>,
    x_prime: &Instance<T>,
    predicted: usize,
    ctx: &ExplainContext<'_, T>,
    k: usize,
) -> Result<CriteriaVector<T>, DataError> {
    let data = ctx.data;
    let nn = knn(x_prime, data, k, false)?;
    let kk = T::from_usize_lossy(k);
    let feas = nn.iter().map(|n| n.distance).sum::<T>() / kk;
    let agree = nn.iter().filter(|n| ctx.row_prediction(n.index) == predicted).count();
    Ok(CriteriaVector {
        proximity: proximity(x, x_prime, data),
        feasibility: feas,
        dpow: T::from_usize_lossy(agree) / kk,
        sparsity: Some(sparsity(x, x_prime, data.schema())),
        instability: None,
    })
}

/// Memo of selected counterfactuals keyed by query and pipeline
/// configuration, shared across threads.
#[derive(Debug, Default)]
pub struct InstabilityCache<T: Scalar> {
    map: Mutex<HashMap<(u64, String), Option<Instance<T>>>>,
}

impl<T: Scalar> InstabilityCache<T> {
    pub fn new() -> Self {
        Self {
            map: Mutex::new(HashMap::new()),
        }
    }

    /// Runs `pipeline` on `x` unless a result for `(x, key)` is cached.
    pub fn selected<F>(&self, key: &str, x: &Instance<T>, pipeline: F) -> Option<Instance<T>>
    where
        F: FnOnce(&Instance<T>) -> Option<Instance<T>>,
    {
        let id = (fingerprint(x), key.to_string());
        if let Some(hit) = self.map.lock().expect("cache lock").get(&id) {
            return hit.clone();
        }
        // computed outside the lock; a concurrent duplicate computes the same value
        let out = pipeline(x);
        self.map.lock().expect("cache lock").insert(id, out.clone());
        out
    }

    /// As [`selected`](Self::selected) for several keys produced by one
    /// pipeline run; `pipeline` returns one result per key.
    pub fn selected_many<F>(&self, keys: &[String], x: &Instance<T>, pipeline: F) -> Vec<Option<Instance<T>>>
    where
        F: FnOnce(&Instance<T>) -> Vec<Option<Instance<T>>>,
    {
        let fp = fingerprint(x);
        {
            let map = self.map.lock().expect("cache lock");
            let hits: Option<Vec<_>> = keys.iter().map(|k| map.get(&(fp, k.clone())).cloned()).collect();
            if let Some(hits) = hits {
                return hits;
            }
        }
        let out = pipeline(x);
        assert_eq!(out.len(), keys.len(), "one result per key");
        let mut map = self.map.lock().expect("cache lock");
        for (k, v) in keys.iter().zip(&out) {
            map.insert((fp, k.clone()), v.clone());
        }
        out
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// HEOM distance between `x_cf`, the counterfactual selected for `x`, and
/// the counterfactual the same pipeline selects for `x`'s nearest training
/// neighbour. `None` when the pipeline finds nothing for the neighbour.
pub fn instability<T: Scalar, F>(
    x: &Instance<T>,
    x_cf: &Instance<T>,
    data: &Dataset<T>,
    cache: &InstabilityCache<T>,
    key: &str,
    pipeline: F,
) -> Result<Option<T>, DataError>
where
    F: FnOnce(&Instance<T>) -> Option<Instance<T>>,
{
    let nn = knn(x, data, 1, true)?;
    let x1 = data.row(nn[0].index);
    Ok(cache
        .selected(key, x1, pipeline)
        .map(|cf1| data.heom().distance(x_cf, &cf1)))
}

/// Result of one method on one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Outcome<T: Scalar> {
    /// Criteria of the returned counterfactual; `None` is a coverage miss.
    pub criteria: Option<CriteriaVector<T>>,
    pub actionable: bool,
}

/// One row of a metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub proximity: Option<f64>,
    pub feasibility: Option<f64>,
    pub dpow: Option<f64>,
    pub sparsity: Option<f64>,
    pub instability: Option<f64>,
    pub cover: f64,
    pub act: f64,
    pub instances: usize,
    /// Covered instances without an instability value.
    pub instability_missing: usize,
}

impl SummaryRow {
    /// The seven measures in table order; missing means are `None`.
    pub fn measures(&self) -> [Option<f64>; 7] {
        [
            self.proximity,
            self.feasibility,
            self.dpow,
            self.sparsity,
            self.instability,
            Some(self.cover),
            Some(self.act),
        ]
    }
}

/// Averages criteria over covered instances; `cover` is the covered share,
/// `act` the covered-and-actionable share.
pub fn aggregate_stats<T: Scalar>(outcomes: &[Outcome<T>]) -> Result<SummaryRow, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::Empty("no instance outcomes".into()));
    }
    let covered: Vec<&CriteriaVector<T>> = outcomes.iter().filter_map(|o| o.criteria.as_ref()).collect();
    let mean = |vals: Vec<f64>| {
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let instab: Vec<f64> = covered.iter().filter_map(|c| c.instability.map(T::as_f64)).collect();
    let n = outcomes.len() as f64;
    Ok(SummaryRow {
        proximity: mean(covered.iter().map(|c| c.proximity.as_f64()).collect()),
        feasibility: mean(covered.iter().map(|c| c.feasibility.as_f64()).collect()),
        dpow: mean(covered.iter().map(|c| c.dpow.as_f64()).collect()),
        sparsity: mean(covered.iter().filter_map(|c| c.sparsity.map(|s| s as f64)).collect()),
        instability_missing: covered.len() - instab.len(),
        instability: mean(instab),
        cover: covered.len() as f64 / n,
        act: outcomes
            .iter()
            .filter(|o| o.criteria.is_some() && o.actionable)
            .count() as f64
            / n,
        instances: outcomes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSpec;

    fn toy() -> Dataset<f64> {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous("a"),
            FeatureSpec::categorical("c", ["u", "v"]),
        ])
        .unwrap();
        let rows = vec![
            Instance::new(vec![FeatureValue::Num(0.0), FeatureValue::Cat("u".into())]),
            Instance::new(vec![FeatureValue::Num(4.0), FeatureValue::Cat("u".into())]),
            Instance::new(vec![FeatureValue::Num(10.0), FeatureValue::Cat("v".into())]),
            Instance::new(vec![FeatureValue::Num(5.0), FeatureValue::Cat("v".into())]),
        ];
        Dataset::new("toy", schema, rows, vec![0, 0, 1, 1], vec!["n".into(), "p".into()], vec![0, 1, 2], vec![3])
            .unwrap()
    }

    fn inst(a: f64, c: &str) -> Instance<f64> {
        Instance::new(vec![FeatureValue::Num(a), FeatureValue::Cat(c.into())])
    }

    #[test]
    fn feasibility_matches_brute_force() {
        let d = toy();
        let q = inst(3.0, "u");
        let mut all: Vec<f64> = d.train_indices().iter().map(|&i| d.heom().distance(&q, d.row(i))).collect();
        all.sort_by(f64::total_cmp);
        let want = (all[0] + all[1]) / 2.0;
        assert!((feasibility(&q, &d, 2).unwrap() - want).abs() < 1e-12);
        assert_eq!(feasibility(d.row(1), &d, 1).unwrap(), 0.0);
        assert!(feasibility(&q, &d, 4).is_err());
        assert!(feasibility(&q, &d, 0).is_err());
    }

    #[test]
    fn sparsity_counts_changes() {
        let d = toy();
        assert_eq!(sparsity(&inst(1.0, "u"), &inst(1.0, "u"), d.schema()), 0);
        assert_eq!(sparsity(&inst(1.0, "u"), &inst(1.0 + 1e-12, "v"), d.schema()), 1);
        assert_eq!(sparsity(&inst(1.0, "u"), &inst(2.0, "v"), d.schema()), 2);
    }

    #[test]
    fn aggregate_covers_and_means() {
        let cv = |p: f64| CriteriaVector::new(p, 0.0, 1.0);
        let outcomes = vec![
            Outcome { criteria: Some(cv(1.0)), actionable: true },
            Outcome { criteria: Some(cv(3.0)), actionable: false },
            Outcome { criteria: None, actionable: false },
            Outcome { criteria: None, actionable: false },
        ];
        let s = aggregate_stats(&outcomes).unwrap();
        assert_eq!(s.proximity, Some(2.0));
        assert_eq!(s.cover, 0.5);
        assert_eq!(s.act, 0.25);
        assert_eq!(s.instability, None);
        assert_eq!(s.instability_missing, 2);
        let none: Vec<Outcome<f64>> = vec![Outcome { criteria: None, actionable: false }];
        assert_eq!(aggregate_stats(&none).unwrap().cover, 0.0);
        assert!(aggregate_stats::<f64>(&[]).is_err());
    }

    #[test]
    fn cache_runs_pipeline_once() {
        let cache = InstabilityCache::<f64>::new();
        let x = inst(1.0, "u");
        let mut calls = 0;
        for _ in 0..3 {
            let out = cache.selected("k", &x, |x| {
                calls += 1;
                Some(x.clone())
            });
            assert!(out.unwrap().same_values(&x));
        }
        assert_eq!(calls, 1);
        assert_eq!(cache.len(), 1);
    }
}
