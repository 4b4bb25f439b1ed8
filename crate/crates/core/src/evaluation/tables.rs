use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::explainers::ExplainerKind;
use crate::mcda::{Direction, SelectionResult};
use crate::scalar::Scalar;

/// Column names of a metrics table.
pub const MEASURES: [&str; 7] = ["prox", "feas", "dpow", "spars", "instab", "cover", "act"];

/// Direction of each column in [`MEASURES`].
pub const MEASURE_DIRECTIONS: [Direction; 7] = [
    Direction::Min,
    Direction::Min,
    Direction::Max,
    Direction::Min,
    Direction::Min,
    Direction::Max,
    Direction::Max,
];

/// Methods by measures; `None` marks a measure a method could not produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureMatrix {
    pub methods: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub directions: Vec<Direction>,
}

impl MeasureMatrix {
    /// A matrix over the seven standard measures.
    pub fn new(methods: Vec<String>, rows: Vec<[Option<f64>; 7]>) -> Self {
        Self {
            methods,
            rows: rows.into_iter().map(|r| r.to_vec()).collect(),
            directions: MEASURE_DIRECTIONS.to_vec(),
        }
    }

    fn check(&self) -> Result<(), EvalError> {
        if self.methods.len() != self.rows.len() {
            return Err(EvalError::Arity(format!(
                "{} methods but {} rows",
                self.methods.len(),
                self.rows.len()
            )));
        }
        if let Some(r) = self.rows.iter().find(|r| r.len() != self.directions.len()) {
            return Err(EvalError::Arity(format!(
                "row of {} measures, expected {}",
                r.len(),
                self.directions.len()
            )));
        }
        Ok(())
    }
}

/// Fractional ranks (1 = best); tied values share the mean of their
/// positions.
pub fn fractional_ranks(values: &[f64], dir: Direction) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    let key = |i: usize| match dir {
        Direction::Min => values[i],
        Direction::Max => -values[i],
    };
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && key(order[end]) == key(order[start]) {
            end += 1;
        }
        // positions start+1 ..= end
        let mean = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

/// Mean rank of each method across all measures. Missing cells take the
/// worst value of their column before ranking.
pub fn rank_table(m: &MeasureMatrix) -> Result<Vec<f64>, EvalError> {
    m.check()?;
    if m.rows.is_empty() {
        return Err(EvalError::Empty("no methods to rank".into()));
    }
    let cols = m.directions.len();
    let mut sums = vec![0.0; m.rows.len()];
    for (j, &dir) in m.directions.iter().enumerate() {
        let present = m.rows.iter().filter_map(|r| r[j]);
        let worst = match dir {
            Direction::Min => present.fold(f64::NEG_INFINITY, f64::max),
            Direction::Max => present.fold(f64::INFINITY, f64::min),
        };
        let worst = if worst.is_finite() { worst } else { 0.0 };
        let col: Vec<f64> = m.rows.iter().map(|r| r[j].unwrap_or(worst)).collect();
        for (s, r) in sums.iter_mut().zip(fractional_ranks(&col, dir)) {
            *s += r;
        }
    }
    Ok(sums.into_iter().map(|s| s / cols as f64).collect())
}

/// Mean survivors per instance at each step for one explainer; `ideal` is
/// the share of instances whose selected candidate came from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub explainer: String,
    pub all: f64,
    pub valid: f64,
    pub actionable: f64,
    pub front: f64,
    pub ideal: f64,
}

pub fn survival_table<T: Scalar>(results: &[SelectionResult<T>]) -> Vec<SurvivalRow> {
    let mut names: Vec<String> = Vec::new();
    for e in results.iter().flat_map(|r| &r.explainers) {
        if !names.contains(&e.explainer) {
            names.push(e.explainer.clone());
        }
    }
    // provenance order; unknown explainers keep first-appearance order at the end
    names.sort_by_key(|n| ExplainerKind::from_name(n).map_or(usize::MAX, |k| k as usize));
    let n = results.len().max(1) as f64;
    names
        .into_iter()
        .map(|name| {
            let mut row = SurvivalRow {
                explainer: name.clone(),
                all: 0.0,
                valid: 0.0,
                actionable: 0.0,
                front: 0.0,
                ideal: 0.0,
            };
            for r in results {
                if let Some(e) = r.explainers.iter().find(|e| e.explainer == name) {
                    row.all += e.counts.all as f64;
                    row.valid += e.counts.valid as f64;
                    row.actionable += e.counts.actionable as f64;
                    row.front += e.counts.front as f64;
                    row.ideal += e.counts.chosen as f64;
                }
            }
            row.all /= n;
            row.valid /= n;
            row.actionable /= n;
            row.front /= n;
            row.ideal /= n;
            row
        })
        .collect()
}

/// Mean share of valid and actionable candidates removed by the dominance
/// filter, over instances that had any.
pub fn dominance_reduction<T: Scalar>(results: &[SelectionResult<T>]) -> Option<f64> {
    let shares: Vec<f64> = results
        .iter()
        .filter(|r| r.counts.actionable > 0)
        .map(|r| r.dominated as f64 / r.counts.actionable as f64)
        .collect();
    if shares.is_empty() {
        None
    } else {
        Some(shares.iter().sum::<f64>() / shares.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(fractional_ranks(&[3.0, 1.0, 3.0, 2.0], Direction::Min), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(fractional_ranks(&[3.0, 1.0, 3.0, 2.0], Direction::Max), vec![1.5, 4.0, 1.5, 3.0]);
        assert_eq!(fractional_ranks(&[5.0; 3], Direction::Min), vec![2.0; 3]);
    }

    #[test]
    fn two_methods_two_criteria() {
        let m = MeasureMatrix {
            methods: vec!["a".into(), "b".into()],
            rows: vec![vec![Some(1.0), Some(0.9)], vec![Some(2.0), Some(0.1)]],
            directions: vec![Direction::Min, Direction::Max],
        };
        assert_eq!(rank_table(&m).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn missing_cells_take_column_worst() {
        let m = MeasureMatrix {
            methods: vec!["a".into(), "b".into(), "c".into()],
            rows: vec![vec![Some(1.0), Some(1.0)], vec![None, Some(0.0)], vec![Some(3.0), None]],
            directions: vec![Direction::Min, Direction::Max],
        };
        // column 0 -> [1, 3, 3] ranks [1, 2.5, 2.5]; column 1 -> [1, 0, 0] ranks [1, 2.5, 2.5]
        assert_eq!(rank_table(&m).unwrap(), vec![1.0, 2.5, 2.5]);
    }

    #[test]
    fn arity_checked() {
        let m = MeasureMatrix {
            methods: vec!["a".into()],
            rows: vec![vec![Some(1.0)]],
            directions: vec![Direction::Min, Direction::Max],
        };
        assert!(matches!(rank_table(&m), Err(EvalError::Arity(_))));
    }

    proptest! {
        #[test]
        fn ranks_invariant_under_monotone_maps(
            cols in prop::collection::vec(prop::collection::vec(0u8..8, 7), 2..10)
        ) {
            let rows: Vec<[Option<f64>; 7]> = cols
                .iter()
                .map(|r| std::array::from_fn(|j| Some(r[j] as f64 / 4.0)))
                .collect();
            let names: Vec<String> = (0..rows.len()).map(|i| format!("m{i}")).collect();
            let base = rank_table(&MeasureMatrix::new(names.clone(), rows.clone())).unwrap();
            let mapped: Vec<[Option<f64>; 7]> = rows
                .iter()
                .map(|r| std::array::from_fn(|j| r[j].map(|v| (3.0 * v).exp() + 7.0)))
                .collect();
            prop_assert_eq!(rank_table(&MeasureMatrix::new(names, mapped)).unwrap(), base);
        }
    }
}
