//! Heterogeneous Euclidean-Overlap Metric and brute-force nearest neighbours.
//!
//! Per-feature terms: overlap (0/1) for categorical features and
//! `|a - b| / (max - min)` for continuous ones, clipped to `[0, 1]`. A
//! zero-width range contributes 0 for equal values and 1 otherwise. The
//! aggregate is the Euclidean norm of the term vector.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RangeTable};
use crate::error::DataError;
use crate::scalar::{total_cmp, Scalar};
use crate::schema::{FeatureKind, FeatureSchema, FeatureValue, Instance};

#[derive(Debug, Clone, PartialEq)]
pub struct Heom<T: Scalar> {
    kinds: Vec<FeatureKind>,
    /// `None` marks a zero-width (or unfitted) continuous range.
    inv_width: Vec<Option<T>>,
}

impl<T: Scalar> Heom<T> {
    pub fn new(schema: &FeatureSchema<T>, ranges: &RangeTable<T>) -> Self {
        let kinds = schema.features().iter().map(|f| f.kind).collect();
        let inv_width = (0..schema.len())
            .map(|j| {
                ranges
                    .width(j)
                    .filter(|w| *w > T::zero() && w.is_finite())
                    .map(|w| w.recip())
            })
            .collect();
        Self { kinds, inv_width }
    }

    /// Per-feature term `d_j` in `[0, 1]`.
    #[inline]
    pub fn term(&self, feature: usize, a: &FeatureValue<T>, b: &FeatureValue<T>) -> T {
        match (a, b) {
            (FeatureValue::Num(x), FeatureValue::Num(y)) => {
                if x == y {
                    return T::zero();
                }
                match self.inv_width[feature] {
                    Some(inv) => ((*x - *y).abs() * inv).min(T::one()),
                    None => T::one(),
                }
            }
            (FeatureValue::Cat(x), FeatureValue::Cat(y)) => {
                if x == y {
                    T::zero()
                } else {
                    T::one()
                }
            }
            // Kind mismatch cannot arise from validated instances; treat as maximal.
            _ => T::one(),
        }
    }

    pub fn distance(&self, a: &Instance<T>, b: &Instance<T>) -> T {
        debug_assert_eq!(a.values.len(), self.kinds.len());
        debug_assert_eq!(b.values.len(), self.kinds.len());
        a.values
            .iter()
            .zip(&b.values)
            .enumerate()
            .map(|(j, (x, y))| {
                let d = self.term(j, x, y);
                d * d
            })
            .sum::<T>()
            .sqrt()
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Inverse range width of a continuous feature, if non-degenerate.
    pub fn inverse_width(&self, feature: usize) -> Option<T> {
        self.inv_width[feature]
    }
}

/// HEOM distance between two instances conforming to `schema`.
pub fn heom_distance<T: Scalar>(
    a: &Instance<T>,
    b: &Instance<T>,
    schema: &FeatureSchema<T>,
    ranges: &RangeTable<T>,
) -> T {
    Heom::new(schema, ranges).distance(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Neighbor<T: Scalar> {
    /// Row index in the dataset.
    pub index: usize,
    pub distance: T,
}

/// The `k` nearest training rows to `query`, ascending by distance with ties
/// broken by row index. With `exclude_self`, the row whose index equals
/// `query.id` is skipped.
pub fn knn<T: Scalar>(
    query: &Instance<T>,
    data: &Dataset<T>,
    k: usize,
    exclude_self: bool,
) -> Result<Vec<Neighbor<T>>, DataError> {
    let skip = if exclude_self { query.id } else { None };
    knn_among(query, data, data.train_indices(), k, skip)
}

/// As [`knn`], over an explicit pool of row indices.
pub fn knn_among<T: Scalar>(
    query: &Instance<T>,
    data: &Dataset<T>,
    pool: &[usize],
    k: usize,
    skip: Option<usize>,
) -> Result<Vec<Neighbor<T>>, DataError> {
    let eligible = pool.len() - usize::from(skip.is_some_and(|s| pool.contains(&s)));
    if k == 0 || k > eligible {
        return Err(DataError::Parameter(format!(
            "k = {k} must be in 1..={eligible}"
        )));
    }
    let heom = data.heom();
    let mut all: Vec<Neighbor<T>> = pool
        .iter()
        .filter(|&&i| Some(i) != skip)
        .map(|&i| Neighbor {
            index: i,
            distance: heom.distance(query, data.row(i)),
        })
        .collect();
    let order = |a: &Neighbor<T>, b: &Neighbor<T>| {
        total_cmp(a.distance, b.distance).then(a.index.cmp(&b.index))
    };
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, order);
        all.truncate(k);
    }
    all.sort_unstable_by(order);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSpec;

    fn one_continuous(lo: f64, hi: f64) -> (FeatureSchema<f64>, RangeTable<f64>) {
        let s = FeatureSchema::new(vec![FeatureSpec::continuous("age")]).unwrap();
        (s, RangeTable::from_entries(vec![Some((lo, hi))]))
    }

    fn num(v: f64) -> Instance<f64> {
        Instance::new(vec![FeatureValue::Num(v)])
    }

    #[test]
    fn continuous_term_hand_value() {
        let (s, r) = one_continuous(20.0, 60.0);
        assert_eq!(heom_distance(&num(20.0), &num(40.0), &s, &r), 0.5);
    }

    #[test]
    fn single_categorical_difference_is_one() {
        let s = FeatureSchema::new(vec![
            FeatureSpec::continuous("a"),
            FeatureSpec::categorical("c", ["x", "y"]),
        ])
        .unwrap();
        let r = RangeTable::from_entries(vec![Some((0.0, 1.0)), None]);
        let a = Instance::new(vec![FeatureValue::Num(0.3), FeatureValue::Cat("x".into())]);
        let b = Instance::new(vec![FeatureValue::Num(0.3), FeatureValue::Cat("y".into())]);
        assert_eq!(heom_distance(&a, &b, &s, &r), 1.0);
        assert_eq!(heom_distance(&a, &a, &s, &r), 0.0);
        // unseen category behaves like any other mismatch
        let c = Instance::new(vec![FeatureValue::Num(0.3), FeatureValue::Cat("zzz".into())]);
        assert_eq!(heom_distance(&a, &c, &s, &r), 1.0);
    }

    #[test]
    fn zero_width_range() {
        let (s, r) = one_continuous(5.0, 5.0);
        assert_eq!(heom_distance(&num(5.0), &num(5.0), &s, &r), 0.0);
        assert_eq!(heom_distance(&num(5.0), &num(5.5), &s, &r), 1.0);
    }

    #[test]
    fn out_of_range_values_clip_to_one() {
        let (s, r) = one_continuous(0.0, 10.0);
        assert_eq!(heom_distance(&num(0.0), &num(1000.0), &s, &r), 1.0);
    }
}
