//! Multi-criteria selection: dominance filtering, normalisation and
//! ideal-point choice.
//!
//! Criteria vectors are plain slices; any arity of at least two is accepted.

mod pipeline;

pub use pipeline::{
    filter_actionable, filter_valid, select_counterfactual, ExplainerCounts, FrontMember, IdealPoint,
    SelectionResult, StepCounts,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::McdaError;
use crate::scalar::{total_cmp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Min,
    Max,
}

impl Direction {
    /// True if `a` is strictly better than `b`.
    fn better<T: Scalar>(self, a: T, b: T) -> bool {
        match self {
            Direction::Min => a < b,
            Direction::Max => a > b,
        }
    }
}

/// Distance used to pick the front member closest to the ideal point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L1,
    L2,
    Linf,
    /// Distance along the ideal-to-nadir axis.
    NadirPlane,
}

impl Metric {
    pub const IDEAL: [Metric; 3] = [Metric::L1, Metric::L2, Metric::Linf];

    pub fn name(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
            Metric::Linf => "linf",
            Metric::NadirPlane => "nadir_plane",
        }
    }

    /// Human-readable label used in report rows.
    pub fn label(self) -> &'static str {
        match self {
            Metric::L1 => "Manhattan",
            Metric::L2 => "Euclidean",
            Metric::Linf => "Chebyshev",
            Metric::NadirPlane => "NadirPlane",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "manhattan" => Ok(Metric::L1),
            "l2" | "euclidean" => Ok(Metric::L2),
            "linf" | "chebyshev" => Ok(Metric::Linf),
            "nadir" | "nadir_plane" | "nadir-plane" => Ok(Metric::NadirPlane),
            other => Err(format!("unknown metric `{other}` (expected l1, l2, linf or nadir)")),
        }
    }
}

fn check_arity(len: usize, dirs: &[Direction]) -> Result<(), McdaError> {
    if dirs.len() < 2 {
        return Err(McdaError::TooFewCriteria {
            min: 2,
            found: dirs.len(),
        });
    }
    if len != dirs.len() {
        return Err(McdaError::Arity {
            left: len,
            right: dirs.len(),
        });
    }
    Ok(())
}

/// True iff `a` is at least as good as `b` on every criterion and strictly
/// better on at least one.
pub fn dominates<T: Scalar>(a: &[T], b: &[T], dirs: &[Direction]) -> Result<bool, McdaError> {
    if a.len() != b.len() {
        return Err(McdaError::Arity {
            left: a.len(),
            right: b.len(),
        });
    }
    check_arity(a.len(), dirs)?;
    Ok(dominates_unchecked(a, b, dirs))
}

fn dominates_unchecked<T: Scalar>(a: &[T], b: &[T], dirs: &[Direction]) -> bool {
    let mut strict = false;
    for ((&x, &y), &d) in a.iter().zip(b).zip(dirs) {
        if d.better(y, x) {
            return false;
        }
        strict |= d.better(x, y);
    }
    strict
}

/// Indices of the non-dominated vectors, in input order.
///
/// Vectors are visited in lexicographic order of their min-oriented values;
/// a dominator always precedes what it dominates in that order, so each
/// vector only needs checking against the front built so far.
pub fn pareto_front<T: Scalar, V: AsRef<[T]>>(vectors: &[V], dirs: &[Direction]) -> Result<Vec<usize>, McdaError> {
    for v in vectors {
        check_arity(v.as_ref().len(), dirs)?;
    }
    let oriented = |i: usize, j: usize| -> T {
        let v = vectors[i].as_ref()[j];
        match dirs[j] {
            Direction::Min => v,
            Direction::Max => -v,
        }
    };
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    order.sort_by(|&a, &b| {
        (0..dirs.len())
            .map(|j| total_cmp(oriented(a, j), oriented(b, j)))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        let v = vectors[i].as_ref();
        if !front.iter().any(|&f| dominates_unchecked(vectors[f].as_ref(), v, dirs)) {
            front.push(i);
        }
    }
    front.sort_unstable();
    Ok(front)
}

/// Min-max scales each criterion over `vectors` and orients it so that
/// smaller is better: max criteria become `1 - scaled`. A criterion with no
/// spread maps to 0 everywhere.
pub fn normalize<T: Scalar, V: AsRef<[T]>>(vectors: &[V], dirs: &[Direction]) -> Result<Vec<Vec<T>>, McdaError> {
    for v in vectors {
        check_arity(v.as_ref().len(), dirs)?;
    }
    let bounds = bounds(vectors, dirs.len());
    Ok(vectors
        .iter()
        .map(|v| normalize_one(v.as_ref(), &bounds, dirs))
        .collect())
}

/// Per-criterion `(min, max)`.
pub fn bounds<T: Scalar, V: AsRef<[T]>>(vectors: &[V], arity: usize) -> Vec<(T, T)> {
    (0..arity)
        .map(|j| {
            vectors.iter().map(|v| v.as_ref()[j]).fold(
                (T::infinity(), T::neg_infinity()),
                |(lo, hi), x| (lo.min(x), hi.max(x)),
            )
        })
        .collect()
}

/// Scales one vector with precomputed bounds.
pub fn normalize_one<T: Scalar>(v: &[T], bounds: &[(T, T)], dirs: &[Direction]) -> Vec<T> {
    v.iter()
        .zip(bounds)
        .zip(dirs)
        .map(|((&x, &(lo, hi)), &d)| {
            let spread = hi - lo;
            if !(spread > T::zero()) {
                return T::zero();
            }
            let s = (x - lo) / spread;
            match d {
                Direction::Min => s,
                Direction::Max => T::one() - s,
            }
        })
        .collect()
}

/// Component-wise minimum of normalised (min-oriented) vectors.
pub fn ideal_of<T: Scalar, V: AsRef<[T]>>(normalized: &[V]) -> Vec<T> {
    let arity = normalized.first().map_or(0, |v| v.as_ref().len());
    (0..arity)
        .map(|j| normalized.iter().map(|v| v.as_ref()[j]).fold(T::infinity(), T::min))
        .collect()
}

/// Component-wise maximum of normalised (min-oriented) vectors.
pub fn nadir_of<T: Scalar, V: AsRef<[T]>>(normalized: &[V]) -> Vec<T> {
    let arity = normalized.first().map_or(0, |v| v.as_ref().len());
    (0..arity)
        .map(|j| normalized.iter().map(|v| v.as_ref()[j]).fold(T::neg_infinity(), T::max))
        .collect()
}

pub fn distance<T: Scalar>(v: &[T], to: &[T], metric: Metric) -> T {
    let diffs = v.iter().zip(to).map(|(&a, &b)| (a - b).abs());
    match metric {
        Metric::L1 => diffs.fold(T::zero(), |s, d| s + d),
        Metric::L2 | Metric::NadirPlane => diffs.fold(T::zero(), |s, d| s + d * d).sqrt(),
        Metric::Linf => diffs.fold(T::zero(), T::max),
    }
}

/// Index of the smallest score; the first index wins ties.
fn argmin<T: Scalar>(scores: &[T]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.map_or(true, |b| total_cmp(s, scores[b]).is_lt()) {
            best = Some(i);
        }
    }
    best
}

/// Distances from each normalised front member to the ideal point of the
/// front, and the index of the closest (first on ties). `metric` must not be
/// [`Metric::NadirPlane`]; see [`select_nadir_plane`].
pub fn select_ideal<T: Scalar, V: AsRef<[T]>>(normalized: &[V], metric: Metric) -> (Option<usize>, Vec<T>) {
    let z = ideal_of(normalized);
    let d: Vec<T> = normalized.iter().map(|v| distance(v.as_ref(), &z, metric)).collect();
    (argmin(&d), d)
}

/// Scores each normalised front member by its signed offset from the ideal
/// point along the unit axis towards the nadir point; that is its distance
/// to the plane through the ideal point orthogonal to the ideal-nadir axis.
/// Falls back to L2 ideal selection when ideal and nadir coincide.
pub fn select_nadir_plane<T: Scalar, V: AsRef<[T]>>(normalized: &[V]) -> (Option<usize>, Vec<T>) {
    let z = ideal_of(normalized);
    let n = nadir_of(normalized);
    let axis: Vec<T> = n.iter().zip(&z).map(|(&a, &b)| a - b).collect();
    let len = axis.iter().fold(T::zero(), |s, &a| s + a * a).sqrt();
    if !(len > T::zero()) {
        return select_ideal(normalized, Metric::L2);
    }
    let d: Vec<T> = normalized
        .iter()
        .map(|v| {
            v.as_ref()
                .iter()
                .zip(&z)
                .zip(&axis)
                .fold(T::zero(), |s, ((&x, &zi), &a)| s + (x - zi) * a)
                / len
        })
        .collect();
    (argmin(&d), d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MMX: [Direction; 3] = [Direction::Min, Direction::Min, Direction::Max];

    fn brute<T: Scalar>(v: &[Vec<T>], dirs: &[Direction]) -> Vec<usize> {
        (0..v.len())
            .filter(|&i| !(0..v.len()).any(|j| dominates(&v[j], &v[i], dirs).unwrap()))
            .collect()
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&[0.1, 0.2, 0.9], &[0.2, 0.3, 0.5], &MMX).unwrap());
        assert!(!dominates(&[0.1, 0.5, 0.9], &[0.2, 0.3, 0.5], &MMX).unwrap());
        assert!(!dominates(&[0.2, 0.3, 0.5], &[0.1, 0.5, 0.9], &MMX).unwrap());
        assert!(!dominates(&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5], &MMX).unwrap());
        assert_eq!(
            dominates(&[0.1, 0.2], &[0.2, 0.3, 0.5], &MMX),
            Err(McdaError::Arity { left: 2, right: 3 })
        );
        assert_eq!(
            dominates(&[0.1], &[0.2], &[Direction::Min]),
            Err(McdaError::TooFewCriteria { min: 2, found: 1 })
        );
    }

    #[test]
    fn front_keeps_equal_vectors() {
        let v = vec![vec![1.0, 1.0, 0.5], vec![1.0, 1.0, 0.5], vec![2.0, 2.0, 0.1]];
        assert_eq!(pareto_front(&v, &MMX).unwrap(), vec![0, 1]);
        assert_eq!(pareto_front::<f64, Vec<f64>>(&[], &MMX).unwrap(), Vec::<usize>::new());
        assert_eq!(pareto_front(&v[2..], &MMX).unwrap(), vec![0]);
    }

    #[test]
    fn normalize_examples() {
        let v = vec![vec![2.0, 5.0, 0.2], vec![4.0, 5.0, 1.0], vec![6.0, 5.0, 0.6]];
        let n = normalize(&v, &MMX).unwrap();
        assert_eq!(n.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        assert_eq!(n.iter().map(|r| r[1]).collect::<Vec<_>>(), vec![0.0, 0.0, 0.0]);
        assert!((n[0][2] - 1.0f64).abs() < 1e-12 && n[1][2] == 0.0);
    }

    #[test]
    fn l1_hand_evaluated() {
        let v = vec![vec![0.0, 0.5, 0.2], vec![0.3, 0.0, 0.1], vec![0.1, 0.1, 0.0]];
        let (best, d) = select_ideal(&v, Metric::L1);
        assert_eq!(best, Some(2));
        for (got, want) in d.iter().zip([0.7f64, 0.4, 0.2]) {
            assert!((got - want).abs() < 1e-12);
        }
        let one = vec![vec![0.3, 0.3, 0.3]];
        for m in Metric::IDEAL {
            assert_eq!(select_ideal(&one, m).0, Some(0));
        }
        assert_eq!(select_nadir_plane(&one).0, Some(0));
    }

    #[test]
    fn nadir_plane_geometry() {
        // two members; the one nearer the ideal along the axis wins
        let v = vec![vec![1.0, 0.0, 0.6], vec![0.0, 1.0, 0.0]];
        let (best, d) = select_nadir_plane(&v);
        // ideal (0,0,0), nadir (1,1,0.6), axis length sqrt(2.36)
        let len = 2.36f64.sqrt();
        assert!((d[0] - 1.36 / len).abs() < 1e-12);
        assert!((d[1] - 1.0 / len).abs() < 1e-12);
        assert_eq!(best, Some(1));
        // symmetric about the axis: first wins
        let v = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(select_nadir_plane(&v).0, Some(0));
        // degenerate: all equal
        let v = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert_eq!(select_nadir_plane(&v).0, Some(0));
    }

    #[test]
    fn metric_names_parse() {
        for m in [Metric::L1, Metric::L2, Metric::Linf, Metric::NadirPlane] {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("Chebyshev".parse::<Metric>().unwrap(), Metric::Linf);
        assert!("cosine".parse::<Metric>().is_err());
    }

    fn sets() -> impl Strategy<Value = Vec<Vec<f64>>> {
        // coarse grid values force many ties
        prop::collection::vec(prop::collection::vec((0u8..6).prop_map(|v| v as f64 / 5.0), 3), 0..40)
    }

    proptest! {
        #[test]
        fn front_matches_brute_force(v in sets()) {
            prop_assert_eq!(pareto_front(&v, &MMX).unwrap(), brute(&v, &MMX));
        }

        #[test]
        fn front_is_idempotent(v in sets()) {
            let f = pareto_front(&v, &MMX).unwrap();
            let sub: Vec<Vec<f64>> = f.iter().map(|&i| v[i].clone()).collect();
            let again = pareto_front(&sub, &MMX).unwrap();
            prop_assert_eq!(again, (0..sub.len()).collect::<Vec<_>>());
        }

        #[test]
        fn normalized_ideal_is_origin(v in sets()) {
            prop_assume!(!v.is_empty());
            let n = normalize(&v, &MMX).unwrap();
            let f = pareto_front(&v, &MMX).unwrap();
            let front: Vec<Vec<f64>> = f.iter().map(|&i| n[i].clone()).collect();
            prop_assert!(ideal_of(&front).iter().all(|&z| z == 0.0));
        }
    }
}
