use serde::{Deserialize, Serialize};

use super::{normalize_one, pareto_front, select_ideal, select_nadir_plane, bounds, Direction, Metric};
use crate::explainers::Candidate;
use crate::metrics::CriteriaVector;
use crate::scalar::Scalar;
use crate::schema::{FeatureSchema, Instance};

/// Candidates the model assigns to `desired`, order preserved.
pub fn filter_valid<T: Scalar>(cands: &[Candidate<T>], desired: usize) -> Vec<Candidate<T>> {
    cands.iter().filter(|c| c.predicted == desired).cloned().collect()
}

/// Candidates that keep every immutable feature of `x`, order preserved.
pub fn filter_actionable<T: Scalar>(
    cands: &[Candidate<T>],
    x: &Instance<T>,
    schema: &FeatureSchema<T>,
) -> Vec<Candidate<T>> {
    cands
        .iter()
        .filter(|c| schema.is_actionable(x, &c.x_prime))
        .cloned()
        .collect()
}

/// Number of candidates left after each step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounts {
    pub all: usize,
    pub valid: usize,
    pub actionable: usize,
    pub front: usize,
    pub chosen: usize,
}

impl StepCounts {
    pub fn is_monotone(&self) -> bool {
        self.all >= self.valid
            && self.valid >= self.actionable
            && self.actionable >= self.front
            && self.front >= self.chosen
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplainerCounts {
    pub explainer: String,
    pub counts: StepCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FrontMember<T: Scalar> {
    pub candidate: Candidate<T>,
    pub criteria: CriteriaVector<T>,
    /// Min-oriented, min-max scaled selection criteria.
    pub normalized: Vec<T>,
    /// Selection score under the result's metric.
    pub distance: T,
}

/// Best value per selection criterion over the front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IdealPoint<T: Scalar> {
    pub raw: Vec<T>,
    pub normalized: Vec<T>,
}

/// Outcome of the selection pipeline for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SelectionResult<T: Scalar> {
    pub metric: Metric,
    pub desired: usize,
    pub counts: StepCounts,
    /// Per-explainer survival, in provenance order.
    pub explainers: Vec<ExplainerCounts>,
    /// Non-dominated valid and actionable candidates, in provenance order.
    pub front: Vec<FrontMember<T>>,
    /// Valid and actionable candidates removed by the dominance filter.
    pub dominated: usize,
    pub ideal: Option<IdealPoint<T>>,
    /// Index into `front`.
    pub chosen: Option<usize>,
}

impl<T: Scalar> SelectionResult<T> {
    pub fn chosen(&self) -> Option<&FrontMember<T>> {
        self.chosen.map(|i| &self.front[i])
    }

    pub fn is_covered(&self) -> bool {
        self.chosen.is_some()
    }
}

/// Validity filter, actionability filter, dominance filter and ideal-point
/// choice for one query.
///
/// `score` is called once per valid and actionable candidate with its
/// index in `cands`. Normalisation bounds come from that valid and
/// actionable set. Equal scores are resolved by provenance order.
pub fn select_counterfactual<T, F, E>(
    x: &Instance<T>,
    schema: &FeatureSchema<T>,
    desired: usize,
    cands: &[Candidate<T>],
    mut score: F,
    metric: Metric,
) -> Result<SelectionResult<T>, E>
where
    T: Scalar,
    F: FnMut(usize, &Candidate<T>) -> Result<CriteriaVector<T>, E>,
{
    let dirs = CriteriaVector::<T>::SELECTION_DIRECTIONS;
    let valid: Vec<usize> = (0..cands.len()).filter(|&i| cands[i].predicted == desired).collect();
    let mut actionable: Vec<usize> = valid
        .iter()
        .copied()
        .filter(|&i| schema.is_actionable(x, &cands[i].x_prime))
        .collect();
    actionable.sort_by(|&a, &b| cands[a].source.cmp(&cands[b].source).then(a.cmp(&b)));

    let criteria = actionable
        .iter()
        .map(|&i| score(i, &cands[i]))
        .collect::<Result<Vec<_>, E>>()?;
    let vectors: Vec<[T; 3]> = criteria.iter().map(|c| c.selection()).collect();
    let front_idx = pareto_front(&vectors, &dirs).expect("three criteria");
    let b = bounds(&vectors, 3);
    let normalized: Vec<Vec<T>> = front_idx
        .iter()
        .map(|&k| normalize_one(&vectors[k], &b, &dirs))
        .collect();
    let (chosen, distances) = match metric {
        Metric::NadirPlane => select_nadir_plane(&normalized),
        m => select_ideal(&normalized, m),
    };
    let ideal = (!front_idx.is_empty()).then(|| IdealPoint {
        raw: (0..3)
            .map(|j| {
                let vals = front_idx.iter().map(|&k| vectors[k][j]);
                match dirs[j] {
                    Direction::Min => vals.fold(T::infinity(), T::min),
                    Direction::Max => vals.fold(T::neg_infinity(), T::max),
                }
            })
            .collect(),
        normalized: super::ideal_of(&normalized),
    });

    let front: Vec<FrontMember<T>> = front_idx
        .iter()
        .zip(normalized)
        .zip(&distances)
        .map(|((&k, normalized), &distance)| FrontMember {
            candidate: cands[actionable[k]].clone(),
            criteria: criteria[k],
            normalized,
            distance,
        })
        .collect();

    let counts = StepCounts {
        all: cands.len(),
        valid: valid.len(),
        actionable: actionable.len(),
        front: front.len(),
        chosen: usize::from(chosen.is_some()),
    };
    let mut explainers: Vec<(u32, ExplainerCounts)> = Vec::new();
    let mut bump = |c: &Candidate<T>, step: fn(&mut StepCounts) -> &mut usize| {
        let s = match explainers.iter().position(|(_, e)| e.explainer == c.source.explainer) {
            Some(p) => p,
            None => {
                explainers.push((
                    c.source.position,
                    ExplainerCounts {
                        explainer: c.source.explainer.clone(),
                        counts: StepCounts::default(),
                    },
                ));
                explainers.len() - 1
            }
        };
        *step(&mut explainers[s].1.counts) += 1;
    };
    for c in cands {
        bump(c, |s| &mut s.all);
    }
    for &i in &valid {
        bump(&cands[i], |s| &mut s.valid);
    }
    for &i in &actionable {
        bump(&cands[i], |s| &mut s.actionable);
    }
    for m in &front {
        bump(&m.candidate, |s| &mut s.front);
    }
    if let Some(c) = chosen {
        bump(&front[c].candidate, |s| &mut s.chosen);
    }
    explainers.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.explainer.cmp(&b.1.explainer)));

    Ok(SelectionResult {
        metric,
        desired,
        counts,
        explainers: explainers.into_iter().map(|(_, e)| e).collect(),
        dominated: actionable.len() - front.len(),
        front,
        ideal,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainers::{ExplainerKind, Provenance};
    use crate::schema::{FeatureSpec, FeatureValue};
    use std::convert::Infallible;

    fn schema() -> FeatureSchema<f64> {
        FeatureSchema::new(vec![
            FeatureSpec::continuous("a"),
            FeatureSpec::categorical("race", ["p", "q"]).immutable(),
        ])
        .unwrap()
    }

    fn cand(kind: ExplainerKind, r: usize, a: f64, race: &str, predicted: usize) -> Candidate<f64> {
        Candidate {
            x_prime: Instance::new(vec![FeatureValue::Num(a), FeatureValue::Cat(race.into())]),
            source: Provenance::new(kind, r),
            predicted,
            valid: predicted == 1,
            actionable: race == "p",
        }
    }

    #[test]
    fn pipeline_counts_and_choice() {
        let x = Instance::new(vec![FeatureValue::Num(0.0), FeatureValue::Cat("p".into())]);
        let cands = vec![
            cand(ExplainerKind::Nun, 0, 1.0, "p", 1),
            cand(ExplainerKind::Nun, 1, 2.0, "q", 1),
            cand(ExplainerKind::GrowingSpheres, 0, 3.0, "p", 0),
            cand(ExplainerKind::GrowingSpheres, 1, 4.0, "p", 1),
            cand(ExplainerKind::CadexLite, 0, 5.0, "p", 1),
        ];
        // criteria keyed on the `a` value
        let table = |a: f64| match a as i32 {
            1 => CriteriaVector::new(0.1, 0.9, 0.2),
            4 => CriteriaVector::new(0.5, 0.2, 0.8),
            _ => CriteriaVector::new(0.6, 0.3, 0.7),
        };
        let r = select_counterfactual::<f64, _, Infallible>(
            &x,
            &schema(),
            1,
            &cands,
            |_, c| Ok(table(c.x_prime.num(0).unwrap())),
            Metric::L2,
        )
        .unwrap();
        assert_eq!(
            r.counts,
            StepCounts { all: 5, valid: 4, actionable: 3, front: 2, chosen: 1 }
        );
        assert!(r.counts.is_monotone());
        assert_eq!(r.dominated, 1);
        let chosen = r.chosen().unwrap();
        assert_eq!(chosen.candidate.source.explainer, "growing_spheres");
        assert_eq!(r.ideal.as_ref().unwrap().raw, vec![0.1, 0.2, 0.8]);
        assert_eq!(r.ideal.as_ref().unwrap().normalized, vec![0.0, 0.0, 0.0]);
        let names: Vec<&str> = r.explainers.iter().map(|e| e.explainer.as_str()).collect();
        assert_eq!(names, ["nun", "growing_spheres", "cadex_lite"]);
        assert_eq!(r.explainers[1].counts.chosen, 1);
        let sum: usize = r.explainers.iter().map(|e| e.counts.front).sum();
        assert_eq!(sum, r.counts.front);
        assert_eq!(filter_valid(&cands, 1).len(), 4);
        assert_eq!(filter_actionable(&cands, &x, &schema()).len(), 4);
    }

    #[test]
    fn no_survivor_is_a_miss() {
        let x = Instance::new(vec![FeatureValue::Num(0.0), FeatureValue::Cat("p".into())]);
        let cands = vec![cand(ExplainerKind::Nun, 0, 1.0, "q", 1)];
        let r = select_counterfactual::<f64, _, Infallible>(
            &x,
            &schema(),
            1,
            &cands,
            |_, _| unreachable!(),
            Metric::L1,
        )
        .unwrap();
        assert!(!r.is_covered());
        assert!(r.ideal.is_none());
        assert_eq!(r.counts.actionable, 0);
    }
}
