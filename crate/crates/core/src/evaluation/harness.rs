use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::MethodCriteria;
use super::tables::{dominance_reduction, rank_table, survival_table, MeasureMatrix, SurvivalRow};
use super::Method;
use crate::config::RunConfig;
use crate::data::Dataset;
use crate::error::{DataError, EvalError};
use crate::explainers::{desired_class, fingerprint, generate, merge, EnsembleOutput, ExplainContext, ExplainerConfig, ExplainerKind};
use crate::heom::knn;
use crate::mcda::{select_counterfactual, Metric, SelectionResult};
use crate::metrics::{aggregate_stats, score, CriteriaVector, InstabilityCache, Outcome, SummaryRow};
use crate::model::Model;
use crate::scalar::Scalar;
use crate::schema::Instance;

/// Everything an evaluation run depends on besides data and model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub explainers: ExplainerConfig,
    pub neighbors: usize,
    /// Number of test rows, taken in test-split order.
    pub instances: usize,
    /// Seed of the random-selection baseline.
    pub seed: u64,
    /// Metrics of the pipeline rows, in table order.
    pub metrics: Vec<Metric>,
    /// Metric whose selections feed the survival table.
    pub primary: Metric,
}

impl EvalSettings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let mut metrics = Metric::IDEAL.to_vec();
        if cfg.evaluation.nadir {
            metrics.push(Metric::NadirPlane);
        }
        if !metrics.contains(&cfg.selection.metric) {
            metrics.push(cfg.selection.metric);
        }
        Self {
            explainers: cfg.explainers.clone(),
            neighbors: cfg.selection.neighbors,
            instances: cfg.evaluation.instances,
            seed: cfg.evaluation.seed,
            metrics,
            primary: cfg.selection.metric,
        }
    }

    /// Table rows: enabled explainers, the random baseline, then one row per
    /// metric.
    pub fn methods(&self) -> Vec<Method> {
        ExplainerKind::ALL
            .into_iter()
            .filter(|&k| self.explainers.enabled(k))
            .map(Method::Explainer)
            .chain([Method::Random])
            .chain(self.metrics.iter().map(|&m| Method::Ideal(m)))
            .collect()
    }
}

/// The counterfactual one method returns for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Pick<T: Scalar> {
    pub x_prime: Instance<T>,
    pub explainer: String,
    pub criteria: CriteriaVector<T>,
    pub actionable: bool,
}

/// Every method's answer for one query.
#[derive(Debug, Clone)]
pub struct QueryRun<T: Scalar> {
    pub query_class: usize,
    pub desired: usize,
    pub ensemble: EnsembleOutput<T>,
    /// Aligned with [`EvalSettings::methods`].
    pub picks: Vec<Option<Pick<T>>>,
    /// Aligned with [`EvalSettings::metrics`].
    pub selections: Vec<SelectionResult<T>>,
}

/// Runs every explainer once on `x` and derives each method's answer.
pub fn explain_query<T: Scalar>(
    x: &Instance<T>,
    ctx: &ExplainContext<'_, T>,
    settings: &EvalSettings,
) -> Result<QueryRun<T>, DataError> {
    let query_class = ctx.model.predict(x);
    let desired = desired_class(query_class);
    let schema = ctx.data.schema();
    let k = settings.neighbors;
    let per_kind: Vec<(ExplainerKind, Vec<_>)> = ExplainerKind::ALL
        .into_iter()
        .filter(|&kind| settings.explainers.enabled(kind))
        .map(|kind| (kind, generate(kind, x, ctx, &settings.explainers)))
        .collect();

    let mut picks = Vec::new();
    for (kind, cands) in &per_kind {
        let best = cands
            .iter()
            .filter(|c| c.valid)
            .map(|c| (ctx.data.heom().distance(x, &c.x_prime), c))
            .fold(None, |acc: Option<(T, _)>, (d, c)| match acc {
                Some((bd, _)) if bd <= d => acc,
                _ => Some((d, c)),
            });
        picks.push(match best {
            Some((_, c)) => Some(Pick {
                x_prime: c.x_prime.clone(),
                explainer: kind.name().to_string(),
                criteria: score(x, &c.x_prime, c.predicted, ctx, k)?,
                actionable: c.actionable,
            }),
            None => None,
        });
    }

    let ensemble = merge(per_kind);
    let cands = &ensemble.candidates;
    let pool: Vec<usize> = (0..cands.len())
        .filter(|&i| cands[i].valid && cands[i].actionable)
        .collect();
    let mut memo: Vec<Option<CriteriaVector<T>>> = vec![None; cands.len()];
    let mut scored = |i: usize| -> Result<CriteriaVector<T>, DataError> {
        if let Some(c) = memo[i] {
            return Ok(c);
        }
        let c = score(x, &cands[i].x_prime, cands[i].predicted, ctx, k)?;
        memo[i] = Some(c);
        Ok(c)
    };

    let random = if pool.is_empty() {
        None
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ fingerprint(x).rotate_left(29));
        let i = pool[rng.gen_range(0..pool.len())];
        Some(Pick {
            x_prime: cands[i].x_prime.clone(),
            explainer: cands[i].source.explainer.clone(),
            criteria: scored(i)?,
            actionable: true,
        })
    };
    picks.push(random);

    let mut selections = Vec::with_capacity(settings.metrics.len());
    for &metric in &settings.metrics {
        let sel = select_counterfactual(x, schema, desired, cands, |i, _| scored(i), metric)?;
        picks.push(sel.chosen().map(|m| Pick {
            x_prime: m.candidate.x_prime.clone(),
            explainer: m.candidate.source.explainer.clone(),
            criteria: m.criteria,
            actionable: true,
        }));
        selections.push(sel);
    }
    Ok(QueryRun {
        query_class,
        desired,
        ensemble,
        picks,
        selections,
    })
}

/// Results of every method on every evaluated instance.
#[derive(Debug, Clone)]
pub struct EvaluationRun<T: Scalar> {
    pub dataset: String,
    pub methods: Vec<Method>,
    /// Dataset row index of each instance.
    pub instances: Vec<usize>,
    /// `outcomes[method][instance]`.
    pub outcomes: Vec<Vec<Outcome<T>>>,
    /// Selections under the primary metric, one per instance.
    pub selections: Vec<SelectionResult<T>>,
    /// Per explainer, the number of instances it produced nothing for.
    pub empty_explainers: BTreeMap<String, usize>,
}

impl<T: Scalar> EvaluationRun<T> {
    pub fn method_names(&self) -> Vec<String> {
        self.methods.iter().map(Method::name).collect()
    }

    pub fn summary(&self) -> Result<Vec<SummaryRow>, EvalError> {
        self.outcomes.iter().map(|o| aggregate_stats(o)).collect()
    }

    /// Mean rank of each method over the seven measures.
    pub fn ranks(&self) -> Result<Vec<f64>, EvalError> {
        let rows = self.summary()?.iter().map(SummaryRow::measures).collect();
        rank_table(&MeasureMatrix::new(self.method_names(), rows))
    }

    /// Selection criteria of each method's covered instances.
    pub fn method_criteria(&self) -> Vec<MethodCriteria> {
        self.methods
            .iter()
            .zip(&self.outcomes)
            .map(|(m, outs)| MethodCriteria {
                method: m.name(),
                criteria: outs
                    .iter()
                    .filter_map(|o| o.criteria.map(|c| c.selection().map(T::as_f64)))
                    .collect(),
            })
            .collect()
    }

    pub fn survival(&self) -> Vec<SurvivalRow> {
        survival_table(&self.selections)
    }

    pub fn dominance_reduction(&self) -> Option<f64> {
        dominance_reduction(&self.selections)
    }
}

/// Evaluates every method on the first `settings.instances` test rows.
///
/// Instability compares each answer with the same method's answer for the
/// query's nearest training row; those answers are computed once per
/// neighbour and shared across instances. Results are independent of the
/// thread count.
pub fn evaluate<T: Scalar>(
    data: &Dataset<T>,
    model: &Model<T>,
    settings: &EvalSettings,
) -> Result<EvaluationRun<T>, DataError> {
    let primary = settings
        .metrics
        .iter()
        .position(|&m| m == settings.primary)
        .ok_or_else(|| DataError::Parameter(format!("primary metric {} is not evaluated", settings.primary)))?;
    let ctx = ExplainContext::new(data, model);
    let methods = settings.methods();
    let keys: Vec<String> = methods.iter().map(Method::name).collect();
    let instances: Vec<usize> = data.test_indices().iter().take(settings.instances).copied().collect();
    if instances.is_empty() {
        return Err(DataError::Parameter("test split is empty".into()));
    }
    let cache = InstabilityCache::new();

    let per_instance = instances
        .par_iter()
        .map(|&row| {
            let x = data.row(row);
            let run = explain_query(x, &ctx, settings)?;
            let x1 = data.row(knn(x, data, 1, true)?[0].index);
            let neighbour = cache.selected_many(&keys, x1, |x1| match explain_query(x1, &ctx, settings) {
                Ok(r) => r.picks.into_iter().map(|p| p.map(|p| p.x_prime)).collect(),
                Err(e) => {
                    log::warn!("neighbour of row {row}: {e}");
                    vec![None; keys.len()]
                }
            });
            let outcomes: Vec<Outcome<T>> = run
                .picks
                .iter()
                .zip(&neighbour)
                .map(|(pick, cf1)| Outcome {
                    criteria: pick.as_ref().map(|p| CriteriaVector {
                        instability: cf1.as_ref().map(|c| data.heom().distance(&p.x_prime, c)),
                        ..p.criteria
                    }),
                    actionable: pick.as_ref().is_some_and(|p| p.actionable),
                })
                .collect();
            Ok((run, outcomes))
        })
        .collect::<Result<Vec<_>, DataError>>()?;

    let mut outcomes = vec![Vec::with_capacity(instances.len()); methods.len()];
    let mut selections = Vec::with_capacity(instances.len());
    let mut empty_explainers = BTreeMap::new();
    for ((mut run, outs), row) in per_instance.into_iter().zip(&instances) {
        for (m, o) in outs.into_iter().enumerate() {
            if o.criteria.is_none() {
                log::info!("row {row}: {} found no counterfactual", methods[m]);
            }
            outcomes[m].push(o);
        }
        for kind in &run.ensemble.empty {
            *empty_explainers.entry(kind.name().to_string()).or_insert(0) += 1;
        }
        selections.push(run.selections.swap_remove(primary));
    }
    Ok(EvaluationRun {
        dataset: data.name().to_string(),
        methods,
        instances,
        outcomes,
        selections,
        empty_explainers,
    })
}
