//! Method comparison: per-instance runs, summary tables, weight sweeps and
//! the report files they are written to.

mod harness;
mod reports;
mod sweep;
mod tables;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::explainers::ExplainerKind;
use crate::mcda::Metric;

pub use harness::{evaluate, explain_query, EvalSettings, EvaluationRun, Pick, QueryRun};
pub use reports::{
    read_metrics, read_outcomes, read_survival, read_sweep, write_manifest, write_metrics, write_outcomes,
    write_survival, write_sweep, Manifest, MetricsRow, OutcomeRow,
};
pub use sweep::{barycentric_grid, sweep, utility, MethodCriteria, SweepResult, SweepRow, UtilityBounds, WeightTriple};
pub use tables::{
    dominance_reduction, fractional_ranks, rank_table, survival_table, MeasureMatrix, SurvivalRow, MEASURES,
    MEASURE_DIRECTIONS,
};

/// A row of the method table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// The closest valid candidate of a single explainer.
    Explainer(ExplainerKind),
    /// A uniformly drawn valid and actionable ensemble candidate.
    Random,
    /// The full selection pipeline under a metric.
    Ideal(Metric),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Explainer(k) => k.name().to_string(),
            Method::Random => "random_selection".to_string(),
            Method::Ideal(m) => format!("ideal_{}", m.name()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "random_selection" {
            return Ok(Method::Random);
        }
        if let Some(k) = ExplainerKind::from_name(s) {
            return Ok(Method::Explainer(k));
        }
        s.strip_prefix("ideal_")
            .and_then(|m| m.parse().ok())
            .map(Method::Ideal)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        let mut all: Vec<Method> = ExplainerKind::ALL.into_iter().map(Method::Explainer).collect();
        all.push(Method::Random);
        all.extend([Metric::L1, Metric::L2, Metric::Linf, Metric::NadirPlane].map(Method::Ideal));
        for m in all {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("ideal_l3".parse::<Method>().is_err());
    }
}
