//! CSV and JSON files written by an evaluation.
//!
//! CSV files may start with `#` comment lines recording how the numbers were
//! produced; readers skip them.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_rational::Ratio;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::harness::EvaluationRun;
use super::sweep::{MethodCriteria, SweepResult, SweepRow, WeightTriple};
use super::tables::SurvivalRow;
use crate::error::EvalError;
use crate::scalar::Scalar;

/// One line of `metrics_<dataset>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub prox: Option<f64>,
    pub feas: Option<f64>,
    pub dpow: Option<f64>,
    pub spars: Option<f64>,
    pub instab: Option<f64>,
    pub cover: f64,
    pub act: f64,
    pub rank: f64,
}

impl MetricsRow {
    pub fn from_run<T: Scalar>(run: &EvaluationRun<T>) -> Result<Vec<Self>, EvalError> {
        let summary = run.summary()?;
        let ranks = run.ranks()?;
        Ok(run
            .method_names()
            .into_iter()
            .zip(summary)
            .zip(ranks)
            .map(|((method, s), rank)| MetricsRow {
                method,
                prox: s.proximity,
                feas: s.feasibility,
                dpow: s.dpow,
                spars: s.sparsity,
                instab: s.instability,
                cover: s.cover,
                act: s.act,
                rank,
            })
            .collect())
    }
}

/// One line of `outcomes_<dataset>.csv`: a method's answer for one
/// instance. Criteria are empty when nothing was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub method: String,
    pub row: usize,
    pub covered: bool,
    pub actionable: bool,
    pub prox: Option<f64>,
    pub feas: Option<f64>,
    pub dpow: Option<f64>,
    pub spars: Option<usize>,
    pub instab: Option<f64>,
}

impl OutcomeRow {
    pub fn from_run<T: Scalar>(run: &EvaluationRun<T>) -> Vec<Self> {
        let mut out = Vec::new();
        for (m, outs) in run.methods.iter().zip(&run.outcomes) {
            for (o, &row) in outs.iter().zip(&run.instances) {
                let c = o.criteria.as_ref();
                out.push(OutcomeRow {
                    method: m.name(),
                    row,
                    covered: c.is_some(),
                    actionable: o.actionable,
                    prox: c.map(|c| c.proximity.as_f64()),
                    feas: c.map(|c| c.feasibility.as_f64()),
                    dpow: c.map(|c| c.dpow.as_f64()),
                    spars: c.and_then(|c| c.sparsity),
                    instab: c.and_then(|c| c.instability.map(T::as_f64)),
                });
            }
        }
        out
    }

    /// Groups covered rows by method, methods in first-appearance order.
    pub fn method_criteria(rows: &[OutcomeRow]) -> Vec<MethodCriteria> {
        let mut out: Vec<MethodCriteria> = Vec::new();
        for r in rows {
            let pos = match out.iter().position(|m| m.method == r.method) {
                Some(p) => p,
                None => {
                    out.push(MethodCriteria {
                        method: r.method.clone(),
                        criteria: Vec::new(),
                    });
                    out.len() - 1
                }
            };
            if let (Some(p), Some(f), Some(d)) = (r.prox, r.feas, r.dpow) {
                out[pos].criteria.push([p, f, d]);
            }
        }
        out
    }
}

/// Serialised form of a [`SweepRow`]; weights are written as fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SweepLine {
    w_p: String,
    w_d: String,
    w_f: String,
    winner: String,
    utility: f64,
}

/// Provenance of an evaluation's output files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    pub seeds: BTreeMap<String, u64>,
    pub neighbors: usize,
    pub metric: String,
    pub methods: Vec<String>,
    pub normalization: String,
    pub grid: u32,
    pub instances: usize,
    pub config_hash: String,
    pub model_hash: String,
    pub dominance_reduction: Option<f64>,
    pub empty_explainers: BTreeMap<String, usize>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> EvalError + '_ {
    move |e| EvalError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_csv<R: Serialize>(path: &Path, comments: &[String], rows: &[R]) -> Result<(), EvalError> {
    let mut file = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for c in comments {
        writeln!(file, "# {c}").map_err(io_err(path))?;
    }
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_csv<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>, EvalError> {
    let file = File::open(path).map_err(io_err(path))?;
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file)
        .deserialize()
        .collect::<Result<Vec<R>, _>>()
        .map_err(csv_err(path))
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow], neighbors: usize, instances: usize) -> Result<(), EvalError> {
    let comments = [
        format!("instances = {instances}"),
        format!("feasibility and dpow use k = {neighbors} nearest training rows"),
        "selection normalisation: min-max per query over valid and actionable candidates".to_string(),
        "prox, feas, spars, instab: lower is better; dpow, cover, act: higher is better".to_string(),
        "rank: mean fractional rank over the seven measures, 1 = best".to_string(),
    ];
    write_csv(path, &comments, rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, EvalError> {
    read_csv(path)
}

pub fn write_survival(path: &Path, rows: &[SurvivalRow]) -> Result<(), EvalError> {
    let comments = ["mean candidates per instance after each step; ideal = share of instances selected".to_string()];
    write_csv(path, &comments, rows)
}

pub fn read_survival(path: &Path) -> Result<Vec<SurvivalRow>, EvalError> {
    read_csv(path)
}

pub fn write_outcomes(path: &Path, rows: &[OutcomeRow]) -> Result<(), EvalError> {
    write_csv(path, &[], rows)
}

pub fn read_outcomes(path: &Path) -> Result<Vec<OutcomeRow>, EvalError> {
    read_csv(path)
}

pub fn write_sweep(path: &Path, result: &SweepResult) -> Result<(), EvalError> {
    let b = &result.bounds;
    let comments = [
        "utility = w_p (1 - prox') + w_d dpow' + w_f (1 - feas'), larger is better".to_string(),
        format!(
            "min-max bounds over all selected counterfactuals: prox [{}, {}], feas [{}, {}], dpow [{}, {}]",
            b.proximity.0, b.proximity.1, b.feasibility.0, b.feasibility.1, b.dpow.0, b.dpow.1
        ),
    ];
    let lines: Vec<SweepLine> = result
        .rows
        .iter()
        .map(|r| SweepLine {
            w_p: r.weights.w_p.to_string(),
            w_d: r.weights.w_d.to_string(),
            w_f: r.weights.w_f.to_string(),
            winner: r.winner.clone(),
            utility: r.utility,
        })
        .collect();
    write_csv(path, &comments, &lines)
}

/// Reads the rows of a sweep file; the bounds live only in its comments.
pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>, EvalError> {
    let parse = |s: &str| {
        s.parse::<Ratio<u32>>().map_err(|e| EvalError::Parse {
            path: path.to_path_buf(),
            message: format!("weight `{s}`: {e}"),
        })
    };
    read_csv::<SweepLine>(path)?
        .into_iter()
        .map(|l| {
            Ok(SweepRow {
                weights: WeightTriple::new(parse(&l.w_p)?, parse(&l.w_d)?, parse(&l.w_f)?)?,
                winner: l.winner,
                utility: l.utility,
            })
        })
        .collect()
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), EvalError> {
    let json = serde_json::to_string_pretty(manifest).expect("serialisable");
    std::fs::write(path, json + "\n").map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::sweep::sweep;

    #[test]
    fn metrics_file_skips_comments_and_keeps_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let rows = vec![MetricsRow {
            method: "wachter_lite".into(),
            prox: None,
            feas: Some(1.5),
            dpow: Some(0.25),
            spars: None,
            instab: None,
            cover: 0.0,
            act: 0.0,
            rank: 3.5,
        }];
        write_metrics(&p, &rows, 5, 10).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# instances = 10"));
        assert_eq!(read_metrics(&p).unwrap(), rows);
    }

    #[test]
    fn sweep_file_keeps_exact_weights() {
        let m = vec![
            MethodCriteria { method: "a".into(), criteria: vec![[1.0, 2.0, 0.5]] },
            MethodCriteria { method: "b".into(), criteria: vec![[2.0, 1.0, 0.7]] },
        ];
        let s = sweep(&m, Ratio::new(1, 16)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_sweep(&p, &s).unwrap();
        let back = read_sweep(&p).unwrap();
        assert_eq!(back.len(), 153);
        assert_eq!(back.iter().map(|r| r.weights).collect::<Vec<_>>(), s.rows.iter().map(|r| r.weights).collect::<Vec<_>>());
    }

    #[test]
    fn outcome_rows_group_by_method() {
        let row = |method: &str, prox: Option<f64>| OutcomeRow {
            method: method.into(),
            row: 0,
            covered: prox.is_some(),
            actionable: true,
            prox,
            feas: prox,
            dpow: prox,
            spars: None,
            instab: None,
        };
        let g = OutcomeRow::method_criteria(&[row("b", Some(1.0)), row("a", None), row("b", Some(2.0))]);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].method, "b");
        assert_eq!(g[0].criteria.len(), 2);
        assert!(g[1].criteria.is_empty());
    }
}
