//! JSON-lines candidate dumps.
//!
//! The first line describes the query, every further line one candidate:
//!
//! ```text
//! {"query": {"age": 24.0, "race": "White", ...}, "predicted": ">50K"}
//! {"explainer": "nun", "restart": 0, "values": {...}, "predicted": "<=50K",
//!  "criteria": {"proximity": 0.5, "feasibility": 0.2, "dpow": 0.8}}
//! ```
//!
//! Feature values are keyed by name. `criteria` is optional; when present a
//! replay uses it instead of recomputing scores, so a dump can be replayed
//! without the data and model that produced it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{DataError, EvalError};
use crate::explainers::{desired_class, Candidate, ExplainerKind, Provenance};
use crate::metrics::CriteriaVector;
use crate::scalar::Scalar;
use crate::schema::{FeatureSchema, FeatureValue, Instance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query: IndexMap<String, Value>,
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CandidateRecord<T: Scalar> {
    pub explainer: String,
    pub restart: u32,
    pub values: IndexMap<String, Value>,
    pub predicted: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criteria: Option<CriteriaVector<T>>,
}

/// A parsed dump.
#[derive(Debug, Clone)]
pub struct CandidateDump<T: Scalar> {
    pub query: Instance<T>,
    pub query_class: usize,
    pub desired: usize,
    /// Annotated against `schema` and `desired`.
    pub candidates: Vec<Candidate<T>>,
    pub criteria: Vec<Option<CriteriaVector<T>>>,
}

/// Feature values keyed by name, in schema order.
pub fn instance_to_map<T: Scalar>(schema: &FeatureSchema<T>, x: &Instance<T>) -> IndexMap<String, Value> {
    schema
        .features()
        .iter()
        .zip(&x.values)
        .map(|(f, v)| {
            let v = match v {
                FeatureValue::Num(n) => serde_json::Number::from_f64(n.as_f64())
                    .map(Value::Number)
                    .unwrap_or(Value::Null),
                FeatureValue::Cat(c) => Value::String(c.clone()),
            };
            (f.name.clone(), v)
        })
        .collect()
}

/// Builds an instance from name-keyed values. Every schema feature must be
/// present and no other key is allowed.
pub fn instance_from_map<T: Scalar>(
    schema: &FeatureSchema<T>,
    map: &IndexMap<String, Value>,
) -> Result<Instance<T>, DataError> {
    if let Some(extra) = map.keys().find(|k| schema.index_of(k).is_none()) {
        return Err(DataError::Instance(format!("unknown feature `{extra}`")));
    }
    let values = schema
        .features()
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let raw = map
                .get(&f.name)
                .ok_or_else(|| DataError::Instance(format!("missing feature `{}`", f.name)))?;
            let text = match raw {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                other => {
                    return Err(DataError::Instance(format!(
                        "feature `{}`: unsupported value {other}",
                        f.name
                    )))
                }
            };
            schema.parse_value(j, &text)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let x = Instance::new(values);
    schema.validate(&x)?;
    Ok(x)
}

fn class_of(classes: &[String], name: &str) -> Result<usize, DataError> {
    classes
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| DataError::Instance(format!("unknown class `{name}` (expected one of {classes:?})")))
}

/// Writes a dump. `criteria`, when given, must align with `candidates`.
pub fn write_candidates<T: Scalar>(
    path: &Path,
    schema: &FeatureSchema<T>,
    classes: &[String],
    query: &Instance<T>,
    query_class: usize,
    candidates: &[Candidate<T>],
    criteria: Option<&[Option<CriteriaVector<T>>]>,
) -> Result<(), EvalError> {
    let io = |source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let head = QueryRecord {
        query: instance_to_map(schema, query),
        predicted: classes[query_class].clone(),
    };
    let line = serde_json::to_string(&head).expect("serialisable");
    writeln!(w, "{line}").map_err(io)?;
    for (i, c) in candidates.iter().enumerate() {
        let rec = CandidateRecord {
            explainer: c.source.explainer.clone(),
            restart: c.source.restart,
            values: instance_to_map(schema, &c.x_prime),
            predicted: classes[c.predicted].clone(),
            criteria: criteria.and_then(|cr| cr[i]),
        };
        let line = serde_json::to_string(&rec).expect("serialisable");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a dump and annotates validity (against the class opposite to the
/// query's) and actionability (against `schema`).
pub fn read_candidates<T: Scalar>(
    path: &Path,
    schema: &FeatureSchema<T>,
    classes: &[String],
) -> Result<CandidateDump<T>, EvalError> {
    let file = File::open(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse = |line_no: usize, message: String| EvalError::Parse {
        path: path.to_path_buf(),
        message: format!("line {line_no}: {message}"),
    };
    let mut lines = BufReader::new(file).lines().enumerate().filter(|(_, l)| {
        l.as_ref().map_or(true, |l| !l.trim().is_empty())
    });
    let (_, head) = lines
        .next()
        .ok_or_else(|| parse(1, "empty file".into()))?;
    let head = head.map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let head: QueryRecord = serde_json::from_str(&head).map_err(|e| parse(1, e.to_string()))?;
    let query = instance_from_map(schema, &head.query).map_err(|e| parse(1, e.to_string()))?;
    let query_class = class_of(classes, &head.predicted).map_err(|e| parse(1, e.to_string()))?;
    let desired = desired_class(query_class);

    let mut candidates = Vec::new();
    let mut criteria = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let rec: CandidateRecord<T> = serde_json::from_str(&line).map_err(|e| parse(i + 1, e.to_string()))?;
        let x_prime = instance_from_map(schema, &rec.values).map_err(|e| parse(i + 1, e.to_string()))?;
        let predicted = class_of(classes, &rec.predicted).map_err(|e| parse(i + 1, e.to_string()))?;
        let position = ExplainerKind::from_name(&rec.explainer).map_or(u32::MAX, |k| k as u32);
        candidates.push(Candidate {
            actionable: schema.is_actionable(&query, &x_prime),
            x_prime,
            source: Provenance {
                position,
                explainer: rec.explainer,
                restart: rec.restart,
            },
            predicted,
            valid: predicted == desired,
        });
        criteria.push(rec.criteria);
    }
    Ok(CandidateDump {
        query,
        query_class,
        desired,
        candidates,
        criteria,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSpec;

    fn schema() -> FeatureSchema<f64> {
        FeatureSchema::new(vec![
            FeatureSpec::continuous("age"),
            FeatureSpec::categorical("race", ["p", "q"]).immutable(),
        ])
        .unwrap()
    }

    #[test]
    fn map_rejects_unknown_and_missing() {
        let s = schema();
        let mut m = IndexMap::new();
        m.insert("age".to_string(), Value::from(30.0));
        assert!(instance_from_map(&s, &m).is_err());
        m.insert("race".to_string(), Value::from("q"));
        let x = instance_from_map(&s, &m).unwrap();
        assert_eq!(x.num(0), Some(30.0));
        m.insert("height".to_string(), Value::from(1.8));
        assert!(instance_from_map(&s, &m).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let s = schema();
        let classes = vec!["neg".to_string(), "pos".to_string()];
        let q = Instance::new(vec![FeatureValue::Num(30.0), FeatureValue::Cat("p".into())]);
        let cands = vec![
            Candidate {
                x_prime: Instance::new(vec![FeatureValue::Num(31.5), FeatureValue::Cat("p".into())]),
                source: Provenance::new(ExplainerKind::Nun, 0),
                predicted: 1,
                valid: true,
                actionable: true,
            },
            Candidate {
                x_prime: Instance::new(vec![FeatureValue::Num(30.0), FeatureValue::Cat("q".into())]),
                source: Provenance::new(ExplainerKind::CadexLite, 3),
                predicted: 0,
                valid: false,
                actionable: false,
            },
        ];
        let crit = vec![Some(CriteriaVector::new(0.1, 0.2, 0.3)), None];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_candidates(&path, &s, &classes, &q, 0, &cands, Some(&crit)).unwrap();
        let back = read_candidates(&path, &s, &classes).unwrap();
        assert_eq!(back.candidates, cands);
        assert_eq!(back.criteria, crit);
        assert_eq!(back.desired, 1);
    }
}
