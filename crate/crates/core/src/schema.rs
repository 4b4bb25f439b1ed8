//! Feature schema, feature values and instances.
//!
//! The schema is the actionability contract: it fixes feature order and kind
//! and marks which features a counterfactual may not touch.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DataError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureSpec<T: Scalar> {
    pub name: String,
    pub kind: FeatureKind,
    /// Observed (or declared) categories, sorted; empty for continuous features.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Training-split `(min, max)`; `None` for categorical features or before fitting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(T, T)>,
    #[serde(default)]
    pub immutable: bool,
}

impl<T: Scalar> FeatureSpec<T> {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Continuous,
            categories: Vec::new(),
            range: None,
            immutable: false,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        let mut categories: Vec<String> = categories.into_iter().map(Into::into).collect();
        categories.sort();
        categories.dedup();
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
            categories,
            range: None,
            immutable: false,
        }
    }

    pub fn with_range(mut self, min: T, max: T) -> Self {
        self.range = Some((min, max));
        self
    }

    pub fn immutable(mut self) -> Self {
        self.immutable = true;
        self
    }

    pub fn is_continuous(&self) -> bool {
        self.kind == FeatureKind::Continuous
    }

    pub fn category_index(&self, token: &str) -> Option<usize> {
        self.categories.binary_search_by(|c| c.as_str().cmp(token)).ok()
    }
}

/// Ordered list of features shared by every instance of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureSchema<T: Scalar> {
    features: Vec<FeatureSpec<T>>,
}

impl<T: Scalar> FeatureSchema<T> {
    pub fn new(features: Vec<FeatureSpec<T>>) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(DataError::Schema("empty feature name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(DataError::Schema(format!("duplicate feature `{}`", f.name)));
            }
            match f.kind {
                FeatureKind::Continuous => {
                    if !f.categories.is_empty() {
                        return Err(DataError::Schema(format!(
                            "continuous feature `{}` lists categories",
                            f.name
                        )));
                    }
                    if let Some((lo, hi)) = f.range {
                        if !(hi >= lo) {
                            return Err(DataError::Schema(format!(
                                "feature `{}` has range max < min",
                                f.name
                            )));
                        }
                    }
                }
                FeatureKind::Categorical => {
                    if f.range.is_some() {
                        return Err(DataError::Schema(format!(
                            "categorical feature `{}` has a numeric range",
                            f.name
                        )));
                    }
                }
            }
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &[FeatureSpec<T>] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureSpec<T> {
        &self.features[index]
    }

    pub(crate) fn features_mut(&mut self) -> &mut [FeatureSpec<T>] {
        &mut self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn immutable_indices(&self) -> Vec<usize> {
        self.indices_where(|f| f.immutable)
    }

    pub fn continuous_indices(&self) -> Vec<usize> {
        self.indices_where(|f| f.is_continuous())
    }

    pub fn categorical_indices(&self) -> Vec<usize> {
        self.indices_where(|f| !f.is_continuous())
    }

    pub fn count_kind(&self, kind: FeatureKind) -> usize {
        self.features.iter().filter(|f| f.kind == kind).count()
    }

    fn indices_where(&self, pred: impl Fn(&FeatureSpec<T>) -> bool) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| pred(f))
            .map(|(i, _)| i)
            .collect()
    }

    /// Every continuous feature has a range and every categorical feature at
    /// least one category.
    pub fn is_fitted(&self) -> bool {
        self.features.iter().all(|f| match f.kind {
            FeatureKind::Continuous => f.range.is_some(),
            FeatureKind::Categorical => !f.categories.is_empty(),
        })
    }

    /// Checks arity and per-feature kind. Unknown categories are accepted:
    /// generated candidates may leave the observed category set.
    pub fn validate(&self, instance: &Instance<T>) -> Result<(), DataError> {
        if instance.values.len() != self.features.len() {
            return Err(DataError::Instance(format!(
                "expected {} values, got {}",
                self.features.len(),
                instance.values.len()
            )));
        }
        for (f, v) in self.features.iter().zip(&instance.values) {
            match (f.kind, v) {
                (FeatureKind::Continuous, FeatureValue::Num(x)) if x.is_finite() => {}
                (FeatureKind::Categorical, FeatureValue::Cat(_)) => {}
                _ => {
                    return Err(DataError::Instance(format!(
                        "value {v} does not conform to {:?} feature `{}`",
                        f.kind, f.name
                    )))
                }
            }
        }
        Ok(())
    }

    /// True iff `candidate` keeps every immutable feature of `query`.
    pub fn is_actionable(&self, query: &Instance<T>, candidate: &Instance<T>) -> bool {
        self.features
            .iter()
            .zip(query.values.iter().zip(&candidate.values))
            .all(|(f, (a, b))| !f.immutable || a == b)
    }

    /// Hex SHA-256 of feature names, kinds and category sets. Ranges and
    /// immutability flags are excluded: they do not change the model input.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.features {
            h.update(f.name.as_bytes());
            h.update([0u8, f.kind as u8]);
            for c in &f.categories {
                h.update(c.as_bytes());
                h.update([1u8]);
            }
            h.update([2u8]);
        }
        hex::encode(h.finalize())
    }

    /// Parses `name=value` pairs (comma separated) into an instance. Every
    /// feature must be given exactly once.
    pub fn parse_assignments(&self, text: &str) -> Result<Instance<T>, DataError> {
        let mut slots: Vec<Option<FeatureValue<T>>> = vec![None; self.features.len()];
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| DataError::Instance(format!("expected name=value, got `{part}`")))?;
            let (name, value) = (name.trim(), value.trim());
            let idx = self
                .index_of(name)
                .ok_or_else(|| DataError::Instance(format!("unknown feature `{name}`")))?;
            if slots[idx].is_some() {
                return Err(DataError::Instance(format!("feature `{name}` given twice")));
            }
            slots[idx] = Some(self.parse_value(idx, value)?);
        }
        let values = slots
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    DataError::Instance(format!("missing value for `{}`", self.features[i].name))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Instance::new(values))
    }

    pub fn parse_value(&self, index: usize, raw: &str) -> Result<FeatureValue<T>, DataError> {
        let f = &self.features[index];
        match f.kind {
            FeatureKind::Continuous => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| FeatureValue::Num(T::lit(v)))
                .ok_or_else(|| {
                    DataError::Instance(format!("cannot parse `{raw}` for feature `{}`", f.name))
                }),
            FeatureKind::Categorical => Ok(FeatureValue::Cat(raw.to_string())),
        }
    }
}

/// One feature value: a real for continuous features, a category token otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, bound = "")]
pub enum FeatureValue<T: Scalar> {
    Num(T),
    Cat(String),
}

impl<T: Scalar> FeatureValue<T> {
    pub fn as_num(&self) -> Option<T> {
        match self {
            FeatureValue::Num(v) => Some(*v),
            FeatureValue::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            FeatureValue::Cat(c) => Some(c),
            FeatureValue::Num(_) => None,
        }
    }
}

impl<T: Scalar> fmt::Display for FeatureValue<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Num(v) => write!(f, "{v}"),
            FeatureValue::Cat(c) => f.write_str(c),
        }
    }
}

/// One tabular example; `id` is the row index when the instance comes from a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Instance<T: Scalar> {
    pub values: Vec<FeatureValue<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
}

impl<T: Scalar> Instance<T> {
    pub fn new(values: Vec<FeatureValue<T>>) -> Self {
        Self { values, id: None }
    }

    pub fn with_id(mut self, id: usize) -> Self {
        self.id = Some(id);
        self
    }

    pub fn num(&self, index: usize) -> Option<T> {
        self.values[index].as_num()
    }

    pub fn cat(&self, index: usize) -> Option<&str> {
        self.values[index].as_cat()
    }

    /// Value equality ignoring `id`.
    pub fn same_values(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> FeatureSchema<f64> {
        FeatureSchema::new(vec![
            FeatureSpec::continuous("age").with_range(17.0, 90.0),
            FeatureSpec::categorical("race", ["White", "Black"]).immutable(),
        ])
        .unwrap()
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = FeatureSchema::<f64>::new(vec![
            FeatureSpec::continuous("a"),
            FeatureSpec::continuous("a"),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn inverted_range_rejected() {
        assert!(
            FeatureSchema::<f64>::new(vec![FeatureSpec::continuous("a").with_range(2.0, 1.0)])
                .is_err()
        );
    }

    #[test]
    fn parse_assignments_round_trip() {
        let s = schema();
        let x = s.parse_assignments("race=White, age=24").unwrap();
        assert_eq!(x.num(0), Some(24.0));
        assert_eq!(x.cat(1), Some("White"));
        assert!(s.validate(&x).is_ok());
        assert!(s.parse_assignments("age=24").is_err());
        assert!(s.parse_assignments("age=abc,race=White").is_err());
        assert!(s.parse_assignments("age=1,race=White,age=2").is_err());
    }

    #[test]
    fn actionability_checks_only_immutable_features() {
        let s = schema();
        let x = s.parse_assignments("age=24,race=White").unwrap();
        let older = s.parse_assignments("age=40,race=White").unwrap();
        let other_race = s.parse_assignments("age=24,race=Black").unwrap();
        assert!(s.is_actionable(&x, &older));
        assert!(!s.is_actionable(&x, &other_race));
    }

    #[test]
    fn validate_rejects_kind_mismatch() {
        let s = schema();
        let bad = Instance::new(vec![FeatureValue::Cat("x".into()), FeatureValue::Cat("White".into())]);
        assert!(s.validate(&bad).is_err());
        let short = Instance::new(vec![FeatureValue::Num(1.0)]);
        assert!(s.validate(&short).is_err());
    }

    #[test]
    fn hash_ignores_immutability() {
        let a = schema();
        let b = FeatureSchema::<f64>::new(vec![
            FeatureSpec::continuous("age"),
            FeatureSpec::categorical("race", ["White", "Black"]),
        ])
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = FeatureSchema::<f64>::new(vec![
            FeatureSpec::continuous("age"),
            FeatureSpec::categorical("race", ["White"]),
        ])
        .unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
