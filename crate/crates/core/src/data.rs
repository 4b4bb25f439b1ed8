//! Dataset ingestion: schema configs, CSV loading, train/test split and
//! training-split range statistics.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::heom::Heom;
use crate::scalar::Scalar;
use crate::schema::{FeatureKind, FeatureSchema, FeatureSpec, FeatureValue, Instance};

/// One `[[dataset.features]]` entry of a schema config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub immutable: bool,
    /// Closed category set. When present, any other token in the data file is
    /// a load error; when absent the set is taken from the data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

/// The `[dataset]` table of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    /// Data file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    pub label: String,
    /// Class order; defaults to the sorted distinct labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub features: Vec<FeatureConfig>,
}

#[derive(Deserialize)]
struct Wrapped {
    dataset: DatasetConfig,
}

impl DatasetConfig {
    /// Reads a TOML config holding either a `[dataset]` table or the dataset
    /// keys at top level.
    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|message| DataError::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        let value: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
        if value.contains_key("dataset") {
            toml::from_str::<Wrapped>(text)
                .map(|w| w.dataset)
                .map_err(|e| e.to_string())
        } else {
            toml::from_str::<DatasetConfig>(text).map_err(|e| e.to_string())
        }
    }

    /// Unfitted schema: declared categories only, no ranges.
    pub fn schema<T: Scalar>(&self) -> Result<FeatureSchema<T>, DataError> {
        let specs = self
            .features
            .iter()
            .map(|f| {
                let mut spec = match f.kind {
                    FeatureKind::Continuous => {
                        if f.categories.is_some() {
                            return Err(DataError::Schema(format!(
                                "continuous feature `{}` lists categories",
                                f.name
                            )));
                        }
                        FeatureSpec::continuous(&f.name)
                    }
                    FeatureKind::Categorical => {
                        FeatureSpec::categorical(&f.name, f.categories.clone().unwrap_or_default())
                    }
                };
                spec.immutable = f.immutable;
                Ok(spec)
            })
            .collect::<Result<Vec<_>, _>>()?;
        if specs.iter().any(|s| s.name == self.label) {
            return Err(DataError::Schema(format!(
                "label column `{}` is also listed as a feature",
                self.label
            )));
        }
        FeatureSchema::new(specs)
    }

    /// Holdout size: explicit value, else the customary size for the four
    /// reference datasets, else 20% of the rows.
    pub fn resolved_test_size(&self, rows: usize) -> usize {
        self.test_size
            .or_else(|| default_test_size(&self.name))
            .unwrap_or(rows / 5)
    }
}

pub fn default_test_size(dataset: &str) -> Option<usize> {
    match dataset.to_ascii_lowercase().as_str() {
        "adult" | "compas" | "fico" => Some(250),
        "german" => Some(100),
        _ => None,
    }
}

/// Per-continuous-feature `(min, max)` over the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RangeTable<T: Scalar> {
    entries: Vec<Option<(T, T)>>,
}

impl<T: Scalar> RangeTable<T> {
    pub fn fit(schema: &FeatureSchema<T>, rows: &[Instance<T>], train: &[usize]) -> Self {
        let entries = schema
            .features()
            .iter()
            .enumerate()
            .map(|(j, f)| {
                if !f.is_continuous() {
                    return None;
                }
                let mut it = train.iter().filter_map(|&r| rows[r].num(j));
                let first = it.next()?;
                Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
            })
            .collect();
        Self { entries }
    }

    pub fn from_entries(entries: Vec<Option<(T, T)>>) -> Self {
        Self { entries }
    }

    pub fn get(&self, feature: usize) -> Option<(T, T)> {
        self.entries[feature]
    }

    pub fn width(&self, feature: usize) -> Option<T> {
        self.entries[feature].map(|(lo, hi)| hi - lo)
    }

    /// Continuous features whose training values are all equal.
    pub fn zero_width_features(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e, Some((lo, hi)) if hi <= lo))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Rows, binary labels and a fixed train/test partition over one schema.
#[derive(Debug, Clone)]
pub struct Dataset<T: Scalar> {
    name: String,
    schema: FeatureSchema<T>,
    rows: Vec<Instance<T>>,
    labels: Vec<usize>,
    classes: Vec<String>,
    train: Vec<usize>,
    test: Vec<usize>,
    ranges: RangeTable<T>,
    heom: Heom<T>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset, fitting category sets (from all rows, unless the
    /// schema declares them) and ranges (from the training split).
    pub fn new(
        name: impl Into<String>,
        mut schema: FeatureSchema<T>,
        rows: Vec<Instance<T>>,
        labels: Vec<usize>,
        classes: Vec<String>,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self, DataError> {
        if rows.len() != labels.len() {
            return Err(DataError::Parameter(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if classes.is_empty() || classes.len() > 2 {
            return Err(DataError::NotBinary {
                found: classes.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(DataError::Parameter(format!("label index {bad} out of range")));
        }
        let mut seen = vec![false; rows.len()];
        for &i in train.iter().chain(&test) {
            if i >= rows.len() {
                return Err(DataError::Parameter(format!("split index {i} out of bounds")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(DataError::Parameter(format!("split index {i} appears twice")));
            }
        }
        let mut rows = rows;
        for (i, r) in rows.iter_mut().enumerate() {
            schema.validate(r)?;
            r.id = Some(i);
        }
        for (j, spec) in schema.features_mut().iter_mut().enumerate() {
            if spec.kind == FeatureKind::Categorical && spec.categories.is_empty() {
                let set: BTreeSet<&str> = rows.iter().filter_map(|r| r.cat(j)).collect();
                spec.categories = set.into_iter().map(str::to_string).collect();
            }
        }
        let ranges = RangeTable::fit(&schema, &rows, &train);
        for (j, spec) in schema.features_mut().iter_mut().enumerate() {
            if spec.is_continuous() {
                spec.range = ranges.get(j);
            }
        }
        let heom = Heom::new(&schema, &ranges);
        Ok(Self {
            name: name.into(),
            schema,
            rows,
            labels,
            classes,
            train,
            test,
            ranges,
            heom,
        })
    }

    /// Parses CSV text against a dataset config and splits it.
    pub fn from_csv_reader<R: Read>(
        reader: R,
        config: &DatasetConfig,
        source: &Path,
    ) -> Result<Self, DataError> {
        let schema: FeatureSchema<T> = config.schema()?;
        let csv_err = |e: csv::Error| DataError::Csv {
            path: source.to_path_buf(),
            source: e,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let mut column_of = HashMap::new();
        for (c, h) in headers.iter().enumerate() {
            if column_of.insert(h.to_string(), c).is_some() {
                return Err(DataError::Config {
                    path: source.to_path_buf(),
                    message: format!("duplicate column `{h}`"),
                });
            }
        }
        let mut feature_cols = Vec::with_capacity(schema.len());
        for f in schema.features() {
            let c = column_of.get(&f.name).ok_or_else(|| DataError::MissingColumn {
                path: source.to_path_buf(),
                column: f.name.clone(),
            })?;
            feature_cols.push(*c);
        }
        let label_col = *column_of
            .get(&config.label)
            .ok_or_else(|| DataError::MissingColumn {
                path: source.to_path_buf(),
                column: config.label.clone(),
            })?;
        if let Some(extra) = headers
            .iter()
            .find(|h| *h != config.label && schema.index_of(h).is_none())
        {
            return Err(DataError::UnexpectedColumn {
                path: source.to_path_buf(),
                column: extra.to_string(),
            });
        }

        let mut rows = Vec::new();
        let mut raw_labels = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map_or(0, |p| p.line());
            let cell = |c: usize| -> Result<&str, DataError> {
                let v = record.get(c).unwrap_or("");
                if v.is_empty() {
                    Err(DataError::EmptyCell {
                        path: source.to_path_buf(),
                        line,
                        column: headers.get(c).unwrap_or("").to_string(),
                    })
                } else {
                    Ok(v)
                }
            };
            let mut values = Vec::with_capacity(schema.len());
            for (j, spec) in schema.features().iter().enumerate() {
                let raw = cell(feature_cols[j])?;
                let v = match spec.kind {
                    FeatureKind::Continuous => {
                        let parsed = raw.parse::<f64>().ok().filter(|v| v.is_finite());
                        FeatureValue::Num(T::lit(parsed.ok_or_else(|| DataError::BadNumber {
                            path: source.to_path_buf(),
                            line,
                            feature: spec.name.clone(),
                            value: raw.to_string(),
                        })?))
                    }
                    FeatureKind::Categorical => {
                        if !spec.categories.is_empty() && spec.category_index(raw).is_none() {
                            return Err(DataError::UnknownCategory {
                                path: source.to_path_buf(),
                                line,
                                feature: spec.name.clone(),
                                value: raw.to_string(),
                            });
                        }
                        FeatureValue::Cat(raw.to_string())
                    }
                };
                values.push(v);
            }
            raw_labels.push(cell(label_col)?.to_string());
            rows.push(Instance::new(values));
        }

        let classes = match &config.classes {
            Some(c) => c.clone(),
            None => {
                let set: BTreeSet<&str> = raw_labels.iter().map(String::as_str).collect();
                set.into_iter().map(str::to_string).collect()
            }
        };
        if classes.len() > 2 {
            return Err(DataError::NotBinary {
                found: classes.len(),
            });
        }
        let labels = raw_labels
            .iter()
            .map(|l| {
                classes.iter().position(|c| c == l).ok_or_else(|| DataError::Config {
                    path: source.to_path_buf(),
                    message: format!("label `{l}` not among configured classes"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let n = rows.len();
        let test_size = config.resolved_test_size(n);
        if n == 0 || test_size >= n {
            return Err(DataError::Parameter(format!(
                "test size {test_size} leaves no training rows out of {n}"
            )));
        }
        let (train, test) = split_indices(n, test_size, config.seed);
        Self::new(config.name.clone(), schema, rows, labels, classes, train, test)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn schema(&self) -> &FeatureSchema<T> {
        &self.schema
    }

    pub fn rows(&self) -> &[Instance<T>] {
        &self.rows
    }

    pub fn row(&self, index: usize) -> &Instance<T> {
        &self.rows[index]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test
    }

    pub fn ranges(&self) -> &RangeTable<T> {
        &self.ranges
    }

    pub fn heom(&self) -> &Heom<T> {
        &self.heom
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Replaces the schema's immutability flags; distances are unaffected.
    pub fn with_immutable(mut self, names: &[&str]) -> Result<Self, DataError> {
        for name in names {
            let idx = self
                .schema
                .index_of(name)
                .ok_or_else(|| DataError::Schema(format!("unknown feature `{name}`")))?;
            self.schema.features_mut()[idx].immutable = true;
        }
        Ok(self)
    }
}

/// Seeded shuffle; the first `test_size` shuffled indices form the test split.
pub fn split_indices(n: usize, test_size: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..test_size].to_vec();
    let mut train = idx[test_size..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

/// Loads `csv_path` against the `[dataset]` table of `schema_config`.
pub fn load_dataset<T: Scalar>(csv_path: &Path, schema_config: &Path) -> Result<Dataset<T>, DataError> {
    let config = DatasetConfig::from_file(schema_config)?;
    let file = fs::File::open(csv_path).map_err(|source| DataError::Io {
        path: csv_path.to_path_buf(),
        source,
    })?;
    Dataset::from_csv_reader(file, &config, csv_path)
}
