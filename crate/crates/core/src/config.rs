//! Run configuration shared by every command.
//!
//! ```toml
//! seed = 0                    # optional; overrides every sub-seed
//! output_dir = "../out"       # relative to this file
//!
//! [dataset]                   # see DatasetConfig
//! [model]                     # path, plus [model.train] (TrainConfig)
//! [explainers]                # ExplainerConfig
//! [selection]                 # metric, neighbors
//! [evaluation]                # instances, grid, nadir
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, DatasetConfig};
use crate::error::DataError;
use crate::explainers::ExplainerConfig;
use crate::mcda::Metric;
use crate::metrics::DEFAULT_NEIGHBORS;
use crate::model::TrainConfig;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Model file; defaults to `<output_dir>/<dataset>.model`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub metric: Metric,
    /// Neighbour count for feasibility and discriminative power.
    pub neighbors: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            metric: Metric::L2,
            neighbors: DEFAULT_NEIGHBORS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Number of test rows evaluated, taken in test-split order.
    pub instances: usize,
    /// Weight grid denominator: weights step by `1 / grid`.
    pub grid: u32,
    /// Adds an ideal-nadir plane row to the method table.
    pub nadir: bool,
    /// Seed of the random-selection baseline.
    pub seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            instances: 30,
            grid: 16,
            nadir: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub explainers: ExplainerConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| DataError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if let Some(seed) = cfg.seed {
            cfg.set_seed(seed);
        }
        Ok(cfg)
    }

    /// Uses `seed` for training, explainers and the random baseline.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.model.train.seed = seed;
        self.explainers.seed = seed;
        self.evaluation.seed = seed;
    }

    /// Points the output directory at `dir`, taken as given (not relative to
    /// the config file).
    pub fn set_output_dir(&mut self, dir: &Path) {
        self.output_dir = std::path::absolute(dir).unwrap_or_else(|_| dir.to_path_buf());
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn csv_path(&self) -> Option<PathBuf> {
        self.dataset.csv.as_deref().map(|p| self.resolve(p))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn model_path(&self) -> PathBuf {
        match &self.model.path {
            Some(p) => self.resolve(p),
            None => self.output_dir().join(format!("{}.model", self.dataset.name)),
        }
    }

    /// Checks every section before any expensive work. With `need_data`, the
    /// data file must exist.
    pub fn validate(&self, need_data: bool) -> Result<(), String> {
        if need_data {
            match self.csv_path() {
                None => return Err("dataset.csv is not set".into()),
                Some(p) if !p.is_file() => return Err(format!("data file {} does not exist", p.display())),
                Some(_) => {}
            }
        }
        self.dataset.schema::<f64>().map_err(|e| e.to_string())?;
        if let Some(classes) = &self.dataset.classes {
            if classes.len() != 2 {
                return Err(format!("dataset.classes must list 2 classes, found {}", classes.len()));
            }
        }
        self.model.train.validate().map_err(|e| e.to_string())?;
        self.explainers.validate()?;
        if self.selection.neighbors == 0 {
            return Err("selection.neighbors must be >= 1".into());
        }
        if self.evaluation.instances == 0 {
            return Err("evaluation.instances must be >= 1".into());
        }
        if self.evaluation.grid == 0 {
            return Err("evaluation.grid must be >= 1".into());
        }
        Ok(())
    }

    pub fn load_data<T: Scalar>(&self) -> Result<Dataset<T>, DataError> {
        let path = self.csv_path().ok_or_else(|| DataError::Config {
            path: self.base_dir.clone(),
            message: "dataset.csv is not set".into(),
        })?;
        let file = fs::File::open(&path).map_err(|source| DataError::Io {
            path: path.clone(),
            source,
        })?;
        Dataset::from_csv_reader(file, &self.dataset, &path)
    }

    /// Hex SHA-256 of the configuration as serialised JSON. Paths are hashed
    /// as written, so moving the config file does not change it.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("serialisable");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
        seed = 9
        [dataset]
        name = "toy"
        csv = "toy.csv"
        label = "y"
        [[dataset.features]]
        name = "a"
        kind = "continuous"
        [selection]
        metric = "linf"
        [explainers.nun]
        k = 3
    "#;

    fn parse(text: &str) -> RunConfig {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, text).unwrap();
        RunConfig::from_file(&p).unwrap()
    }

    #[test]
    fn seed_propagates_and_defaults_fill() {
        let c = parse(TEXT);
        assert_eq!(c.model.train.seed, 9);
        assert_eq!(c.explainers.seed, 9);
        assert_eq!(c.selection.metric, Metric::Linf);
        assert_eq!(c.selection.neighbors, 5);
        assert_eq!(c.explainers.nun.k, 3);
        assert_eq!(c.evaluation.grid, 16);
        assert!(c.model_path().ends_with("out/toy.model"));
        assert!(c.validate(true).unwrap_err().contains("does not exist"));
        assert!(c.validate(false).is_ok());
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse(TEXT);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.set_seed(10);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, format!("{TEXT}\n[evaluation]\nbogus = 1\n")).unwrap();
        assert!(matches!(RunConfig::from_file(&p), Err(DataError::Config { .. })));
    }
}
