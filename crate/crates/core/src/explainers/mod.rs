//! Ensemble of base explainers.
//!
//! Five lightweight explainers from different paradigms: instance-based
//! ([`nun`]), random search ([`growing_spheres`]), gradient descent
//! ([`wachter_lite`]), greedy saliency-driven modification ([`cadex_lite`])
//! and diversity-penalised gradient restarts ([`diverse_restarts`]). None of
//! them filters for validity or actionability; that is the selection
//! pipeline's job.

mod cadex;
mod gradient;
mod nun;
mod space;
mod spheres;

pub use cadex::cadex_lite;
pub use gradient::{diverse_restarts, wachter_lite};
pub use nun::nun;
pub use space::{Point, SearchSpace};
pub use spheres::{growing_spheres, growing_spheres_restart, SpheresRun};

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::model::Model;
use crate::scalar::Scalar;
use crate::schema::{FeatureValue, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerKind {
    Nun,
    GrowingSpheres,
    WachterLite,
    CadexLite,
    DiverseRestarts,
}

impl ExplainerKind {
    /// Provenance order.
    pub const ALL: [ExplainerKind; 5] = [
        ExplainerKind::Nun,
        ExplainerKind::GrowingSpheres,
        ExplainerKind::WachterLite,
        ExplainerKind::CadexLite,
        ExplainerKind::DiverseRestarts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExplainerKind::Nun => "nun",
            ExplainerKind::GrowingSpheres => "growing_spheres",
            ExplainerKind::WachterLite => "wachter_lite",
            ExplainerKind::CadexLite => "cadex_lite",
            ExplainerKind::DiverseRestarts => "diverse_restarts",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a candidate came from. Ordered by explainer position in the
/// ensemble, then restart index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub position: u32,
    pub explainer: String,
    pub restart: u32,
}

impl Provenance {
    pub fn new(kind: ExplainerKind, restart: usize) -> Self {
        Self {
            position: kind as u32,
            explainer: kind.name().to_string(),
            restart: restart as u32,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.explainer, self.restart)
    }
}

/// A counterfactual proposal together with its model prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Candidate<T: Scalar> {
    pub x_prime: Instance<T>,
    pub source: Provenance,
    pub predicted: usize,
    /// `predicted` equals the desired class.
    pub valid: bool,
    /// No immutable feature differs from the query.
    pub actionable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NunConfig {
    pub enabled: bool,
    pub k: usize,
    /// Only consider training rows that agree with the query on immutable features.
    pub restrict_to_actionable: bool,
}

impl Default for NunConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            k: 10,
            restrict_to_actionable: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowingSpheresConfig {
    pub enabled: bool,
    pub restarts: usize,
    /// Samples drawn per layer.
    pub samples_per_layer: usize,
    /// Total samples per restart.
    pub budget: usize,
    /// Initial radius in range-scaled units.
    pub first_radius: f64,
    /// Width of each expansion layer.
    pub layer_width: f64,
    /// Reset changed features back to the query while the class holds.
    pub sparsify: bool,
    pub respect_immutable: bool,
}

impl Default for GrowingSpheresConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            restarts: 20,
            samples_per_layer: 100,
            budget: 2000,
            first_radius: 1.0,
            layer_width: 0.2,
            sparsify: true,
            respect_immutable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WachterConfig {
    pub enabled: bool,
    /// Weight of the `(p_target - 1)^2` term.
    pub lambda: f64,
    pub max_steps: usize,
    /// Step size in range-scaled units.
    pub step_size: f64,
    /// Final point plus up to `k - 1` valid points sampled from the trajectory.
    pub k: usize,
    /// Steps between greedy categorical passes.
    pub flip_every: usize,
    pub respect_immutable: bool,
}

impl Default for WachterConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            lambda: 10.0,
            max_steps: 500,
            step_size: 0.05,
            k: 10,
            flip_every: 50,
            respect_immutable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CadexConfig {
    pub enabled: bool,
    /// Caps on the number of changed features; one candidate per cap.
    pub caps: Vec<usize>,
    pub max_steps: usize,
    pub step_size: f64,
    /// Central-difference half-width in range-scaled units.
    pub fd_step: f64,
    pub respect_immutable: bool,
}

impl Default for CadexConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            caps: (1..=14).collect(),
            max_steps: 200,
            step_size: 0.05,
            fd_step: 1e-3,
            respect_immutable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiverseConfig {
    pub enabled: bool,
    pub restarts: usize,
    /// Weight of the `sum 1 / (1 + d(x', previous))` penalty.
    pub diversity_weight: f64,
    /// Standard deviation of the random start around the query, range-scaled.
    pub init_noise: f64,
    /// Probability of flipping each mutable categorical at the start.
    pub flip_probability: f64,
    pub respect_immutable: bool,
}

impl Default for DiverseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            restarts: 20,
            diversity_weight: 0.5,
            init_noise: 0.15,
            flip_probability: 0.1,
            respect_immutable: true,
        }
    }
}

/// Per-explainer multiplicities, budgets and step sizes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerConfig {
    pub seed: u64,
    pub nun: NunConfig,
    pub growing_spheres: GrowingSpheresConfig,
    /// Also supplies lambda, step budget and step size to `diverse_restarts`.
    pub wachter: WachterConfig,
    pub cadex: CadexConfig,
    pub diverse: DiverseConfig,
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |v: usize, what: &str| {
            if v == 0 {
                Err(format!("{what} must be >= 1"))
            } else {
                Ok(())
            }
        };
        positive(self.nun.k, "nun.k")?;
        positive(self.growing_spheres.restarts, "growing_spheres.restarts")?;
        positive(self.growing_spheres.samples_per_layer, "growing_spheres.samples_per_layer")?;
        positive(self.growing_spheres.budget, "growing_spheres.budget")?;
        positive(self.wachter.k, "wachter.k")?;
        positive(self.wachter.max_steps, "wachter.max_steps")?;
        positive(self.wachter.flip_every, "wachter.flip_every")?;
        positive(self.cadex.max_steps, "cadex.max_steps")?;
        positive(self.diverse.restarts, "diverse.restarts")?;
        if self.cadex.caps.is_empty() || self.cadex.caps.contains(&0) {
            return Err("cadex.caps must be non-empty and >= 1".into());
        }
        let finite_pos = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{what} must be finite and > 0"))
            }
        };
        finite_pos(self.growing_spheres.first_radius, "growing_spheres.first_radius")?;
        finite_pos(self.growing_spheres.layer_width, "growing_spheres.layer_width")?;
        finite_pos(self.wachter.step_size, "wachter.step_size")?;
        finite_pos(self.cadex.step_size, "cadex.step_size")?;
        finite_pos(self.cadex.fd_step, "cadex.fd_step")?;
        if !(self.wachter.lambda.is_finite() && self.wachter.lambda >= 0.0) {
            return Err("wachter.lambda must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.diverse.flip_probability) {
            return Err("diverse.flip_probability must be in [0, 1]".into());
        }
        Ok(())
    }

    pub fn enabled(&self, kind: ExplainerKind) -> bool {
        match kind {
            ExplainerKind::Nun => self.nun.enabled,
            ExplainerKind::GrowingSpheres => self.growing_spheres.enabled,
            ExplainerKind::WachterLite => self.wachter.enabled,
            ExplainerKind::CadexLite => self.cadex.enabled,
            ExplainerKind::DiverseRestarts => self.diverse.enabled,
        }
    }

    /// Disables every explainer except `kind`.
    pub fn only(mut self, kind: ExplainerKind) -> Self {
        self.nun.enabled = kind == ExplainerKind::Nun;
        self.growing_spheres.enabled = kind == ExplainerKind::GrowingSpheres;
        self.wachter.enabled = kind == ExplainerKind::WachterLite;
        self.cadex.enabled = kind == ExplainerKind::CadexLite;
        self.diverse.enabled = kind == ExplainerKind::DiverseRestarts;
        self
    }

    /// Upper bound on the number of candidates one query can produce.
    pub fn max_candidates(&self) -> usize {
        let mut n = 0;
        if self.nun.enabled {
            n += self.nun.k;
        }
        if self.growing_spheres.enabled {
            n += self.growing_spheres.restarts;
        }
        if self.wachter.enabled {
            n += self.wachter.k;
        }
        if self.cadex.enabled {
            n += self.cadex.caps.len();
        }
        if self.diverse.enabled {
            n += self.diverse.restarts;
        }
        n
    }
}

/// Data and model shared by every explainer, plus cached model predictions
/// for all dataset rows.
#[derive(Debug)]
pub struct ExplainContext<'a, T: Scalar> {
    pub data: &'a Dataset<T>,
    pub model: &'a Model<T>,
    row_predictions: Vec<usize>,
}

impl<'a, T: Scalar> ExplainContext<'a, T> {
    pub fn new(data: &'a Dataset<T>, model: &'a Model<T>) -> Self {
        let row_predictions = data.rows().iter().map(|r| model.predict(r)).collect();
        Self {
            data,
            model,
            row_predictions,
        }
    }

    /// Model prediction for dataset row `index`.
    pub fn row_prediction(&self, index: usize) -> usize {
        self.row_predictions[index]
    }

    pub fn row_predictions(&self) -> &[usize] {
        &self.row_predictions
    }
}

/// The class a counterfactual should reach: the other class of a binary task.
pub fn desired_class(query_class: usize) -> usize {
    1 - query_class.min(1)
}

/// A raw proposal before annotation.
#[derive(Debug, Clone)]
pub struct Proposal<T: Scalar> {
    pub x_prime: Instance<T>,
    pub restart: usize,
}

/// Stable 64-bit fingerprint of an instance's values.
pub fn fingerprint<T: Scalar>(x: &Instance<T>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    for v in &x.values {
        match v {
            FeatureValue::Num(n) => eat(&n.as_f64().to_bits().to_le_bytes()),
            FeatureValue::Cat(c) => {
                eat(c.as_bytes());
                eat(&[0xff]);
            }
        }
    }
    h
}

/// Private random stream for one (explainer, restart, query) triple.
pub(crate) fn stream(seed: u64, kind: ExplainerKind, restart: usize, query: u64) -> ChaCha8Rng {
    let mut z = seed
        ^ (kind as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (restart as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ query.rotate_left(17);
    // splitmix64 finaliser
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Runs one explainer and annotates its proposals.
pub fn generate<T: Scalar>(
    kind: ExplainerKind,
    x: &Instance<T>,
    ctx: &ExplainContext<'_, T>,
    cfg: &ExplainerConfig,
) -> Vec<Candidate<T>> {
    let query_class = ctx.model.predict(x);
    let desired = desired_class(query_class);
    let proposals = match kind {
        ExplainerKind::Nun => nun(x, ctx, query_class, &cfg.nun),
        ExplainerKind::GrowingSpheres => growing_spheres(x, ctx, desired, &cfg.growing_spheres, cfg.seed),
        ExplainerKind::WachterLite => wachter_lite(x, ctx, desired, &cfg.wachter, cfg.seed),
        ExplainerKind::CadexLite => cadex_lite(x, ctx, desired, &cfg.cadex),
        ExplainerKind::DiverseRestarts => {
            diverse_restarts(x, ctx, desired, &cfg.diverse, &cfg.wachter, cfg.seed)
        }
    };
    if proposals.is_empty() {
        log::debug!("{kind}: no candidates for query {:?}", x.id);
    }
    proposals
        .into_iter()
        .map(|p| annotate(p.x_prime, Provenance::new(kind, p.restart), x, desired, ctx))
        .collect()
}

/// Predicts and flags one proposal.
pub fn annotate<T: Scalar>(
    mut x_prime: Instance<T>,
    source: Provenance,
    query: &Instance<T>,
    desired: usize,
    ctx: &ExplainContext<'_, T>,
) -> Candidate<T> {
    x_prime.id = None;
    let predicted = ctx.model.predict(&x_prime);
    let actionable = ctx.data.schema().is_actionable(query, &x_prime);
    Candidate {
        x_prime,
        source,
        predicted,
        valid: predicted == desired,
        actionable,
    }
}

/// Output of [`run_ensemble`].
#[derive(Debug, Clone)]
pub struct EnsembleOutput<T: Scalar> {
    pub candidates: Vec<Candidate<T>>,
    /// Enabled explainers that produced nothing for this query.
    pub empty: Vec<ExplainerKind>,
    /// Exact duplicates removed (later provenance dropped).
    pub duplicates_removed: usize,
}

/// Runs every enabled explainer in provenance order and removes exact
/// duplicates, keeping the first occurrence.
pub fn run_ensemble<T: Scalar>(
    x: &Instance<T>,
    ctx: &ExplainContext<'_, T>,
    cfg: &ExplainerConfig,
) -> EnsembleOutput<T> {
    merge(
        ExplainerKind::ALL
            .into_iter()
            .filter(|&k| cfg.enabled(k))
            .map(|k| (k, generate(k, x, ctx, cfg)))
            .collect(),
    )
}

/// Concatenates per-explainer outputs in the given order and removes exact
/// duplicates, keeping the first occurrence.
pub fn merge<T: Scalar>(outputs: Vec<(ExplainerKind, Vec<Candidate<T>>)>) -> EnsembleOutput<T> {
    let total = outputs.iter().map(|(_, c)| c.len()).sum();
    let mut candidates: Vec<Candidate<T>> = Vec::with_capacity(total);
    let mut empty = Vec::new();
    let mut duplicates_removed = 0;
    for (kind, produced) in outputs {
        if produced.is_empty() {
            log::info!("explainer {kind} produced no candidates");
            empty.push(kind);
        }
        for c in produced {
            if candidates.iter().any(|k| k.x_prime.same_values(&c.x_prime)) {
                duplicates_removed += 1;
            } else {
                candidates.push(c);
            }
        }
    }
    EnsembleOutput {
        candidates,
        empty,
        duplicates_removed,
    }
}
