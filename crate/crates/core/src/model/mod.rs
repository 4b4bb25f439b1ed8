//! The black-box classifier: a two-hidden-layer ReLU network with a softmax
//! output, trained in-repo and queried by explainers only through
//! [`Model::predict`], [`Model::predict_proba`] and probability gradients.

mod io;
mod train;

pub use io::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use train::{train, TrainConfig, TrainReport, Trained};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::ModelError;
use crate::scalar::Scalar;
use crate::schema::{FeatureKind, FeatureSchema, FeatureValue, Instance};

/// Allowed hidden-layer widths.
pub const HIDDEN_WIDTHS: std::ops::RangeInclusive<usize> = 16..=128;

/// How one schema feature maps onto the network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub enum FeatureEncoding<T: Scalar> {
    /// Min-max scaling: `(v - lo) * inv_width`; `inv_width` is 0 for a
    /// zero-width training range.
    Scaled { lo: T, inv_width: T },
    /// One-hot over sorted categories; unknown tokens encode as all zeros.
    OneHot { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Encoder<T: Scalar> {
    features: Vec<FeatureEncoding<T>>,
    offsets: Vec<usize>,
    dim: usize,
}

impl<T: Scalar> Encoder<T> {
    pub fn new(features: Vec<FeatureEncoding<T>>) -> Self {
        let mut offsets = Vec::with_capacity(features.len());
        let mut dim = 0;
        for f in &features {
            offsets.push(dim);
            dim += match f {
                FeatureEncoding::Scaled { .. } => 1,
                FeatureEncoding::OneHot { categories } => categories.len(),
            };
        }
        Self {
            features,
            offsets,
            dim,
        }
    }

    /// Fits scaling from the schema's training ranges and one-hot blocks from
    /// its category sets.
    pub fn from_schema(schema: &FeatureSchema<T>) -> Result<Self, ModelError> {
        let features = schema
            .features()
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Continuous => {
                    let (lo, hi) = f.range.ok_or_else(|| {
                        ModelError::Invalid(format!("feature `{}` has no fitted range", f.name))
                    })?;
                    let w = hi - lo;
                    let inv_width = if w > T::zero() { w.recip() } else { T::zero() };
                    Ok(FeatureEncoding::Scaled { lo, inv_width })
                }
                FeatureKind::Categorical => Ok(FeatureEncoding::OneHot {
                    categories: f.categories.clone(),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(features))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[FeatureEncoding<T>] {
        &self.features
    }

    /// Input offset of schema feature `j`.
    pub fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn encode(&self, x: &Instance<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.encode_into(x, &mut out);
        out
    }

    pub fn encode_into(&self, x: &Instance<T>, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.dim);
        for ((enc, &off), v) in self.features.iter().zip(&self.offsets).zip(&x.values) {
            match (enc, v) {
                (FeatureEncoding::Scaled { lo, inv_width }, FeatureValue::Num(v)) => {
                    out[off] = (*v - *lo) * *inv_width;
                }
                (FeatureEncoding::OneHot { categories }, FeatureValue::Cat(c)) => {
                    out[off..off + categories.len()].fill(T::zero());
                    if let Ok(k) = categories.binary_search_by(|s| s.as_str().cmp(c)) {
                        out[off + k] = T::one();
                    }
                }
                // kind mismatch: leave the block zeroed
                (FeatureEncoding::Scaled { .. }, _) => out[off] = T::zero(),
                (FeatureEncoding::OneHot { categories }, _) => {
                    out[off..off + categories.len()].fill(T::zero())
                }
            }
        }
    }
}

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Dense<T: Scalar> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    fn check(&self) -> Result<(), ModelError> {
        if self.weights.len() != self.inputs * self.outputs || self.bias.len() != self.outputs {
            return Err(ModelError::Invalid(format!(
                "layer {}x{} has {} weights and {} biases",
                self.outputs,
                self.inputs,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn forward(&self, input: &[T], out: &mut [T]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = row.iter().zip(input).fold(*b, |acc, (w, x)| acc + *w * *x);
        }
    }

    /// `grad_in = W^T grad_out`.
    #[inline]
    pub(crate) fn backward_input(&self, grad_out: &[T], grad_in: &mut [T]) {
        grad_in.fill(T::zero());
        for (g, row) in grad_out.iter().zip(self.weights.chunks_exact(self.inputs)) {
            if *g == T::zero() {
                continue;
            }
            for (gi, w) in grad_in.iter_mut().zip(row) {
                *gi = *gi + *g * *w;
            }
        }
    }
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Forward<T> {
    pub h1: Vec<T>,
    pub h2: Vec<T>,
    pub probs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Model<T: Scalar> {
    encoder: Encoder<T>,
    layers: [Dense<T>; 3],
    classes: Vec<String>,
    schema_hash: String,
}

impl<T: Scalar> Model<T> {
    pub fn from_parts(
        encoder: Encoder<T>,
        layers: [Dense<T>; 3],
        classes: Vec<String>,
        schema_hash: String,
    ) -> Result<Self, ModelError> {
        for l in &layers {
            l.check()?;
        }
        let [l1, l2, l3] = &layers;
        if l1.inputs != encoder.dim() || l2.inputs != l1.outputs || l3.inputs != l2.outputs {
            return Err(ModelError::Invalid("layer shapes do not chain".into()));
        }
        for w in [l1.outputs, l2.outputs] {
            if !HIDDEN_WIDTHS.contains(&w) {
                return Err(ModelError::Invalid(format!(
                    "hidden width {w} outside {HIDDEN_WIDTHS:?}"
                )));
            }
        }
        if classes.len() != 2 || l3.outputs != 2 {
            return Err(ModelError::Invalid("exactly two classes are supported".into()));
        }
        Ok(Self {
            encoder,
            layers,
            classes,
            schema_hash,
        })
    }

    pub fn encoder(&self) -> &Encoder<T> {
        &self.encoder
    }

    pub fn layers(&self) -> &[Dense<T>; 3] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense<T>; 3] {
        &mut self.layers
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_name(&self, class: usize) -> &str {
        &self.classes[class]
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn schema_hash(&self) -> &str {
        &self.schema_hash
    }

    pub fn hidden_widths(&self) -> [usize; 2] {
        [self.layers[0].outputs, self.layers[1].outputs]
    }

    /// Fails unless the model was trained on a schema with the same hash.
    pub fn check_schema(&self, data: &Dataset<T>) -> Result<(), ModelError> {
        let expected = data.schema().hash();
        if expected != self.schema_hash {
            return Err(ModelError::SchemaMismatch {
                found: self.schema_hash.clone(),
                expected,
            });
        }
        Ok(())
    }

    pub(crate) fn forward_encoded(&self, z: &[T]) -> Forward<T> {
        let [l1, l2, l3] = &self.layers;
        let mut h1 = vec![T::zero(); l1.outputs];
        l1.forward(z, &mut h1);
        relu(&mut h1);
        let mut h2 = vec![T::zero(); l2.outputs];
        l2.forward(&h1, &mut h2);
        relu(&mut h2);
        let mut logits = vec![T::zero(); l3.outputs];
        l3.forward(&h2, &mut logits);
        softmax_in_place(&mut logits);
        Forward {
            h1,
            h2,
            probs: logits,
        }
    }

    pub fn predict_proba_encoded(&self, z: &[T]) -> Vec<T> {
        self.forward_encoded(z).probs
    }

    pub fn predict_proba(&self, x: &Instance<T>) -> Vec<T> {
        self.predict_proba_encoded(&self.encoder.encode(x))
    }

    pub fn predict(&self, x: &Instance<T>) -> usize {
        argmax(&self.predict_proba(x))
    }

    pub fn predict_encoded(&self, z: &[T]) -> usize {
        argmax(&self.predict_proba_encoded(z))
    }

    /// Probability of `class` and its gradient with respect to the encoded input.
    pub fn proba_gradient_encoded(&self, z: &[T], class: usize) -> (T, Vec<T>) {
        let f = self.forward_encoded(z);
        let [l1, l2, l3] = &self.layers;
        let pc = f.probs[class];
        // d p_c / d logit_j = p_c (1[j = c] - p_j)
        let d_logits: Vec<T> = f
            .probs
            .iter()
            .enumerate()
            .map(|(j, &pj)| {
                let ind = if j == class { T::one() } else { T::zero() };
                pc * (ind - pj)
            })
            .collect();
        let mut d_h2 = vec![T::zero(); l3.inputs];
        l3.backward_input(&d_logits, &mut d_h2);
        relu_mask(&mut d_h2, &f.h2);
        let mut d_h1 = vec![T::zero(); l2.inputs];
        l2.backward_input(&d_h2, &mut d_h1);
        relu_mask(&mut d_h1, &f.h1);
        let mut d_z = vec![T::zero(); l1.inputs];
        l1.backward_input(&d_h1, &mut d_z);
        (pc, d_z)
    }

    /// Gradient of `p(class | x)` with respect to the raw values of the
    /// continuous features; entries for categorical features are zero.
    pub fn continuous_gradient(&self, x: &Instance<T>, class: usize) -> (T, Vec<T>) {
        let z = self.encoder.encode(x);
        let (p, dz) = self.proba_gradient_encoded(&z, class);
        let grad = self
            .encoder
            .features()
            .iter()
            .enumerate()
            .map(|(j, enc)| match enc {
                FeatureEncoding::Scaled { inv_width, .. } => dz[self.encoder.offset(j)] * *inv_width,
                FeatureEncoding::OneHot { .. } => T::zero(),
            })
            .collect();
        (p, grad)
    }
}

fn relu<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

fn relu_mask<T: Scalar>(grad: &mut [T], activation: &[T]) {
    for (g, a) in grad.iter_mut().zip(activation) {
        if *a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Max-shifted softmax; finite for any finite input.
pub fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        sum = sum + *x;
    }
    for x in v.iter_mut() {
        *x = *x / sum;
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
