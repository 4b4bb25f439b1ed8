use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, relu, softmax_in_place, Dense, Encoder, Model, HIDDEN_WIDTHS};
use crate::data::Dataset;
use crate::error::ModelError;
use crate::scalar::Scalar;

/// Mini-batch gradient descent settings for the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: [usize; 2],
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Dropout probability after each hidden layer, training only.
    pub dropout: f64,
    pub seed: u64,
    /// Share of the training split held out for validation accuracy.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: [64, 32],
            learning_rate: 0.05,
            epochs: 150,
            batch_size: 32,
            dropout: 0.1,
            seed: 0,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        for w in self.hidden {
            if !HIDDEN_WIDTHS.contains(&w) {
                return Err(ModelError::Config(format!(
                    "hidden width {w} outside {HIDDEN_WIDTHS:?}"
                )));
            }
        }
        if self.epochs == 0 {
            return Err(ModelError::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config("dropout must be in [0, 1)".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::Config("learning_rate must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(ModelError::Config("validation_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_accuracy: f64,
    /// `None` when no rows were held out.
    pub validation_accuracy: Option<f64>,
    pub final_loss: f64,
    pub train_rows: usize,
    pub validation_rows: usize,
}

#[derive(Debug, Clone)]
pub struct Trained<T: Scalar> {
    pub model: Model<T>,
    pub report: TrainReport,
}

impl<T: Scalar> Model<T> {
    /// Untrained network with He-uniform weights and zero biases, drawn from
    /// `cfg.seed`.
    pub fn init(data: &Dataset<T>, cfg: &TrainConfig) -> Result<Self, ModelError> {
        cfg.validate()?;
        let encoder = Encoder::from_schema(data.schema())?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let dims = [encoder.dim(), cfg.hidden[0], cfg.hidden[1], 2];
        let mut make = |i: usize| {
            let (inputs, outputs) = (dims[i], dims[i + 1]);
            let bound = (6.0 / inputs.max(1) as f64).sqrt();
            let mut layer = Dense::zeros(inputs, outputs);
            for w in &mut layer.weights {
                *w = T::lit(rng.gen_range(-bound..bound));
            }
            layer
        };
        let layers = [make(0), make(1), make(2)];
        let classes = if data.classes().len() == 2 {
            data.classes().to_vec()
        } else {
            return Err(ModelError::Invalid(format!(
                "binary classification only; dataset has {} classes",
                data.classes().len()
            )));
        };
        Model::from_parts(encoder, layers, classes, data.schema().hash())
    }
}

struct Grads<T> {
    layers: [(Vec<T>, Vec<T>); 3],
}

impl<T: Scalar> Grads<T> {
    fn zeros(model: &Model<T>) -> Self {
        let g = |l: &Dense<T>| (vec![T::zero(); l.weights.len()], vec![T::zero(); l.bias.len()]);
        let [a, b, c] = model.layers();
        Self {
            layers: [g(a), g(b), g(c)],
        }
    }

    fn clear(&mut self) {
        for (w, b) in &mut self.layers {
            w.fill(T::zero());
            b.fill(T::zero());
        }
    }
}

fn accumulate<T: Scalar>(layer: &Dense<T>, input: &[T], delta: &[T], grad: &mut (Vec<T>, Vec<T>)) {
    for (o, d) in delta.iter().enumerate() {
        if *d == T::zero() {
            continue;
        }
        grad.1[o] = grad.1[o] + *d;
        let row = &mut grad.0[o * layer.inputs..(o + 1) * layer.inputs];
        for (g, x) in row.iter_mut().zip(input) {
            *g = *g + *d * *x;
        }
    }
}

fn dropout_mask<T: Scalar>(rng: &mut ChaCha8Rng, p: f64, out: &mut [T]) {
    let keep = T::lit(1.0 / (1.0 - p));
    for m in out {
        *m = if p > 0.0 && rng.gen::<f64>() < p { T::zero() } else { keep };
    }
}

/// Trains a network on the dataset's training split. Deterministic for a
/// fixed `cfg.seed`.
pub fn train<T: Scalar>(data: &Dataset<T>, cfg: &TrainConfig) -> Result<Trained<T>, ModelError> {
    cfg.validate()?;
    if data.train_indices().is_empty() {
        return Err(ModelError::EmptyTrainSplit);
    }
    let mut model = Model::init(data, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9E37_79B9_7F4A_7C15));

    let mut order = data.train_indices().to_vec();
    order.shuffle(&mut rng);
    let n_val = ((order.len() as f64) * cfg.validation_fraction).floor() as usize;
    let n_val = n_val.min(order.len() - 1);
    let (val_rows, fit_rows) = order.split_at(n_val);
    let mut fit_rows = fit_rows.to_vec();
    let val_rows = val_rows.to_vec();

    let encoded: Vec<Vec<T>> = data.rows().iter().map(|r| model.encoder().encode(r)).collect();
    let labels = data.labels();
    let lr = T::lit(cfg.learning_rate);

    let [w1, w2] = cfg.hidden;
    let mut h1 = vec![T::zero(); w1];
    let mut h2 = vec![T::zero(); w2];
    let mut m1 = vec![T::one(); w1];
    let mut m2 = vec![T::one(); w2];
    let mut out = vec![T::zero(); 2];
    let mut d_out = vec![T::zero(); 2];
    let mut d_h2 = vec![T::zero(); w2];
    let mut d_h1 = vec![T::zero(); w1];
    let mut grads = Grads::zeros(&model);
    let mut last_finite = 0.0;

    for epoch in 0..cfg.epochs {
        fit_rows.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in fit_rows.chunks(cfg.batch_size).enumerate() {
            grads.clear();
            let mut batch_loss = T::zero();
            for &r in batch {
                let z = &encoded[r];
                let y = labels[r];
                let [l1, l2, l3] = model.layers();
                dropout_mask(&mut rng, cfg.dropout, &mut m1);
                dropout_mask(&mut rng, cfg.dropout, &mut m2);
                l1.forward(z, &mut h1);
                relu(&mut h1);
                h1.iter_mut().zip(&m1).for_each(|(h, m)| *h = *h * *m);
                l2.forward(&h1, &mut h2);
                relu(&mut h2);
                h2.iter_mut().zip(&m2).for_each(|(h, m)| *h = *h * *m);
                l3.forward(&h2, &mut out);
                softmax_in_place(&mut out);
                batch_loss = batch_loss - out[y].max(T::min_positive_value()).ln();

                for (j, d) in d_out.iter_mut().enumerate() {
                    *d = out[j] - if j == y { T::one() } else { T::zero() };
                }
                accumulate(l3, &h2, &d_out, &mut grads.layers[2]);
                l3.backward_input(&d_out, &mut d_h2);
                for ((d, h), m) in d_h2.iter_mut().zip(&h2).zip(&m2) {
                    *d = if *h > T::zero() { *d * *m } else { T::zero() };
                }
                accumulate(l2, &h1, &d_h2, &mut grads.layers[1]);
                l2.backward_input(&d_h2, &mut d_h1);
                for ((d, h), m) in d_h1.iter_mut().zip(&h1).zip(&m1) {
                    *d = if *h > T::zero() { *d * *m } else { T::zero() };
                }
                accumulate(l1, z, &d_h1, &mut grads.layers[0]);
            }
            let loss = batch_loss.as_f64() / batch.len() as f64;
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                    last_finite,
                });
            }
            last_finite = loss;
            epoch_loss += loss * batch.len() as f64;
            let step = lr / T::from_usize_lossy(batch.len());
            for (layer, (gw, gb)) in model.layers_mut().iter_mut().zip(&grads.layers) {
                for (w, g) in layer.weights.iter_mut().zip(gw) {
                    *w = *w - step * *g;
                }
                for (b, g) in layer.bias.iter_mut().zip(gb) {
                    *b = *b - step * *g;
                }
            }
        }
        log::trace!("epoch {epoch}: loss {:.5}", epoch_loss / fit_rows.len() as f64);
        last_finite = epoch_loss / fit_rows.len() as f64;
    }

    let accuracy = |rows: &[usize]| -> Option<f64> {
        if rows.is_empty() {
            return None;
        }
        let hits = rows
            .iter()
            .filter(|&&r| argmax(&model.predict_proba_encoded(&encoded[r])) == labels[r])
            .count();
        Some(hits as f64 / rows.len() as f64)
    };
    let report = TrainReport {
        train_accuracy: accuracy(&fit_rows).unwrap_or(0.0),
        validation_accuracy: accuracy(&val_rows),
        final_loss: last_finite,
        train_rows: fit_rows.len(),
        validation_rows: val_rows.len(),
    };
    Ok(Trained { model, report })
}
