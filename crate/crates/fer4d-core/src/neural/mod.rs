//! From-scratch trainable classifiers with exact analytic gradients: a small
//! convolutional network for dynamic images and a bidirectional LSTM for
//! landmark feature sequences.
//!
//! Everything runs in double precision. Training is plain mini-batch
//! gradient descent with weight decay on the weight tensors; gradients are
//! validated against central finite differences by [`grad_check`].

mod bilstm;
mod convnet;
mod model_io;
mod tensor;

pub use bilstm::{bilstm_forward, BiLstmConfig, BiLstmModel, SeqRows};
pub use convnet::{convnet_forward, ConvNetConfig, ConvNetModel};
pub use model_io::{load_model, save_model, Model};
pub use tensor::Tensor;

use crate::mesh::CLASS_COUNT;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training data has no example of class {0}")]
    EmptyClass(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model file error: {0}")]
    BadModelFile(String),
}

/// Gradient-descent hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 8,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(NeuralError::InvalidConfig("learning rate negative".into()));
        }
        if self.epochs == 0 {
            return Err(NeuralError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NeuralError::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(NeuralError::InvalidConfig("weight decay negative".into()));
        }
        Ok(())
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Mean cross-entropy per epoch over the training set.
    pub loss_history: Vec<f64>,
    /// Validation accuracy per epoch (empty when no validation set given).
    pub val_accuracy: Vec<f64>,
    /// Epoch whose weights were kept (best validation accuracy, or the last
    /// epoch when no validation set was given).
    pub kept_epoch: usize,
}

/// Probability vector over the six classes.
pub type Probs = [f64; CLASS_COUNT];

/// The shared surface of both trainable models: flat parameter access, a
/// cross-entropy loss with its exact gradient, and class probabilities.
///
/// `loss` and `predict` run in evaluation mode (no dropout); training-time
/// stochastic state is passed explicitly by the training loop.
pub trait DifferentiableClassifier {
    type Input;

    fn param_count(&self) -> usize;
    fn param(&self, index: usize) -> f64;
    fn set_param(&mut self, index: usize, value: f64);
    /// All parameters flattened in canonical order.
    fn params_vec(&self) -> Vec<f64>;
    fn set_params_vec(&mut self, values: &[f64]);
    /// One gradient-descent step: `w -= lr * (g + wd * w)`, with the decay
    /// term applied to weight tensors only (never biases).
    fn apply_update(&mut self, grad: &[f64], learning_rate: f64, weight_decay: f64);

    fn predict(&self, input: &Self::Input) -> Result<Probs, NeuralError>;
    fn loss(&self, input: &Self::Input, label: usize) -> Result<f64, NeuralError>;
    /// Flat analytic gradient of `loss` (evaluation mode).
    fn loss_grad(&self, input: &Self::Input, label: usize) -> Result<Vec<f64>, NeuralError>;
}

pub(crate) fn softmax(logits: &[f64; CLASS_COUNT]) -> Probs {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; CLASS_COUNT];
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    out
}

pub(crate) fn cross_entropy(probs: &Probs, label: usize) -> f64 {
    -(probs[label].max(1e-300)).ln()
}

pub(crate) fn argmax(probs: &Probs) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_classes_present<I>(data: &[(I, usize)]) -> Result<(), NeuralError> {
    let mut seen = [false; CLASS_COUNT];
    for &(_, label) in data {
        if label >= CLASS_COUNT {
            return Err(NeuralError::ShapeMismatch(format!(
                "label {label} outside 0..{CLASS_COUNT}"
            )));
        }
        seen[label] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(NeuralError::EmptyClass(missing));
    }
    Ok(())
}

/// Maximum relative error between analytic and central finite-difference
/// gradients over a random subset of at least `sample_size` parameters (all
/// parameters when the model is smaller). Runs in evaluation mode.
pub fn grad_check<M: DifferentiableClassifier>(
    model: &mut M,
    input: &M::Input,
    label: usize,
    epsilon: f64,
    sample_size: usize,
    seed: u64,
) -> Result<f64, NeuralError> {
    let analytic = model.loss_grad(input, label)?;
    let n = model.param_count();
    let indices: Vec<usize> = if n <= sample_size {
        (0..n).collect()
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        all.shuffle(&mut rng);
        all.truncate(sample_size);
        all
    };
    let mut worst = 0.0f64;
    for &i in &indices {
        let orig = model.param(i);
        model.set_param(i, orig + epsilon);
        let plus = model.loss(input, label)?;
        model.set_param(i, orig - epsilon);
        let minus = model.loss(input, label)?;
        model.set_param(i, orig);
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Shared mini-batch gradient-descent loop.
///
/// Batches are taken in data order when one batch covers the whole set;
/// otherwise the order is reshuffled every epoch from the seeded generator.
/// `step_state` is drawn once per update step (the BiLSTM uses it for its
/// dropout mask) and applied to every sample in the batch.
pub(crate) fn gradient_descent<M, S>(
    model: &mut M,
    data: &[(M::Input, usize)],
    val: &[(M::Input, usize)],
    cfg: &TrainConfig,
    mut draw_step_state: impl FnMut(&mut ChaCha8Rng) -> S,
    mut batch_grad: impl FnMut(&M, &[(&M::Input, usize)], &S) -> Result<(Vec<f64>, f64), NeuralError>,
) -> Result<TrainOutcome, NeuralError>
where
    M: DifferentiableClassifier,
{
    cfg.validate()?;
    check_classes_present(data)?;
    let n = data.len();
    let full_batch = cfg.batch_size >= n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut val_accuracy = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        if !full_batch {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        let mut cursor = 0usize;
        while cursor < n {
            let end = (cursor + cfg.batch_size).min(n);
            let batch: Vec<(&M::Input, usize)> = order[cursor..end]
                .iter()
                .map(|&i| (&data[i].0, data[i].1))
                .collect();
            let state = draw_step_state(&mut rng);
            let (grad, batch_loss) = batch_grad(model, &batch, &state)?;
            epoch_loss += batch_loss * batch.len() as f64;
            seen += batch.len();
            if cfg.learning_rate > 0.0 {
                model.apply_update(&grad, cfg.learning_rate, cfg.weight_decay);
            }
            cursor = end;
        }
        loss_history.push(epoch_loss / seen as f64);

        if !val.is_empty() {
            let mut correct = 0usize;
            for (input, label) in val {
                if argmax(&model.predict(input)?) == *label {
                    correct += 1;
                }
            }
            let acc = correct as f64 / val.len() as f64;
            val_accuracy.push(acc);
            let improved = best.as_ref().map_or(true, |(b, _, _)| acc > *b);
            if improved {
                best = Some((acc, epoch, model.params_vec()));
            }
        }
    }

    let kept_epoch = if let Some((_, epoch, weights)) = best {
        model.set_params_vec(&weights);
        epoch
    } else {
        cfg.epochs - 1
    };
    Ok(TrainOutcome {
        loss_history,
        val_accuracy,
        kept_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[1.0, -2.0, 0.5, 3.0, 0.0, -1.0]);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_logits_give_uniform() {
        let p = softmax(&[0.0; 6]);
        for v in p {
            assert!((v - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_class_is_reported() {
        let data: Vec<((), usize)> = vec![((), 0), ((), 1), ((), 2), ((), 3), ((), 4)];
        assert_eq!(
            check_classes_present(&data).unwrap_err(),
            NeuralError::EmptyClass(5)
        );
    }
}
