//! Binary classifiers with likelihood output: logistic regression and a
//! one-hidden-layer perceptron (tanh hidden units, sigmoid output), both
//! trained with mini-batch SGD on binary cross-entropy.
//!
//! The output layer starts at zero, so an untrained model answers 0.5
//! everywhere; a sigmoid tie (σ = 0.5) classifies as 1 so that predicted
//! classes compare deterministically.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{rng_from_seed, shuffled_indices};
use crate::numeric::{exp, ln, sigmoid, sqrt, tanh};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("need at least 2 rows with both classes present")]
    DegenerateLabels,
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("input dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    Logistic,
    Mlp,
}

impl ClassifierKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "logistic" => Some(ClassifierKind::Logistic),
            "mlp" => Some(ClassifierKind::Mlp),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub hidden_width: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            hidden_width: 64,
            learning_rate: 0.1,
            epochs: 200,
            batch_size: 16,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self, kind: ClassifierKind) -> Result<(), ClassifyError> {
        if kind == ClassifierKind::Mlp && self.hidden_width == 0 {
            return Err(ClassifyError::InvalidConfig("hidden_width must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(ClassifyError::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ClassifyError::InvalidConfig("learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Fully connected layer; weights are row-major `outputs × inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn uniform<R: Rng>(rng: &mut R, inputs: usize, outputs: usize) -> Self {
        let bound = 1.0 / sqrt(inputs as f64);
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.gen_range(-bound..bound)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inputs);
        debug_assert_eq!(out.len(), self.outputs);
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *slot = self.bias[o] + crate::numeric::dot(row, x);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub kind: ClassifierKind,
    pub input_dimension: usize,
    /// Present for the MLP only.
    pub hidden: Option<Dense>,
    pub output: Dense,
    pub seed: u64,
    pub config: ClassifierConfig,
}

/// A binary decision and the model's probability that it is correct
/// (always ≥ 0.5: the argmax side of the sigmoid).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: u8,
    pub likelihood: f64,
}

impl ClassifierModel {
    /// Untrained model of the given shape: hidden layer randomly initialized
    /// from the seed, output layer all zeros.
    pub fn new(kind: ClassifierKind, input_dimension: usize, config: ClassifierConfig, seed: u64) -> Result<Self, ClassifyError> {
        config.validate(kind)?;
        let mut rng = rng_from_seed(seed);
        let (hidden, output) = match kind {
            ClassifierKind::Logistic => (None, Dense::zeros(input_dimension, 1)),
            ClassifierKind::Mlp => (
                Some(Dense::uniform(&mut rng, input_dimension, config.hidden_width)),
                Dense::zeros(config.hidden_width, 1),
            ),
        };
        Ok(ClassifierModel {
            kind,
            input_dimension,
            hidden,
            output,
            seed,
            config,
        })
    }

    /// Raw sigmoid output σ ∈ (0, 1): the modelled probability of class 1.
    pub fn decision(&self, x: &[f64]) -> Result<f64, ClassifyError> {
        Ok(sigmoid(self.logit(x)?))
    }

    fn logit(&self, x: &[f64]) -> Result<f64, ClassifyError> {
        if x.len() != self.input_dimension {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.input_dimension,
                found: x.len(),
            });
        }
        let mut z = [0.0];
        match &self.hidden {
            None => self.output.forward(x, &mut z),
            Some(hidden) => {
                let mut h = vec![0.0; hidden.outputs];
                hidden.forward(x, &mut h);
                for v in h.iter_mut() {
                    *v = tanh(*v);
                }
                self.output.forward(&h, &mut z);
            }
        }
        Ok(z[0])
    }

    /// Class 1 iff σ ≥ 0.5; likelihood is max(σ, 1 − σ).
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifyError> {
        let sigma = self.decision(x)?;
        Ok(if sigma >= 0.5 {
            Prediction { class: 1, likelihood: sigma }
        } else {
            Prediction { class: 0, likelihood: 1.0 - sigma }
        })
    }

    /// Mean binary cross-entropy over a dataset.
    pub fn bce_loss(&self, x: &[Vec<f64>], y: &[u8]) -> Result<f64, ClassifyError> {
        let mut sum = 0.0;
        for (row, &label) in x.iter().zip(y) {
            let z = self.logit(row)?;
            sum += bce_from_logit(z, label as f64);
        }
        Ok(sum / x.len().max(1) as f64)
    }

    /// BCE loss for one sample and its gradients, flattened in the order
    /// hidden weights, hidden bias, output weights, output bias. Exposed for
    /// finite-difference checking.
    pub fn loss_gradients(&self, x: &[f64], y: u8) -> Result<(f64, Vec<f64>), ClassifyError> {
        let mut grads = vec![0.0; self.parameter_count()];
        let loss = self.accumulate_gradients(x, y, &mut grads)?;
        Ok((loss, grads))
    }

    pub fn parameter_count(&self) -> usize {
        let hidden = self.hidden.as_ref().map_or(0, |h| h.weights.len() + h.bias.len());
        hidden + self.output.weights.len() + self.output.bias.len()
    }

    /// Read/write access used by SGD and by the finite-difference tests.
    pub fn parameters_mut(&mut self) -> Vec<&mut f64> {
        let mut out: Vec<&mut f64> = Vec::with_capacity(self.parameter_count());
        if let Some(h) = &mut self.hidden {
            out.extend(h.weights.iter_mut());
            out.extend(h.bias.iter_mut());
        }
        out.extend(self.output.weights.iter_mut());
        out.extend(self.output.bias.iter_mut());
        out
    }

    fn accumulate_gradients(&self, x: &[f64], y: u8, grads: &mut [f64]) -> Result<f64, ClassifyError> {
        let target = y as f64;
        match &self.hidden {
            None => {
                let z = self.logit(x)?;
                let delta = sigmoid(z) - target;
                let (weight_grads, rest) = grads.split_at_mut(self.output.weights.len());
                for (g, xi) in weight_grads.iter_mut().zip(x) {
                    *g += delta * xi;
                }
                rest[0] += delta;
                Ok(bce_from_logit(z, target))
            }
            Some(hidden) => {
                if x.len() != self.input_dimension {
                    return Err(ClassifyError::DimensionMismatch {
                        expected: self.input_dimension,
                        found: x.len(),
                    });
                }
                let width = hidden.outputs;
                let mut h = vec![0.0; width];
                hidden.forward(x, &mut h);
                for v in h.iter_mut() {
                    *v = tanh(*v);
                }
                let mut z = [0.0];
                self.output.forward(&h, &mut z);
                let delta_out = sigmoid(z[0]) - target;

                let hw = hidden.weights.len();
                let hb = hidden.bias.len();
                let ow = self.output.weights.len();
                let (hidden_w, rest) = grads.split_at_mut(hw);
                let (hidden_b, rest) = rest.split_at_mut(hb);
                let (out_w, out_b) = rest.split_at_mut(ow);

                for j in 0..width {
                    out_w[j] += delta_out * h[j];
                    let delta_h = delta_out * self.output.weights[j] * (1.0 - h[j] * h[j]);
                    hidden_b[j] += delta_h;
                    for (g, xi) in hidden_w[j * hidden.inputs..(j + 1) * hidden.inputs]
                        .iter_mut()
                        .zip(x)
                    {
                        *g += delta_h * xi;
                    }
                }
                out_b[0] += delta_out;
                Ok(bce_from_logit(z[0], target))
            }
        }
    }
}

/// Numerically stable BCE from the logit:
/// `max(z, 0) − z·y + ln(1 + exp(−|z|))`.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + ln(1.0 + exp(-z.abs()))
}

/// Train a classifier by mini-batch SGD on binary cross-entropy.
/// Deterministic for a fixed seed.
pub fn train_classifier(
    x: &[Vec<f64>],
    y: &[u8],
    kind: ClassifierKind,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<ClassifierModel, ClassifyError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(ClassifyError::DegenerateLabels);
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(ClassifyError::DegenerateLabels);
    }
    if x.iter().any(|row| row.iter().any(|v| !v.is_finite())) {
        return Err(ClassifyError::NonFiniteInput);
    }
    let dim = x[0].len();
    if x.iter().any(|row| row.len() != dim) {
        return Err(ClassifyError::DimensionMismatch { expected: dim, found: 0 });
    }

    let mut model = ClassifierModel::new(kind, dim, config.clone(), seed)?;
    let mut rng = rng_from_seed(seed.wrapping_add(1));
    let mut grads = vec![0.0; model.parameter_count()];

    for _ in 0..config.epochs {
        let order = shuffled_indices(&mut rng, x.len());
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                model.accumulate_gradients(&x[i], y[i], &mut grads)?;
            }
            let scale = config.learning_rate / batch.len() as f64;
            for (param, g) in model.parameters_mut().into_iter().zip(&grads) {
                *param -= scale * g;
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable_set() -> (Vec<Vec<f64>>, Vec<u8>) {
        // 20 points on a line, margin of 2 around x = 0.
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            x.push(vec![1.0 + i as f64 * 0.3, 0.5]);
            y.push(1);
            x.push(vec![-1.0 - i as f64 * 0.3, -0.5]);
            y.push(0);
        }
        (x, y)
    }

    #[test]
    fn zero_epochs_answers_half() {
        let (x, y) = separable_set();
        let config = ClassifierConfig { epochs: 0, ..ClassifierConfig::default() };
        for kind in [ClassifierKind::Logistic, ClassifierKind::Mlp] {
            let model = train_classifier(&x, &y, kind, &config, 3).unwrap();
            for row in &x {
                let p = model.predict(row).unwrap();
                assert_eq!(p.class, 1);
                assert!((p.likelihood - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logistic_separates_toy_set() {
        let (x, y) = separable_set();
        let config = ClassifierConfig { epochs: 200, learning_rate: 0.5, ..ClassifierConfig::default() };
        let model = train_classifier(&x, &y, ClassifierKind::Logistic, &config, 3).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(row, &label)| model.predict(row).unwrap().class == label)
            .count();
        assert_eq!(correct, x.len());
    }

    #[test]
    fn mlp_separates_toy_set() {
        let (x, y) = separable_set();
        let config = ClassifierConfig {
            epochs: 300,
            learning_rate: 0.5,
            hidden_width: 8,
            ..ClassifierConfig::default()
        };
        let model = train_classifier(&x, &y, ClassifierKind::Mlp, &config, 3).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(row, &label)| model.predict(row).unwrap().class == label)
            .count();
        assert_eq!(correct, x.len());
    }

    #[test]
    fn same_seed_identical_models() {
        let (x, y) = separable_set();
        let config = ClassifierConfig { epochs: 20, hidden_width: 8, ..ClassifierConfig::default() };
        let a = train_classifier(&x, &y, ClassifierKind::Mlp, &config, 9).unwrap();
        let b = train_classifier(&x, &y, ClassifierKind::Mlp, &config, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn predict_matches_direct_sigmoid() {
        let mut model = ClassifierModel::new(
            ClassifierKind::Logistic,
            2,
            ClassifierConfig::default(),
            0,
        )
        .unwrap();
        model.output.weights = vec![10.0, 0.0];

        let p = model.predict(&[1.0, 0.0]).unwrap();
        assert_eq!(p.class, 1);
        assert!((p.likelihood - sigmoid(10.0)).abs() < 1e-12);

        let n = model.predict(&[-1.0, 0.0]).unwrap();
        assert_eq!(n.class, 0);
        assert!((n.likelihood - sigmoid(10.0)).abs() < 1e-12);
    }

    #[test]
    fn tie_classifies_as_one() {
        let model = ClassifierModel::new(
            ClassifierKind::Logistic,
            3,
            ClassifierConfig::default(),
            0,
        )
        .unwrap();
        let p = model.predict(&[4.0, -1.0, 0.2]).unwrap();
        assert_eq!(p.class, 1);
        assert_eq!(p.likelihood, 0.5);
    }

    #[test]
    fn single_class_labels_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert_eq!(
            train_classifier(&x, &[1, 1], ClassifierKind::Logistic, &ClassifierConfig::default(), 0),
            Err(ClassifyError::DegenerateLabels)
        );
    }

    #[test]
    fn nan_input_rejected() {
        let x = vec![vec![0.0], vec![f64::NAN]];
        assert_eq!(
            train_classifier(&x, &[0, 1], ClassifierKind::Logistic, &ClassifierConfig::default(), 0),
            Err(ClassifyError::NonFiniteInput)
        );
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model =
            ClassifierModel::new(ClassifierKind::Logistic, 2, ClassifierConfig::default(), 0).unwrap();
        assert_eq!(
            model.predict(&[1.0]),
            Err(ClassifyError::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn first_epoch_reduces_loss() {
        let (x, y) = separable_set();
        for kind in [ClassifierKind::Logistic, ClassifierKind::Mlp] {
            let before = train_classifier(
                &x,
                &y,
                kind,
                &ClassifierConfig { epochs: 0, hidden_width: 8, ..ClassifierConfig::default() },
                5,
            )
            .unwrap();
            let after = train_classifier(
                &x,
                &y,
                kind,
                &ClassifierConfig {
                    epochs: 1,
                    learning_rate: 0.05,
                    hidden_width: 8,
                    ..ClassifierConfig::default()
                },
                5,
            )
            .unwrap();
            let l0 = before.bce_loss(&x, &y).unwrap();
            let l1 = after.bce_loss(&x, &y).unwrap();
            assert!(l1 < l0, "{kind:?}: {l1} !< {l0}");
        }
    }

    #[test]
    fn serialization_round_trips_exactly() {
        let (x, y) = separable_set();
        let config = ClassifierConfig { epochs: 10, hidden_width: 4, ..ClassifierConfig::default() };
        let model = train_classifier(&x, &y, ClassifierKind::Mlp, &config, 17).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: ClassifierModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
    }
}
