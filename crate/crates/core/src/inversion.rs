//! Model-inversion attack harness.
//!
//! A small fully connected classifier (ReLU hidden layers, softmax output) is
//! trained by full-batch gradient descent with hand-written backpropagation.
//! The attack then ascends `log p(target | x)` with respect to the input and
//! scores the reconstruction by its cosine similarity to the centroid of
//! held-out examples of the target class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, FeatureVector};
use crate::error::{invalid, Error, Result};

/// Dense feed-forward network. `weights[l]` is row-major
/// `layer_sizes[l + 1] x layer_sizes[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Parameter gradients, shaped like the model's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: MlpModel,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub reconstruction: FeatureVector,
    pub final_confidence: f64,
    pub quality: f64,
    /// Objective value of each accepted iterate, starting with `init`.
    pub accepted_objectives: Vec<f64>,
}

struct Pass {
    /// Inputs to each layer; `acts[0]` is the network input.
    acts: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

fn log_softmax_at(logits: &[f64], t: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits[t] - lse
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(invalid(
                "layer_sizes",
                format!("{layer_sizes:?} needs at least two positive sizes"),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn n_layers(&self) -> usize {
        self.weights.len()
    }

    fn logits_pass(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut acts = vec![x.to_vec()];
        let mut z = Vec::new();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let input = &acts[l];
            z = (0..n_out)
                .map(|o| {
                    let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                    self.biases[l][o] + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>()
                })
                .collect();
            if l + 1 < self.n_layers() {
                acts.push(z.iter().map(|v| v.max(0.0)).collect());
            }
        }
        (acts, z)
    }

    fn forward(&self, x: &[f64]) -> Pass {
        let (acts, logits) = self.logits_pass(x);
        Pass {
            acts,
            probs: softmax(&logits),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward(x).probs)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict_proba(x)?;
        Ok(argmax(&p))
    }

    /// `log p(target | x)`.
    pub fn log_prob(&self, x: &[f64], target: usize) -> Result<f64> {
        self.check_input(x)?;
        self.check_class(target)?;
        Ok(log_softmax_at(&self.logits_pass(x).1, target))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                left: self.input_dim(),
                right: x.len(),
            });
        }
        Ok(())
    }

    fn check_class(&self, c: usize) -> Result<()> {
        if c >= self.classes() {
            return Err(Error::LabelOutOfRange {
                label: c,
                classes: self.classes(),
            });
        }
        Ok(())
    }

    /// Backpropagates `delta = dL/dlogits` through one forward pass,
    /// accumulating parameter gradients and returning `dL/dx`.
    fn backward(
        &self,
        pass: &Pass,
        mut delta: Vec<f64>,
        grads: Option<&mut Gradients>,
    ) -> Vec<f64> {
        let mut grads = grads;
        for l in (0..self.n_layers()).rev() {
            let n_in = self.layer_sizes[l];
            let input = &pass.acts[l];
            if let Some(g) = grads.as_deref_mut() {
                for (o, d) in delta.iter().enumerate() {
                    g.biases[l][o] += d;
                    let row = &mut g.weights[l][o * n_in..(o + 1) * n_in];
                    for (gw, a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
            }
            let mut prev = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            if l > 0 {
                // ReLU derivative, taken as 0 at the kink
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        delta
    }

    /// Mean cross-entropy over `data` and its parameter gradients.
    pub fn loss_and_gradients(&self, data: &Dataset) -> Result<(f64, Gradients)> {
        let labels = self.check_labelled(data)?;
        let mut grads = Gradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        let n = data.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in data.points().zip(labels) {
            let (acts, logits) = self.logits_pass(x);
            loss -= log_softmax_at(&logits, y);
            let probs = softmax(&logits);
            let delta: Vec<f64> = probs
                .iter()
                .enumerate()
                .map(|(c, p)| (p - if c == y { 1.0 } else { 0.0 }) / n)
                .collect();
            self.backward(&Pass { acts, probs }, delta, Some(&mut grads));
        }
        Ok((loss / n, grads))
    }

    /// Gradient of `log p(target | x)` with respect to `x`.
    pub fn input_gradient(&self, x: &[f64], target: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.check_class(target)?;
        let pass = self.forward(x);
        // d log p_t / d logits = onehot(t) - p
        let delta: Vec<f64> = pass
            .probs
            .iter()
            .enumerate()
            .map(|(c, p)| if c == target { 1.0 } else { 0.0 } - p)
            .collect();
        Ok(self.backward(&pass, delta, None))
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let labels = self.check_labelled(data)?;
        let hits = data
            .points()
            .zip(labels)
            .filter(|(x, &y)| argmax(&self.forward(x).probs) == y)
            .count();
        Ok(hits as f64 / data.len() as f64)
    }

    fn check_labelled<'a>(&self, data: &'a Dataset) -> Result<&'a [usize]> {
        let labels = data.labels().ok_or(Error::MissingLabels)?;
        if data.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                left: self.input_dim(),
                right: data.dim(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= self.classes()) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: self.classes(),
            });
        }
        Ok(labels)
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
            if p > best.1 {
                (i, p)
            } else {
                best
            }
        })
        .0
}

/// Trains by full-batch gradient descent on mean cross-entropy.
pub fn train_mlp(
    data: &Dataset,
    layer_sizes: &[usize],
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<TrainedModel> {
    if !(learning_rate > 0.0 && learning_rate.is_finite()) {
        return Err(invalid(
            "learning_rate",
            format!("{learning_rate} must be positive"),
        ));
    }
    let mut model = MlpModel::init(layer_sizes, seed)?;
    if model.classes() < 2 {
        return Err(invalid("layer_sizes", "need at least two output classes"));
    }
    model.check_labelled(data)?;
    data.require_len(1)?;

    for _ in 0..epochs {
        let (_, grads) = model.loss_and_gradients(data)?;
        for l in 0..model.n_layers() {
            for (w, g) in model.weights[l].iter_mut().zip(&grads.weights[l]) {
                *w -= learning_rate * g;
            }
            for (b, g) in model.biases[l].iter_mut().zip(&grads.biases[l]) {
                *b -= learning_rate * g;
            }
        }
    }
    let train_accuracy = model.accuracy(data)?;
    Ok(TrainedModel {
        model,
        train_accuracy,
    })
}

/// Cosine similarity between `x` and the centroid of `class_examples`.
pub fn reconstruction_quality(x: &[f64], class_examples: &Dataset) -> Result<f64> {
    class_examples.require_len(1)?;
    if x.len() != class_examples.dim() {
        return Err(Error::DimensionMismatch {
            left: class_examples.dim(),
            right: x.len(),
        });
    }
    let n = class_examples.len() as f64;
    let mut centroid = vec![0.0; x.len()];
    for p in class_examples.points() {
        for (c, v) in centroid.iter_mut().zip(p) {
            *c += v / n;
        }
    }
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (nx, nc) = (norm(x), norm(&centroid));
    if nx == 0.0 || nc == 0.0 {
        return Err(Error::Degenerate(
            "cosine similarity of a zero vector".into(),
        ));
    }
    let dot: f64 = x.iter().zip(&centroid).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * nc)).clamp(-1.0, 1.0))
}

/// Gradient ascent on `log p(target | x)` from `init` with a fixed step,
/// returning the best iterate seen.
///
/// A zero reconstruction carries no direction and is scored 0.
pub fn invert(
    model: &MlpModel,
    target_class: usize,
    steps: usize,
    step_size: f64,
    init: &FeatureVector,
    class_examples: &Dataset,
) -> Result<AttackResult> {
    model.check_input(init)?;
    model.check_class(target_class)?;
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(invalid(
            "step_size",
            format!("{step_size} must be positive"),
        ));
    }

    let mut x = init.to_vec();
    let mut best_x = x.clone();
    let mut best = model.log_prob(&x, target_class)?;
    let mut accepted = vec![best];
    for _ in 0..steps {
        let g = model.input_gradient(&x, target_class)?;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi += step_size * gi;
        }
        let obj = model.log_prob(&x, target_class)?;
        if obj > best {
            best = obj;
            best_x.clone_from(&x);
            accepted.push(obj);
        }
    }

    let quality = if best_x.iter().all(|v| *v == 0.0) {
        0.0
    } else {
        reconstruction_quality(&best_x, class_examples)?
    };
    Ok(AttackResult {
        final_confidence: best.exp(),
        reconstruction: FeatureVector::new(best_x)?,
        quality,
        accepted_objectives: accepted,
    })
}
