use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::embed::{argmax, dot, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::providers::{embed_unique, EmbeddingProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seeds: Vec<u64>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { epochs: 500, learning_rate: 1e-2, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, seeds: vec![0, 1, 2, 3] }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, range: &str, v: String| {
            Err(Error::InvalidConfig(format!("classifier.{key} = {v}, must be {range}")))
        };
        if self.epochs == 0 {
            return bad("epochs", ">= 1", self.epochs.to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "> 0", self.learning_rate.to_string());
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", "in [0, 1)", self.beta1.to_string());
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", "in [0, 1)", self.beta2.to_string());
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", "> 0", self.epsilon.to_string());
        }
        if self.seeds.is_empty() {
            return bad("seeds", "a nonempty list", "[]".to_string());
        }
        Ok(())
    }
}

/// `logits = W x + b` with `W` stored row-major as `classes x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    classes: usize,
    dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearClassifier {
    pub fn new(classes: usize, dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if classes == 0 || dim == 0 || weight.len() != classes * dim || bias.len() != classes {
            return Err(Error::InvalidMatrix(format!("classifier must be {classes}x{dim} with {classes} biases")));
        }
        if let Some(i) = weight.iter().chain(&bias).position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { classes, dim, weight, bias })
    }

    /// Weights uniform in `(-1/sqrt(dim), 1/sqrt(dim))`, zero bias.
    pub fn init(classes: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = 1.0 / (dim as f64).sqrt();
        let weight = (0..classes * dim).map(|_| rng.gen_range(-a..a)).collect();
        Self { classes, dim, weight, bias: vec![0.0; classes] }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weight.chunks_exact(self.dim).zip(&self.bias).map(|(w, b)| dot(w, x) + b).collect()
    }

    /// Highest logit, ties to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(self.logits(x)).unwrap_or(0)
    }

    pub fn accuracy(&self, features: &EmbeddingMatrix, labels: &[usize]) -> Result<f64> {
        self.check(features, labels)?;
        let hits = features.rows().zip(labels).filter(|(x, &y)| self.predict(x) == y).count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Mean cross-entropy over the rows.
    pub fn loss(&self, features: &EmbeddingMatrix, labels: &[usize]) -> Result<f64> {
        self.check(features, labels)?;
        let total: f64 = features.rows().zip(labels).map(|(x, &y)| cross_entropy(&self.logits(x), y)).sum();
        Ok(total / labels.len() as f64)
    }

    fn check(&self, features: &EmbeddingMatrix, labels: &[usize]) -> Result<()> {
        if features.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: features.dim() });
        }
        if features.nrows() != labels.len() {
            return Err(Error::RowCountMismatch { left: features.nrows(), right: labels.len() });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= self.classes) {
            return Err(Error::Schema(format!("label {y} out of range for {} classes", self.classes)));
        }
        Ok(())
    }
}

/// `-log softmax(logits)[label]`, computed through log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierOutcome {
    pub classifier: LinearClassifier,
    /// Dev loss before training.
    pub initial_dev_loss: f64,
    /// Dev loss after each epoch; entry `e` belongs to epoch `e + 1`.
    pub dev_losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_dev_loss: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &ClassifierConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params[i] -= cfg.learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Full-batch Adam on mean softmax cross-entropy. The dev loss is measured
/// after every epoch and the epoch with the lowest one (earliest on ties) is
/// returned.
pub fn train_linear_classifier_on_features(
    train_x: &EmbeddingMatrix,
    train_y: &[usize],
    dev_x: &EmbeddingMatrix,
    dev_y: &[usize],
    classes: usize,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<ClassifierOutcome> {
    cfg.validate()?;
    if train_y.is_empty() || dev_y.is_empty() {
        return Err(Error::DegenerateInput("classifier needs nonempty train and dev sets".to_string()));
    }
    let (k, m) = (classes, train_x.dim());
    let mut clf = LinearClassifier::init(k, m, seed);
    clf.check(train_x, train_y)?;
    let initial_dev_loss = clf.loss(dev_x, dev_y)?;
    let mut adam_w = Adam::new(k * m);
    let mut adam_b = Adam::new(k);
    let mut gw = vec![0.0; k * m];
    let mut gb = vec![0.0; k];
    let n = train_y.len() as f64;
    let mut best: Option<(usize, f64, LinearClassifier)> = None;
    let mut dev_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for (x, &y) in train_x.rows().zip(train_y) {
            let z = clf.logits(x);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
            let s: f64 = e.iter().sum();
            for c in 0..k {
                let d = (e[c] / s - if c == y { 1.0 } else { 0.0 }) / n;
                gb[c] += d;
                gw[c * m..(c + 1) * m].iter_mut().zip(x).for_each(|(g, xi)| *g += d * xi);
            }
        }
        adam_w.step(&mut clf.weight, &gw, cfg);
        adam_b.step(&mut clf.bias, &gb, cfg);
        let dev = clf.loss(dev_x, dev_y)?;
        if !dev.is_finite() {
            return Err(Error::NonFinite(epoch));
        }
        dev_losses.push(dev);
        if best.as_ref().is_none_or(|(_, b, _)| dev < *b) {
            best = Some((epoch, dev, clf.clone()));
        }
    }
    let (best_epoch, best_dev_loss, classifier) = best.expect("at least one epoch");
    Ok(ClassifierOutcome { classifier, initial_dev_loss, dev_losses, best_epoch, best_dev_loss })
}

/// Embeds both splits with `provider` and trains on the features.
pub fn train_linear_classifier(
    train: &LabeledDataset,
    dev: &LabeledDataset,
    provider: &dyn EmbeddingProvider,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<ClassifierOutcome> {
    if train.label_names != dev.label_names {
        return Err(Error::Schema("train and dev label vocabularies differ".to_string()));
    }
    let train_x = embed_unique(provider, &train.texts())?;
    let dev_x = embed_unique(provider, &dev.texts())?;
    train_linear_classifier_on_features(&train_x, &train.labels(), &dev_x, &dev.labels(), train.label_names.len(), cfg, seed)
}
