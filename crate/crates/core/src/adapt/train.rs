use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adapter::Adapter;
use super::loss::{grad_slices, loss_slices, LossParams};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::miner::SentencePair;
use crate::providers::{embed_unique, EmbeddingProvider};
use crate::tsv;

/// Minimum number of positive pairs `train_adapter` accepts.
pub const MIN_TRAIN_PAIRS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub eval_every_steps: usize,
    pub dev_fraction: f64,
    pub seed: u64,
    /// Replaces `learning_rate` when set; small synthetic runs need far
    /// larger steps than full-encoder fine-tuning.
    pub lr_override: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: 3,
            learning_rate: 1e-6,
            eval_every_steps: 500,
            dev_fraction: 0.01,
            seed: 42,
            lr_override: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("eval_every_steps", self.eval_every_steps),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{key} must be at least 1")));
            }
        }
        for (key, lr) in [("learning_rate", Some(self.learning_rate)), ("lr_override", self.lr_override)] {
            if let Some(lr) = lr {
                if !(lr > 0.0 && lr.is_finite()) {
                    return Err(Error::InvalidConfig(format!("{key} = {lr} must be positive")));
                }
            }
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "dev_fraction = {} is outside the allowed range (0, 0.5)",
                self.dev_fraction
            )));
        }
        Ok(())
    }

    pub fn effective_lr(&self) -> f64 {
        self.lr_override.unwrap_or(self.learning_rate)
    }
}

/// A uniformly random permutation without fixed points: Fisher-Yates
/// shuffles are redrawn until one has none.
pub fn derangement(n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::TooFewPairs { needed: 2, found: n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

/// Pairs every source with the target of a different pair, following a
/// seeded derangement.
pub fn sample_negatives<S: Clone, T: Clone>(pairs: &[(S, T)], seed: u64) -> Result<Vec<(S, T)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perm = derangement(pairs.len(), &mut rng)?;
    Ok(pairs.iter().zip(&perm).map(|((s, _), &j)| (s.clone(), pairs[j].1.clone())).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    /// Mean example loss over the batches since the previous entry.
    pub train_loss: Option<f64>,
    pub dev_loss: f64,
    /// Marks the entry whose checkpoint was returned.
    pub is_best: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub adapter: Adapter,
    pub log: Vec<LogEntry>,
    pub best_step: usize,
    pub best_dev_loss: f64,
    pub initial_dev_loss: f64,
    pub train_pairs: usize,
    pub dev_pairs: usize,
}

/// (source row, target row, positive)
type Example = (usize, usize, bool);

fn mean_loss(adapter: &Adapter, src: &EmbeddingMatrix, tgt: &EmbeddingMatrix, examples: &[Example], p: &LossParams) -> Result<f64> {
    let mut total = 0.0;
    for &(i, j, y) in examples {
        total += loss_slices(&adapter.affine(src.row(i))?, &adapter.affine(tgt.row(j))?, y, p)?;
    }
    Ok(total / examples.len() as f64)
}

/// One gradient-descent step on the summed batch gradient. Returns the mean
/// example loss before the update.
fn step(adapter: &mut Adapter, src: &EmbeddingMatrix, tgt: &EmbeddingMatrix, batch: &[Example], lr: f64, p: &LossParams) -> Result<f64> {
    let m = adapter.dim();
    let mut gw = vec![0.0; m * m];
    let mut gb = vec![0.0; m];
    let mut loss = 0.0;
    for &(i, j, y) in batch {
        let (x1, x2) = (src.row(i), tgt.row(j));
        let (z1, z2) = (adapter.affine(x1)?, adapter.affine(x2)?);
        loss += loss_slices(&z1, &z2, y, p)?;
        // The adapter output is normalized, but the loss only sees cosines,
        // so the gradient with respect to W x + b is the raw-input gradient.
        let (g1, g2) = grad_slices(&z1, &z2, y, p)?;
        for r in 0..m {
            let row = &mut gw[r * m..(r + 1) * m];
            for c in 0..m {
                row[c] += g1[r] * x1[c] + g2[r] * x2[c];
            }
            gb[r] += g1[r] + g2[r];
        }
    }
    adapter.weight_mut().iter_mut().zip(&gw).for_each(|(w, g)| *w -= lr * g);
    adapter.bias_mut().iter_mut().zip(&gb).for_each(|(b, g)| *b -= lr * g);
    Ok(loss / batch.len() as f64)
}

/// Trains an identity-initialized adapter on row-aligned `src`/`tgt`
/// positives. The pairs are shuffled with the seed; the last
/// ⌈dev_fraction·N⌉ form the dev set, whose negatives are drawn once. Each
/// epoch draws fresh training negatives, shuffles positives and negatives
/// together and walks them in batches. Dev loss is measured before the
/// first step, every `eval_every_steps` steps and after the last step; the
/// checkpoint with the lowest dev loss (earliest on ties) is returned.
pub fn train_adapter_on_vectors(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    cfg: &TrainConfig,
    p: &LossParams,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    p.validate()?;
    if src.nrows() != tgt.nrows() {
        return Err(Error::RowCountMismatch { left: src.nrows(), right: tgt.nrows() });
    }
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch { expected: src.dim(), found: tgt.dim() });
    }
    let n = src.nrows();
    if n < MIN_TRAIN_PAIRS {
        return Err(Error::TooFewPairs { needed: MIN_TRAIN_PAIRS, found: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_dev = ((cfg.dev_fraction * n as f64).ceil() as usize).max(2);
    let (train, dev) = order.split_at(n - n_dev);

    let dev_perm = derangement(dev.len(), &mut rng)?;
    let mut dev_examples: Vec<Example> = dev.iter().map(|&i| (i, i, true)).collect();
    dev_examples.extend(dev.iter().zip(&dev_perm).map(|(&i, &k)| (i, dev[k], false)));

    let lr = cfg.effective_lr();
    let mut adapter = Adapter::identity(src.dim());
    let mut log = Vec::new();
    let initial_dev_loss = mean_loss(&adapter, src, tgt, &dev_examples, p)?;
    log.push(LogEntry { step: 0, train_loss: None, dev_loss: initial_dev_loss, is_best: false });
    let mut best = (0usize, initial_dev_loss, adapter.clone());

    let mut steps = 0;
    let mut window = (0.0, 0usize);
    let total_steps = cfg.epochs * (2 * train.len()).div_ceil(cfg.batch_size);
    for _ in 0..cfg.epochs {
        let perm = derangement(train.len(), &mut rng)?;
        let mut examples: Vec<Example> = train.iter().map(|&i| (i, i, true)).collect();
        examples.extend(train.iter().zip(&perm).map(|(&i, &k)| (i, train[k], false)));
        examples.shuffle(&mut rng);
        for batch in examples.chunks(cfg.batch_size) {
            let loss = step(&mut adapter, src, tgt, batch, lr, p)?;
            steps += 1;
            window.0 += loss;
            window.1 += 1;
            if steps % cfg.eval_every_steps == 0 || steps == total_steps {
                let dev_loss = mean_loss(&adapter, src, tgt, &dev_examples, p)?;
                log.push(LogEntry {
                    step: steps,
                    train_loss: Some(window.0 / window.1 as f64),
                    dev_loss,
                    is_best: false,
                });
                window = (0.0, 0);
                if dev_loss < best.1 {
                    best = (steps, dev_loss, adapter.clone());
                }
                log::debug!("step {steps}: dev loss {dev_loss:.6}");
            }
        }
    }
    let (best_step, best_dev_loss, adapter) = best;
    for e in &mut log {
        e.is_best = e.step == best_step;
    }
    Ok(TrainOutcome {
        adapter,
        log,
        best_step,
        best_dev_loss,
        initial_dev_loss,
        train_pairs: train.len(),
        dev_pairs: dev.len(),
    })
}

/// Embeds both sides of each `(source, target)` text pair and trains.
pub fn train_adapter_on_texts(
    pairs: &[(String, String)],
    provider: &dyn EmbeddingProvider,
    cfg: &TrainConfig,
    p: &LossParams,
) -> Result<TrainOutcome> {
    if pairs.len() < MIN_TRAIN_PAIRS {
        return Err(Error::TooFewPairs { needed: MIN_TRAIN_PAIRS, found: pairs.len() });
    }
    let src: Vec<String> = pairs.iter().map(|(s, _)| s.clone()).collect();
    let tgt: Vec<String> = pairs.iter().map(|(_, t)| t.clone()).collect();
    train_adapter_on_vectors(&embed_unique(provider, &src)?, &embed_unique(provider, &tgt)?, cfg, p)
}

/// Trains on mined positives; negatives are sampled internally.
pub fn train_adapter(
    positives: &[SentencePair],
    provider: &dyn EmbeddingProvider,
    cfg: &TrainConfig,
    p: &LossParams,
) -> Result<TrainOutcome> {
    let pairs: Vec<(String, String)> = positives.iter().map(|x| (x.src_text.clone(), x.tgt_text.clone())).collect();
    train_adapter_on_texts(&pairs, provider, cfg, p)
}

pub const TRAIN_LOG_HEADER: &str = "step,train_loss,dev_loss,is_best";

pub fn write_train_log_csv<W: Write>(out: &mut W, log: &[LogEntry], config_hash: Option<&str>) -> Result<()> {
    tsv::write_hash_header(out, config_hash)?;
    writeln!(out, "{TRAIN_LOG_HEADER}")?;
    for e in log {
        let train = e.train_loss.map(|l| format!("{l:.9}")).unwrap_or_default();
        writeln!(out, "{},{},{:.9},{}", e.step, train, e.dev_loss, e.is_best)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{MockEmbedder, MockSpec};

    #[test]
    fn two_pairs_swap() {
        let pairs = vec![("a", "A"), ("b", "B")];
        assert_eq!(sample_negatives(&pairs, 7).unwrap(), vec![("a", "B"), ("b", "A")]);
        assert!(matches!(sample_negatives(&pairs[..1], 7), Err(Error::TooFewPairs { needed: 2, found: 1 })));
    }

    #[test]
    fn large_derangement_is_reproducible() {
        let pairs: Vec<(String, String)> = (0..1000).map(|i| (format!("s{i}"), format!("t{i}"))).collect();
        let a = sample_negatives(&pairs, 99).unwrap();
        let b = sample_negatives(&pairs, 99).unwrap();
        assert_eq!(a, b);
        let mut targets: Vec<&String> = a.iter().map(|(_, t)| t).collect();
        for (i, (s, t)) in a.iter().enumerate() {
            assert_eq!(s, &pairs[i].0);
            assert_ne!(t, &pairs[i].1);
        }
        targets.sort();
        let mut expected: Vec<&String> = pairs.iter().map(|(_, t)| t).collect();
        expected.sort();
        assert_eq!(targets, expected);
    }

    #[test]
    fn identity_fixed_point_for_identical_translations() {
        let mut concepts = std::collections::HashMap::new();
        let mut pairs = Vec::new();
        for i in 0..240 {
            let (s, t) = (format!("lb {i}"), format!("en {i}"));
            concepts.insert(s.clone(), format!("k{i}"));
            concepts.insert(t.clone(), format!("k{i}"));
            pairs.push((s, t));
        }
        let provider = MockEmbedder::new(MockSpec::new(256, 0.0).with_concepts(concepts)).unwrap();
        let cfg = TrainConfig { lr_override: Some(0.1), ..TrainConfig::default() };
        let out = train_adapter_on_texts(&pairs, &provider, &cfg, &LossParams::default()).unwrap();
        assert!(out.initial_dev_loss < 1e-20);
        assert!(out.adapter.distance_from_identity() < 1e-6, "{}", out.adapter.distance_from_identity());
        let again = train_adapter_on_texts(&pairs, &provider, &cfg, &LossParams::default()).unwrap();
        assert_eq!(out.log, again.log);
    }

    #[test]
    fn too_few_pairs() {
        let pairs: Vec<(String, String)> = (0..10).map(|i| (format!("a{i}"), format!("b{i}"))).collect();
        let provider = MockEmbedder::new(MockSpec::new(8, 0.0)).unwrap();
        let err = train_adapter_on_texts(&pairs, &provider, &TrainConfig::default(), &LossParams::default()).unwrap_err();
        assert!(matches!(err, Error::TooFewPairs { needed: 200, found: 10 }));
    }

    #[test]
    fn log_csv_shape() {
        let log = vec![
            LogEntry { step: 0, train_loss: None, dev_loss: 0.25, is_best: false },
            LogEntry { step: 500, train_loss: Some(0.125), dev_loss: 0.0625, is_best: true },
        ];
        let mut buf = Vec::new();
        write_train_log_csv(&mut buf, &log, None).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "step,train_loss,dev_loss,is_best\n0,,0.250000000,false\n500,0.125000000,0.062500000,true\n"
        );
    }
}
