//! Mini-batch training loop and evaluation metrics.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::model::{argmax, Model};
use crate::optim::{AdamW, AdamWConfig};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    /// Seed for the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 32, optimizer: AdamWConfig::default(), seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    /// Accuracy on the monitor split, when one is given.
    pub monitor_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Set when training stopped on a non-finite loss.
    pub aborted: Option<String>,
}

/// Train in place. Eigenvalues are never touched. A non-finite loss stops
/// training and is reported in the returned history.
pub fn train<T: Real>(
    model: &mut Model<T>,
    train_set: &Dataset,
    monitor: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<History> {
    if train_set.is_empty() {
        return Err(Error::Empty("training split is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be positive".into()));
    }
    let mut opt = AdamW::<T>::new(config.optimizer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History::default();
    let enabled = model.config().trainables;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set.samples[i]).collect();
            let res = match model.loss_and_grads(&batch) {
                Ok(r) => r,
                Err(Error::Numeric(msg)) => {
                    history.aborted = Some(format!("epoch {epoch}: {msg}"));
                    return Ok(history);
                }
                Err(e) => return Err(e),
            };
            loss_sum += res.loss.as_f64() * batch.len() as f64;
            correct += res.correct;
            model.update_params(|p| opt.update(p, &res.grads, &enabled))?;
        }
        let monitor_accuracy = match monitor {
            Some(ds) if !ds.is_empty() => Some(evaluate(model, ds)?.accuracy),
            _ => None,
        };
        let rec = EpochRecord {
            epoch,
            loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            monitor_accuracy,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train acc {:.3}{}",
            rec.loss,
            rec.train_accuracy,
            monitor_accuracy.map(|a| format!(" monitor acc {a:.3}")).unwrap_or_default()
        );
        history.epochs.push(rec);
    }
    Ok(history)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    /// Indexed by class label − 1; `None` for classes absent from the split.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Mean of (top logit − runner-up logit).
    pub mean_margin: f64,
    /// `confusion[true − 1][predicted − 1]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Predicted label (1-based) and the logits of every sample.
pub fn predict<T: Real>(model: &Model<T>, data: &Dataset) -> Result<Vec<(usize, Vec<f64>)>> {
    data.samples
        .par_iter()
        .map(|s| {
            let logits = model.logits(s.series.view())?;
            Ok((argmax(&logits) + 1, logits.iter().map(|v| v.as_f64()).collect()))
        })
        .collect()
}

pub fn evaluate<T: Real>(model: &Model<T>, data: &Dataset) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation split is empty".into()));
    }
    let nc = model.config().n_classes;
    let preds = predict(model, data)?;
    let mut confusion = Array2::<usize>::zeros((nc, nc));
    let mut margin = 0.0;
    for (s, (pred, logits)) in data.samples.iter().zip(&preds) {
        let truth = model.class_index(s.label)?;
        confusion[[truth, pred - 1]] += 1;
        let mut sorted = logits.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        margin += sorted[0] - sorted.get(1).copied().unwrap_or(sorted[0]);
    }
    let correct: usize = (0..nc).map(|i| confusion[[i, i]]).sum();
    let per_class_accuracy = (0..nc)
        .map(|i| {
            let total: usize = confusion.row(i).sum();
            (total > 0).then(|| confusion[[i, i]] as f64 / total as f64)
        })
        .collect();
    Ok(Metrics {
        n: data.len(),
        accuracy: correct as f64 / data.len() as f64,
        per_class_accuracy,
        mean_margin: margin / data.len() as f64,
        confusion: confusion.rows().into_iter().map(|r| r.to_vec()).collect(),
    })
}

/// Samples the model classifies correctly.
pub fn correct_subset<T: Real>(model: &Model<T>, data: &Dataset) -> Result<Dataset> {
    let preds = predict(model, data)?;
    Ok(Dataset {
        samples: data.samples.iter().zip(preds).filter(|(s, (p, _))| s.label == *p).map(|(s, _)| s.clone()).collect(),
    })
}
