use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::DatasetSplit;
use crate::error::{Error, Result};
use crate::model::{argmax, DgaNet};
use crate::numeric::rng::{stream, SHUFFLE_STREAMS};
use crate::numeric::{load_into, write_checkpoint, AdamState, ModelParams, Real};

/// Train/valid/test splits for one run.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: DatasetSplit,
    pub valid: DatasetSplit,
    pub test: Option<DatasetSplit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_accuracy: f64,
}

/// Summary of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub wall_time_secs: f64,
    pub seed: u64,
    pub config: RunConfig,
}

impl RunReport {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// A trained network with the parameters of its best validation epoch.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: RunReport,
    pub net: DgaNet,
    pub params: ModelParams,
}

impl TrainOutcome {
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        save_checkpoint(&self.params, path)
    }
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(params, BufWriter::new(file))?;
    Ok(())
}

/// Builds the network described by `config` and loads a checkpoint into it.
/// Any name or shape disagreement is a checkpoint error.
pub fn load_model(
    config: &RunConfig,
    vocab_size: usize,
    classes: usize,
    external_dim: Option<usize>,
    path: &Path,
) -> Result<(DgaNet, ModelParams)> {
    let (net, mut params) = DgaNet::new(config.model_config(vocab_size, classes, external_dim), config.seed)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_into(&mut params, std::io::BufReader::new(file))?;
    Ok((net, params))
}

/// Accuracy and confusion counts (`confusion[true][predicted]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

pub fn evaluate(net: &DgaNet, params: &ModelParams, split: &DatasetSplit) -> Result<Evaluation> {
    let predictions = split
        .examples
        .iter()
        .map(|e| Ok(argmax(net.forward(params, e.input())?.probs())))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = split.examples.iter().map(|e| e.label).collect();
    score(&predictions, &labels, net.config.classes)
}

/// Accuracy and confusion matrix for argmax predictions.
pub fn score(predictions: &[usize], labels: &[usize], classes: usize) -> Result<Evaluation> {
    if labels.is_empty() {
        return Err(Error::Input("cannot evaluate an empty split".into()));
    }
    let mut confusion = vec![vec![0; classes]; classes];
    let mut correct = 0;
    for (&p, &y) in predictions.iter().zip(labels) {
        confusion[y][p] += 1;
        correct += (p == y) as usize;
    }
    Ok(Evaluation {
        accuracy: correct as f64 / labels.len() as f64,
        correct,
        total: labels.len(),
        confusion,
        predictions: predictions.to_vec(),
    })
}

/// Example order for `epoch`, drawn from its own stream so it does not depend
/// on earlier epochs.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, SHUFFLE_STREAMS + epoch as u64));
    order
}

/// Minibatch Adam on the regularised cross-entropy with early stopping on
/// validation accuracy. Returns the parameters of the best epoch.
pub fn train(config: &RunConfig, splits: &Splits, vocab_size: usize) -> Result<TrainOutcome> {
    config.validate()?;
    let started = Instant::now();
    let classes = splits.train.labels.len();
    let external_dim = splits.train.external_dim();
    let (net, mut params) = DgaNet::new(config.model_config(vocab_size, classes, external_dim), config.seed)?;
    let mut adam = AdamState::new(&params, config.adam());
    let reg = config.regularizer();
    let inputs = splits.train.inputs();

    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, Vec<crate::numeric::Matrix>)> = None;
    for epoch in 0..config.max_epochs {
        let order = epoch_order(config.seed, epoch, inputs.len());
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<_> = chunk.iter().map(|&i| inputs[i]).collect();
            let loss = net.batch_gradient(&mut params, &batch, config.weight_decay as Real, reg)?;
            if !loss.total.is_finite() {
                return Err(Error::Divergence { epoch, step, detail: format!("loss is {}", loss.total) });
            }
            adam.step(&mut params).map_err(|e| Error::Divergence { epoch, step, detail: e.to_string() })?;
            loss_sum += loss.total as f64;
            batches += 1;
        }
        let train_loss = loss_sum / batches as f64;
        let valid_accuracy = evaluate(&net, &params, &splits.valid)?.accuracy;
        log::info!("epoch {epoch}: train loss {train_loss:.6}, valid accuracy {valid_accuracy:.4}");
        epochs.push(EpochRecord { epoch, train_loss, valid_accuracy });

        if best.as_ref().is_none_or(|(_, acc, _)| valid_accuracy > *acc) {
            best = Some((epoch, valid_accuracy, params.snapshot()));
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.0);
        if epoch - best_epoch > config.patience {
            log::info!("no improvement for {} epochs, stopping", epoch - best_epoch);
            break;
        }
    }

    let (best_epoch, best_valid_accuracy, snapshot) = best.expect("at least one epoch");
    params.restore(&snapshot);
    let test_accuracy = match &splits.test {
        Some(test) => Some(evaluate(&net, &params, test)?.accuracy),
        None => None,
    };
    let report = RunReport {
        epochs,
        best_epoch,
        best_valid_accuracy,
        test_accuracy,
        wall_time_secs: started.elapsed().as_secs_f64(),
        seed: config.seed,
        config: config.clone(),
    };
    Ok(TrainOutcome { report, net, params })
}

/// One line-delimited trace record per DGA step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub pair: usize,
    pub step: usize,
    pub p_t: f64,
    pub weights: Vec<f64>,
    pub g_t: Vec<f64>,
}

/// Writes the per-step focus position, attention weights and Gaussian for
/// the first `limit` pairs of `split`.
pub fn dump_trace(
    net: &DgaNet,
    params: &ModelParams,
    split: &DatasetSplit,
    limit: Option<usize>,
    path: &Path,
) -> Result<usize> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut written = 0;
    for (pair, e) in split.examples.iter().enumerate().take(limit.unwrap_or(usize::MAX)) {
        let fwd = net.forward(params, e.input())?;
        for step in fwd.dga.trace() {
            let rec = TraceRecord {
                pair,
                step: step.step,
                p_t: step.position as f64,
                weights: step.attention.weights.iter().map(|&v| v as f64).collect(),
                g_t: step.attention.gaussian.iter().map(|&v| v as f64).collect(),
            };
            serde_json::to_writer(&mut w, &rec).map_err(|e| Error::io(path, e.into()))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            written += 1;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_give_diagonal_confusion() {
        let e = score(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert_eq!(e.confusion, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn empty_split_is_an_error() {
        assert!(matches!(score(&[], &[], 2), Err(Error::Input(_))));
    }

    #[test]
    fn constant_predictor_on_random_binary_labels() {
        use rand::Rng;
        let mut rng = stream(99, 0);
        let labels: Vec<usize> = (0..1000).map(|_| rng.gen_range(0..2)).collect();
        let e = score(&vec![0; 1000], &labels, 2).unwrap();
        assert!((e.accuracy - 0.5).abs() <= 0.05, "{}", e.accuracy);
    }

    #[test]
    fn epoch_orders_are_independent_permutations() {
        let a = epoch_order(3, 5, 50);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_eq!(a, epoch_order(3, 5, 50));
        assert_ne!(a, epoch_order(3, 6, 50));
    }
}
