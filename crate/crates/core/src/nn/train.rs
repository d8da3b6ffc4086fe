use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{mse_loss, Nadam, Network, NnError, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_epochs: 100,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(NnError::Config(format!(
                "batch_size, max_epochs and patience must be at least 1 (got {}, {}, {})",
                self.batch_size, self.max_epochs, self.patience
            )));
        }
        Ok(())
    }
}

/// Paired inputs and targets, both `N × H × W × C` with equal `N`.
#[derive(Debug, Clone, Copy)]
pub struct TrainSet<'a, T> {
    pub inputs: &'a Tensor<T>,
    pub targets: &'a Tensor<T>,
}

impl<'a, T: Real> TrainSet<'a, T> {
    pub fn new(inputs: &'a Tensor<T>, targets: &'a Tensor<T>) -> Result<Self, NnError> {
        let (n, ..) = inputs.dims4("train_set")?;
        let (m, ..) = targets.dims4("train_set")?;
        if n != m {
            return Err(NnError::Shape {
                op: "train_set",
                detail: format!("{n} inputs but {m} targets"),
            });
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub stop: StopReason,
}

/// Tracks the best monitored value; signals a stop after `patience`
/// consecutive epochs without a strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, value: f64) -> (bool, bool) {
        if value < self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.stale = 0;
            (true, false)
        } else {
            self.stale += 1;
            (false, self.stale >= self.patience)
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

/// Inference-mode MSE over a whole set, evaluated in batches.
pub fn evaluate_mse<T: Real>(
    net: &Network<T>,
    set: TrainSet<'_, T>,
    batch_size: usize,
) -> Result<f64, NnError> {
    let n = set.len();
    if n == 0 {
        return Err(NnError::EmptyBatch);
    }
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let count = batch_size.min(n - start);
        let pred = net.forward(&set.inputs.slice_batch(start, count))?;
        let (loss, _) = mse_loss(&pred, &set.targets.slice_batch(start, count))?;
        total += loss * count as f64;
        start += count;
    }
    Ok(total / n as f64)
}

/// Minibatch training with per-epoch seeded shuffling, validation-MSE early
/// stopping and best-weight restoration. `on_epoch` sees each record as it
/// is produced.
pub fn train<T: Real>(
    net: &mut Network<T>,
    optimizer: &mut Nadam<T>,
    train_set: TrainSet<'_, T>,
    val_set: TrainSet<'_, T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<History, NnError> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = net.clone();
    let mut epochs = Vec::new();
    let mut stop = StopReason::MaxEpochs;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = train_set.inputs.gather_batch(idx);
            let y = train_set.targets.gather_batch(idx);
            let tape = net.forward_train(&x)?;
            let (loss, grad) = mse_loss(tape.output(), &y)?;
            if !loss.is_finite() {
                return Err(NnError::Diverged {
                    epoch,
                    batch,
                    detail: format!("loss is {loss}"),
                });
            }
            let (grads, _) = net.backward(&tape, &grad)?;
            optimizer
                .step(&mut net.params_mut(), &grads)
                .map_err(|e| NnError::Diverged {
                    epoch,
                    batch,
                    detail: e.to_string(),
                })?;
            net.update_running_stats(&tape);
            sum += loss * idx.len() as f64;
        }
        let val_mse = evaluate_mse(net, val_set, cfg.batch_size)?;
        if !val_mse.is_finite() {
            return Err(NnError::Diverged {
                epoch,
                batch: 0,
                detail: format!("validation loss is {val_mse}"),
            });
        }
        let (improved, halt) = stopper.observe(epoch, val_mse);
        if improved {
            best = net.clone();
        }
        let record = EpochRecord {
            epoch,
            train_mse: sum / train_set.len() as f64,
            val_mse,
            improved,
        };
        on_epoch(&record);
        epochs.push(record);
        if halt {
            stop = StopReason::EarlyStop;
            break;
        }
    }
    *net = best;
    let (best_epoch, best_val_mse) = stopper.best();
    Ok(History {
        epochs,
        best_epoch,
        best_val_mse,
        stop,
    })
}
