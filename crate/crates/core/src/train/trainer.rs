use std::io::Write;

use log::{debug, warn};

use super::config::TrainConfig;
use super::objective::{total_objective, validation_loss};
use super::schedule::lambda_schedule;
use crate::autograd::{AdamState, Matrix, Tape};
use crate::data::ObservationalDataset;
use crate::error::{Error, Result};
use crate::rng::{streams, SeededRng};
use crate::zoo::Model;

/// One line of the per-epoch loss trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub trace: Vec<EpochRecord>,
    pub final_lambda: f64,
    pub diverged: bool,
    /// Mini-batches whose discrepancy term was dropped for lack of one group.
    pub mmd_skipped_batches: usize,
}

impl TrainReport {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.trace[e].val_loss)
    }

    /// Writes the trace as `epoch,train_loss,val_loss,lambda` lines.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss,lambda")?;
        for r in &self.trace {
            writeln!(w, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.lambda)?;
        }
        Ok(())
    }
}

/// Outcome of feeding one validation score to [`EarlyStopState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct EarlyStopState {
    pub patience: usize,
    pub best_val_loss: f64,
    pub best_epoch: Option<usize>,
    pub best_params: Option<Vec<Matrix>>,
    pub epochs_since_improvement: usize,
}

impl EarlyStopState {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_val_loss: f64::INFINITY,
            best_epoch: None,
            best_params: None,
            epochs_since_improvement: 0,
        }
    }

    /// Records an epoch's validation loss; `snapshot` is only called on improvement.
    pub fn observe(&mut self, epoch: usize, val_loss: f64, snapshot: impl FnOnce() -> Vec<Matrix>) -> StopDecision {
        if val_loss < self.best_val_loss {
            self.best_val_loss = val_loss;
            self.best_epoch = Some(epoch);
            self.best_params = Some(snapshot());
            self.epochs_since_improvement = 0;
            StopDecision::Improved
        } else {
            self.epochs_since_improvement += 1;
            if self.epochs_since_improvement >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }
}

/// Mini-batch Adam training with early stopping on the validation split.
///
/// Batches come from a seeded shuffle each epoch and the final short batch is
/// kept. On return the model holds the best-validation parameters. A
/// non-finite loss or gradient ends training with `diverged` set.
pub fn train(
    model: &mut Model,
    train: &ObservationalDataset,
    val: &ObservationalDataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidConfig("training and validation splits must be non-empty".into()));
    }
    let mut rng = SeededRng::derive(config.seed, streams::BATCH);
    let mut adam = AdamState::new(&model.params);
    let mut stop = EarlyStopState::new(config.patience);
    let mut report = TrainReport {
        epochs_run: 0,
        best_epoch: None,
        trace: Vec::new(),
        final_lambda: 0.0,
        diverged: false,
        mmd_skipped_batches: 0,
    };

    'epochs: for epoch in 0..config.max_epochs {
        let lambda = lambda_schedule(epoch, config.lambda0, config.gamma);
        report.final_lambda = lambda;
        let order = rng.permutation(train.len());
        let mut loss_sum = 0.0;
        for idx in order.chunks(config.batch_size) {
            let batch = train.subset(idx);
            let mut tape = Tape::new();
            let parts = total_objective(&mut tape, model, &batch, lambda, config)?;
            let loss = tape.scalar(parts.total);
            if !loss.is_finite() {
                warn!("{}: non-finite training loss at epoch {epoch}", model.spec());
                report.diverged = true;
                break 'epochs;
            }
            if parts.mmd_skipped {
                report.mmd_skipped_batches += 1;
            }
            loss_sum += loss * idx.len() as f64;
            let grads = tape.backward(parts.total, &model.params)?;
            model.params.set_grads(&grads);
            match adam.step(&mut model.params, config.lr) {
                Ok(()) => {}
                Err(Error::NonFiniteGradient(name)) => {
                    warn!("{}: non-finite gradient for {name} at epoch {epoch}", model.spec());
                    report.diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_loss = validation_loss(model, val, config)?;
        report.epochs_run = epoch + 1;
        report.trace.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lambda,
        });
        if !val_loss.is_finite() {
            report.diverged = true;
            break;
        }
        let decision = stop.observe(epoch, val_loss, || model.params.values());
        debug!("{} epoch {epoch}: train {train_loss:.5} val {val_loss:.5} lambda {lambda:.4}", model.spec());
        if decision == StopDecision::Stop {
            break;
        }
    }

    if report.mmd_skipped_batches > 0 {
        warn!(
            "{}: discrepancy term skipped in {} single-group batches",
            model.spec(),
            report.mmd_skipped_batches
        );
    }
    if let Some(best) = &stop.best_params {
        model.params.restore(best);
    }
    report.best_epoch = stop.best_epoch;
    Ok(report)
}
