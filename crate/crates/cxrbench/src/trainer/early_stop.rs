use crate::error::{Error, Result};

/// Running early-stopping state. Pure value type; `early_stop_step` returns
/// the successor state instead of mutating in place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopState {
    pub best_loss: f64,
    pub best_epoch: usize,
    pub epochs_since_improve: usize,
    last_epoch: usize,
}

impl EarlyStopState {
    pub fn new() -> Self {
        EarlyStopState {
            best_loss: f64::INFINITY,
            best_epoch: 0,
            epochs_since_improve: 0,
            last_epoch: 0,
        }
    }
}

impl Default for EarlyStopState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// One observation of the validation loss at `epoch` (1-based, consecutive).
///
/// Strict improvement (val_loss < best, zero minimum delta) resets the
/// counter and records (best_loss, best_epoch); ties count as
/// non-improvement. Returns `Stop` exactly when the counter reaches
/// `patience`.
pub fn early_stop_step(
    state: EarlyStopState,
    epoch: usize,
    val_loss: f64,
    patience: usize,
) -> Result<(EarlyStopState, StopDecision)> {
    if epoch != state.last_epoch + 1 {
        return Err(Error::Protocol(format!(
            "non-monotone epoch sequence: expected {}, got {epoch}",
            state.last_epoch + 1
        )));
    }
    if patience == 0 {
        return Err(Error::Protocol("patience must be >= 1".into()));
    }
    let mut next = state;
    next.last_epoch = epoch;
    if val_loss < state.best_loss {
        next.best_loss = val_loss;
        next.best_epoch = epoch;
        next.epochs_since_improve = 0;
        Ok((next, StopDecision::Continue))
    } else {
        next.epochs_since_improve = state.epochs_since_improve + 1;
        let decision = if next.epochs_since_improve >= patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        };
        Ok((next, decision))
    }
}

/// Independent reference implementation used by tests: derives the stop
/// epoch from prefix minima and their first-attainment indices rather than
/// from a running counter.
///
/// Returns (best_epoch, stop_epoch); `stop_epoch` is `None` when the
/// sequence ends before the criterion fires.
pub fn scan_oracle(losses: &[f64], patience: usize) -> (usize, Option<usize>) {
    let mut stop_epoch = None;
    let mut considered = losses.len();
    for t in 1..=losses.len() {
        // first index attaining the minimum of the prefix ending at t
        let prefix = &losses[..t];
        let min = prefix.iter().copied().fold(f64::INFINITY, f64::min);
        let first_attain = prefix.iter().position(|&v| v == min).unwrap() + 1;
        if t - first_attain >= patience {
            stop_epoch = Some(t);
            considered = t;
            break;
        }
    }
    let prefix = &losses[..considered];
    let min = prefix.iter().copied().fold(f64::INFINITY, f64::min);
    let best_epoch = prefix.iter().position(|&v| v == min).unwrap() + 1;
    (best_epoch, stop_epoch)
}
