use std::sync::Arc;

use crate::dsp::MelAnalysis;
use crate::error::{Error, Result};
use crate::tensor::{NodeId, Real, Tape, Tensor};

/// Records `MSE(s, ŝ) + λ·MSE(Mel(s), Mel(ŝ))` and returns the scalar node.
/// With `λ = 0` the mel branch is not recorded at all.
pub fn objective<T: Real>(
    tape: &mut Tape<'_, T>,
    estimate: NodeId,
    target: NodeId,
    lambda: T,
    mel: &Arc<MelAnalysis<T>>,
) -> Result<NodeId> {
    if lambda < T::zero() {
        return Err(Error::InvalidInput(format!("lambda {lambda} must be >= 0")));
    }
    let (e, t) = (tape.value(estimate), tape.value(target));
    if e.len() != t.len() {
        return Err(Error::Shape(format!("objective: estimate has {} samples, target {}", e.len(), t.len())));
    }
    let time = tape.mse(estimate, target)?;
    if lambda == T::zero() {
        return Ok(time);
    }
    let me = tape.mel_spectrogram(estimate, mel)?;
    let mt = tape.mel_spectrogram(target, mel)?;
    let spectral = tape.mse(me, mt)?;
    let weighted = tape.scale(spectral, lambda);
    tape.add(time, weighted)
}

/// Value of [`objective`] for two plain signals.
pub fn objective_value<T: Real>(target: &[T], estimate: &[T], lambda: T, mel: &Arc<MelAnalysis<T>>) -> Result<T> {
    let mut tape = Tape::new();
    let s = tape.input(Tensor::vector(target.to_vec()));
    let e = tape.input(Tensor::vector(estimate.to_vec()));
    let loss = objective(&mut tape, e, s, lambda, mel)?;
    Ok(tape.value(loss).data()[0])
}
