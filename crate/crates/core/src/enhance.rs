//! Inference: a streaming core that consumes and emits `hop` samples per
//! step, and a whole-file driver built on top of it.
//!
//! After the block ending at input sample `t` arrives, the enhancer emits
//! output samples `[t − 2·hop, t − hop)`, so no output sample waits more than
//! one sub-frame (`2·hop`) for its input.

use crate::dsp::{frame_count, AudioClip, OverlapAdd, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::model::{bind, dccrn_forward, DccrnParams, ForwardOptions, Trainable};
use crate::tensor::{Tape, Tensor};

/// Enhanced final sub-frame of one `N`-sample frame.
pub fn enhance_frame(params: &DccrnParams<f32>, frame: &[f32], options: ForwardOptions) -> Result<Vec<f32>> {
    let mut tape = Tape::new();
    let bound = bind(params, &mut tape, Trainable::Nothing);
    let x = tape.input(Tensor::column(frame.to_vec()));
    let out = dccrn_forward(&mut tape, &bound, x, options)?;
    let y = tape.value(out.out);
    y.ensure_finite("enhanced sub-frame")?;
    Ok(y.data().to_vec())
}

pub struct StreamingEnhancer<'a> {
    params: &'a DccrnParams<f32>,
    options: ForwardOptions,
    frame: Vec<f32>,
    ola: OverlapAdd,
}

impl<'a> StreamingEnhancer<'a> {
    pub fn new(params: &'a DccrnParams<f32>, options: ForwardOptions) -> Result<Self> {
        let plan = params.plan();
        plan.validate()?;
        Ok(Self { params, options, frame: vec![0.0; plan.frame_size], ola: OverlapAdd::new(plan.sub_frame_len())? })
    }

    /// Samples consumed and produced per [`push`](Self::push).
    pub fn hop(&self) -> usize {
        self.ola.hop()
    }

    /// Output lag of the earliest sample of each emitted block.
    pub fn delay(&self) -> usize {
        2 * self.hop()
    }

    pub fn push(&mut self, block: &[f32]) -> Result<Vec<f32>> {
        let hop = self.hop();
        if block.len() != hop {
            return Err(Error::InvalidInput(format!("streaming block must hold {hop} samples, got {}", block.len())));
        }
        self.frame.copy_within(hop.., 0);
        let n = self.frame.len();
        self.frame[n - hop..].copy_from_slice(block);
        let sub = enhance_frame(self.params, &self.frame, self.options)?;
        self.ola.push(&sub)
    }
}

/// Whole-clip enhancement: zero-pads, streams, then drops the leading
/// pre-roll block and trims to the input length.
pub fn enhance_clip(params: &DccrnParams<f32>, clip: &AudioClip, options: ForwardOptions) -> Result<AudioClip> {
    if clip.sample_rate != SAMPLE_RATE {
        return Err(Error::InvalidInput(format!("expected {SAMPLE_RATE} Hz input, got {} Hz", clip.sample_rate)));
    }
    let mut enhancer = StreamingEnhancer::new(params, options)?;
    let hop = enhancer.hop();
    let steps = frame_count(clip.len(), &params.plan());
    let mut input = clip.samples.clone();
    input.resize(steps * hop, 0.0);
    let mut out = Vec::with_capacity(steps * hop);
    for block in input.chunks_exact(hop) {
        out.extend(enhancer.push(block)?);
    }
    let samples = out[hop..hop + clip.len()].to_vec();
    AudioClip::new(samples, SAMPLE_RATE)
}

/// Anything that maps a noisy clip to an estimate of the clean one.
pub trait Enhancer {
    fn enhance(&self, noisy: &AudioClip) -> Result<AudioClip>;
}

/// Pass-through baseline: scores the unprocessed mixture.
pub struct Identity;

impl Enhancer for Identity {
    fn enhance(&self, noisy: &AudioClip) -> Result<AudioClip> {
        Ok(noisy.clone())
    }
}

/// A trained network plus the forward-pass switches to use.
pub struct ModelEnhancer<'a> {
    pub params: &'a DccrnParams<f32>,
    pub options: ForwardOptions,
}

impl Enhancer for ModelEnhancer<'_> {
    fn enhance(&self, noisy: &AudioClip) -> Result<AudioClip> {
        enhance_clip(self.params, noisy, self.options)
    }
}
