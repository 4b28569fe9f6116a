//! Causal framing and 50%-overlap Hann reconstruction.
//!
//! Frame `j` ends at sample `(j + 1)·hop`, i.e. it contains only current and
//! past samples, and its last sub-frame covers `[(j − 1)·hop, (j + 1)·hop)`.
//! Frame 0 is a warm-up frame whose last sub-frame straddles the start of
//! the signal; without it the first `hop` output samples would only receive
//! one window half.

use super::{hann, AudioClip, FramePlan};
use crate::error::{Error, Result};

pub const WARMUP_FRAMES: usize = 1;

/// Number of frames needed to cover `len` samples.
pub fn frame_count(len: usize, plan: &FramePlan) -> usize {
    len.div_ceil(plan.hop()) + WARMUP_FRAMES
}

/// Frame `j` of `samples`, zero-filled outside the signal.
pub fn frame_at(samples: &[f32], plan: &FramePlan, j: usize) -> Vec<f32> {
    let n = plan.frame_size as isize;
    let end = ((j + 1) * plan.hop()) as isize;
    let start = end - n;
    let len = samples.len() as isize;
    let mut frame = vec![0.0; plan.frame_size];
    let lo = start.max(0);
    let hi = end.min(len);
    if lo < hi {
        frame[(lo - start) as usize..(hi - start) as usize].copy_from_slice(&samples[lo as usize..hi as usize]);
    }
    frame
}

/// All frames of a clip, oldest first.
pub fn frame_stream(clip: &AudioClip, plan: &FramePlan) -> Vec<Vec<f32>> {
    (0..frame_count(clip.len(), plan)).map(|j| frame_at(&clip.samples, plan, j)).collect()
}

/// Hann-weights every sub-frame and sums them at a stride of `hop`.
pub fn overlap_add(subframes: &[Vec<f32>], hop: usize) -> Result<Vec<f32>> {
    let Some(first) = subframes.first() else { return Ok(Vec::new()) };
    let len = first.len();
    if subframes.iter().any(|s| s.len() != len) {
        return Err(Error::Shape("overlap_add: sub-frames differ in length".into()));
    }
    if hop == 0 {
        return Err(Error::InvalidInput("overlap_add: hop must be positive".into()));
    }
    let window = hann(len)?;
    let mut out = vec![0.0f32; (subframes.len() - 1) * hop + len];
    for (i, sub) in subframes.iter().enumerate() {
        for (j, (s, w)) in sub.iter().zip(&window).enumerate() {
            out[i * hop + j] += s * w;
        }
    }
    Ok(out)
}

/// Incremental form of [`overlap_add`] for half-overlapping sub-frames.
///
/// Each pushed sub-frame completes `len/2` output samples; the arithmetic is
/// identical to the batch form so both produce bit-identical samples.
#[derive(Clone, Debug)]
pub struct OverlapAdd {
    window: Vec<f32>,
    tail: Vec<f32>,
}

impl OverlapAdd {
    pub fn new(sub_frame_len: usize) -> Result<Self> {
        if sub_frame_len % 2 != 0 {
            return Err(Error::InvalidInput(format!("sub-frame length {sub_frame_len} must be even")));
        }
        Ok(Self { window: hann(sub_frame_len)?, tail: vec![0.0; sub_frame_len / 2] })
    }

    pub fn hop(&self) -> usize {
        self.tail.len()
    }

    /// Adds one sub-frame and returns the `hop` samples it completes.
    pub fn push(&mut self, sub: &[f32]) -> Result<Vec<f32>> {
        if sub.len() != self.window.len() {
            return Err(Error::Shape(format!("expected sub-frame of {}, got {}", self.window.len(), sub.len())));
        }
        let hop = self.hop();
        let mut done = Vec::with_capacity(hop);
        for j in 0..hop {
            done.push(self.tail[j] + sub[j] * self.window[j]);
        }
        for j in 0..hop {
            // 0.0 + x is exact, matching the batch accumulator's first write.
            self.tail[j] = 0.0 + sub[hop + j] * self.window[hop + j];
        }
        Ok(done)
    }
}
