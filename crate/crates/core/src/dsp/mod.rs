//! Signal plumbing around the network: framing, windowing, overlap-add,
//! spectral analysis, SNR mixing and resampling.

mod framing;
mod mix;
mod resample;
mod spectral;
mod window;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use framing::{frame_at, frame_count, frame_stream, overlap_add, OverlapAdd, WARMUP_FRAMES};
pub use mix::{cut_noise, mix_at_snr, power, Mixture};
pub use resample::{resample_16k_to_10k, Resampler};
pub use spectral::{mel_project, stft_mag, MelAnalysis, MelConfig, MelFilterbank, Spectrogram, Stft};
pub use window::hann;

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono PCM signal with float samples nominally in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// How the network tiles a signal: frames of `frame_size` samples, each
/// split into `sub_frames` sub-frames; the output sub-frame advances by half
/// its length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramePlan {
    pub frame_size: usize,
    pub sub_frames: usize,
}

impl Default for FramePlan {
    fn default() -> Self {
        Self { frame_size: 1024, sub_frames: 4 }
    }
}

impl FramePlan {
    pub fn new(frame_size: usize, sub_frames: usize) -> Result<Self> {
        let plan = Self { frame_size, sub_frames };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sub_frames == 0 || self.frame_size % self.sub_frames != 0 {
            return Err(Error::InvalidConfig(format!(
                "frame size {} is not divisible into {} sub-frames",
                self.frame_size, self.sub_frames
            )));
        }
        let sub = self.frame_size / self.sub_frames;
        if sub < 2 || sub % 2 != 0 {
            return Err(Error::InvalidConfig(format!("sub-frame length {sub} must be even and >= 2")));
        }
        Ok(())
    }

    /// Samples per sub-frame (`N/M`), also the model's output length.
    pub fn sub_frame_len(&self) -> usize {
        self.frame_size / self.sub_frames
    }

    /// Output advance per step: half a sub-frame.
    pub fn hop(&self) -> usize {
        self.sub_frame_len() / 2
    }

    /// Algorithmic delay of streaming enhancement, in samples.
    pub fn delay(&self) -> usize {
        self.sub_frame_len()
    }
}
