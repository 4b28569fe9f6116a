//! Short-time Fourier magnitudes and mel projection, with the adjoint
//! needed to backpropagate a spectral loss into the time domain.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Row-major `(frames, bins)` magnitude array.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub frames: usize,
    pub bins: usize,
    pub data: Vec<f32>,
}

impl Spectrogram {
    pub fn frame(&self, i: usize) -> &[f32] {
        &self.data[i * self.bins..(i + 1) * self.bins]
    }
}

/// Windowed real FFT analysis with a periodic Hann window.
pub struct Stft<T: Real> {
    fft_size: usize,
    hop: usize,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> Stft<T> {
    pub fn new(fft_size: usize, hop: usize) -> Result<Self> {
        if !fft_size.is_power_of_two() || fft_size < 2 {
            return Err(Error::InvalidConfig(format!("fft size {fft_size} must be a power of two")));
        }
        if hop == 0 {
            return Err(Error::InvalidConfig("stft hop must be positive".into()));
        }
        let window = super::hann(fft_size)?.into_iter().map(|v| T::lit(v as f64)).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            fft_size,
            hop,
            window,
            forward: planner.plan_fft_forward(fft_size),
            inverse: planner.plan_fft_inverse(fft_size),
        })
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames for a signal of `len` samples: full windows only, or a single
    /// zero-padded frame when the signal is shorter than one window.
    pub fn frame_count(&self, len: usize) -> usize {
        if len <= self.fft_size {
            1
        } else {
            1 + (len - self.fft_size) / self.hop
        }
    }

    /// Complex one-sided spectra, `frames × bins` row-major.
    pub fn spectra(&self, x: &[T]) -> Vec<Complex<T>> {
        let (frames, bins) = (self.frame_count(x.len()), self.bins());
        let mut out = Vec::with_capacity(frames * bins);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.fft_size];
        for f in 0..frames {
            let start = f * self.hop;
            for (i, slot) in buf.iter_mut().enumerate() {
                let v = x.get(start + i).copied().unwrap_or(T::zero());
                *slot = Complex::new(v * self.window[i], T::zero());
            }
            self.forward.process(&mut buf);
            out.extend_from_slice(&buf[..bins]);
        }
        out
    }

    /// Transpose of [`Stft::spectra`] seen as a real linear map from `x` to
    /// `(re, im)` pairs: returns `∂L/∂x` given `∂L/∂re + i·∂L/∂im` per bin.
    pub fn spectra_adjoint(&self, g: &[Complex<T>], len: usize) -> Vec<T> {
        let bins = self.bins();
        let frames = g.len() / bins;
        let mut dx = vec![T::zero(); len];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.fft_size];
        for f in 0..frames {
            buf.iter_mut().for_each(|c| *c = Complex::new(T::zero(), T::zero()));
            buf[..bins].copy_from_slice(&g[f * bins..(f + 1) * bins]);
            // Σ_k (g_re + i g_im) e^{+2πikn/F}; its real part is g_re cos − g_im sin.
            self.inverse.process(&mut buf);
            let start = f * self.hop;
            for (i, c) in buf.iter().enumerate() {
                if let Some(d) = dx.get_mut(start + i) {
                    *d += c.re * self.window[i];
                }
            }
        }
        dx
    }
}

/// Magnitude spectrogram of `signal`.
pub fn stft_mag(signal: &[f32], fft_size: usize, hop: usize) -> Result<Spectrogram> {
    let stft = Stft::<f32>::new(fft_size, hop)?;
    let spectra = stft.spectra(signal);
    Ok(Spectrogram {
        frames: stft.frame_count(signal.len()),
        bins: stft.bins(),
        data: spectra.iter().map(|c| c.norm()).collect(),
    })
}

/// Spectral-loss analysis settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MelConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin: f32,
    pub fmax: f32,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self { fft_size: 512, hop: 256, n_mels: 40, fmin: 0.0, fmax: 8000.0 }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the mel scale. Adjacent triangles
/// overlap so the weights at any bin between the first and last centre sum
/// to one.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub bins: usize,
    /// `(n_mels, bins)` row-major.
    pub weights: Vec<f32>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, fft_size: usize, sample_rate: u32, fmin: f32, fmax: f32) -> Result<Self> {
        let nyquist = sample_rate as f32 / 2.0;
        if n_mels == 0 {
            return Err(Error::InvalidConfig("n_mels must be >= 1".into()));
        }
        if !(0.0 <= fmin && fmin < fmax && fmax <= nyquist) {
            return Err(Error::InvalidConfig(format!(
                "mel band edges {fmin}..{fmax} Hz invalid for Nyquist {nyquist} Hz"
            )));
        }
        let bins = fft_size / 2 + 1;
        let (lo, hi) = (hz_to_mel(fmin as f64), hz_to_mel(fmax as f64));
        let mut edges: Vec<f64> =
            (0..n_mels + 2).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64)).collect();
        edges[0] = fmin as f64;
        edges[n_mels + 1] = fmax as f64;
        let mut weights = vec![0.0f32; n_mels * bins];
        for m in 0..n_mels {
            let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
            for b in 0..bins {
                let f = b as f64 * sample_rate as f64 / fft_size as f64;
                let up = (f - left) / (centre - left);
                let down = (right - f) / (right - centre);
                weights[m * bins + b] = up.min(down).max(0.0) as f32;
            }
        }
        if (0..n_mels).any(|m| weights[m * bins..(m + 1) * bins].iter().all(|w| *w == 0.0)) {
            log::warn!("mel filterbank: some of the {n_mels} bands cover no FFT bin at fft size {fft_size}");
        }
        Ok(Self { n_mels, bins, weights })
    }

    pub fn row(&self, m: usize) -> &[f32] {
        &self.weights[m * self.bins..(m + 1) * self.bins]
    }
}

/// Applies a mel filterbank to every frame of a magnitude spectrogram.
pub fn mel_project(mag: &Spectrogram, bank: &MelFilterbank) -> Result<Spectrogram> {
    if mag.bins != bank.bins {
        return Err(Error::Shape(format!("spectrogram has {} bins, filterbank {}", mag.bins, bank.bins)));
    }
    let mut data = Vec::with_capacity(mag.frames * bank.n_mels);
    for f in 0..mag.frames {
        let frame = mag.frame(f);
        for m in 0..bank.n_mels {
            data.push(bank.row(m).iter().zip(frame).map(|(w, v)| w * v).sum());
        }
    }
    Ok(Spectrogram { frames: mag.frames, bins: bank.n_mels, data })
}

/// STFT magnitude followed by mel projection, differentiable with respect
/// to the input signal.
pub struct MelAnalysis<T: Real> {
    stft: Stft<T>,
    n_mels: usize,
    weights: Vec<T>,
}

impl<T: Real> MelAnalysis<T> {
    pub fn new(config: &MelConfig, sample_rate: u32) -> Result<Self> {
        let stft = Stft::new(config.fft_size, config.hop)?;
        let bank = MelFilterbank::new(config.n_mels, config.fft_size, sample_rate, config.fmin, config.fmax)?;
        Ok(Self { stft, n_mels: bank.n_mels, weights: bank.weights.iter().map(|w| T::lit(*w as f64)).collect() })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn frame_count(&self, len: usize) -> usize {
        self.stft.frame_count(len)
    }

    /// Returns the complex spectra (kept for the backward pass) and the mel
    /// spectrogram `(frames, n_mels)`.
    pub fn forward(&self, x: &[T]) -> Result<(Vec<Complex<T>>, Tensor<T>)> {
        if x.is_empty() {
            return Err(Error::Shape("mel analysis of an empty signal".into()));
        }
        let spectra = self.stft.spectra(x);
        let bins = self.stft.bins();
        let frames = spectra.len() / bins;
        let mut mel = Vec::with_capacity(frames * self.n_mels);
        for f in 0..frames {
            let spec = &spectra[f * bins..(f + 1) * bins];
            for m in 0..self.n_mels {
                let row = &self.weights[m * bins..(m + 1) * bins];
                mel.push(row.iter().zip(spec).map(|(w, c)| *w * c.norm()).sum());
            }
        }
        Ok((spectra, Tensor::new(&[frames, self.n_mels], mel)?))
    }

    /// `∂L/∂x` given the upstream gradient on the mel spectrogram.
    pub fn backward(&self, spectra: &[Complex<T>], g_mel: &[T], len: usize) -> Vec<T> {
        let bins = self.stft.bins();
        let frames = spectra.len() / bins;
        let mut g_spec = vec![Complex::new(T::zero(), T::zero()); spectra.len()];
        for f in 0..frames {
            let g_row = &g_mel[f * self.n_mels..(f + 1) * self.n_mels];
            for b in 0..bins {
                let c = spectra[f * bins + b];
                let mag = c.norm();
                if mag == T::zero() {
                    // Subgradient 0 at the origin of |·|.
                    continue;
                }
                let g_mag: T = (0..self.n_mels).map(|m| self.weights[m * bins + b] * g_row[m]).sum();
                g_spec[f * bins + b] = Complex::new(g_mag * c.re / mag, g_mag * c.im / mag);
            }
        }
        self.stft.spectra_adjoint(&g_spec, len)
    }
}
