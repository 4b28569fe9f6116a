//! Seeded stand-ins for speech and noise corpora.
//!
//! The "speech" is a sequence of syllables: voiced segments built from a
//! gliding harmonic source shaped by three formant resonances, unvoiced
//! high-passed noise bursts, and short pauses.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::wav::write_wav;
use crate::dsp::{AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};

const SR: f64 = SAMPLE_RATE as f64;

fn raised_cosine(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    let edge = |k: usize| 0.5 - 0.5 * (PI * k as f64 / ramp as f64).cos();
    if i < ramp {
        edge(i)
    } else if i + ramp >= len {
        edge(len - 1 - i)
    } else {
        1.0
    }
}

fn voiced(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let len = out.len();
    let f0_start = rng.random_range(95.0..240.0);
    let f0_end = f0_start * rng.random_range(0.8..1.25);
    let formants = [
        (rng.random_range(300.0..900.0), 90.0),
        (rng.random_range(900.0..2300.0), 120.0),
        (rng.random_range(2300.0..3500.0), 180.0),
    ];
    let tremolo = rng.random_range(3.0..7.0);
    let mut phase = 0.0f64;
    for (i, o) in out.iter_mut().enumerate() {
        let frac = i as f64 / len as f64;
        let f0 = f0_start + (f0_end - f0_start) * frac;
        phase += 2.0 * PI * f0 / SR;
        let mut s = 0.0;
        let mut k = 1.0;
        while k * f0 < 4000.0 {
            let f = k * f0;
            let gain: f64 = formants.iter().map(|(c, bw)| 1.0 / (1.0 + ((f - c) / bw).powi(2))).sum();
            s += gain * (k * phase).sin() / k.sqrt();
            k += 1.0;
        }
        let am = 0.75 + 0.25 * (2.0 * PI * tremolo * i as f64 / SR).sin();
        *o += s * am * raised_cosine(i, len, 320);
    }
}

fn unvoiced(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let len = out.len();
    let a = rng.random_range(0.6..0.9);
    let mut prev = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        let w: f64 = StandardNormal.sample(rng);
        // First-difference emphasis pushes energy towards high frequencies.
        let hp = w - a * prev;
        prev = w;
        *o += 0.35 * hp * raised_cosine(i, len, 160);
    }
}

/// Speech-like clip of `len` samples at 16 kHz, RMS normalized to `0.1`.
pub fn synth_speech(seed: u64, len: usize) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0f64; len];
    let mut pos = rng.random_range(0..1600.min(len.max(1)));
    while pos < len {
        let kind = rng.random_range(0..10);
        let seg = match kind {
            0..=5 => rng.random_range(1600..4800),
            6..=7 => rng.random_range(800..2400),
            _ => rng.random_range(800..3200),
        };
        let end = (pos + seg).min(len);
        match kind {
            0..=5 => voiced(&mut rng, &mut x[pos..end]),
            6..=7 => unvoiced(&mut rng, &mut x[pos..end]),
            _ => {}
        }
        pos = end;
    }
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    let scale = if rms > 0.0 { 0.1 / rms } else { 0.0 };
    AudioClip { samples: x.iter().map(|v| (v * scale) as f32).collect(), sample_rate: SAMPLE_RATE }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    /// A handful of steady sinusoids with slow amplitude drift.
    Tonal,
    /// Approximately 1/f spectrum.
    Pink,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Tonal, NoiseKind::Pink];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Tonal => "tonal",
            NoiseKind::Pink => "pink",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown noise kind `{s}` (white, tonal, pink)")))
    }
}

/// Noise clip of `len` samples with RMS `0.1`.
pub fn synth_noise(kind: NoiseKind, seed: u64, len: usize) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = match kind {
        NoiseKind::White => (0..len).map(|_| StandardNormal.sample(&mut rng)).collect(),
        NoiseKind::Tonal => {
            let tones: Vec<(f64, f64, f64)> = (0..rng.random_range(3..6))
                .map(|_| (rng.random_range(150.0..3500.0), rng.random_range(0.0..2.0 * PI), rng.random_range(0.1..0.8)))
                .collect();
            (0..len)
                .map(|i| {
                    let t = i as f64 / SR;
                    tones
                        .iter()
                        .map(|(f, p, drift)| (1.0 + 0.3 * (2.0 * PI * drift * t).sin()) * (2.0 * PI * f * t + p).sin())
                        .sum()
                })
                .collect()
        }
        NoiseKind::Pink => {
            // Kellet's economy filter.
            let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
            (0..len)
                .map(|_| {
                    let w: f64 = StandardNormal.sample(&mut rng);
                    b0 = 0.99765 * b0 + w * 0.0990460;
                    b1 = 0.96300 * b1 + w * 0.2965164;
                    b2 = 0.57000 * b2 + w * 1.0526913;
                    b0 + b1 + b2 + w * 0.1848
                })
                .collect()
        }
    };
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    let scale = if rms > 0.0 { 0.1 / rms } else { 0.0 };
    AudioClip { samples: x.iter().map(|v| (v * scale) as f32).collect(), sample_rate: SAMPLE_RATE }
}

/// What [`write_corpus`] generates.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub clean_clips: usize,
    pub clean_len: usize,
    pub noise_kinds: Vec<NoiseKind>,
    /// Clips per noise kind.
    pub noise_clips: usize,
    pub noise_len: usize,
    pub seed: u64,
}

/// Writes `clean/clean_NNNN.wav` and `noise/<kind>_NN.wav` under `dir`.
pub fn write_corpus(dir: &Path, spec: &CorpusSpec) -> Result<()> {
    let clean_dir = dir.join("clean");
    let noise_dir = dir.join("noise");
    for d in [&clean_dir, &noise_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    for i in 0..spec.clean_clips {
        let clip = synth_speech(spec.seed.wrapping_mul(1_000_003).wrapping_add(i as u64), spec.clean_len);
        write_wav(&clip, clean_dir.join(format!("clean_{i:04}.wav")))?;
    }
    for (k, kind) in spec.noise_kinds.iter().enumerate() {
        for i in 0..spec.noise_clips {
            let seed = spec.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul((k * 1000 + i + 1) as u64));
            write_wav(&synth_noise(*kind, seed, spec.noise_len), noise_dir.join(format!("{kind}_{i:02}.wav")))?;
        }
    }
    Ok(())
}
