use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AudioClip;
use crate::error::{Error, Result};

/// Mean power of a signal, accumulated in `f64`.
pub fn power(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>() / samples.len() as f64
}

/// Noisy mixture plus the pieces that produced it.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub noisy: AudioClip,
    pub scaled_noise: AudioClip,
    pub gain: f64,
    pub offset: usize,
}

/// Cuts `len` samples of noise starting at a seeded uniform offset. Noise
/// shorter than `len` is tiled from that offset.
pub fn cut_noise(noise: &[f32], len: usize, seed: u64) -> Result<(Vec<f32>, usize)> {
    if noise.is_empty() {
        return Err(Error::InvalidInput("noise clip is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if noise.len() >= len {
        let offset = rng.random_range(0..=noise.len() - len);
        Ok((noise[offset..offset + len].to_vec(), offset))
    } else {
        let offset = rng.random_range(0..noise.len());
        Ok(((0..len).map(|i| noise[(offset + i) % noise.len()]).collect(), offset))
    }
}

/// Mixes `clean` with a random cut of `noise` so that the clean-to-noise
/// power ratio equals `snr_db`.
pub fn mix_at_snr(clean: &AudioClip, noise: &AudioClip, snr_db: f32, seed: u64) -> Result<Mixture> {
    if clean.sample_rate != noise.sample_rate {
        return Err(Error::InvalidInput(format!(
            "sample rates differ: clean {} Hz, noise {} Hz",
            clean.sample_rate, noise.sample_rate
        )));
    }
    let p_clean = power(&clean.samples);
    if p_clean == 0.0 {
        return Err(Error::InvalidInput("clean signal is silent".into()));
    }
    let (cut, offset) = cut_noise(&noise.samples, clean.len(), seed)?;
    let p_noise = power(&cut);
    if p_noise == 0.0 {
        return Err(Error::InvalidInput("noise segment is silent".into()));
    }
    let gain = (p_clean / (p_noise * 10f64.powf(snr_db as f64 / 10.0))).sqrt();
    let scaled: Vec<f32> = cut.iter().map(|v| (*v as f64 * gain) as f32).collect();
    let noisy = clean.samples.iter().zip(&scaled).map(|(c, n)| c + n).collect();
    Ok(Mixture {
        noisy: AudioClip::new(noisy, clean.sample_rate)?,
        scaled_noise: AudioClip::new(scaled, clean.sample_rate)?,
        gain,
        offset,
    })
}
