//! Rational 5/8 polyphase resampling (16 kHz → 10 kHz).

use super::{AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};

const UP: usize = 5;
const DOWN: usize = 8;
/// Filter half-width in input samples.
const HALF_TAPS: isize = 64;
/// Low-pass cutoff in Hz (output Nyquist is 5 kHz).
const CUTOFF_HZ: f64 = 4650.0;
const KAISER_BETA: f64 = 8.0;

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Windowed-sinc polyphase bank: one filter per output phase.
pub struct Resampler {
    phases: Vec<Vec<f64>>,
}

impl Default for Resampler {
    fn default() -> Self {
        Self::new()
    }
}

impl Resampler {
    pub fn new() -> Self {
        let wc = CUTOFF_HZ / SAMPLE_RATE as f64; // cycles per input sample
        let norm = bessel_i0(KAISER_BETA);
        let phases = (0..UP)
            .map(|p| {
                let frac = p as f64 / UP as f64;
                let mut taps: Vec<f64> = (-HALF_TAPS + 1..=HALF_TAPS)
                    .map(|j| {
                        let t = frac - j as f64;
                        let sinc = if t == 0.0 {
                            1.0
                        } else {
                            let a = std::f64::consts::PI * 2.0 * wc * t;
                            a.sin() / a
                        };
                        let r = t / HALF_TAPS as f64;
                        let win =
                            if r.abs() >= 1.0 { 0.0 } else { bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm };
                        2.0 * wc * sinc * win
                    })
                    .collect();
                // Unit DC gain per phase.
                let s: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= s);
                taps
            })
            .collect();
        Self { phases }
    }

    pub fn process(&self, x: &[f32]) -> Vec<f32> {
        let out_len = (x.len() * UP).div_ceil(DOWN);
        (0..out_len)
            .map(|m| {
                let pos = m * DOWN;
                let (base, phase) = ((pos / UP) as isize, pos % UP);
                self.phases[phase]
                    .iter()
                    .enumerate()
                    .map(|(i, h)| {
                        let n = base + (-HALF_TAPS + 1 + i as isize);
                        if n < 0 || n as usize >= x.len() {
                            0.0
                        } else {
                            h * x[n as usize] as f64
                        }
                    })
                    .sum::<f64>() as f32
            })
            .collect()
    }
}

/// Resamples a 16 kHz clip to 10 kHz.
pub fn resample_16k_to_10k(clip: &AudioClip) -> Result<AudioClip> {
    if clip.sample_rate != SAMPLE_RATE {
        return Err(Error::InvalidInput(format!("expected {SAMPLE_RATE} Hz input, got {} Hz", clip.sample_rate)));
    }
    AudioClip::new(Resampler::new().process(&clip.samples), 10_000)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_length() {
        let clip = AudioClip::new(vec![0.0; 16000], 16000).unwrap();
        assert_eq!(resample_16k_to_10k(&clip).unwrap().len(), 10000);
    }

    #[test]
    fn dc_is_preserved() {
        let clip = AudioClip::new(vec![0.25; 16000], 16000).unwrap();
        let out = resample_16k_to_10k(&clip).unwrap();
        for v in &out.samples[100..9900] {
            assert!((v - 0.25).abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_other_rates() {
        let clip = AudioClip::new(vec![0.0; 100], 8000).unwrap();
        assert!(resample_16k_to_10k(&clip).is_err());
    }

    #[test]
    fn sine_matches_analytic_resampling() {
        let f = 1000.0;
        let x: Vec<f32> =
            (0..16000).map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / 16000.0).sin() as f32).collect();
        let y = resample_16k_to_10k(&AudioClip::new(x, 16000).unwrap()).unwrap();
        let (mut sig, mut err) = (0.0, 0.0);
        for m in 200..9800 {
            let ideal = (2.0 * std::f64::consts::PI * f * m as f64 / 10000.0).sin();
            sig += ideal * ideal;
            err += (y.samples[m] as f64 - ideal).powi(2);
        }
        let snr = 10.0 * (sig / err).log10();
        assert!(snr > 60.0, "snr {snr}");
    }
}
