//! Short-time objective intelligibility.
//!
//! Constants of the standard algorithm, in one place:
//!
//! | quantity                     | value                         |
//! |------------------------------|-------------------------------|
//! | internal sample rate         | 10 kHz                        |
//! | analysis frame / hop         | 256 / 128 samples, Hann       |
//! | FFT size                     | 512                           |
//! | one-third-octave bands       | 15, lowest centre 150 Hz      |
//! | segment length               | 30 frames (384 ms)            |
//! | clipping (lower SDR bound β) | −15 dB                        |
//! | silent-frame dynamic range   | 40 dB below the loudest frame |

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dsp::{resample_16k_to_10k, AudioClip};
use crate::error::{Error, Result};

pub const STOI_RATE: u32 = 10_000;
const FRAME: usize = 256;
const HOP: usize = FRAME / 2;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

/// Symmetric Hann without the zero end points (`hanning(n + 2)[1..n+1]`).
fn analysis_window() -> Vec<f64> {
    let m = FRAME + 2;
    (1..=FRAME).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (m - 1) as f64).cos()).collect()
}

/// Drops frames more than 40 dB below the loudest reference frame (in
/// both signals) and overlap-adds the survivors.
fn remove_silent_frames(x: &[f64], y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    if x.len() < FRAME {
        return (Vec::new(), Vec::new());
    }
    let starts: Vec<usize> = (0..=x.len() - FRAME).step_by(HOP).collect();
    let frame = |s: &[f64], i: usize| -> Vec<f64> { (0..FRAME).map(|k| w[k] * s[i + k]).collect() };
    let energies: Vec<f64> =
        starts.iter().map(|&i| 20.0 * (frame(x, i).iter().map(|v| v * v).sum::<f64>().sqrt() + EPS).log10()).collect();
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> =
        starts.iter().zip(&energies).filter(|(_, e)| max - DYN_RANGE_DB - **e < 0.0).map(|(i, _)| *i).collect();
    if kept.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let len = (kept.len() - 1) * HOP + FRAME;
    let (mut xs, mut ys) = (vec![0.0; len], vec![0.0; len]);
    for (j, &i) in kept.iter().enumerate() {
        for (k, (a, b)) in frame(x, i).iter().zip(frame(y, i)).enumerate() {
            xs[j * HOP + k] += a;
            ys[j * HOP + k] += b;
        }
    }
    (xs, ys)
}

/// Band index ranges `[lo, hi)` over the `NFFT/2 + 1` bins.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let bins = NFFT / 2 + 1;
    let freqs: Vec<f64> = (0..bins).map(|b| b as f64 * STOI_RATE as f64 / NFFT as f64).collect();
    let nearest =
        |f: f64| (0..bins).min_by(|a, b| (freqs[*a] - f).powi(2).total_cmp(&(freqs[*b] - f).powi(2))).expect("bins");
    (0..BANDS)
        .map(|k| {
            let k = k as f64;
            (nearest(MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0)), nearest(MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0)))
        })
        .collect()
}

/// Band envelopes `(bands × frames)` of a signal.
fn band_envelopes(s: &[f64], w: &[f64], bands: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let fft = FftPlanner::<f64>::new().plan_fft_forward(NFFT);
    let mut env = vec![Vec::new(); bands.len()];
    let mut i = 0;
    // The final full frame is excluded, as in the reference implementation.
    while i + FRAME < s.len() {
        let mut buf: Vec<Complex<f64>> =
            (0..NFFT).map(|k| Complex::new(if k < FRAME { w[k] * s[i + k] } else { 0.0 }, 0.0)).collect();
        fft.process(&mut buf);
        for (b, &(lo, hi)) in bands.iter().enumerate() {
            env[b].push(buf[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        }
        i += HOP;
    }
    env
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// STOI of `estimate` against `reference`, both 16 kHz; trimmed to the
/// shorter length. The result is clamped to `[0, 1]`.
pub fn stoi(reference: &AudioClip, estimate: &AudioClip) -> Result<f64> {
    let len = reference.len().min(estimate.len());
    let trim = |c: &AudioClip| AudioClip::new(c.samples[..len].to_vec(), c.sample_rate);
    let x: Vec<f64> = resample_16k_to_10k(&trim(reference)?)?.samples.iter().map(|v| *v as f64).collect();
    let y: Vec<f64> = resample_16k_to_10k(&trim(estimate)?)?.samples.iter().map(|v| *v as f64).collect();
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidInput("STOI reference is silent".into()));
    }
    let w = analysis_window();
    let (xs, ys) = remove_silent_frames(&x, &y, &w);
    let bands = third_octave_bands();
    let xe = band_envelopes(&xs, &w, &bands);
    let ye = band_envelopes(&ys, &w, &bands);
    let frames = xe[0].len();
    if frames < SEGMENT {
        return Err(Error::InvalidInput(format!(
            "STOI needs at least {SEGMENT} active frames ({} ms of speech), got {frames}",
            SEGMENT * HOP * 1000 / STOI_RATE as usize
        )));
    }
    let clip = 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for m in SEGMENT..=frames {
        for b in 0..BANDS {
            let xseg = &xe[b][m - SEGMENT..m];
            let yseg = &ye[b][m - SEGMENT..m];
            let scale = norm(xseg) / (norm(yseg) + EPS);
            let mut yp: Vec<f64> = yseg.iter().zip(xseg).map(|(yv, xv)| (yv * scale).min(xv * (1.0 + clip))).collect();
            let mut xp = xseg.to_vec();
            for v in [&mut yp, &mut xp] {
                let mean = v.iter().sum::<f64>() / SEGMENT as f64;
                v.iter_mut().for_each(|e| *e -= mean);
                let n = norm(v) + EPS;
                v.iter_mut().for_each(|e| *e /= n);
            }
            total += yp.iter().zip(&xp).map(|(a, b)| a * b).sum::<f64>();
            count += 1;
        }
    }
    Ok((total / count as f64).clamp(0.0, 1.0))
}
