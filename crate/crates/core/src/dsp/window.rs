use crate::error::{Error, Result};

/// Periodic (DFT-even) Hann window of length `n`.
///
/// The second half is stored as `1 − w[i]` of the first half so that
/// `w[i] + w[i + n/2] == 1` holds exactly in `f32` for even `n`.
pub fn hann(n: usize) -> Result<Vec<f32>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("Hann window length {n} < 2")));
    }
    let at = |i: usize| (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()) as f32;
    if n % 2 != 0 {
        return Ok((0..n).map(at).collect());
    }
    let half = n / 2;
    let mut w: Vec<f32> = (0..half).map(at).collect();
    for i in 0..half {
        w.push(1.0 - w[i]);
    }
    Ok(w)
}
