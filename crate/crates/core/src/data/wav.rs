//! 16-bit PCM mono WAV at 16 kHz, nothing else.

use std::fs;
use std::path::Path;

use crate::dsp::{AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};

const PCM: u16 = 1;
const EXTENSIBLE: u16 = 0xFFFE;

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

/// Parses a RIFF/WAVE byte buffer.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    let bad = |m: &str| Err(Error::Wav(m.to_string()));
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return bad("not a RIFF/WAVE file");
    }
    let mut pos = 12;
    let mut format = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        if id == b"fmt " {
            if size < 16 || body + size > bytes.len() {
                return bad("malformed fmt chunk");
            }
            let mut tag = u16_at(bytes, body);
            if tag == EXTENSIBLE && size >= 40 {
                tag = u16_at(bytes, body + 24);
            }
            let channels = u16_at(bytes, body + 2);
            let rate = u32_at(bytes, body + 4);
            let bits = u16_at(bytes, body + 14);
            if tag != PCM || bits != 16 {
                return Err(Error::Wav(format!(
                    "unsupported encoding: format tag {tag}, {bits} bits (need 16-bit PCM)"
                )));
            }
            if channels != 1 {
                return Err(Error::Wav(format!("{channels} channels; only mono is supported")));
            }
            if rate != SAMPLE_RATE {
                return Err(Error::Wav(format!("sample rate {rate} Hz; expected {SAMPLE_RATE} Hz")));
            }
            format = Some(());
        } else if id == b"data" {
            if format.is_none() {
                return bad("data chunk before fmt chunk");
            }
            if body + size > bytes.len() {
                return Err(Error::Wav(format!(
                    "data chunk declares {size} bytes but only {} remain",
                    bytes.len() - body
                )));
            }
            if size % 2 != 0 {
                return bad("odd data chunk size for 16-bit samples");
            }
            let samples = bytes[body..body + size]
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32 / 32768.0)
                .collect();
            return AudioClip::new(samples, SAMPLE_RATE);
        }
        pos = body + size + (size & 1);
    }
    if format.is_none() {
        bad("missing fmt chunk")
    } else {
        bad("missing data chunk")
    }
}

/// Quantizes to 16 bits with saturation.
pub fn to_pcm16(v: f32) -> i16 {
    (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>> {
    if clip.sample_rate != SAMPLE_RATE {
        return Err(Error::Wav(format!("sample rate {} Hz; expected {SAMPLE_RATE} Hz", clip.sample_rate)));
    }
    let data_len = clip.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for v in &clip.samples {
        out.extend_from_slice(&to_pcm16(*v).to_le_bytes());
    }
    Ok(out)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes).map_err(|e| match e {
        Error::Wav(m) => Error::Wav(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(clip)?).map_err(|e| Error::io(path, e))
}
