//! Clean × noise mixture manifests, stored as JSON lines.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::wav::read_wav;
use crate::dsp::{mix_at_snr, Mixture};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub clean_path: String,
    pub noise_path: String,
    pub snr_db: i32,
    pub cut_seed: u64,
    pub split: Split,
}

impl ManifestEntry {
    /// Reads both files and mixes them. Relative paths resolve against `base`.
    pub fn realize(&self, base: &Path) -> Result<(Mixture, crate::dsp::AudioClip)> {
        let clean = read_wav(resolve(base, &self.clean_path))?;
        let noise = read_wav(resolve(base, &self.noise_path))?;
        let mix = mix_at_snr(&clean, &noise, self.snr_db as f32, self.cut_seed)?;
        Ok((mix, clean))
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against.
    pub base: PathBuf,
}

/// Inputs of [`build_manifest`] besides the two directories.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestOptions {
    pub snrs: Vec<i32>,
    pub seed: u64,
    /// Fraction of clean files whose mixtures are tagged `test`.
    pub test_fraction: f64,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        Self { snrs: (-5..=5).collect(), seed: 0, test_fraction: 0.0 }
    }
}

/// Sorted absolute paths of the `.wav` files in `dir`.
fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = &fs::canonicalize(dir).map_err(|e| Error::io(dir, e))?;
    let read = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in read {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Every clean file paired with every noise file, each pair with its own
/// uniformly drawn SNR and noise-cut seed.
pub fn build_manifest(clean_dir: &Path, noise_dir: &Path, options: &ManifestOptions) -> Result<Manifest> {
    if options.snrs.is_empty() {
        return Err(Error::InvalidInput("SNR set is empty".into()));
    }
    if !(0.0..=1.0).contains(&options.test_fraction) {
        return Err(Error::InvalidInput(format!("test fraction {} not in [0, 1]", options.test_fraction)));
    }
    let clean = wav_files(clean_dir)?;
    let noise = wav_files(noise_dir)?;
    if clean.is_empty() {
        return Err(Error::InvalidInput(format!("no .wav files in {}", clean_dir.display())));
    }
    if noise.is_empty() {
        return Err(Error::InvalidInput(format!("no .wav files in {}", noise_dir.display())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut order: Vec<usize> = (0..clean.len()).collect();
    order.shuffle(&mut rng);
    let n_test = (clean.len() as f64 * options.test_fraction).round() as usize;
    let test: HashSet<usize> = order[..n_test].iter().copied().collect();
    let mut seeds = HashSet::new();
    let mut entries = Vec::with_capacity(clean.len() * noise.len());
    for (ci, c) in clean.iter().enumerate() {
        for n in &noise {
            let snr_db = options.snrs[rng.random_range(0..options.snrs.len())];
            let cut_seed = loop {
                // 53 bits keep the seed exact in any JSON or TOML reader.
                let s: u64 = rng.random_range(0..1u64 << 53);
                if seeds.insert(s) {
                    break s;
                }
            };
            entries.push(ManifestEntry {
                clean_path: c.to_string_lossy().into_owned(),
                noise_path: n.to_string_lossy().into_owned(),
                snr_db,
                cut_seed,
                split: if test.contains(&ci) { Split::Test } else { Split::Train },
            });
        }
    }
    Ok(Manifest { entries, base: PathBuf::new() })
}

impl Manifest {
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str, base: PathBuf) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e =
                serde_json::from_str(line).map_err(|e| Error::InvalidInput(format!("manifest line {}: {e}", i + 1)))?;
            entries.push(e);
        }
        Ok(Self { entries, base })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_jsonl(&text, base)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn split(&self, split: Split) -> Manifest {
        Manifest {
            entries: self.entries.iter().filter(|e| e.split == split).cloned().collect(),
            base: self.base.clone(),
        }
    }

    pub fn realize(&self, entry: &ManifestEntry) -> Result<(Mixture, crate::dsp::AudioClip)> {
        entry.realize(&self.base)
    }
}
