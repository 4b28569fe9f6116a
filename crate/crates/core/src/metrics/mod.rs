//! SDR and STOI scoring, and per-SNR aggregation over a manifest.

mod stoi;

use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::{Manifest, Split};
use crate::dsp::AudioClip;
use crate::enhance::Enhancer;
use crate::error::{Error, Result};

pub use stoi::{stoi, STOI_RATE};

/// Upper bound reported for (near-)exact estimates.
pub const SDR_CAP_DB: f64 = 80.0;

/// `10·log10(‖s‖² / ‖s − ŝ‖²)` over the common length, capped at
/// [`SDR_CAP_DB`].
pub fn sdr(reference: &AudioClip, estimate: &AudioClip) -> Result<f64> {
    let len = reference.len().min(estimate.len());
    let (s, e) = (&reference.samples[..len], &estimate.samples[..len]);
    let signal: f64 = s.iter().map(|v| (*v as f64).powi(2)).sum();
    if signal == 0.0 {
        return Err(Error::InvalidInput("SDR reference has zero power".into()));
    }
    let error: f64 = s.iter().zip(e).map(|(a, b)| (*a as f64 - *b as f64).powi(2)).sum();
    if error == 0.0 {
        return Ok(SDR_CAP_DB);
    }
    Ok((10.0 * (signal / error).log10()).min(SDR_CAP_DB))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub clean_path: String,
    pub noise_path: String,
    pub snr_db: i32,
    pub cut_seed: u64,
    pub sdr_db: f64,
    pub stoi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub snr_db: i32,
    pub count: usize,
    pub mean_sdr_db: f64,
    pub mean_stoi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverallSummary {
    pub count: usize,
    pub mean_sdr_db: f64,
    pub mean_stoi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryFailure {
    pub clean_path: String,
    pub noise_path: String,
    pub error: String,
}

/// Report schema (TOML):
///
/// ```text
/// config_hash = "<16 hex digits>"   # FNV-1a of `config`
/// config = "<effective configuration>"
/// [overall]    count, mean_sdr_db, mean_stoi
/// [[condition]] snr_db, count, mean_sdr_db, mean_stoi   (ascending SNR)
/// [[utterance]] clean_path, noise_path, snr_db, cut_seed, sdr_db, stoi
/// [[failure]]  clean_path, noise_path, error
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub config: String,
    pub overall: Option<OverallSummary>,
    #[serde(rename = "condition", default)]
    pub conditions: Vec<ConditionSummary>,
    #[serde(rename = "utterance", default)]
    pub utterances: Vec<UtteranceScore>,
    #[serde(rename = "failure", default)]
    pub failures: Vec<EntryFailure>,
}

fn summarize(snr_db: i32, scores: &[&UtteranceScore]) -> ConditionSummary {
    let n = scores.len() as f64;
    ConditionSummary {
        snr_db,
        count: scores.len(),
        mean_sdr_db: scores.iter().map(|s| s.sdr_db).sum::<f64>() / n,
        mean_stoi: scores.iter().map(|s| s.stoi).sum::<f64>() / n,
    }
}

impl EvalReport {
    /// Sorts the scores canonically and computes the per-SNR and overall
    /// means, so the result does not depend on evaluation order.
    pub fn from_scores(mut utterances: Vec<UtteranceScore>, mut failures: Vec<EntryFailure>, config: String) -> Self {
        utterances.sort_by(|a, b| {
            (a.snr_db, &a.clean_path, &a.noise_path, a.cut_seed).cmp(&(
                b.snr_db,
                &b.clean_path,
                &b.noise_path,
                b.cut_seed,
            ))
        });
        failures.sort_by(|a, b| (&a.clean_path, &a.noise_path).cmp(&(&b.clean_path, &b.noise_path)));
        let mut groups: BTreeMap<i32, Vec<&UtteranceScore>> = BTreeMap::new();
        for u in &utterances {
            groups.entry(u.snr_db).or_default().push(u);
        }
        let conditions = groups.iter().map(|(snr, g)| summarize(*snr, g)).collect();
        let all: Vec<&UtteranceScore> = utterances.iter().collect();
        let overall = (!all.is_empty()).then(|| {
            let s = summarize(0, &all);
            OverallSummary { count: s.count, mean_sdr_db: s.mean_sdr_db, mean_stoi: s.mean_stoi }
        });
        Self {
            config_hash: format!("{:016x}", crate::training::config_hash(&config)),
            config,
            overall,
            conditions,
            utterances,
            failures,
        }
    }

    pub fn condition(&self, snr_db: i32) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|c| c.snr_db == snr_db)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("report: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}

/// Enhances and scores every manifest entry (optionally one split).
/// Entries that fail are recorded in the report instead of aborting.
pub fn evaluate_manifest(
    enhancer: &dyn Enhancer,
    manifest: &Manifest,
    split: Option<Split>,
    config: &str,
) -> EvalReport {
    let mut scores = Vec::new();
    let mut failures = Vec::new();
    for entry in manifest.entries.iter().filter(|e| split.is_none_or(|s| e.split == s)) {
        let result = manifest.realize(entry).and_then(|(mix, clean)| {
            let est = enhancer.enhance(&mix.noisy)?;
            Ok((sdr(&clean, &est)?, stoi(&clean, &est)?))
        });
        match result {
            Ok((sdr_db, stoi)) => scores.push(UtteranceScore {
                clean_path: entry.clean_path.clone(),
                noise_path: entry.noise_path.clone(),
                snr_db: entry.snr_db,
                cut_seed: entry.cut_seed,
                sdr_db,
                stoi,
            }),
            Err(e) => {
                warn!("{} + {}: {e}", entry.clean_path, entry.noise_path);
                failures.push(EntryFailure {
                    clean_path: entry.clean_path.clone(),
                    noise_path: entry.noise_path.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    EvalReport::from_scores(scores, failures, config.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(v: Vec<f32>) -> AudioClip {
        AudioClip::new(v, 16000).unwrap()
    }

    #[test]
    fn sdr_edge_values() {
        let s = clip((0..1000).map(|i| (i as f32 * 0.05).sin()).collect());
        assert_eq!(sdr(&s, &s).unwrap(), SDR_CAP_DB);
        let twice = clip(s.samples.iter().map(|v| 2.0 * v).collect());
        assert!(sdr(&s, &twice).unwrap().abs() < 1e-9);
        assert!(sdr(&clip(vec![0.0; 10]), &s).is_err());
    }

    #[test]
    fn report_groups_and_round_trips() {
        let u = |snr, path: &str, sdr_db, stoi| UtteranceScore {
            clean_path: path.into(),
            noise_path: "n.wav".into(),
            snr_db: snr,
            cut_seed: 1,
            sdr_db,
            stoi,
        };
        let r = EvalReport::from_scores(
            vec![u(5, "b", 6.0, 0.9), u(-5, "a", -2.0, 0.5), u(5, "a", 4.0, 0.7)],
            vec![],
            "seed = 1".into(),
        );
        assert_eq!(r.conditions.len(), 2);
        assert_eq!(r.condition(5).unwrap().mean_sdr_db, 5.0);
        assert_eq!(r.condition(-5).unwrap().count, 1);
        assert_eq!(r.overall.as_ref().unwrap().count, 3);
        assert_eq!(EvalReport::from_toml(&r.to_toml()).unwrap(), r);
    }
}
