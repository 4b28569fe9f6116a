//! Audio files, mixture manifests, synthetic corpora and training batches.

mod frames;
mod manifest;
mod synth;
mod wav;

pub use frames::{Batch, FrameSet, Utterance};
pub use manifest::{build_manifest, Manifest, ManifestEntry, ManifestOptions, Split};
pub use synth::{synth_noise, synth_speech, write_corpus, CorpusSpec, NoiseKind};
pub use wav::{decode_wav, encode_wav, read_wav, to_pcm16, write_wav};
