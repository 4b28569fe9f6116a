//! `dccrn` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use dccrn::config::ExperimentConfig;
use dccrn::data::{
    build_manifest, read_wav, write_corpus, write_wav, CorpusSpec, FrameSet, Manifest, ManifestOptions, NoiseKind,
    Split,
};
use dccrn::dsp::{AudioClip, SAMPLE_RATE};
use dccrn::enhance::{enhance_clip, Enhancer, Identity, ModelEnhancer, StreamingEnhancer};
use dccrn::metrics::evaluate_manifest;
use dccrn::model::{render_ledger, shape_ledger, DccrnParams, ForwardOptions, REPORTED_PARAMS};
use dccrn::training::{load_checkpoint, save_checkpoint, train_stage, Checkpoint, EpochLog, Stage, StageRequest};
use dccrn::Error;

#[derive(Parser)]
#[command(name = "dccrn", version, about = "Time-domain speech enhancement: data, training, enhancement, evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic clean-speech and noise corpus.
    Synth(SynthArgs),
    /// Pair every clean file with every noise file and write a manifest.
    Mix(MixArgs),
    /// Run one training stage, or all three in order.
    Train(TrainArgs),
    /// Enhance one WAV file.
    Enhance(EnhanceArgs),
    /// Score a model on a manifest and write a report.
    Evaluate(EvaluateArgs),
    /// Print the layer shape table and parameter count.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Number of clean clips.
    #[arg(long, default_value_t = 100)]
    clips: usize,
    /// Clean clip length in seconds.
    #[arg(long, default_value_t = 1.0)]
    secs: f64,
    /// Comma-separated noise kinds (white, tonal, pink).
    #[arg(long, default_value = "white,tonal", value_delimiter = ',')]
    noise: Vec<String>,
    /// Clips per noise kind.
    #[arg(long, default_value_t = 1)]
    noise_clips: usize,
    /// Noise clip length in seconds.
    #[arg(long, default_value_t = 3.0)]
    noise_secs: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    noise: PathBuf,
    /// Comma-separated integer SNRs in dB; one is drawn per mixture.
    #[arg(long, default_value = "-5,-4,-3,-2,-1,0,1,2,3,4,5", value_delimiter = ',', allow_hyphen_values = true)]
    snr: Vec<i32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of clean files whose mixtures are tagged `test`.
    #[arg(long, default_value_t = 0.0)]
    test_fraction: f64,
    /// Also write every noisy mixture as a WAV under OUT/noisy.
    #[arg(long)]
    render: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Cnn,
    Rnn,
    Finetune,
    All,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file; built-in defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration value, e.g. `--set train.cnn.epochs=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum)]
    stage: StageArg,
    /// Directory for checkpoints, the loss log and the effective config.
    #[arg(long)]
    out: PathBuf,
    /// Training manifest; overrides `data.manifest`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Checkpoint to start from; defaults to OUT/<previous stage>.ckpt.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct ModelSwitches {
    /// Drop the shortcut from the CNN output to the GRU output.
    #[arg(long)]
    no_shortcut: bool,
    /// Skip the GRU, leaving the dilated DenseNet alone.
    #[arg(long)]
    ablate_gru: bool,
}

impl ModelSwitches {
    fn options(&self) -> ForwardOptions {
        ForwardOptions { gru: !self.ablate_gru, shortcut: !self.no_shortcut }
    }
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Process block by block as a real-time stream would.
    #[arg(long)]
    streaming: bool,
    #[command(flatten)]
    switches: ModelSwitches,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Checkpoint to evaluate; omit together with --identity to score the unprocessed mixtures.
    #[arg(long, required_unless_present = "identity")]
    model: Option<PathBuf>,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    split: SplitArg,
    /// Pass the noisy input through unchanged.
    #[arg(long, conflicts_with = "model")]
    identity: bool,
    #[command(flatten)]
    switches: ModelSwitches,
}

#[derive(Args)]
struct InspectArgs {
    /// Checkpoint to describe; otherwise the configured architecture.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Mix(a) => mix(a),
        Command::Train(a) => train(a),
        Command::Enhance(a) => enhance(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_validation));
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidInput(msg.into()).into()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn synth(a: SynthArgs) -> Result<()> {
    let kinds = a.noise.iter().map(|k| k.parse::<NoiseKind>()).collect::<dccrn::Result<Vec<_>>>()?;
    if a.clips == 0 || !(a.secs > 0.0) || !(a.noise_secs > 0.0) {
        return Err(invalid("clip counts and lengths must be positive"));
    }
    let spec = CorpusSpec {
        clean_clips: a.clips,
        clean_len: (a.secs * SAMPLE_RATE as f64).round() as usize,
        noise_kinds: kinds,
        noise_clips: a.noise_clips,
        noise_len: (a.noise_secs * SAMPLE_RATE as f64).round() as usize,
        seed: a.seed,
    };
    write_corpus(&a.out, &spec)?;
    info!(
        "wrote {} clean and {} noise clips under {}",
        spec.clean_clips,
        spec.noise_kinds.len() * spec.noise_clips,
        a.out.display()
    );
    Ok(())
}

fn mix(a: MixArgs) -> Result<()> {
    let options = ManifestOptions { snrs: a.snr, seed: a.seed, test_fraction: a.test_fraction };
    // Validate everything before touching the output directory.
    let manifest = build_manifest(&a.clean, &a.noise, &options)?;
    create_dir(&a.out)?;
    let path = a.out.join("manifest.jsonl");
    manifest.save(&path)?;
    if a.render {
        let dir = a.out.join("noisy");
        create_dir(&dir)?;
        for (i, entry) in manifest.entries.iter().enumerate() {
            let (mix, _) = manifest.realize(entry)?;
            write_wav(&mix.noisy, dir.join(format!("mix_{i:05}_{}dB.wav", entry.snr_db)))?;
        }
    }
    info!("{} mixtures -> {}", manifest.entries.len(), path.display());
    Ok(())
}

fn append_log(path: &Path, line: &str) -> Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    if fresh {
        writeln!(f, "{}", EpochLog::HEADER)?;
    }
    writeln!(f, "{line}")?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut overrides = a.config.overrides.clone();
    if let Some(m) = &a.manifest {
        overrides.push(format!("data.manifest={}", toml::Value::String(m.to_string_lossy().into_owned())));
    }
    let cfg = ExperimentConfig::load(a.config.config.as_deref(), &overrides)?;
    let manifest_path = cfg
        .data
        .manifest
        .clone()
        .ok_or_else(|| invalid("no training manifest: pass --manifest or set data.manifest"))?;
    let stages: Vec<Stage> = match a.stage {
        StageArg::Cnn => vec![Stage::Cnn],
        StageArg::Rnn => vec![Stage::Rnn],
        StageArg::Finetune => vec![Stage::Finetune],
        StageArg::All => Stage::ALL.to_vec(),
    };
    let mut resume = match &a.resume {
        Some(p) => Some(load_checkpoint(p)?),
        None => match stages[0].prerequisite() {
            Some(prev) if a.out.join(format!("{prev}.ckpt")).exists() => {
                Some(load_checkpoint(&a.out.join(format!("{prev}.ckpt")))?)
            }
            _ => None,
        },
    };
    if !stages[0].accepts(resume.as_ref().map(|c| c.stage)) {
        // Fail before loading any audio.
        let required = stages[0].prerequisite().map_or("none".into(), |s| s.to_string());
        return Err(Error::MissingPrerequisite { stage: stages[0].to_string(), required }.into());
    }
    let manifest = Manifest::load(Path::new(&manifest_path))?;
    let data = FrameSet::from_manifest(&manifest, Some(Split::Train), cfg.model.plan())?;
    if data.skipped > 0 {
        log::warn!("{} manifest entries could not be read", data.skipped);
    }
    info!("{} training frames from {} utterances", data.len(), data.utterances().len());
    create_dir(&a.out)?;
    let text = cfg.effective_text();
    fs::write(a.out.join("config.toml"), &text).map_err(|e| Error::io(a.out.join("config.toml"), e))?;
    let log_path = a.out.join("train_log.csv");
    for stage in stages {
        let ckpt_path = a.out.join(format!("{stage}.ckpt"));
        let mut on_epoch = |log: &EpochLog, ckpt: &Checkpoint| -> dccrn::Result<()> {
            info!("{log}");
            append_log(&log_path, &log.to_string()).map_err(|e| Error::InvalidInput(e.to_string()))?;
            save_checkpoint(ckpt, &ckpt_path)
        };
        let req =
            StageRequest { stage, model: &cfg.model, train: &cfg.train, resume: resume.take(), config_text: &text };
        let done = train_stage(req, &data, &mut on_epoch).with_context(|| format!("stage {stage}"))?;
        save_checkpoint(&done, &ckpt_path)?;
        info!("stage {stage} done -> {}", ckpt_path.display());
        resume = Some(done);
    }
    Ok(())
}

fn enhance(a: EnhanceArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.model)?;
    let clip = read_wav(&a.input)?;
    let options = a.switches.options();
    let out = if a.streaming {
        let mut s = StreamingEnhancer::new(&ckpt.params, options)?;
        let hop = s.hop();
        let mut samples = Vec::with_capacity(clip.len() + 2 * hop);
        let mut block = vec![0.0; hop];
        let mut fed = 0;
        // Keep feeding (zeros past the end) until every input sample has left the pipeline.
        while samples.len() < clip.len() + hop {
            for (k, v) in block.iter_mut().enumerate() {
                *v = clip.samples.get(fed + k).copied().unwrap_or(0.0);
            }
            fed += hop;
            samples.extend(s.push(&block)?);
        }
        info!("streamed {} blocks of {hop} samples, algorithmic delay {} samples", fed / hop, s.delay());
        AudioClip::new(samples[hop..hop + clip.len()].to_vec(), SAMPLE_RATE)?
    } else {
        enhance_clip(&ckpt.params, &clip, options)?
    };
    write_wav(&out, &a.output)?;
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let split = match a.split {
        SplitArg::Train => Some(Split::Train),
        SplitArg::Test => Some(Split::Test),
        SplitArg::All => None,
    };
    let ckpt = a.model.as_ref().map(|p| load_checkpoint(p)).transpose()?;
    let model_enhancer;
    let (enhancer, config): (&dyn Enhancer, String) = match &ckpt {
        Some(c) => {
            model_enhancer = ModelEnhancer { params: &c.params, options: a.switches.options() };
            (&model_enhancer, c.config_text.clone())
        }
        None => (&Identity, String::new()),
    };
    let report = evaluate_manifest(enhancer, &manifest, split, &config);
    if report.utterances.is_empty() {
        return Err(invalid(format!("no manifest entry could be evaluated ({} failures)", report.failures.len())));
    }
    report.save(&a.report)?;
    for c in &report.conditions {
        info!("snr {:+} dB: n={} sdr={:.2} dB stoi={:.3}", c.snr_db, c.count, c.mean_sdr_db, c.mean_stoi);
    }
    if !report.failures.is_empty() {
        log::warn!("{} entries failed; see the report", report.failures.len());
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    let params = match &a.model {
        Some(p) => load_checkpoint(p)?.params,
        None => DccrnParams::zeros(&ExperimentConfig::load(a.config.config.as_deref(), &a.config.overrides)?.model)?,
    };
    print!("{}", render_ledger(&shape_ledger(&params)));
    let c = params.param_count();
    println!();
    println!("receptive field: {} samples (frame {})", params.config.receptive_field(), params.config.frame_size);
    println!("parameters: {} (cnn {}, rnn {})", c.total, c.cnn, c.rnn);
    println!(
        "  entry {}, dense blocks {:?} + biases {}, exit {}, gru {:?} + biases {}",
        c.entry, c.dense_block_weights, c.dense_biases, c.exit, c.gru_weights, c.gru_biases
    );
    println!("published figure: {:.2} M (this count {:.3} M)", REPORTED_PARAMS as f64 / 1e6, c.total as f64 / 1e6);
    Ok(())
}
