//! `tinyesc` command front end.
//!
//! Every command reads one flat config file (`--config`); `--seed` and
//! repeated `--set key=value` flags override its entries. Exit codes: 0 on
//! success, 1 on usage errors, 2 when the command itself fails.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::seq::SliceRandom;

use crate::audio_io::{center_slice, load_manifest, read_wav, resample, write_wav, DatasetManifest, Layout};
use crate::augment::AugmentKind;
use crate::config::Config;
use crate::deploy::{bench, decode_quantized, qforward, save_quantized, BenchConfig, BenchModel, QuantizedModel, QUANTIZED_MAGIC};
use crate::dsp::write_features;
use crate::model::{
    count_mult_adds, count_params, decode_checkpoint, init_model, Checkpoint, ModelConfig, MultAddConvention,
};
use crate::tokenizer::{build_curve_vocab, save_vocab};
use crate::train::{
    argmax, finetune, fit, initial_checkpoint, predict_logits, split_indices, Batch, Dataset, FeatureSource,
    TrainConfig,
};
use crate::{rng, AudioClip, Error, Result};

const TAG_SWEEP: u64 = 0x5357_4550;

#[derive(Debug, Parser)]
#[command(name = "tinyesc", version, about = "Tiny transformers for environmental sound classification")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory (meaning depends on the command).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Model checkpoint (`.tsck`) or quantized model (`.tscq`).
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Use int8 weights (quantizing an f32 checkpoint on the fly).
    #[arg(long, global = true)]
    pub quantized: bool,
    /// Train only this many seeded-random grid points.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Timed benchmark repetitions.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Config override, `key=value`; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract feature matrices from WAV files.
    Featurize { inputs: Vec<PathBuf> },
    /// Build a curve vocabulary from the configured dataset.
    BuildVocab,
    /// Write one augmented copy of a WAV file per augmentation kind.
    AugmentPreview { input: PathBuf },
    /// Train a model; writes metrics.csv, best.tsck and last.tsck.
    Train,
    /// Continue training a base checkpoint on the configured dataset.
    Finetune,
    /// Accuracy of a checkpoint on the validation split.
    Eval,
    /// Class probabilities for WAV files.
    Predict { inputs: Vec<PathBuf> },
    /// Parameter and multiply-add counts of the configured model.
    Count,
    /// Quantize a checkpoint's linear weights to int8.
    Quantize,
    /// Single-thread latency benchmark, one JSON line per run set.
    Bench,
    /// Grid search over the config's `sweep.` dimensions.
    Sweep,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .parse_env("TINYESC_LOG")
        .format_timestamp(None)
        .try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    let cfg = load_config(c)?;
    match &cli.command {
        Command::Featurize { inputs } => featurize(&cfg, c, inputs),
        Command::BuildVocab => build_vocab(&cfg, c),
        Command::AugmentPreview { input } => augment_preview(&cfg, c, input),
        Command::Train => train(&cfg, c),
        Command::Finetune => finetune_cmd(&cfg, c),
        Command::Eval => eval(&cfg, c),
        Command::Predict { inputs } => predict(&cfg, c, inputs),
        Command::Count => count(&cfg),
        Command::Quantize => quantize(&cfg, c),
        Command::Bench => bench_cmd(&cfg, c),
        Command::Sweep => sweep(&cfg, c).map(|_| ()),
    }
}

/// Config file (or defaults) with `--set` and `--seed` applied.
pub fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for kv in &c.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set expects key=value, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = c.seed {
        cfg.set("seed", s.to_string())?;
    }
    Ok(cfg)
}

fn out_path(c: &Common, default: &str) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn manifest(cfg: &Config) -> Result<DatasetManifest> {
    let root = cfg.require_path("dataset")?;
    let layout: Layout = cfg.value("layout", Layout::FolderPerClass)?;
    load_manifest(root, layout)
}

fn sample_rate(cfg: &Config) -> Result<u32> {
    cfg.value("sample_rate", crate::SAMPLE_RATE)
}

fn read_clip(path: &Path, rate: u32) -> Result<AudioClip> {
    let clip = read_wav(path)?;
    if clip.sample_rate == rate {
        Ok(clip)
    } else {
        resample(&clip, rate)
    }
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "clip".into())
}

fn featurize(cfg: &Config, c: &Common, inputs: &[PathBuf]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::config("featurize needs at least one WAV file"));
    }
    if cfg.get("features") == Some("curves") {
        return Err(Error::config("featurize writes spectral features; use build-vocab for curves"));
    }
    let pipe = cfg.pipeline()?;
    let window: Option<usize> = cfg.get("window_samples").map(|_| cfg.value("window_samples", 0)).transpose()?;
    if let Some(dir) = &c.out {
        std::fs::create_dir_all(dir)?;
    }
    for path in inputs {
        let mut clip = read_clip(path, pipe.spectrogram.sample_rate)?;
        if let Some(w) = window {
            clip = center_slice(&clip, w);
        }
        let m = pipe.extract(&clip)?;
        let (rows, cols) = m.shape();
        match &c.out {
            Some(dir) => {
                let dst = dir.join(format!("{}.feat", file_stem(path)));
                let mut f = std::io::BufWriter::new(std::fs::File::create(&dst)?);
                write_features(&mut f, &m)?;
                f.flush()?;
                println!("{}: {rows} x {cols} -> {}", path.display(), dst.display());
            }
            None => println!("{}: {rows} x {cols}", path.display()),
        }
    }
    Ok(())
}

fn build_vocab(cfg: &Config, c: &Common) -> Result<()> {
    let spec = cfg.curve_spec()?;
    let data = Dataset::load(&manifest(cfg)?, sample_rate(cfg)?)?;
    let (vocab, stats) = build_curve_vocab(&data.clips, spec)?;
    let dst = c.out.clone().or_else(|| cfg.path("vocab")).unwrap_or_else(|| PathBuf::from("vocab.tscv"));
    save_vocab(&dst, &vocab)?;
    println!("vocabulary: {} curves -> {}", vocab.curves.len(), dst.display());
    println!("distinct curves: {}", stats.distinct_curves);
    println!("vocab coverage: {:.2}%", 100.0 * stats.vocab_coverage);
    println!("token coverage: {:.2}%", 100.0 * stats.token_coverage);
    Ok(())
}

fn augment_preview(cfg: &Config, c: &Common, input: &Path) -> Result<()> {
    let seed: u64 = cfg.value("seed", 0)?;
    let clip = read_clip(input, sample_rate(cfg)?)?;
    let specs = cfg.augment_specs(seed)?;
    let kinds: Vec<AugmentKind> = if specs.is_empty() {
        AugmentKind::ALL.to_vec()
    } else {
        specs.iter().map(|s| s.kind).collect()
    };
    let dir = out_path(c, "augment_preview");
    std::fs::create_dir_all(&dir)?;
    let stem = file_stem(input);
    for (i, kind) in kinds.into_iter().enumerate() {
        let mut r = rng::stream(seed, &[i as u64]);
        let samples = kind.apply(&clip.samples, &mut r);
        let dst = dir.join(format!("{stem}_{}.wav", kind.name()));
        write_wav(&dst, &clip.with_samples(samples))?;
        println!("{}", dst.display());
    }
    Ok(())
}

/// Training settings plus the model shaped for `classes` outputs.
fn train_setup(cfg: &Config, classes: usize) -> Result<(TrainConfig, ModelConfig)> {
    let tc = cfg.train_config()?;
    let mut mc = cfg.model_config(&tc)?;
    mc.classes = classes;
    mc.validate()?;
    Ok((tc, mc))
}

fn checkpoint_metadata(cfg: &Config, tc: &TrainConfig) -> std::collections::BTreeMap<String, String> {
    let mut m = cfg.feature_metadata();
    m.insert("window_samples".into(), tc.window_samples.to_string());
    m
}

fn report(outcome: &crate::train::TrainOutcome, dir: &Path) {
    if let Some(last) = outcome.metrics.last() {
        println!("epochs: {}", last.epoch);
        println!("final train loss: {:.4}", last.train_loss);
    }
    println!("best val acc: {:.4}", outcome.best_val_acc());
    println!("outputs: {}", dir.display());
}

fn train(cfg: &Config, c: &Common) -> Result<()> {
    let data = Dataset::load(&manifest(cfg)?, sample_rate(cfg)?)?;
    let (tc, mc) = train_setup(cfg, data.class_names.len())?;
    let dir = out_path(c, "run");
    std::fs::create_dir_all(&dir)?;
    let start = match cfg.path("resume") {
        Some(p) => crate::model::load_checkpoint(p)?,
        None => {
            let mut ck = initial_checkpoint(&mc, data.class_names.clone(), &tc)?;
            ck.metadata = checkpoint_metadata(cfg, &tc);
            ck
        }
    };
    let outcome = fit(&data, start, &tc, Some(&dir))?;
    report(&outcome, &dir);
    Ok(())
}

fn finetune_cmd(cfg: &Config, c: &Common) -> Result<()> {
    let base_path = c
        .checkpoint
        .clone()
        .or_else(|| cfg.path("base"))
        .ok_or_else(|| Error::config("finetune needs a base model (`base` key or --checkpoint)"))?;
    let base = crate::model::load_checkpoint(base_path)?;
    let data = Dataset::load(&manifest(cfg)?, sample_rate(cfg)?)?;
    let (tc, mc) = train_setup(cfg, data.class_names.len())?;
    let dir = out_path(c, "finetune");
    std::fs::create_dir_all(&dir)?;
    let outcome = finetune(&base, &data, &mc, &tc, Some(&dir))?;
    report(&outcome, &dir);
    Ok(())
}

/// An f32 checkpoint or its int8 counterpart.
#[derive(Debug, Clone)]
pub enum LoadedModel {
    Float(Checkpoint),
    Quantized(QuantizedModel),
}

impl LoadedModel {
    /// Reads a `.tsck` or `.tscq` file (by magic), quantizing an f32
    /// checkpoint when `quantized` is set.
    pub fn load(path: &Path, quantized: bool) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingPath(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        if bytes.starts_with(QUANTIZED_MAGIC) {
            return Ok(LoadedModel::Quantized(decode_quantized(&bytes)?));
        }
        let ck = decode_checkpoint(&bytes)?;
        Ok(if quantized {
            LoadedModel::Quantized(QuantizedModel::from_checkpoint(&ck)?)
        } else {
            LoadedModel::Float(ck)
        })
    }

    pub fn class_names(&self) -> &[String] {
        match self {
            LoadedModel::Float(ck) => &ck.class_names,
            LoadedModel::Quantized(q) => &q.class_names,
        }
    }

    pub fn metadata(&self) -> &std::collections::BTreeMap<String, String> {
        match self {
            LoadedModel::Float(ck) => &ck.metadata,
            LoadedModel::Quantized(q) => &q.metadata,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            LoadedModel::Float(ck) => ck.config(),
            LoadedModel::Quantized(q) => q.params.config(),
        }
    }

    /// Feature source and window the model was trained with.
    pub fn inputs(&self) -> Result<(FeatureSource, usize)> {
        let meta = Config::from_pairs(self.metadata());
        let window = meta.value("window_samples", TrainConfig::default().window_samples)?;
        Ok((meta.feature_source()?, window))
    }

    /// Eval-mode logits for centered windows of `clips`.
    pub fn logits(&self, clips: &[&AudioClip], source: &FeatureSource, window: usize) -> Result<Vec<Vec<f32>>> {
        match self {
            LoadedModel::Float(ck) => predict_logits(&ck.params, clips, source, window, 64),
            LoadedModel::Quantized(q) => {
                let classes = q.params.config().classes;
                let mut out = Vec::with_capacity(clips.len());
                for chunk in clips.chunks(64) {
                    let items = chunk
                        .iter()
                        .map(|clip| Ok((source.encode(&center_slice(clip, window))?, 0)))
                        .collect::<Result<Vec<_>>>()?;
                    let batch = Batch::stack(items);
                    let logits = qforward(&q.params, &batch.input())?;
                    out.extend(logits.chunks(classes).map(<[f32]>::to_vec));
                }
                Ok(out)
            }
        }
    }
}

fn model_path(cfg: &Config, c: &Common) -> Result<PathBuf> {
    c.checkpoint
        .clone()
        .or_else(|| cfg.path("checkpoint"))
        .ok_or_else(|| Error::config("no model given (`checkpoint` key or --checkpoint)"))
}

fn eval(cfg: &Config, c: &Common) -> Result<()> {
    let model = LoadedModel::load(&model_path(cfg, c)?, c.quantized)?;
    let (source, window) = model.inputs()?;
    let data = Dataset::load(&manifest(cfg)?, source.sample_rate())?;
    if data.class_names != model.class_names() {
        return Err(Error::data("dataset classes differ from the model's"));
    }
    let tc = cfg.train_config()?;
    let (_, val) = split_indices(&data, tc.val_split, tc.seed)?;
    let clips: Vec<&AudioClip> = val.iter().map(|&i| &data.clips[i]).collect();
    let logits = model.logits(&clips, &source, window)?;
    let correct = logits.iter().zip(&val).filter(|(row, &i)| argmax(row) == data.label(i)).count();
    println!(
        "accuracy: {:.4} ({correct}/{}) on split {}",
        correct as f64 / val.len() as f64,
        val.len(),
        tc.val_split
    );
    Ok(())
}

/// Softmax of one logit row.
pub fn probabilities(logits: &[f32]) -> Vec<f64> {
    let m = logits.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b)) as f64;
    let e: Vec<f64> = logits.iter().map(|&v| (v as f64 - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn predict(cfg: &Config, c: &Common, inputs: &[PathBuf]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::config("predict needs at least one WAV file"));
    }
    let model = LoadedModel::load(&model_path(cfg, c)?, c.quantized)?;
    let (source, window) = model.inputs()?;
    for path in inputs {
        let clip = read_clip(path, source.sample_rate())?;
        let logits = model.logits(&[&clip], &source, window)?;
        let row = &logits[0];
        let names = model.class_names();
        println!("{}: {}", path.display(), names[argmax(row)]);
        for (name, p) in names.iter().zip(probabilities(row)) {
            println!("  {name}\t{p:.6}");
        }
    }
    Ok(())
}

/// `1234567` -> `1,234,567`.
pub fn thousands(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn count(cfg: &Config) -> Result<()> {
    let tc = cfg.train_config()?;
    let mc = cfg.model_config(&tc)?;
    println!(
        "model: {} input, L={} F={} H={} layers={} heads={} classes={}",
        mc.input_mode.name(),
        mc.seq_len,
        mc.input_dim,
        mc.hidden,
        mc.layers,
        mc.heads,
        mc.classes
    );
    println!("params: {}", thousands(count_params(&mc)));
    for conv in [MultAddConvention::PerPosition, MultAddConvention::Total] {
        let name = match conv {
            MultAddConvention::PerPosition => "per_position",
            MultAddConvention::Total => "total",
        };
        println!("mult-adds ({name}): {}", thousands(count_mult_adds(&mc, conv)));
    }
    Ok(())
}

fn quantize(cfg: &Config, c: &Common) -> Result<()> {
    let src = model_path(cfg, c)?;
    let ck = crate::model::load_checkpoint(&src)?;
    let q = QuantizedModel::from_checkpoint(&ck)?;
    let dst = c.out.clone().unwrap_or_else(|| src.with_extension("tscq"));
    save_quantized(&q, &dst)?;
    let (qb, fb) = q.params.weight_payload();
    let size = std::fs::metadata(&dst)?.len();
    println!("wrote {} ({} bytes)", dst.display(), thousands(size));
    println!("weight payload: {} of {} f32 bytes ({:.1}%)", thousands(qb as u64), thousands(fb as u64), 100.0 * qb as f64 / fb as f64);
    Ok(())
}

fn bench_cmd(cfg: &Config, c: &Common) -> Result<()> {
    let model = match model_path(cfg, c) {
        Ok(p) => LoadedModel::load(&p, c.quantized)?,
        Err(_) => {
            // No checkpoint: time a freshly initialised model of the config.
            let tc = cfg.train_config()?;
            let mc = cfg.model_config(&tc)?;
            let seed: u64 = cfg.value("seed", 0)?;
            let names = (0..mc.classes).map(|i| format!("class_{i}")).collect();
            let mut ck = Checkpoint::new(init_model(&mc, &mut rng::seeded(seed))?, names);
            ck.metadata = checkpoint_metadata(cfg, &tc);
            if c.quantized {
                LoadedModel::Quantized(QuantizedModel::from_checkpoint(&ck)?)
            } else {
                LoadedModel::Float(ck)
            }
        }
    };
    let (source, window) = model.inputs()?;
    let d = BenchConfig::default();
    let bc = BenchConfig {
        runs: c.runs.map_or_else(|| cfg.value("runs", d.runs), Ok)?,
        warmup: cfg.value("warmup_runs", d.warmup)?,
        window_samples: window,
        seed: cfg.value("seed", 0)?,
    };
    let r = match &model {
        LoadedModel::Float(ck) => bench(BenchModel::Float(ck), &source, &bc)?,
        LoadedModel::Quantized(q) => bench(BenchModel::Quantized(q), &source, &bc)?,
    };
    let line = r.to_json_line();
    println!("{line}");
    if let Some(p) = &c.out {
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(p)?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

/// Indices of the grid points to train: all of them, or a seeded sample of
/// `budget` kept in grid order.
pub fn select_points(n: usize, budget: Option<usize>, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    match budget {
        Some(b) if b < n => {
            idx.shuffle(&mut rng::stream(seed, &[TAG_SWEEP]));
            idx.truncate(b);
            idx.sort_unstable();
            idx
        }
        _ => idx,
    }
}

/// One row per trained grid point: `(point index, swept values, best val acc)`.
pub type SweepRow = (usize, Vec<String>, f64);

pub fn sweep(cfg: &Config, c: &Common) -> Result<Vec<SweepRow>> {
    let points = cfg.sweep_points()?;
    let dims: Vec<String> = cfg.sweep.iter().map(|(k, _)| k.clone()).collect();
    let seed: u64 = cfg.value("seed", 0)?;
    let chosen = select_points(points.len(), c.budget, seed);
    let data = Dataset::load(&manifest(cfg)?, sample_rate(cfg)?)?;
    let dir = out_path(c, "sweep");
    std::fs::create_dir_all(&dir)?;
    let mut rows = Vec::with_capacity(chosen.len());
    let mut csv = csv::Writer::from_path(dir.join("sweep.csv")).map_err(|e| Error::data(e.to_string()))?;
    let mut header = vec!["point".to_string()];
    header.extend(dims.iter().cloned());
    header.push("best_val_acc".into());
    csv.write_record(&header).map_err(|e| Error::data(e.to_string()))?;
    for i in chosen {
        let point = &points[i];
        log::info!("sweep point {i}: {}", point.describe(&dims));
        let (tc, mc) = train_setup(point, data.class_names.len())?;
        let mut start = initial_checkpoint(&mc, data.class_names.clone(), &tc)?;
        start.metadata = checkpoint_metadata(point, &tc);
        let point_dir = dir.join(format!("point_{i:03}"));
        std::fs::create_dir_all(&point_dir)?;
        let best = fit(&data, start, &tc, Some(&point_dir))?.best_val_acc();
        let values: Vec<String> = dims.iter().map(|k| point.get(k).unwrap_or("").to_string()).collect();
        let mut rec = vec![i.to_string()];
        rec.extend(values.iter().cloned());
        rec.push(best.to_string());
        csv.write_record(&rec).map_err(|e| Error::data(e.to_string()))?;
        csv.flush()?;
        println!("{i}: {} -> {best:.4}", point.describe(&dims));
        rows.push((i, values, best));
    }
    Ok(rows)
}
