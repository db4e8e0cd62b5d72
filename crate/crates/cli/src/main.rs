use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nser_core::harness::{
    compare_variants, load_checkpoint, run_experiment_with, save_checkpoint, threads_from_env, with_threads, Checkpoint,
    ConfigError, Dataset, ExperimentConfig, HarnessError, Manifest,
};
use nser_core::metrics::{edit_distance, format_value, normalize_tokens, write_report_block, ConfusionMatrix, Scores};
use nser_core::noise::{build_noisy_manifest, ClipPolicy, MixSpec, NoiseOffsetPolicy};
use nser_core::repr::{gen_synthetic, write_corpus, SynthSpec};

/// Noisy speech emotion recognition with layer-adapter fusion over ASR hidden states.
#[derive(Debug, Parser)]
#[command(name = "nser", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mix every clean utterance with a noise recording at a fixed SNR.
    Mix {
        /// Manifest of clean WAV files.
        #[arg(long)]
        clean: PathBuf,
        /// Manifest of noise WAV files.
        #[arg(long)]
        noise: PathBuf,
        /// Target signal-to-noise ratio in dB.
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        /// Master seed for noise selection and crop offsets.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for mixed WAVs, manifest and audit.
        #[arg(long)]
        out: PathBuf,
        /// What to do when the mix exceeds full scale: rescale or saturate.
        #[arg(long, default_value = "rescale")]
        clip: ClipPolicy,
        /// Tile the noise from offset 0 instead of cropping at a random offset.
        #[arg(long)]
        loop_noise: bool,
    },
    /// Write a synthetic layered-representation corpus with planted class signal.
    GenSynth {
        /// Number of classes.
        #[arg(long, default_value_t = 4)]
        classes: usize,
        /// Utterances per class.
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        /// Encoder layers.
        #[arg(long, default_value_t = 13)]
        layers_enc: usize,
        /// Decoder layers.
        #[arg(long, default_value_t = 13)]
        layers_dec: usize,
        /// Hidden-state width.
        #[arg(long, default_value_t = 64)]
        dim: usize,
        /// Strength of the planted class direction in the last layer.
        #[arg(long, default_value_t = 3.0)]
        sep: f64,
        /// Standard deviation of the per-frame Gaussian noise.
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
        /// Shortest sequence length.
        #[arg(long, default_value_t = 4)]
        min_len: usize,
        /// Longest sequence length.
        #[arg(long, default_value_t = 12)]
        max_len: usize,
        /// Master seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for LRF files and manifest.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and cross-validate one configuration; write per-fold checkpoints.
    Train {
        /// Experiment config (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Manifest of LRF files.
        #[arg(long)]
        manifest: PathBuf,
        /// Checkpoint path; with several folds, `<out>.fold<k>` per fold.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint's best weights on every row of a manifest.
    Eval {
        /// Checkpoint written by `train`.
        #[arg(long)]
        ckpt: PathBuf,
        /// Manifest of LRF files.
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Word error rate between reference and hypothesis transcripts.
    Wer {
        /// Reference file, `id<TAB>text` per line.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Hypothesis file, `id<TAB>text` per line.
        #[arg(long)]
        hyp: PathBuf,
    },
    /// Train several configurations on the same data and tabulate them.
    Compare {
        /// Experiment config; repeat once per variant.
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Manifest of LRF files.
        #[arg(long)]
        manifest: PathBuf,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Self { code: 1, message: message.to_string() }
    }

    fn data(message: impl ToString) -> Self {
        Self { code: 2, message: message.to_string() }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let code = match e {
            HarnessError::Config(_) => 1,
            HarnessError::NonFinite { .. } => 3,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::usage(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<String, Failure> {
    let threads = threads_from_env();
    match command {
        Command::Mix { clean, noise, snr, seed, out, clip, loop_noise } => {
            let spec = MixSpec {
                clip_policy: clip,
                noise_offset_policy: if loop_noise { NoiseOffsetPolicy::Loop } else { NoiseOffsetPolicy::RandomCrop },
                ..MixSpec::new(snr, seed)
            };
            eprintln!("mix: snr_db={snr} seed={seed} clip={clip} loop_noise={loop_noise}");
            let clean = Manifest::load(&clean).map_err(Failure::data)?;
            let noise = Manifest::load(&noise).map_err(Failure::data)?;
            let corpus = with_threads(threads, || {
                build_noisy_manifest(&clean, &noise, &spec, &out).map_err(|e| HarnessError::Data(e.to_string()))
            })?;
            let mut report = String::from("id\tnoise\tapplied_gain\tachieved_snr_db\tclip\n");
            for a in &corpus.audit {
                let clip = if a.clipped { clip.to_string() } else { "none".into() };
                let _ = writeln!(report, "{}\t{}\t{}\t{}\t{clip}", a.id, a.noise_id, a.applied_gain, a.achieved_snr_db);
            }
            Ok(report)
        }
        Command::GenSynth {
            classes,
            per_class,
            layers_enc,
            layers_dec,
            dim,
            sep,
            noise_scale,
            min_len,
            max_len,
            seed,
            out,
        } => {
            let spec = SynthSpec {
                num_classes: classes,
                per_class,
                layers_enc,
                layers_dec,
                dim,
                seq_len: (min_len, max_len),
                class_separation: sep,
                noise_scale,
                seed,
            };
            eprintln!("gen-synth: {spec:?}");
            let corpus = gen_synthetic(&spec).map_err(Failure::usage)?;
            let manifest = write_corpus(&corpus, &out).map_err(Failure::data)?;
            Ok(format!("wrote {} utterances to {}\n", manifest.len(), out.display()))
        }
        Command::Train { config, manifest, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            log_config(&cfg);
            let data = load_data(&manifest, &cfg.classes)?;
            let report = with_threads(threads, || {
                run_experiment_with(&cfg, &data, |fold, log| {
                    eprintln!(
                        "fold {fold} epoch {} loss {} dev_uar {}{}",
                        log.epoch,
                        format_value(log.train_loss),
                        format_value(log.dev_uar),
                        if log.improved { " *" } else { "" }
                    );
                })
            })?;
            let single = report.folds.len() == 1;
            for f in &report.folds {
                let path = if single { out.clone() } else { fold_path(&out, f.fold) };
                let ck = Checkpoint {
                    config: cfg.clone(),
                    class_names: report.class_names.clone(),
                    fold: f.fold,
                    state: f.state.clone(),
                };
                save_checkpoint(&ck, &path).map_err(Failure::data)?;
                eprintln!("saved {}", path.display());
            }
            Ok(report.render())
        }
        Command::Eval { ckpt, manifest } => {
            let ck = load_checkpoint(&ckpt).map_err(Failure::data)?;
            log_config(&ck.config);
            let data = load_data(&manifest, &ck.class_names)?;
            with_threads(threads, || evaluate_all(&ck, &data)).map_err(Failure::from)
        }
        Command::Wer { reference, hyp } => wer_report(&reference, &hyp),
        Command::Compare { configs, manifest } => {
            let cfgs = configs.iter().map(ExperimentConfig::load).collect::<Result<Vec<_>, _>>()?;
            cfgs.iter().for_each(log_config);
            let data = load_data(&manifest, &cfgs[0].classes)?;
            let table = with_threads(threads, || compare_variants(&cfgs, &data))?;
            Ok(table.render())
        }
    }
}

fn log_config(cfg: &ExperimentConfig) {
    eprintln!("config {}, seed {}", cfg.name(), cfg.seed);
    for line in cfg.to_text().lines() {
        eprintln!("  {line}");
    }
}

fn load_data(manifest: &Path, classes: &[String]) -> Result<Dataset, Failure> {
    let manifest = Manifest::load(manifest).map_err(Failure::data)?;
    Ok(Dataset::load(&manifest, classes)?)
}

fn fold_path(out: &Path, fold: usize) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(format!(".fold{fold}"));
    PathBuf::from(name)
}

fn evaluate_all(ck: &Checkpoint, data: &Dataset) -> Result<String, HarnessError> {
    let all: Vec<usize> = (0..data.len()).collect();
    let pred = nser_core::harness::predict(&ck.state.best, data, &all)?;
    let truth = data.labels();
    let cm = ConfusionMatrix::from_predictions(data.class_names.clone(), &truth, &pred)?;
    let mut out = String::new();
    let _ = writeln!(out, "checkpoint\t{}\tfold {}", ck.config.name(), ck.fold);
    write_report_block(&mut out, &Scores::from_confusion(&cm)?, &cm);
    for snr in data.snr_levels() {
        let (t, p): (Vec<usize>, Vec<usize>) = data
            .items
            .iter()
            .zip(&pred)
            .filter(|(u, _)| u.snr_db == Some(snr))
            .map(|(u, &p)| (u.label, p))
            .unzip();
        let s = Scores::from_confusion(&ConfusionMatrix::from_predictions(data.class_names.clone(), &t, &p)?)?;
        let _ = writeln!(out, "uar@snr{snr}\t{}", format_value(s.uar));
        let _ = writeln!(out, "f1_weighted@snr{snr}\t{}", format_value(s.f1_weighted));
    }
    Ok(out)
}

fn read_transcripts(path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut seen = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, body) = line.split_once('\t').unwrap_or((line, ""));
        if seen.insert(id.to_string(), n + 1).is_some() {
            return Err(Failure::data(format!("{}:{}: duplicate id {id}", path.display(), n + 1)));
        }
        rows.push((id.to_string(), body.to_string()));
    }
    Ok(rows)
}

fn wer_report(reference: &Path, hyp: &Path) -> Result<String, Failure> {
    let refs = read_transcripts(reference)?;
    let hyps: BTreeMap<String, String> = read_transcripts(hyp)?.into_iter().collect();
    let ref_ids: BTreeMap<&str, ()> = refs.iter().map(|(id, _)| (id.as_str(), ())).collect();
    let mut unmatched: Vec<&str> = refs.iter().map(|(id, _)| id.as_str()).filter(|id| !hyps.contains_key(*id)).collect();
    unmatched.extend(hyps.keys().map(String::as_str).filter(|id| !ref_ids.contains_key(id)));
    if !unmatched.is_empty() {
        return Err(Failure::data(format!("unmatched ids: {}", unmatched.join(", "))));
    }
    let mut out = String::from("id\twer\n");
    let (mut edits, mut words) = (0usize, 0usize);
    for (id, text) in &refs {
        let r = normalize_tokens(text);
        let h = normalize_tokens(&hyps[id]);
        if r.is_empty() {
            return Err(Failure::data(format!("empty reference transcript for {id}")));
        }
        let e = edit_distance(&r.0, &h.0);
        let _ = writeln!(out, "{id}\t{}", format_value(e as f64 / r.len() as f64));
        edits += e;
        words += r.len();
    }
    let _ = writeln!(out, "corpus_wer\t{}", format_value(edits as f64 / words as f64));
    Ok(out)
}
