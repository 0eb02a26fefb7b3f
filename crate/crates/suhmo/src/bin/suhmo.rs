//! Command-line front end: data synthesis, training, generation, evaluation,
//! and rendering, tied together by a single seed per run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use suhmo::checkpoint;
use suhmo::data::{
    load_manifest, load_sequence, save_manifest, save_sequence, synth_dataset,
    ManifestEntry, MotionSequence, SynthConfig, COORD_SLACK,
};
use suhmo::metrics::{
    diversity, fid_like, fvd_like, motion_map, rasterize, tfid, FrameExtractor, MetricReport,
    SequenceExtractor, DEFAULT_ALPHA,
};
use suhmo::model::generator::{GenConfig, Generator};
use suhmo::model::Variant;
use suhmo::train::{generate_from_refs, train, TrainConfig, METRIC_CSV_HEADER};
use suhmo::{Result, SuhmoError};

#[derive(Parser)]
#[command(name = "suhmo", version, about = "unconditional head-motion GAN toolkit")]
struct Cli {
    /// Worker threads for evaluation (fallback: SUHMO_THREADS, default 1).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic landmark dataset with labeled motion modes.
    SynthData(SynthArgs),
    /// Train the generator/discriminator pair.
    Train(TrainArgs),
    /// Sample sequences from a trained checkpoint.
    Generate(GenerateArgs),
    /// Compare a fake population against a real one.
    Eval(EvalArgs),
    /// Rasterize a sequence to PGM frames or a motion map.
    Render(RenderArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    modes: usize,
    #[arg(long, default_value_t = 40)]
    t: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset manifest written by synth-data.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Start from a JSON config file instead of a preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    preset: String,
    /// rnn or transformer.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lr_g: Option<f64>,
    #[arg(long)]
    lr_d: Option<f64>,
    #[arg(long)]
    seq_len: Option<usize>,
    #[arg(long)]
    eval_interval: Option<usize>,
    #[arg(long)]
    one_sample_g: bool,
    #[arg(long)]
    one_sample_d: bool,
    #[arg(long)]
    no_multiscale: bool,
    #[arg(long)]
    delta_based: bool,
    #[arg(long)]
    l2_only: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Reference .lmk file; its first frame seeds generation.
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, default_value_t = 40)]
    length: usize,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Real population: a manifest, a directory of .lmk files, or one file.
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    fake: PathBuf,
    /// Comma-separated: fvd10,fvd20,fvd40,tfid,fid,diversity
    #[arg(long, default_value = "fvd40,tfid")]
    metrics: String,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 17)]
    extractor_seed: u64,
    /// Synthetic mode count for the diversity coverage oracle.
    #[arg(long, default_value_t = 2)]
    modes: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Render one EMA motion map instead of per-frame rasters.
    #[arg(long)]
    motion_map: bool,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

/// Everything needed to reproduce a training run on the same platform.
#[derive(Serialize, Deserialize)]
struct RunManifest {
    tool_version: String,
    seed: u64,
    config: TrainConfig,
    checkpoint: PathBuf,
    metric_log: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("SUHMO_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1);
    let res = match cli.cmd {
        Cmd::SynthData(a) => cmd_synth_data(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Eval(a) => cmd_eval(a, threads),
        Cmd::Render(a) => cmd_render(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_synth_data(a: SynthArgs) -> Result<()> {
    if a.modes == 0 {
        return Err(SuhmoError::Invalid("--modes must be at least 1".into()));
    }
    let cfg = SynthConfig {
        n_sequences: a.n,
        t: a.t,
        k: a.k,
        n_modes: a.modes,
        seed: a.seed,
        ..SynthConfig::desk(a.seed)
    };
    std::fs::create_dir_all(&a.out)?;
    let mut entries = Vec::new();
    for (i, (seq, label)) in synth_dataset(&cfg).into_iter().enumerate() {
        let name = format!("seq_{i:04}.lmk");
        save_sequence(&a.out.join(&name), &seq)?;
        entries.push(ManifestEntry {
            path: PathBuf::from(name),
            mode_label: Some(label),
            split: if suhmo::train::is_val_index(i) { "val".into() } else { "train".into() },
        });
    }
    save_manifest(&a.out.join("manifest.json"), &entries)?;
    println!("wrote {} sequences to {}", entries.len(), a.out.display());
    Ok(())
}

fn load_dataset_manifest(manifest: &Path) -> Result<Vec<MotionSequence>> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    load_manifest(manifest)?
        .iter()
        .map(|e| load_sequence(&base.join(&e.path)))
        .collect()
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => serde_json::from_slice(&std::fs::read(path)?)?,
        None => {
            let variant = a.variant.unwrap_or(Variant::Recurrent);
            match a.preset.as_str() {
                "desk" => TrainConfig::desk(variant, 1),
                "paper" => TrainConfig::paper(variant, 1),
                other => {
                    return Err(SuhmoError::Invalid(format!(
                        "unknown preset {other:?} (expected desk or paper)"
                    )))
                }
            }
        }
    };
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    macro_rules! set {
        ($($field:ident <- $arg:expr),*) => {
            $(if let Some(v) = $arg { cfg.$field = v; })*
        };
    }
    set!(max_iters <- a.iters, seed <- a.seed, batch <- a.batch, lambda <- a.lambda,
         lr_g <- a.lr_g, lr_d <- a.lr_d, seq_len <- a.seq_len,
         eval_interval <- a.eval_interval);
    cfg.one_sample_g |= a.one_sample_g;
    cfg.one_sample_d |= a.one_sample_d;
    cfg.no_multiscale |= a.no_multiscale;
    cfg.delta_based |= a.delta_based;
    cfg.l2_only |= a.l2_only;
    if cfg.l2_only && (cfg.no_multiscale || cfg.one_sample_d) {
        eprintln!("warning: --no-multiscale / --one-sample-d have no effect with --l2-only");
    }

    let dataset = load_dataset_manifest(&a.data)?;
    let outcome = train(&cfg, &dataset)?;

    std::fs::create_dir_all(&a.out)?;
    let ckpt_path = a.out.join("checkpoint.suhm");
    let meta = serde_json::json!({
        "tool": "suhmo",
        "version": env!("CARGO_PKG_VERSION"),
        "gen": outcome.generator.cfg,
        "train": cfg,
        "iters": cfg.max_iters,
    });
    checkpoint::save(&ckpt_path, &meta, &outcome.params)?;

    let log_path = a.out.join("metrics.csv");
    let mut csv = String::from(METRIC_CSV_HEADER);
    csv.push('\n');
    for row in &outcome.log {
        csv.push_str(&row.to_csv());
        csv.push('\n');
    }
    std::fs::write(&log_path, csv)?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config: cfg,
        checkpoint: ckpt_path.clone(),
        metric_log: log_path,
    };
    std::fs::write(a.out.join("run_manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    println!("checkpoint written to {}", ckpt_path.display());
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    if a.length < 1 {
        return Err(SuhmoError::Invalid("--length must be at least 1".into()));
    }
    let reference = load_sequence(&a.reference)?;
    std::fs::create_dir_all(&a.out)?;
    if a.length == 1 {
        // degenerate request: the reference frame is the whole sequence
        for i in 0..a.n {
            save_sequence(
                &a.out.join(format!("gen_{i:03}.lmk")),
                &reference.window(0, 1),
            )?;
        }
        return Ok(());
    }
    let ckpt = checkpoint::load(&a.checkpoint)?;
    let gen_cfg: GenConfig = serde_json::from_value(ckpt.meta["gen"].clone())
        .map_err(|e| SuhmoError::Invalid(format!("checkpoint lacks generator config: {e}")))?;
    let gen = Generator::new(gen_cfg);
    let seqs = generate_from_refs(&gen, &ckpt.params, &[&reference], a.length, a.n, a.seed)?;
    // an undertrained model can drift past the coordinate range the file
    // format allows; clamp rather than fail, but say so
    let mut clamped = 0usize;
    let seqs: Vec<_> = seqs
        .into_iter()
        .map(|s| {
            let (t, k) = (s.len(), s.n_landmarks());
            let data = s
                .data()
                .iter()
                .map(|&c| {
                    if (-COORD_SLACK..=COORD_SLACK).contains(&c) {
                        c
                    } else {
                        clamped += 1;
                        c.clamp(-COORD_SLACK, COORD_SLACK)
                    }
                })
                .collect();
            MotionSequence::new(data, t, k, s.fps)
        })
        .collect();
    if clamped > 0 {
        eprintln!("warning: clamped {clamped} coordinates to [-{COORD_SLACK}, {COORD_SLACK}]");
    }
    for (i, s) in seqs.iter().enumerate() {
        save_sequence(&a.out.join(format!("gen_{i:03}.lmk")), s)?;
    }
    println!("wrote {} sequences to {}", seqs.len(), a.out.display());
    Ok(())
}

fn load_population(path: &Path) -> Result<Vec<MotionSequence>> {
    if path.is_dir() {
        let manifest = path.join("manifest.json");
        if manifest.exists() {
            return load_dataset_manifest(&manifest);
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|d| d.ok().map(|d| d.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "lmk"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(SuhmoError::Invalid(format!(
                "no .lmk files in {}",
                path.display()
            )));
        }
        files.iter().map(|p| load_sequence(p)).collect()
    } else if path.extension().is_some_and(|e| e == "json") {
        load_dataset_manifest(path)
    } else {
        Ok(vec![load_sequence(path)?])
    }
}

const METRIC_NAMES: &[&str] = &["fvd10", "fvd20", "fvd40", "tfid", "fid", "diversity"];

fn cmd_eval(a: EvalArgs, threads: usize) -> Result<()> {
    let requested: Vec<&str> = a.metrics.split(',').map(str::trim).collect();
    for m in &requested {
        if !METRIC_NAMES.contains(m) {
            return Err(SuhmoError::Invalid(format!(
                "unknown metric {m:?}; valid names: {}",
                METRIC_NAMES.join(", ")
            )));
        }
    }
    let real = load_population(&a.real)?;
    let fake = load_population(&a.fake)?;
    let k = real[0].n_landmarks();
    let seq_ex = SequenceExtractor::new(k, a.extractor_seed, 64);
    let frame_ex = FrameExtractor::new(a.extractor_seed, 64);

    let mut reports = Vec::new();
    let mut report = |metric: &str, window: Option<usize>, alpha: Option<f64>, value: f64| {
        reports.push(MetricReport {
            metric: metric.into(),
            window,
            alpha,
            value,
            n_real: real.len(),
            n_fake: fake.len(),
            extractor_seed: a.extractor_seed,
        });
    };
    for m in requested {
        match m {
            "fvd10" | "fvd20" | "fvd40" => {
                let l: usize = m[3..].parse().unwrap();
                report(m, Some(l), None, fvd_like(&real, &fake, l, &seq_ex, threads)?);
            }
            "tfid" => report(m, None, Some(a.alpha), tfid(&real, &fake, a.alpha, &frame_ex, threads)?),
            "fid" => report(m, None, None, fid_like(&real, &fake, &frame_ex, threads)?),
            "diversity" => {
                let (d, coverage) = diversity(&fake, a.modes)?;
                report("diversity", None, None, d);
                report("mode_coverage", None, None, coverage as f64);
            }
            _ => unreachable!(),
        }
    }
    let json = serde_json::to_string_pretty(&reports)?;
    match &a.out {
        Some(p) => std::fs::write(p, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_render(a: RenderArgs) -> Result<()> {
    let seq = load_sequence(&a.input)?;
    std::fs::create_dir_all(&a.out)?;
    if a.motion_map {
        let map = motion_map(&seq, a.alpha)?;
        map.save_pgm(&a.out.join("motion_map.pgm"))?;
    } else {
        for t in 0..seq.len() {
            rasterize(seq.frame_coords(t)).save_pgm(&a.out.join(format!("frame_{t:03}.pgm")))?;
        }
    }
    Ok(())
}
