use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imbalseg::config::PipelineConfig;
use imbalseg::experiment::{
    ablation_csv, eval_command, images_from_dir, images_from_manifest, predict_command, report_row, run_ablation,
    stats_command, synth_command, train_command,
};
use imbalseg::inference::{PostProcessConfig, TtaConfig};
use imbalseg::io::{SampleManifest, SyntheticSpec};
use imbalseg::metrics::report_csv_string;
use imbalseg::stats::stats_csv_string;
use imbalseg::{Error, ErrorKind, Result};
use log::info;

/// Class-imbalance toolkit for semantic segmentation.
#[derive(Debug, Parser)]
#[command(name = "imbalseg", version, about)]
struct Cli {
    /// Pipeline config (`key=value` lines with section prefixes).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "IMBALSEG_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-class pixel counts and frequencies as CSV.
    Stats(StatsArgs),
    /// Generate a synthetic imbalanced dataset.
    Synth(SynthArgs),
    /// Train the pixel classifier; writes model.segw and train_log.csv.
    Train(TrainArgs),
    /// TTA, ensemble and post-process over one or more checkpoints.
    Predict(PredictArgs),
    /// Score predicted label PNGs against ground truth.
    Eval(EvalArgs),
    /// Four-row component ablation on synthetic data.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Manifest (defaults to dataset.manifest).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recount pixels from the label files instead of cached counts.
    #[arg(long)]
    recount: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Spec file; defaults to the config's synthetic spec.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Training manifest (defaults to dataset.manifest).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Checkpoints; more than one means an ensemble.
    #[arg(long = "checkpoint", required = true, num_args = 1..)]
    checkpoints: Vec<PathBuf>,
    /// Directory with rgb/ and nir/ PNGs.
    #[arg(long, conflicts_with = "manifest")]
    images: Option<PathBuf>,
    /// Manifest whose images are predicted (defaults to
    /// dataset.eval_manifest, then dataset.manifest).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory for <id>.png and <id>.segp.
    #[arg(long)]
    out: PathBuf,
    /// TTA set: comma list of identity,hflip,vflip,hvflip, or all / none.
    #[arg(long)]
    tta: Option<String>,
    /// `bg=0.95,fg=2.0`, per-class `0=0.95,1=2.0,...`, or `none`.
    #[arg(long)]
    post_multipliers: Option<String>,
    /// Skip writing SEGP probability maps.
    #[arg(long)]
    no_probs: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of predicted label PNGs.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth label PNGs.
    #[arg(long)]
    gt: PathBuf,
    /// Also write the report CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AblateArgs {
    /// Seeds to run (comma list); defaults to the root seed.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Also write the CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot set up thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg = cfg.with_seed(s);
    }
    match cli.command {
        Command::Stats(a) => stats(&cfg, a),
        Command::Synth(a) => synth(&cfg, a),
        Command::Train(a) => train(cfg, a),
        Command::Predict(a) => predict(cfg, a),
        Command::Eval(a) => eval(&cfg, a),
        Command::Ablate(a) => ablate(&cfg, a),
    }
}

fn manifest_or_config(explicit: Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf> {
    match explicit {
        Some(p) => Ok(p),
        None => cfg.require_manifest().map(Path::to_path_buf),
    }
}

fn stats(cfg: &PipelineConfig, a: StatsArgs) -> Result<()> {
    let manifest = manifest_or_config(a.manifest, cfg)?;
    match a.out {
        Some(out) => {
            stats_command(&manifest, cfg.class_set().clone(), a.recount, &out)?;
        }
        None => {
            let mut m = SampleManifest::load(&manifest, cfg.class_set().clone())?;
            if a.recount {
                m = m.recount()?;
            }
            let s = imbalseg::stats::count_pixels(&m)?;
            print!("{}", stats_csv_string(&s, m.class_set())?);
        }
    }
    Ok(())
}

fn synth(cfg: &PipelineConfig, a: SynthArgs) -> Result<()> {
    let spec = match a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            SyntheticSpec::parse(&text)?
        }
        None => cfg.dataset.synth.clone(),
    };
    let ds = synth_command(&spec, cfg.seed, &a.out)?;
    println!("class,target_share,realized_share");
    for (c, (t, r)) in spec.shares.iter().zip(ds.realized_shares()).enumerate() {
        println!("{},{t:.6},{r:.6}", spec.class_set.name(c));
    }
    info!("wrote {}", ds.manifest_path.display());
    Ok(())
}

fn train(mut cfg: PipelineConfig, a: TrainArgs) -> Result<()> {
    if let Some(m) = a.manifest {
        cfg.dataset.manifest = Some(m);
    }
    let out = train_command(&cfg, &a.out)?;
    let last = out.log.records.last().map_or(f64::NAN, |r| r.loss);
    println!("checkpoint {}", out.checkpoint.display());
    println!("log {}", out.log_path.display());
    println!("final_loss {last:.6}");
    Ok(())
}

fn predict(mut cfg: PipelineConfig, a: PredictArgs) -> Result<()> {
    if let Some(t) = &a.tta {
        cfg.tta = TtaConfig::parse(t)?;
    }
    if let Some(m) = &a.post_multipliers {
        cfg.post = PostProcessConfig {
            multipliers: PostProcessConfig::parse_multipliers(m, cfg.class_set())?,
            renormalize: cfg.post.renormalize,
        };
    }
    let images = match (&a.images, a.manifest) {
        (Some(dir), _) => images_from_dir(dir)?,
        (None, explicit) => {
            let path = match explicit.or_else(|| cfg.dataset.eval_manifest.clone()) {
                Some(p) => p,
                None => cfg.require_manifest()?.to_path_buf(),
            };
            images_from_manifest(&SampleManifest::load(&path, cfg.class_set().clone())?)?
        }
    };
    let outs = predict_command(&cfg, &a.checkpoints, &images, &a.out, !a.no_probs)?;
    println!("predicted {} images into {}", outs.len(), a.out.display());
    Ok(())
}

fn eval(cfg: &PipelineConfig, a: EvalArgs) -> Result<()> {
    let e = eval_command(&a.pred, &a.gt, cfg.class_set())?;
    let text = report_csv_string(cfg.class_set().names(), &[report_row(cfg, &e.iou)])?;
    print!("{text}");
    let absent: Vec<&str> = (0..e.iou.present.len())
        .filter(|&c| !e.iou.present[c])
        .map(|c| cfg.class_set().name(c))
        .collect();
    if !absent.is_empty() {
        eprintln!("absent classes (excluded from mIoU): {}", absent.join(","));
    }
    if let Some(out) = a.out {
        std::fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
    }
    Ok(())
}

fn ablate(cfg: &PipelineConfig, a: AblateArgs) -> Result<()> {
    let seeds = if a.seeds.is_empty() { vec![cfg.seed] } else { a.seeds };
    let results = seeds
        .iter()
        .map(|&s| run_ablation(&cfg.clone().with_seed(s)))
        .collect::<Result<Vec<_>>>()?;
    let text = ablation_csv(&results);
    print!("{text}");
    if let Some(out) = a.out {
        std::fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
    }
    Ok(())
}
