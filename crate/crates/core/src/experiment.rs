//! Command-level workflows shared by the CLI and the acceptance suite:
//! stats, synth, train, predict, eval and the four-row ablation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::augment::Sample;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::inference::{run_pipeline, OutputSpec, PipelineOutput, PostProcessConfig};
use crate::io::png_io::read_label_map;
use crate::io::synth::generate_samples;
use crate::io::{generate_synthetic_dataset, read_image, SampleEntry, SampleManifest, SyntheticDataset, SyntheticSpec};
use crate::metrics::{iou_per_class, recall_per_class, ClassIou, ConfusionMatrix, ReportRow};
use crate::model::{read_checkpoint, train_on_samples, write_checkpoint, ModelParams, TrainLog};
use crate::stats::{count_pixels, export_stats_csv, ClassStats};
use crate::types::{ClassSet, InputImage, LabelMap};

pub const CHECKPOINT_FILE: &str = "model.segw";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

/// Pixel statistics, optionally recounted from the label files instead of
/// the cached manifest counts.
pub fn stats_command(manifest: &Path, class_set: ClassSet, recount: bool, out_csv: &Path) -> Result<ClassStats> {
    let mut m = SampleManifest::load(manifest, class_set)?;
    if recount {
        m = m.recount()?;
    }
    let stats = count_pixels(&m)?;
    export_stats_csv(&stats, m.class_set(), out_csv)?;
    Ok(stats)
}

pub fn synth_command(spec: &SyntheticSpec, seed: u64, out_dir: &Path) -> Result<SyntheticDataset> {
    generate_synthetic_dataset(spec, seed, out_dir)
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: PathBuf,
    pub log_path: PathBuf,
    pub params: ModelParams,
    pub log: TrainLog,
}

/// Trains on `dataset.manifest` and writes `model.segw` + `train_log.csv`.
pub fn train_command(cfg: &PipelineConfig, out_dir: &Path) -> Result<TrainOutput> {
    let manifest = SampleManifest::load(cfg.require_manifest()?, cfg.class_set().clone())?;
    let samples = crate::model::load_samples(&manifest)?;
    info!("training on {} images for {} iterations", samples.len(), cfg.train.max_iter);
    let (params, log) = train_on_samples(&cfg.train_setup(), &manifest, &samples)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let checkpoint = out_dir.join(CHECKPOINT_FILE);
    let log_path = out_dir.join(TRAIN_LOG_FILE);
    write_checkpoint(&params, &checkpoint)?;
    log.write_csv(&log_path)?;
    Ok(TrainOutput {
        checkpoint,
        log_path,
        params,
        log,
    })
}

/// Images for prediction: every manifest entry, keyed by id.
pub fn images_from_manifest(manifest: &SampleManifest) -> Result<Vec<(String, InputImage)>> {
    (0..manifest.len())
        .into_par_iter()
        .map(|i| Ok((manifest.entries()[i].id.clone(), manifest.load_image(i)?)))
        .collect()
}

/// Images for prediction from a directory with `rgb/` and `nir/` PNGs of
/// matching names; ids are the file stems, sorted.
pub fn images_from_dir(dir: &Path) -> Result<Vec<(String, InputImage)>> {
    let rgb_dir = dir.join("rgb");
    let nir_dir = dir.join("nir");
    let stems = png_stems(&rgb_dir)?;
    let nir = png_stems(&nir_dir)?;
    for s in stems.keys() {
        if !nir.contains_key(s) {
            return Err(Error::Orphan(format!("{} has no NIR partner in {}", stems[s].display(), nir_dir.display())));
        }
    }
    if let Some(s) = nir.keys().find(|s| !stems.contains_key(*s)) {
        return Err(Error::Orphan(format!("{} has no RGB partner", nir[s].display())));
    }
    let list: Vec<(String, PathBuf)> = stems.into_iter().collect();
    list.par_iter()
        .map(|(id, p)| Ok((id.clone(), read_image(p, &nir[id])?)))
        .collect()
}

fn png_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
            if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), p.clone());
            }
        }
    }
    Ok(out)
}

pub fn load_checkpoints(paths: &[PathBuf]) -> Result<Vec<ModelParams>> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("at least one checkpoint is required".into()));
    }
    paths.iter().map(read_checkpoint).collect()
}

/// TTA per checkpoint, ensemble mean, post-process, argmax; writes
/// `<id>.png` (and `<id>.segp` when asked) into `out_dir`.
pub fn predict_command(
    cfg: &PipelineConfig,
    checkpoints: &[PathBuf],
    images: &[(String, InputImage)],
    out_dir: &Path,
    write_probs: bool,
) -> Result<Vec<PipelineOutput>> {
    let models = load_checkpoints(checkpoints)?;
    let c = cfg.class_set().num_classes();
    if let Some(m) = models.iter().find(|m| m.num_classes() != c) {
        return Err(Error::DimMismatch(format!(
            "checkpoint has {} classes, config has {c}",
            m.num_classes()
        )));
    }
    let spec = OutputSpec {
        dir: out_dir.to_path_buf(),
        write_probs,
    };
    run_pipeline(images, &models, &cfg.tta, &cfg.post, Some(&spec))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub confusion: ConfusionMatrix,
    pub iou: ClassIou,
    pub miou: f64,
    pub images: usize,
}

/// Scores every label PNG in `gt_dir` against the same-named file in
/// `pred_dir`.
pub fn eval_command(pred_dir: &Path, gt_dir: &Path, class_set: &ClassSet) -> Result<EvalOutcome> {
    let gt = png_stems(gt_dir)?;
    if gt.is_empty() {
        return Err(Error::InvalidArgument(format!("no label PNGs in {}", gt_dir.display())));
    }
    let c = class_set.num_classes();
    let pairs: Vec<(String, PathBuf)> = gt.into_iter().collect();
    let loaded: Vec<(LabelMap, LabelMap)> = pairs
        .par_iter()
        .map(|(id, gp)| {
            let pp = pred_dir.join(format!("{id}.png"));
            if !pp.exists() {
                return Err(Error::Orphan(format!("no prediction {} for {}", pp.display(), gp.display())));
            }
            Ok((read_label_map(&pp, c)?, read_label_map(gp, c)?))
        })
        .collect::<Result<_>>()?;
    let refs: Vec<(&LabelMap, &LabelMap)> = loaded.iter().map(|(p, g)| (p, g)).collect();
    let confusion = ConfusionMatrix::from_pairs(c, &refs)?;
    let iou = iou_per_class(&confusion);
    let miou = iou.miou()?;
    Ok(EvalOutcome {
        confusion,
        iou,
        miou,
        images: loaded.len(),
    })
}

/// Row labels, in ablation order.
pub const ABLATION_METHODS: [&str; 4] = [
    "baseline",
    "baseline+ACWLoss",
    "baseline+ACWLoss+RCS_Mosaic",
    "baseline+ACWLoss+RCS_Mosaic+Post",
];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub method: &'static str,
    pub miou: f64,
    /// Mean IoU over present foreground classes.
    pub fg_miou: f64,
    /// Mean recall over the configured rare classes that occur in the
    /// evaluation labels.
    pub rare_recall: f64,
    pub iou: ClassIou,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

const EVAL_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

fn in_memory(spec: &SyntheticSpec, seed: u64, prefix: &str) -> Result<(SampleManifest, Vec<Sample>)> {
    let generated = generate_samples(spec, seed)?;
    let c = spec.class_set.num_classes();
    let mut entries = Vec::with_capacity(generated.len());
    let mut samples = Vec::with_capacity(generated.len());
    for (i, (label, image)) in generated.into_iter().enumerate() {
        let id = format!("{prefix}{i:05}");
        entries.push(SampleEntry {
            image_rgb: PathBuf::from(format!("rgb/{id}.png")),
            image_nir: PathBuf::from(format!("nir/{id}.png")),
            label: PathBuf::from(format!("labels/{id}.png")),
            counts: label.class_counts(c),
            id,
        });
        samples.push(Sample::new(image, label)?);
    }
    Ok((SampleManifest::new(entries, spec.class_set.clone(), "")?, samples))
}

fn score(
    method: &'static str,
    outputs: &[PipelineOutput],
    eval: &[Sample],
    class_set: &ClassSet,
    rare: &[usize],
) -> Result<AblationRow> {
    let pairs: Vec<(&LabelMap, &LabelMap)> = outputs.iter().zip(eval).map(|(o, s)| (&o.labels, &s.label)).collect();
    let cm = ConfusionMatrix::from_pairs(class_set.num_classes(), &pairs)?;
    let iou = iou_per_class(&cm);
    let recall = recall_per_class(&cm);
    let rare_vals: Vec<f64> = rare.iter().filter_map(|&c| recall[c]).collect();
    if rare_vals.is_empty() {
        return Err(Error::InvalidArgument("no rare class occurs in the evaluation set".into()));
    }
    Ok(AblationRow {
        method,
        miou: iou.miou()?,
        fg_miou: iou.mean_over(class_set.foreground())?,
        rare_recall: rare_vals.iter().sum::<f64>() / rare_vals.len() as f64,
        iou,
    })
}

/// Trains baseline, +ACW and +ACW+RCS/mosaic on a synthetic dataset drawn
/// with `cfg.seed`, then scores all three (and the third again with the
/// post-process) on a held-out synthetic set. Every run shares the same
/// seeds, so only the intervention differs.
pub fn run_ablation(cfg: &PipelineConfig) -> Result<AblationResult> {
    let class_set = cfg.class_set();
    let seed = cfg.seed;
    let (manifest, train_samples) = in_memory(&cfg.dataset.synth, seed, "t")?;
    let mut eval_spec = cfg.dataset.synth.clone();
    eval_spec.num_images = cfg.dataset.eval_images;
    let (_, eval_samples) = in_memory(&eval_spec, seed ^ EVAL_SEED_SALT, "e")?;
    let eval_images: Vec<(String, InputImage)> = eval_samples
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("e{i:05}"), s.image.clone()))
        .collect();

    let mut base = cfg.train_setup();
    base.rcs.enabled = false;
    base.acw.enabled = false;
    base.augment.mosaic_prob = 0.0;
    let mut with_acw = base.clone();
    with_acw.acw.enabled = true;
    let mut with_rcs = with_acw.clone();
    with_rcs.rcs.enabled = true;
    with_rcs.augment.mosaic_prob = cfg.augment.mosaic_prob;

    let neutral = PostProcessConfig::neutral(class_set.num_classes());
    let mut rows = Vec::with_capacity(4);
    for (i, setup) in [base, with_acw, with_rcs].iter().enumerate() {
        info!("ablation seed {seed}: training {}", ABLATION_METHODS[i]);
        let (params, _) = train_on_samples(setup, &manifest, &train_samples)?;
        let models = [params];
        let out = run_pipeline(&eval_images, &models, &cfg.tta, &neutral, None)?;
        rows.push(score(ABLATION_METHODS[i], &out, &eval_samples, class_set, &cfg.eval.rare_classes)?);
        if i == 2 {
            let out = run_pipeline(&eval_images, &models, &cfg.tta, &cfg.post, None)?;
            rows.push(score(ABLATION_METHODS[3], &out, &eval_samples, class_set, &cfg.eval.rare_classes)?);
        }
    }
    Ok(AblationResult { seed, rows })
}

/// `seed,method,mIoU,fg_mIoU,rare_recall`, four decimals.
pub fn ablation_csv(results: &[AblationResult]) -> String {
    let mut out = String::from("seed,method,mIoU,fg_mIoU,rare_recall\n");
    for r in results {
        for row in &r.rows {
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4},{:.4}",
                r.seed, row.method, row.miou, row.fg_miou, row.rare_recall
            );
        }
    }
    out
}

/// Per-class report row for an evaluation.
pub fn report_row(cfg: &PipelineConfig, iou: &ClassIou) -> ReportRow {
    ReportRow::from_iou(cfg.eval.architecture.clone(), cfg.eval.backbone.clone(), iou)
}
