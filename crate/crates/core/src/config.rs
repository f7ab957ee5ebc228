//! Pipeline configuration: one `key=value` file with section prefixes
//! (`dataset.`, `rcs.`, `augment.`, `acw.`, `train.`, `tta.`, `post.`,
//! `eval.`) plus a root `seed`. Every key is checked before any command
//! starts doing work.

use std::path::{Path, PathBuf};

use crate::acw::AcwConfig;
use crate::augment::{AugConfig, JitterStrengths};
use crate::error::{Error, Result};
use crate::inference::{PostProcessConfig, TtaConfig};
use crate::io::SyntheticSpec;
use crate::kv::KeyValues;
use crate::model::{TrainConfig, TrainSetup};
use crate::rcs::RcsConfig;
use crate::types::ClassSet;

const KEYS: &[&str] = &[
    "seed",
    "dataset.manifest",
    "dataset.eval_manifest",
    "dataset.classes",
    "dataset.background",
    "dataset.synth_spec",
    "dataset.eval_images",
    "rcs.enabled",
    "rcs.temperature",
    "rcs.min_pixels",
    "rcs.include_background",
    "augment.crop_size",
    "augment.hflip_prob",
    "augment.vflip_prob",
    "augment.rotate_prob",
    "augment.scale_min",
    "augment.scale_max",
    "augment.brightness",
    "augment.contrast",
    "augment.saturation",
    "augment.mosaic_prob",
    "augment.mosaic_center_jitter",
    "augment.mosaic_size",
    "acw.enabled",
    "acw.epsilon",
    "acw.iota",
    "train.mode",
    "train.max_iter",
    "train.batch_size",
    "train.lr0",
    "train.power",
    "train.warmup_iters",
    "train.weight_decay",
    "train.kernel_size",
    "tta.transforms",
    "post.multipliers",
    "post.renormalize",
    "eval.architecture",
    "eval.backbone",
    "eval.rare_classes",
];

const SYNTH_PREFIX: &str = "dataset.synth.";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub manifest: Option<PathBuf>,
    pub eval_manifest: Option<PathBuf>,
    pub class_set: ClassSet,
    /// Synthetic data spec (from `dataset.synth_spec` or inline
    /// `dataset.synth.*` keys).
    pub synth: SyntheticSpec,
    /// Held-out synthetic images generated for `ablate`.
    pub eval_images: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub architecture: String,
    pub backbone: String,
    /// Classes whose recall is averaged into "rare recall".
    pub rare_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub rcs: RcsConfig,
    pub augment: AugConfig,
    pub acw: AcwConfig,
    pub train: TrainConfig,
    pub tta: TtaConfig,
    pub post: PostProcessConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::from_kv(&KeyValues::default(), Path::new("")).expect("defaults are valid")
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_kv(&KeyValues::parse(&text)?, base)
    }

    pub fn parse(text: &str, base_dir: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KeyValues::parse(text)?, base_dir.as_ref())
    }

    /// Relative paths are resolved against `base`.
    pub fn from_kv(kv: &KeyValues, base: &Path) -> Result<Self> {
        let mut synth_kv = KeyValues::default();
        for k in kv.keys() {
            if let Some(rest) = k.strip_prefix(SYNTH_PREFIX) {
                synth_kv.set(rest, kv.raw(k).unwrap_or_default());
            } else if !KEYS.contains(&k) {
                return Err(Error::Config(format!("unknown config key {k:?}")));
            }
        }
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let class_set = match kv.get_list::<String>("dataset.classes")? {
            Some(names) => {
                let bg = match kv.raw("dataset.background") {
                    None => 0,
                    Some(b) => resolve_class(b, &names)?,
                };
                ClassSet::new(names, bg)?
            }
            None if kv.raw("dataset.background").is_some() => {
                return Err(Error::Config("dataset.background requires dataset.classes".into()));
            }
            None => ClassSet::default(),
        };

        let synth = match kv.get::<PathBuf>("dataset.synth_spec")? {
            Some(p) => {
                if synth_kv.keys().next().is_some() {
                    return Err(Error::Config("use either dataset.synth_spec or dataset.synth.* keys, not both".into()));
                }
                let p = resolve(p);
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                SyntheticSpec::parse(&text)?
            }
            None => {
                if synth_kv.raw("classes").is_none() {
                    synth_kv.set("classes", class_set.names().join(","));
                    synth_kv.set("background", class_set.background_id().to_string());
                }
                SyntheticSpec::from_kv(&synth_kv)?
            }
        };
        if synth.class_set != class_set {
            return Err(Error::Config(format!(
                "synthetic spec classes [{}] differ from dataset.classes [{}]",
                synth.class_set.names().join(","),
                class_set.names().join(",")
            )));
        }
        let dataset = DatasetConfig {
            manifest: kv.get::<PathBuf>("dataset.manifest")?.map(resolve),
            eval_manifest: kv.get::<PathBuf>("dataset.eval_manifest")?.map(resolve),
            eval_images: kv.get_or("dataset.eval_images", 16)?,
            class_set: class_set.clone(),
            synth,
        };
        if dataset.eval_images == 0 {
            return Err(Error::Config("dataset.eval_images must be at least 1".into()));
        }

        let d = RcsConfig::default();
        let rcs = RcsConfig {
            enabled: kv.get_bool("rcs.enabled", d.enabled)?,
            temperature: kv.get_or("rcs.temperature", d.temperature)?,
            min_pixels: kv.get_or("rcs.min_pixels", d.min_pixels)?,
            include_background: kv.get_bool("rcs.include_background", d.include_background)?,
        };
        rcs.validate()?;

        let d = AugConfig::default();
        let augment = AugConfig {
            crop_size: kv.get_or("augment.crop_size", d.crop_size)?,
            hflip_prob: kv.get_or("augment.hflip_prob", d.hflip_prob)?,
            vflip_prob: kv.get_or("augment.vflip_prob", d.vflip_prob)?,
            rotate_prob: kv.get_or("augment.rotate_prob", d.rotate_prob)?,
            scale_range: (
                kv.get_or("augment.scale_min", d.scale_range.0)?,
                kv.get_or("augment.scale_max", d.scale_range.1)?,
            ),
            jitter: JitterStrengths {
                brightness: kv.get_or("augment.brightness", d.jitter.brightness)?,
                contrast: kv.get_or("augment.contrast", d.jitter.contrast)?,
                saturation: kv.get_or("augment.saturation", d.jitter.saturation)?,
            },
            mosaic_prob: kv.get_or("augment.mosaic_prob", d.mosaic_prob)?,
            mosaic_center_jitter: kv.get_or("augment.mosaic_center_jitter", d.mosaic_center_jitter)?,
            mosaic_size: kv.get("augment.mosaic_size")?,
        };
        augment.validate()?;

        let d = AcwConfig::default();
        let acw = AcwConfig {
            enabled: kv.get_bool("acw.enabled", d.enabled)?,
            epsilon: kv.get_or("acw.epsilon", d.epsilon)?,
            iota: kv.get_or("acw.iota", d.iota)?,
        };
        acw.validate()?;

        let seed: u64 = kv.get_or("seed", 0)?;
        let d = match kv.raw("train.mode").unwrap_or("desk") {
            "desk" => TrainConfig::default(),
            "full" => TrainConfig::full_scale(),
            other => return Err(Error::Config(format!("train.mode must be desk or full, got {other:?}"))),
        };
        let max_iter = kv.get_or("train.max_iter", d.max_iter)?;
        let train = TrainConfig {
            max_iter,
            batch_size: kv.get_or("train.batch_size", d.batch_size)?,
            lr0: kv.get_or("train.lr0", d.lr0)?,
            power: kv.get_or("train.power", d.power)?,
            // 5% of the run unless set.
            warmup_iters: kv.get_or("train.warmup_iters", max_iter / 20)?,
            weight_decay: kv.get_or("train.weight_decay", d.weight_decay)?,
            kernel_size: kv.get_or("train.kernel_size", d.kernel_size)?,
            seed,
        };
        train.validate()?;

        let tta = match kv.raw("tta.transforms") {
            Some(s) => TtaConfig::parse(s)?,
            None => TtaConfig::default(),
        };
        let post = PostProcessConfig {
            multipliers: match kv.raw("post.multipliers") {
                Some(s) => PostProcessConfig::parse_multipliers(s, &class_set)?,
                None => PostProcessConfig::with_defaults(&class_set).multipliers,
            },
            renormalize: kv.get_bool("post.renormalize", true)?,
        };
        post.validate(class_set.num_classes())?;

        let rare_classes = match kv.get_list::<String>("eval.rare_classes")? {
            Some(list) => list
                .iter()
                .map(|s| resolve_class(s, class_set.names()))
                .collect::<Result<Vec<_>>>()?,
            None => class_set.foreground().collect(),
        };
        if rare_classes.is_empty() {
            return Err(Error::Config("eval.rare_classes must name at least one class".into()));
        }
        let eval = EvalConfig {
            architecture: kv.raw("eval.architecture").unwrap_or("ConvSoftmax").to_string(),
            backbone: kv
                .raw("eval.backbone")
                .map(str::to_string)
                .unwrap_or_else(|| format!("conv{0}x{0}", train.kernel_size)),
            rare_classes,
        };

        Ok(Self {
            seed,
            dataset,
            rcs,
            augment,
            acw,
            train,
            tta,
            post,
            eval,
        })
    }

    /// Replaces the root seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn train_setup(&self) -> TrainSetup {
        TrainSetup {
            train: self.train.clone(),
            augment: self.augment.clone(),
            rcs: self.rcs.clone(),
            acw: self.acw.clone(),
        }
    }

    pub fn class_set(&self) -> &ClassSet {
        &self.dataset.class_set
    }

    pub fn require_manifest(&self) -> Result<&Path> {
        self.dataset
            .manifest
            .as_deref()
            .ok_or_else(|| Error::Config("dataset.manifest is not set".into()))
    }
}

fn resolve_class(s: &str, names: &[String]) -> Result<usize> {
    let s = s.trim();
    if let Ok(id) = s.parse::<usize>() {
        if id < names.len() {
            return Ok(id);
        }
        return Err(Error::Config(format!("class id {id} out of range (C = {})", names.len())));
    }
    names
        .iter()
        .position(|n| n == s)
        .ok_or_else(|| Error::Config(format!("unknown class {s:?}")))
}
