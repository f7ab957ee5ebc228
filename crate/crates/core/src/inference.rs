//! Inference: flip test-time augmentation, arithmetic-mean ensembling and
//! per-class probability rescaling before the final argmax.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{write_label_map, write_prob_map};
use crate::model::{predict, ModelParams};
use crate::types::{normalize, ClassSet, InputImage, LabelMap, ProbMap, INPUT_CHANNELS};

pub const DEFAULT_BACKGROUND_MULTIPLIER: f64 = 0.95;
pub const DEFAULT_FOREGROUND_MULTIPLIER: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PostProcessConfig {
    pub multipliers: Vec<f64>,
    pub renormalize: bool,
}

impl PostProcessConfig {
    /// Background x0.95, every other class x2.0.
    pub fn with_defaults(class_set: &ClassSet) -> Self {
        Self::split(class_set, DEFAULT_BACKGROUND_MULTIPLIER, DEFAULT_FOREGROUND_MULTIPLIER)
    }

    pub fn split(class_set: &ClassSet, background: f64, foreground: f64) -> Self {
        let multipliers = (0..class_set.num_classes())
            .map(|c| if c == class_set.background_id() { background } else { foreground })
            .collect();
        Self {
            multipliers,
            renormalize: true,
        }
    }

    pub fn neutral(num_classes: usize) -> Self {
        Self {
            multipliers: vec![1.0; num_classes],
            renormalize: true,
        }
    }

    pub fn is_neutral(&self) -> bool {
        self.multipliers.iter().all(|&m| m == 1.0)
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.multipliers.len() != num_classes {
            return Err(Error::Config(format!(
                "{} post-process multipliers for {num_classes} classes",
                self.multipliers.len()
            )));
        }
        if let Some(m) = self.multipliers.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::Config(format!("post-process multiplier {m} must be finite and > 0")));
        }
        Ok(())
    }

    /// Parses `bg=0.95,fg=2.0`, per-class `0=0.95,3=2.0` (ids or names), or
    /// `none`. Group keys are applied first, then per-class overrides, on
    /// top of the defaults.
    pub fn parse_multipliers(spec: &str, class_set: &ClassSet) -> Result<Vec<f64>> {
        let spec = spec.trim();
        let c = class_set.num_classes();
        if spec.eq_ignore_ascii_case("none") || spec.eq_ignore_ascii_case("neutral") {
            return Ok(vec![1.0; c]);
        }
        let mut bg = DEFAULT_BACKGROUND_MULTIPLIER;
        let mut fg = DEFAULT_FOREGROUND_MULTIPLIER;
        let mut overrides: Vec<Option<f64>> = vec![None; c];
        let mut seen_group = [false; 2];
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("multiplier entry {item:?} is not key=value")))?;
            let (key, value) = (key.trim(), value.trim());
            let v: f64 = value
                .parse()
                .map_err(|_| Error::Config(format!("multiplier {value:?} for {key:?} is not a number")))?;
            let slot = match key {
                "bg" => {
                    if std::mem::replace(&mut seen_group[0], true) {
                        return Err(Error::Config("bg multiplier given twice".into()));
                    }
                    bg = v;
                    continue;
                }
                "fg" => {
                    if std::mem::replace(&mut seen_group[1], true) {
                        return Err(Error::Config("fg multiplier given twice".into()));
                    }
                    fg = v;
                    continue;
                }
                _ => match key.parse::<usize>() {
                    Ok(id) if id < c => id,
                    Ok(id) => return Err(Error::Config(format!("class id {id} out of range (C = {c})"))),
                    Err(_) => class_set
                        .index_of(key)
                        .ok_or_else(|| Error::Config(format!("unknown class {key:?} in multipliers")))?,
                },
            };
            if overrides[slot].replace(v).is_some() {
                return Err(Error::Config(format!("multiplier for class {key} given twice")));
            }
        }
        let mut out = Self::split(class_set, bg, fg).multipliers;
        for (m, o) in out.iter_mut().zip(overrides) {
            if let Some(v) = o {
                *m = v;
            }
        }
        let cfg = Self {
            multipliers: out,
            renormalize: true,
        };
        cfg.validate(c)?;
        Ok(cfg.multipliers)
    }
}

/// Axis flips; each is its own inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TtaTransform {
    Identity,
    HFlip,
    VFlip,
    HvFlip,
}

impl TtaTransform {
    pub const ALL: [TtaTransform; 4] = [Self::Identity, Self::HFlip, Self::VFlip, Self::HvFlip];

    fn flips(self) -> (bool, bool) {
        match self {
            Self::Identity => (false, false),
            Self::HFlip => (true, false),
            Self::VFlip => (false, true),
            Self::HvFlip => (true, true),
        }
    }

    pub fn inverse(self) -> Self {
        self
    }

    pub fn apply_image(self, image: &InputImage) -> InputImage {
        let (h, w) = (image.height(), image.width());
        InputImage::from_parts_unchecked(h, w, flip_planes(image.data(), INPUT_CHANNELS, h, w, self.flips()))
    }

    pub fn apply_probs(self, probs: &ProbMap) -> ProbMap {
        let (c, h, w) = (probs.channels(), probs.height(), probs.width());
        ProbMap::from_parts_unchecked(c, h, w, flip_planes(probs.data(), c, h, w, self.flips()), probs.is_normalized())
    }
}

impl fmt::Display for TtaTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::HFlip => "hflip",
            Self::VFlip => "vflip",
            Self::HvFlip => "hvflip",
        })
    }
}

impl FromStr for TtaTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(Self::Identity),
            "hflip" => Ok(Self::HFlip),
            "vflip" => Ok(Self::VFlip),
            "hvflip" => Ok(Self::HvFlip),
            other => Err(Error::Config(format!("unknown TTA transform {other:?}"))),
        }
    }
}

fn flip_planes(data: &[f64], planes: usize, h: usize, w: usize, (hf, vf): (bool, bool)) -> Vec<f64> {
    if !hf && !vf {
        return data.to_vec();
    }
    let mut out = vec![0.0; data.len()];
    for c in 0..planes {
        let base = c * h * w;
        for y in 0..h {
            let sy = if vf { h - 1 - y } else { y };
            for x in 0..w {
                let sx = if hf { w - 1 - x } else { x };
                out[base + y * w + x] = data[base + sy * w + sx];
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TtaConfig {
    pub transforms: Vec<TtaTransform>,
}

impl Default for TtaConfig {
    fn default() -> Self {
        Self {
            transforms: TtaTransform::ALL.to_vec(),
        }
    }
}

impl TtaConfig {
    pub fn identity() -> Self {
        Self {
            transforms: vec![TtaTransform::Identity],
        }
    }

    /// Comma list of transform names, `all`, or `none` (identity only).
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let cfg = match spec {
            "all" => Self::default(),
            "none" => Self::identity(),
            _ => {
                let mut transforms = Vec::new();
                for t in spec.split(',').filter(|s| !s.trim().is_empty()) {
                    let t: TtaTransform = t.parse()?;
                    if transforms.contains(&t) {
                        return Err(Error::Config(format!("TTA transform {t} listed twice")));
                    }
                    transforms.push(t);
                }
                Self { transforms }
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.transforms.contains(&TtaTransform::Identity) {
            return Err(Error::Config("TTA set must include identity".into()));
        }
        Ok(())
    }
}

impl fmt::Display for TtaConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.transforms.iter().map(|t| t.to_string()).collect();
        f.write_str(&names.join(","))
    }
}

pub fn tta_predict(params: &ModelParams, image: &InputImage, tta: &TtaConfig) -> Result<ProbMap> {
    tta.validate()?;
    let maps: Vec<ProbMap> = tta
        .transforms
        .iter()
        .map(|t| t.inverse().apply_probs(&predict(params, &t.apply_image(image))))
        .collect();
    ensemble_mean(&maps)
}

/// Element-wise mean. Values are summed in sorted order and clamped to the
/// input range, so the result does not depend on map order and K copies of
/// one map reproduce it exactly.
pub fn ensemble_mean(maps: &[ProbMap]) -> Result<ProbMap> {
    let first = maps.first().ok_or_else(|| Error::InvalidArgument("ensemble of zero maps".into()))?;
    for (i, m) in maps.iter().enumerate() {
        if !m.same_shape(first) {
            return Err(Error::DimMismatch(format!(
                "ensemble member {i} is {}x{}x{}, expected {}x{}x{}",
                m.channels(),
                m.height(),
                m.width(),
                first.channels(),
                first.height(),
                first.width()
            )));
        }
        if !m.is_normalized() {
            return Err(Error::InvalidArgument(format!("ensemble member {i} is not normalized")));
        }
    }
    if maps.len() == 1 {
        return Ok(first.clone());
    }
    let k = maps.len() as f64;
    let mut buf = vec![0.0; maps.len()];
    let data: Vec<f64> = (0..first.data().len())
        .map(|i| {
            for (b, m) in buf.iter_mut().zip(maps) {
                *b = m.data()[i];
            }
            buf.sort_by(f64::total_cmp);
            let mean = buf.iter().sum::<f64>() / k;
            mean.clamp(buf[0], buf[buf.len() - 1])
        })
        .collect();
    Ok(ProbMap::from_parts_unchecked(
        first.channels(),
        first.height(),
        first.width(),
        data,
        true,
    ))
}

fn scale_channels(probs: &ProbMap, multipliers: &[f64]) -> Result<ProbMap> {
    if multipliers.len() != probs.channels() {
        return Err(Error::DimMismatch(format!(
            "{} multipliers for {} channels",
            multipliers.len(),
            probs.channels()
        )));
    }
    let plane = probs.height() * probs.width();
    let mut data = probs.data().to_vec();
    for (c, chunk) in data.chunks_mut(plane.max(1)).enumerate().take(probs.channels()) {
        for v in chunk {
            *v *= multipliers[c];
        }
    }
    ProbMap::new(probs.channels(), probs.height(), probs.width(), data)
}

pub fn postprocess(probs: &ProbMap, config: &PostProcessConfig) -> Result<ProbMap> {
    Ok(postprocess_with_labels(probs, config)?.0)
}

/// Rescaled map plus the argmax decision taken on the scaled values.
pub fn postprocess_with_labels(probs: &ProbMap, config: &PostProcessConfig) -> Result<(ProbMap, LabelMap)> {
    config.validate(probs.channels())?;
    let scaled = scale_channels(probs, &config.multipliers)?;
    let labels = scaled.argmax()?;
    let out = if config.renormalize { normalize(&scaled)? } else { scaled };
    Ok((out, labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub id: String,
    /// Ensemble mean before post-processing.
    pub probs: ProbMap,
    pub labels: LabelMap,
}

/// Where to write results: `<id>.png` label maps and, optionally,
/// `<id>.segp` ensemble probabilities.
#[derive(Debug, Clone)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub write_probs: bool,
}

pub fn run_single(
    image: &InputImage,
    models: &[ModelParams],
    tta: &TtaConfig,
    post: &PostProcessConfig,
) -> Result<(ProbMap, LabelMap)> {
    let maps = models.iter().map(|m| tta_predict(m, image, tta)).collect::<Result<Vec<_>>>()?;
    let mean = ensemble_mean(&maps)?;
    let (_, labels) = postprocess_with_labels(&mean, post)?;
    Ok((mean, labels))
}

pub fn run_pipeline(
    images: &[(String, InputImage)],
    models: &[ModelParams],
    tta: &TtaConfig,
    post: &PostProcessConfig,
    out: Option<&OutputSpec>,
) -> Result<Vec<PipelineOutput>> {
    let first = models.first().ok_or_else(|| Error::InvalidArgument("no models given".into()))?;
    if let Some(m) = models.iter().find(|m| m.num_classes() != first.num_classes()) {
        return Err(Error::DimMismatch(format!(
            "models disagree on class count ({} vs {})",
            first.num_classes(),
            m.num_classes()
        )));
    }
    tta.validate()?;
    post.validate(first.num_classes())?;
    let results: Vec<PipelineOutput> = images
        .par_iter()
        .map(|(id, image)| {
            let (probs, labels) = run_single(image, models, tta, post)?;
            Ok(PipelineOutput {
                id: id.clone(),
                probs,
                labels,
            })
        })
        .collect::<Result<_>>()?;
    if let Some(spec) = out {
        write_outputs(&results, spec)?;
    }
    Ok(results)
}

fn write_outputs(results: &[PipelineOutput], spec: &OutputSpec) -> Result<()> {
    std::fs::create_dir_all(&spec.dir).map_err(|e| Error::io(&spec.dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let outcome = (|| {
        for r in results {
            let png = spec.dir.join(format!("{}.png", r.id));
            written.push(png.clone());
            write_label_map(&r.labels, &png)?;
            if spec.write_probs {
                let segp = spec.dir.join(format!("{}.segp", r.id));
                written.push(segp.clone());
                write_prob_map(&r.probs, &segp)?;
            }
        }
        Ok(())
    })();
    if outcome.is_err() {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
    }
    outcome
}

/// Label PNG and SEGP paths for one image id.
pub fn output_paths(dir: &Path, id: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{id}.png")), dir.join(format!("{id}.segp")))
}
