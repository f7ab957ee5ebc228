//! Rare-class sampling.
//!
//! A class is drawn from a temperature softmax over `1 - f_c` (rarer classes
//! get more mass), then a training sample containing at least `min_pixels`
//! pixels of that class is drawn uniformly.

use log::warn;

use crate::error::{Error, Result};
use crate::io::SampleManifest;
use crate::stats::ClassStats;

#[derive(Debug, Clone, PartialEq)]
pub struct RcsConfig {
    pub enabled: bool,
    pub temperature: f64,
    pub min_pixels: u64,
    pub include_background: bool,
}

impl Default for RcsConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            temperature: 0.01,
            min_pixels: 1000,
            include_background: false,
        }
    }
}

impl RcsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "rcs.temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.min_pixels == 0 {
            return Err(Error::Config("rcs.min_pixels must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub probs: Vec<f64>,
    pub temperature: f64,
}

/// `P(c) ∝ exp((1 - f_c) / T)` over included classes; background gets 0
/// unless `include_background`.
pub fn rcs_distribution(
    frequencies: &[f64],
    background_id: usize,
    temperature: f64,
    include_background: bool,
) -> Result<ClassDistribution> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if frequencies.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidArgument("frequencies must lie in [0, 1]".into()));
    }
    let included: Vec<bool> = (0..frequencies.len())
        .map(|c| include_background || c != background_id)
        .collect();
    let max_exp = frequencies
        .iter()
        .zip(&included)
        .filter(|(_, &inc)| inc)
        .map(|(f, _)| (1.0 - f) / temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_exp == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("all classes excluded from sampling".into()));
    }
    let mut probs: Vec<f64> = frequencies
        .iter()
        .zip(&included)
        .map(|(f, &inc)| {
            if inc {
                ((1.0 - f) / temperature - max_exp).exp()
            } else {
                0.0
            }
        })
        .collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    Ok(ClassDistribution { probs, temperature })
}

pub fn rcs_distribution_from_stats(stats: &ClassStats, background_id: usize, config: &RcsConfig) -> Result<ClassDistribution> {
    rcs_distribution(&stats.frequencies, background_id, config.temperature, config.include_background)
}

/// Inverse-CDF draw; classes with zero probability are never returned.
pub fn sample_class(dist: &ClassDistribution, rng: &mut impl rand::Rng) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (c, &p) in dist.probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        last = c;
        if u < cum {
            return c;
        }
    }
    last
}

/// Per-class lists of manifest positions whose sample holds at least
/// `min_pixels` pixels of the class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassImageIndex {
    pub lists: Vec<Vec<usize>>,
    pub min_pixels: u64,
}

pub fn build_class_index(manifest: &SampleManifest, min_pixels: u64) -> Result<ClassImageIndex> {
    if min_pixels == 0 {
        return Err(Error::InvalidArgument("min_pixels must be at least 1".into()));
    }
    let c = manifest.class_set().num_classes();
    let mut lists = vec![Vec::new(); c];
    for (i, e) in manifest.entries().iter().enumerate() {
        for (k, &n) in e.counts.iter().enumerate() {
            if n >= min_pixels {
                lists[k].push(i);
            }
        }
    }
    Ok(ClassImageIndex { lists, min_pixels })
}

impl ClassImageIndex {
    pub fn empty_classes(&self) -> Vec<usize> {
        (0..self.lists.len()).filter(|&c| self.lists[c].is_empty()).collect()
    }
}

/// Uniform draw of a manifest position from `index.lists[class]`.
pub fn sample_image_for_class(index: &ClassImageIndex, class: usize, class_name: &str, rng: &mut impl rand::Rng) -> Result<usize> {
    let list = index.lists.get(class).filter(|l| !l.is_empty()).ok_or_else(|| Error::EmptyClass {
        class,
        name: class_name.to_string(),
    })?;
    Ok(list[rng.random_range(0..list.len())])
}

/// Class draw followed by image draw, with the redraw fallback for classes
/// that have no qualifying samples.
#[derive(Debug, Clone)]
pub struct RareClassSampler {
    pub distribution: ClassDistribution,
    pub index: ClassImageIndex,
    names: Vec<String>,
    num_samples: usize,
}

const MAX_REDRAWS: usize = 64;

impl RareClassSampler {
    pub fn new(manifest: &SampleManifest, stats: &ClassStats, config: &RcsConfig) -> Result<Self> {
        config.validate()?;
        let cs = manifest.class_set();
        let distribution = rcs_distribution_from_stats(stats, cs.background_id(), config)?;
        let index = build_class_index(manifest, config.min_pixels)?;
        for c in index.empty_classes() {
            if distribution.probs[c] > 0.0 {
                warn!(
                    "class {c} ({}) has no sample with >= {} pixels; draws of it will be redrawn",
                    cs.name(c),
                    config.min_pixels
                );
            }
        }
        Ok(Self {
            distribution,
            index,
            names: cs.names().to_vec(),
            num_samples: manifest.len(),
        })
    }

    /// Returns `(class, manifest position)`; `class` is `None` when the
    /// draw fell back to uniform sampling.
    pub fn draw(&self, class_rng: &mut impl rand::Rng, image_rng: &mut impl rand::Rng) -> (Option<usize>, usize) {
        for _ in 0..MAX_REDRAWS {
            let c = sample_class(&self.distribution, class_rng);
            match sample_image_for_class(&self.index, c, &self.names[c], image_rng) {
                Ok(i) => return (Some(c), i),
                Err(_) => continue,
            }
        }
        warn!("no rare-class draw succeeded after {MAX_REDRAWS} attempts; sampling uniformly");
        (None, image_rng.random_range(0..self.num_samples))
    }
}
