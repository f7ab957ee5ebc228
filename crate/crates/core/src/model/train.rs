//! Training loop: batch assembly (uniform or rare-class sampling, then
//! augmentation), adaptive class weights from running counts, and SGD with
//! decoupled weight decay under the warm-up + poly schedule.

use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;

use super::conv::{backward_padded, forward_padded, ModelParams, PaddedInput};
use super::schedule::{poly_lr, TrainConfig};
use crate::acw::{class_weights, update_running_counts, weighted_ce_sum, AcwConfig, ClassWeights, RunningClassCounts};
use crate::augment::{apply_pipeline, AugConfig, Sample};
use crate::error::{Error, Result};
use crate::io::SampleManifest;
use crate::rcs::{RareClassSampler, RcsConfig};
use crate::rng::{self, Stream};
use crate::stats::count_pixels;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iter: usize,
    pub lr: f64,
    pub loss: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
}

impl TrainLog {
    /// `iter,lr,loss,w_0..w_{C-1}`; floats in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let c = self.records.first().map_or(0, |r| r.weights.len());
        let mut out = String::from("iter,lr,loss");
        for k in 0..c {
            out.push_str(&format!(",w_{k}"));
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!("{},{:e},{:e}", r.iter, r.lr, r.loss));
            for w in &r.weights {
                out.push_str(&format!(",{w:e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Everything that shapes a training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainSetup {
    pub train: TrainConfig,
    pub augment: AugConfig,
    pub rcs: RcsConfig,
    pub acw: AcwConfig,
}

impl TrainSetup {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.augment.validate()?;
        self.rcs.validate()?;
        self.acw.validate()
    }
}

pub fn load_samples(manifest: &SampleManifest) -> Result<Vec<Sample>> {
    (0..manifest.len())
        .into_par_iter()
        .map(|i| Sample::new(manifest.load_image(i)?, manifest.load_label(i)?))
        .collect()
}

/// Trains from a manifest (images are loaded into memory first).
pub fn train(setup: &TrainSetup, manifest: &SampleManifest) -> Result<(ModelParams, TrainLog)> {
    let samples = load_samples(manifest)?;
    train_on_samples(setup, manifest, &samples)
}

/// `samples[i]` must correspond to `manifest.entries()[i]`.
pub fn train_on_samples(setup: &TrainSetup, manifest: &SampleManifest, samples: &[Sample]) -> Result<(ModelParams, TrainLog)> {
    setup.validate()?;
    if manifest.is_empty() {
        return Err(Error::InvalidArgument("cannot train on an empty manifest".into()));
    }
    if samples.len() != manifest.len() {
        return Err(Error::DimMismatch(format!(
            "{} samples for {} manifest entries",
            samples.len(),
            manifest.len()
        )));
    }
    let cfg = &setup.train;
    let c = manifest.class_set().num_classes();
    let sampler = if setup.rcs.enabled {
        let stats = count_pixels(manifest)?;
        Some(RareClassSampler::new(manifest, &stats, &setup.rcs)?)
    } else {
        None
    };

    let seed = cfg.seed;
    let mut class_rng = rng::stream(seed, Stream::ClassDraw);
    let mut image_rng = rng::stream(seed, Stream::ImageDraw);
    let mut aug_rng = rng::stream(seed, Stream::Augment);

    let mut params = ModelParams::zeros(c, cfg.kernel_size)?;
    let mut counts = RunningClassCounts::new(c);
    let mut log = TrainLog::default();

    for iter in 0..cfg.max_iter {
        let lr = poly_lr(iter, cfg)?;
        let weights = if setup.acw.enabled {
            class_weights(&counts, setup.acw.epsilon, setup.acw.iota)
        } else {
            ClassWeights::uniform(c)
        };

        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let idx = match &sampler {
                Some(s) => s.draw(&mut class_rng, &mut image_rng).1,
                None => image_rng.random_range(0..samples.len()),
            };
            batch.push(apply_pipeline(&samples[idx], samples, &setup.augment, &mut aug_rng)?);
        }
        let valid: usize = batch.iter().map(|s| s.label.valid_count()).sum();
        if valid == 0 {
            return Err(Error::InvalidArgument(format!("iteration {iter}: batch has no valid pixels")));
        }
        let scale = 1.0 / valid as f64;

        // Per-sample work in parallel; reduction in fixed order.
        let parts: Vec<(f64, ModelParams)> = batch
            .par_iter()
            .map(|s| {
                let input = PaddedInput::new(&s.image, cfg.kernel_size);
                let logits = forward_padded(&params, &input);
                let mut g_logits = vec![0.0; logits.len()];
                let (sum, _) = weighted_ce_sum(&logits, &s.label, &weights, Some((&mut g_logits, scale)))?;
                let mut grad = ModelParams::zeros(c, cfg.kernel_size)?;
                backward_padded(&params, &input, &g_logits, &mut grad);
                Ok((sum, grad))
            })
            .collect::<Result<_>>()?;
        let mut loss = 0.0;
        let mut grad = ModelParams::zeros(c, cfg.kernel_size)?;
        for (sum, g) in &parts {
            loss += sum;
            for (a, b) in grad.kernel.iter_mut().zip(&g.kernel) {
                *a += b;
            }
            for (a, b) in grad.bias.iter_mut().zip(&g.bias) {
                *a += b;
            }
        }
        loss *= scale;

        let decay = 1.0 - lr * cfg.weight_decay;
        for (p, g) in params.kernel.iter_mut().zip(&grad.kernel) {
            *p = *p * decay - lr * g;
        }
        for (p, g) in params.bias.iter_mut().zip(&grad.bias) {
            *p = *p * decay - lr * g;
        }
        if !loss.is_finite() || params.kernel.iter().chain(&params.bias).any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("training diverged at iteration {iter} (lr {lr})")));
        }

        counts = update_running_counts(&counts, batch.iter().map(|s| &s.label));
        log.records.push(TrainRecord {
            iter,
            lr,
            loss,
            weights: weights.weights,
        });
    }
    Ok((params, log))
}
