//! Learning-rate schedule: linear warm-up, then poly decay
//! `lr0 * (1 - iter / max_iter)^power`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_iter: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub power: f64,
    pub warmup_iters: usize,
    pub weight_decay: f64,
    pub kernel_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// Desk-scale defaults for the toy classifier.
    fn default() -> Self {
        Self {
            max_iter: 2000,
            batch_size: 8,
            lr0: 0.1,
            power: 0.9,
            warmup_iters: 100,
            weight_decay: 0.01,
            kernel_size: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Full-scale hyper-parameters (AdamW replaced by SGD here).
    pub fn full_scale() -> Self {
        Self {
            max_iter: 160_000,
            batch_size: 16,
            lr0: 6e-6,
            power: 0.9,
            warmup_iters: 8_000,
            weight_decay: 0.01,
            kernel_size: 5,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("train.max_iter must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return Err(Error::Config(format!("train.power must be positive, got {}", self.power)));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("train.lr0 must be positive, got {}", self.lr0)));
        }
        if self.warmup_iters >= self.max_iter {
            return Err(Error::Config(format!(
                "train.warmup_iters ({}) must be below max_iter ({})",
                self.warmup_iters, self.max_iter
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("train.weight_decay must be >= 0".into()));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::Config(format!("train.kernel_size must be odd, got {}", self.kernel_size)));
        }
        Ok(())
    }
}

pub fn poly_lr(iter: usize, config: &TrainConfig) -> Result<f64> {
    if iter > config.max_iter {
        return Err(Error::InvalidArgument(format!(
            "iteration {iter} beyond max_iter {}",
            config.max_iter
        )));
    }
    let poly = |i: usize| config.lr0 * (1.0 - i as f64 / config.max_iter as f64).powf(config.power);
    if iter < config.warmup_iters {
        // Ramp to the poly value at the junction rather than to lr0, so the
        // hand-off to decay has no jump.
        return Ok(poly(config.warmup_iters) * (iter + 1) as f64 / config.warmup_iters as f64);
    }
    Ok(poly(iter))
}
