//! Adaptive class-weighted cross-entropy.
//!
//! Weights come from the pixel counts of every class seen so far in
//! training: `f_c = (n_c + eps) / (N + C eps)`, `raw_c = 1 / ln(1 + iota + f_c)`,
//! rescaled so the weights sum to `C`.

use crate::error::{Error, Result};
use crate::types::LabelMap;

pub const DEFAULT_IOTA: f64 = 0.05;
pub const DEFAULT_EPSILON: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AcwConfig {
    pub enabled: bool,
    pub epsilon: f64,
    pub iota: f64,
}

impl Default for AcwConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            epsilon: DEFAULT_EPSILON,
            iota: DEFAULT_IOTA,
        }
    }
}

impl AcwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("acw.epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.iota > 0.0 && self.iota.is_finite()) {
            return Err(Error::Config(format!("acw.iota must be > 0, got {}", self.iota)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunningClassCounts {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl RunningClassCounts {
    pub fn new(num_classes: usize) -> Self {
        Self {
            counts: vec![0; num_classes],
            total: 0,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }
}

/// Adds the valid-pixel class counts of a batch.
pub fn update_running_counts<'a>(
    counts: &RunningClassCounts,
    batch_labels: impl IntoIterator<Item = &'a LabelMap>,
) -> RunningClassCounts {
    let mut next = counts.clone();
    let c = next.num_classes();
    for label in batch_labels {
        for (acc, n) in next.counts.iter_mut().zip(label.class_counts(c)) {
            *acc += n;
            next.total += n;
        }
    }
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    pub weights: Vec<f64>,
    /// No pixels had been counted; weights are uniform.
    pub cold_start: bool,
}

impl ClassWeights {
    pub fn uniform(num_classes: usize) -> Self {
        Self {
            weights: vec![1.0; num_classes],
            cold_start: false,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }
}

pub fn class_weights(counts: &RunningClassCounts, epsilon: f64, iota: f64) -> ClassWeights {
    let c = counts.num_classes();
    if counts.total == 0 {
        return ClassWeights {
            weights: vec![1.0; c],
            cold_start: true,
        };
    }
    let denom = counts.total as f64 + c as f64 * epsilon;
    let raw: Vec<f64> = counts
        .counts
        .iter()
        .map(|&n| 1.0 / (1.0 + iota + (n as f64 + epsilon) / denom).ln())
        .collect();
    let sum: f64 = raw.iter().sum();
    ClassWeights {
        weights: raw.iter().map(|r| c as f64 * r / sum).collect(),
        cold_start: false,
    }
}

fn check_dims(logits: &[f64], labels: &LabelMap, weights: &ClassWeights) -> Result<usize> {
    let c = weights.num_classes();
    if logits.len() != c * labels.len() {
        return Err(Error::DimMismatch(format!(
            "{} logits for {c} classes x {} pixels",
            logits.len(),
            labels.len()
        )));
    }
    labels.validate(c)?;
    Ok(c)
}

/// Weighted sum (not mean) of per-pixel cross-entropy, and the number of
/// valid pixels. If `grad` is given, `scale * d(sum)/d(logits)` is added
/// into it.
pub fn weighted_ce_sum(
    logits: &[f64],
    labels: &LabelMap,
    weights: &ClassWeights,
    mut grad: Option<(&mut [f64], f64)>,
) -> Result<(f64, usize)> {
    let c = check_dims(logits, labels, weights)?;
    let n = labels.len();
    if let Some((g, _)) = &grad {
        if g.len() != logits.len() {
            return Err(Error::DimMismatch("gradient buffer size".into()));
        }
    }
    let mut total = 0.0;
    let mut valid = 0usize;
    let mut probs = vec![0.0; c];
    for p in 0..n {
        if !labels.is_valid(p) {
            continue;
        }
        valid += 1;
        let y = labels.labels()[p] as usize;
        let max = (0..c).map(|k| logits[k * n + p]).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for k in 0..c {
            probs[k] = (logits[k * n + p] - max).exp();
            z += probs[k];
        }
        let w = weights.weights[y];
        total += w * (z.ln() - (logits[y * n + p] - max));
        if let Some((g, scale)) = grad.as_mut() {
            for k in 0..c {
                let target = if k == y { 1.0 } else { 0.0 };
                g[k * n + p] += *scale * w * (probs[k] / z - target);
            }
        }
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("loss overflowed".into()));
    }
    Ok((total, valid))
}

/// Mean weighted cross-entropy over valid pixels.
pub fn weighted_ce_loss(logits: &[f64], labels: &LabelMap, weights: &ClassWeights) -> Result<f64> {
    let (sum, valid) = weighted_ce_sum(logits, labels, weights, None)?;
    if valid == 0 {
        return Err(Error::InvalidArgument("no valid pixels".into()));
    }
    Ok(sum / valid as f64)
}

/// Gradient of [`weighted_ce_loss`] with respect to the logits.
pub fn loss_gradient(logits: &[f64], labels: &LabelMap, weights: &ClassWeights) -> Result<Vec<f64>> {
    let valid = labels.valid_count();
    if valid == 0 {
        return Err(Error::InvalidArgument("no valid pixels".into()));
    }
    let mut grad = vec![0.0; logits.len()];
    weighted_ce_sum(logits, labels, weights, Some((&mut grad, 1.0 / valid as f64)))?;
    Ok(grad)
}
