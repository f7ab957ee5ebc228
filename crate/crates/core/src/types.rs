//! Shared domain types: class sets, label maps, probability maps and
//! four-channel input images. All pixel arrays are row-major; multi-channel
//! arrays are channel-major (`C x H x W`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label value marking a pixel as invalid in label PNGs.
pub const IGNORE_LABEL: u8 = 255;

/// Largest number of classes representable next to [`IGNORE_LABEL`].
pub const MAX_CLASSES: usize = 254;

/// Number of input channels (R, G, B, NIR).
pub const INPUT_CHANNELS: usize = 4;

const DEFAULT_NAMES: [&str; 9] = ["BG", "DP", "DR", "EN", "ND", "PS", "WA", "WW", "WC"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    names: Vec<String>,
    background_id: usize,
}

impl ClassSet {
    pub fn new(names: Vec<String>, background_id: usize) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::Config(format!(
                "class set needs at least 2 classes, got {}",
                names.len()
            )));
        }
        if names.len() > MAX_CLASSES {
            return Err(Error::Config(format!(
                "class set has {} classes, at most {MAX_CLASSES} supported",
                names.len()
            )));
        }
        if background_id >= names.len() {
            return Err(Error::Config(format!(
                "background id {background_id} out of range for {} classes",
                names.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Config(format!("duplicate class name {n:?}")));
            }
        }
        Ok(Self {
            names,
            background_id,
        })
    }

    /// `C` anonymous classes named by index, background 0.
    pub fn numbered(num_classes: usize) -> Result<Self> {
        Self::new((0..num_classes).map(|i| i.to_string()).collect(), 0)
    }

    pub fn num_classes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, class: usize) -> &str {
        &self.names[class]
    }

    pub fn background_id(&self) -> usize {
        self.background_id
    }

    pub fn foreground(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_classes()).filter(move |&c| c != self.background_id)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

impl Default for ClassSet {
    /// The nine Agriculture-Vision classes with background first.
    fn default() -> Self {
        Self {
            names: DEFAULT_NAMES.iter().map(|s| s.to_string()).collect(),
            background_id: 0,
        }
    }
}

/// Per-pixel class indices with an optional validity mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u8>,
    valid: Option<Vec<bool>>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::DimMismatch(format!(
                "label buffer has {} entries, expected {height}x{width}",
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
            valid: None,
        })
    }

    pub fn with_mask(height: usize, width: usize, labels: Vec<u8>, valid: Vec<bool>) -> Result<Self> {
        let mut map = Self::new(height, width, labels)?;
        if valid.len() != height * width {
            return Err(Error::DimMismatch(format!(
                "mask has {} entries, expected {height}x{width}",
                valid.len()
            )));
        }
        map.valid = Some(valid);
        Ok(map)
    }

    pub fn filled(height: usize, width: usize, class: u8) -> Self {
        Self {
            height,
            width,
            labels: vec![class; height * width],
            valid: None,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.valid.as_deref()
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// False where the mask says so or the label is the ignore value.
    pub fn is_valid(&self, idx: usize) -> bool {
        self.labels[idx] != IGNORE_LABEL && self.valid.as_ref().is_none_or(|v| v[idx])
    }

    pub fn valid_count(&self) -> usize {
        (0..self.labels.len()).filter(|&i| self.is_valid(i)).count()
    }

    /// Checks that every valid label lies in `[0, num_classes)`.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        for (i, &l) in self.labels.iter().enumerate() {
            if self.is_valid(i) && l as usize >= num_classes {
                return Err(Error::LabelOutOfRange {
                    value: l,
                    num_classes,
                    x: i % self.width,
                    y: i / self.width,
                });
            }
        }
        Ok(())
    }

    /// Valid-pixel count per class; labels `>= num_classes` are ignored.
    pub fn class_counts(&self, num_classes: usize) -> Vec<u64> {
        let mut counts = vec![0u64; num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            if self.is_valid(i) && (l as usize) < num_classes {
                counts[l as usize] += 1;
            }
        }
        counts
    }

    pub fn into_parts(self) -> (usize, usize, Vec<u8>, Option<Vec<bool>>) {
        (self.height, self.width, self.labels, self.valid)
    }
}

/// Per-pixel class probabilities, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
    normalized: bool,
}

impl ProbMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::DimMismatch(format!(
                "probability buffer has {} entries, expected {channels}x{height}x{width}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite(format!(
                "probability entry {i} is {} (must be finite and non-negative)",
                data[i]
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
            normalized: false,
        })
    }

    /// Builds a map and checks that every pixel sums to one within 1e-5.
    pub fn new_normalized(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let mut map = Self::new(channels, height, width, data)?;
        let plane = height * width;
        for p in 0..plane {
            let s: f64 = (0..channels).map(|c| map.data[c * plane + p]).sum();
            if (s - 1.0).abs() > 1e-5 {
                return Err(Error::Numeric(format!(
                    "pixel (x={}, y={}) sums to {s}, not 1",
                    p % width,
                    p / width
                )));
            }
        }
        map.normalized = true;
        Ok(map)
    }

    pub(crate) fn from_parts_unchecked(
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
        normalized: bool,
    ) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        Self {
            channels,
            height,
            width,
            data,
            normalized,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, other: &ProbMap) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    /// Per-pixel argmax; ties go to the smallest class index.
    pub fn argmax(&self) -> Result<LabelMap> {
        argmax_map(self)
    }
}

/// Four-channel (R, G, B, NIR) image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl InputImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != INPUT_CHANNELS * height * width {
            return Err(Error::DimMismatch(format!(
                "image buffer has {} entries, expected 4x{height}x{width}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::NonFinite(format!(
                "image entry {i} is {} (must be in [0, 1])",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub(crate) fn from_parts_unchecked(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), INPUT_CHANNELS * height * width);
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

pub fn argmax_map(probs: &ProbMap) -> Result<LabelMap> {
    if let Some(i) = probs.data.iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite(format!("NaN probability at entry {i}")));
    }
    let plane = probs.height * probs.width;
    let labels = (0..plane)
        .map(|p| {
            let mut best = 0usize;
            let mut best_v = probs.data[p];
            for c in 1..probs.channels {
                let v = probs.data[c * plane + p];
                if v > best_v {
                    best = c;
                    best_v = v;
                }
            }
            best as u8
        })
        .collect();
    LabelMap::new(probs.height, probs.width, labels)
}

/// Divides each pixel's channel vector by its sum.
pub fn normalize(probs: &ProbMap) -> Result<ProbMap> {
    let plane = probs.height * probs.width;
    let mut data = probs.data.clone();
    for p in 0..plane {
        let s: f64 = (0..probs.channels).map(|c| data[c * plane + p]).sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::ZeroSum {
                x: p % probs.width,
                y: p / probs.width,
            });
        }
        for c in 0..probs.channels {
            data[c * plane + p] /= s;
        }
    }
    Ok(ProbMap::from_parts_unchecked(
        probs.channels,
        probs.height,
        probs.width,
        data,
        true,
    ))
}
