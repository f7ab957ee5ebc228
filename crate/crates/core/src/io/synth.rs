//! Synthetic class-imbalanced RGB-NIR datasets of labeled blobs.
//!
//! Each foreground class is painted as elliptical blobs onto background
//! until its target pixel share is met. Pixel appearance is drawn from a
//! class-specific 4-channel Gaussian, with some classes deliberately close
//! to each other and to background.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::manifest::{SampleEntry, SampleManifest};
use super::png_io;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::rng::{self, Stream};
use crate::types::{ClassSet, InputImage, LabelMap, INPUT_CHANNELS};

/// Mean (R, G, B, NIR) per default class, background first.
const PALETTE: [[f64; 4]; 9] = [
    [0.45, 0.45, 0.40, 0.55],
    [0.20, 0.70, 0.25, 0.85],
    [0.80, 0.55, 0.25, 0.35],
    [0.55, 0.25, 0.65, 0.50],
    [0.75, 0.80, 0.30, 0.60],
    [0.70, 0.35, 0.20, 0.25],
    [0.15, 0.25, 0.70, 0.10],
    // Deliberately close to background and to slot 1 respectively.
    [0.35, 0.42, 0.52, 0.45],
    [0.25, 0.78, 0.18, 0.95],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub class_set: ClassSet,
    /// Target pixel share per class; sums to 1.
    pub shares: Vec<f64>,
    pub num_images: usize,
    pub height: usize,
    pub width: usize,
    /// Per-pixel appearance noise (standard deviation).
    pub noise: f64,
    /// Scales every class mean's offset from the background mean.
    pub separation: f64,
    /// Per-image brightness offset drawn uniformly from `[-j, j]`.
    pub illumination_jitter: f64,
    pub blob_min_radius: f64,
    pub blob_max_radius: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let class_set = ClassSet::default();
        let c = class_set.num_classes();
        let mut shares = vec![0.01; c];
        shares[class_set.background_id()] = 1.0 - 0.01 * (c - 1) as f64;
        Self {
            class_set,
            shares,
            num_images: 64,
            height: 64,
            width: 64,
            noise: 0.12,
            separation: 1.0,
            illumination_jitter: 0.05,
            blob_min_radius: 3.0,
            blob_max_radius: 10.0,
        }
    }
}

const SPEC_KEYS: &[&str] = &[
    "classes",
    "background",
    "shares",
    "num_images",
    "height",
    "width",
    "noise",
    "separation",
    "illumination_jitter",
    "blob_min_radius",
    "blob_max_radius",
];

impl SyntheticSpec {
    /// Builds a spec from `key=value` text; unspecified keys keep defaults.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        kv.reject_unknown(SPEC_KEYS)?;
        let mut spec = Self::default();
        if let Some(names) = kv.get_list::<String>("classes")? {
            let bg = kv.get_or("background", 0usize)?;
            spec.class_set = ClassSet::new(names, bg)?;
            let c = spec.class_set.num_classes();
            spec.shares = vec![0.01; c];
            spec.shares[bg] = 1.0 - 0.01 * (c - 1) as f64;
        } else if kv.raw("background").is_some() {
            return Err(Error::Config("background requires classes".into()));
        }
        if let Some(shares) = kv.get_list::<f64>("shares")? {
            spec.shares = shares;
        }
        spec.num_images = kv.get_or("num_images", spec.num_images)?;
        spec.height = kv.get_or("height", spec.height)?;
        spec.width = kv.get_or("width", spec.width)?;
        spec.noise = kv.get_or("noise", spec.noise)?;
        spec.separation = kv.get_or("separation", spec.separation)?;
        spec.illumination_jitter = kv.get_or("illumination_jitter", spec.illumination_jitter)?;
        spec.blob_min_radius = kv.get_or("blob_min_radius", spec.blob_min_radius)?;
        spec.blob_max_radius = kv.get_or("blob_max_radius", spec.blob_max_radius)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KeyValues::parse(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.class_set.num_classes();
        if self.shares.len() != c {
            return Err(Error::Config(format!("{} shares given for {c} classes", self.shares.len())));
        }
        if self.shares.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Config("shares must lie in [0, 1]".into()));
        }
        let sum: f64 = self.shares.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!("shares sum to {sum}, expected 1")));
        }
        if self.num_images == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::Config("num_images, height and width must be positive".into()));
        }
        if !(self.noise >= 0.0 && self.illumination_jitter >= 0.0 && self.separation.is_finite()) {
            return Err(Error::Config("noise and illumination_jitter must be non-negative".into()));
        }
        if !(self.blob_min_radius >= 0.5 && self.blob_min_radius <= self.blob_max_radius) {
            return Err(Error::Config("need 0.5 <= blob_min_radius <= blob_max_radius".into()));
        }
        Ok(())
    }

    /// Mean appearance of a class.
    pub fn class_mean(&self, class: usize) -> [f64; 4] {
        let bg = self.class_set.background_id();
        let base = PALETTE[0];
        let target = if class == bg {
            return base;
        } else {
            // Foreground classes map onto palette slots 1.. in index order.
            let slot = if class < bg { class + 1 } else { class };
            if slot < PALETTE.len() {
                PALETTE[slot]
            } else {
                let mut m = [0.0; 4];
                for (ch, v) in m.iter_mut().enumerate() {
                    let phase = (slot * 7 + ch * 3) as f64;
                    *v = base[ch] + 0.2 * phase.sin();
                }
                m
            }
        };
        let mut m = [0.0; 4];
        for ch in 0..4 {
            m[ch] = (base[ch] + self.separation * (target[ch] - base[ch])).clamp(0.0, 1.0);
        }
        m
    }
}

/// A generated dataset plus the pixel counts recorded while painting.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub manifest: SampleManifest,
    pub manifest_path: PathBuf,
    pub realized_counts: Vec<u64>,
}

impl SyntheticDataset {
    pub fn realized_shares(&self) -> Vec<f64> {
        let total: u64 = self.realized_counts.iter().sum();
        self.realized_counts.iter().map(|&n| n as f64 / total as f64).collect()
    }
}

/// In-memory generation; returns labels and images in sample order.
pub fn generate_samples(spec: &SyntheticSpec, seed: u64) -> Result<Vec<(LabelMap, InputImage)>> {
    spec.validate()?;
    let mut rng = rng::stream(seed, Stream::Synth);
    let (h, w, n) = (spec.height, spec.width, spec.num_images);
    let c = spec.class_set.num_classes();
    let bg = spec.class_set.background_id() as u8;
    let total = (n * h * w) as f64;

    let mut labels: Vec<Vec<u8>> = vec![vec![bg; h * w]; n];
    let targets: Vec<u64> = spec.shares.iter().map(|s| (s * total).round() as u64).collect();
    let mut realized = vec![0u64; c];
    let mut stalls = 0usize;

    loop {
        // Class with the largest relative deficit.
        let next = spec
            .class_set
            .foreground()
            .filter(|&k| realized[k] < targets[k])
            .max_by(|&a, &b| {
                let da = (targets[a] - realized[a]) as f64 / targets[a] as f64;
                let db = (targets[b] - realized[b]) as f64 / targets[b] as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            });
        let Some(class) = next else { break };
        let mut budget = targets[class] - realized[class];

        let img = rng.random_range(0..n);
        let rx = rng.random_range(spec.blob_min_radius..=spec.blob_max_radius);
        let ry = rng.random_range(spec.blob_min_radius..=spec.blob_max_radius);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let cy = rng.random_range(0.0..h as f64);
        let cx = rng.random_range(0.0..w as f64);
        let (sin, cos) = theta.sin_cos();
        let r = rx.max(ry).ceil() as isize;

        let mut painted = 0u64;
        let canvas = &mut labels[img];
        for y in (cy as isize - r).max(0)..(cy as isize + r + 1).min(h as isize) {
            for x in (cx as isize - r).max(0)..(cx as isize + r + 1).min(w as isize) {
                if budget == 0 {
                    break;
                }
                let (dy, dx) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
                let u = dx * cos + dy * sin;
                let v = -dx * sin + dy * cos;
                if (u / rx).powi(2) + (v / ry).powi(2) > 1.0 {
                    continue;
                }
                let idx = y as usize * w + x as usize;
                if canvas[idx] == bg {
                    canvas[idx] = class as u8;
                    painted += 1;
                    budget -= 1;
                }
            }
        }
        realized[class] += painted;
        if painted == 0 {
            stalls += 1;
            if stalls > 10_000 {
                return Err(Error::Config(
                    "cannot place requested foreground shares; canvas saturated".into(),
                ));
            }
        } else {
            stalls = 0;
        }
    }

    let means: Vec<[f64; 4]> = (0..c).map(|k| spec.class_mean(k)).collect();
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let plane = h * w;
    let mut out = Vec::with_capacity(n);
    for label in labels {
        let offset = if spec.illumination_jitter > 0.0 {
            rng.random_range(-spec.illumination_jitter..=spec.illumination_jitter)
        } else {
            0.0
        };
        let mut data = vec![0.0; INPUT_CHANNELS * plane];
        for (p, &l) in label.iter().enumerate() {
            let mean = &means[l as usize];
            for ch in 0..INPUT_CHANNELS {
                let v = mean[ch] + offset + noise.sample(&mut rng);
                // Quantize to the 8-bit grid the PNGs store.
                data[ch * plane + p] = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
            }
        }
        out.push((
            LabelMap::new(h, w, label)?,
            InputImage::new(h, w, data)?,
        ));
    }
    Ok(out)
}

/// Writes `rgb/`, `nir/`, `labels/` and `manifest.jsonl` under `out_dir`.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec, seed: u64, out_dir: impl AsRef<Path>) -> Result<SyntheticDataset> {
    let samples = generate_samples(spec, seed)?;
    let out_dir = out_dir.as_ref();
    for sub in ["rgb", "nir", "labels"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let c = spec.class_set.num_classes();
    let mut realized = vec![0u64; c];
    let mut entries = Vec::with_capacity(samples.len());
    for (i, (label, image)) in samples.iter().enumerate() {
        let id = format!("s{i:05}");
        let rel_rgb = PathBuf::from("rgb").join(format!("{id}.png"));
        let rel_nir = PathBuf::from("nir").join(format!("{id}.png"));
        let rel_label = PathBuf::from("labels").join(format!("{id}.png"));
        png_io::write_image(image, out_dir.join(&rel_rgb), out_dir.join(&rel_nir))?;
        png_io::write_label_map(label, out_dir.join(&rel_label))?;
        let counts = label.class_counts(c);
        for (r, k) in realized.iter_mut().zip(&counts) {
            *r += k;
        }
        entries.push(SampleEntry {
            id,
            image_rgb: rel_rgb,
            image_nir: rel_nir,
            label: rel_label,
            counts,
        });
    }
    let manifest = SampleManifest::new(entries, spec.class_set.clone(), out_dir)?;
    let manifest_path = out_dir.join("manifest.jsonl");
    manifest.save(&manifest_path)?;
    Ok(SyntheticDataset {
        manifest,
        manifest_path,
        realized_counts: realized,
    })
}
