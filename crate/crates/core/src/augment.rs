//! Training-time augmentation: 2x2 mosaic, random resize-crop, flips,
//! right-angle rotations and color jitter. Every geometric op moves image,
//! labels and validity mask with the same pixel mapping.

use crate::error::{Error, Result};
use crate::types::{InputImage, LabelMap, INPUT_CHANNELS};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: InputImage,
    pub label: LabelMap,
}

impl Sample {
    pub fn new(image: InputImage, label: LabelMap) -> Result<Self> {
        if (image.height(), image.width()) != (label.height(), label.width()) {
            return Err(Error::DimMismatch(format!(
                "image is {}x{} but label is {}x{}",
                image.width(),
                image.height(),
                label.width(),
                label.height()
            )));
        }
        Ok(Self { image, label })
    }

    pub fn height(&self) -> usize {
        self.label.height()
    }

    pub fn width(&self) -> usize {
        self.label.width()
    }

    fn from_planes(height: usize, width: usize, image: Vec<f64>, labels: Vec<u8>, mask: Option<Vec<bool>>) -> Self {
        let image = InputImage::from_parts_unchecked(height, width, image);
        let label = match mask {
            Some(m) => LabelMap::with_mask(height, width, labels, m),
            None => LabelMap::new(height, width, labels),
        }
        .expect("plane sizes agree");
        Self { image, label }
    }

    /// Applies one pixel remapping to every plane. `src(y, x)` gives the
    /// source coordinate for output pixel `(y, x)`.
    fn remap(&self, out_h: usize, out_w: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> Self {
        let (h, w) = (self.height(), self.width());
        let n = out_h * out_w;
        let mut index = Vec::with_capacity(n);
        for y in 0..out_h {
            for x in 0..out_w {
                let (sy, sx) = src(y, x);
                index.push(sy * w + sx);
            }
        }
        let plane = h * w;
        let data = self.image.data();
        let mut image = Vec::with_capacity(INPUT_CHANNELS * n);
        for ch in 0..INPUT_CHANNELS {
            image.extend(index.iter().map(|&i| data[ch * plane + i]));
        }
        let labels = index.iter().map(|&i| self.label.labels()[i]).collect();
        let mask = self.label.mask().map(|m| index.iter().map(|&i| m[i]).collect());
        Self::from_planes(out_h, out_w, image, labels, mask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterStrengths {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl JitterStrengths {
    pub const NONE: Self = Self {
        brightness: 0.0,
        contrast: 0.0,
        saturation: 0.0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugConfig {
    pub crop_size: usize,
    pub hflip_prob: f64,
    pub vflip_prob: f64,
    pub rotate_prob: f64,
    pub scale_range: (f64, f64),
    pub jitter: JitterStrengths,
    pub mosaic_prob: f64,
    pub mosaic_center_jitter: f64,
    /// Mosaic canvas side; `None` uses the first tile's shorter side.
    pub mosaic_size: Option<usize>,
}

impl Default for AugConfig {
    fn default() -> Self {
        Self {
            crop_size: 512,
            hflip_prob: 0.5,
            vflip_prob: 0.5,
            rotate_prob: 0.5,
            scale_range: (0.5, 2.0),
            jitter: JitterStrengths {
                brightness: 0.2,
                contrast: 0.2,
                saturation: 0.2,
            },
            mosaic_prob: 0.5,
            mosaic_center_jitter: 0.25,
            mosaic_size: None,
        }
    }
}

impl AugConfig {
    /// Only the resize-crop stage, at scale 1.
    pub fn crop_only(crop_size: usize) -> Self {
        Self {
            crop_size,
            hflip_prob: 0.0,
            vflip_prob: 0.0,
            rotate_prob: 0.0,
            scale_range: (1.0, 1.0),
            jitter: JitterStrengths::NONE,
            mosaic_prob: 0.0,
            mosaic_center_jitter: 0.25,
            mosaic_size: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("flip_prob", self.hflip_prob),
            ("vflip_prob", self.vflip_prob),
            ("rotate_prob", self.rotate_prob),
            ("mosaic_prob", self.mosaic_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("augment.{name} must be in [0, 1], got {p}")));
            }
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("augment scale range ({lo}, {hi}) needs 0 < lo <= hi")));
        }
        if self.crop_size < 2 {
            return Err(Error::Config("augment.crop_size must be at least 2".into()));
        }
        let j = self.jitter;
        if [j.brightness, j.contrast, j.saturation].iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("jitter strengths must be non-negative".into()));
        }
        if !(0.0..=0.5).contains(&self.mosaic_center_jitter) {
            return Err(Error::Config("augment.mosaic_center_jitter must be in [0, 0.5]".into()));
        }
        if self.mosaic_size.is_some_and(|s| s < 2) {
            return Err(Error::Config("augment.mosaic_size must be at least 2".into()));
        }
        Ok(())
    }
}

pub fn hflip(s: &Sample) -> Sample {
    let w = s.width();
    s.remap(s.height(), w, |y, x| (y, w - 1 - x))
}

pub fn vflip(s: &Sample) -> Sample {
    let h = s.height();
    s.remap(h, s.width(), |y, x| (h - 1 - y, x))
}

/// Clockwise rotation by `k * 90` degrees of a square sample.
pub fn rot90(s: &Sample, k: usize) -> Result<Sample> {
    let k = k % 4;
    if k == 0 {
        return Ok(s.clone());
    }
    let n = s.height();
    if s.width() != n {
        return Err(Error::DimMismatch(format!(
            "rotation needs a square sample, got {}x{}",
            s.width(),
            n
        )));
    }
    Ok(match k {
        1 => s.remap(n, n, |y, x| (n - 1 - x, y)),
        2 => s.remap(n, n, |y, x| (n - 1 - y, n - 1 - x)),
        _ => s.remap(n, n, |y, x| (x, n - 1 - y)),
    })
}

pub fn random_hflip(s: &Sample, rng: &mut impl rand::Rng, p: f64) -> Sample {
    if rng.random::<f64>() < p {
        hflip(s)
    } else {
        s.clone()
    }
}

pub fn random_vflip(s: &Sample, rng: &mut impl rand::Rng, p: f64) -> Sample {
    if rng.random::<f64>() < p {
        vflip(s)
    } else {
        s.clone()
    }
}

pub fn random_rot90(s: &Sample, rng: &mut impl rand::Rng, p: f64) -> Result<Sample> {
    if rng.random::<f64>() < p {
        let k = rng.random_range(1..=3);
        rot90(s, k)
    } else {
        Ok(s.clone())
    }
}

/// Bilinear for the image, nearest-neighbor for labels and mask.
pub fn resize(s: &Sample, out_h: usize, out_w: usize) -> Sample {
    let (h, w) = (s.height(), s.width());
    if (out_h, out_w) == (h, w) {
        return s.clone();
    }
    let nearest = s.remap(out_h, out_w, |y, x| {
        (
            (((y as f64 + 0.5) * h as f64 / out_h as f64) as usize).min(h - 1),
            (((x as f64 + 0.5) * w as f64 / out_w as f64) as usize).min(w - 1),
        )
    });
    let src_coord = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let v = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = v.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, v - lo as f64)
    };
    let ys: Vec<_> = (0..out_h).map(|y| src_coord(y, h, out_h)).collect();
    let xs: Vec<_> = (0..out_w).map(|x| src_coord(x, w, out_w)).collect();
    let mut image = Vec::with_capacity(INPUT_CHANNELS * out_h * out_w);
    for ch in 0..INPUT_CHANNELS {
        let p = s.image.plane(ch);
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
                let bottom = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
                image.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
            }
        }
    }
    Sample {
        image: InputImage::from_parts_unchecked(out_h, out_w, image),
        label: nearest.label,
    }
}

pub fn crop(s: &Sample, y0: usize, x0: usize, h: usize, w: usize) -> Result<Sample> {
    if y0 + h > s.height() || x0 + w > s.width() {
        return Err(Error::DimMismatch(format!(
            "crop {w}x{h} at ({x0}, {y0}) exceeds {}x{} source",
            s.width(),
            s.height()
        )));
    }
    Ok(s.remap(h, w, |y, x| (y0 + y, x0 + x)))
}

/// Scales by `scale` and crops a `crop_size` square at `(y0, x0)` of the
/// scaled sample.
pub fn resize_crop(s: &Sample, scale: f64, y0: usize, x0: usize, crop_size: usize) -> Result<Sample> {
    let (nh, nw) = scaled_dims(s, scale);
    if nh < crop_size || nw < crop_size {
        return Err(Error::DimMismatch(format!(
            "scaled size {nw}x{nh} is smaller than crop {crop_size}"
        )));
    }
    crop(&resize(s, nh, nw), y0, x0, crop_size, crop_size)
}

fn scaled_dims(s: &Sample, scale: f64) -> (usize, usize) {
    (
        ((s.height() as f64 * scale).round() as usize).max(1),
        ((s.width() as f64 * scale).round() as usize).max(1),
    )
}

pub fn random_resize_crop(s: &Sample, rng: &mut impl rand::Rng, scale_range: (f64, f64), crop_size: usize) -> Result<Sample> {
    let (lo, hi) = scale_range;
    let scale = if lo < hi { rng.random_range(lo..=hi) } else { lo };
    let (nh, nw) = scaled_dims(s, scale);
    if nh < crop_size || nw < crop_size {
        return Err(Error::DimMismatch(format!(
            "scaled size {nw}x{nh} (scale {scale:.3}) is smaller than crop {crop_size}"
        )));
    }
    let y0 = rng.random_range(0..=nh - crop_size);
    let x0 = rng.random_range(0..=nw - crop_size);
    crop(&resize(s, nh, nw), y0, x0, crop_size, crop_size)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterFactors {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

/// Brightness and contrast act on all four channels; saturation only on
/// RGB. Values are clamped to `[0, 1]` after each step.
pub fn apply_jitter(s: &Sample, f: JitterFactors) -> Sample {
    let plane = s.height() * s.width();
    let mut data = s.image.data().to_vec();
    if f.brightness != 1.0 {
        data.iter_mut().for_each(|v| *v = (*v * f.brightness).clamp(0.0, 1.0));
    }
    if f.contrast != 1.0 && plane > 0 {
        for ch in 0..INPUT_CHANNELS {
            let p = &mut data[ch * plane..(ch + 1) * plane];
            let mean = p.iter().sum::<f64>() / plane as f64;
            p.iter_mut()
                .for_each(|v| *v = ((*v - mean) * f.contrast + mean).clamp(0.0, 1.0));
        }
    }
    if f.saturation != 1.0 {
        for i in 0..plane {
            let (r, g, b) = (data[i], data[plane + i], data[2 * plane + i]);
            let gray = 0.299 * r + 0.587 * g + 0.114 * b;
            for ch in 0..3 {
                let v = &mut data[ch * plane + i];
                *v = (gray + (*v - gray) * f.saturation).clamp(0.0, 1.0);
            }
        }
    }
    Sample {
        image: InputImage::from_parts_unchecked(s.height(), s.width(), data),
        label: s.label.clone(),
    }
}

pub fn color_jitter(s: &Sample, rng: &mut impl rand::Rng, strengths: JitterStrengths) -> Sample {
    let mut factor = |strength: f64| {
        if strength > 0.0 {
            rng.random_range((1.0 - strength).max(0.0)..=1.0 + strength)
        } else {
            1.0
        }
    };
    let f = JitterFactors {
        brightness: factor(strengths.brightness),
        contrast: factor(strengths.contrast),
        saturation: factor(strengths.saturation),
    };
    apply_jitter(s, f)
}

/// Where each mosaic tile is cut from its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MosaicLayout {
    pub out_size: usize,
    /// Center point `(cy, cx)`; quadrants are `[0, cy) x [0, cx)` etc.
    pub center: (usize, usize),
    /// Top-left crop offset `(y, x)` in each source, in tile order
    /// top-left, top-right, bottom-left, bottom-right.
    pub offsets: [(usize, usize); 4],
}

impl MosaicLayout {
    /// Quadrant sizes `(h, w)` in tile order.
    pub fn quadrants(&self) -> [(usize, usize); 4] {
        let (cy, cx) = self.center;
        let s = self.out_size;
        [(cy, cx), (cy, s - cx), (s - cy, cx), (s - cy, s - cx)]
    }

    pub fn random(samples: [&Sample; 4], out_size: usize, center_jitter: f64, rng: &mut impl rand::Rng) -> Result<Self> {
        let mut axis = || {
            let f = if center_jitter > 0.0 {
                rng.random_range(0.5 - center_jitter..=0.5 + center_jitter)
            } else {
                0.5
            };
            ((f * out_size as f64).round() as usize).min(out_size)
        };
        let center = (axis(), axis());
        let mut layout = Self {
            out_size,
            center,
            offsets: [(0, 0); 4],
        };
        let quads = layout.quadrants();
        for (t, (s, (qh, qw))) in samples.iter().zip(quads).enumerate() {
            if s.height() < qh || s.width() < qw {
                return Err(Error::DimMismatch(format!(
                    "mosaic tile {t} is {}x{}, smaller than its {qw}x{qh} quadrant",
                    s.width(),
                    s.height()
                )));
            }
            layout.offsets[t] = (
                rng.random_range(0..=s.height() - qh),
                rng.random_range(0..=s.width() - qw),
            );
        }
        Ok(layout)
    }
}

/// Composes four samples into one `out_size` square following `layout`.
pub fn mosaic_with(samples: [&Sample; 4], layout: &MosaicLayout) -> Result<Sample> {
    let s = layout.out_size;
    let (cy, cx) = layout.center;
    if cy > s || cx > s {
        return Err(Error::InvalidArgument(format!("mosaic center ({cy}, {cx}) outside {s}x{s}")));
    }
    let quads = layout.quadrants();
    let origins = [(0, 0), (0, cx), (cy, 0), (cy, cx)];
    let any_mask = samples.iter().any(|t| t.label.mask().is_some());
    let n = s * s;
    let mut image = vec![0.0; INPUT_CHANNELS * n];
    let mut labels = vec![0u8; n];
    let mut mask = vec![true; n];
    for t in 0..4 {
        let (qh, qw) = quads[t];
        let (oy, ox) = layout.offsets[t];
        let src = samples[t];
        if oy + qh > src.height() || ox + qw > src.width() {
            return Err(Error::DimMismatch(format!(
                "mosaic tile {t} ({}x{}) cannot supply a {qw}x{qh} crop at ({ox}, {oy})",
                src.width(),
                src.height()
            )));
        }
        let (sh, sw) = (src.height(), src.width());
        let (dy, dx) = origins[t];
        for y in 0..qh {
            for x in 0..qw {
                let si = (oy + y) * sw + ox + x;
                let di = (dy + y) * s + dx + x;
                for ch in 0..INPUT_CHANNELS {
                    image[ch * n + di] = src.image.data()[ch * sh * sw + si];
                }
                labels[di] = src.label.labels()[si];
                mask[di] = src.label.is_valid(si);
            }
        }
    }
    Ok(Sample::from_planes(s, s, image, labels, any_mask.then_some(mask)))
}

pub fn mosaic(samples: [&Sample; 4], out_size: usize, center_jitter: f64, rng: &mut impl rand::Rng) -> Result<Sample> {
    let layout = MosaicLayout::random(samples, out_size, center_jitter, rng)?;
    mosaic_with(samples, &layout)
}

/// Full training pipeline for one drawn sample: optional mosaic (the drawn
/// sample is the top-left tile, the other three are drawn uniformly from
/// `pool`), then resize-crop, horizontal flip, vertical flip, rotation and
/// color jitter.
pub fn apply_pipeline(first: &Sample, pool: &[Sample], config: &AugConfig, rng: &mut impl rand::Rng) -> Result<Sample> {
    let mut s = if config.mosaic_prob > 0.0 && !pool.is_empty() && rng.random::<f64>() < config.mosaic_prob {
        let picks: [usize; 3] = std::array::from_fn(|_| rng.random_range(0..pool.len()));
        let out = config
            .mosaic_size
            .unwrap_or_else(|| first.height().min(first.width()));
        mosaic(
            [first, &pool[picks[0]], &pool[picks[1]], &pool[picks[2]]],
            out,
            config.mosaic_center_jitter,
            rng,
        )?
    } else {
        first.clone()
    };
    s = random_resize_crop(&s, rng, config.scale_range, config.crop_size)?;
    if config.hflip_prob > 0.0 {
        s = random_hflip(&s, rng, config.hflip_prob);
    }
    if config.vflip_prob > 0.0 {
        s = random_vflip(&s, rng, config.vflip_prob);
    }
    if config.rotate_prob > 0.0 {
        s = random_rot90(&s, rng, config.rotate_prob)?;
    }
    if config.jitter != JitterStrengths::NONE {
        s = color_jitter(&s, rng, config.jitter);
    }
    Ok(s)
}
