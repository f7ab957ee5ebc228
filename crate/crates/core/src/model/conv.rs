//! Single-convolution softmax pixel classifier.

use crate::error::{Error, Result};
use crate::types::{InputImage, ProbMap, INPUT_CHANNELS};

/// `kernel` is `C x 4 x k x k` (row-major), `bias` has `C` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    num_classes: usize,
    kernel_size: usize,
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(num_classes: usize, kernel_size: usize) -> Result<Self> {
        Self::new(
            num_classes,
            kernel_size,
            vec![0.0; num_classes * INPUT_CHANNELS * kernel_size * kernel_size],
            vec![0.0; num_classes],
        )
    }

    pub fn new(num_classes: usize, kernel_size: usize, kernel: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("kernel size must be odd, got {kernel_size}")));
        }
        if num_classes == 0 {
            return Err(Error::InvalidArgument("model needs at least one class".into()));
        }
        if kernel.len() != num_classes * INPUT_CHANNELS * kernel_size * kernel_size || bias.len() != num_classes {
            return Err(Error::DimMismatch(format!(
                "kernel has {} and bias {} entries for C={num_classes}, k={kernel_size}",
                kernel.len(),
                bias.len()
            )));
        }
        if kernel.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters must be finite".into()));
        }
        Ok(Self {
            num_classes,
            kernel_size,
            kernel,
            bias,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn kernel_index(&self, class: usize, channel: usize, dy: usize, dx: usize) -> usize {
        let k = self.kernel_size;
        ((class * INPUT_CHANNELS + channel) * k + dy) * k + dx
    }

    pub fn num_params(&self) -> usize {
        self.kernel.len() + self.bias.len()
    }
}

/// Reflect-padding index (edge pixel not repeated), valid for any offset.
pub fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// An input image with each channel reflect-padded by `k / 2`.
#[derive(Debug, Clone)]
pub struct PaddedInput {
    height: usize,
    width: usize,
    pad: usize,
    data: Vec<f64>,
}

impl PaddedInput {
    pub fn new(image: &InputImage, kernel_size: usize) -> Self {
        let (h, w) = (image.height(), image.width());
        let pad = kernel_size / 2;
        let (ph, pw) = (h + 2 * pad, w + 2 * pad);
        let mut data = Vec::with_capacity(INPUT_CHANNELS * ph * pw);
        for ch in 0..INPUT_CHANNELS {
            let plane = image.plane(ch);
            for y in 0..ph {
                let sy = reflect(y as isize - pad as isize, h);
                for x in 0..pw {
                    let sx = reflect(x as isize - pad as isize, w);
                    data.push(plane[sy * w + sx]);
                }
            }
        }
        Self {
            height: h,
            width: w,
            pad,
            data,
        }
    }

    fn row(&self, ch: usize, y: usize, x0: usize) -> &[f64] {
        let pw = self.width + 2 * self.pad;
        let ph = self.height + 2 * self.pad;
        let start = (ch * ph + y) * pw + x0;
        &self.data[start..start + self.width]
    }
}

/// Logits `C x H x W`: cross-correlation of the reflect-padded input with
/// each class kernel, plus bias.
pub fn forward(params: &ModelParams, image: &InputImage) -> Vec<f64> {
    forward_padded(params, &PaddedInput::new(image, params.kernel_size))
}

pub fn forward_padded(params: &ModelParams, input: &PaddedInput) -> Vec<f64> {
    let (h, w, k) = (input.height, input.width, params.kernel_size);
    let n = h * w;
    let mut out = vec![0.0; params.num_classes * n];
    for c in 0..params.num_classes {
        let plane = &mut out[c * n..(c + 1) * n];
        plane.fill(params.bias[c]);
        for ch in 0..INPUT_CHANNELS {
            for dy in 0..k {
                for dx in 0..k {
                    let kv = params.kernel[params.kernel_index(c, ch, dy, dx)];
                    if kv == 0.0 {
                        continue;
                    }
                    for y in 0..h {
                        let src = input.row(ch, y + dy, dx);
                        for (o, s) in plane[y * w..(y + 1) * w].iter_mut().zip(src) {
                            *o += kv * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates parameter gradients given `d(loss)/d(logits)`.
pub fn backward_padded(params: &ModelParams, input: &PaddedInput, grad_logits: &[f64], grad: &mut ModelParams) {
    let (h, w, k) = (input.height, input.width, params.kernel_size);
    let n = h * w;
    debug_assert_eq!(grad_logits.len(), params.num_classes * n);
    for c in 0..params.num_classes {
        let g = &grad_logits[c * n..(c + 1) * n];
        grad.bias[c] += g.iter().sum::<f64>();
        for ch in 0..INPUT_CHANNELS {
            for dy in 0..k {
                for dx in 0..k {
                    let mut acc = 0.0;
                    for y in 0..h {
                        let src = input.row(ch, y + dy, dx);
                        acc += g[y * w..(y + 1) * w].iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                    }
                    let idx = params.kernel_index(c, ch, dy, dx);
                    grad.kernel[idx] += acc;
                }
            }
        }
    }
}

/// Per-pixel softmax of channel-major logits.
pub fn softmax(logits: &[f64], channels: usize, height: usize, width: usize) -> ProbMap {
    let n = height * width;
    let mut data = logits.to_vec();
    for p in 0..n {
        let max = (0..channels).map(|c| data[c * n + p]).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for c in 0..channels {
            let e = (data[c * n + p] - max).exp();
            data[c * n + p] = e;
            z += e;
        }
        for c in 0..channels {
            data[c * n + p] /= z;
        }
    }
    ProbMap::from_parts_unchecked(channels, height, width, data, true)
}

pub fn predict(params: &ModelParams, image: &InputImage) -> ProbMap {
    let logits = forward(params, image);
    softmax(&logits, params.num_classes, image.height(), image.width())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::types::argmax_map;
    use rand::Rng as _;

    fn random_image(rng: &mut impl rand::Rng, h: usize, w: usize) -> InputImage {
        InputImage::new(h, w, (0..4 * h * w).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    fn random_params(rng: &mut impl rand::Rng, c: usize, k: usize) -> ModelParams {
        let kernel = (0..c * 4 * k * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bias = (0..c).map(|_| rng.random_range(-1.0..1.0)).collect();
        ModelParams::new(c, k, kernel, bias).unwrap()
    }

    /// Direct nested-loop convolution with explicit reflect indexing.
    fn naive_forward(p: &ModelParams, img: &InputImage) -> Vec<f64> {
        let (h, w, k) = (img.height(), img.width(), p.kernel_size());
        let r = (k / 2) as isize;
        let mut out = vec![0.0; p.num_classes() * h * w];
        for c in 0..p.num_classes() {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = p.bias[c];
                    for ch in 0..4 {
                        for dy in 0..k {
                            for dx in 0..k {
                                let sy = reflect(y as isize + dy as isize - r, h);
                                let sx = reflect(x as isize + dx as isize - r, w);
                                acc += p.kernel[p.kernel_index(c, ch, dy, dx)] * img.get(ch, sy, sx);
                            }
                        }
                    }
                    out[(c * h + y) * w + x] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(-3, 2), 1);
        assert_eq!(reflect(4, 1), 0);
    }

    #[test]
    fn zero_kernel_gives_bias_planes() {
        let mut rng = substream(0, 0);
        let mut p = ModelParams::zeros(3, 5).unwrap();
        p.bias = vec![0.5, -1.0, 2.0];
        let img = random_image(&mut rng, 4, 6);
        let out = forward(&p, &img);
        for c in 0..3 {
            assert!(out[c * 24..(c + 1) * 24].iter().all(|&v| v == p.bias[c]));
        }
    }

    #[test]
    fn one_by_one_kernel_is_pixelwise_linear() {
        let mut rng = substream(1, 0);
        let p = random_params(&mut rng, 2, 1);
        let img = random_image(&mut rng, 3, 3);
        let out = forward(&p, &img);
        for c in 0..2 {
            for y in 0..3 {
                for x in 0..3 {
                    let expected: f64 = p.bias[c] + (0..4).map(|ch| p.kernel[c * 4 + ch] * img.get(ch, y, x)).sum::<f64>();
                    assert!((out[(c * 3 + y) * 3 + x] - expected).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let mut rng = substream(2, 0);
        for k in [1, 3, 5] {
            for _ in 0..5 {
                let p = random_params(&mut rng, 3, k);
                let img = random_image(&mut rng, 8, 8);
                let fast = forward(&p, &img);
                let slow = naive_forward(&p, &img);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences_of_linear_objective() {
        let mut rng = substream(3, 0);
        let p = random_params(&mut rng, 2, 3);
        let img = random_image(&mut rng, 5, 4);
        let upstream: Vec<f64> = (0..2 * 20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objective = |q: &ModelParams| forward(q, &img).iter().zip(&upstream).map(|(a, b)| a * b).sum::<f64>();
        let mut grad = ModelParams::zeros(2, 3).unwrap();
        backward_padded(&p, &PaddedInput::new(&img, 3), &upstream, &mut grad);
        for i in 0..p.kernel.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus.kernel[i] += 1e-5;
            minus.kernel[i] -= 1e-5;
            let fd = (objective(&plus) - objective(&minus)) / 2e-5;
            assert!((fd - grad.kernel[i]).abs() < 1e-8 * fd.abs().max(1.0));
        }
        let bias_sum: f64 = upstream[..20].iter().sum();
        assert!((grad.bias[0] - bias_sum).abs() < 1e-12);
    }

    #[test]
    fn predict_properties() {
        let mut rng = substream(4, 0);
        let img = random_image(&mut rng, 4, 4);
        let zero = predict(&ModelParams::zeros(4, 5).unwrap(), &img);
        assert!(zero.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));

        let p = random_params(&mut rng, 5, 5);
        let probs = predict(&p, &img);
        assert!(probs.is_normalized());
        for px in 0..16 {
            let s: f64 = (0..5).map(|c| probs.data()[c * 16 + px]).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let logits = forward(&p, &img);
        let shifted: Vec<f64> = logits.iter().map(|v| v + 100.0).collect();
        let as_map = ProbMap::new(5, 4, 4, shifted).unwrap();
        assert_eq!(argmax_map(&probs).unwrap(), argmax_map(&as_map).unwrap());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ModelParams::zeros(2, 4).is_err());
        assert!(ModelParams::new(2, 1, vec![0.0; 7], vec![0.0; 2]).is_err());
        assert!(ModelParams::new(2, 1, vec![f64::NAN; 8], vec![0.0; 2]).is_err());
    }
}
