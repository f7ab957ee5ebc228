//! 8-bit PNG codecs for label maps and the RGB / NIR image pairs.

use std::io::Cursor;
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use crate::error::{Error, Result};
use crate::types::{InputImage, LabelMap, IGNORE_LABEL, INPUT_CHANNELS};

/// Decoded-pixel budget for a single PNG.
const MAX_DECODE_BYTES: usize = 1 << 28;

/// Raw 8-bit raster: `channels` interleaved bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Png(e.to_string())
}

pub fn decode_raster(bytes: &[u8]) -> Result<Raster> {
    let mut decoder = png::Decoder::new_with_limits(
        Cursor::new(bytes),
        png::Limits {
            bytes: MAX_DECODE_BYTES,
        },
    );
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let info = reader.info();
    if info.bit_depth != BitDepth::Eight {
        return Err(Error::Png(format!(
            "expected 8-bit samples, got {:?}",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        ColorType::Grayscale => 1,
        ColorType::Rgb => 3,
        other => return Err(Error::Png(format!("unsupported color type {other:?}"))),
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .filter(|&n| n <= MAX_DECODE_BYTES)
        .ok_or_else(|| Error::Png(format!("{width}x{height} image exceeds the decode budget")))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    buf.truncate(frame.buffer_size());
    let row = width * channels;
    let data = if frame.line_size == row {
        buf
    } else {
        buf.chunks(frame.line_size)
            .flat_map(|line| &line[..row])
            .copied()
            .collect()
    };
    if data.len() != row * height {
        return Err(Error::Png("decoded size mismatch".into()));
    }
    Ok(Raster {
        height,
        width,
        channels,
        data,
    })
}

pub fn encode_raster(raster: &Raster) -> Result<Vec<u8>> {
    let color = match raster.channels {
        1 => ColorType::Grayscale,
        3 => ColorType::Rgb,
        n => return Err(Error::InvalidArgument(format!("cannot encode {n}-channel PNG"))),
    };
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, raster.width as u32, raster.height as u32);
        enc.set_color(color);
        enc.set_depth(BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&raster.data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Decodes a label PNG. Value 255 marks an invalid pixel; any other value
/// must be below `num_classes`.
pub fn decode_label_map(bytes: &[u8], num_classes: usize) -> Result<LabelMap> {
    let raster = decode_raster(bytes)?;
    if raster.channels != 1 {
        return Err(Error::Png(format!(
            "label map must be single-channel, got {} channels",
            raster.channels
        )));
    }
    let mut labels = raster.data;
    let mut valid = Vec::new();
    if labels.contains(&IGNORE_LABEL) {
        valid = labels.iter().map(|&l| l != IGNORE_LABEL).collect();
    }
    for (i, l) in labels.iter_mut().enumerate() {
        if *l == IGNORE_LABEL {
            *l = 0;
        } else if *l as usize >= num_classes {
            return Err(Error::LabelOutOfRange {
                value: *l,
                num_classes,
                x: i % raster.width,
                y: i / raster.width,
            });
        }
    }
    if valid.is_empty() {
        LabelMap::new(raster.height, raster.width, labels)
    } else {
        LabelMap::with_mask(raster.height, raster.width, labels, valid)
    }
}

pub fn encode_label_map(labels: &LabelMap) -> Result<Vec<u8>> {
    let data = labels
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| if labels.is_valid(i) { l } else { IGNORE_LABEL })
        .collect();
    encode_raster(&Raster {
        height: labels.height(),
        width: labels.width(),
        channels: 1,
        data,
    })
}

pub fn read_label_map(path: impl AsRef<Path>, num_classes: usize) -> Result<LabelMap> {
    let path = path.as_ref();
    decode_label_map(&read_file(path)?, num_classes).map_err(|e| match e {
        Error::Png(msg) => Error::Png(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_label_map(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_label_map(labels)?)
}

fn read_raster(path: &Path, channels: usize) -> Result<Raster> {
    let raster = decode_raster(&read_file(path)?)
        .map_err(|e| Error::Png(format!("{}: {e}", path.display())))?;
    if raster.channels != channels {
        return Err(Error::Png(format!(
            "{}: expected {channels} channel(s), got {}",
            path.display(),
            raster.channels
        )));
    }
    Ok(raster)
}

/// Stacks RGB and NIR rasters into a 4-channel image scaled to `[0, 1]`.
pub fn concat_rgbnir(rgb: &Raster, nir: &Raster) -> Result<InputImage> {
    if rgb.channels != 3 || nir.channels != 1 {
        return Err(Error::DimMismatch(format!(
            "expected 3-channel RGB and 1-channel NIR, got {} and {}",
            rgb.channels, nir.channels
        )));
    }
    if (rgb.height, rgb.width) != (nir.height, nir.width) {
        return Err(Error::DimMismatch(format!(
            "RGB is {}x{} but NIR is {}x{}",
            rgb.width, rgb.height, nir.width, nir.height
        )));
    }
    let plane = rgb.height * rgb.width;
    let mut data = vec![0.0; INPUT_CHANNELS * plane];
    for p in 0..plane {
        for c in 0..3 {
            data[c * plane + p] = rgb.data[3 * p + c] as f64 / 255.0;
        }
        data[3 * plane + p] = nir.data[p] as f64 / 255.0;
    }
    Ok(InputImage::from_parts_unchecked(rgb.height, rgb.width, data))
}

/// Real-valued variant of [`concat_rgbnir`]: `rgb` is channel-major `3xHxW`,
/// values already in `[0, 1]`.
pub fn concat_rgbnir_f64(height: usize, width: usize, rgb: &[f64], nir: &[f64]) -> Result<InputImage> {
    let plane = height * width;
    if rgb.len() != 3 * plane || nir.len() != plane {
        return Err(Error::DimMismatch(format!(
            "RGB has {} values and NIR {} for a {width}x{height} image",
            rgb.len(),
            nir.len()
        )));
    }
    let mut data = Vec::with_capacity(4 * plane);
    data.extend_from_slice(rgb);
    data.extend_from_slice(nir);
    InputImage::new(height, width, data)
}

pub fn read_image(rgb_path: impl AsRef<Path>, nir_path: impl AsRef<Path>) -> Result<InputImage> {
    let rgb = read_raster(rgb_path.as_ref(), 3)?;
    let nir = read_raster(nir_path.as_ref(), 1)?;
    concat_rgbnir(&rgb, &nir)
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes the image as an 8-bit RGB PNG plus an 8-bit NIR PNG.
pub fn write_image(image: &InputImage, rgb_path: impl AsRef<Path>, nir_path: impl AsRef<Path>) -> Result<()> {
    let plane = image.height() * image.width();
    let mut rgb = Vec::with_capacity(3 * plane);
    for p in 0..plane {
        for c in 0..3 {
            rgb.push(quantize(image.data()[c * plane + p]));
        }
    }
    let nir = image.plane(3).iter().map(|&v| quantize(v)).collect();
    let (height, width) = (image.height(), image.width());
    write_file(
        rgb_path.as_ref(),
        &encode_raster(&Raster {
            height,
            width,
            channels: 3,
            data: rgb,
        })?,
    )?;
    write_file(
        nir_path.as_ref(),
        &encode_raster(&Raster {
            height,
            width,
            channels: 1,
            data: nir,
        })?,
    )
}
