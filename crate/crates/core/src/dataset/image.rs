use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Model input height in pixels.
pub const IMAGE_HEIGHT: usize = 180;
/// Model input width in pixels.
pub const IMAGE_WIDTH: usize = 300;

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Decodes a raster, converts it to luma, resizes it to 180×300 and scales
/// it to `[0, 1]`.
pub fn load_image(path: &Path) -> Result<Tensor<f32>> {
    let ingest = |reason: String| Error::Ingest {
        path: path.to_path_buf(),
        reason,
    };
    let decoded = image::ImageReader::open(path)
        .map_err(|e| ingest(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| ingest(e.to_string()))?
        .decode()
        .map_err(|e| ingest(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    if w == 0 || h == 0 {
        return Err(ingest("image has zero extent".into()));
    }
    let gray: Vec<f64> = rgb
        .pixels()
        .map(|p| (LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64) / 255.0)
        .collect();
    let resized = resize_bilinear(&gray, h, w, IMAGE_HEIGHT, IMAGE_WIDTH);
    Tensor::new(
        &[IMAGE_HEIGHT, IMAGE_WIDTH],
        resized.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect(),
    )
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(src: &[f64], src_h: usize, src_w: usize, dst_h: usize, dst_w: usize) -> Vec<f64> {
    assert_eq!(src.len(), src_h * src_w, "source buffer size");
    let taps = |dst: usize, src_len: usize| -> Vec<(usize, usize, f64)> {
        let scale = src_len as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(src_len - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let rows = taps(dst_h, src_h);
    let cols = taps(dst_w, src_w);
    let mut out = Vec::with_capacity(dst_h * dst_w);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            let top = src[y0 * src_w + x0] * (1.0 - fx) + src[y0 * src_w + x1] * fx;
            let bottom = src[y1 * src_w + x0] * (1.0 - fx) + src[y1 * src_w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Writes a `[0, 1]` grayscale tensor as an 8-bit PNG.
pub fn save_png(pixels: &Tensor<f32>, path: &Path) -> Result<()> {
    let &[h, w] = pixels.shape() else {
        return Err(Error::Shape(format!("expected H×W image, got {:?}", pixels.shape())));
    };
    let mut img = GrayImage::new(w as u32, h as u32);
    for (i, &v) in pixels.data().iter().enumerate() {
        img.put_pixel((i % w) as u32, (i / w) as u32, Luma([quantize(v)]));
    }
    img.save(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        reason: format!("cannot write PNG: {e}"),
    })
}

pub(crate) fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
