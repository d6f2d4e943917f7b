//! Synthetic test images: a procedural "natural-looking" scene and images
//! whose patches are exact sparse combinations of dictionary atoms.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use super::recon::patch_width;
use super::GrayImage;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::probgen::stream_rng;

pub const SYNTH_STREAM: u64 = 5;

/// A deterministic scene of smooth gradients, soft blobs, a few oriented
/// stripe patches, hard-edged rectangles and mild pixel noise, kept within
/// `[0.05, 0.95]`.
pub fn procedural_image(width: usize, height: usize, seed: u64) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    let mut rng = stream_rng(seed, SYNTH_STREAM);
    let (wf, hf) = (width as f64, height as f64);
    let scale = wf.max(hf);
    let (gx, gy): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));

    struct Blob {
        cx: f64,
        cy: f64,
        r: f64,
        amp: f64,
    }
    let blobs: Vec<Blob> = (0..8)
        .map(|_| Blob {
            cx: rng.random_range(0.0..wf),
            cy: rng.random_range(0.0..hf),
            r: rng.random_range(0.05..0.25) * scale,
            amp: rng.random_range(-0.35..0.35),
        })
        .collect();
    struct Stripes {
        cx: f64,
        cy: f64,
        r: f64,
        kx: f64,
        ky: f64,
        amp: f64,
    }
    let stripes: Vec<Stripes> = (0..3)
        .map(|_| {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let period = rng.random_range(4.0..12.0);
            let k = std::f64::consts::TAU / period;
            Stripes {
                cx: rng.random_range(0.0..wf),
                cy: rng.random_range(0.0..hf),
                r: rng.random_range(0.1..0.2) * scale,
                kx: k * theta.cos(),
                ky: k * theta.sin(),
                amp: rng.random_range(0.05..0.15),
            }
        })
        .collect();
    let rects: Vec<(f64, f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            let x0 = rng.random_range(0.0..wf);
            let y0 = rng.random_range(0.0..hf);
            let w = rng.random_range(0.1..0.3) * wf;
            let h = rng.random_range(0.1..0.3) * hf;
            (x0, y0, x0 + w, y0 + h, rng.random_range(-0.2..0.2))
        })
        .collect();

    let mut raw = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64, y as f64);
            let mut v = 0.5 + 0.2 * (gx * (xf / wf - 0.5) + gy * (yf / hf - 0.5));
            for b in &blobs {
                let d2 = ((xf - b.cx).powi(2) + (yf - b.cy).powi(2)) / (b.r * b.r);
                v += b.amp * (-0.5 * d2).exp();
            }
            for s in &stripes {
                let d2 = ((xf - s.cx).powi(2) + (yf - s.cy).powi(2)) / (s.r * s.r);
                v += s.amp * (s.kx * xf + s.ky * yf).sin() * (-0.5 * d2).exp();
            }
            for &(x0, y0, x1, y1, amp) in &rects {
                if (x0..x1).contains(&xf) && (y0..y1).contains(&yf) {
                    v += amp;
                }
            }
            let noise: f64 = rng.sample(StandardNormal);
            raw.push(v + 0.01 * noise);
        }
    }
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(1e-12);
    let pixels = raw.into_iter().map(|v| 0.05 + 0.9 * (v - lo) / span).collect();
    GrayImage::new(width, height, pixels)
}

/// An image of `cols × rows` patches, each `0.5 + Φc` for a random
/// `s`-sparse code `c` scaled so the patch stays inside `(0.05, 0.95)`.
/// Returns the image and the codes in patch order.
///
/// Tiling with mean subtraction hands the solver exactly `Φc` when the
/// atoms have zero mean, as learned dictionaries on mean-free patches do.
pub fn dictionary_image(
    dict: &Dictionary,
    cols: usize,
    rows: usize,
    s: usize,
    seed: u64,
) -> Result<(GrayImage, Vec<DenseVector>)> {
    let w = patch_width(dict)?;
    let k = dict.cols();
    if s == 0 || s > k || cols == 0 || rows == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= s <= {k} and a nonempty grid, got s = {s}, {cols}x{rows}"
        )));
    }
    let mut rng = stream_rng(seed, SYNTH_STREAM);
    let width = cols * w;
    let mut pixels = vec![0.0; width * rows * w];
    let mut codes = Vec::with_capacity(cols * rows);
    let mut patch = vec![0.0; w * w];
    for p in 0..cols * rows {
        let mut c = vec![0.0; k];
        for j in index::sample(&mut rng, k, s) {
            let mag: f64 = rng.random_range(0.5..1.0);
            c[j] = if rng.random_bool(0.5) { mag } else { -mag };
        }
        dict.apply_sparse(&c, &mut patch);
        let peak = patch.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.4 {
            let f = 0.4 / peak;
            c.iter_mut().for_each(|v| *v *= f);
            dict.apply_sparse(&c, &mut patch);
        }
        let (pc, pr) = (p % cols, p / cols);
        for dy in 0..w {
            for dx in 0..w {
                pixels[(pr * w + dy) * width + pc * w + dx] = 0.5 + patch[dy * w + dx];
            }
        }
        codes.push(DenseVector::new(c)?);
    }
    Ok((GrayImage::new(width, rows * w, pixels)?, codes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    #[test]
    fn procedural_image_is_deterministic_and_bounded() {
        let a = procedural_image(64, 48, 3).unwrap();
        assert_eq!(a, procedural_image(64, 48, 3).unwrap());
        assert_ne!(a, procedural_image(64, 48, 4).unwrap());
        let (lo, hi) = a.pixels().iter().fold((1.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        assert!((lo - 0.05).abs() < 1e-12 && (hi - 0.95).abs() < 1e-12);
    }

    #[test]
    fn dictionary_image_patches_match_codes() {
        let dict = Dictionary::new(DenseMatrix::identity(4));
        let (img, codes) = dictionary_image(&dict, 3, 2, 2, 1).unwrap();
        assert_eq!((img.width(), img.height(), codes.len()), (6, 4, 6));
        for (p, c) in codes.iter().enumerate() {
            assert_eq!(c.nnz(), 2);
            let (pc, pr) = (p % 3, p / 3);
            for k in 0..4 {
                let v = img.get(pc * 2 + k % 2, pr * 2 + k / 2);
                assert!((v - 0.5 - c[k]).abs() < 1e-15);
            }
        }
    }
}
