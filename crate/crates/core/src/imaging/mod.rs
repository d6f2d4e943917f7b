//! Patch-based sparse-coding image reconstruction: grayscale images, PGM
//! I/O, non-overlapping tiling, per-patch coding with a shared dictionary,
//! difference images, and a small dictionary learner (MOD).

mod learn;
mod pgm;
mod recon;
mod synth;
mod tiling;

pub use learn::{
    extract_training_patches, learn_dictionary, read_dictionary, write_dictionary, LearnOptions,
    LearnedDictionary, TrainingMeta,
};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use recon::{reconstruct_image, reconstruct_patch, tune_patch_beta, ImageOptions, ImageReconstruction};
pub use synth::{dictionary_image, procedural_image};
pub use tiling::{tile, untile, PatchGrid};

use crate::error::{Error, Result};

/// Row-major grayscale image with pixels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::shape("GrayImage::new", width * height, pixels.len()));
        }
        if let Some(index) = pixels.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(format!(
                "pixel {index} = {} is outside [0, 1]",
                pixels[index]
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// Builds an image from arbitrary reals, clamping each to `[0, 1]`.
    pub fn from_clamped(width: usize, height: usize, mut pixels: Vec<f64>) -> Result<Self> {
        for p in &mut pixels {
            *p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Maps the signed difference `recon − original` from `[−0.3, 0.3]` onto
/// `[0, 1]`; a perfect reconstruction is uniform 0.5 gray.
pub fn difference_image(original: &GrayImage, recon: &GrayImage) -> Result<GrayImage> {
    if (original.width, original.height) != (recon.width, recon.height) {
        return Err(Error::shape(
            "difference_image",
            format!("{}x{}", original.width, original.height),
            format!("{}x{}", recon.width, recon.height),
        ));
    }
    let pixels = original
        .pixels
        .iter()
        .zip(&recon.pixels)
        .map(|(o, r)| ((r - o + 0.3) / 0.6).clamp(0.0, 1.0))
        .collect();
    GrayImage::new(original.width, original.height, pixels)
}

/// Whole-image SNR in dB; `+∞` for an exact match.
pub fn image_snr_db(original: &GrayImage, recon: &GrayImage) -> Result<f64> {
    if original.pixels.len() != recon.pixels.len() {
        return Err(Error::shape("image_snr_db", original.pixels.len(), recon.pixels.len()));
    }
    Ok(crate::probgen::snr_db(&original.pixels, &recon.pixels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, p: Vec<f64>) -> GrayImage {
        GrayImage::new(w, h, p).unwrap()
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(GrayImage::new(2, 1, vec![0.5, 1.5]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.5]).is_err());
        assert_eq!(GrayImage::from_clamped(2, 1, vec![-0.2, 1.5]).unwrap().pixels(), &[0.0, 1.0]);
    }

    #[test]
    fn difference_examples() {
        let orig = img(3, 1, vec![0.5, 0.2, 0.6]);
        let same = difference_image(&orig, &orig).unwrap();
        assert!(same.pixels().iter().all(|&p| p == 0.5));
        let recon = img(3, 1, vec![0.8, 0.2, 0.2]);
        let d = difference_image(&orig, &recon).unwrap();
        assert!((d.pixels()[0] - 1.0).abs() < 1e-12);
        assert_eq!(d.pixels()[2], 0.0);
    }

    #[test]
    fn difference_inverts_within_quantization() {
        let orig = img(4, 1, vec![0.1, 0.4, 0.7, 0.9]);
        let recon = img(4, 1, vec![0.2, 0.3, 0.75, 0.65]);
        let d = decode_pgm(&encode_pgm(&difference_image(&orig, &recon).unwrap())).unwrap();
        for i in 0..4 {
            let signed = d.pixels()[i] * 0.6 - 0.3;
            let truth = recon.pixels()[i] - orig.pixels()[i];
            assert!((signed - truth).abs() <= 1.0 / 510.0);
        }
    }

    #[test]
    fn difference_requires_equal_shapes() {
        assert!(difference_image(&img(1, 1, vec![0.0]), &img(2, 1, vec![0.0, 0.0])).is_err());
    }
}
