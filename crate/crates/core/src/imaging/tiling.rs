//! Non-overlapping `w × w` tiling. Right and bottom remainders are padded
//! by edge replication and cropped away again by [`untile`].

use super::GrayImage;
use crate::error::{Error, Result};
use crate::linalg::DenseVector;

#[derive(Clone, Debug, PartialEq)]
pub struct PatchGrid {
    pub patch_w: usize,
    pub cols_of_patches: usize,
    pub rows_of_patches: usize,
    /// Row-major patches, each stored row-major with `w²` entries.
    pub patches: Vec<DenseVector>,
    /// Mean of each patch before subtraction (zero when not subtracted).
    pub means: Vec<f64>,
    pub mean_subtracted: bool,
    /// Whether a patch extends past the image and was edge-replicated.
    pub padded: Vec<bool>,
    pub width: usize,
    pub height: usize,
}

impl PatchGrid {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

pub fn tile(img: &GrayImage, w: usize, subtract_mean: bool) -> Result<PatchGrid> {
    let (width, height) = (img.width(), img.height());
    if w == 0 {
        return Err(Error::InvalidArgument("patch width must be positive".into()));
    }
    if w > width && w > height {
        return Err(Error::InvalidArgument(format!(
            "patch width {w} exceeds both image dimensions {width}x{height}"
        )));
    }
    let cols = width.div_ceil(w);
    let rows = height.div_ceil(w);
    let mut patches = Vec::with_capacity(cols * rows);
    let mut means = Vec::with_capacity(cols * rows);
    let mut padded = Vec::with_capacity(cols * rows);
    for pr in 0..rows {
        for pc in 0..cols {
            let (x0, y0) = (pc * w, pr * w);
            let mut v = Vec::with_capacity(w * w);
            for dy in 0..w {
                let y = (y0 + dy).min(height - 1);
                for dx in 0..w {
                    v.push(img.get((x0 + dx).min(width - 1), y));
                }
            }
            let mean = if subtract_mean {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                v.iter_mut().for_each(|p| *p -= mean);
                mean
            } else {
                0.0
            };
            patches.push(DenseVector::new(v)?);
            means.push(mean);
            padded.push(x0 + w > width || y0 + w > height);
        }
    }
    Ok(PatchGrid {
        patch_w: w,
        cols_of_patches: cols,
        rows_of_patches: rows,
        patches,
        means,
        mean_subtracted: subtract_mean,
        padded,
        width,
        height,
    })
}

/// Reassembles patches (with their means added back) into an image of the
/// original size, cropping padded remainders and clamping to `[0, 1]`.
pub fn untile(grid: &PatchGrid) -> Result<GrayImage> {
    let pixels: Vec<&[f64]> = grid.patches.iter().map(|p| p.as_slice()).collect();
    assemble(grid, &pixels, &grid.means)
}

/// Like [`untile`] but with caller-supplied patch contents that already
/// include their means.
pub(crate) fn assemble(grid: &PatchGrid, patches: &[&[f64]], offsets: &[f64]) -> Result<GrayImage> {
    let w = grid.patch_w;
    if patches.len() != grid.cols_of_patches * grid.rows_of_patches || offsets.len() != patches.len() {
        return Err(Error::shape("untile", grid.len(), patches.len()));
    }
    let mut out = vec![0.0; grid.width * grid.height];
    for (k, (patch, offset)) in patches.iter().zip(offsets).enumerate() {
        if patch.len() != w * w {
            return Err(Error::shape("untile", w * w, patch.len()));
        }
        let (pc, pr) = (k % grid.cols_of_patches, k / grid.cols_of_patches);
        for dy in 0..w {
            let y = pr * w + dy;
            if y >= grid.height {
                break;
            }
            for dx in 0..w {
                let x = pc * w + dx;
                if x >= grid.width {
                    break;
                }
                out[y * grid.width + x] = patch[dy * w + dx] + offset;
            }
        }
    }
    GrayImage::from_clamped(grid.width, grid.height, out)
}
