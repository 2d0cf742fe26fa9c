//! Dense descriptors: HOG blocks, aggregated HOG over a sub-region, and
//! fixed-scale SIFT over a primitive.
//!
//! Gradients are central differences `[-1, 0, 1]` with edge replication at the
//! crop border, so a block's histogram depends only on the block's own pixels.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{GrayImage, Rect};
use crate::segment::{Primitive, SubRegion};

pub const AHOG_DIM: usize = 1296;
pub const SIFT_DIM: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DescriptorKind {
    Ahog,
    Sift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub values: Vec<f64>,
    pub kind: DescriptorKind,
    /// Source bounds in image coordinates.
    pub origin: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HogParams {
    pub block_width: usize,
    pub block_height: usize,
    pub cell_width: usize,
    pub cell_height: usize,
    pub bins: usize,
}

impl Default for HogParams {
    fn default() -> Self {
        Self { block_width: 8, block_height: 10, cell_width: 4, cell_height: 5, bins: 9 }
    }
}

impl HogParams {
    pub fn cells_per_block(&self) -> (usize, usize) {
        (self.block_width / self.cell_width, self.block_height / self.cell_height)
    }

    pub fn block_len(&self) -> usize {
        let (cx, cy) = self.cells_per_block();
        cx * cy * self.bins
    }
}

const HOG_EPS: f64 = 1e-6;

/// Central-difference gradients (gx, gy) of a crop, edge-replicated.
fn gradients(img: &GrayImage) -> Vec<(f64, f64)> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let gx = img.get_clamped(x + 1, y) - img.get_clamped(x - 1, y);
            let gy = img.get_clamped(x, y + 1) - img.get_clamped(x, y - 1);
            out.push((gx, gy));
        }
    }
    out
}

/// Unsigned-orientation HOG of one block: per-cell histograms with linear
/// interpolation between neighbouring bin centres, concatenated row-major
/// and L2-normalized.
pub fn hog_block(region: &GrayImage, params: &HogParams) -> Result<Vec<f64>> {
    if region.width() != params.block_width || region.height() != params.block_height {
        return Err(Error::InvalidParameter(format!(
            "HOG block must be {}x{}, got {}x{}",
            params.block_width,
            params.block_height,
            region.width(),
            region.height()
        )));
    }
    let (cells_x, _) = params.cells_per_block();
    let bins = params.bins;
    let bin_width = PI / bins as f64;
    let mut hist = vec![0.0; params.block_len()];
    for (i, (gx, gy)) in gradients(region).into_iter().enumerate() {
        let mag = gx.hypot(gy);
        if mag == 0.0 {
            continue;
        }
        let (x, y) = (i % params.block_width, i / params.block_width);
        let cell = (y / params.cell_height) * cells_x + x / params.cell_width;
        let theta = gy.atan2(gx).rem_euclid(PI);
        let pos = theta / bin_width - 0.5;
        let lo = pos.floor();
        let frac = pos - lo;
        let lo = (lo as i64).rem_euclid(bins as i64) as usize;
        let hi = (lo + 1) % bins;
        hist[cell * bins + lo] += mag * (1.0 - frac);
        hist[cell * bins + hi] += mag * frac;
    }
    let norm = (hist.iter().map(|v| v * v).sum::<f64>() + HOG_EPS * HOG_EPS).sqrt();
    hist.iter_mut().for_each(|v| *v /= norm);
    Ok(hist)
}

/// Aggregated HOG: the non-overlapping block grid laid over the canonical
/// sub-region, rows first. Remainder pixels at the right/bottom are dropped.
pub fn ahog_pixels(pixels: &GrayImage, params: &HogParams) -> Result<Vec<f64>> {
    let bx = pixels.width() / params.block_width;
    let by = pixels.height() / params.block_height;
    let mut out = Vec::with_capacity(bx * by * params.block_len());
    for row in 0..by {
        for col in 0..bx {
            let rect =
                Rect::new((col * params.block_width) as i64, (row * params.block_height) as i64, params.block_width, params.block_height);
            out.extend(hog_block(&pixels.crop(rect), params)?);
        }
    }
    Ok(out)
}

pub fn ahog(sr: &SubRegion) -> Result<Descriptor> {
    if (sr.pixels.width(), sr.pixels.height()) != (48, 62) {
        return Err(Error::InvalidParameter(format!(
            "A-HOG needs a canonical 48x62 sub-region, got {}x{}",
            sr.pixels.width(),
            sr.pixels.height()
        )));
    }
    let values = ahog_pixels(&sr.pixels, &HogParams::default())?;
    debug_assert_eq!(values.len(), AHOG_DIM);
    Ok(Descriptor { values, kind: DescriptorKind::Ahog, origin: sr.bounds })
}

const SIFT_CELLS: usize = 4;
const SIFT_BINS: usize = 8;
const SIFT_CLAMP: f64 = 0.2;

/// One SIFT descriptor for the `patch`x`patch` window at (`x0`, `y0`),
/// using precomputed gradients of the enclosing crop.
fn sift_at(grads: &[(f64, f64)], width: usize, x0: usize, y0: usize, patch: usize) -> Vec<f64> {
    let cell = patch as f64 / SIFT_CELLS as f64;
    let sigma = patch as f64 / 2.0;
    let centre = (patch as f64 - 1.0) / 2.0;
    let mut hist = vec![0.0; SIFT_CELLS * SIFT_CELLS * SIFT_BINS];
    for py in 0..patch {
        for px in 0..patch {
            let (gx, gy) = grads[(y0 + py) * width + x0 + px];
            let mag = gx.hypot(gy);
            if mag == 0.0 {
                continue;
            }
            let (dx, dy) = (px as f64 - centre, py as f64 - centre);
            let weight = mag * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            // trilinear split over neighbouring cells and orientation bins
            let rx = (px as f64 + 0.5) / cell - 0.5;
            let ry = (py as f64 + 0.5) / cell - 0.5;
            let ro = gy.atan2(gx).rem_euclid(2.0 * PI) / (2.0 * PI) * SIFT_BINS as f64;
            let (x0c, y0c, o0) = (rx.floor(), ry.floor(), ro.floor());
            let (fx, fy, fo) = (rx - x0c, ry - y0c, ro - o0);
            for (cy, wy) in [(y0c as i64, 1.0 - fy), (y0c as i64 + 1, fy)] {
                if cy < 0 || cy >= SIFT_CELLS as i64 {
                    continue;
                }
                for (cx, wx) in [(x0c as i64, 1.0 - fx), (x0c as i64 + 1, fx)] {
                    if cx < 0 || cx >= SIFT_CELLS as i64 {
                        continue;
                    }
                    for (ob, wo) in [(o0 as i64, 1.0 - fo), (o0 as i64 + 1, fo)] {
                        let ob = ob.rem_euclid(SIFT_BINS as i64) as usize;
                        let idx = (cy as usize * SIFT_CELLS + cx as usize) * SIFT_BINS + ob;
                        hist[idx] += weight * wx * wy * wo;
                    }
                }
            }
        }
    }
    normalize_clamp(&mut hist);
    hist
}

fn normalize_clamp(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= 1e-12 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    v.iter_mut().for_each(|x| *x = (*x / norm).min(SIFT_CLAMP));
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

/// Dense SIFT over a crop: every `stride` pixels in both directions, rows first.
pub fn dense_sift_pixels(pixels: &GrayImage, patch: usize, stride: usize) -> Result<Vec<Vec<f64>>> {
    if patch == 0 || stride == 0 || pixels.width() < patch || pixels.height() < patch {
        return Err(Error::InvalidParameter(format!(
            "cannot place {patch}px patches with stride {stride} in {}x{}",
            pixels.width(),
            pixels.height()
        )));
    }
    let grads = gradients(pixels);
    let mut out = Vec::new();
    for y in (0..=pixels.height() - patch).step_by(stride) {
        for x in (0..=pixels.width() - patch).step_by(stride) {
            out.push(sift_at(&grads, pixels.width(), x, y, patch));
        }
    }
    Ok(out)
}

/// The three patch descriptors of a canonical 16x20 primitive, top to bottom.
pub fn dense_sift(p: &Primitive, patch: usize, stride: usize) -> Result<Vec<Descriptor>> {
    if (p.pixels.width(), p.pixels.height()) != (16, 20) {
        return Err(Error::InvalidParameter(format!(
            "dense SIFT needs a canonical 16x20 primitive, got {}x{}",
            p.pixels.width(),
            p.pixels.height()
        )));
    }
    let step = stride as i64;
    Ok(dense_sift_pixels(&p.pixels, patch, stride)?
        .into_iter()
        .enumerate()
        .map(|(i, values)| Descriptor {
            values,
            kind: DescriptorKind::Sift,
            origin: Rect::new(p.bounds.x, p.bounds.y + i as i64 * step, patch, patch),
        })
        .collect())
}

/// Writes one descriptor per line: kind, origin x y w h, then the values.
pub fn write_descriptor_dump(path: &Path, descriptors: &[Descriptor]) -> Result<()> {
    let mut text = String::new();
    for d in descriptors {
        let o = d.origin;
        let _ = write!(text, "{:?} {} {} {} {}", d.kind, o.x, o.y, o.width, o.height);
        for v in &d.values {
            let _ = write!(text, " {v:e}");
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(f: impl FnMut(usize, usize) -> f64) -> GrayImage {
        GrayImage::from_fn(8, 10, f)
    }

    #[test]
    fn constant_block_is_zero() {
        let h = hog_block(&block(|_, _| 0.4), &HogParams::default()).unwrap();
        assert_eq!(h.len(), 36);
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_block_size_fails() {
        assert!(hog_block(&GrayImage::filled(8, 8, 0.0), &HogParams::default()).is_err());
    }

    #[test]
    fn vertical_edge_votes_horizontal_gradient_bins() {
        // gradient points along +x, i.e. orientation 0 rad, halfway between
        // the first (10 deg) and last (170 deg) bin centres
        let h = hog_block(&block(|x, _| if x < 4 { 0.1 } else { 0.9 }), &HogParams::default()).unwrap();
        let total: f64 = h.iter().sum();
        for cell in 0..4 {
            for bin in 1..8 {
                assert!(h[cell * 9 + bin] < 0.05 * total);
            }
        }
        let pair: f64 = (0..4).map(|c| h[c * 9] + h[c * 9 + 8]).sum();
        assert!(pair > 0.95 * total);
    }

    #[test]
    fn half_turn_permutes_cells_only() {
        let img = block(|x, y| ((x * 5 + y * 3) % 7) as f64 / 7.0 + if x > y { 0.1 } else { 0.0 });
        let rotated = GrayImage::from_fn(8, 10, |x, y| img.get(7 - x, 9 - y));
        let a = hog_block(&img, &HogParams::default()).unwrap();
        let b = hog_block(&rotated, &HogParams::default()).unwrap();
        for cell in 0..4 {
            for bin in 0..9 {
                assert!((a[cell * 9 + bin] - b[(3 - cell) * 9 + bin]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ahog_is_concatenation_of_blocks() {
        let img = GrayImage::from_fn(48, 62, |x, y| ((x * x + 3 * y) % 11) as f64 / 10.0);
        let v = ahog_pixels(&img, &HogParams::default()).unwrap();
        assert_eq!(v.len(), AHOG_DIM);
        for by in 0..6 {
            for bx in 0..6 {
                let b = hog_block(&img.crop(Rect::new(bx * 8, by * 10, 8, 10)), &HogParams::default()).unwrap();
                let off = (by * 6 + bx) as usize * 36;
                assert_eq!(&v[off..off + 36], b.as_slice());
            }
        }
    }

    fn primitive(pixels: GrayImage) -> Primitive {
        Primitive { cell: (0, 0), bounds: Rect::new(0, 0, 16, 20), kind: None, pixels }
    }

    #[test]
    fn three_descriptors_per_primitive() {
        let p = primitive(GrayImage::from_fn(16, 20, |x, y| ((x * 3 + y * y) % 13) as f64 / 12.0));
        let ds = dense_sift(&p, 16, 2).unwrap();
        assert_eq!(ds.len(), 3);
        for (i, d) in ds.iter().enumerate() {
            assert_eq!(d.values.len(), SIFT_DIM);
            assert_eq!(d.origin.y, 2 * i as i64);
            let norm = d.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
            assert!(d.values.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn flat_primitive_gives_zero_vectors() {
        let ds = dense_sift(&primitive(GrayImage::filled(16, 20, 0.3)), 16, 2).unwrap();
        assert_eq!(ds.len(), 3);
        assert!(ds.iter().all(|d| d.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn sift_is_brightness_scale_invariant() {
        let img = GrayImage::from_fn(16, 20, |x, y| {
            let (dx, dy) = (x as f64 - 8.0, y as f64 - 10.0);
            0.2 + 0.7 * (-(dx * dx + 0.5 * dy * dy) / 20.0).exp()
        });
        let a = dense_sift(&primitive(img.clone()), 16, 2).unwrap();
        let b = dense_sift(&primitive(img.map(|v| v * 0.5)), 16, 2).unwrap();
        for (da, db) in a.iter().zip(&b) {
            for (x, y) in da.values.iter().zip(&db.values) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn non_canonical_crops_are_rejected() {
        assert!(dense_sift(&primitive(GrayImage::filled(16, 16, 0.0)), 16, 2).is_err());
    }

    #[test]
    fn dump_writes_one_line_per_descriptor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        let p = primitive(GrayImage::from_fn(16, 20, |x, y| (x + y) as f64 / 40.0));
        write_descriptor_dump(&path, &dense_sift(&p, 16, 2).unwrap()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap().split_whitespace().count(), 5 + 128);
    }
}
