//! Grayscale rasters, smoothing and projection-curve analysis.
//!
//! Everything downstream consumes [`GrayImage`]: a row-major buffer of
//! intensities in `[0, 1]`. Borders are handled by edge replication
//! throughout, both for convolution and for crops that reach past the image.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, DynamicImage, ImageEncoder, ImageFormat, ImageReader};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle in pixel coordinates. `x`/`y` may be negative for
/// crops that extend past the image border.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn new(x: i64, y: i64, width: usize, height: usize) -> Self {
        Self { x, y, width, height }
    }

    pub fn right(&self) -> i64 {
        self.x + self.width as i64
    }

    pub fn bottom(&self) -> i64 {
        self.y + self.height as i64
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right() && other.x < self.right() && self.y < other.bottom() && other.y < self.bottom()
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Rect {
        Rect { x: self.x + dx, y: self.y + dy, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Builds an image from row-major data, checking length and range.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, actual: data.len() });
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("intensity {bad} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value.clamp(0.0, 1.0); width * height] }
    }

    /// Builds an image by evaluating `f(x, y)`; results are clamped to `[0,1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Pixel lookup with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[cy * self.width + cx]
    }

    /// Sets a pixel, clamping the value into `[0,1]`.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value.clamp(0.0, 1.0);
    }

    /// Crops `rect`, replicating edge pixels where it leaves the image.
    pub fn crop(&self, rect: Rect) -> GrayImage {
        let mut data = Vec::with_capacity(rect.width * rect.height);
        for y in 0..rect.height as i64 {
            for x in 0..rect.width as i64 {
                data.push(self.get_clamped(rect.x + x, rect.y + y));
            }
        }
        GrayImage { width: rect.width, height: rect.height, data }
    }

    pub fn transpose(&self) -> GrayImage {
        GrayImage::from_fn(self.height, self.width, |x, y| self.get(y, x))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect() }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    /// Writes a binary (P5) PGM.
    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let encoder = PnmEncoder::new(BufWriter::new(file)).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
        encoder
            .write_image(&self.to_u8(), self.width as u32, self.height as u32, ColorType::L8.into())
            .map_err(|e| Error::Decode { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Writes an 8-bit grayscale PNG.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf =
            image::GrayImage::from_raw(self.width as u32, self.height as u32, self.to_u8()).expect("buffer length matches dimensions");
        buf.save_with_format(path, ImageFormat::Png).map_err(|e| Error::Decode { path: path.to_path_buf(), message: e.to_string() })
    }
}

/// Reads an 8-bit PNG or PGM/PNM file. Color inputs are reduced by the plain
/// channel average `(r + g + b) / 3`; alpha is ignored.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let reader = ImageReader::open(path)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?
        .with_guessed_format()
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => {
            return Err(Error::UnsupportedFormat { path: path.to_path_buf(), message: format!("expected PNG or PGM, found {other:?}") })
        }
    }
    let decoded = reader.decode().map_err(|e| Error::Decode { path: path.to_path_buf(), message: e.to_string() })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let data: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
        DynamicImage::ImageRgb8(buf) => buf.pixels().map(|p| channel_average(&p.0[..3])).collect(),
        DynamicImage::ImageRgba8(buf) => buf.pixels().map(|p| channel_average(&p.0[..3])).collect(),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                message: format!("only 8-bit samples are supported, found {:?}", other.color()),
            })
        }
    };
    GrayImage::new(width, height, data)
}

fn channel_average(rgb: &[u8]) -> f64 {
    rgb.iter().map(|&c| c as f64).sum::<f64>() / (3.0 * 255.0)
}

/// Normalized, sampled 1-D Gaussian of length `2 * radius + 1`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if radius == 0 {
        return Err(Error::InvalidParameter("radius must be at least 1".into()));
    }
    let r = radius as i64;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Separable Gaussian smoothing with edge replication.
pub fn gaussian_smooth(img: &GrayImage, sigma: f64, radius: usize) -> Result<GrayImage> {
    let kernel = gaussian_kernel(sigma, radius)?;
    let r = radius as i64;
    let (w, h) = (img.width, img.height);

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                acc += kv * img.get_clamped(x as i64 + i as i64 - r, y as i64);
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in kernel.iter().enumerate() {
                let yy = (y as i64 + i as i64 - r).clamp(0, h as i64 - 1) as usize;
                acc += kv * tmp[yy * w + x];
            }
            out[y * w + x] = acc.clamp(0.0, 1.0);
        }
    }
    Ok(GrayImage { width: w, height: h, data: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    /// One value per row.
    Horizontal,
    /// One value per column.
    Vertical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCurve {
    pub axis: Axis,
    pub values: Vec<f64>,
}

/// Mean intensity per row (horizontal) or per column (vertical).
pub fn projection_curve(img: &GrayImage, axis: Axis) -> Result<ProjectionCurve> {
    if img.is_empty() {
        return Err(Error::InvalidParameter("projection of an empty image".into()));
    }
    let (w, h) = (img.width, img.height);
    let values = match axis {
        Axis::Horizontal => img.data.chunks_exact(w).map(|row| row.iter().sum::<f64>() / w as f64).collect(),
        Axis::Vertical => {
            let mut sums = vec![0.0; w];
            for row in img.data.chunks_exact(w) {
                for (s, v) in sums.iter_mut().zip(row) {
                    *s += v;
                }
            }
            sums.into_iter().map(|s| s / h as f64).collect()
        }
    };
    Ok(ProjectionCurve { axis, values })
}

/// Interior local minima of `values`, thinned so that no two survivors are
/// closer than `min_separation` samples.
///
/// A sample qualifies when it is `<=` both neighbours and strictly below at
/// least one of them, so flat curves have no minima. Thinning visits
/// candidates from smallest value up (ties to the lower index) and drops any
/// candidate within `min_separation` of one already kept. The result is sorted.
pub fn local_minima(values: &[f64], min_separation: usize) -> Vec<usize> {
    let min_separation = min_separation.max(1);
    if values.len() < 3 {
        return Vec::new();
    }
    let mut candidates: Vec<usize> = (1..values.len() - 1)
        .filter(|&i| {
            let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
            c <= l && c <= r && (c < l || c < r)
        })
        .collect();
    candidates.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let mut kept: Vec<usize> = Vec::new();
    for i in candidates {
        if kept.iter().all(|&j| i.abs_diff(j) >= min_separation) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}
