//! Two-level lattice segmentation.
//!
//! Rule I cuts the smoothed image into sub-regions at the deepest projection
//! minima (sub-region border lines), records the measured cell size as the
//! sub-region's [`SizeClass`] and refines every cell to the canonical 48x62
//! crop. Rule II cuts a sub-region into its 3x3 texture primitives using the
//! interior minima and fixed-length windows.

use serde::{Deserialize, Serialize};

use crate::error::{CurveDump, Error, Result};
use crate::imaging::{local_minima, projection_curve, Axis, GrayImage, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrimitiveKind {
    Star1,
    Star2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubRegionKind {
    /// Rows read star-1, star-2, star-1.
    Subregion1,
    /// Rows read star-2, star-1, star-2.
    Subregion2,
}

impl SubRegionKind {
    pub fn row_kinds(self) -> [PrimitiveKind; 3] {
        use PrimitiveKind::*;
        match self {
            SubRegionKind::Subregion1 => [Star1, Star2, Star1],
            SubRegionKind::Subregion2 => [Star2, Star1, Star2],
        }
    }
}

/// Measured raw cell size plus the offsets that refine it to the canonical
/// crop: `h1 + l_h + h2 = canonical width`, `v1 + l_v + v2 = canonical height`.
/// Offsets are negative when the raw cell is larger than the template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SizeClass {
    pub l_h: usize,
    pub l_v: usize,
    pub h1: i64,
    pub h2: i64,
    pub v1: i64,
    pub v2: i64,
}

impl SizeClass {
    pub fn measured(l_h: usize, l_v: usize, canonical: (usize, usize)) -> Self {
        let dh = canonical.0 as i64 - l_h as i64;
        let dv = canonical.1 as i64 - l_v as i64;
        let h1 = dh.div_euclid(2);
        let v1 = dv.div_euclid(2);
        Self { l_h, l_v, h1, h2: dh - h1, v1, v2: dv - v1 }
    }

    pub fn label(&self) -> String {
        format!("{}x{}", self.l_h, self.l_v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    /// Canonical sub-region crop (width, height).
    pub subregion_size: (usize, usize),
    /// Canonical primitive crop (width, height).
    pub primitive_size: (usize, usize),
    /// Primitives per sub-region (cols, rows).
    pub layout: (usize, usize),
    /// Pixels added around a cell before refinement.
    pub pad: usize,
    /// Accepted raw sub-region widths (inclusive).
    pub l_h_range: (usize, usize),
    /// Accepted raw sub-region heights (inclusive).
    pub l_v_range: (usize, usize),
    /// A minimum must sit at least this far below the curve median.
    pub min_contrast: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            subregion_size: (48, 62),
            primitive_size: (16, 20),
            layout: (3, 3),
            pad: 3,
            l_h_range: (46, 49),
            l_v_range: (59, 61),
            min_contrast: 0.05,
        }
    }
}

impl SegmentConfig {
    pub fn size_classes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.l_h_range.0..=self.l_h_range.1).flat_map(move |h| (self.l_v_range.0..=self.l_v_range.1).map(move |v| (h, v)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubRegion {
    /// (column, row) of the cell in the detected sub-region grid.
    pub grid: (usize, usize),
    /// Cell between two detected border minima.
    pub raw: Rect,
    /// Canonical crop bounds in image coordinates.
    pub bounds: Rect,
    pub size_class: SizeClass,
    pub kind: Option<SubRegionKind>,
    /// Canonical crop.
    pub pixels: GrayImage,
    /// Canonical crop widened by `pad` on every side.
    pub context: GrayImage,
    pub pad: usize,
}

impl SubRegion {
    /// Cuts a sub-region with canonical bounds `bounds` out of `img`.
    pub fn from_image(img: &GrayImage, grid: (usize, usize), raw: Rect, bounds: Rect, size_class: SizeClass, pad: usize) -> Self {
        let p = pad as i64;
        let context = img.crop(Rect::new(bounds.x - p, bounds.y - p, bounds.width + 2 * pad, bounds.height + 2 * pad));
        Self { grid, raw, bounds, size_class, kind: None, pixels: img.crop(bounds), context, pad }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    /// (column, row) inside the parent sub-region.
    pub cell: (usize, usize),
    /// Bounds in image coordinates.
    pub bounds: Rect,
    pub kind: Option<PrimitiveKind>,
    pub pixels: GrayImage,
}

fn segmentation_error(reason: String, axis: Axis, values: Vec<f64>, minima: Vec<usize>) -> Error {
    Error::Segmentation { reason, dump: Box::new(CurveDump { axis, values, minima }) }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

/// Minima of `values` deeper than `contrast` below the median, thinned to `sep`.
fn prominent_minima(values: &[f64], sep: usize, contrast: f64) -> Vec<usize> {
    let level = median(values) - contrast;
    local_minima(values, sep).into_iter().filter(|&i| values[i] <= level).collect()
}

/// Rule I: sub-regions of a smoothed fabric image, in row-major grid order.
pub fn segment_rule1(img: &GrayImage, cfg: &SegmentConfig) -> Result<Vec<SubRegion>> {
    let mut cuts = Vec::with_capacity(2);
    for (axis, range) in [(Axis::Vertical, cfg.l_h_range), (Axis::Horizontal, cfg.l_v_range)] {
        let curve = projection_curve(img, axis)?;
        let sep = (range.0 * 2 / 3).max(1);
        let minima = prominent_minima(&curve.values, sep, cfg.min_contrast);
        if minima.len() < 2 {
            return Err(segmentation_error(
                format!("{axis:?} projection has {} border minima, need at least 2", minima.len()),
                axis,
                curve.values,
                minima,
            ));
        }
        let spans: Vec<(usize, usize)> =
            minima.windows(2).map(|w| (w[0], w[1] - w[0])).filter(|&(_, len)| (range.0..=range.1).contains(&len)).collect();
        if spans.is_empty() {
            return Err(segmentation_error(
                format!("no {axis:?} border spacing inside {}..={}", range.0, range.1),
                axis,
                curve.values,
                minima,
            ));
        }
        cuts.push(spans);
    }

    let (cw, ch) = cfg.subregion_size;
    let mut out = Vec::new();
    for (row, &(y, l_v)) in cuts[1].iter().enumerate() {
        for (col, &(x, l_h)) in cuts[0].iter().enumerate() {
            let size_class = SizeClass::measured(l_h, l_v, cfg.subregion_size);
            let raw = Rect::new(x as i64, y as i64, l_h, l_v);
            let bounds = Rect::new(x as i64 - size_class.h1, y as i64 - size_class.v1, cw, ch);
            out.push(SubRegion::from_image(img, (col, row), raw, bounds, size_class, cfg.pad));
        }
    }
    Ok(out)
}

/// Interior boundary positions along one axis of a canonical sub-region.
fn interior_boundaries(pixels: &GrayImage, axis: Axis, pitch: usize, count: usize, cfg: &SegmentConfig) -> Result<Vec<usize>> {
    let curve = projection_curve(pixels, axis)?;
    let len = curve.values.len();
    let (lo, hi) = (pitch / 2, len.saturating_sub(pitch / 2));
    let minima: Vec<usize> =
        prominent_minima(&curve.values, (pitch * 3 / 4).max(1), cfg.min_contrast).into_iter().filter(|&i| i >= lo && i <= hi).collect();
    if minima.len() != count {
        return Err(segmentation_error(
            format!("{axis:?} projection has {} interior minima, expected {count}", minima.len()),
            axis,
            curve.values,
            minima,
        ));
    }
    Ok(minima)
}

/// Window starts: one pitch before the first interior boundary, then each boundary.
fn window_starts(boundaries: &[usize], pitch: usize) -> Vec<i64> {
    let mut starts = vec![boundaries[0] as i64 - pitch as i64];
    starts.extend(boundaries.iter().map(|&b| b as i64));
    starts
}

/// Rule II: the primitives of a sub-region in row-major order.
pub fn segment_rule2(sr: &SubRegion, cfg: &SegmentConfig) -> Result<Vec<Primitive>> {
    let (pw, ph) = cfg.primitive_size;
    let (cols, rows) = cfg.layout;
    let xs = window_starts(&interior_boundaries(&sr.pixels, Axis::Vertical, pw, cols - 1, cfg)?, pw);
    let ys = window_starts(&interior_boundaries(&sr.pixels, Axis::Horizontal, ph, rows - 1, cfg)?, ph);
    let pad = sr.pad as i64;
    let (ctx_w, ctx_h) = (sr.context.width() as i64, sr.context.height() as i64);

    let mut prims = Vec::with_capacity(cols * rows);
    for (r, &y) in ys.iter().enumerate() {
        for (c, &x) in xs.iter().enumerate() {
            let local = Rect::new(x + pad, y + pad, pw, ph);
            if local.x < 0 || local.y < 0 || local.right() > ctx_w || local.bottom() > ctx_h {
                return Err(segmentation_error(
                    format!("primitive window ({c},{r}) leaves the padded sub-region"),
                    Axis::Vertical,
                    projection_curve(&sr.pixels, Axis::Vertical)?.values,
                    Vec::new(),
                ));
            }
            let kind = sr.kind.map(|k| k.row_kinds()[r.min(2)]);
            prims.push(Primitive {
                cell: (c, r),
                bounds: Rect::new(sr.bounds.x + x, sr.bounds.y + y, pw, ph),
                kind,
                pixels: sr.context.crop(local),
            });
        }
    }
    Ok(prims)
}

/// Minimum of the vertical projection over the primitive interior. The three
/// outermost columns on each side carry (smoothed) lattice lines and are skipped.
pub fn primitive_feature(pixels: &GrayImage) -> f64 {
    let curve = projection_curve(pixels, Axis::Vertical).expect("primitive crops are non-empty");
    let skip = 3.min(curve.values.len() / 2);
    curve.values[skip..curve.values.len() - skip].iter().copied().fold(f64::INFINITY, f64::min)
}

/// Star-1 / star-2 decision on [`primitive_feature`]: star-1 has the higher
/// projection minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveClassifier {
    pub star1_mean: f64,
    pub star2_mean: f64,
    pub midpoint: f64,
}

impl PrimitiveClassifier {
    pub fn from_means(star1_mean: f64, star2_mean: f64) -> Result<Self> {
        if !(star1_mean > star2_mean) {
            return Err(Error::Classification(format!("star-1 mean {star1_mean:.4} must exceed star-2 mean {star2_mean:.4}")));
        }
        Ok(Self { star1_mean, star2_mean, midpoint: 0.5 * (star1_mean + star2_mean) })
    }

    pub fn calibrate_labeled<'a>(samples: impl IntoIterator<Item = (&'a GrayImage, PrimitiveKind)>) -> Result<Self> {
        let (mut s1, mut n1, mut s2, mut n2) = (0.0, 0usize, 0.0, 0usize);
        for (img, kind) in samples {
            let f = primitive_feature(img);
            match kind {
                PrimitiveKind::Star1 => (s1, n1) = (s1 + f, n1 + 1),
                PrimitiveKind::Star2 => (s2, n2) = (s2 + f, n2 + 1),
            }
        }
        if n1 == 0 || n2 == 0 {
            return Err(Error::InsufficientData("need labeled crops of both primitive kinds".into()));
        }
        Self::from_means(s1 / n1 as f64, s2 / n2 as f64)
    }

    /// Two-cluster split of the feature values when no labels are available.
    pub fn calibrate_unlabeled<'a>(crops: impl IntoIterator<Item = &'a GrayImage>) -> Result<Self> {
        let features: Vec<f64> = crops.into_iter().map(primitive_feature).collect();
        if features.len() < 2 {
            return Err(Error::InsufficientData("need at least two primitive crops".into()));
        }
        let (mut lo, mut hi) = features.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &f| (a.min(f), b.max(f)));
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let (mut sl, mut nl, mut sh, mut nh) = (0.0, 0usize, 0.0, 0usize);
            for &f in &features {
                if f > mid {
                    (sh, nh) = (sh + f, nh + 1);
                } else {
                    (sl, nl) = (sl + f, nl + 1);
                }
            }
            if nl == 0 || nh == 0 {
                return Err(Error::Classification("primitive features form a single cluster".into()));
            }
            let (nlo, nhi) = (sl / nl as f64, sh / nh as f64);
            if nlo == lo && nhi == hi {
                break;
            }
            (lo, hi) = (nlo, nhi);
        }
        Self::from_means(hi, lo)
    }

    /// Kind plus a confidence in `[0, 1]`: distance from the midpoint relative
    /// to half the class-mean gap, capped at 1.
    pub fn classify_with_confidence(&self, pixels: &GrayImage) -> (PrimitiveKind, f64) {
        let f = primitive_feature(pixels);
        let kind = if f > self.midpoint { PrimitiveKind::Star1 } else { PrimitiveKind::Star2 };
        let half_gap = 0.5 * (self.star1_mean - self.star2_mean);
        (kind, ((f - self.midpoint).abs() / half_gap).min(1.0))
    }
}

pub fn classify_primitive(p: &Primitive, classifier: &PrimitiveClassifier) -> PrimitiveKind {
    classifier.classify_with_confidence(&p.pixels).0
}

/// Sub-region kind from the classified middle-column primitive of each row.
pub fn classify_subregion(sr: &SubRegion, classifier: &PrimitiveClassifier, cfg: &SegmentConfig) -> Result<SubRegionKind> {
    let prims = segment_rule2(sr, cfg)?;
    let (cols, rows) = cfg.layout;
    let rows_kinds: Vec<PrimitiveKind> = (0..rows).map(|r| classify_primitive(&prims[r * cols + cols / 2], classifier)).collect();
    [SubRegionKind::Subregion1, SubRegionKind::Subregion2]
        .into_iter()
        .find(|k| rows_kinds.as_slice() == k.row_kinds())
        .ok_or_else(|| Error::Classification(format!("sub-region {:?} has row ordering {rows_kinds:?}", sr.grid)))
}

/// Rule I followed by sub-region classification.
pub fn segment_and_classify(img: &GrayImage, cfg: &SegmentConfig, classifier: &PrimitiveClassifier) -> Result<Vec<SubRegion>> {
    let mut srs = segment_rule1(img, cfg)?;
    for sr in &mut srs {
        sr.kind = Some(classify_subregion(sr, classifier, cfg)?);
    }
    Ok(srs)
}
