//! Deterministic synthetic patterned fabric with injectable defects.
//!
//! The fabric is a lattice of texture primitives separated by dark lines.
//! Every third line (in both directions) is darker; those mark sub-region
//! borders. Primitive rows alternate between two star stamps, so a sub-region
//! reads star-1/star-2/star-1 or star-2/star-1/star-2 from top to bottom.
//!
//! Coordinates: the lattice origin is the centre of a sub-region border line.
//! Primitive `(col, row)` with `col < 3 * subregion_cols` and
//! `row < 3 * subregion_rows` is a cell of the sub-region grid; cells outside
//! it (the half-cell margins at the image border) are rendered but not tracked
//! by ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{GrayImage, Rect};
use crate::segment::{primitive_feature, PrimitiveKind, SubRegionKind};

/// Star-shaped motif rendered into one primitive cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarStamp {
    pub outer_radius: f64,
    /// Inner (notch) radius as a fraction of `outer_radius`.
    pub inner_ratio: f64,
    pub points: u32,
    pub intensity: f64,
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FabricSpec {
    pub width: usize,
    pub height: usize,
    pub primitive_width: usize,
    pub primitive_height: usize,
    /// Primitives per sub-region along x and y.
    pub subregion_layout: (usize, usize),
    pub subregion_cols: usize,
    pub subregion_rows: usize,
    /// Pixel position of the top-left sub-region border crossing.
    pub origin: (usize, usize),
    pub line_width: usize,
    pub minor_line: f64,
    pub major_line: f64,
    pub star1: StarStamp,
    pub star2: StarStamp,
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Default for FabricSpec {
    fn default() -> Self {
        Self {
            width: 208,
            height: 200,
            primitive_width: 16,
            primitive_height: 20,
            subregion_layout: (3, 3),
            subregion_cols: 4,
            subregion_rows: 3,
            origin: (8, 10),
            line_width: 3,
            minor_line: 0.22,
            major_line: 0.04,
            star1: StarStamp { outer_radius: 5.5, inner_ratio: 0.45, points: 5, intensity: 0.92, background: 0.56 },
            star2: StarStamp { outer_radius: 4.0, inner_ratio: 0.45, points: 5, intensity: 0.86, background: 0.42 },
            noise_amplitude: 0.03,
            seed: 0,
        }
    }
}

impl FabricSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn subregion_count(&self) -> usize {
        self.subregion_cols * self.subregion_rows
    }

    /// Columns and rows of the tracked primitive grid.
    pub fn primitive_grid(&self) -> (usize, usize) {
        (self.subregion_cols * self.subregion_layout.0, self.subregion_rows * self.subregion_layout.1)
    }

    pub fn subregion_pixel_size(&self) -> (usize, usize) {
        (self.subregion_layout.0 * self.primitive_width, self.subregion_layout.1 * self.primitive_height)
    }

    /// Lattice cell of primitive `(col, row)` in image coordinates.
    pub fn primitive_rect(&self, col: usize, row: usize) -> Rect {
        Rect::new(
            (self.origin.0 + col * self.primitive_width) as i64,
            (self.origin.1 + row * self.primitive_height) as i64,
            self.primitive_width,
            self.primitive_height,
        )
    }

    /// Raw cell of sub-region `(col, row)` in image coordinates.
    pub fn subregion_rect(&self, col: usize, row: usize) -> Rect {
        let (w, h) = self.subregion_pixel_size();
        Rect::new((self.origin.0 + col * w) as i64, (self.origin.1 + row * h) as i64, w, h)
    }

    /// Smallest translation that maps the noise-free render onto itself.
    pub fn lattice_period(&self) -> (usize, usize) {
        let (w, h) = self.subregion_pixel_size();
        (w, 2 * h)
    }

    pub fn subregion_kind(&self, sub_row: i64) -> SubRegionKind {
        if sub_row.rem_euclid(2) == 0 {
            SubRegionKind::Subregion1
        } else {
            SubRegionKind::Subregion2
        }
    }

    /// Kind of the primitives in lattice row `row` (may be negative).
    pub fn primitive_kind(&self, row: i64) -> PrimitiveKind {
        let rows_per = self.subregion_layout.1 as i64;
        let sub_row = row.div_euclid(rows_per);
        let within = row.rem_euclid(rows_per);
        let middle = within % 2 == 1;
        match (self.subregion_kind(sub_row), middle) {
            (SubRegionKind::Subregion1, false) | (SubRegionKind::Subregion2, true) => PrimitiveKind::Star1,
            _ => PrimitiveKind::Star2,
        }
    }

    fn stamp(&self, kind: PrimitiveKind) -> &StarStamp {
        match kind {
            PrimitiveKind::Star1 => &self.star1,
            PrimitiveKind::Star2 => &self.star2,
        }
    }

    pub fn background(&self, kind: PrimitiveKind) -> f64 {
        self.stamp(kind).background
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.primitive_width < 8 || self.primitive_height < 8 {
            return bad("primitives must be at least 8x8".into());
        }
        if !self.width.is_multiple_of(self.primitive_width) || !self.height.is_multiple_of(self.primitive_height) {
            return bad(format!(
                "image {}x{} is not tiled by {}x{} primitives",
                self.width, self.height, self.primitive_width, self.primitive_height
            ));
        }
        if self.subregion_layout.0 == 0 || self.subregion_layout.1 == 0 || self.subregion_count() == 0 {
            return bad("empty sub-region layout".into());
        }
        let (sw, sh) = self.subregion_pixel_size();
        let half = self.line_width / 2;
        if self.origin.0 <= half
            || self.origin.1 <= half
            || self.origin.0 + self.subregion_cols * sw + half >= self.width
            || self.origin.1 + self.subregion_rows * sh + half >= self.height
        {
            return bad("sub-region grid (with its border lines) must lie strictly inside the image".into());
        }
        if self.line_width.is_multiple_of(2) || self.line_width >= self.primitive_width / 2 {
            return bad("line width must be odd and narrower than half a primitive".into());
        }
        if !(0.0..=0.2).contains(&self.noise_amplitude) {
            return bad(format!("noise amplitude {} outside [0, 0.2]", self.noise_amplitude));
        }
        for s in [&self.star1, &self.star2] {
            let fits = 2.0 * s.outer_radius <= (self.primitive_width.min(self.primitive_height) - self.line_width) as f64;
            if !fits || s.outer_radius <= 0.0 || !(0.0..1.0).contains(&s.inner_ratio) || s.points < 3 {
                return bad(format!("star stamp {s:?} does not fit a primitive"));
            }
        }
        Ok(())
    }
}

/// Per-image defect annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub subregion_cols: usize,
    pub subregion_rows: usize,
    /// Row-major over the sub-region grid.
    pub subregion_flags: Vec<bool>,
    /// Row-major over the tracked primitive grid.
    pub primitive_flags: Vec<bool>,
    pub masks: Vec<DefectMask>,
}

impl GroundTruth {
    pub fn clean(spec: &FabricSpec) -> Self {
        let (grid_cols, grid_rows) = spec.primitive_grid();
        Self {
            grid_cols,
            grid_rows,
            subregion_cols: spec.subregion_cols,
            subregion_rows: spec.subregion_rows,
            subregion_flags: vec![false; spec.subregion_count()],
            primitive_flags: vec![false; grid_cols * grid_rows],
            masks: Vec::new(),
        }
    }

    pub fn is_defective(&self) -> bool {
        self.subregion_flags.iter().any(|&f| f)
    }

    pub fn primitive(&self, col: usize, row: usize) -> bool {
        self.primitive_flags[row * self.grid_cols + col]
    }

    pub fn subregion(&self, col: usize, row: usize) -> bool {
        self.subregion_flags[row * self.subregion_cols + col]
    }

    /// True when the pixel lies inside any recorded defect mask.
    pub fn in_mask(&self, x: i64, y: i64) -> bool {
        self.masks.iter().any(|m| m.rects.iter().any(|r| r.contains(x, y)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DefectKind {
    BrokenEnd,
    Hole,
    ThickBar,
    ThinBar,
    NettingMultiple,
}

impl DefectKind {
    pub const ALL: [DefectKind; 5] =
        [DefectKind::BrokenEnd, DefectKind::Hole, DefectKind::NettingMultiple, DefectKind::ThickBar, DefectKind::ThinBar];

    /// Magnitude and extent used by the default corpus.
    pub fn default_shape(self) -> (f64, usize) {
        match self {
            DefectKind::Hole => (0.5, 8),
            DefectKind::BrokenEnd => (0.5, 0),
            DefectKind::ThickBar => (0.35, 4),
            DefectKind::ThinBar => (0.45, 1),
            DefectKind::NettingMultiple => (0.4, 36),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec {
    pub kind: DefectKind,
    /// Primitive `(col, row)` in the tracked grid. Bars only use the row.
    pub location: (usize, usize),
    /// Intensity delta applied inside the mask.
    pub magnitude: f64,
    /// Hole: ellipse width; NettingMultiple: dotted run length. Unused otherwise.
    pub extent: usize,
}

impl DefectSpec {
    pub fn new(kind: DefectKind, col: usize, row: usize) -> Self {
        let (magnitude, extent) = kind.default_shape();
        Self { kind, location: (col, row), magnitude, extent }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectMask {
    pub kind: DefectKind,
    pub rects: Vec<Rect>,
}

/// Renders the fabric, verifying first that the two stamps are separable by
/// the primitive classifier's feature.
pub fn generate_fabric(spec: &FabricSpec) -> Result<(GrayImage, GroundTruth)> {
    spec.validate()?;
    verify_stamp_separation(spec)?;
    Ok(render(spec))
}

/// Same as [`generate_fabric`] without the stamp separation check. Used to
/// build deliberately degenerate inputs.
pub fn generate_fabric_unchecked(spec: &FabricSpec) -> Result<(GrayImage, GroundTruth)> {
    spec.validate()?;
    Ok(render(spec))
}

const STAMP_SEPARATION: f64 = 0.02;

fn verify_stamp_separation(spec: &FabricSpec) -> Result<()> {
    let noiseless = FabricSpec { noise_amplitude: 0.0, ..spec.clone() };
    let img = render_clean(&noiseless);
    let (mut s1, mut s2) = (None, None);
    for row in 0..spec.subregion_layout.1.min(2) {
        let crop = img.crop(spec.primitive_rect(0, row));
        let f = primitive_feature(&crop);
        match spec.primitive_kind(row as i64) {
            PrimitiveKind::Star1 => s1 = Some(f),
            PrimitiveKind::Star2 => s2 = Some(f),
        }
    }
    let (s1, s2) = (s1.unwrap_or(0.0), s2.unwrap_or(0.0));
    if s1 - s2 < STAMP_SEPARATION {
        return Err(Error::Generator(format!("star-1 feature {s1:.4} must exceed star-2 feature {s2:.4} by at least {STAMP_SEPARATION}")));
    }
    Ok(())
}

fn render(spec: &FabricSpec) -> (GrayImage, GroundTruth) {
    let mut img = render_clean(spec);
    if spec.noise_amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let a = spec.noise_amplitude;
        for y in 0..img.height() {
            for x in 0..img.width() {
                let n: f64 = rng.gen_range(-a..=a);
                img.set(x, y, img.get(x, y) + n);
            }
        }
    }
    (img, GroundTruth::clean(spec))
}

/// Anti-aliased stamp for one primitive cell, background included.
fn render_stamp(spec: &FabricSpec, stamp: &StarStamp) -> Vec<f64> {
    const SS: usize = 4;
    let (pw, ph) = (spec.primitive_width, spec.primitive_height);
    let (cx, cy) = (pw as f64 / 2.0 + 0.5, ph as f64 / 2.0 + 0.5);
    let n = stamp.points as usize * 2;
    let polygon: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let r = if i % 2 == 0 { stamp.outer_radius } else { stamp.outer_radius * stamp.inner_ratio };
            let theta = -std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::PI / stamp.points as f64;
            (cx + r * theta.cos(), cy + r * theta.sin())
        })
        .collect();
    let mut out = vec![0.0; pw * ph];
    for v in 0..ph {
        for u in 0..pw {
            let mut hits = 0;
            for sy in 0..SS {
                for sx in 0..SS {
                    let px = u as f64 + (sx as f64 + 0.5) / SS as f64;
                    let py = v as f64 + (sy as f64 + 0.5) / SS as f64;
                    if point_in_polygon(px, py, &polygon) {
                        hits += 1;
                    }
                }
            }
            let coverage = hits as f64 / (SS * SS) as f64;
            out[v * pw + u] = stamp.background + coverage * (stamp.intensity - stamp.background);
        }
    }
    out
}

fn point_in_polygon(x: f64, y: f64, poly: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Line intensity at lattice offset `offset` along one axis, if on a line.
fn line_value(spec: &FabricSpec, offset: i64, pitch: usize, per_sub: usize) -> Option<f64> {
    let half = (spec.line_width / 2) as i64;
    let pitch = pitch as i64;
    let cell = offset.div_euclid(pitch);
    let u = offset.rem_euclid(pitch);
    let boundary = if u <= half {
        cell
    } else if u >= pitch - half {
        cell + 1
    } else {
        return None;
    };
    if boundary.rem_euclid(per_sub as i64) == 0 {
        Some(spec.major_line)
    } else {
        Some(spec.minor_line)
    }
}

fn render_clean(spec: &FabricSpec) -> GrayImage {
    let stamp1 = render_stamp(spec, &spec.star1);
    let stamp2 = render_stamp(spec, &spec.star2);
    let (pw, ph) = (spec.primitive_width as i64, spec.primitive_height as i64);
    GrayImage::from_fn(spec.width, spec.height, |x, y| {
        let gx = x as i64 - spec.origin.0 as i64;
        let gy = y as i64 - spec.origin.1 as i64;
        let row = gy.div_euclid(ph);
        let (u, v) = (gx.rem_euclid(pw) as usize, gy.rem_euclid(ph) as usize);
        let stamp = match spec.primitive_kind(row) {
            PrimitiveKind::Star1 => &stamp1,
            PrimitiveKind::Star2 => &stamp2,
        };
        let mut value = stamp[v * spec.primitive_width + u];
        if let Some(l) = line_value(spec, gx, spec.primitive_width, spec.subregion_layout.0) {
            value = value.min(l);
        }
        if let Some(l) = line_value(spec, gy, spec.primitive_height, spec.subregion_layout.1) {
            value = value.min(l);
        }
        value
    })
}

/// Applies one defect, returning the altered image and updated annotations.
pub fn inject_defect(spec: &FabricSpec, img: &GrayImage, truth: &GroundTruth, defect: &DefectSpec) -> Result<(GrayImage, GroundTruth)> {
    let (grid_cols, grid_rows) = spec.primitive_grid();
    let (col, row) = defect.location;
    if col >= grid_cols || row >= grid_rows {
        return Err(Error::OutOfBounds(format!("primitive ({col},{row}) outside {grid_cols}x{grid_rows} grid")));
    }
    if img.width() != spec.width || img.height() != spec.height {
        return Err(Error::DimensionMismatch { expected: spec.width * spec.height, actual: img.width() * img.height() });
    }
    if !(defect.magnitude > spec.noise_amplitude) || defect.magnitude > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "defect magnitude {} must exceed noise amplitude {} and be at most 1",
            defect.magnitude, spec.noise_amplitude
        )));
    }

    let cell = spec.primitive_rect(col, row);
    let (pw, ph) = (spec.primitive_width as i64, spec.primitive_height as i64);
    let (cx, cy) = (cell.x as f64 + pw as f64 / 2.0 + 0.5, cell.y as f64 + ph as f64 / 2.0 + 0.5);
    let interior = (spec.line_width / 2 + 1) as i64;
    let m = defect.magnitude;
    let mut out = img.clone();
    let mut rects = Vec::new();

    match defect.kind {
        DefectKind::Hole => {
            let a = defect.extent as f64 / 2.0;
            let b = a * 1.25;
            if a < 1.0 || cx - a < (cell.x + interior) as f64 || cy - b < (cell.y + interior) as f64 {
                return Err(Error::OutOfBounds(format!("hole extent {} does not fit a primitive", defect.extent)));
            }
            let rect = Rect::new((cx - a).floor() as i64, (cy - b).floor() as i64, 0, 0);
            let rect =
                Rect { width: ((cx + a).ceil() as i64 - rect.x) as usize, height: ((cy + b).ceil() as i64 - rect.y) as usize, ..rect };
            for y in rect.y..rect.bottom() {
                for x in rect.x..rect.right() {
                    let (dx, dy) = ((x as f64 + 0.5 - cx) / a, (y as f64 + 0.5 - cy) / b);
                    if dx * dx + dy * dy <= 1.0 {
                        let v = out.get(x as usize, y as usize);
                        out.set(x as usize, y as usize, (v - m).max(0.0));
                    }
                }
            }
            rects.push(rect);
        }
        DefectKind::ThickBar | DefectKind::ThinBar => {
            let thickness = if defect.kind == DefectKind::ThickBar { 4 } else { 1 };
            let top = cell.y + ph / 2 - thickness / 2;
            let rect = Rect::new(0, top, spec.width, thickness as usize);
            for y in rect.y..rect.bottom() {
                for x in 0..spec.width {
                    let v = out.get(x, y as usize);
                    out.set(x, y as usize, v + m);
                }
            }
            rects.push(rect);
        }
        DefectKind::BrokenEnd => {
            // upper arm of the star, from its tip down to just above the centre
            let arm = Rect::new(cell.x + pw / 2 - 2, cell.y + interior + 1, 5, (ph / 2 - interior) as usize);
            let bg = spec.background(spec.primitive_kind(row as i64));
            for y in arm.y..arm.bottom() {
                for x in arm.x..arm.right() {
                    let v = out.get(x as usize, y as usize);
                    if v > bg {
                        out.set(x as usize, y as usize, (v - m).max(bg));
                    }
                }
            }
            rects.push(arm);
        }
        DefectKind::NettingMultiple => {
            let start = cell.x + interior;
            let end = start + defect.extent as i64;
            let last_col = cell.x + pw * (grid_cols - col) as i64;
            if defect.extent < spec.primitive_width || end > last_col {
                return Err(Error::OutOfBounds(format!(
                    "netting run of {} px must span at least two primitives inside the grid",
                    defect.extent
                )));
            }
            for dot_y in [cell.y + interior + 2, cell.y + ph - interior - 4] {
                let mut x = start;
                while x + 2 <= end {
                    let dot = Rect::new(x, dot_y, 2, 2);
                    for yy in dot.y..dot.bottom() {
                        for xx in dot.x..dot.right() {
                            let v = out.get(xx as usize, yy as usize);
                            out.set(xx as usize, yy as usize, v + m);
                        }
                    }
                    rects.push(dot);
                    x += 4;
                }
            }
        }
    }

    let mut truth = truth.clone();
    let mask = DefectMask { kind: defect.kind, rects };
    for r in 0..grid_rows {
        for c in 0..grid_cols {
            let p = spec.primitive_rect(c, r);
            if mask.rects.iter().any(|m| m.intersects(&p)) {
                truth.primitive_flags[r * grid_cols + c] = true;
            }
        }
    }
    let (lc, lr) = spec.subregion_layout;
    for sr in 0..spec.subregion_rows {
        for sc in 0..spec.subregion_cols {
            let rect = spec.subregion_rect(sc, sr);
            let any_prim = (0..lr).any(|r| (0..lc).any(|c| truth.primitive(sc * lc + c, sr * lr + r)));
            if any_prim || mask.rects.iter().any(|m| m.intersects(&rect)) {
                truth.subregion_flags[sr * spec.subregion_cols + sc] = true;
            }
        }
    }
    truth.masks.push(mask);
    Ok((out, truth))
}

/// Counts for a seeded corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub normal: usize,
    /// Defective images per defect kind.
    pub per_kind: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self { normal: 25, per_kind: 5, seed: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub image: GrayImage,
    pub truth: GroundTruth,
    pub defects: Vec<DefectSpec>,
}

fn image_seed(base: u64, index: u64) -> u64 {
    // splitmix64 step so neighbouring indices get unrelated noise streams
    let mut z = base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Normal images first, then `per_kind` images of each defect kind.
pub fn generate_corpus(fabric: &FabricSpec, corpus: &CorpusSpec) -> Result<Vec<Sample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(corpus.seed ^ 0x5EED_C0DE);
    let (grid_cols, grid_rows) = fabric.primitive_grid();
    let mut samples = Vec::new();
    let total = corpus.normal + corpus.per_kind * DefectKind::ALL.len();
    for i in 0..total {
        let spec = fabric.clone().with_seed(image_seed(corpus.seed, i as u64));
        let (mut image, mut truth) = generate_fabric(&spec)?;
        let mut defects = Vec::new();
        if i >= corpus.normal {
            let kind = DefectKind::ALL[(i - corpus.normal) / corpus.per_kind.max(1)];
            let mut d = DefectSpec::new(kind, rng.gen_range(0..grid_cols), rng.gen_range(0..grid_rows));
            if kind == DefectKind::NettingMultiple {
                let span = d.extent.div_ceil(fabric.primitive_width) + 1;
                d.location.0 = rng.gen_range(0..=grid_cols - span.min(grid_cols));
            }
            (image, truth) = inject_defect(&spec, &image, &truth, &d)?;
            defects.push(d);
        }
        let label = if defects.is_empty() { "normal".to_string() } else { format!("{:?}", defects[0].kind).to_lowercase() };
        samples.push(Sample { id: format!("img{i:03}_{label}"), image, truth, defects });
    }
    Ok(samples)
}

/// Defect-free images for training, from a seed stream disjoint from the
/// evaluation corpus.
pub fn generate_training_set(fabric: &FabricSpec, count: usize, seed: u64) -> Result<Vec<GrayImage>> {
    (0..count)
        .map(|i| generate_fabric(&fabric.clone().with_seed(image_seed(seed ^ 0x7A1B_0000_0000_0000, i as u64))).map(|(img, _)| img))
        .collect()
}
