//! Training and the two-stage detector.
//!
//! Stage 1 scores each sub-region's A-HOG vector by its reconstruction error
//! against the sub-dictionary of its (size class, kind) key. Only sub-regions
//! over threshold are cut into primitives for stage 2, which maps each
//! primitive's dense SIFT descriptors to word numbers (restricted LLC against
//! a per-position dictionary), compares the one-hot index map with the
//! template, and finally checks the nearest-word distances.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coding::{kmeans, lcre, rlc_assign, Codebook, CodebookFlavor, CodingParams, LcreMode, RlcOutcome};
use crate::error::{Error, Result};
use crate::features::{ahog, dense_sift};
use crate::imaging::{gaussian_smooth, GrayImage, Rect};
use crate::segment::{
    classify_subregion, segment_rule1, segment_rule2, Primitive, PrimitiveClassifier, PrimitiveKind, SegmentConfig, SizeClass, SubRegion,
    SubRegionKind,
};

/// Every tunable of training and detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub smooth_sigma: f64,
    pub smooth_radius: usize,
    pub segment: SegmentConfig,
    /// Words per A-HOG sub-dictionary.
    pub ahog_words: usize,
    pub coding: CodingParams,
    pub lcre_mode: LcreMode,
    /// Relative slack on the calibrated stage-1 and stage-2 thresholds.
    pub margin: f64,
    pub sift_patch: usize,
    pub sift_stride: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            smooth_sigma: 1.0,
            smooth_radius: 2,
            segment: SegmentConfig::default(),
            ahog_words: 5,
            coding: CodingParams::default(),
            lcre_mode: LcreMode::WeightedDistance,
            margin: 0.10,
            sift_patch: 16,
            sift_stride: 2,
            seed: 1,
        }
    }
}

impl PipelineConfig {
    pub fn smooth(&self, img: &GrayImage) -> Result<GrayImage> {
        gaussian_smooth(img, self.smooth_sigma, self.smooth_radius)
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhogEntry {
    pub size_class: SizeClass,
    pub kind: SubRegionKind,
    pub codebook: Codebook,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhogModel {
    /// Sorted by (size class, kind).
    pub entries: Vec<AhogEntry>,
    pub params: CodingParams,
    pub mode: LcreMode,
}

impl AhogModel {
    pub fn entry(&self, size_class: SizeClass, kind: SubRegionKind) -> Option<&AhogEntry> {
        self.entries.iter().find(|e| e.size_class == size_class && e.kind == kind)
    }

    /// Exact key, or else the same-kind entry with the closest raw size.
    pub fn resolve(&self, size_class: SizeClass, kind: SubRegionKind) -> Result<&AhogEntry> {
        if let Some(e) = self.entry(size_class, kind) {
            return Ok(e);
        }
        let gap = |e: &AhogEntry| e.size_class.l_h.abs_diff(size_class.l_h) + e.size_class.l_v.abs_diff(size_class.l_v);
        self.entries
            .iter()
            .filter(|e| e.kind == kind)
            .min_by_key(|e| gap(e))
            .ok_or_else(|| Error::UnknownKey(format!("{} {kind:?}", size_class.label())))
    }

    pub fn is_defective(&self, lcre: f64, threshold: f64) -> bool {
        if self.mode.higher_is_worse() {
            lcre > threshold
        } else {
            lcre < threshold
        }
    }
}

/// Fits one sub-dictionary per (size class, kind) key and calibrates its
/// threshold on the training scores. Every sub-region must carry a kind.
pub fn train_ahog(normals: &[SubRegion], words: usize, params: CodingParams, mode: LcreMode, margin: f64, seed: u64) -> Result<AhogModel> {
    params.validate(words)?;
    let mut groups: std::collections::BTreeMap<(SizeClass, SubRegionKind), Vec<Vec<f64>>> = Default::default();
    for sr in normals {
        let kind = sr.kind.ok_or_else(|| Error::InvalidParameter(format!("sub-region {:?} has no kind", sr.grid)))?;
        groups.entry((sr.size_class, kind)).or_default().push(ahog(sr)?.values);
    }
    if groups.is_empty() {
        return Err(Error::InsufficientData("no training sub-regions".into()));
    }
    let mut entries = Vec::with_capacity(groups.len());
    for (i, ((size_class, kind), descs)) in groups.into_iter().enumerate() {
        if descs.len() < words {
            return Err(Error::InsufficientData(format!("{} {kind:?} has {} sub-regions, needs {words}", size_class.label(), descs.len())));
        }
        let fit = kmeans(&descs, words, seed.wrapping_add(i as u64))?;
        let codebook =
            Codebook::new(fit.codebook.words().to_vec(), CodebookFlavor::LabelEmbedding { size_class, kind }, fit.codebook.seed)?;
        let scores =
            descs.iter().map(|d| lcre(std::slice::from_ref(d), &codebook, params.beta, params.k, mode)).collect::<Result<Vec<f64>>>()?;
        let threshold = match mode {
            LcreMode::WeightedDistance => scores.iter().copied().fold(0.0, f64::max) * (1.0 + margin),
            LcreMode::KernelSimilarity => scores.iter().copied().fold(f64::INFINITY, f64::min) * (1.0 - margin),
        };
        entries.push(AhogEntry { size_class, kind, codebook, threshold });
    }
    Ok(AhogModel { entries, params, mode })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageOneResult {
    pub lcre: f64,
    pub threshold: f64,
    pub defective: bool,
}

pub fn ahog_stage(sr: &SubRegion, m: &AhogModel) -> Result<StageOneResult> {
    let kind = sr.kind.ok_or_else(|| Error::UnknownKey(format!("sub-region {:?} has no kind", sr.grid)))?;
    let entry = m.resolve(sr.size_class, kind)?;
    let d = ahog(sr)?;
    let score = lcre(&[d.values], &entry.codebook, m.params.beta, m.params.k, m.mode)?;
    Ok(StageOneResult { lcre: score, threshold: entry.threshold, defective: m.is_defective(score, entry.threshold) })
}

/// Row-per-patch binary matrix with one set bit per row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryArray {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl BinaryArray {
    pub fn new(rows: usize, cols: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != rows * cols || bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidParameter(format!("{} bits do not form a {rows}x{cols} binary array", bits.len())));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.bits[r * self.cols + c]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.bits[r * self.cols..(r + 1) * self.cols]
    }

    /// 1-based column of the first set bit in each row.
    pub fn argmax(&self) -> Vec<usize> {
        (0..self.rows).map(|r| self.row(r).iter().position(|&b| b == 1).map_or(0, |c| c + 1)).collect()
    }

    /// Each column's maximum over the rows.
    pub fn max_pool_columns(&self) -> Vec<u8> {
        (0..self.cols).map(|c| (0..self.rows).map(|r| self.get(r, c)).max().unwrap_or(0)).collect()
    }

    pub fn is_permutation(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| self.row(r).iter().map(|&b| b as usize).sum::<usize>() == 1)
            && (0..self.cols).all(|c| (0..self.rows).map(|r| self.get(r, c) as usize).sum::<usize>() == 1)
    }
}

/// One row per index with a single 1 at column `index` (1-based).
pub fn one_hot(indexes: &[usize], m: usize) -> Result<BinaryArray> {
    let mut bits = vec![0u8; indexes.len() * m];
    for (r, &i) in indexes.iter().enumerate() {
        if i == 0 || i > m {
            return Err(Error::InvalidParameter(format!("index {i} outside 1..={m}")));
        }
        bits[r * m + i - 1] = 1;
    }
    BinaryArray::new(indexes.len(), m, bits)
}

/// Count of differing bits.
pub fn hamming(a: &BinaryArray, b: &BinaryArray) -> Result<usize> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(Error::DimensionMismatch { expected: a.rows * a.cols, actual: b.rows * b.cols });
    }
    Ok(a.bits.iter().zip(&b.bits).filter(|(x, y)| x != y).count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiftKindModel {
    pub kind: PrimitiveKind,
    /// One word per patch position, randomly numbered.
    pub codebook: Codebook,
    pub template: BinaryArray,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiftModel {
    pub kinds: Vec<SiftKindModel>,
    pub patch: usize,
    pub stride: usize,
    pub k: usize,
    pub lambda: f64,
}

impl SiftModel {
    pub fn for_kind(&self, kind: PrimitiveKind) -> Result<&SiftKindModel> {
        self.kinds.iter().find(|m| m.kind == kind).ok_or_else(|| Error::UnknownKey(format!("no SIFT model for {kind:?}")))
    }
}

/// Per patch position a single K-Means word, then a seeded numbering and the
/// template of each position's own word.
pub fn train_sift(normals: &[Primitive], patch: usize, stride: usize, params: &CodingParams, margin: f64, seed: u64) -> Result<SiftModel> {
    let mut kinds = Vec::new();
    for (ki, kind) in [PrimitiveKind::Star1, PrimitiveKind::Star2].into_iter().enumerate() {
        let descs = normals
            .iter()
            .filter(|p| p.kind == Some(kind))
            .map(|p| dense_sift(p, patch, stride).map(|d| d.into_iter().map(|d| d.values).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        if descs.is_empty() {
            return Err(Error::InsufficientData(format!("no training primitives of kind {kind:?}")));
        }
        let positions = descs[0].len();
        let mut words = Vec::with_capacity(positions);
        for pos in 0..positions {
            let column: Vec<&[f64]> = descs.iter().map(|d| d[pos].as_slice()).collect();
            words.push(kmeans(&column, 1, seed.wrapping_add(pos as u64))?.codebook.word(0).to_vec());
        }
        let codebook = Codebook::new(words, CodebookFlavor::Plain, seed)?.randomly_numbered(seed.wrapping_add(0x51F7 + ki as u64));
        let numbers: Vec<usize> = (0..positions).map(|p| codebook.number_of(p)).collect();
        let template = one_hot(&numbers, codebook.len())?;
        let mut rho: f64 = 0.0;
        for prim in &descs {
            for x in prim {
                let nearest = codebook.words().iter().map(|w| crate::coding::squared_distance(x, w)).fold(f64::INFINITY, f64::min);
                rho = rho.max(nearest.sqrt());
            }
        }
        // all training descriptors equal their words: keep a usable scope
        let rho = if rho > 0.0 { rho * (1.0 + margin) } else { f64::EPSILON };
        kinds.push(SiftKindModel { kind, codebook, template, rho });
    }
    Ok(SiftModel { kinds, patch, stride, k: params.k, lambda: params.lambda })
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoiMap {
    /// Word number per patch plus the largest nearest-word distance.
    Indexes {
        indexes: Vec<usize>,
        max_distance: f64,
    },
    OutOfScope {
        position: usize,
        distance: f64,
    },
}

/// Word numbers of an ordered descriptor list; stops at the first descriptor
/// with no word inside the scope radius.
pub fn boi_map<T: AsRef<[f64]>>(descriptors: &[T], m: &SiftKindModel, k: usize, lambda: f64) -> Result<BoiMap> {
    let mut indexes = Vec::with_capacity(descriptors.len());
    let mut max_distance: f64 = 0.0;
    let k = k.min(m.codebook.len());
    for (position, x) in descriptors.iter().enumerate() {
        match rlc_assign(x.as_ref(), &m.codebook, k, m.rho, lambda)? {
            RlcOutcome::OutOfScope { distance } => return Ok(BoiMap::OutOfScope { position, distance }),
            RlcOutcome::Code { nearest, distance, .. } => {
                indexes.push(m.codebook.number_of(nearest));
                max_distance = max_distance.max(distance);
            }
        }
    }
    Ok(BoiMap::Indexes { indexes, max_distance })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureStep {
    /// A descriptor had no word inside the scope radius.
    Scope,
    /// The index map differs from the template.
    Index,
    /// Largest nearest-word distance reached the scope radius.
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTwoResult {
    pub dif: Option<usize>,
    pub max_distance: f64,
    pub defective: bool,
    pub failure: Option<FailureStep>,
}

pub fn sift_stage(p: &Primitive, m: &SiftModel) -> Result<StageTwoResult> {
    let kind = p.kind.ok_or_else(|| Error::UnknownKey(format!("primitive {:?} has no kind", p.cell)))?;
    let km = m.for_kind(kind)?;
    let descs: Vec<Vec<f64>> = dense_sift(p, m.patch, m.stride)?.into_iter().map(|d| d.values).collect();
    let (indexes, max_distance) = match boi_map(&descs, km, m.k, m.lambda)? {
        BoiMap::OutOfScope { distance, .. } => {
            return Ok(StageTwoResult { dif: None, max_distance: distance, defective: true, failure: Some(FailureStep::Scope) })
        }
        BoiMap::Indexes { indexes, max_distance } => (indexes, max_distance),
    };
    let dif = hamming(&km.template, &one_hot(&indexes, km.codebook.len())?)?;
    let failure = if dif != 0 {
        Some(FailureStep::Index)
    } else if max_distance >= km.rho {
        Some(FailureStep::Distance)
    } else {
        None
    };
    Ok(StageTwoResult { dif: Some(dif), max_distance, defective: failure.is_some(), failure })
}

/// Trained models plus the configuration they were built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub classifier: PrimitiveClassifier,
    pub ahog: AhogModel,
    pub sift: SiftModel,
}

pub const BUNDLE_FORMAT: &str = "fabscan-model";
pub const BUNDLE_VERSION: u32 = 1;

impl ModelBundle {
    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("model bundle serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let b: ModelBundle = serde_json::from_str(text).map_err(|e| Error::Format { what: "model bundle", message: e.to_string() })?;
        if b.format != BUNDLE_FORMAT || b.version != BUNDLE_VERSION {
            return Err(Error::Format { what: "model bundle", message: format!("unsupported {} v{}", b.format, b.version) });
        }
        if b.config_hash != b.config.hash() {
            return Err(Error::Format { what: "model bundle", message: "config hash does not match its config".into() });
        }
        Ok(b)
    }
}

/// Calibrates the primitive classifier and trains both stages on defect-free
/// images.
pub fn train(images: &[GrayImage], cfg: &PipelineConfig) -> Result<ModelBundle> {
    let smoothed = images.iter().map(|img| cfg.smooth(img)).collect::<Result<Vec<_>>>()?;
    let mut subregions = Vec::new();
    for img in &smoothed {
        subregions.extend(segment_rule1(img, &cfg.segment)?);
    }
    let mut crops = Vec::new();
    let mut per_sr = Vec::with_capacity(subregions.len());
    for sr in &subregions {
        let prims = segment_rule2(sr, &cfg.segment)?;
        crops.extend(prims.iter().map(|p| p.pixels.clone()));
        per_sr.push(prims);
    }
    let classifier = PrimitiveClassifier::calibrate_unlabeled(crops.iter())?;
    let mut primitives = Vec::new();
    for (sr, prims) in subregions.iter_mut().zip(per_sr) {
        let kind = classify_subregion(sr, &classifier, &cfg.segment)?;
        sr.kind = Some(kind);
        primitives.extend(prims.into_iter().map(|mut p| {
            p.kind = Some(kind.row_kinds()[p.cell.1.min(2)]);
            p
        }));
    }
    let ahog = train_ahog(&subregions, cfg.ahog_words, cfg.coding, cfg.lcre_mode, cfg.margin, cfg.seed)?;
    let sift = train_sift(&primitives, cfg.sift_patch, cfg.sift_stride, &cfg.coding, cfg.margin, cfg.seed)?;
    Ok(ModelBundle {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        config_hash: cfg.hash(),
        config: cfg.clone(),
        classifier,
        ahog,
        sift,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindSource {
    Classifier,
    /// Row ordering was inconclusive; the key with the best stage-1 fit was used.
    BestFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubRegionReport {
    pub grid: (usize, usize),
    pub bounds: Rect,
    pub size_class: SizeClass,
    pub kind: SubRegionKind,
    pub kind_source: KindSource,
    pub lcre: f64,
    pub threshold: f64,
    pub stage1_defective: bool,
    pub entered_sift: bool,
    /// Rule II could not cut the sub-region; it stays flagged.
    pub rule2_failed: bool,
    pub defective: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveReport {
    pub subregion: (usize, usize),
    pub cell: (usize, usize),
    pub bounds: Rect,
    pub kind: PrimitiveKind,
    pub dif: Option<usize>,
    pub max_distance: f64,
    pub defective: bool,
    pub failure: Option<FailureStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub segment: Duration,
    pub ahog: Duration,
    pub sift: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub image: String,
    pub defective: bool,
    pub subregions: Vec<SubRegionReport>,
    pub primitives: Vec<PrimitiveReport>,
    /// Wall-clock figures vary between runs, so they stay out of the
    /// serialized report.
    #[serde(skip)]
    pub timings: StageTimings,
}

impl DetectionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per sub-region and one per examined primitive.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("image,level,sr_col,sr_row,cell_col,cell_row,x,y,width,height,kind,score,threshold,dif,failure,defective\n");
        for s in &self.subregions {
            out.push_str(&format!(
                "{},subregion,{},{},,,{},{},{},{},{:?},{},{},,,{}\n",
                self.image,
                s.grid.0,
                s.grid.1,
                s.bounds.x,
                s.bounds.y,
                s.bounds.width,
                s.bounds.height,
                s.kind,
                s.lcre,
                s.threshold,
                s.defective
            ));
        }
        for p in &self.primitives {
            out.push_str(&format!(
                "{},primitive,{},{},{},{},{},{},{},{},{:?},{},,{},{},{}\n",
                self.image,
                p.subregion.0,
                p.subregion.1,
                p.cell.0,
                p.cell.1,
                p.bounds.x,
                p.bounds.y,
                p.bounds.width,
                p.bounds.height,
                p.kind,
                p.max_distance,
                p.dif.map(|d| d.to_string()).unwrap_or_default(),
                p.failure.map(|f| format!("{f:?}").to_lowercase()).unwrap_or_default(),
                p.defective
            ));
        }
        out
    }

    pub fn defective_primitives(&self) -> impl Iterator<Item = &PrimitiveReport> {
        self.primitives.iter().filter(|p| p.defective)
    }
}

/// Stage 1 with the kind from the classifier, or the better-fitting kind when
/// the row ordering is not one of the two known ones.
pub fn screen(sr: &mut SubRegion, bundle: &ModelBundle) -> Result<(StageOneResult, KindSource)> {
    if let Ok(kind) = classify_subregion(sr, &bundle.classifier, &bundle.config.segment) {
        sr.kind = Some(kind);
        return Ok((ahog_stage(sr, &bundle.ahog)?, KindSource::Classifier));
    }
    let mut best: Option<(StageOneResult, SubRegionKind)> = None;
    for kind in [SubRegionKind::Subregion1, SubRegionKind::Subregion2] {
        sr.kind = Some(kind);
        let r = ahog_stage(sr, &bundle.ahog)?;
        let margin = |r: &StageOneResult| if bundle.ahog.mode.higher_is_worse() { r.lcre - r.threshold } else { r.threshold - r.lcre };
        if best.as_ref().is_none_or(|(b, _)| margin(&r) < margin(b)) {
            best = Some((r, kind));
        }
    }
    let (r, kind) = best.expect("two candidates");
    sr.kind = Some(kind);
    Ok((r, KindSource::BestFit))
}

pub fn detect_image(name: &str, img: &GrayImage, bundle: &ModelBundle) -> Result<DetectionReport> {
    let start = Instant::now();
    let cfg = &bundle.config;
    let smoothed = cfg.smooth(img)?;
    let mut subregions = segment_rule1(&smoothed, &cfg.segment)?;
    let mut timings = StageTimings { segment: start.elapsed(), ..Default::default() };

    let mut sr_reports = Vec::with_capacity(subregions.len());
    let mut prim_reports = Vec::new();
    for sr in &mut subregions {
        let t = Instant::now();
        let (s1, kind_source) = screen(sr, bundle)?;
        timings.ahog += t.elapsed();
        let kind = sr.kind.expect("screen sets the kind");
        let mut report = SubRegionReport {
            grid: sr.grid,
            bounds: sr.bounds,
            size_class: sr.size_class,
            kind,
            kind_source,
            lcre: s1.lcre,
            threshold: s1.threshold,
            stage1_defective: s1.defective,
            entered_sift: false,
            rule2_failed: false,
            defective: false,
        };
        if s1.defective {
            let t = Instant::now();
            report.entered_sift = true;
            match segment_rule2(sr, &cfg.segment) {
                Ok(prims) => {
                    for p in &prims {
                        let r = sift_stage(p, &bundle.sift)?;
                        report.defective |= r.defective;
                        prim_reports.push(PrimitiveReport {
                            subregion: sr.grid,
                            cell: p.cell,
                            bounds: p.bounds,
                            kind: p.kind.expect("rule II sets kinds from the sub-region"),
                            dif: r.dif,
                            max_distance: r.max_distance,
                            defective: r.defective,
                            failure: r.failure,
                        });
                    }
                }
                Err(Error::Segmentation { .. }) => {
                    report.rule2_failed = true;
                    report.defective = true;
                }
                Err(e) => return Err(e),
            }
            timings.sift += t.elapsed();
        }
        sr_reports.push(report);
    }
    timings.total = start.elapsed();
    Ok(DetectionReport {
        image: name.to_string(),
        defective: sr_reports.iter().any(|s| s.defective),
        subregions: sr_reports,
        primitives: prim_reports,
        timings,
    })
}
