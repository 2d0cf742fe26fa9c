//! Scoring detection reports against ground truth, ROC curves, and the
//! index-map versus histogram comparison.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{boi_map, one_hot, screen, BoiMap, DetectionReport, ModelBundle};
use crate::coding::{hard_assign, kmeans, Codebook};
use crate::error::{Error, Result};
use crate::features::dense_sift;
use crate::imaging::Rect;
use crate::segment::{segment_rule1, segment_rule2};
use crate::synthgen::{FabricSpec, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Image,
    SubRegion,
    Primitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub level: Level,
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    pub accuracy: f64,
    /// `None` without any actual defect.
    pub recall: Option<f64>,
    /// `None` without any actual normal.
    pub false_alarm_rate: Option<f64>,
}

impl Metrics {
    pub fn from_counts(level: Level, tp: usize, fp: usize, tn: usize, fn_: usize) -> Result<Self> {
        let total = tp + fp + tn + fn_;
        if total == 0 {
            return Err(Error::InsufficientData("no items to score".into()));
        }
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        Ok(Self {
            level,
            true_positive: tp,
            false_positive: fp,
            true_negative: tn,
            false_negative: fn_,
            accuracy: (tp + tn) as f64 / total as f64,
            recall: ratio(tp, tp + fn_),
            false_alarm_rate: ratio(fp, fp + tn),
        })
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }
}

/// Lattice cell of the tracked grid whose rectangle holds the centre of `r`.
pub fn lattice_cell(spec: &FabricSpec, r: &Rect) -> Option<(usize, usize)> {
    let cx = r.x + r.width as i64 / 2 - spec.origin.0 as i64;
    let cy = r.y + r.height as i64 / 2 - spec.origin.1 as i64;
    let (cols, rows) = spec.primitive_grid();
    if cx < 0 || cy < 0 {
        return None;
    }
    let (c, row) = (cx as usize / spec.primitive_width, cy as usize / spec.primitive_height);
    (c < cols && row < rows).then_some((c, row))
}

/// Sub-region cell of the tracked grid whose rectangle holds the centre of `r`.
pub fn subregion_cell(spec: &FabricSpec, r: &Rect) -> Option<(usize, usize)> {
    lattice_cell(spec, r).map(|(c, row)| (c / spec.subregion_layout.0, row / spec.subregion_layout.1))
}

/// Confusion counts of reports against truth at one level. Reports and truth
/// are matched by image name.
pub fn score_reports(reports: &[DetectionReport], truths: &[(String, GroundTruth)], spec: &FabricSpec, level: Level) -> Result<Metrics> {
    if reports.is_empty() {
        return Err(Error::InsufficientData("empty report set".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut tally = |predicted: bool, actual: bool| match (predicted, actual) {
        (true, true) => tp += 1,
        (true, false) => fp += 1,
        (false, false) => tn += 1,
        (false, true) => fn_ += 1,
    };
    for report in reports {
        let truth = truths
            .iter()
            .find(|(name, _)| *name == report.image)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::UnknownKey(format!("no ground truth for {}", report.image)))?;
        match level {
            Level::Image => tally(report.defective, truth.is_defective()),
            Level::SubRegion => {
                for row in 0..truth.subregion_rows {
                    for col in 0..truth.subregion_cols {
                        let predicted =
                            report.subregions.iter().any(|s| s.defective && subregion_cell(spec, &s.bounds) == Some((col, row)));
                        tally(predicted, truth.subregion(col, row));
                    }
                }
            }
            Level::Primitive => {
                for row in 0..truth.grid_rows {
                    for col in 0..truth.grid_cols {
                        let predicted = report.defective_primitives().any(|p| lattice_cell(spec, &p.bounds) == Some((col, row)));
                        tally(predicted, truth.primitive(col, row));
                    }
                }
            }
        }
    }
    Metrics::from_counts(level, tp, fp, tn, fn_)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate), non-decreasing in both.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (f, t) in &self.points {
            out.push_str(&format!("{f},{t}\n"));
        }
        out
    }
}

/// ROC of `(score, is_defective)` pairs, higher scores meaning more
/// defective. Thresholds sweep the distinct scores; AUC is trapezoidal.
pub fn roc(scores: &[(f64, bool)]) -> Result<RocCurve> {
    let pos = scores.iter().filter(|s| s.1).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientData(format!("ROC needs both classes, got {pos} positive and {neg} negative")));
    }
    if scores.iter().any(|s| s.0.is_nan()) {
        return Err(Error::InvalidParameter("NaN score".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == t {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
    Ok(RocCurve { points, auc })
}

/// Per-item scores for the two stages, computed on every sub-region and
/// every primitive regardless of the cascade's gating.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageScores {
    /// Stage-1 score relative to its threshold, oriented so larger is worse.
    pub subregions: Vec<(f64, bool)>,
    /// Largest nearest-word distance relative to the scope radius.
    pub primitives: Vec<(f64, bool)>,
}

impl StageScores {
    pub fn extend(&mut self, other: StageScores) {
        self.subregions.extend(other.subregions);
        self.primitives.extend(other.primitives);
    }
}

pub fn stage_scores(img: &crate::imaging::GrayImage, truth: &GroundTruth, spec: &FabricSpec, bundle: &ModelBundle) -> Result<StageScores> {
    let cfg = &bundle.config;
    let smoothed = cfg.smooth(img)?;
    let mut out = StageScores::default();
    for mut sr in segment_rule1(&smoothed, &cfg.segment)? {
        let Some((sc, sr_row)) = subregion_cell(spec, &sr.bounds) else { continue };
        let (s1, _) = screen(&mut sr, bundle)?;
        let rel = if bundle.ahog.mode.higher_is_worse() { s1.lcre / s1.threshold } else { s1.threshold / s1.lcre };
        out.subregions.push((rel, truth.subregion(sc, sr_row)));
        let Ok(prims) = segment_rule2(&sr, &cfg.segment) else { continue };
        for p in prims {
            let Some((pc, pr)) = lattice_cell(spec, &p.bounds) else { continue };
            let km = bundle.sift.for_kind(p.kind.expect("rule II sets kinds"))?;
            let descs: Vec<Vec<f64>> = dense_sift(&p, bundle.sift.patch, bundle.sift.stride)?.into_iter().map(|d| d.values).collect();
            let score = match boi_map(&descs, km, bundle.sift.k, bundle.sift.lambda)? {
                BoiMap::OutOfScope { distance, .. } => distance,
                BoiMap::Indexes { indexes, max_distance } => {
                    if one_hot(&indexes, km.codebook.len())? != km.template {
                        // an index failure is at least as bad as the scope edge
                        max_distance.max(km.rho)
                    } else {
                        max_distance
                    }
                }
            };
            out.primitives.push((score / km.rho, truth.primitive(pc, pr)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BofHistogram {
    pub counts: Vec<f64>,
    pub normalized: bool,
}

impl BofHistogram {
    pub fn normalize(mut self) -> Self {
        let total: f64 = self.counts.iter().sum();
        if total > 0.0 && !self.normalized {
            self.counts.iter_mut().for_each(|c| *c /= total);
        }
        self.normalized = true;
        self
    }
}

/// Hard-assignment word counts.
pub fn bof_encode<T: AsRef<[f64]>>(descriptors: &[T], b: &Codebook) -> Result<BofHistogram> {
    let mut counts = vec![0.0; b.len()];
    for x in descriptors {
        let code = hard_assign(x.as_ref(), b)?;
        counts[code.support[0]] += 1.0;
    }
    Ok(BofHistogram { counts, normalized: false })
}

/// Synthetic multi-class corpus for the index-map versus histogram test. Each
/// item is an ordered list of `positions` descriptors drawn around prototypes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSpec {
    pub classes: usize,
    pub positions: usize,
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise: f64,
    /// Words per (class, position) block; one table row each.
    pub word_counts: Vec<usize>,
    /// When true every class uses the same prototypes in its own order, so
    /// word histograms collide; otherwise classes have disjoint prototypes.
    pub shared_prototypes: bool,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            positions: 4,
            dim: 16,
            train_per_class: 20,
            test_per_class: 20,
            noise: 0.15,
            word_counts: vec![1, 2, 4],
            shared_prototypes: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub words_per_block: usize,
    pub dictionary_size: usize,
    pub bof_accuracy: f64,
    pub boi_accuracy: f64,
}

pub fn bench_table_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("words_per_block,dictionary_size,bof_accuracy,boi_accuracy\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.words_per_block, r.dictionary_size, r.bof_accuracy, r.boi_accuracy));
    }
    out
}

type Item = Vec<Vec<f64>>;
type Labelled = Vec<(Item, usize)>;

fn bench_corpus(spec: &BenchSpec, rng: &mut ChaCha8Rng) -> (Labelled, Labelled) {
    let n_protos = if spec.shared_prototypes { spec.positions } else { spec.positions * spec.classes };
    let protos: Vec<Vec<f64>> = (0..n_protos).map(|_| (0..spec.dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut orders = Vec::with_capacity(spec.classes);
    for c in 0..spec.classes {
        let order: Vec<usize> = if spec.shared_prototypes {
            // distinct cyclic shifts keep classes apart even for tiny position counts
            let mut base: Vec<usize> = (0..spec.positions).collect();
            base.rotate_left(c % spec.positions);
            if c >= spec.positions {
                base.shuffle(rng);
            }
            base
        } else {
            (0..spec.positions).map(|p| c * spec.positions + p).collect()
        };
        orders.push(order);
    }
    let draw = |class: usize, rng: &mut ChaCha8Rng| -> Item {
        orders[class].iter().map(|&pi| protos[pi].iter().map(|v| v + rng.gen_range(-spec.noise..spec.noise)).collect()).collect()
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..spec.classes {
        for _ in 0..spec.train_per_class {
            train.push((draw(c, rng), c));
        }
        for _ in 0..spec.test_per_class {
            test.push((draw(c, rng), c));
        }
    }
    (train, test)
}

fn nearest_centroid(train: &[(Vec<f64>, usize)], test: &[(Vec<f64>, usize)], classes: usize) -> f64 {
    let dim = train[0].0.len();
    let mut centroids = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (f, c) in train {
        counts[*c] += 1;
        centroids[*c].iter_mut().zip(f).for_each(|(a, b)| *a += b);
    }
    for (cen, n) in centroids.iter_mut().zip(&counts) {
        cen.iter_mut().for_each(|v| *v /= *n as f64);
    }
    let correct = test
        .iter()
        .filter(|(f, c)| {
            let best = (0..classes)
                .min_by(|&a, &b| {
                    crate::coding::squared_distance(f, &centroids[a])
                        .total_cmp(&crate::coding::squared_distance(f, &centroids[b]))
                        .then(a.cmp(&b))
                })
                .expect("classes >= 1");
            best == *c
        })
        .count();
    correct as f64 / test.len() as f64
}

/// Trains per-(class, position) word blocks, then classifies held-out items
/// by nearest centroid on (a) word histograms over the concatenated
/// dictionary and (b) column max-pooled one-hot index maps, where each
/// position is coded only against its own position's blocks.
pub fn boi_vs_bof_bench(spec: &BenchSpec, seed: u64) -> Result<Vec<BenchRow>> {
    if spec.classes < 2 || spec.positions == 0 || spec.dim == 0 {
        return Err(Error::InvalidParameter("bench needs at least 2 classes, 1 position and 1 dimension".into()));
    }
    if spec.train_per_class < 2 || spec.test_per_class < 1 {
        return Err(Error::InsufficientData("every class needs at least 2 training samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (train, test) = bench_corpus(spec, &mut rng);
    let mut rows = Vec::new();
    for &w in &spec.word_counts {
        if w == 0 || w > spec.train_per_class {
            return Err(Error::InvalidParameter(format!("{w} words per block with {} samples per class", spec.train_per_class)));
        }
        // blocks[position][class] -> words; global numbering is class-major
        let mut words = vec![Vec::new(); spec.classes * spec.positions * w];
        for c in 0..spec.classes {
            for p in 0..spec.positions {
                let column: Vec<&[f64]> = train.iter().filter(|(_, cc)| *cc == c).map(|(item, _)| item[p].as_slice()).collect();
                let fit = kmeans(&column, w, seed.wrapping_add((c * spec.positions + p) as u64))?;
                for (j, word) in fit.codebook.words().iter().enumerate() {
                    words[(c * spec.positions + p) * w + j] = word.clone();
                }
            }
        }
        let full = Codebook::plain(words.clone())?;
        let per_position: Vec<(Codebook, Vec<usize>)> = (0..spec.positions)
            .map(|p| {
                let ids: Vec<usize> = (0..spec.classes).flat_map(|c| (0..w).map(move |j| (c * spec.positions + p) * w + j)).collect();
                Ok((Codebook::plain(ids.iter().map(|&i| words[i].clone()).collect())?, ids))
            })
            .collect::<Result<_>>()?;

        let bof = |item: &Item| -> Result<Vec<f64>> { Ok(bof_encode(item, &full)?.normalize().counts) };
        let boi = |item: &Item| -> Result<Vec<f64>> {
            let mut indexes = Vec::with_capacity(item.len());
            for (p, x) in item.iter().enumerate() {
                let (cb, ids) = &per_position[p];
                indexes.push(ids[hard_assign(x, cb)?.support[0]] + 1);
            }
            Ok(one_hot(&indexes, full.len())?.max_pool_columns().into_iter().map(f64::from).collect())
        };
        let featurize = |set: &[(Item, usize)], f: &dyn Fn(&Item) -> Result<Vec<f64>>| -> Result<Vec<(Vec<f64>, usize)>> {
            set.iter().map(|(item, c)| Ok((f(item)?, *c))).collect()
        };
        let bof_acc = nearest_centroid(&featurize(&train, &bof)?, &featurize(&test, &bof)?, spec.classes);
        let boi_acc = nearest_centroid(&featurize(&train, &boi)?, &featurize(&test, &boi)?, spec.classes);
        rows.push(BenchRow { words_per_block: w, dictionary_size: full.len(), bof_accuracy: bof_acc, boi_accuracy: boi_acc });
    }
    Ok(rows)
}
