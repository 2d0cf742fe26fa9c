//! Visual-word codebooks and descriptor coding.
//!
//! A [`Codebook`] holds `M` words of dimension `D`. Every coding method maps a
//! descriptor `x` to a length-`M` [`CodeVector`]:
//!
//! | method           | support                     | coefficients                         |
//! |------------------|-----------------------------|--------------------------------------|
//! | [`hard_assign`]  | nearest word                | one `1`                              |
//! | [`soft_assign`]  | all words                   | Gaussian-kernel weights, sum 1       |
//! | [`lsc_assign`]   | `k` nearest                 | kernel weights, sum 1                |
//! | [`llc_approx`]   | `k` nearest                 | affine least squares, sum 1          |
//! | [`llc_full`]     | all words                   | locality-weighted least squares      |
//! | [`rlc_assign`]   | `k` nearest within `rho`    | as `llc_approx`, or out of scope     |
//!
//! Nearest-neighbour ties always go to the lowest word index.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::{SizeClass, SubRegionKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CodebookFlavor {
    /// Straight K-Means output.
    Plain,
    /// Sub-dictionary for one (size class, sub-region kind) key.
    LabelEmbedding { size_class: SizeClass, kind: SubRegionKind },
    /// `numbering[j]` is the 1-based number assigned to word `j`; a bijection
    /// onto `1..=M`.
    NumberEmbedding { numbering: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CodebookFile", try_from = "CodebookFile")]
pub struct Codebook {
    words: Vec<Vec<f64>>,
    pub flavor: CodebookFlavor,
    pub seed: u64,
}

impl Codebook {
    pub fn new(words: Vec<Vec<f64>>, flavor: CodebookFlavor, seed: u64) -> Result<Self> {
        let dim = words.first().map(Vec::len).ok_or_else(|| Error::InvalidParameter("codebook needs at least one word".into()))?;
        if dim == 0 {
            return Err(Error::InvalidParameter("codebook words must be non-empty".into()));
        }
        if let Some(w) = words.iter().find(|w| w.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: w.len() });
        }
        if let CodebookFlavor::NumberEmbedding { numbering } = &flavor {
            let mut seen = vec![false; words.len()];
            if numbering.len() != words.len() {
                return Err(Error::InvalidParameter("numbering length differs from word count".into()));
            }
            for &n in numbering {
                if n == 0 || n > words.len() || std::mem::replace(&mut seen[n - 1], true) {
                    return Err(Error::InvalidParameter(format!("numbering {numbering:?} is not a bijection onto 1..={}", words.len())));
                }
            }
        }
        Ok(Self { words, flavor, seed })
    }

    pub fn plain(words: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(words, CodebookFlavor::Plain, 0)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.words[0].len()
    }

    pub fn words(&self) -> &[Vec<f64>] {
        &self.words
    }

    pub fn word(&self, j: usize) -> &[f64] {
        &self.words[j]
    }

    /// Assigns a seeded random numbering, turning this into a number-embedding dictionary.
    pub fn randomly_numbered(mut self, seed: u64) -> Self {
        let mut numbering: Vec<usize> = (1..=self.len()).collect();
        numbering.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.flavor = CodebookFlavor::NumberEmbedding { numbering };
        self
    }

    /// 1-based number of word `j` (its position + 1 unless number-embedded).
    pub fn number_of(&self, j: usize) -> usize {
        match &self.flavor {
            CodebookFlavor::NumberEmbedding { numbering } => numbering[j],
            _ => j + 1,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(&CodebookFile::from(self)).expect("codebook serializes")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let file: CodebookFile = serde_json::from_str(text).map_err(|e| Error::Format { what: "codebook", message: e.to_string() })?;
        file.try_into()
    }
}

pub const CODEBOOK_FORMAT: &str = "fabscan-codebook";
pub const CODEBOOK_VERSION: u32 = 1;

/// On-disk codebook layout: words flattened row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodebookFile {
    pub format: String,
    pub version: u32,
    pub flavor: CodebookFlavor,
    pub rows: usize,
    pub dim: usize,
    pub seed: u64,
    pub words: Vec<f64>,
}

impl From<Codebook> for CodebookFile {
    fn from(cb: Codebook) -> Self {
        Self::from(&cb)
    }
}

impl From<&Codebook> for CodebookFile {
    fn from(cb: &Codebook) -> Self {
        Self {
            format: CODEBOOK_FORMAT.into(),
            version: CODEBOOK_VERSION,
            flavor: cb.flavor.clone(),
            rows: cb.len(),
            dim: cb.dim(),
            seed: cb.seed,
            words: cb.words.iter().flatten().copied().collect(),
        }
    }
}

impl TryFrom<CodebookFile> for Codebook {
    type Error = Error;

    fn try_from(f: CodebookFile) -> Result<Self> {
        if f.format != CODEBOOK_FORMAT || f.version != CODEBOOK_VERSION {
            return Err(Error::Format { what: "codebook", message: format!("unsupported {} v{}", f.format, f.version) });
        }
        if f.dim == 0 || f.words.len() != f.rows * f.dim {
            return Err(Error::Format { what: "codebook", message: format!("{} values for {}x{}", f.words.len(), f.rows, f.dim) });
        }
        Codebook::new(f.words.chunks(f.dim).map(<[f64]>::to_vec).collect(), f.flavor, f.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodingParams {
    /// Kernel softness.
    pub beta: f64,
    /// Neighbourhood size.
    pub k: usize,
    /// LLC regularizer.
    pub lambda: f64,
    /// LLC locality decay.
    pub sigma: f64,
    /// RLC scope radius.
    pub rho: f64,
}

impl Default for CodingParams {
    fn default() -> Self {
        Self { beta: 1.0, k: 3, lambda: 1e-4, sigma: 1.0, rho: 1.0 }
    }
}

impl CodingParams {
    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.beta > 0.0) || self.k == 0 || self.k > m || !(self.lambda >= 0.0) || !(self.sigma > 0.0) || !(self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!("coding parameters {self:?} invalid for M={m}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeVector {
    /// Dense length-`M` coefficients.
    pub coefficients: Vec<f64>,
    /// Indices of the nonzero coefficients, ascending.
    pub support: Vec<usize>,
}

impl CodeVector {
    fn from_dense(coefficients: Vec<f64>) -> Self {
        let support = coefficients.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, _)| i).collect();
        Self { coefficients, support }
    }

    fn indicator(m: usize, j: usize) -> Self {
        let mut c = vec![0.0; m];
        c[j] = 1.0;
        Self { coefficients: c, support: vec![j] }
    }

    pub fn sum(&self) -> f64 {
        self.coefficients.iter().sum()
    }

    /// `B c`, the reconstruction of the coded descriptor.
    pub fn reconstruct(&self, b: &Codebook) -> Vec<f64> {
        let mut out = vec![0.0; b.dim()];
        for &j in &self.support {
            for (o, w) in out.iter_mut().zip(b.word(j)) {
                *o += self.coefficients[j] * w;
            }
        }
        out
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn squared_distances(x: &[f64], b: &Codebook) -> Vec<f64> {
    b.words.iter().map(|w| squared_distance(x, w)).collect()
}

/// Indices of the `k` smallest entries, ordered by (value, index).
fn nearest_indices(d2: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d2.len()).collect();
    idx.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Result of [`kmeans`] with the per-iteration objective trace.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Within-cluster sum of squares after each assignment step.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
    pub assignments: Vec<usize>,
}

pub const KMEANS_MAX_ITER: usize = 100;

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded on
/// the point farthest from its centroid. Deterministic for a fixed seed.
pub fn kmeans<T: AsRef<[f64]>>(data: &[T], m: usize, seed: u64) -> Result<KMeansFit> {
    let n = data.len();
    if m == 0 {
        return Err(Error::InvalidParameter("K-Means needs M >= 1".into()));
    }
    if n < m {
        return Err(Error::InsufficientData(format!("{n} descriptors for {m} words")));
    }
    let dim = data[0].as_ref().len();
    if let Some(bad) = data.iter().find(|d| d.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, actual: bad.as_ref().len() });
    }
    let point = |i: usize| data[i].as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    centroids.push(point(first).to_vec());
    let mut closest: Vec<f64> = (0..n).map(|i| squared_distance(point(i), &centroids[0])).collect();
    while centroids.len() < m {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in closest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| closest.iter().rposition(|&d| d > 0.0).expect("positive total"))
        } else {
            (0..n).find(|&i| !chosen[i]).expect("n >= m")
        };
        chosen[pick] = true;
        centroids.push(point(pick).to_vec());
        let c = centroids.last().expect("just pushed");
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(squared_distance(point(i), c));
        }
    }

    let mut history = Vec::new();
    let mut previous: Option<Vec<usize>> = None;
    let mut iterations = 0;
    let mut assignments = vec![0; n];
    for _ in 0..KMEANS_MAX_ITER {
        iterations += 1;
        let mut sse = 0.0;
        let mut cost = vec![0.0; n];
        for i in 0..n {
            let (mut best, mut best_d) = (0, f64::INFINITY);
            for (j, c) in centroids.iter().enumerate() {
                let d = squared_distance(point(i), c);
                if d < best_d {
                    (best, best_d) = (j, d);
                }
            }
            assignments[i] = best;
            cost[i] = best_d;
            sse += best_d;
        }
        history.push(sse);
        if previous.as_ref() == Some(&assignments) {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; m];
        let mut counts = vec![0usize; m];
        for i in 0..n {
            counts[assignments[i]] += 1;
            for (s, v) in sums[assignments[i]].iter_mut().zip(point(i)) {
                *s += v;
            }
        }
        for j in 0..m {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            } else {
                let far = (0..n).max_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(b.cmp(&a))).expect("n >= 1");
                centroids[j] = point(far).to_vec();
                cost[far] = 0.0;
            }
        }
        previous = Some(assignments.clone());
    }

    Ok(KMeansFit { codebook: Codebook::new(centroids, CodebookFlavor::Plain, seed)?, sse_history: history, iterations, assignments })
}

/// One-hot code on the nearest word.
pub fn hard_assign(x: &[f64], b: &Codebook) -> Result<CodeVector> {
    b.check_dim(x)?;
    let d2 = squared_distances(x, b);
    Ok(CodeVector::indicator(b.len(), nearest_indices(&d2, 1)[0]))
}

/// Normalized `exp(-beta * d^2)` over the given support, shifted by the
/// smallest distance so the largest weight is exactly `exp(0)`. Sums run in
/// index order, so the full support reproduces [`soft_assign`] bit for bit.
fn kernel_weights(d2: &[f64], support: &[usize], beta: f64) -> Vec<f64> {
    let mut support = support.to_vec();
    support.sort_unstable();
    let dmin = support.iter().map(|&j| d2[j]).fold(f64::INFINITY, f64::min);
    let mut c = vec![0.0; d2.len()];
    let mut total = 0.0;
    for &j in &support {
        c[j] = (-beta * (d2[j] - dmin)).exp();
        total += c[j];
    }
    c.iter_mut().for_each(|v| *v /= total);
    c
}

pub fn soft_assign(x: &[f64], b: &Codebook, beta: f64) -> Result<CodeVector> {
    b.check_dim(x)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let d2 = squared_distances(x, b);
    let all: Vec<usize> = (0..b.len()).collect();
    Ok(CodeVector::from_dense(kernel_weights(&d2, &all, beta)))
}

/// Soft assignment restricted to the `k` nearest words.
pub fn lsc_assign(x: &[f64], b: &Codebook, beta: f64, k: usize) -> Result<CodeVector> {
    b.check_dim(x)?;
    if !(beta > 0.0) || k == 0 || k > b.len() {
        return Err(Error::InvalidParameter(format!("LSC needs beta > 0 and 1 <= k <= {}, got beta={beta}, k={k}", b.len())));
    }
    let d2 = squared_distances(x, b);
    let support = nearest_indices(&d2, k);
    Ok(CodeVector::from_dense(kernel_weights(&d2, &support, beta)))
}

const SINGULAR_RCOND: f64 = 1e-13;

/// Solves `A c = 1` and rescales to `1^T c = 1`.
fn solve_affine(a: DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let sv = a.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smax > 0.0) || smin / smax < SINGULAR_RCOND {
        return Err(Error::SingularSystem(format!("{n}x{n} locality system, rcond {:.3e}", if smax > 0.0 { smin / smax } else { 0.0 })));
    }
    let c = a.lu().solve(&DVector::from_element(n, 1.0)).ok_or_else(|| Error::SingularSystem(format!("{n}x{n} LU failed")))?;
    let total = c.sum();
    if !total.is_finite() || total.abs() < f64::EPSILON {
        return Err(Error::SingularSystem("affine constraint cannot be met".into()));
    }
    Ok(c.iter().map(|v| v / total).collect())
}

/// `C = (B_s - 1 x^T)(B_s - 1 x^T)^T` over the words in `support`.
fn local_covariance(x: &[f64], b: &Codebook, support: &[usize]) -> DMatrix<f64> {
    let k = support.len();
    let shifted: Vec<Vec<f64>> = support.iter().map(|&j| b.word(j).iter().zip(x).map(|(w, xi)| w - xi).collect()).collect();
    DMatrix::from_fn(k, k, |r, c| shifted[r].iter().zip(&shifted[c]).map(|(a, b)| a * b).sum())
}

/// Affine least-squares code on a fixed support, with trace-scaled ridge
/// `lambda * tr(C) / k`. An exact match in the support short-circuits to an
/// indicator on that word (the limit of the regularized solution).
fn llc_on_support(x: &[f64], b: &Codebook, support: &[usize], d2: &[f64], lambda: f64) -> Result<CodeVector> {
    if let Some(&j) = support.iter().filter(|&&j| d2[j] == 0.0).min() {
        return Ok(CodeVector::indicator(b.len(), j));
    }
    let k = support.len();
    let mut c = local_covariance(x, b, support);
    let ridge = lambda * c.trace() / k as f64;
    for i in 0..k {
        c[(i, i)] += ridge;
    }
    let local = solve_affine(c)?;
    let mut dense = vec![0.0; b.len()];
    for (&j, v) in support.iter().zip(local) {
        dense[j] = v;
    }
    let mut support = support.to_vec();
    support.sort_unstable();
    Ok(CodeVector { coefficients: dense, support })
}

/// Approximated LLC on the `k` nearest words.
pub fn llc_approx(x: &[f64], b: &Codebook, k: usize, lambda: f64) -> Result<CodeVector> {
    b.check_dim(x)?;
    if k == 0 || k > b.len() || !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("LLC needs 1 <= k <= {} and lambda >= 0", b.len())));
    }
    let d2 = squared_distances(x, b);
    let support = nearest_indices(&d2, k);
    llc_on_support(x, b, &support, &d2, lambda)
}

/// Locality adaptor: `exp(dist_j / max_dist / sigma)`.
pub fn locality_adaptor(x: &[f64], b: &Codebook, sigma: f64) -> Vec<f64> {
    let dist: Vec<f64> = b.words.iter().map(|w| squared_distance(x, w).sqrt()).collect();
    let dmax = dist.iter().copied().fold(0.0, f64::max);
    dist.iter().map(|d| if dmax > 0.0 { (d / dmax / sigma).exp() } else { 1.0 }).collect()
}

/// Full LLC over all words: minimizes `||x - B c||^2 + lambda ||d . c||^2`
/// subject to `1^T c = 1` via `(C + lambda diag(d^2)) c = 1`.
pub fn llc_full(x: &[f64], b: &Codebook, lambda: f64, sigma: f64) -> Result<CodeVector> {
    b.check_dim(x)?;
    if !(lambda >= 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("LLC needs lambda >= 0 and sigma > 0, got {lambda}, {sigma}")));
    }
    let all: Vec<usize> = (0..b.len()).collect();
    let d = locality_adaptor(x, b, sigma);
    let mut c = local_covariance(x, b, &all);
    for i in 0..b.len() {
        c[(i, i)] += lambda * d[i] * d[i];
    }
    Ok(CodeVector::from_dense(solve_affine(c)?))
}

/// Objective minimized by [`llc_full`], for a given code.
pub fn llc_objective(x: &[f64], b: &Codebook, code: &CodeVector, lambda: f64, sigma: f64) -> f64 {
    let d = locality_adaptor(x, b, sigma);
    let recon = code.reconstruct(b);
    let penalty: f64 = code.coefficients.iter().zip(&d).map(|(c, di)| (c * di) * (c * di)).sum();
    squared_distance(x, &recon) + lambda * penalty
}

#[derive(Debug, Clone, PartialEq)]
pub enum RlcOutcome {
    Code {
        code: CodeVector,
        /// Nearest valid word.
        nearest: usize,
        /// Euclidean distance to it.
        distance: f64,
    },
    /// No word lies within the scope; carries the distance to the nearest word.
    OutOfScope { distance: f64 },
}

/// LLC restricted to words strictly closer than `rho`.
pub fn rlc_assign(x: &[f64], b: &Codebook, k: usize, rho: f64, lambda: f64) -> Result<RlcOutcome> {
    b.check_dim(x)?;
    if k == 0 || !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("RLC needs k >= 1 and rho > 0, got k={k}, rho={rho}")));
    }
    let d2 = squared_distances(x, b);
    let order = nearest_indices(&d2, b.len());
    let valid: Vec<usize> = order.iter().copied().filter(|&j| d2[j].sqrt() < rho).take(k).collect();
    let Some(&nearest) = valid.first() else {
        return Ok(RlcOutcome::OutOfScope { distance: d2[order[0]].sqrt() });
    };
    let code = llc_on_support(x, b, &valid, &d2, lambda)?;
    Ok(RlcOutcome::Code { code, nearest, distance: d2[nearest].sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LcreMode {
    /// `sum c_ij ||x_i - b_j||^2`; grows with defect severity.
    #[default]
    WeightedDistance,
    /// `sum c_ij exp(-beta ||x_i - b_j||^2)`; shrinks with defect severity.
    KernelSimilarity,
}

impl LcreMode {
    /// True when larger scores mean "more defective".
    pub fn higher_is_worse(self) -> bool {
        matches!(self, LcreMode::WeightedDistance)
    }
}

impl std::str::FromStr for LcreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted-distance" => Ok(LcreMode::WeightedDistance),
            "kernel-similarity" => Ok(LcreMode::KernelSimilarity),
            other => Err(Error::InvalidParameter(format!("unknown LCRE mode {other:?}"))),
        }
    }
}

/// Locality-constrained reconstruction error of a descriptor set: LSC weights
/// over the `k` nearest words, combined with either the squared distance or
/// the kernel value of each neighbour.
pub fn lcre<T: AsRef<[f64]>>(descriptors: &[T], b: &Codebook, beta: f64, k: usize, mode: LcreMode) -> Result<f64> {
    if descriptors.is_empty() {
        return Err(Error::InsufficientData("LCRE of an empty descriptor list".into()));
    }
    let mut total = 0.0;
    for x in descriptors {
        let x = x.as_ref();
        let code = lsc_assign(x, b, beta, k)?;
        for &j in &code.support {
            let d2 = squared_distance(x, b.word(j));
            let term = match mode {
                LcreMode::WeightedDistance => d2,
                LcreMode::KernelSimilarity => (-beta * d2).exp(),
            };
            total += code.coefficients[j] * term;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cb(words: &[&[f64]]) -> Codebook {
        Codebook::plain(words.iter().map(|w| w.to_vec()).collect()).unwrap()
    }

    #[test]
    fn kmeans_single_word_is_mean() {
        let data = vec![vec![1.0, 2.0], vec![3.0, 0.0], vec![5.0, 7.0]];
        let fit = kmeans(&data, 1, 4).unwrap();
        let w = fit.codebook.word(0);
        assert!((w[0] - 3.0).abs() < 1e-12 && (w[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn kmeans_one_word_per_point_has_zero_error() {
        let data: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let fit = kmeans(&data, 7, 1).unwrap();
        assert_eq!(*fit.sse_history.last().unwrap(), 0.0);
    }

    #[test]
    fn kmeans_rejects_too_few_points() {
        assert!(matches!(kmeans(&[vec![0.0]], 2, 0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn kmeans_handles_duplicates() {
        let data = vec![vec![1.0]; 5];
        let fit = kmeans(&data, 3, 0).unwrap();
        assert_eq!(fit.codebook.len(), 3);
        assert!(fit.codebook.words().iter().all(|w| w[0] == 1.0));
    }

    #[test]
    fn hard_assign_examples() {
        let b = cb(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 0.0]]);
        assert_eq!(hard_assign(&[1.0, 1.0], &b).unwrap().coefficients, vec![0.0, 1.0, 0.0]);
        // equidistant from words 0 and 2
        assert_eq!(hard_assign(&[1.0, -5.0], &b).unwrap().support, vec![0]);
        assert!(hard_assign(&[1.0], &b).is_err());
    }

    #[test]
    fn soft_assign_examples() {
        let one = cb(&[&[3.0]]);
        assert_eq!(soft_assign(&[100.0], &one, 10.0).unwrap().coefficients, vec![1.0]);
        let two = cb(&[&[-1.0], &[1.0]]);
        let c = soft_assign(&[0.0], &two, 2.0).unwrap();
        assert_eq!(c.coefficients, vec![0.5, 0.5]);
        // far away: no underflow
        let c = soft_assign(&[1e3], &two, 50.0).unwrap();
        assert!((c.sum() - 1.0).abs() < 1e-12 && c.coefficients[1] == 1.0);
        assert!(soft_assign(&[0.0], &two, 0.0).is_err());
    }

    #[test]
    fn llc_symmetric_pair() {
        let b = cb(&[&[1.0, 0.0], &[-1.0, 0.0]]);
        let c = llc_approx(&[0.0, 0.0], &b, 2, 1e-4).unwrap();
        assert!((c.coefficients[0] - 0.5).abs() < 1e-12 && (c.coefficients[1] - 0.5).abs() < 1e-12);
        let r = c.reconstruct(&b);
        assert!(squared_distance(&r, &[0.0, 0.0]) < 1e-24);
    }

    #[test]
    fn llc_exact_match_is_indicator() {
        let b = cb(&[&[1.0, 0.0], &[0.0, 2.0], &[3.0, 3.0]]);
        let c = llc_approx(&[0.0, 2.0], &b, 2, 0.0).unwrap();
        assert_eq!(c.coefficients, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn llc_reports_singular_systems() {
        // three collinear words around x with no ridge: C has rank 1
        let b = cb(&[&[1.0, 0.0], &[2.0, 0.0], &[3.0, 0.0]]);
        assert!(matches!(llc_approx(&[0.5, 1.0], &b, 3, 0.0), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn llc_full_strong_ridge_orders_by_distance() {
        let b = cb(&[&[1.0, 0.0], &[0.0, 3.0], &[-2.0, -2.0], &[5.0, 5.0]]);
        let x = [0.2, 0.1];
        let c = llc_full(&x, &b, 1e6, 1.0).unwrap();
        let d = locality_adaptor(&x, &b, 1.0);
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &bb| d[a].total_cmp(&d[bb]));
        for w in order.windows(2) {
            assert!(c.coefficients[w[0]].abs() >= c.coefficients[w[1]].abs());
        }
    }

    #[test]
    fn rlc_examples() {
        let b = cb(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        match rlc_assign(&[1.0, 0.0], &b, 2, 0.1, 1e-4).unwrap() {
            RlcOutcome::Code { code, nearest, distance } => {
                assert_eq!(code.coefficients, vec![0.0, 1.0, 0.0]);
                assert_eq!(nearest, 1);
                assert_eq!(distance, 0.0);
            }
            other => panic!("{other:?}"),
        }
        match rlc_assign(&[5.0, 0.0], &b, 2, 1.0, 1e-4).unwrap() {
            RlcOutcome::OutOfScope { distance } => assert!((distance - 4.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lcre_examples() {
        let b = cb(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let exact = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(lcre(&exact, &b, 1.0, 1, LcreMode::WeightedDistance).unwrap(), 0.0);
        // a second neighbour at distance 1 still gets a kernel share
        let spread = lcre(&exact, &b, 1.0, 2, LcreMode::WeightedDistance).unwrap();
        let share = (-1.0f64).exp() / (1.0 + (-1.0f64).exp());
        assert!((spread - 2.0 * share).abs() < 1e-12);
        let lit = lcre(&exact, &b, 50.0, 1, LcreMode::KernelSimilarity).unwrap();
        assert!((lit - 2.0).abs() < 1e-12);
        let single = vec![vec![3.0, 4.0]];
        let e = lcre(&single, &b, 1.0, 1, LcreMode::WeightedDistance).unwrap();
        assert!((e - 18.0).abs() < 1e-12);
        assert!(lcre::<Vec<f64>>(&[], &b, 1.0, 1, LcreMode::WeightedDistance).is_err());
    }

    #[test]
    fn numbering_must_be_bijective() {
        let words = vec![vec![0.0], vec![1.0]];
        assert!(Codebook::new(words.clone(), CodebookFlavor::NumberEmbedding { numbering: vec![2, 1] }, 0).is_ok());
        assert!(Codebook::new(words.clone(), CodebookFlavor::NumberEmbedding { numbering: vec![1, 1] }, 0).is_err());
        assert!(Codebook::new(words, CodebookFlavor::NumberEmbedding { numbering: vec![0, 1] }, 0).is_err());
    }

    #[test]
    fn codebook_text_round_trip() {
        let b = Codebook::plain(vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-17, 7.0]]).unwrap().randomly_numbered(9);
        let back = Codebook::from_text(&b.to_text()).unwrap();
        assert_eq!(back, b);
        assert!(Codebook::from_text("{}").is_err());
    }
}
