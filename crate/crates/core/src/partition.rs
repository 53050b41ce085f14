//! Task partitioning: keyword preprocessing, hashed TF-IDF features, seeded
//! Gaussian random projection and k-means, plus clustering accuracy under
//! the best cluster/label matching.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use libm::{log, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::bucket;

/// One collected interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, rename = "label", skip_serializing_if = "Option::is_none")]
    pub true_label: Option<usize>,
    #[serde(default, rename = "tag", skip_serializing_if = "Option::is_none")]
    pub explicit_tag: Option<String>,
}

impl PromptRecord {
    pub fn new(input: impl Into<String>) -> Result<Self> {
        let r = PromptRecord {
            input: input.into(),
            output: None,
            true_label: None,
            explicit_tag: None,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.true_label = Some(label);
        self
    }

    pub fn with_output(mut self, output: impl Into<String>) -> Self {
        self.output = Some(output.into());
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.explicit_tag = Some(tag.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.trim().is_empty() {
            return Err(Error::InvalidParameter("record input is empty".into()));
        }
        Ok(())
    }

    /// Text used for clustering: the input, optionally followed by the output.
    pub fn cluster_text(&self, include_output: bool) -> String {
        match (&self.output, include_output) {
            (Some(out), true) => alloc::format!("{} {}", self.input, out),
            _ => self.input.clone(),
        }
    }
}

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Identifier of the shipped stopword list, stored alongside trained models.
pub const DEFAULT_STOPWORDS_ID: &str = "english-v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords {
    id: String,
    words: BTreeSet<String>,
}

impl StopWords {
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS_ID, DEFAULT_STOPWORDS)
    }

    /// Parses one word per line; `#` starts a comment line.
    pub fn parse(id: &str, text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopWords {
            id: id.to_string(),
            words,
        }
    }

    pub fn empty() -> Self {
        StopWords {
            id: "none".into(),
            words: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Symbols kept when they sit inside a token, as in `2+3` or `counter-security`.
const INTRA_TOKEN: &[char] = &['+', '-', '*', '/', '=', '^', '.', '\'', '_'];

/// Lowercases, strips special characters and drops stopwords.
pub fn preprocess(text: &str, stopwords: &StopWords) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let kept: String = raw
                .to_lowercase()
                .chars()
                .filter(|c| c.is_alphanumeric() || INTRA_TOKEN.contains(c))
                .collect();
            let word = kept.trim_matches(|c: char| !c.is_alphanumeric());
            (!word.is_empty() && !stopwords.contains(word)).then(|| word.to_string())
        })
        .collect()
}

/// Sparse vector as `(bucket, value)` pairs sorted by bucket.
pub type SparseVec = Vec<(usize, f64)>;

/// Smoothed IDF over a hashed feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct HashedTfIdf {
    dim: usize,
    idf: BTreeMap<usize, f64>,
    default_idf: f64,
}

impl HashedTfIdf {
    /// `idf(b) = ln((1 + n) / (1 + df(b))) + 1`.
    pub fn fit<S: AsRef<str>>(docs: &[Vec<S>], dim: usize) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("hash_dim must be positive".into()));
        }
        let mut df: BTreeMap<usize, u64> = BTreeMap::new();
        for doc in docs {
            let buckets: BTreeSet<usize> = doc.iter().map(|t| bucket(t.as_ref(), dim)).collect();
            for b in buckets {
                *df.entry(b).or_insert(0) += 1;
            }
        }
        let n = docs.len() as f64;
        let idf = df
            .into_iter()
            .map(|(b, d)| (b, log((1.0 + n) / (1.0 + d as f64)) + 1.0))
            .collect();
        Ok(HashedTfIdf {
            dim,
            idf,
            default_idf: log(1.0 + n) + 1.0,
        })
    }

    /// Raw term counts times IDF, L2-normalized. Empty documents map to the
    /// empty vector.
    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVec {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for t in doc {
            *tf.entry(bucket(t.as_ref(), self.dim)).or_insert(0.0) += 1.0;
        }
        let mut v: SparseVec = tf
            .into_iter()
            .map(|(b, c)| (b, c * self.idf.get(&b).copied().unwrap_or(self.default_idf)))
            .collect();
        let norm = sqrt(v.iter().map(|(_, x)| x * x).sum());
        if norm > 0.0 {
            for (_, x) in &mut v {
                *x /= norm;
            }
        }
        v
    }
}

pub fn sparse_cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    let na = sqrt(a.iter().map(|(_, x)| x * x).sum());
    let nb = sqrt(b.iter().map(|(_, x)| x * x).sum());
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Gaussian random projection with entries `N(0, 1/out_dim)`. Row `b` is
/// generated from ChaCha8 stream `b` under `seed`, so rows are reproducible
/// without materializing the full matrix.
#[derive(Debug, Clone)]
pub struct RandomProjection {
    out_dim: usize,
    seed: u64,
    rows: BTreeMap<usize, Vec<f64>>,
}

impl RandomProjection {
    pub fn new(out_dim: usize, seed: u64) -> Self {
        RandomProjection {
            out_dim,
            seed,
            rows: BTreeMap::new(),
        }
    }

    fn row(&mut self, b: usize) -> &[f64] {
        let (out_dim, seed) = (self.out_dim, self.seed);
        self.rows.entry(b).or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let scale = 1.0 / sqrt(out_dim as f64);
            (0..out_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                .collect()
        })
    }

    pub fn project(&mut self, v: &SparseVec) -> FeatureVector {
        let mut out = alloc::vec![0.0; self.out_dim];
        for &(b, x) in v {
            for (o, r) in out.iter_mut().zip(self.row(b)) {
                *o += x * r;
            }
        }
        FeatureVector(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Hashed TF-IDF followed by random projection to `reduce_dim`.
pub fn embed_corpus<S: AsRef<str>>(
    docs: &[Vec<S>],
    hash_dim: usize,
    reduce_dim: usize,
    seed: u64,
) -> Result<Vec<FeatureVector>> {
    if reduce_dim < 2 || hash_dim < reduce_dim {
        return Err(Error::InvalidParameter(alloc::format!(
            "need hash_dim >= reduce_dim >= 2, got {hash_dim} and {reduce_dim}"
        )));
    }
    let tfidf = HashedTfIdf::fit(docs, hash_dim)?;
    let mut proj = RandomProjection::new(reduce_dim, seed);
    Ok(docs
        .iter()
        .map(|d| proj.project(&tfidf.transform(d)))
        .collect())
}

/// Output of k-means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteredDataset {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<FeatureVector>,
    pub inertia: f64,
    /// Inertia after every Lloyd update of the winning restart.
    pub inertia_history: Vec<f64>,
    pub seed: u64,
}

impl ClusteredDataset {
    /// Record indices per cluster, in input order.
    pub fn subsets(&self) -> Vec<Vec<usize>> {
        let mut out = alloc::vec![Vec::new(); self.k];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn partition<T: Clone>(&self, items: &[T]) -> Vec<Vec<T>> {
        self.subsets()
            .into_iter()
            .map(|idx| idx.into_iter().map(|i| items[i].clone()).collect())
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.subsets().iter().map(Vec::len).collect()
    }
}

/// Lloyd's k-means with k-means++ seeding and several restarts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub n_init: usize,
}

impl KMeans {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeans {
            k,
            seed,
            max_iter: 100,
            tol: 1e-6,
            n_init: 4,
        }
    }

    pub fn fit(&self, points: &[FeatureVector]) -> Result<ClusteredDataset> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if points.len() < self.k {
            return Err(Error::TooFewPoints {
                points: points.len(),
                k: self.k,
            });
        }
        let dim = points[0].dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidParameter("points differ in dimension".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut best: Option<ClusteredDataset> = None;
        for _ in 0..self.n_init.max(1) {
            let run = self.lloyd(points, &mut rng);
            if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
                best = Some(run);
            }
        }
        Ok(best.expect("at least one restart"))
    }

    fn init_plus_plus(&self, points: &[FeatureVector], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let n = points.len();
        let mut centroids = Vec::with_capacity(self.k);
        centroids.push(points[rng.random_range(0..n)].0.clone());
        let mut d2: Vec<f64> = points
            .iter()
            .map(|p| sq_dist(&p.0, &centroids[0]))
            .collect();
        while centroids.len() < self.k {
            let total: f64 = d2.iter().sum();
            let next = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, &d) in d2.iter().enumerate() {
                    if u < d {
                        pick = i;
                        break;
                    }
                    u -= d;
                }
                pick
            } else {
                rng.random_range(0..n)
            };
            let c = points[next].0.clone();
            for (d, p) in d2.iter_mut().zip(points) {
                *d = d.min(sq_dist(&p.0, &c));
            }
            centroids.push(c);
        }
        centroids
    }

    fn lloyd(&self, points: &[FeatureVector], rng: &mut ChaCha8Rng) -> ClusteredDataset {
        let (k, dim) = (self.k, points[0].dim());
        let mut centroids = self.init_plus_plus(points, rng);
        let mut assignments = alloc::vec![0usize; points.len()];
        let mut history = Vec::new();
        for _ in 0..self.max_iter.max(1) {
            for (a, p) in assignments.iter_mut().zip(points) {
                *a = nearest(&p.0, &centroids).0;
            }
            repair_empty(points, &centroids, &mut assignments, k);

            let mut sums = alloc::vec![alloc::vec![0.0; dim]; k];
            let mut counts = alloc::vec![0usize; k];
            for (&a, p) in assignments.iter().zip(points) {
                counts[a] += 1;
                for (s, x) in sums[a].iter_mut().zip(&p.0) {
                    *s += x;
                }
            }
            let mut shift: f64 = 0.0;
            for c in 0..k {
                let mean: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                shift = shift.max(sqrt(sq_dist(&mean, &centroids[c])));
                centroids[c] = mean;
            }
            history.push(inertia(points, &centroids, &assignments));
            if shift < self.tol {
                break;
            }
        }
        ClusteredDataset {
            k,
            inertia: *history.last().expect("one iteration"),
            assignments,
            centroids: centroids.into_iter().map(FeatureVector).collect(),
            inertia_history: history,
            seed: self.seed,
        }
    }
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Gives every empty cluster the point farthest from its current centroid,
/// taken from a cluster that can spare one.
fn repair_empty(
    points: &[FeatureVector],
    centroids: &[Vec<f64>],
    assignments: &mut [usize],
    k: usize,
) {
    let mut counts = alloc::vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(&p.0, &centroids[a]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        if let Some(i) = far {
            counts[assignments[i]] -= 1;
            assignments[i] = empty;
            counts[empty] = 1;
        }
    }
}

fn inertia(points: &[FeatureVector], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(&p.0, &centroids[a]))
        .sum()
}

/// k-means with default restarts.
pub fn kmeans_cluster(
    points: &[FeatureVector],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusteredDataset> {
    KMeans {
        max_iter,
        tol,
        ..KMeans::new(k, seed)
    }
    .fit(points)
}

/// Fraction of records whose cluster maps to their label under the best
/// one-to-one cluster↔label matching.
pub fn cluster_accuracy(clustering: &ClusteredDataset, labels: &[usize]) -> Result<f64> {
    let n = clustering.assignments.len();
    if labels.len() != n {
        return Err(Error::LabelMismatch {
            labels: labels.len(),
            records: n,
        });
    }
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() != clustering.k {
        return Err(Error::LabelCardinality {
            distinct: distinct.len(),
            k: clustering.k,
        });
    }
    if n == 0 {
        return Ok(1.0);
    }
    let dense: BTreeMap<usize, usize> = distinct
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let k = clustering.k;
    let mut table = alloc::vec![alloc::vec![0i64; k]; k];
    for (&c, l) in clustering.assignments.iter().zip(labels) {
        table[c][dense[l]] += 1;
    }
    let cost: Vec<Vec<i64>> = table
        .iter()
        .map(|row| row.iter().map(|&x| -x).collect())
        .collect();
    let matching = hungarian(&cost);
    let hits: i64 = matching.iter().enumerate().map(|(c, &l)| table[c][l]).sum();
    Ok(hits as f64 / n as f64)
}

/// Minimum-cost perfect matching on a square matrix (Kuhn–Munkres with
/// potentials). Returns the column assigned to each row.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = i64::MAX / 4;
    // 1-based arrays; column 0 is a sentinel.
    let mut u = alloc::vec![0i64; n + 1];
    let mut v = alloc::vec![0i64; n + 1];
    let mut p = alloc::vec![0usize; n + 1];
    let mut way = alloc::vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = alloc::vec![inf; n + 1];
        let mut used = alloc::vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = alloc::vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Mean silhouette coefficient; O(n²). Singleton clusters score 0.
pub fn silhouette_score(points: &[FeatureVector], assignments: &[usize], k: usize) -> f64 {
    let n = points.len();
    if n < 2 || k < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = alloc::vec![0.0; k];
        let mut counts = alloc::vec![0usize; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            sums[assignments[j]] += sqrt(sq_dist(&points[i].0, &points[j].0));
            counts[assignments[j]] += 1;
        }
        let own = assignments[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            let m = a.max(b);
            if m > 0.0 {
                total += (b - a) / m;
            }
        }
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn fv(xs: &[f64]) -> FeatureVector {
        FeatureVector(xs.to_vec())
    }

    #[test]
    fn keyword_fixtures() {
        let sw = StopWords::english();
        assert_eq!(
            preprocess("Tell me the result of 2+3", &sw),
            vec!["result", "2+3"]
        );
        assert_eq!(
            preprocess(
                "A surety may request the debtor to provide a counter-security",
                &sw
            ),
            vec!["surety", "debtor", "counter-security"]
        );
        assert!(preprocess("the of a", &sw).is_empty());
        assert!(sw.len() >= 140);
    }

    #[test]
    fn strips_special_characters() {
        let sw = StopWords::empty();
        assert_eq!(
            preprocess("Hello, (2+3)! -x- \"quoted\" ???", &sw),
            vec!["hello", "2+3", "x", "quoted"]
        );
    }

    #[test]
    fn disjoint_documents_are_orthogonal() {
        let docs = vec![vec!["alpha", "beta"], vec!["gamma", "delta"]];
        let dims = 1 << 15;
        let buckets: BTreeSet<usize> = ["alpha", "beta", "gamma", "delta"]
            .iter()
            .map(|t| bucket(t, dims))
            .collect();
        assert_eq!(buckets.len(), 4);
        let tfidf = HashedTfIdf::fit(&docs, dims).unwrap();
        let (a, b) = (tfidf.transform(&docs[0]), tfidf.transform(&docs[1]));
        assert_eq!(sparse_cosine(&a, &b), 0.0);
        assert!((sparse_cosine(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embedding_is_deterministic() {
        let docs = vec![vec!["x", "y"], vec!["x", "y"], vec!["z"]];
        let a = embed_corpus(&docs, 1024, 16, 5).unwrap();
        let b = embed_corpus(&docs, 1024, 16, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0], a[1]);
        assert_ne!(a, embed_corpus(&docs, 1024, 16, 6).unwrap());
        assert!(embed_corpus::<&str>(&[], 1024, 16, 5).is_err());
        assert!(embed_corpus(&docs, 8, 16, 5).is_err());
        assert!(embed_corpus(&docs, 8, 1, 5).is_err());
    }

    #[test]
    fn two_obvious_clusters() {
        let pts = vec![
            fv(&[0.0, 0.0]),
            fv(&[0.0, 1.0]),
            fv(&[10.0, 10.0]),
            fv(&[10.0, 11.0]),
        ];
        let c = kmeans_cluster(&pts, 2, 1, 50, 1e-9).unwrap();
        assert_eq!(c.assignments[0], c.assignments[1]);
        assert_eq!(c.assignments[2], c.assignments[3]);
        assert_ne!(c.assignments[0], c.assignments[2]);
        assert!((c.inertia - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_and_errors() {
        let pts = vec![fv(&[0.0]), fv(&[2.0]), fv(&[4.0])];
        let c = kmeans_cluster(&pts, 1, 0, 10, 1e-9).unwrap();
        assert_eq!(c.assignments, vec![0, 0, 0]);
        assert_eq!(c.centroids[0], fv(&[2.0]));
        assert!(matches!(
            kmeans_cluster(&pts, 4, 0, 10, 1e-9),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn duplicate_points_fill_every_cluster() {
        let pts = vec![fv(&[1.0]); 5];
        let c = kmeans_cluster(&pts, 3, 2, 10, 1e-9).unwrap();
        let sizes = c.sizes();
        assert!(sizes.iter().all(|&s| s > 0), "{sizes:?}");
    }

    #[test]
    fn accuracy_examples() {
        let mk = |a: Vec<usize>| ClusteredDataset {
            k: 2,
            assignments: a,
            centroids: vec![],
            inertia: 0.0,
            inertia_history: vec![],
            seed: 0,
        };
        assert_eq!(
            cluster_accuracy(&mk(vec![1, 1, 0, 0]), &[0, 0, 1, 1]).unwrap(),
            1.0
        );
        // Each cluster holds one record of each label: both matchings score 2/4.
        assert_eq!(
            cluster_accuracy(&mk(vec![0, 0, 1, 1]), &[0, 1, 0, 1]).unwrap(),
            0.5
        );
        assert!(matches!(
            cluster_accuracy(&mk(vec![0, 1]), &[0, 1, 1]),
            Err(Error::LabelMismatch { .. })
        ));
        assert!(matches!(
            cluster_accuracy(&mk(vec![0, 1]), &[7, 7]),
            Err(Error::LabelCardinality { .. })
        ));
    }

    #[test]
    fn silhouette_prefers_true_structure() {
        let pts = vec![fv(&[0.0]), fv(&[0.1]), fv(&[5.0]), fv(&[5.1])];
        let good = silhouette_score(&pts, &[0, 0, 1, 1], 2);
        let bad = silhouette_score(&pts, &[0, 1, 0, 1], 2);
        assert!(good > 0.9 && bad < 0.0);
    }
}
