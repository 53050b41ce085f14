//! Lightweight prompt classifier: preprocessed keywords are hashed and
//! mean-pooled into a sparse feature vector, and a multinomial logistic
//! regression maps it to a task cluster. Routing honours an explicit task
//! tag before falling back to the classifier.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use libm::exp;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forge::{AdaptedModel, DraftSet};
use crate::hash::bucket;
use crate::partition::{preprocess, PromptRecord, SparseVec, StopWords, DEFAULT_STOPWORDS_ID};
use crate::prob::ProbVector;

pub const DEFAULT_ROUTER_HASH_DIM: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub stopwords_id: String,
    pub hash_dim: usize,
}

impl PreprocessParams {
    fn stopwords(&self) -> Result<StopWords> {
        match self.stopwords_id.as_str() {
            DEFAULT_STOPWORDS_ID => Ok(StopWords::english()),
            "none" => Ok(StopWords::empty()),
            other => Err(Error::InvalidParameter(alloc::format!(
                "unknown stopword list {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub split: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub n_train: usize,
    pub n_val: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouterModel {
    classes: usize,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    preprocess: PreprocessParams,
    train_meta: TrainMeta,
    stopwords: StopWords,
}

impl RouterModel {
    pub fn from_parts(
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        preprocess: PreprocessParams,
        train_meta: TrainMeta,
    ) -> Result<Self> {
        let classes = biases.len();
        if classes < 2 {
            return Err(Error::SingleClass);
        }
        if weights.len() != classes || weights.iter().any(|w| w.len() != preprocess.hash_dim) {
            return Err(Error::InvalidParameter(
                "router weight matrix has the wrong shape".into(),
            ));
        }
        let finite = weights
            .iter()
            .flatten()
            .chain(&biases)
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite router weight".into()));
        }
        let stopwords = preprocess.stopwords()?;
        Ok(RouterModel {
            classes,
            weights,
            biases,
            preprocess,
            train_meta,
            stopwords,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn preprocess_params(&self) -> &PreprocessParams {
        &self.preprocess
    }

    pub fn train_meta(&self) -> &TrainMeta {
        &self.train_meta
    }

    pub fn features(&self, text: &str) -> SparseVec {
        pooled_features(text, &self.stopwords, self.preprocess.hash_dim)
    }

    /// Class logits.
    pub fn scores(&self, text: &str) -> Vec<f64> {
        logits(&self.weights, &self.biases, &self.features(text))
    }

    /// Softmax over classes and its argmax (lowest label on ties). Text with
    /// no surviving keywords is scored by the biases alone.
    pub fn classify(&self, text: &str) -> (usize, ProbVector) {
        let probs = softmax(&self.scores(text));
        let conf = ProbVector::from_raw(probs);
        (conf.greedy_token() as usize, conf)
    }
}

/// Mean-pooled hashed bag of keywords, sorted by bucket.
pub fn pooled_features(text: &str, stopwords: &StopWords, hash_dim: usize) -> SparseVec {
    let words = preprocess(text, stopwords);
    if words.is_empty() {
        return Vec::new();
    }
    let w = 1.0 / words.len() as f64;
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for t in &words {
        *acc.entry(bucket(t, hash_dim)).or_insert(0.0) += w;
    }
    acc.into_iter().collect()
}

fn logits(weights: &[Vec<f64>], biases: &[f64], x: &SparseVec) -> Vec<f64> {
    weights
        .iter()
        .zip(biases)
        .map(|(w, b)| b + x.iter().map(|&(i, v)| w[i] * v).sum::<f64>())
        .collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&x| exp(x - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Mini-batch gradient descent on softmax cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct RouterTrainer {
    pub hash_dim: usize,
    pub split: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub stopwords_id: String,
}

impl Default for RouterTrainer {
    fn default() -> Self {
        RouterTrainer {
            hash_dim: DEFAULT_ROUTER_HASH_DIM,
            split: 0.8,
            epochs: 20,
            lr: 0.1,
            batch_size: 16,
            seed: 0,
            stopwords_id: DEFAULT_STOPWORDS_ID.into(),
        }
    }
}

impl RouterTrainer {
    fn check(&self, texts: &[&str], labels: &[usize]) -> Result<usize> {
        if texts.len() != labels.len() {
            return Err(Error::LabelMismatch {
                labels: labels.len(),
                records: texts.len(),
            });
        }
        if self.hash_dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "hash_dim and batch_size must be positive".into(),
            ));
        }
        let first = labels.first().copied();
        if first.is_none() || labels.iter().all(|&l| Some(l) == first) {
            return Err(Error::SingleClass);
        }
        Ok(labels.iter().max().copied().unwrap_or(0) + 1)
    }

    fn params(&self) -> PreprocessParams {
        PreprocessParams {
            stopwords_id: self.stopwords_id.clone(),
            hash_dim: self.hash_dim,
        }
    }

    /// Trains on every record, no held-out split.
    pub fn fit(&self, texts: &[&str], labels: &[usize]) -> Result<RouterModel> {
        let classes = self.check(texts, labels)?;
        let stopwords = self.params().stopwords()?;
        let feats: Vec<SparseVec> = texts
            .iter()
            .map(|t| pooled_features(t, &stopwords, self.hash_dim))
            .collect();
        let idx: Vec<usize> = (0..texts.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.optimize(&feats, labels, &idx, classes, &mut rng, texts.len(), 0)
    }

    /// Shuffles with the seed, trains on the first `split` fraction and
    /// reports accuracy on the rest.
    pub fn train(&self, texts: &[&str], labels: &[usize]) -> Result<(RouterModel, f64)> {
        let classes = self.check(texts, labels)?;
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "split {} outside (0, 1)",
                self.split
            )));
        }
        let stopwords = self.params().stopwords()?;
        let feats: Vec<SparseVec> = texts
            .iter()
            .map(|t| pooled_features(t, &stopwords, self.hash_dim))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut idx: Vec<usize> = (0..texts.len()).collect();
        idx.shuffle(&mut rng);
        let n_train = ((texts.len() as f64) * self.split) as usize;
        if n_train == 0 || n_train == texts.len() {
            return Err(Error::InvalidParameter(
                "split leaves an empty training or validation set".into(),
            ));
        }
        let (train_idx, val_idx) = idx.split_at(n_train);
        let model = self.optimize(
            &feats,
            labels,
            train_idx,
            classes,
            &mut rng,
            n_train,
            val_idx.len(),
        )?;
        let hits = val_idx
            .iter()
            .filter(|&&i| {
                let z = logits(&model.weights, &model.biases, &feats[i]);
                crate::prob::greedy_token(&z) as usize == labels[i]
            })
            .count();
        Ok((model, hits as f64 / val_idx.len() as f64))
    }

    #[allow(clippy::too_many_arguments)]
    fn optimize(
        &self,
        feats: &[SparseVec],
        labels: &[usize],
        train_idx: &[usize],
        classes: usize,
        rng: &mut ChaCha8Rng,
        n_train: usize,
        n_val: usize,
    ) -> Result<RouterModel> {
        let mut weights = alloc::vec![alloc::vec![0.0; self.hash_dim]; classes];
        let mut biases = alloc::vec![0.0; classes];
        let mut order = train_idx.to_vec();
        for _ in 0..self.epochs {
            order.shuffle(rng);
            for batch in order.chunks(self.batch_size) {
                let step = self.lr / batch.len() as f64;
                // Gradients are computed against the pre-batch weights.
                let mut grads: Vec<(usize, Vec<f64>)> = Vec::with_capacity(batch.len());
                for &i in batch {
                    let mut g = softmax(&logits(&weights, &biases, &feats[i]));
                    g[labels[i]] -= 1.0;
                    grads.push((i, g));
                }
                for (i, g) in grads {
                    for c in 0..classes {
                        biases[c] -= step * g[c];
                        for &(j, v) in &feats[i] {
                            weights[c][j] -= step * g[c] * v;
                        }
                    }
                }
            }
        }
        RouterModel::from_parts(
            weights,
            biases,
            self.params(),
            TrainMeta {
                seed: self.seed,
                epochs: self.epochs,
                split: self.split,
                lr: self.lr,
                batch_size: self.batch_size,
                n_train,
                n_val,
            },
        )
    }
}

/// Trains on `records` using their `label` field.
pub fn train_router(
    records: &[PromptRecord],
    split: f64,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<(RouterModel, f64)> {
    let mut texts = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for r in records {
        let label = r
            .true_label
            .ok_or_else(|| Error::InvalidParameter("router training record has no label".into()))?;
        texts.push(r.input.as_str());
        labels.push(label);
    }
    RouterTrainer {
        split,
        epochs,
        lr,
        seed,
        ..RouterTrainer::default()
    }
    .train(&texts, &labels)
}

/// Task tag → cluster id.
pub type TagMap = BTreeMap<String, usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteSource {
    Tag,
    Classifier,
}

#[derive(Debug, Clone, Copy)]
pub struct Route<'a> {
    pub cluster: usize,
    pub source: RouteSource,
    pub draft: &'a AdaptedModel,
}

/// Picks the draft for `record`: an explicit tag wins, otherwise the
/// classifier decides.
pub fn route<'a>(
    router: &RouterModel,
    record: &PromptRecord,
    drafts: &'a DraftSet,
    tags: &TagMap,
) -> Result<Route<'a>> {
    let (cluster, source) = match &record.explicit_tag {
        Some(tag) => {
            let c = *tags
                .get(tag)
                .ok_or_else(|| Error::UnknownTag(tag.clone()))?;
            (c, RouteSource::Tag)
        }
        None => {
            if router.classes() != drafts.k() {
                return Err(Error::ClassCountMismatch {
                    router: router.classes(),
                    drafts: drafts.k(),
                });
            }
            (router.classify(&record.input).0, RouteSource::Classifier)
        }
    };
    let draft = drafts
        .get(cluster)
        .ok_or_else(|| Error::InvalidParameter(alloc::format!("no draft for cluster {cluster}")))?;
    Ok(Route {
        cluster,
        source,
        draft,
    })
}
