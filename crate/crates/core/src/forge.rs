//! Per-task draft construction. A shared base draft is adapted toward each
//! cluster by mixing it with an n-gram trained on that cluster's data:
//! `p = (1 − μ)·p_base + μ·p_cluster`, evaluated at query time so the base
//! stays untouched and reusable.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::{fnv1a64_extend, FNV_OFFSET};
use crate::model::LanguageModel;
use crate::ngram::NgramModel;
use crate::prob::ProbVector;
use crate::vocab::TokenId;

pub const DEFAULT_MU: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedModel {
    base: Arc<NgramModel>,
    cluster: NgramModel,
    mu: f64,
}

impl AdaptedModel {
    /// Pairs a base with an already-trained cluster model.
    pub fn from_parts(base: Arc<NgramModel>, cluster: NgramModel, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        if cluster.vocab() != base.vocab() {
            return Err(Error::InvalidParameter(
                "cluster model vocabulary differs from the base".into(),
            ));
        }
        Ok(AdaptedModel { base, cluster, mu })
    }

    pub fn base(&self) -> &Arc<NgramModel> {
        &self.base
    }

    pub fn cluster(&self) -> &NgramModel {
        &self.cluster
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl LanguageModel for AdaptedModel {
    fn vocab_size(&self) -> usize {
        self.base.vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> ProbVector {
        let base = self.base.next_distribution(context);
        let cluster = self.cluster.next_distribution(context);
        base.mix(&cluster, self.mu)
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidParameter(alloc::format!(
            "adaptation weight {mu} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Trains an order-`cluster_order` model on `cluster_corpus` with the base's
/// vocabulary and smoothing weight, then mixes it in with weight `mu`.
pub fn adapt_draft<S: AsRef<[TokenId]>>(
    base: Arc<NgramModel>,
    cluster_corpus: &[S],
    mu: f64,
    cluster_order: usize,
) -> Result<AdaptedModel> {
    check_mu(mu)?;
    if cluster_corpus.is_empty() {
        return Err(Error::EmptyAdaptationCorpus);
    }
    let cluster = NgramModel::train(base.vocab(), cluster_corpus, cluster_order, base.lambda())?;
    Ok(AdaptedModel { base, cluster, mu })
}

/// Fingerprint of a token corpus; sequence boundaries are hashed too.
pub fn corpus_hash<S: AsRef<[TokenId]>>(corpus: &[S]) -> u64 {
    let mut h = FNV_OFFSET;
    for seq in corpus {
        for &t in seq.as_ref() {
            h = fnv1a64_extend(h, &t.to_le_bytes());
        }
        h = fnv1a64_extend(h, &u32::MAX.to_le_bytes());
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftManifest {
    pub mu: f64,
    pub cluster_order: usize,
    pub cap: Option<usize>,
    pub sizes: Vec<usize>,
    /// Hex FNV-1a fingerprints of each (capped) cluster corpus.
    pub corpus_hashes: Vec<String>,
}

/// One adapted draft per task cluster, keyed `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DraftSet {
    pub base: Arc<NgramModel>,
    pub per_task: Vec<AdaptedModel>,
    pub manifest: DraftManifest,
}

impl DraftSet {
    pub fn k(&self) -> usize {
        self.per_task.len()
    }

    pub fn get(&self, cluster: usize) -> Option<&AdaptedModel> {
        self.per_task.get(cluster)
    }
}

fn capped<S>(corpus: &[S], cap: Option<usize>) -> &[S] {
    match cap {
        Some(c) if c < corpus.len() => &corpus[..c],
        _ => corpus,
    }
}

/// Adapts the base toward every cluster. `cap` keeps at most that many
/// sequences per cluster, taken in order.
pub fn build_draft_set<S: AsRef<[TokenId]>>(
    base: Arc<NgramModel>,
    clusters: &[Vec<S>],
    mu: f64,
    cluster_order: usize,
    cap: Option<usize>,
) -> Result<DraftSet> {
    let mut per_task = Vec::with_capacity(clusters.len());
    let mut sizes = Vec::with_capacity(clusters.len());
    let mut hashes = Vec::with_capacity(clusters.len());
    for (id, corpus) in clusters.iter().enumerate() {
        let corpus = capped(corpus, cap);
        if corpus.is_empty() {
            return Err(Error::EmptyCluster(id));
        }
        per_task.push(adapt_draft(base.clone(), corpus, mu, cluster_order)?);
        sizes.push(corpus.len());
        hashes.push(alloc::format!("{:016x}", corpus_hash(corpus)));
    }
    Ok(DraftSet {
        base,
        per_task,
        manifest: DraftManifest {
            mu,
            cluster_order,
            cap,
            sizes,
            corpus_hashes: hashes,
        },
    })
}

/// Single draft adapted on the union of every cluster, each capped as in
/// [`build_draft_set`].
pub fn build_unary_draft<S: AsRef<[TokenId]> + Clone>(
    base: Arc<NgramModel>,
    clusters: &[Vec<S>],
    mu: f64,
    cluster_order: usize,
    cap: Option<usize>,
) -> Result<AdaptedModel> {
    let union: Vec<S> = clusters
        .iter()
        .flat_map(|c| capped(c, cap).iter().cloned())
        .collect();
    adapt_draft(base, &union, mu, cluster_order)
}
