//! In-memory pipeline stages: generate → train models → collect → cluster →
//! adapt → train router. The CLI persists each stage's output through
//! [`crate::io`]; tests and the bench harness can also run them end to end
//! without touching disk.

use std::sync::Arc;

use anyhow::{ensure, Context, Result};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use specroute_core::engine::SpecConfig;
use specroute_core::forge::{build_draft_set, build_unary_draft, AdaptedModel, DraftSet};
use specroute_core::partition::{
    cluster_accuracy, embed_corpus, preprocess, silhouette_score, ClusteredDataset, KMeans,
    PromptRecord, StopWords,
};
use specroute_core::router::{RouterModel, RouterTrainer};
use specroute_core::synth::{collect_dataset, gen_corpus, SynthCorpus};
use specroute_core::{NgramModel, TokenId, Vocab};

use crate::config::{Config, PartitionConfig};

pub struct CorpusSplit {
    pub synth: SynthCorpus,
    pub vocab: Vocab,
    pub train: Vec<PromptRecord>,
    pub collect: Vec<PromptRecord>,
    pub test: Vec<PromptRecord>,
}

/// Generates the synthetic corpus and splits it by position. Records are
/// interleaved by domain, so each split stays balanced.
pub fn generate(cfg: &Config) -> Result<CorpusSplit> {
    let synth = gen_corpus(&cfg.corpus)?;
    let n = synth.records.len();
    let s = &cfg.split;
    ensure!(
        s.train_fraction > 0.0
            && s.collect_fraction > 0.0
            && s.train_fraction + s.collect_fraction < 1.0,
        "split fractions must be positive and leave a test share"
    );
    let n_train = (n as f64 * s.train_fraction) as usize;
    let n_collect = (n as f64 * s.collect_fraction) as usize;
    let train = synth.records[..n_train].to_vec();
    let collect = synth.records[n_train..n_train + n_collect].to_vec();
    let test = synth.records[n_train + n_collect..].to_vec();
    Ok(CorpusSplit {
        vocab: synth.vocab(),
        synth,
        train,
        collect,
        test,
    })
}

/// Input followed by output, as token ids.
pub fn record_tokens(vocab: &Vocab, r: &PromptRecord) -> Vec<TokenId> {
    let mut ids = vocab.encode(&r.input);
    if let Some(out) = &r.output {
        ids.extend(vocab.encode(out));
    }
    ids
}

pub struct Models {
    pub target: Arc<NgramModel>,
    pub base: Arc<NgramModel>,
}

/// Target on every training document; base draft on a seeded uniform
/// subsample at lower order.
pub fn train_models(cfg: &Config, vocab: &Vocab, train: &[PromptRecord]) -> Result<Models> {
    let lm = &cfg.lm;
    let docs: Vec<Vec<TokenId>> = train.iter().map(|r| record_tokens(vocab, r)).collect();
    let target =
        NgramModel::train(vocab, &docs, lm.target_order, lm.lambda).context("training target")?;
    let n_base =
        ((docs.len() as f64 * lm.base_fraction).round() as usize).clamp(1, docs.len().max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(lm.seed);
    let mut picked = sample(&mut rng, docs.len(), n_base).into_vec();
    picked.sort_unstable();
    let subset: Vec<&[TokenId]> = picked.iter().map(|&i| docs[i].as_slice()).collect();
    let base = NgramModel::train(vocab, &subset, lm.draft_order, lm.lambda)
        .context("training base draft")?;
    Ok(Models {
        target: Arc::new(target),
        base: Arc::new(base),
    })
}

/// Vanilla speculative decoding over the collection prompts.
pub fn collect(
    cfg: &Config,
    models: &Models,
    vocab: &Vocab,
    prompts: &[PromptRecord],
) -> Result<Vec<PromptRecord>> {
    let c = &cfg.collect;
    let spec = SpecConfig {
        gamma: c.gamma,
        max_tokens: c.max_tokens,
        mode: c.mode,
        seed: c.seed,
        trace: false,
    };
    let (records, _) = collect_dataset(&*models.target, &*models.base, vocab, prompts, &spec)?;
    Ok(records)
}

pub struct Partition {
    pub clustering: ClusteredDataset,
    /// Accuracy against ground-truth labels, when every record has one.
    pub accuracy: Option<f64>,
    pub silhouette: Vec<(usize, f64)>,
}

pub fn embed_records(
    p: &PartitionConfig,
    records: &[PromptRecord],
) -> Result<Vec<specroute_core::partition::FeatureVector>> {
    let sw = StopWords::english();
    let docs: Vec<Vec<String>> = records
        .iter()
        .map(|r| preprocess(&r.cluster_text(p.include_output), &sw))
        .collect();
    Ok(embed_corpus(&docs, p.hash_dim, p.reduce_dim, p.seed)?)
}

pub fn cluster(cfg: &Config, records: &[PromptRecord]) -> Result<Partition> {
    let p = &cfg.partition;
    let points = embed_records(p, records)?;
    let km = |k| KMeans {
        k,
        seed: p.seed,
        max_iter: p.max_iter,
        tol: p.tol,
        n_init: p.n_init,
    };
    let clustering = km(p.k).fit(&points)?;
    let labels: Option<Vec<usize>> = records.iter().map(|r| r.true_label).collect();
    let accuracy = match labels {
        Some(l) if l.iter().collect::<std::collections::BTreeSet<_>>().len() == p.k => {
            Some(cluster_accuracy(&clustering, &l)?)
        }
        _ => None,
    };
    let mut silhouette = Vec::new();
    if let Some(kmax) = p.k_sweep_max {
        for k in 2..=kmax.min(points.len()) {
            let c = km(k).fit(&points)?;
            silhouette.push((k, silhouette_score(&points, &c.assignments, k)));
        }
    }
    Ok(Partition {
        clustering,
        accuracy,
        silhouette,
    })
}

pub struct Drafts {
    pub set: DraftSet,
    pub unary: AdaptedModel,
}

/// Per-cluster token corpora (input + output of every member).
pub fn cluster_corpora(
    vocab: &Vocab,
    records: &[PromptRecord],
    clustering: &ClusteredDataset,
) -> Vec<Vec<Vec<TokenId>>> {
    clustering
        .partition(records)
        .iter()
        .map(|rs| rs.iter().map(|r| record_tokens(vocab, r)).collect())
        .collect()
}

pub fn adapt(
    cfg: &Config,
    base: Arc<NgramModel>,
    vocab: &Vocab,
    records: &[PromptRecord],
    clustering: &ClusteredDataset,
) -> Result<Drafts> {
    let f = &cfg.forge;
    let order = f.cluster_order.unwrap_or(base.order());
    let corpora = cluster_corpora(vocab, records, clustering);
    let set = build_draft_set(base.clone(), &corpora, f.mu, order, f.cap)?;
    let unary = build_unary_draft(base, &corpora, f.mu, order, f.cap)?;
    Ok(Drafts { set, unary })
}

pub fn train_router(
    cfg: &Config,
    records: &[PromptRecord],
    clustering: &ClusteredDataset,
) -> Result<(RouterModel, f64)> {
    let r = &cfg.router;
    let labels: Vec<usize> = if r.use_true_labels {
        records
            .iter()
            .map(|x| x.true_label.context("record without a label"))
            .collect::<Result<_>>()?
    } else {
        clustering.assignments.clone()
    };
    let texts: Vec<&str> = records.iter().map(|x| x.input.as_str()).collect();
    let trainer = RouterTrainer {
        hash_dim: r.hash_dim,
        split: r.split,
        epochs: r.epochs,
        lr: r.lr,
        batch_size: r.batch_size,
        seed: r.seed,
        ..RouterTrainer::default()
    };
    Ok(trainer.train(&texts, &labels)?)
}

/// Every artifact of one end-to-end run.
pub struct Artifacts {
    pub corpus: CorpusSplit,
    pub models: Models,
    pub collected: Vec<PromptRecord>,
    pub partition: Partition,
    pub drafts: Drafts,
    pub router: RouterModel,
    pub router_accuracy: f64,
}

pub fn build_all(cfg: &Config) -> Result<Artifacts> {
    let corpus = generate(cfg)?;
    let models = train_models(cfg, &corpus.vocab, &corpus.train)?;
    let collected = collect(cfg, &models, &corpus.vocab, &corpus.collect)?;
    let partition = cluster(cfg, &collected)?;
    let drafts = adapt(
        cfg,
        models.base.clone(),
        &corpus.vocab,
        &collected,
        &partition.clustering,
    )?;
    let (router, router_accuracy) = train_router(cfg, &collected, &partition.clustering)?;
    Ok(Artifacts {
        corpus,
        models,
        collected,
        partition,
        drafts,
        router,
        router_accuracy,
    })
}
