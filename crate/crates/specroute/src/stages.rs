//! Disk-backed pipeline stages behind the CLI. Each stage reads the
//! artifacts of earlier stages from a work directory and writes its own.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::Serialize;
use specroute_core::forge::{AdaptedModel, DraftSet};
use specroute_core::partition::{ClusteredDataset, PromptRecord};
use specroute_core::router::RouterModel;
use specroute_core::NgramModel;

use crate::bench::{
    bench_sweep, cap_sweep, write_cap_csv, write_csv, BenchInputs, BenchRow, CapRow,
};
use crate::config::Config;
use crate::io;
use crate::pipeline::{self, Models};

/// File locations inside a work directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn train(&self) -> PathBuf {
        self.root.join("corpus/train.jsonl")
    }
    pub fn collect_prompts(&self) -> PathBuf {
        self.root.join("corpus/collect.jsonl")
    }
    pub fn test(&self) -> PathBuf {
        self.root.join("corpus/test.jsonl")
    }
    pub fn target(&self) -> PathBuf {
        self.root.join("models/target.json")
    }
    pub fn base(&self) -> PathBuf {
        self.root.join("models/base.json")
    }
    pub fn collected(&self) -> PathBuf {
        self.root.join("collected.jsonl")
    }
    pub fn clusters(&self) -> PathBuf {
        self.root.join("clusters")
    }
    pub fn drafts(&self) -> PathBuf {
        self.root.join("drafts")
    }
    pub fn router(&self) -> PathBuf {
        self.root.join("router.json")
    }
    pub fn bench_csv(&self) -> PathBuf {
        self.root.join("bench.csv")
    }
    pub fn bench_json(&self) -> PathBuf {
        self.root.join("bench.json")
    }
    pub fn cap_csv(&self) -> PathBuf {
        self.root.join("cap_sweep.csv")
    }

    pub fn load_target(&self) -> Result<NgramModel> {
        io::require(&self.target(), "target model", "gen-corpus")?;
        io::load_ngram(&self.target())
    }

    pub fn load_base(&self) -> Result<NgramModel> {
        io::require(&self.base(), "base draft", "gen-corpus")?;
        io::load_ngram(&self.base())
    }

    fn load_collected(&self) -> Result<Vec<PromptRecord>> {
        io::require(&self.collected(), "collected dataset", "collect")?;
        io::load_records(&self.collected())
    }

    fn load_clustering(&self) -> Result<ClusteredDataset> {
        io::require(
            &self.clusters().join("clustering.json"),
            "clusters",
            "cluster",
        )?;
        io::load_clustering(&self.clusters())
    }

    pub fn load_drafts(&self) -> Result<(DraftSet, Option<AdaptedModel>)> {
        io::require(&self.drafts().join("manifest.json"), "draft set", "adapt")?;
        io::load_draft_set(&self.drafts())
    }

    pub fn load_router(&self) -> Result<RouterModel> {
        io::require(&self.router(), "router", "train-router")?;
        io::load_router(&self.router())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusSummary {
    pub records: usize,
    pub train: usize,
    pub collect: usize,
    pub test: usize,
    pub vocab: usize,
}

/// Generates and splits the corpus, then trains the target and base draft.
pub fn gen_corpus(cfg: &Config, l: &Layout) -> Result<CorpusSummary> {
    let split = pipeline::generate(cfg)?;
    let models = pipeline::train_models(cfg, &split.vocab, &split.train)?;
    io::write_json(&l.config(), cfg)?;
    io::save_records(&l.train(), &split.train)?;
    io::save_records(&l.collect_prompts(), &split.collect)?;
    io::save_records(&l.test(), &split.test)?;
    io::save_ngram(&l.target(), &models.target)?;
    io::save_ngram(&l.base(), &models.base)?;
    Ok(CorpusSummary {
        records: split.synth.records.len(),
        train: split.train.len(),
        collect: split.collect.len(),
        test: split.test.len(),
        vocab: split.vocab.len(),
    })
}

/// Vanilla speculative decoding over the collection prompts.
pub fn collect(cfg: &Config, l: &Layout) -> Result<usize> {
    let models = Models {
        target: Arc::new(l.load_target()?),
        base: Arc::new(l.load_base()?),
    };
    io::require(&l.collect_prompts(), "collection prompts", "gen-corpus")?;
    let prompts = io::load_records(&l.collect_prompts())?;
    let vocab = models.target.vocab().clone();
    let out = pipeline::collect(cfg, &models, &vocab, &prompts)?;
    io::save_records(&l.collected(), &out)?;
    Ok(out.len())
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSummary {
    pub sizes: Vec<usize>,
    pub inertia: f64,
    pub accuracy: Option<f64>,
    pub silhouette: Vec<(usize, f64)>,
}

pub fn cluster(cfg: &Config, l: &Layout) -> Result<ClusterSummary> {
    let records = l.load_collected()?;
    let p = pipeline::cluster(cfg, &records)?;
    let params = serde_json::to_value(&cfg.partition)?;
    io::save_clusters(&l.clusters(), &records, &p.clustering, params, p.accuracy)?;
    Ok(ClusterSummary {
        sizes: p.clustering.sizes(),
        inertia: p.clustering.inertia,
        accuracy: p.accuracy,
        silhouette: p.silhouette,
    })
}

/// Builds the per-cluster drafts and the unary draft.
pub fn adapt(cfg: &Config, l: &Layout) -> Result<Vec<usize>> {
    let base = Arc::new(l.load_base()?);
    let records = l.load_collected()?;
    let clustering = l.load_clustering()?;
    let vocab = base.vocab().clone();
    let d = pipeline::adapt(cfg, base, &vocab, &records, &clustering)?;
    io::save_draft_set(&l.drafts(), &d.set, Some(&d.unary))?;
    Ok(d.set.manifest.sizes.clone())
}

/// Trains the router; returns its validation accuracy.
pub fn train_router(cfg: &Config, l: &Layout) -> Result<f64> {
    let records = l.load_collected()?;
    let clustering = l.load_clustering()?;
    let (router, acc) = pipeline::train_router(cfg, &records, &clustering)?;
    io::save_router(&l.router(), &router)?;
    Ok(acc)
}

#[derive(Debug)]
pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub caps: Vec<CapRow>,
}

/// Runs the γ sweep (and, when asked, the cap sweep) and writes CSV + JSON.
pub fn bench(cfg: &Config, l: &Layout, with_caps: bool) -> Result<BenchOutput> {
    let target = l.load_target()?;
    let base = l.load_base()?;
    let (drafts, unary) = l.load_drafts()?;
    let router = l.load_router()?;
    io::require(&l.test(), "test prompts", "gen-corpus")?;
    let test = io::load_records(&l.test())?;
    let inputs = BenchInputs {
        vocab: target.vocab(),
        target: Some(&target),
        base: Some(&base),
        drafts: Some(&drafts),
        unary: unary.as_ref(),
        router: Some(&router),
        tags: &cfg.tags,
        test: &test,
    };
    let rows = bench_sweep(&cfg.bench, &inputs)?;
    write_file(&l.bench_csv(), |w| Ok(write_csv(w, &rows)?))?;
    io::write_json(&l.bench_json(), &rows)?;
    let caps = if with_caps {
        let collected = l.load_collected()?;
        let clustering = l.load_clustering()?;
        let caps = cap_sweep(cfg, &inputs, &collected, &clustering)?;
        write_file(&l.cap_csv(), |w| Ok(write_cap_csv(w, &caps)?))?;
        caps
    } else {
        Vec::new()
    };
    Ok(BenchOutput { rows, caps })
}

pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Every build stage in order: gen-corpus, collect, cluster, adapt,
/// train-router.
pub fn build_all(cfg: &Config, l: &Layout) -> Result<()> {
    gen_corpus(cfg, l)?;
    collect(cfg, l)?;
    cluster(cfg, l)?;
    adapt(cfg, l)?;
    train_router(cfg, l)?;
    Ok(())
}
