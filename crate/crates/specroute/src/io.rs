//! On-disk formats: n-gram models, prompt JSONL, routers, draft-set and
//! cluster directories, decode traces and simulation CSV.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use specroute_core::engine::TraceRecord;
use specroute_core::forge::{AdaptedModel, DraftManifest, DraftSet};
use specroute_core::ngram::ContextCounts;
use specroute_core::partition::{ClusteredDataset, FeatureVector, PromptRecord};
use specroute_core::router::{PreprocessParams, RouterModel, TrainMeta};
use specroute_core::{NgramModel, TokenId, Vocab};

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f))
        .with_context(|| format!("parsing {}", path.display()))
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

// ---------------------------------------------------------------- n-gram

#[derive(Serialize, Deserialize)]
struct NgramDoc {
    order: usize,
    lambda: f64,
    vocab: Vocab,
    /// Context ids joined by single spaces; the empty context is `""`.
    counts: BTreeMap<String, BTreeMap<TokenId, u64>>,
}

impl From<&NgramModel> for NgramDoc {
    fn from(m: &NgramModel) -> Self {
        let counts = m
            .counts()
            .iter()
            .map(|(ctx, c)| {
                let key = ctx
                    .iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                (key, c.next().clone())
            })
            .collect();
        NgramDoc {
            order: m.order(),
            lambda: m.lambda(),
            vocab: m.vocab().clone(),
            counts,
        }
    }
}

impl TryFrom<NgramDoc> for NgramModel {
    type Error = anyhow::Error;

    fn try_from(doc: NgramDoc) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for (key, next) in doc.counts {
            let ctx = key
                .split_whitespace()
                .map(|t| {
                    t.parse::<TokenId>()
                        .with_context(|| format!("bad context key {key:?}"))
                })
                .collect::<Result<Vec<_>>>()?;
            counts.insert(ctx, ContextCounts::from_next(next));
        }
        Ok(NgramModel::from_parts(
            doc.order, doc.lambda, doc.vocab, counts,
        )?)
    }
}

pub fn ngram_to_json(m: &NgramModel) -> Result<String> {
    Ok(serde_json::to_string(&NgramDoc::from(m))?)
}

pub fn ngram_from_json(text: &str) -> Result<NgramModel> {
    serde_json::from_str::<NgramDoc>(text)?.try_into()
}

pub fn save_ngram(path: &Path, m: &NgramModel) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer(&mut w, &NgramDoc::from(m))?;
    w.flush()?;
    Ok(())
}

pub fn load_ngram(path: &Path) -> Result<NgramModel> {
    read_json::<NgramDoc>(path)?
        .try_into()
        .with_context(|| format!("loading model {}", path.display()))
}

// ---------------------------------------------------------------- records

pub fn write_records<W: Write>(mut w: W, records: &[PromptRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<PromptRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PromptRecord =
            serde_json::from_str(&line).with_context(|| format!("line {}", i + 1))?;
        rec.validate().with_context(|| format!("line {}", i + 1))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn save_records(path: &Path, records: &[PromptRecord]) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    write_records(&mut w, records)?;
    w.flush()?;
    Ok(())
}

pub fn load_records(path: &Path) -> Result<Vec<PromptRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_records(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

// ---------------------------------------------------------------- router

#[derive(Serialize, Deserialize)]
struct RouterDoc {
    classes: usize,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    preprocess_params: PreprocessParams,
    train_meta: TrainMeta,
}

pub fn router_to_json(r: &RouterModel) -> Result<String> {
    Ok(serde_json::to_string(&RouterDoc {
        classes: r.classes(),
        weights: r.weights().to_vec(),
        biases: r.biases().to_vec(),
        preprocess_params: r.preprocess_params().clone(),
        train_meta: r.train_meta().clone(),
    })?)
}

pub fn router_from_json(text: &str) -> Result<RouterModel> {
    let doc: RouterDoc = serde_json::from_str(text)?;
    ensure!(
        doc.classes == doc.biases.len(),
        "router declares {} classes but has {} biases",
        doc.classes,
        doc.biases.len()
    );
    Ok(RouterModel::from_parts(
        doc.weights,
        doc.biases,
        doc.preprocess_params,
        doc.train_meta,
    )?)
}

pub fn save_router(path: &Path, r: &RouterModel) -> Result<()> {
    let mut f = create(path)?;
    f.write_all(router_to_json(r)?.as_bytes())?;
    Ok(())
}

pub fn load_router(path: &Path) -> Result<RouterModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    router_from_json(&text).with_context(|| format!("loading router {}", path.display()))
}

// ---------------------------------------------------------------- drafts

#[derive(Serialize, Deserialize)]
struct AdaptedDoc {
    mu: f64,
    cluster: NgramDoc,
}

fn save_adapted(path: &Path, m: &AdaptedModel) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer(
        &mut w,
        &AdaptedDoc {
            mu: m.mu(),
            cluster: m.cluster().into(),
        },
    )?;
    w.flush()?;
    Ok(())
}

fn load_adapted(path: &Path, base: &Arc<NgramModel>) -> Result<AdaptedModel> {
    let doc: AdaptedDoc = read_json(path)?;
    Ok(AdaptedModel::from_parts(
        base.clone(),
        doc.cluster.try_into()?,
        doc.mu,
    )?)
}

pub fn task_file(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("task_{i}.json"))
}

/// Writes `base.json`, `task_{i}.json`, `manifest.json` and, when given,
/// `unary.json`.
pub fn save_draft_set(dir: &Path, set: &DraftSet, unary: Option<&AdaptedModel>) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_ngram(&dir.join("base.json"), &set.base)?;
    for (i, m) in set.per_task.iter().enumerate() {
        save_adapted(&task_file(dir, i), m)?;
    }
    if let Some(u) = unary {
        save_adapted(&dir.join("unary.json"), u)?;
    }
    write_json(&dir.join("manifest.json"), &set.manifest)
}

pub fn load_draft_set(dir: &Path) -> Result<(DraftSet, Option<AdaptedModel>)> {
    let manifest: DraftManifest = read_json(&dir.join("manifest.json"))?;
    let base = Arc::new(load_ngram(&dir.join("base.json"))?);
    let per_task = (0..manifest.sizes.len())
        .map(|i| load_adapted(&task_file(dir, i), &base))
        .collect::<Result<Vec<_>>>()?;
    let unary_path = dir.join("unary.json");
    let unary = if unary_path.exists() {
        Some(load_adapted(&unary_path, &base)?)
    } else {
        None
    };
    Ok((
        DraftSet {
            base,
            per_task,
            manifest,
        },
        unary,
    ))
}

// ---------------------------------------------------------------- clusters

pub const CENTROID_FILE: &str = "centroids.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterManifest {
    pub k: usize,
    pub sizes: Vec<usize>,
    pub centroid_file: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub inertia: f64,
    pub accuracy: Option<f64>,
}

pub fn cluster_file(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("cluster_{i}.jsonl"))
}

/// Writes one JSONL file per cluster, the centroids, the full assignment
/// and a manifest.
pub fn save_clusters(
    dir: &Path,
    records: &[PromptRecord],
    clustering: &ClusteredDataset,
    params: serde_json::Value,
    accuracy: Option<f64>,
) -> Result<()> {
    ensure!(
        records.len() == clustering.assignments.len(),
        "{} records but {} assignments",
        records.len(),
        clustering.assignments.len()
    );
    fs::create_dir_all(dir)?;
    for (i, members) in clustering.partition(records).iter().enumerate() {
        save_records(&cluster_file(dir, i), members)?;
    }
    write_json(&dir.join(CENTROID_FILE), &clustering.centroids)?;
    write_json(&dir.join("clustering.json"), clustering)?;
    write_json(
        &dir.join("manifest.json"),
        &ClusterManifest {
            k: clustering.k,
            sizes: clustering.sizes(),
            centroid_file: CENTROID_FILE.into(),
            seed: clustering.seed,
            params,
            inertia: clustering.inertia,
            accuracy,
        },
    )
}

pub fn load_clustering(dir: &Path) -> Result<ClusteredDataset> {
    let c: ClusteredDataset = read_json(&dir.join("clustering.json"))?;
    let centroids: Vec<FeatureVector> = read_json(&dir.join(CENTROID_FILE))?;
    ensure!(
        centroids == c.centroids,
        "centroid file disagrees with clustering.json"
    );
    Ok(c)
}

// ---------------------------------------------------------------- traces, CSV

pub fn write_trace<W: Write>(mut w: W, trace: &[TraceRecord]) -> Result<()> {
    for t in trace {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<TraceRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

pub const SIMULATE_HEADER: &str = "alpha,gamma,c,theoretical,simulated,rel_error";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateRow {
    pub alpha: f64,
    pub gamma: u32,
    pub c: f64,
    pub theoretical: f64,
    pub simulated: f64,
}

impl SimulateRow {
    pub fn rel_error(&self) -> f64 {
        (self.simulated - self.theoretical).abs() / self.theoretical
    }
}

pub fn write_simulate_csv<W: Write>(mut w: W, rows: &[SimulateRow]) -> Result<()> {
    writeln!(w, "{SIMULATE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6}",
            r.alpha,
            r.gamma,
            r.c,
            r.theoretical,
            r.simulated,
            r.rel_error()
        )?;
    }
    Ok(())
}

/// Fails with a message naming the stage that produces `path`.
pub fn require(path: &Path, what: &str, stage: &str) -> Result<()> {
    if !path.exists() {
        bail!(
            "missing {what} at {}: run `specroute {stage}` first",
            path.display()
        );
    }
    Ok(())
}
