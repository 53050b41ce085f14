//! γ-sweep benchmark: every method × domain × γ cell decodes the same
//! held-out prompts and reports acceptance rate, τ and wall-time speedup over
//! target-only decoding.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use specroute_core::engine::{
    decode_autoregressive_timed, speculative_decode_timed, DecodeStats, SpecConfig, TauMode,
    VerifyMode,
};
use specroute_core::forge::{AdaptedModel, DraftSet};
use specroute_core::partition::{ClusteredDataset, PromptRecord};
use specroute_core::router::{route, RouterModel, TagMap};
use specroute_core::{LanguageModel, NgramModel, Vocab};

use crate::config::{BenchConfig, Config, Method};
use crate::pipeline::adapt;
use crate::timing::{Emulated, MonotonicClock};

pub const CSV_HEADER: &str = "method,domain,gamma,acceptance_rate,tau,speedup,route_ms,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub domain: usize,
    pub gamma: usize,
    pub acceptance_rate: f64,
    /// τ under the configured mode.
    pub tau: f64,
    /// Accepted plus emitted tokens per target pass.
    pub tau_with_emitted: f64,
    pub speedup: f64,
    /// Mean classifier time per prompt; zero for methods that do not route.
    pub route_ms: f64,
    pub seed: u64,
    pub stats: DecodeStats,
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
            self.method,
            self.domain,
            self.gamma,
            self.acceptance_rate,
            self.tau,
            self.speedup,
            self.route_ms,
            self.seed
        )
    }
}

pub fn write_csv<W: Write>(mut w: W, rows: &[BenchRow]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Everything the sweep decodes with. `None` fields mark pipeline stages
/// that have not been run.
#[derive(Clone, Copy)]
pub struct BenchInputs<'a> {
    pub vocab: &'a Vocab,
    pub target: Option<&'a NgramModel>,
    pub base: Option<&'a NgramModel>,
    pub drafts: Option<&'a DraftSet>,
    pub unary: Option<&'a AdaptedModel>,
    pub router: Option<&'a RouterModel>,
    pub tags: &'a TagMap,
    pub test: &'a [PromptRecord],
}

fn need<'a, T>(x: Option<&'a T>, what: &str, stage: &str) -> Result<&'a T> {
    match x {
        Some(v) => Ok(v),
        None => bail!("missing {what}: run `specroute {stage}` first"),
    }
}

/// Test prompts grouped by domain label, at most `per_domain` each.
pub fn prompts_by_domain(
    test: &[PromptRecord],
    per_domain: usize,
) -> BTreeMap<usize, Vec<&PromptRecord>> {
    let mut out: BTreeMap<usize, Vec<&PromptRecord>> = BTreeMap::new();
    for r in test {
        if let Some(l) = r.true_label {
            let v = out.entry(l).or_default();
            if v.len() < per_domain {
                v.push(r);
            }
        }
    }
    out
}

pub fn bench_sweep(cfg: &BenchConfig, inputs: &BenchInputs<'_>) -> Result<Vec<BenchRow>> {
    let target = need(inputs.target, "target model", "gen-corpus")?;
    let uses = |m: Method| cfg.methods.contains(&m);
    let base = if uses(Method::Vanilla) {
        Some(need(inputs.base, "base draft", "gen-corpus")?)
    } else {
        None
    };
    let drafts = if uses(Method::Taskspec) || uses(Method::RandomRoute) {
        Some(need(inputs.drafts, "draft set", "adapt")?)
    } else {
        None
    };
    let unary = if uses(Method::Unary) {
        Some(need(inputs.unary, "unary draft", "adapt")?)
    } else {
        None
    };
    let router = if uses(Method::Taskspec) {
        Some(need(inputs.router, "router", "train-router")?)
    } else {
        None
    };
    let domains = prompts_by_domain(inputs.test, cfg.prompts_per_domain);
    if domains.is_empty() {
        bail!("no labelled test prompts: run `specroute gen-corpus` first");
    }

    let clock = MonotonicClock::new();
    let target = Emulated::micros(target, cfg.target_pass_us);
    let encoded: BTreeMap<usize, Vec<Vec<u32>>> = domains
        .iter()
        .map(|(&d, rs)| {
            (
                d,
                rs.iter().map(|r| inputs.vocab.encode(&r.input)).collect(),
            )
        })
        .collect();

    // Target-only baseline per domain.
    let mut baseline: BTreeMap<usize, f64> = BTreeMap::new();
    for (&d, prompts) in &encoded {
        let mut wall = 0.0;
        for (i, p) in prompts.iter().enumerate() {
            let seed = match cfg.mode {
                VerifyMode::Greedy => None,
                VerifyMode::Stochastic => Some(cfg.seed + i as u64),
            };
            wall += decode_autoregressive_timed(&target, p, cfg.max_tokens, seed, &clock)
                .stats
                .wall_time;
        }
        baseline.insert(d, wall);
    }

    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for (&domain, prompts) in &encoded {
            if method == Method::Autoregressive {
                rows.push(BenchRow {
                    method,
                    domain,
                    gamma: 0,
                    acceptance_rate: 0.0,
                    tau: 0.0,
                    tau_with_emitted: 1.0,
                    speedup: 1.0,
                    route_ms: 0.0,
                    seed: cfg.seed,
                    stats: DecodeStats::default(),
                });
                continue;
            }
            for &gamma in &cfg.gammas {
                let mut stats = DecodeStats::default();
                let mut route_secs = 0.0;
                // Same random assignment at every gamma.
                let mut pick_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((domain as u64) << 32));
                for (i, p) in prompts.iter().enumerate() {
                    let draft: &dyn LanguageModel = match method {
                        Method::Vanilla => base.expect("checked above"),
                        Method::Unary => unary.expect("checked above"),
                        Method::Taskspec => {
                            let t0 = Instant::now();
                            let r = route(
                                router.expect("checked above"),
                                domains[&domain][i],
                                drafts.expect("checked above"),
                                inputs.tags,
                            )?;
                            route_secs += t0.elapsed().as_secs_f64();
                            r.draft
                        }
                        Method::RandomRoute => {
                            let set = drafts.expect("checked above");
                            &set.per_task[pick_rng.random_range(0..set.k())]
                        }
                        Method::Autoregressive => unreachable!(),
                    };
                    let spec = SpecConfig {
                        gamma,
                        max_tokens: cfg.max_tokens,
                        mode: cfg.mode,
                        seed: cfg.seed + i as u64,
                        trace: false,
                    };
                    let d = speculative_decode_timed(
                        &target,
                        &Emulated::micros(draft, cfg.draft_pass_us),
                        p,
                        &spec,
                        &clock,
                    )?;
                    stats.merge(&d.stats);
                }
                let speedup = if stats.wall_time > 0.0 {
                    baseline[&domain] / stats.wall_time
                } else {
                    0.0
                };
                rows.push(BenchRow {
                    method,
                    domain,
                    gamma,
                    acceptance_rate: stats.acceptance_rate()?,
                    tau: stats.tau(cfg.tau_mode)?,
                    tau_with_emitted: stats.tau(TauMode::WithEmitted)?,
                    speedup,
                    route_ms: 1e3 * route_secs / prompts.len() as f64,
                    seed: cfg.seed,
                    stats,
                });
            }
        }
    }
    Ok(rows)
}

pub const CAP_CSV_HEADER: &str = "cap,domain,gamma,acceptance_rate,tau,speedup,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapRow {
    pub cap: usize,
    pub domain: usize,
    pub gamma: usize,
    pub acceptance_rate: f64,
    pub tau: f64,
    pub speedup: f64,
    pub seed: u64,
}

pub fn write_cap_csv<W: Write>(mut w: W, rows: &[CapRow]) -> std::io::Result<()> {
    writeln!(w, "{CAP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6},{}",
            r.cap, r.domain, r.gamma, r.acceptance_rate, r.tau, r.speedup, r.seed
        )?;
    }
    Ok(())
}

/// Re-adapts the draft set at every configured per-cluster cap and benches
/// TaskSpec at `cap_sweep_gamma`.
pub fn cap_sweep(
    cfg: &Config,
    inputs: &BenchInputs<'_>,
    collected: &[PromptRecord],
    clustering: &ClusteredDataset,
) -> Result<Vec<CapRow>> {
    let base = need(inputs.base, "base draft", "gen-corpus")?;
    let mut out = Vec::new();
    for &cap in &cfg.bench.cap_sweep {
        let mut c = cfg.clone();
        c.forge.cap = Some(cap);
        let drafts = adapt(
            &c,
            Arc::new(base.clone()),
            inputs.vocab,
            collected,
            clustering,
        )?;
        let bench = BenchConfig {
            gammas: vec![cfg.bench.cap_sweep_gamma],
            methods: vec![Method::Taskspec],
            ..cfg.bench.clone()
        };
        let rows = bench_sweep(
            &bench,
            &BenchInputs {
                drafts: Some(&drafts.set),
                ..*inputs
            },
        )?;
        out.extend(rows.into_iter().map(|r| CapRow {
            cap,
            domain: r.domain,
            gamma: r.gamma,
            acceptance_rate: r.acceptance_rate,
            tau: r.tau,
            speedup: r.speedup,
            seed: r.seed,
        }));
    }
    Ok(out)
}
