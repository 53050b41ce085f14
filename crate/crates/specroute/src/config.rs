//! The single JSON configuration covering every pipeline stage. Every field
//! has a default, so `{}` is a valid config.

use serde::{Deserialize, Serialize};
use specroute_core::engine::{TauMode, VerifyMode};
use specroute_core::router::TagMap;
use specroute_core::synth::CorpusSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    pub corpus: CorpusSpec,
    pub split: SplitConfig,
    pub lm: LmConfig,
    pub collect: DecodeConfig,
    pub partition: PartitionConfig,
    pub forge: ForgeConfig,
    pub router: RouterConfig,
    pub bench: BenchConfig,
    /// Explicit task tag → cluster id, consulted before the classifier.
    pub tags: TagMap,
}

impl Config {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Fractions of the generated documents used for target training and for
/// dataset collection; the remainder is held out for benchmarking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub collect_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.7,
            collect_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig {
    pub target_order: usize,
    pub draft_order: usize,
    pub lambda: f64,
    /// Share of target training documents the base draft sees.
    pub base_fraction: f64,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            target_order: 4,
            draft_order: 2,
            lambda: specroute_core::ngram::DEFAULT_LAMBDA,
            base_fraction: 0.1,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub gamma: usize,
    pub max_tokens: usize,
    pub mode: VerifyMode,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            gamma: 4,
            max_tokens: 48,
            mode: VerifyMode::Greedy,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionConfig {
    pub k: usize,
    pub hash_dim: usize,
    pub reduce_dim: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub n_init: usize,
    /// Cluster on input plus collected output instead of input alone.
    pub include_output: bool,
    /// When set, silhouette scores for k in 2..=k_sweep_max are reported.
    pub k_sweep_max: Option<usize>,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            k: 4,
            hash_dim: 32768,
            reduce_dim: 64,
            seed: 17,
            max_iter: 100,
            tol: 1e-6,
            n_init: 4,
            include_output: false,
            k_sweep_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForgeConfig {
    pub mu: f64,
    /// Defaults to the base draft's order.
    pub cluster_order: Option<usize>,
    /// Maximum ⟨input, output⟩ pairs per cluster.
    pub cap: Option<usize>,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        ForgeConfig {
            mu: specroute_core::forge::DEFAULT_MU,
            cluster_order: None,
            cap: Some(8192),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RouterConfig {
    pub hash_dim: usize,
    pub split: f64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Train on ground-truth labels instead of cluster ids.
    pub use_true_labels: bool,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            hash_dim: specroute_core::router::DEFAULT_ROUTER_HASH_DIM,
            split: 0.8,
            epochs: 60,
            lr: 2.0,
            batch_size: 16,
            seed: 19,
            use_true_labels: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Autoregressive,
    Vanilla,
    Unary,
    Taskspec,
    RandomRoute,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Autoregressive => "autoregressive",
            Method::Vanilla => "vanilla",
            Method::Unary => "unary",
            Method::Taskspec => "taskspec",
            Method::RandomRoute => "random_route",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub gammas: Vec<usize>,
    pub methods: Vec<Method>,
    pub prompts_per_domain: usize,
    pub max_tokens: usize,
    pub mode: VerifyMode,
    pub seed: u64,
    /// Emulated cost of one target forward pass, microseconds.
    pub target_pass_us: u64,
    /// Emulated cost of one draft step, microseconds.
    pub draft_pass_us: u64,
    pub tau_mode: TauMode,
    /// Per-cluster fine-tuning set sizes for the cap sweep.
    pub cap_sweep: Vec<usize>,
    pub cap_sweep_gamma: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            gammas: (1..=10).collect(),
            methods: vec![
                Method::Vanilla,
                Method::Unary,
                Method::Taskspec,
                Method::RandomRoute,
            ],
            prompts_per_domain: 20,
            max_tokens: 48,
            mode: VerifyMode::Greedy,
            seed: 23,
            target_pass_us: 200,
            draft_pass_us: 50,
            tau_mode: TauMode::AcceptedOnly,
            cap_sweep: vec![1024, 4096, 8192, 16384],
            cap_sweep_gamma: 5,
        }
    }
}
