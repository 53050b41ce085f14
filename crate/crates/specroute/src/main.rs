use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use specroute::bench::CSV_HEADER;
use specroute::config::Config;
use specroute::io::{write_simulate_csv, write_trace, SimulateRow};
use specroute::stages::{self, write_file, Layout};
use specroute_core::engine::{speculative_decode, SpecConfig, VerifyMode};
use specroute_core::partition::PromptRecord;
use specroute_core::perf::{simulate_speculative, theoretical_speedup, SpeedupParams};
use specroute_core::router::route;
use specroute_core::LanguageModel;

#[derive(Parser)]
#[command(
    name = "specroute",
    version,
    about = "Task-routed speculative decoding with n-gram models"
)]
struct Cli {
    /// Work directory holding every stage's artifacts.
    #[arg(long, short, global = true, default_value = "work")]
    work: PathBuf,
    /// JSON config; defaults apply to every missing field.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic corpus and train the target and base draft.
    GenCorpus,
    /// Collect ⟨input, output⟩ pairs with vanilla speculative decoding.
    Collect,
    /// Cluster the collected pairs into tasks.
    Cluster,
    /// Build one adapted draft per cluster, plus the unary draft.
    Adapt,
    /// Train the prompt classifier on cluster ids.
    TrainRouter,
    /// Run every build stage from gen-corpus to train-router.
    All,
    /// Show which draft a prompt is routed to.
    Route {
        prompt: String,
        #[arg(long)]
        tag: Option<String>,
    },
    /// Decode one prompt end to end.
    Run {
        prompt: String,
        #[arg(long)]
        tag: Option<String>,
        #[arg(long, value_enum, default_value_t = Draft::Taskspec)]
        draft: Draft,
        #[arg(long, default_value_t = 4)]
        gamma: usize,
        #[arg(long, default_value_t = 48)]
        max_tokens: usize,
        #[arg(long)]
        stochastic: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-iteration trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// γ sweep over every configured method; writes bench.csv and bench.json.
    Bench {
        /// Also sweep the per-cluster fine-tuning cap; writes cap_sweep.csv.
        #[arg(long)]
        caps: bool,
    },
    /// Monte Carlo check of the speedup model; prints CSV.
    Simulate {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
        alphas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = 1..=10)]
        gammas: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1])]
        cs: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        tokens: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Draft {
    Vanilla,
    Unary,
    Taskspec,
}

fn load_config(cli: &Cli) -> Result<Config> {
    match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Config::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(Config::default()),
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn record(prompt: &str, tag: Option<String>) -> Result<PromptRecord> {
    let r = PromptRecord::new(prompt)?;
    Ok(match tag {
        Some(t) => r.with_tag(t),
        None => r,
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    let l = Layout::new(&cli.work);
    match cli.cmd {
        Cmd::GenCorpus => print_json(&stages::gen_corpus(&cfg, &l)?)?,
        Cmd::Collect => println!("collected {} pairs", stages::collect(&cfg, &l)?),
        Cmd::Cluster => print_json(&stages::cluster(&cfg, &l)?)?,
        Cmd::Adapt => println!("cluster sizes {:?}", stages::adapt(&cfg, &l)?),
        Cmd::TrainRouter => println!("validation accuracy {:.4}", stages::train_router(&cfg, &l)?),
        Cmd::All => {
            stages::build_all(&cfg, &l)?;
            println!("artifacts written to {}", l.root.display());
        }
        Cmd::Route { prompt, tag } => {
            let router = l.load_router()?;
            let (drafts, _) = l.load_drafts()?;
            let r = route(&router, &record(&prompt, tag)?, &drafts, &cfg.tags)?;
            println!("cluster {} via {:?}", r.cluster, r.source);
        }
        Cmd::Run {
            prompt,
            tag,
            draft,
            gamma,
            max_tokens,
            stochastic,
            seed,
            trace,
        } => {
            let (drafts, unary) = l.load_drafts()?;
            let target = l.load_target()?;
            let vocab = target.vocab().clone();
            let chosen: &dyn LanguageModel = match draft {
                Draft::Vanilla => &*drafts.base,
                Draft::Unary => match &unary {
                    Some(u) => u,
                    None => bail!("missing unary draft: run `specroute adapt` first"),
                },
                Draft::Taskspec => {
                    let router = l.load_router()?;
                    let r = route(&router, &record(&prompt, tag)?, &drafts, &cfg.tags)?;
                    eprintln!("routed to cluster {} via {:?}", r.cluster, r.source);
                    r.draft
                }
            };
            let spec = SpecConfig {
                gamma,
                max_tokens,
                mode: if stochastic {
                    VerifyMode::Stochastic
                } else {
                    VerifyMode::Greedy
                },
                seed,
                trace: trace.is_some(),
            };
            let out = speculative_decode(&target, chosen, &vocab.encode(&prompt), &spec)?;
            println!("{}", vocab.decode(&out.tokens));
            let s = &out.stats;
            eprintln!(
                "output_tokens {} target_passes {} acceptance_rate {:.4} tau {:.4}",
                s.output_tokens,
                s.target_passes,
                s.acceptance_rate().unwrap_or(0.0),
                s.tau(cfg.bench.tau_mode).unwrap_or(0.0)
            );
            if let Some(path) = trace {
                write_file(&path, |w| write_trace(w, &out.trace))?;
            }
        }
        Cmd::Bench { caps } => {
            let out = stages::bench(&cfg, &l, caps)?;
            println!("{CSV_HEADER}");
            for r in &out.rows {
                println!("{}", r.csv_line());
            }
            if caps {
                eprintln!("cap sweep written to {}", l.cap_csv().display());
            }
        }
        Cmd::Simulate {
            alphas,
            gammas,
            cs,
            tokens,
            seed,
            out,
        } => {
            let mut rows = Vec::new();
            for &alpha in &alphas {
                for &gamma in &gammas {
                    for &c in &cs {
                        let p = SpeedupParams::new(alpha, c, gamma)?;
                        rows.push(SimulateRow {
                            alpha,
                            gamma,
                            c,
                            theoretical: theoretical_speedup(&p)?,
                            simulated: simulate_speculative(&p, tokens, seed)?.simulated_speedup,
                        });
                    }
                }
            }
            match out {
                Some(path) => write_file(&path, |w| write_simulate_csv(w, &rows))?,
                None => {
                    let stdout = io::stdout();
                    let mut lock = stdout.lock();
                    write_simulate_csv(&mut lock, &rows)?;
                    lock.flush()?;
                }
            }
        }
    }
    Ok(())
}
