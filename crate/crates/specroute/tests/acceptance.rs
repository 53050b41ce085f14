//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p specroute --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specroute::bench::{bench_sweep, BenchInputs, BenchRow};
use specroute::config::{Config, Method};
use specroute::pipeline::{self, embed_records};
use specroute::stages::{self, Layout};
use specroute_core::engine::{
    acceptance_probability, decode_autoregressive, residual_distribution, speculative_decode,
    verify_stochastic, DraftProposal, SpecConfig,
};
use specroute_core::partition::{cluster_accuracy, KMeans};
use specroute_core::perf::{
    expected_tokens_per_iteration, simulate, simulate_speculative, theoretical_speedup, SimBudget,
    SpeedupParams,
};
use specroute_core::router::{train_router, RouterTrainer};
use specroute_core::synth::{gen_corpus, CorpusSpec};
use specroute_core::{NgramModel, ProbVector, TokenId, Vocab};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_model(rng: &mut ChaCha8Rng, v: &Vocab) -> NgramModel {
    let n = v.len() as u32;
    let docs: Vec<Vec<TokenId>> = (0..rng.random_range(1..8))
        .map(|_| {
            (0..rng.random_range(1..20))
                .map(|_| rng.random_range(3..n))
                .collect()
        })
        .collect();
    let order = rng.random_range(1..6);
    let lambda = rng.random_range(0.05..0.95);
    NgramModel::train(v, &docs, order, lambda).unwrap()
}

fn losslessness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases = 300;
    for case in 0..cases {
        let mut v = Vocab::new();
        for i in 0..rng.random_range(2..10) {
            v.insert(&format!("t{i}"));
        }
        let target = random_model(&mut rng, &v);
        let draft = random_model(&mut rng, &v);
        let prompt: Vec<TokenId> = (0..rng.random_range(0..6))
            .map(|_| rng.random_range(3..v.len() as u32))
            .collect();
        let gamma = rng.random_range(1..=10);
        let max_tokens = rng.random_range(1..60);
        let reference = decode_autoregressive(&target, &prompt, max_tokens, None).tokens;
        let out = speculative_decode(
            &target,
            &draft,
            &prompt,
            &SpecConfig::greedy(gamma, max_tokens),
        )
        .map_err(|e| e.to_string())?;
        if out.tokens != reference {
            return Err(format!("case {case}: outputs differ (gamma {gamma})"));
        }
    }
    Ok(format!("{cases} random cases identical"))
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> ProbVector {
    let w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < 0.2 {
                0.0
            } else {
                rng.random()
            }
        })
        .collect();
    ProbVector::normalized(w).unwrap_or_else(|_| ProbVector::uniform(n))
}

fn distribution_preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let p = random_dist(&mut rng, n);
        let q = random_dist(&mut rng, n);
        // Enumerate: draft x ~ q, accept w.p. min(1, p/q), else resample
        // from the residual.
        let mut marginal = vec![0.0; n];
        let mut reject = 0.0;
        for x in 0..n {
            let a = if q[x] > 0.0 {
                acceptance_probability(&p, &q, x as TokenId)
            } else {
                0.0
            };
            marginal[x] += q[x] * a;
            reject += q[x] * (1.0 - a);
        }
        if reject > 0.0 {
            let r = residual_distribution(&p, &q).map_err(|e| e.to_string())?;
            for (m, r) in marginal.iter_mut().zip(r.as_slice()) {
                *m += reject * r;
            }
        }
        for (m, px) in marginal.iter().zip(p.as_slice()) {
            worst = worst.max((m - px).abs());
        }
    }
    if worst > 1e-12 {
        return Err(format!("enumerated marginal off by {worst:e}"));
    }

    let p = ProbVector::new(vec![0.3, 0.05, 0.15, 0.1, 0.2, 0.05, 0.1, 0.05]).unwrap();
    let q = ProbVector::new(vec![0.05, 0.3, 0.1, 0.2, 0.05, 0.1, 0.1, 0.1]).unwrap();
    let samples = 100_000;
    let mut counts = [0u64; 8];
    for _ in 0..samples {
        let x = q.sample(&mut rng);
        let prop = DraftProposal {
            tokens: vec![x],
            draft_dists: vec![q.clone()],
        };
        let v = verify_stochastic(&[p.clone(), p.clone()], &prop, &mut rng)
            .map_err(|e| e.to_string())?;
        let first = if v.accepted_len == 1 {
            x
        } else {
            v.emitted_token
        };
        counts[first as usize] += 1;
    }
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(p.as_slice())
            .map(|(&c, &px)| (c as f64 / samples as f64 - px).abs())
            .sum::<f64>();
    check(
        tv < 0.01,
        format!("max enumeration error {worst:.1e}, empirical TV {tv:.4} at 1e5 samples"),
    )
}

fn speedup_model() -> Outcome {
    let mut worst_speedup: f64 = 0.0;
    let mut worst_tokens: f64 = 0.0;
    for ai in 1..=9 {
        let alpha = ai as f64 / 10.0;
        for gamma in 1..=10u32 {
            for c in [0.05, 0.1] {
                let p = SpeedupParams::new(alpha, c, gamma).map_err(|e| e.to_string())?;
                let theory = theoretical_speedup(&p).map_err(|e| e.to_string())?;
                let sim = simulate_speculative(&p, 100_000, 7 + ai as u64 * 100 + gamma as u64)
                    .map_err(|e| e.to_string())?;
                worst_speedup = worst_speedup.max((sim.simulated_speedup - theory).abs() / theory);
            }
            let p = SpeedupParams::new(alpha, 0.05, gamma).map_err(|e| e.to_string())?;
            let sim = simulate(&p, SimBudget::Iterations(1_000_000), 1.0, 11 + gamma as u64)
                .map_err(|e| e.to_string())?;
            let expect = expected_tokens_per_iteration(alpha, gamma).map_err(|e| e.to_string())?;
            worst_tokens =
                worst_tokens.max((sim.mean_tokens_per_iteration - expect).abs() / expect);
        }
    }
    check(
        worst_speedup < 0.02 && worst_tokens < 0.01,
        format!(
            "max speedup rel. error {:.3}% (limit 2%), max tokens/iteration rel. error {:.3}% (limit 1%)",
            100.0 * worst_speedup,
            100.0 * worst_tokens
        ),
    )
}

type Table = BTreeMap<(Method, usize), Vec<BenchRow>>;

fn table(rows: &[BenchRow]) -> Table {
    let mut t: Table = BTreeMap::new();
    for r in rows {
        t.entry((r.method, r.domain)).or_default().push(r.clone());
    }
    for v in t.values_mut() {
        v.sort_by_key(|r| r.gamma);
    }
    t
}

fn domains(t: &Table) -> Vec<usize> {
    let d: std::collections::BTreeSet<usize> = t.keys().map(|k| k.1).collect();
    d.into_iter().collect()
}

fn best_gamma_idx(rows: &[BenchRow]) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.speedup > rows[best].speedup {
            best = i;
        }
    }
    best
}

fn fmt_seq(xs: impl Iterator<Item = f64>) -> String {
    xs.map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ")
}

fn trends(t: &Table) -> Outcome {
    let mut failures = Vec::new();
    let mut peaks = Vec::new();
    for d in domains(t) {
        for m in [Method::Vanilla, Method::Taskspec] {
            let rows = &t[&(m, d)];
            for w in rows.windows(2) {
                if w[1].acceptance_rate > w[0].acceptance_rate + 0.02 {
                    failures.push(format!(
                        "{m} d{d}: acceptance rises {:.3}->{:.3} at gamma {}",
                        w[0].acceptance_rate, w[1].acceptance_rate, w[1].gamma
                    ));
                }
            }
        }
        let rows = &t[&(Method::Taskspec, d)];
        let b = best_gamma_idx(rows);
        peaks.push(format!("d{d}:{}", rows[b].gamma));
        if b == 0 || b == rows.len() - 1 {
            failures.push(format!(
                "taskspec d{d}: speedup peaks at the boundary gamma {} [{}]",
                rows[b].gamma,
                fmt_seq(rows.iter().map(|r| r.speedup))
            ));
        }
    }
    if failures.is_empty() {
        Ok(format!(
            "acceptance non-increasing; taskspec speedup peaks at gamma {}",
            peaks.join(" ")
        ))
    } else {
        Err(failures.join("; "))
    }
}

fn versus_vanilla(t: &Table) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for d in domains(t) {
        let ts = &t[&(Method::Taskspec, d)];
        let b = best_gamma_idx(ts);
        let van = &t[&(Method::Vanilla, d)][b];
        let gain = ts[b].acceptance_rate - van.acceptance_rate;
        let ratio = ts[b].tau / van.tau;
        ok &= gain >= 0.10 && ratio >= 1.2;
        detail.push(format!(
            "d{d}@{}: acc {:.2} vs {:.2}, tau x{ratio:.2}",
            ts[b].gamma, ts[b].acceptance_rate, van.acceptance_rate
        ));
    }
    check(ok, detail.join("; "))
}

fn versus_unary(t: &Table) -> Outcome {
    let mut wins = 0;
    let mut detail = Vec::new();
    let (mut tau_ts, mut tau_un, mut n) = (0.0, 0.0, 0.0);
    for d in domains(t) {
        let at = |m: Method, g: usize| t[&(m, d)].iter().find(|r| r.gamma == g).cloned();
        let mut win = true;
        for g in [9, 10] {
            let (Some(ts), Some(un)) = (at(Method::Taskspec, g), at(Method::Unary, g)) else {
                return Err(format!("gamma {g} missing from the sweep"));
            };
            win &= ts.acceptance_rate >= un.acceptance_rate;
            tau_ts += ts.tau;
            tau_un += un.tau;
            n += 1.0;
            detail.push(format!(
                "d{d}@{g} {:.2}/{:.2}",
                ts.acceptance_rate, un.acceptance_rate
            ));
        }
        wins += usize::from(win);
    }
    let (tau_ts, tau_un) = (tau_ts / n, tau_un / n);
    check(
        wins >= 3 && tau_ts > tau_un,
        format!(
            "taskspec >= unary on {wins}/{} domains ({}); mean tau {tau_ts:.3} vs {tau_un:.3}",
            domains(t).len(),
            detail.join(" ")
        ),
    )
}

fn clustering() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for (k, floor) in [(2, 0.95), (3, 0.90), (4, 0.85)] {
        let spec = CorpusSpec {
            k_domains: k,
            docs_per_domain: 200,
            overlap_fraction: 0.1,
            ..CorpusSpec::default()
        };
        let corpus = gen_corpus(&spec).map_err(|e| e.to_string())?;
        let cfg = Config::default();
        let points = embed_records(&cfg.partition, &corpus.records).map_err(|e| e.to_string())?;
        let c = KMeans::new(k, cfg.partition.seed)
            .fit(&points)
            .map_err(|e| e.to_string())?;
        let labels: Vec<usize> = corpus
            .records
            .iter()
            .map(|r| r.true_label.unwrap())
            .collect();
        let acc = cluster_accuracy(&c, &labels).map_err(|e| e.to_string())?;
        ok &= acc >= floor;
        detail.push(format!("k={k}: {acc:.4} (floor {floor})"));
    }
    check(ok, detail.join(", "))
}

fn router(t: &Table) -> Outcome {
    let spec = CorpusSpec {
        k_domains: 2,
        docs_per_domain: 200,
        overlap_fraction: 0.0,
        ..CorpusSpec::default()
    };
    let corpus = gen_corpus(&spec).map_err(|e| e.to_string())?;
    let (_, val_acc) = train_router(&corpus.records, 0.8, 20, 0.1, 5).map_err(|e| e.to_string())?;

    let two_tasks = RouterTrainer::default()
        .fit(
            &[
                "Tell me the result of 2+3",
                "A surety may request the debtor to provide a counter-security",
            ],
            &[0, 1],
        )
        .map_err(|e| e.to_string())?;
    let label = two_tasks.classify("Tell me the result of 1+1").0;

    let mean_tau = |m: Method| {
        let taus: Vec<f64> = domains(t)
            .iter()
            .filter_map(|&d| t[&(m, d)].iter().find(|r| r.gamma == 10).map(|r| r.tau))
            .collect();
        taus.iter().sum::<f64>() / taus.len() as f64
    };
    let (classified, random) = (mean_tau(Method::Taskspec), mean_tau(Method::RandomRoute));
    check(
        val_acc >= 0.99 && label == 0 && classified >= 1.1 * random,
        format!(
            "separable validation accuracy {val_acc:.4}; arithmetic prompt -> label {label}; \
             tau@10 classifier {classified:.3} vs random {random:.3} (x{:.2})",
            classified / random
        ),
    )
}

fn tree(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let mut cfg = Config::default();
    cfg.corpus.docs_per_domain = 150;
    cfg.bench.gammas = vec![1, 3, 6];
    cfg.bench.prompts_per_domain = 5;
    cfg.bench.target_pass_us = 0;
    cfg.bench.draft_pass_us = 0;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let l = Layout::new(d.path());
        stages::build_all(&cfg, &l).map_err(|e| format!("{e:#}"))?;
        stages::bench(&cfg, &l, false).map_err(|e| format!("{e:#}"))?;
    }
    let files = tree(dirs[0].path());
    if files != tree(dirs[1].path()) {
        return Err("different artifact sets".into());
    }
    let strip = |text: String| -> String {
        text.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.drain(5..7);
                f.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut compared = 0;
    for f in &files {
        let (a, b) = (dirs[0].path().join(f), dirs[1].path().join(f));
        let same = match f.to_str().unwrap() {
            "bench.csv" => {
                strip(fs::read_to_string(a).unwrap()) == strip(fs::read_to_string(b).unwrap())
            }
            "bench.json" => continue,
            _ => fs::read(a).unwrap() == fs::read(b).unwrap(),
        };
        if !same {
            return Err(format!("{} differs between runs", f.display()));
        }
        compared += 1;
    }
    Ok(format!(
        "{compared} artifacts identical across two runs (CSV modulo wall-time columns)"
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cfg = Config::default();
    let bench = pipeline::build_all(&cfg).and_then(|a| {
        let inputs = BenchInputs {
            vocab: &a.corpus.vocab,
            target: Some(&a.models.target),
            base: Some(&a.models.base),
            drafts: Some(&a.drafts.set),
            unary: Some(&a.drafts.unary),
            router: Some(&a.router),
            tags: &cfg.tags,
            test: &a.corpus.test,
        };
        bench_sweep(&cfg.bench, &inputs)
    });
    let t = bench
        .as_deref()
        .map(table)
        .map_err(|e| format!("benchmark failed: {e:#}"));
    let on_bench = |f: fn(&Table) -> Outcome| t.as_ref().map_err(Clone::clone).and_then(f);

    let results: Vec<(&str, Outcome)> = vec![
        ("1 losslessness", losslessness()),
        ("2 distribution preservation", distribution_preservation()),
        ("3 speedup model", speedup_model()),
        ("4 gamma trends", on_bench(trends)),
        ("5 taskspec vs vanilla", on_bench(versus_vanilla)),
        ("6 taskspec vs unary", on_bench(versus_unary)),
        ("7 clustering", clustering()),
        ("8 router", on_bench(router)),
        ("9 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    println!(
        "{} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
