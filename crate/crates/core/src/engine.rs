//! Draft/verify speculative decoding.
//!
//! Each iteration drafts up to γ tokens with the draft model, scores
//! `context ++ draft` with the target in one forward pass, keeps the longest
//! accepted prefix and appends one target token (a correction on rejection,
//! a bonus token on full acceptance). Greedy verification reproduces the
//! target's greedy output exactly; stochastic verification uses rejection
//! sampling against the residual `normalize(max(0, p − q))` so the emitted
//! tokens follow the target distribution.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LanguageModel;
use crate::prob::ProbVector;
use crate::vocab::{TokenId, EOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    Greedy,
    Stochastic,
}

/// How τ treats the target token emitted at the end of every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauMode {
    /// Accepted draft tokens per target pass.
    #[default]
    AcceptedOnly,
    /// Accepted draft tokens plus the emitted token, per target pass.
    WithEmitted,
}

/// Monotonic time source, in seconds. The core crate has no clock of its
/// own; callers with `std` plug one in.
pub trait Clock {
    fn now(&self) -> f64;
}

/// A clock that never advances. Wall times come out as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DraftProposal {
    pub tokens: Vec<TokenId>,
    pub draft_dists: Vec<ProbVector>,
}

impl DraftProposal {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationResult {
    pub accepted_len: usize,
    pub emitted_token: TokenId,
    pub decisions: Vec<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeStats {
    pub drafted_tokens: u64,
    pub accepted_tokens: u64,
    pub target_passes: u64,
    pub draft_passes: u64,
    /// Generated tokens, including a terminating EOS.
    pub output_tokens: u64,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub acceptance_rate: f64,
    pub tau: f64,
    pub tokens_per_second: f64,
}

impl DecodeStats {
    /// Accepted draft tokens over drafted tokens.
    pub fn acceptance_rate(&self) -> Result<f64> {
        if self.drafted_tokens == 0 {
            return Err(Error::ZeroDenominator("no drafted tokens"));
        }
        Ok(self.accepted_tokens as f64 / self.drafted_tokens as f64)
    }

    pub fn tau(&self, mode: TauMode) -> Result<f64> {
        if self.target_passes == 0 {
            return Err(Error::ZeroDenominator("no target passes"));
        }
        let num = match mode {
            TauMode::AcceptedOnly => self.accepted_tokens,
            TauMode::WithEmitted => self.accepted_tokens + self.target_passes,
        };
        Ok(num as f64 / self.target_passes as f64)
    }

    pub fn tokens_per_second(&self) -> Result<f64> {
        if self.wall_time.is_nan() || self.wall_time <= 0.0 {
            return Err(Error::ZeroDenominator("no wall time recorded"));
        }
        Ok(self.output_tokens as f64 / self.wall_time)
    }

    pub fn merge(&mut self, other: &DecodeStats) {
        self.drafted_tokens += other.drafted_tokens;
        self.accepted_tokens += other.accepted_tokens;
        self.target_passes += other.target_passes;
        self.draft_passes += other.draft_passes;
        self.output_tokens += other.output_tokens;
        self.wall_time += other.wall_time;
    }
}

pub fn compute_stats(stats: &DecodeStats, tau_mode: TauMode) -> Result<StatsSummary> {
    Ok(StatsSummary {
        acceptance_rate: stats.acceptance_rate()?,
        tau: stats.tau(tau_mode)?,
        tokens_per_second: stats.tokens_per_second()?,
    })
}

/// One line of the optional per-iteration decode trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: u64,
    pub drafted: usize,
    pub accepted: usize,
    pub emitted: TokenId,
    pub mode: VerifyMode,
}

/// Per-pass wall times in seconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PassTimings {
    pub draft: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Generated tokens, EOS excluded.
    pub tokens: Vec<TokenId>,
    pub stats: DecodeStats,
    pub timings: PassTimings,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecConfig {
    pub gamma: usize,
    pub max_tokens: usize,
    pub mode: VerifyMode,
    pub seed: u64,
    #[serde(default)]
    pub trace: bool,
}

impl SpecConfig {
    pub fn greedy(gamma: usize, max_tokens: usize) -> Self {
        SpecConfig {
            gamma,
            max_tokens,
            mode: VerifyMode::Greedy,
            seed: 0,
            trace: false,
        }
    }
}

fn pick<R: Rng + ?Sized>(dist: &ProbVector, mode: VerifyMode, rng: &mut R) -> TokenId {
    match mode {
        VerifyMode::Greedy => dist.greedy_token(),
        VerifyMode::Stochastic => dist.sample(rng),
    }
}

/// Plain target-only decoding. `seed = None` is greedy; otherwise tokens
/// are sampled with a ChaCha8 stream seeded by `seed`.
pub fn decode_autoregressive<M: LanguageModel + ?Sized>(
    model: &M,
    prompt: &[TokenId],
    max_tokens: usize,
    seed: Option<u64>,
) -> Decoded {
    decode_autoregressive_timed(model, prompt, max_tokens, seed, &NoClock)
}

pub fn decode_autoregressive_timed<M: LanguageModel + ?Sized, C: Clock + ?Sized>(
    model: &M,
    prompt: &[TokenId],
    max_tokens: usize,
    seed: Option<u64>,
    clock: &C,
) -> Decoded {
    let mode = if seed.is_some() {
        VerifyMode::Stochastic
    } else {
        VerifyMode::Greedy
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let mut ctx = prompt.to_vec();
    let mut stats = DecodeStats::default();
    let mut timings = PassTimings::default();
    let start = clock.now();
    while (stats.output_tokens as usize) < max_tokens {
        let t0 = clock.now();
        let dist = model
            .forward(&ctx, &[])
            .pop()
            .expect("forward returns one distribution per position");
        timings.target.push(clock.now() - t0);
        stats.target_passes += 1;
        let tok = pick(&dist, mode, &mut rng);
        stats.output_tokens += 1;
        if tok == EOS {
            break;
        }
        ctx.push(tok);
    }
    stats.wall_time = clock.now() - start;
    Decoded {
        tokens: ctx.split_off(prompt.len()),
        stats,
        timings,
        trace: Vec::new(),
    }
}

/// Drafts up to `gamma` tokens, stopping after an EOS.
pub fn draft_propose<M: LanguageModel + ?Sized, R: Rng + ?Sized>(
    draft: &M,
    context: &[TokenId],
    gamma: usize,
    mode: VerifyMode,
    rng: &mut R,
) -> DraftProposal {
    draft_propose_timed(draft, context, gamma, mode, rng, &NoClock, &mut Vec::new())
}

fn draft_propose_timed<M: LanguageModel + ?Sized, R: Rng + ?Sized, C: Clock + ?Sized>(
    draft: &M,
    context: &[TokenId],
    gamma: usize,
    mode: VerifyMode,
    rng: &mut R,
    clock: &C,
    times: &mut Vec<f64>,
) -> DraftProposal {
    let mut ctx = context.to_vec();
    let mut tokens = Vec::with_capacity(gamma);
    let mut dists = Vec::with_capacity(gamma);
    for _ in 0..gamma {
        let t0 = clock.now();
        let q = draft.next_distribution(&ctx);
        times.push(clock.now() - t0);
        let tok = pick(&q, mode, rng);
        tokens.push(tok);
        dists.push(q);
        if tok == EOS {
            break;
        }
        ctx.push(tok);
    }
    DraftProposal {
        tokens,
        draft_dists: dists,
    }
}

fn check_lengths(target_dists: &[ProbVector], proposal: &DraftProposal) -> Result<()> {
    if proposal.tokens.len() != proposal.draft_dists.len() {
        return Err(Error::LengthMismatch {
            expected: proposal.tokens.len(),
            got: proposal.draft_dists.len(),
        });
    }
    if target_dists.len() != proposal.len() + 1 {
        return Err(Error::LengthMismatch {
            expected: proposal.len() + 1,
            got: target_dists.len(),
        });
    }
    Ok(())
}

fn decisions(accepted_len: usize, proposal_len: usize) -> Vec<bool> {
    (0..proposal_len).map(|i| i < accepted_len).collect()
}

/// Accepts drafted tokens while they equal the target argmax.
pub fn verify_greedy(
    target_dists: &[ProbVector],
    proposal: &DraftProposal,
) -> Result<VerificationResult> {
    check_lengths(target_dists, proposal)?;
    let accepted_len = proposal
        .tokens
        .iter()
        .zip(target_dists)
        .take_while(|(&t, p)| p.greedy_token() == t)
        .count();
    Ok(VerificationResult {
        accepted_len,
        emitted_token: target_dists[accepted_len].greedy_token(),
        decisions: decisions(accepted_len, proposal.len()),
    })
}

/// `normalize(max(0, p − q))`.
pub fn residual_distribution(p: &ProbVector, q: &ProbVector) -> Result<ProbVector> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let diff: Vec<f64> = p
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(a, b)| (a - b).max(0.0))
        .collect();
    if diff.iter().all(|&d| d == 0.0) {
        return Err(Error::ResidualUndefined);
    }
    ProbVector::normalized(diff)
}

/// `min(1, p(x) / q(x))`.
pub fn acceptance_probability(p: &ProbVector, q: &ProbVector, token: TokenId) -> f64 {
    let px = p.prob(token);
    let qx = q.prob(token);
    if px >= qx {
        1.0
    } else {
        px / qx
    }
}

/// Rejection-sampling verification with a seeded generator.
pub fn verify_stochastic<R: Rng + ?Sized>(
    target_dists: &[ProbVector],
    proposal: &DraftProposal,
    rng: &mut R,
) -> Result<VerificationResult> {
    verify_stochastic_with(target_dists, proposal, || rng.random())
}

/// Rejection-sampling verification driven by an explicit stream of
/// uniforms: one per examined position, plus one for the emitted token.
pub fn verify_stochastic_with<U: FnMut() -> f64>(
    target_dists: &[ProbVector],
    proposal: &DraftProposal,
    mut uniform: U,
) -> Result<VerificationResult> {
    check_lengths(target_dists, proposal)?;
    for (i, (&tok, q)) in proposal
        .tokens
        .iter()
        .zip(&proposal.draft_dists)
        .enumerate()
    {
        if q.prob(tok) <= 0.0 {
            return Err(Error::ZeroDraftProbability {
                position: i,
                token: tok,
            });
        }
    }
    for (i, (&tok, q)) in proposal
        .tokens
        .iter()
        .zip(&proposal.draft_dists)
        .enumerate()
    {
        let p = &target_dists[i];
        let u = uniform();
        if u < acceptance_probability(p, q, tok) {
            continue;
        }
        // A rejection implies p(tok) < q(tok), so p ≠ q and the residual exists.
        let residual = residual_distribution(p, q)?;
        return Ok(VerificationResult {
            accepted_len: i,
            emitted_token: residual.sample_at(uniform()),
            decisions: decisions(i, proposal.len()),
        });
    }
    let n = proposal.len();
    Ok(VerificationResult {
        accepted_len: n,
        emitted_token: target_dists[n].sample_at(uniform()),
        decisions: alloc::vec![true; n],
    })
}

pub fn speculative_decode<T, D>(
    target: &T,
    draft: &D,
    prompt: &[TokenId],
    cfg: &SpecConfig,
) -> Result<Decoded>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
{
    speculative_decode_timed(target, draft, prompt, cfg, &NoClock)
}

/// Speculative decoding loop. Stops after EOS or once `max_tokens` tokens
/// have been generated; the final iteration drafts at most the remaining
/// budget. Each verification counts as one target pass.
pub fn speculative_decode_timed<T, D, C>(
    target: &T,
    draft: &D,
    prompt: &[TokenId],
    cfg: &SpecConfig,
    clock: &C,
) -> Result<Decoded>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
    C: Clock + ?Sized,
{
    if cfg.gamma == 0 {
        return Err(Error::InvalidParameter("gamma must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ctx = prompt.to_vec();
    let mut stats = DecodeStats::default();
    let mut timings = PassTimings::default();
    let mut trace = Vec::new();
    let mut finished = false;
    let mut iter = 0u64;
    let start = clock.now();

    while !finished && (stats.output_tokens as usize) < cfg.max_tokens {
        let remaining = cfg.max_tokens - stats.output_tokens as usize;
        let gamma = cfg.gamma.min(remaining);
        let proposal = draft_propose_timed(
            draft,
            &ctx,
            gamma,
            cfg.mode,
            &mut rng,
            clock,
            &mut timings.draft,
        );
        stats.drafted_tokens += proposal.len() as u64;
        stats.draft_passes += proposal.len() as u64;

        let t0 = clock.now();
        let target_dists = target.forward(&ctx, &proposal.tokens);
        timings.target.push(clock.now() - t0);
        stats.target_passes += 1;

        let result = match cfg.mode {
            VerifyMode::Greedy => verify_greedy(&target_dists, &proposal)?,
            VerifyMode::Stochastic => verify_stochastic(&target_dists, &proposal, &mut rng)?,
        };

        let mut accepted = 0;
        for &tok in &proposal.tokens[..result.accepted_len] {
            accepted += 1;
            stats.output_tokens += 1;
            if tok == EOS {
                finished = true;
                break;
            }
            ctx.push(tok);
        }
        stats.accepted_tokens += accepted as u64;
        if !finished && (stats.output_tokens as usize) < cfg.max_tokens {
            stats.output_tokens += 1;
            if result.emitted_token == EOS {
                finished = true;
            } else {
                ctx.push(result.emitted_token);
            }
        }
        if cfg.trace {
            trace.push(TraceRecord {
                iter,
                drafted: proposal.len(),
                accepted,
                emitted: result.emitted_token,
                mode: cfg.mode,
            });
        }
        iter += 1;
    }
    stats.wall_time = clock.now() - start;
    Ok(Decoded {
        tokens: ctx.split_off(prompt.len()),
        stats,
        timings,
        trace,
    })
}
