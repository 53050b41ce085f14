//! Analytic speedup model for speculative decoding and a Monte Carlo
//! simulator that checks it.
//!
//! With per-position acceptance probability α, γ drafted tokens per
//! iteration and a draft/target step-cost ratio c, the expected speedup over
//! target-only decoding is
//!
//! ```text
//! (1 − α^(γ+1)) / ((1 − α)(γc + 1))
//! ```

use libm::pow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::DecodeStats;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupParams {
    pub alpha: f64,
    pub c: f64,
    pub gamma: u32,
}

impl SpeedupParams {
    pub fn new(alpha: f64, c: f64, gamma: u32) -> Result<Self> {
        let p = SpeedupParams { alpha, c, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha == 1.0 {
            return Err(Error::SingularAlpha);
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidParameter(alloc::format!(
                "alpha {} outside [0, 1)",
                self.alpha
            )));
        }
        if self.c.is_nan() || self.c <= 0.0 || !self.c.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "cost ratio {} must be positive",
                self.c
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub simulated_speedup: f64,
    pub mean_tokens_per_iteration: f64,
    pub iterations: u64,
    pub seed: u64,
}

/// Expected tokens produced per iteration, `(1 − α^(γ+1)) / (1 − α)`.
pub fn expected_tokens_per_iteration(alpha: f64, gamma: u32) -> Result<f64> {
    if alpha == 1.0 {
        return Err(Error::SingularAlpha);
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(alloc::format!(
            "alpha {alpha} outside [0, 1)"
        )));
    }
    Ok((1.0 - pow(alpha, f64::from(gamma) + 1.0)) / (1.0 - alpha))
}

pub fn theoretical_speedup(p: &SpeedupParams) -> Result<f64> {
    p.validate()?;
    let tokens = expected_tokens_per_iteration(p.alpha, p.gamma)?;
    Ok(tokens / (f64::from(p.gamma) * p.c + 1.0))
}

/// Argmax of the closed-form speedup over `γ ∈ [0, gamma_max]`; the smallest
/// γ wins ties.
pub fn optimal_gamma(alpha: f64, c: f64, gamma_max: u32) -> Result<u32> {
    let mut best = (0, f64::NEG_INFINITY);
    for gamma in 0..=gamma_max {
        let s = theoretical_speedup(&SpeedupParams::new(alpha, c, gamma)?)?;
        if s > best.1 {
            best = (gamma, s);
        }
    }
    Ok(best.0)
}

/// Stopping rule for the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimBudget {
    /// Run until at least this many tokens have been produced.
    Tokens(u64),
    Iterations(u64),
}

/// Simulates i.i.d. Bernoulli(α) acceptances until `n_tokens` tokens exist.
pub fn simulate_speculative(p: &SpeedupParams, n_tokens: u64, seed: u64) -> Result<SimResult> {
    if n_tokens == 0 {
        return Err(Error::InvalidParameter("n_tokens must be >= 1".into()));
    }
    simulate(p, SimBudget::Tokens(n_tokens), 1.0, seed)
}

/// Monte Carlo run of the draft/verify loop. Position `i` (0-based) of each
/// draft is accepted with probability `α·decay^i`; `decay = 1` is the i.i.d.
/// assumption behind the closed form. Each iteration costs `γc + 1` time
/// units and yields its accepted run plus one target token; target-only
/// decoding costs one unit per token.
pub fn simulate(p: &SpeedupParams, budget: SimBudget, decay: f64, seed: u64) -> Result<SimResult> {
    p.validate()?;
    if !(0.0..=1.0).contains(&decay) {
        return Err(Error::InvalidParameter(alloc::format!(
            "decay {decay} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let iter_cost = f64::from(p.gamma) * p.c + 1.0;
    let (mut tokens, mut iterations) = (0u64, 0u64);
    let done = |tokens: u64, iterations: u64| match budget {
        SimBudget::Tokens(n) => tokens >= n,
        SimBudget::Iterations(n) => iterations >= n,
    };
    while !done(tokens, iterations) {
        let mut accept_p = p.alpha;
        let mut run = 0u64;
        for _ in 0..p.gamma {
            if rng.random::<f64>() < accept_p {
                run += 1;
                accept_p *= decay;
            } else {
                break;
            }
        }
        tokens += run + 1;
        iterations += 1;
    }
    let spec_time = iterations as f64 * iter_cost;
    Ok(SimResult {
        simulated_speedup: tokens as f64 / spec_time,
        mean_tokens_per_iteration: tokens as f64 / iterations.max(1) as f64,
        iterations,
        seed,
    })
}

/// Parameters inferred from a measured run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub alpha: f64,
    pub c: f64,
    pub gamma: u32,
    /// False when α = 1, where the closed form is singular.
    pub in_domain: bool,
}

impl ParamEstimate {
    pub fn params(&self) -> Result<SpeedupParams> {
        SpeedupParams::new(self.alpha, self.c, self.gamma)
    }
}

/// α from the acceptance rate, c from mean per-pass wall times.
pub fn estimate_params(
    stats: &DecodeStats,
    draft_times: &[f64],
    target_times: &[f64],
    gamma: u32,
) -> Result<ParamEstimate> {
    let alpha = stats.acceptance_rate()?;
    if draft_times.is_empty() || target_times.is_empty() {
        return Err(Error::EmptyTimings);
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let target = mean(target_times);
    if target.is_nan() || target <= 0.0 {
        return Err(Error::ZeroDenominator("target pass time is zero"));
    }
    Ok(ParamEstimate {
        alpha,
        c: mean(draft_times) / target,
        gamma,
        in_domain: alpha < 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(alpha: f64, c: f64, gamma: u32) -> f64 {
        theoretical_speedup(&SpeedupParams::new(alpha, c, gamma).unwrap()).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        for alpha in [0.0, 0.3, 0.99] {
            assert!((sp(alpha, 0.7, 0) - 1.0).abs() < 1e-15);
        }
        // (1 − 0.8^6) / (0.2 · 1.25)
        assert!((sp(0.8, 0.05, 5) - 2.951424).abs() < 1e-12);
        // (1 − 0.9^11) / (0.1 · 1.5)
        let hand = (1.0 - 0.31381059609) / 0.15;
        assert!((sp(0.9, 0.05, 10) - hand).abs() < 1e-9);
        assert!((hand - 4.5746).abs() < 1e-4);
    }

    #[test]
    fn expected_tokens_examples() {
        assert_eq!(expected_tokens_per_iteration(0.0, 7).unwrap(), 1.0);
        // Outcomes: reject (1 token, p = 0.5) or accept (2 tokens, p = 0.5).
        let enumerated = 0.5 * 1.0 + 0.5 * 2.0;
        assert!((expected_tokens_per_iteration(0.5, 1).unwrap() - enumerated).abs() < 1e-15);
        let near_one = expected_tokens_per_iteration(1.0 - 1e-9, 6).unwrap();
        assert!((near_one - 7.0).abs() < 1e-6);
        assert_eq!(
            expected_tokens_per_iteration(1.0, 3),
            Err(Error::SingularAlpha)
        );
    }

    #[test]
    fn singular_and_invalid_params() {
        assert_eq!(SpeedupParams::new(1.0, 0.1, 3), Err(Error::SingularAlpha));
        assert!(SpeedupParams::new(0.5, 0.0, 3).is_err());
        assert!(SpeedupParams::new(-0.1, 0.1, 3).is_err());
    }

    #[test]
    fn simulator_converges() {
        let p = SpeedupParams::new(0.8, 0.05, 5).unwrap();
        let r = simulate_speculative(&p, 100_000, 7).unwrap();
        assert!((r.simulated_speedup / 2.951424 - 1.0).abs() < 0.02);
        assert!(r.mean_tokens_per_iteration >= 1.0 && r.mean_tokens_per_iteration <= 6.0);
        assert_eq!(r, simulate_speculative(&p, 100_000, 7).unwrap());
    }

    #[test]
    fn simulator_zero_alpha() {
        let p = SpeedupParams::new(0.0, 0.05, 5).unwrap();
        let r = simulate_speculative(&p, 10_000, 1).unwrap();
        assert!((r.simulated_speedup - 0.8).abs() < 1e-12);
    }

    #[test]
    fn decay_lowers_throughput() {
        let p = SpeedupParams::new(0.9, 0.05, 8).unwrap();
        let flat = simulate(&p, SimBudget::Iterations(50_000), 1.0, 3).unwrap();
        let decayed = simulate(&p, SimBudget::Iterations(50_000), 0.8, 3).unwrap();
        assert!(decayed.mean_tokens_per_iteration < flat.mean_tokens_per_iteration);
    }

    /// Grid oracle: evaluate the closed form by hand at every γ.
    #[test]
    fn optimal_gamma_grid() {
        let mut best = (0u32, f64::NEG_INFINITY);
        for g in 0..=20u32 {
            let a: f64 = 0.8;
            let s = (1.0 - a.powi(g as i32 + 1)) / ((1.0 - a) * (g as f64 * 0.05 + 1.0));
            if s > best.1 {
                best = (g, s);
            }
        }
        assert_eq!(optimal_gamma(0.8, 0.05, 20).unwrap(), best.0);
        assert_eq!(optimal_gamma(0.8, 1e-9, 12).unwrap(), 12);
        assert_eq!(optimal_gamma(0.0, 0.05, 12).unwrap(), 0);
    }

    #[test]
    fn strictly_increasing_in_alpha() {
        for gamma in 1..=10 {
            for c in [0.05, 0.1, 0.5] {
                let mut prev = sp(0.0, c, gamma);
                for i in 1..100 {
                    let s = sp(i as f64 / 100.0, c, gamma);
                    assert!(s > prev);
                    prev = s;
                }
            }
        }
    }

    #[test]
    fn estimate_from_run() {
        let stats = DecodeStats {
            drafted_tokens: 100,
            accepted_tokens: 60,
            target_passes: 25,
            ..Default::default()
        };
        let e = estimate_params(&stats, &[0.001; 4], &[0.020; 3], 4).unwrap();
        assert!((e.alpha - 0.6).abs() < 1e-15);
        assert!((e.c - 0.05).abs() < 1e-12);
        assert!(e.in_domain);

        let all = DecodeStats {
            accepted_tokens: 100,
            ..stats
        };
        let e = estimate_params(&all, &[0.001], &[0.02], 4).unwrap();
        assert!(!e.in_domain);
        assert_eq!(e.params(), Err(Error::SingularAlpha));

        assert_eq!(
            estimate_params(&stats, &[], &[0.02], 4),
            Err(Error::EmptyTimings)
        );
        assert!(estimate_params(&stats, &[0.001], &[0.0], 4).is_err());
    }
}
