use alloc::vec::Vec;
use core::ops::Index;

use rand::Rng;

use crate::error::{Error, Result};
use crate::vocab::TokenId;

/// Tolerance on the total mass of a distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A probability distribution over token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Wraps `probs` after checking non-negativity and unit mass.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(
                "distribution has a negative or non-finite entry".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidParameter(alloc::format!(
                "distribution sums to {sum}"
            )));
        }
        Ok(ProbVector(probs))
    }

    /// Scales non-negative weights to unit mass.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if sum.is_nan() || sum <= 0.0 || !sum.is_finite() {
            return Err(Error::ZeroDenominator("distribution weights sum to zero"));
        }
        for w in &mut weights {
            *w /= sum;
        }
        Self::new(weights)
    }

    pub fn uniform(n: usize) -> Self {
        ProbVector(alloc::vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, k: TokenId) -> Self {
        let mut v = alloc::vec![0.0; n];
        v[k as usize] = 1.0;
        ProbVector(v)
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        ProbVector(probs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn prob(&self, token: TokenId) -> f64 {
        self.0.get(token as usize).copied().unwrap_or(0.0)
    }

    /// Argmax with ties broken toward the lowest id.
    pub fn greedy_token(&self) -> TokenId {
        greedy_token(&self.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TokenId {
        self.sample_at(rng.random())
    }

    /// Inverse-CDF lookup for a uniform draw `u` in `[0, 1)`. Falls back to
    /// the last positive entry when rounding leaves `u` past the total mass.
    pub fn sample_at(&self, u: f64) -> TokenId {
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return i as TokenId;
                }
            }
        }
        last as TokenId
    }

    /// Convex combination `(1 - w) * self + w * other`.
    pub fn mix(&self, other: &ProbVector, w: f64) -> ProbVector {
        debug_assert_eq!(self.len(), other.len());
        ProbVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect(),
        )
    }

    /// Total variation distance.
    pub fn tv_distance(&self, other: &ProbVector) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

impl Index<usize> for ProbVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn greedy_token(dist: &[f64]) -> TokenId {
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate().skip(1) {
        if p > dist[best] {
            best = i;
        }
    }
    best as TokenId
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_token(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(greedy_token(&[0.5, 0.5]), 0);
        assert_eq!(ProbVector::one_hot(7, 4).greedy_token(), 4);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
        assert!(ProbVector::normalized(vec![0.0, 0.0]).is_err());
        assert_eq!(
            ProbVector::normalized(vec![1.0, 3.0]).unwrap().as_slice(),
            &[0.25, 0.75]
        );
    }

    #[test]
    fn sample_never_hits_zero_mass() {
        let p = ProbVector::new(vec![0.0, 0.3, 0.0, 0.7, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let t = p.sample(&mut rng);
            assert!(t == 1 || t == 3);
        }
    }

    #[test]
    fn mix_endpoints() {
        let a = ProbVector::new(vec![0.2, 0.8]).unwrap();
        let b = ProbVector::new(vec![0.8, 0.2]).unwrap();
        assert_eq!(a.mix(&b, 0.0), a);
        assert_eq!(a.mix(&b, 1.0), b);
        assert!((a.tv_distance(&b) - 0.6).abs() < 1e-12);
    }
}
