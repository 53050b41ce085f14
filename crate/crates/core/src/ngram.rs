//! Jelinek–Mercer interpolated n-gram language model.
//!
//! `p_m(w | h) = λ·MLE_m(w | h) + (1 − λ)·p_{m−1}(w | h')`, bottoming out at
//! the uniform distribution. A level whose context was never observed passes
//! the lower-order distribution through unchanged.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::LanguageModel;
use crate::prob::ProbVector;
use crate::vocab::{TokenId, Vocab, BOS, EOS};

pub const DEFAULT_LAMBDA: f64 = 0.9;

/// Successor counts observed after one context.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextCounts {
    total: u64,
    next: BTreeMap<TokenId, u64>,
}

impl ContextCounts {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn next(&self) -> &BTreeMap<TokenId, u64> {
        &self.next
    }

    pub fn from_next(next: BTreeMap<TokenId, u64>) -> Self {
        let total = next.values().sum();
        ContextCounts { total, next }
    }

    fn add(&mut self, token: TokenId) {
        self.total += 1;
        *self.next.entry(token).or_insert(0) += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    lambda: f64,
    vocab: Vocab,
    counts: BTreeMap<Vec<TokenId>, ContextCounts>,
}

fn check_params(order: usize, lambda: f64) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidParameter("n-gram order must be >= 1".into()));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "interpolation weight {lambda} outside (0, 1)"
        )));
    }
    Ok(())
}

impl NgramModel {
    /// A model with no observations; every distribution is uniform.
    pub fn empty(vocab: Vocab, order: usize, lambda: f64) -> Result<Self> {
        check_params(order, lambda)?;
        Ok(NgramModel {
            order,
            lambda,
            vocab,
            counts: BTreeMap::new(),
        })
    }

    /// Counts every context of length `0..order` over each sequence, with
    /// `order − 1` BOS tokens prepended and EOS appended.
    pub fn train<S: AsRef<[TokenId]>>(
        vocab: &Vocab,
        corpus: &[S],
        order: usize,
        lambda: f64,
    ) -> Result<Self> {
        check_params(order, lambda)?;
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut model = Self::empty(vocab.clone(), order, lambda)?;
        let mut padded = Vec::new();
        for seq in corpus {
            let seq = seq.as_ref();
            if let Some(&bad) = seq.iter().find(|&&t| t as usize >= vocab.len()) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "token id {bad} outside vocabulary of {}",
                    vocab.len()
                )));
            }
            padded.clear();
            padded.resize(order - 1, BOS);
            padded.extend_from_slice(seq);
            padded.push(EOS);
            for i in (order - 1)..padded.len() {
                let target = padded[i];
                for m in 0..order {
                    let ctx = &padded[i - m..i];
                    match model.counts.get_mut(ctx) {
                        Some(c) => c.add(target),
                        None => {
                            let mut c = ContextCounts::default();
                            c.add(target);
                            model.counts.insert(ctx.to_vec(), c);
                        }
                    }
                }
            }
        }
        Ok(model)
    }

    /// Reassembles a model from its stored parts, validating every count.
    pub fn from_parts(
        order: usize,
        lambda: f64,
        vocab: Vocab,
        counts: BTreeMap<Vec<TokenId>, ContextCounts>,
    ) -> Result<Self> {
        check_params(order, lambda)?;
        for (ctx, c) in &counts {
            if ctx.len() >= order {
                return Err(Error::InvalidParameter(alloc::format!(
                    "context of length {} in an order-{order} model",
                    ctx.len()
                )));
            }
            if c.total == 0 || c.total != c.next.values().sum::<u64>() {
                return Err(Error::InvalidParameter(
                    "stored context with inconsistent total".into(),
                ));
            }
            let oob = ctx
                .iter()
                .chain(c.next.keys())
                .any(|&t| t as usize >= vocab.len());
            if oob {
                return Err(Error::InvalidParameter(
                    "count references a token outside the vocabulary".into(),
                ));
            }
        }
        Ok(NgramModel {
            order,
            lambda,
            vocab,
            counts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn counts(&self) -> &BTreeMap<Vec<TokenId>, ContextCounts> {
        &self.counts
    }

    pub fn context_counts(&self, ctx: &[TokenId]) -> Option<&ContextCounts> {
        self.counts.get(ctx)
    }
}

impl LanguageModel for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn next_distribution(&self, context: &[TokenId]) -> ProbVector {
        let n = self.vocab.len();
        let history = self.order - 1;
        // Left-pad short contexts with BOS, mirroring training.
        let mut ctx: Vec<TokenId> = Vec::with_capacity(history);
        let take = context.len().min(history);
        ctx.resize(history - take, BOS);
        ctx.extend_from_slice(&context[context.len() - take..]);

        let mut probs = alloc::vec![1.0 / n as f64; n];
        for m in 0..self.order {
            let Some(c) = self.counts.get(&ctx[history - m..]) else {
                continue;
            };
            let keep = 1.0 - self.lambda;
            for p in probs.iter_mut() {
                *p *= keep;
            }
            let scale = self.lambda / c.total as f64;
            for (&tok, &cnt) in &c.next {
                probs[tok as usize] += scale * cnt as f64;
            }
        }
        ProbVector::from_raw(probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn abab() -> (Vocab, Vec<Vec<TokenId>>) {
        let vocab = Vocab::from_tokens(["a", "b"]);
        let seq = vocab.encode("a b a b a");
        (vocab, vec![seq])
    }

    /// Direct count over the padded sequence `<s> a b a b a </s>`, done
    /// without touching the model's tables.
    #[test]
    fn bigram_matches_hand_count() {
        let (vocab, corpus) = abab();
        let m = NgramModel::train(&vocab, &corpus, 2, 0.9).unwrap();
        let (a, b) = (3u32, 4u32);
        let padded = [BOS, a, b, a, b, a, EOS];
        let targets = &padded[1..];
        let v = vocab.len() as f64;
        let uni_b = targets.iter().filter(|&&t| t == b).count() as f64 / targets.len() as f64;
        let after_a: Vec<TokenId> = padded
            .windows(2)
            .filter(|w| w[0] == a)
            .map(|w| w[1])
            .collect();
        let bi_b = after_a.iter().filter(|&&t| t == b).count() as f64 / after_a.len() as f64;
        let p1_b = 0.9 * uni_b + 0.1 / v;
        let expected = 0.9 * bi_b + 0.1 * p1_b;
        // 0.9·(2/3) + 0.1·(0.9·(2/6) + 0.1·(1/5)) = 0.632
        assert!((expected - 0.632).abs() < 1e-12);
        let d = m.next_distribution(&[a]);
        assert!((d.prob(b) - expected).abs() < 1e-12);
        assert_eq!(d.greedy_token(), b);
    }

    #[test]
    fn empty_model_is_uniform() {
        let vocab = Vocab::from_tokens(["a", "b", "c"]);
        let m = NgramModel::empty(vocab, 3, 0.9).unwrap();
        let d = m.next_distribution(&[3, 4]);
        assert!(d.as_slice().iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn unigram_single_token() {
        let vocab = Vocab::from_tokens(["x"]);
        let m = NgramModel::train(&vocab, &[vec![3u32]], 1, 0.9).unwrap();
        let d = m.next_distribution(&[]);
        let max = d.as_slice().iter().cloned().fold(0.0, f64::max);
        // x shares the top mass with the appended EOS.
        assert_eq!(d.prob(3), max);
        assert!(d.prob(3) > d.prob(BOS));
    }

    #[test]
    fn unigram_dominant_token() {
        let vocab = Vocab::from_tokens(["x"]);
        let m = NgramModel::train(&vocab, &[vec![3u32, 3]], 1, 0.9).unwrap();
        assert_eq!(m.next_distribution(&[]).greedy_token(), 3);
    }

    #[test]
    fn training_is_deterministic() {
        let (vocab, corpus) = abab();
        let a = NgramModel::train(&vocab, &corpus, 3, 0.7).unwrap();
        let b = NgramModel::train(&vocab, &corpus, 3, 0.7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        let (vocab, corpus) = abab();
        let empty: Vec<Vec<TokenId>> = Vec::new();
        assert_eq!(
            NgramModel::train(&vocab, &empty, 2, 0.9),
            Err(Error::EmptyCorpus)
        );
        assert!(NgramModel::train(&vocab, &corpus, 0, 0.9).is_err());
        assert!(NgramModel::train(&vocab, &corpus, 2, 1.0).is_err());
        assert!(NgramModel::train(&vocab, &corpus, 2, 0.0).is_err());
        assert!(NgramModel::train(&vocab, &[vec![99u32]], 2, 0.5).is_err());
    }

    #[test]
    fn unseen_token_mass_follows_seen_levels() {
        // Token c never occurs; its mass is (1−λ)^(levels with a seen context)/|V|.
        let vocab = Vocab::from_tokens(["a", "b", "c"]);
        let seq = vocab.encode("a b a b");
        let m = NgramModel::train(&vocab, &[seq], 3, 0.8).unwrap();
        let v = vocab.len() as f64;
        let c = 5u32;
        // Context [a, b] seen at all three levels.
        assert!((m.next_distribution(&[3, 4]).prob(c) - 0.2f64.powi(3) / v).abs() < 1e-15);
        // Context [b, b] unseen at level 2; [b] and [] seen.
        assert!((m.next_distribution(&[4, 4]).prob(c) - 0.2f64.powi(2) / v).abs() < 1e-15);
    }

    #[test]
    fn from_parts_round_trip() {
        let (vocab, corpus) = abab();
        let m = NgramModel::train(&vocab, &corpus, 2, 0.9).unwrap();
        let rebuilt =
            NgramModel::from_parts(2, 0.9, m.vocab().clone(), m.counts().clone()).unwrap();
        assert_eq!(rebuilt, m);
        let mut bad = m.counts().clone();
        bad.insert(
            vec![3, 3, 3],
            ContextCounts::from_next(BTreeMap::from([(3, 1)])),
        );
        assert!(NgramModel::from_parts(2, 0.9, vocab, bad).is_err());
    }
}
