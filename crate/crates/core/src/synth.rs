//! Synthetic multi-domain corpora and ⟨input, output⟩ collection.
//!
//! Every domain owns a random sparse Markov generator over its own word list;
//! a configurable fraction of each list is drawn from a pool shared by all
//! domains. Each word has a fixed set of `branching` successors with
//! Zipf-shaped weights. For a `context_strength` share of longer contexts the
//! weights are reshuffled among the same successors, which gives a
//! higher-order model something a bigram cannot see. Rows are derived from a
//! hash of (seed, domain, context), so generators need no stored tables.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use libm::pow;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{speculative_decode, DecodeStats, SpecConfig};
use crate::error::{Error, Result};
use crate::hash::{fnv1a64_extend, FNV_OFFSET};
use crate::model::LanguageModel;
use crate::partition::{PromptRecord, StopWords};
use crate::vocab::Vocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub k_domains: usize,
    pub docs_per_domain: usize,
    pub vocab_per_domain: usize,
    pub overlap_fraction: f64,
    pub generator_order: usize,
    pub seed: u64,
    /// Words per document prompt; the rest of the document is its output.
    pub prompt_tokens: usize,
    pub min_doc_tokens: usize,
    pub max_doc_tokens: usize,
    /// Successors with non-zero probability per generator context.
    pub branching: usize,
    /// Successor weights fall off as `rank^(−zipf_exponent)`.
    pub zipf_exponent: f64,
    /// Share of full-length contexts whose successor ranking is reshuffled.
    pub context_strength: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            k_domains: 4,
            docs_per_domain: 1000,
            vocab_per_domain: 150,
            overlap_fraction: 0.1,
            generator_order: 3,
            seed: 7,
            prompt_tokens: 16,
            min_doc_tokens: 48,
            max_doc_tokens: 80,
            branching: 6,
            zipf_exponent: 1.0,
            context_strength: 0.5,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.k_domains == 0 {
            return bad("k_domains must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.overlap_fraction) {
            return bad("overlap_fraction outside [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.context_strength) {
            return bad("context_strength outside [0, 1]");
        }
        if self.generator_order == 0 || self.branching == 0 {
            return bad("generator_order and branching must be >= 1");
        }
        if self.prompt_tokens == 0 || self.min_doc_tokens <= self.prompt_tokens {
            return bad("documents must be longer than their prompts");
        }
        if self.max_doc_tokens < self.min_doc_tokens {
            return bad("max_doc_tokens < min_doc_tokens");
        }
        if self.vocab_per_domain < self.branching.max(self.generator_order + 1) {
            return Err(Error::VocabTooSmall {
                vocab: self.vocab_per_domain,
                order: self.generator_order,
            });
        }
        Ok(())
    }

    fn shared_words(&self) -> usize {
        libm::round(self.overlap_fraction * self.vocab_per_domain as f64) as usize
    }
}

/// Random sparse Markov chain over one domain's words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainGenerator {
    pub domain: usize,
    pub words: Vec<String>,
    pub order: usize,
    pub branching: usize,
    pub zipf_exponent: f64,
    pub context_strength: f64,
    pub seed: u64,
}

const START: u32 = u32::MAX;

impl DomainGenerator {
    fn rng_for(&self, tag: u8, context: &[u32]) -> ChaCha8Rng {
        let mut h = fnv1a64_extend(FNV_OFFSET, &self.seed.to_le_bytes());
        h = fnv1a64_extend(h, &(self.domain as u64).to_le_bytes());
        h = fnv1a64_extend(h, &[tag]);
        for c in context {
            h = fnv1a64_extend(h, &c.to_le_bytes());
        }
        ChaCha8Rng::seed_from_u64(h)
    }

    /// Successor word indices and their probabilities for a context of
    /// word indices (`START` marks positions before the document).
    pub fn transition(&self, context: &[u32]) -> (Vec<usize>, Vec<f64>) {
        let last = context.last().copied().unwrap_or(START);
        let mut succ = sample(
            &mut self.rng_for(0, &[last]),
            self.words.len(),
            self.branching,
        )
        .into_vec();
        if context.len() > 1 {
            let mut rng = self.rng_for(1, context);
            if rng.random::<f64>() < self.context_strength {
                succ.shuffle(&mut rng);
            }
        }
        let weights: Vec<f64> = (1..=self.branching)
            .map(|r| pow(r as f64, -self.zipf_exponent))
            .collect();
        let total: f64 = weights.iter().sum();
        (succ, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn sample_doc<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> Vec<String> {
        let history = self.order - 1;
        let mut ctx: Vec<u32> = alloc::vec![START; history];
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let (succ, probs) = self.transition(&ctx[ctx.len() - history..]);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = succ[succ.len() - 1];
            for (s, p) in succ.iter().zip(&probs) {
                acc += p;
                if u < acc {
                    pick = *s;
                    break;
                }
            }
            out.push(self.words[pick].clone());
            ctx.push(pick as u32);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// Documents interleaved by domain: record `i` belongs to domain `i % k`.
    pub records: Vec<PromptRecord>,
    pub generators: Vec<DomainGenerator>,
}

impl SynthCorpus {
    /// Vocabulary over every generator word, in generator order.
    pub fn vocab(&self) -> Vocab {
        let mut v = Vocab::new();
        for g in &self.generators {
            for w in &g.words {
                v.insert(w);
            }
        }
        v
    }
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kr", "st",
    "tr", "pl",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

fn pseudo_words<R: Rng + ?Sized>(
    n: usize,
    taken: &mut BTreeSet<String>,
    rng: &mut R,
) -> Vec<String> {
    let stop = StopWords::english();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        }
        if !stop.contains(&w) && taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Builds the domain generators and samples `docs_per_domain` labelled
/// documents from each.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken = BTreeSet::new();
    let n_shared = spec.shared_words();
    let shared = pseudo_words(n_shared, &mut taken, &mut rng);
    let generators: Vec<DomainGenerator> = (0..spec.k_domains)
        .map(|d| {
            let mut words = pseudo_words(spec.vocab_per_domain - n_shared, &mut taken, &mut rng);
            words.extend(shared.iter().cloned());
            DomainGenerator {
                domain: d,
                words,
                order: spec.generator_order,
                branching: spec.branching,
                zipf_exponent: spec.zipf_exponent,
                context_strength: spec.context_strength,
                seed: spec.seed,
            }
        })
        .collect();

    let mut records = Vec::with_capacity(spec.k_domains * spec.docs_per_domain);
    for _ in 0..spec.docs_per_domain {
        for g in &generators {
            let len = rng.random_range(spec.min_doc_tokens..=spec.max_doc_tokens);
            let doc = g.sample_doc(len, &mut rng);
            let (prompt, rest) = doc.split_at(spec.prompt_tokens);
            records.push(
                PromptRecord::new(prompt.join(" "))?
                    .with_output(rest.join(" "))
                    .with_label(g.domain),
            );
        }
    }
    Ok(SynthCorpus {
        records,
        generators,
    })
}

/// Runs speculative decoding on every prompt and stores the generated text
/// as the record's output. Prompt `i` uses seed `cfg.seed + i`.
pub fn collect_dataset<T, D>(
    target: &T,
    draft: &D,
    vocab: &Vocab,
    prompts: &[PromptRecord],
    cfg: &SpecConfig,
) -> Result<(Vec<PromptRecord>, DecodeStats)>
where
    T: LanguageModel + ?Sized,
    D: LanguageModel + ?Sized,
{
    let mut total = DecodeStats::default();
    let mut out = Vec::with_capacity(prompts.len());
    for (i, rec) in prompts.iter().enumerate() {
        let run = SpecConfig {
            seed: cfg.seed.wrapping_add(i as u64),
            ..*cfg
        };
        let decoded = speculative_decode(target, draft, &vocab.encode(&rec.input), &run)?;
        total.merge(&decoded.stats);
        let mut r = rec.clone();
        r.output = Some(vocab.decode(&decoded.tokens));
        out.push(r);
    }
    Ok((out, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CorpusSpec {
        CorpusSpec {
            docs_per_domain: 20,
            vocab_per_domain: 20,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn structure_and_labels() {
        let c = gen_corpus(&small()).unwrap();
        assert_eq!(c.records.len(), 80);
        for (i, r) in c.records.iter().enumerate() {
            assert_eq!(r.true_label, Some(i % 4));
            assert_eq!(r.input.split(' ').count(), 16);
        }
        assert_eq!(c.vocab().len(), 3 + 4 * 18 + 2);
    }

    #[test]
    fn zero_overlap_is_disjoint() {
        let spec = CorpusSpec {
            overlap_fraction: 0.0,
            ..small()
        };
        let c = gen_corpus(&spec).unwrap();
        for a in 0..4 {
            for b in (a + 1)..4 {
                let wa: BTreeSet<_> = c.generators[a].words.iter().collect();
                assert!(c.generators[b].words.iter().all(|w| !wa.contains(w)));
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(gen_corpus(&small()).unwrap(), gen_corpus(&small()).unwrap());
    }

    #[test]
    fn vocab_too_small() {
        let spec = CorpusSpec {
            vocab_per_domain: 3,
            ..small()
        };
        assert!(matches!(
            gen_corpus(&spec),
            Err(Error::VocabTooSmall { .. })
        ));
    }

    #[test]
    fn transition_rows_are_distributions() {
        let c = gen_corpus(&small()).unwrap();
        let (succ, p) = c.generators[0].transition(&[1, 2]);
        assert_eq!(succ.len(), 6);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(c.generators[0].transition(&[1, 2]), (succ, p));
    }

    #[test]
    fn longer_contexts_keep_the_successor_set() {
        let c = gen_corpus(&small()).unwrap();
        let g = &c.generators[1];
        let (first, _) = g.transition(&[5]);
        let mut reshuffled = 0;
        for w in 0..20 {
            let (succ, _) = g.transition(&[w, 5]);
            let mut a = succ.clone();
            let mut b = first.clone();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
            reshuffled += usize::from(succ != first);
        }
        assert!(reshuffled > 0 && reshuffled < 20);
    }
}
