use alloc::vec::Vec;

use crate::prob::ProbVector;
use crate::vocab::TokenId;

/// Anything that yields a next-token distribution: target, base draft or an
/// adapted draft. Implementations must be immutable at query time.
pub trait LanguageModel {
    fn vocab_size(&self) -> usize;

    /// Distribution over the next token given the full context.
    fn next_distribution(&self, context: &[TokenId]) -> ProbVector;

    /// One forward pass over `continuation`: returns the distribution after
    /// `context ++ continuation[..i]` for every `i` in `0..=continuation.len()`.
    ///
    /// Engines bill a call to this as a single pass regardless of length.
    fn forward(&self, context: &[TokenId], continuation: &[TokenId]) -> Vec<ProbVector> {
        let mut ctx = Vec::with_capacity(context.len() + continuation.len());
        ctx.extend_from_slice(context);
        let mut out = Vec::with_capacity(continuation.len() + 1);
        out.push(self.next_distribution(&ctx));
        for &t in continuation {
            ctx.push(t);
            out.push(self.next_distribution(&ctx));
        }
        out
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> ProbVector {
        (**self).next_distribution(context)
    }

    fn forward(&self, context: &[TokenId], continuation: &[TokenId]) -> Vec<ProbVector> {
        (**self).forward(context, continuation)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for alloc::sync::Arc<M> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> ProbVector {
        (**self).next_distribution(context)
    }

    fn forward(&self, context: &[TokenId], continuation: &[TokenId]) -> Vec<ProbVector> {
        (**self).forward(context, continuation)
    }
}
