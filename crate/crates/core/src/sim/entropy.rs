//! Plug-in conditional entropy of a symbol stream.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Contexts seen fewer times than this are merged into one pooled context.
pub const MIN_CONTEXT_COUNT: usize = 30;

/// Entropy estimate together with a batch-means confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub bits: f64,
    pub ci_half_width: f64,
}

/// `Ĥ(S_k | S_{k-1}, ..., S_{k-m})` in bits per symbol.
pub fn empirical_entropy_rate(symbols: &[i64], m: usize) -> Result<f64> {
    Ok(code_lengths(symbols, m)?.iter().sum::<f64>() / (symbols.len() - m) as f64)
}

/// Same estimate plus a 95% half-width from `batches` batch means of the
/// per-sample code length `-log2 p̂(s_k | context_k)`.
pub fn entropy_rate_with_ci(symbols: &[i64], m: usize, batches: usize) -> Result<EntropyEstimate> {
    let lengths = code_lengths(symbols, m)?;
    let bits = lengths.iter().sum::<f64>() / lengths.len() as f64;
    Ok(EntropyEstimate { bits, ci_half_width: batch_means_half_width(&lengths, batches) })
}

/// 95% half-width of the mean of a correlated series by nonoverlapping batch means.
pub fn batch_means_half_width(xs: &[f64], batches: usize) -> f64 {
    let b = batches.max(2);
    let size = xs.len() / b;
    if size == 0 {
        return f64::INFINITY;
    }
    let means: Vec<f64> = xs.chunks_exact(size).take(b).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let mean = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    1.96 * (var / b as f64).sqrt()
}

fn code_lengths(symbols: &[i64], m: usize) -> Result<Vec<f64>> {
    if symbols.len() <= m {
        return Err(Error::EmptyTrace);
    }
    let n = symbols.len() - m;
    let ctx = |k: usize| &symbols[k - m..k];

    let mut ctx_count: HashMap<&[i64], usize> = HashMap::new();
    for k in m..symbols.len() {
        *ctx_count.entry(ctx(k)).or_default() += 1;
    }
    // None stands for the pooled rare context
    let ctx_key = |k: usize| -> Option<&[i64]> {
        let c = ctx(k);
        (ctx_count[c] >= MIN_CONTEXT_COUNT).then_some(c)
    };
    let mut joint: HashMap<(Option<&[i64]>, i64), usize> = HashMap::new();
    let mut marginal: HashMap<Option<&[i64]>, usize> = HashMap::new();
    for k in m..symbols.len() {
        let c = ctx_key(k);
        *joint.entry((c, symbols[k])).or_default() += 1;
        *marginal.entry(c).or_default() += 1;
    }
    let mut out = Vec::with_capacity(n);
    for k in m..symbols.len() {
        let c = ctx_key(k);
        let p = joint[&(c, symbols[k])] as f64 / marginal[&c] as f64;
        out.push(-p.log2());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binary_entropy(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(empirical_entropy_rate(&[], 0), Err(Error::EmptyTrace)));
        assert!(matches!(empirical_entropy_rate(&[1, 2], 2), Err(Error::EmptyTrace)));
    }

    #[test]
    fn constant_stream_is_zero() {
        let s = vec![3i64; 1000];
        for m in 0..3 {
            assert_eq!(empirical_entropy_rate(&s, m).unwrap(), 0.0);
        }
    }

    #[test]
    fn uniform_symbols() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<i64> = (0..1_000_000).map(|_| rng.random_range(0..16)).collect();
        assert!((empirical_entropy_rate(&s, 0).unwrap() - 4.0).abs() < 0.01);
        assert!((empirical_entropy_rate(&s, 1).unwrap() - 4.0).abs() < 0.01);
    }

    #[test]
    fn biased_coin() {
        let oracle = binary_entropy(0.11);
        assert!((oracle - 0.4999).abs() < 1e-4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<i64> = (0..1_000_000).map(|_| i64::from(rng.random::<f64>() < 0.11)).collect();
        let est = entropy_rate_with_ci(&s, 1, 20).unwrap();
        assert!((est.bits - oracle).abs() < 0.01);
        assert!(est.ci_half_width < 0.01);
    }

    #[test]
    fn markov_chain_context_helps() {
        // symmetric binary chain with flip probability 0.1
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = vec![0i64];
        for _ in 0..200_000 {
            let last = *s.last().unwrap();
            s.push(if rng.random::<f64>() < 0.1 { 1 - last } else { last });
        }
        let h0 = empirical_entropy_rate(&s, 0).unwrap();
        let h1 = empirical_entropy_rate(&s, 1).unwrap();
        let h2 = empirical_entropy_rate(&s, 2).unwrap();
        assert!((h0 - 1.0).abs() < 0.02);
        assert!((h1 - binary_entropy(0.1)).abs() < 0.01);
        assert!(h2 <= h1 + 0.02 && h1 <= h0 + 0.02);
    }

    #[test]
    fn rare_contexts_are_pooled() {
        // every context unique: all pooled, equals order-0 entropy of the tail
        let s: Vec<i64> = (0..100).collect();
        let h = empirical_entropy_rate(&s, 1).unwrap();
        assert!((h - (99f64).log2()).abs() < 1e-12);
    }
}
