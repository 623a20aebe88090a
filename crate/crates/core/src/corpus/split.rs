use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusError};

/// Random utterance-level partition into (train, validation, test).
///
/// Validation and test sizes are `round(n * ratio)`; whatever remains goes to
/// train. Each part keeps the original utterance order.
pub fn split_corpus(corpus: &Corpus, ratios: (f64, f64, f64), seed: u64) -> Result<(Corpus, Corpus, Corpus), CorpusError> {
    let (train, val, test) = ratios;
    if [train, val, test].iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(CorpusError::InvalidRatios("ratios must be finite and non-negative".into()));
    }
    if ((train + val + test) - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidRatios(format!(
            "ratios sum to {}, expected 1",
            train + val + test
        )));
    }
    let n = corpus.utterances.len();
    if n < 3 {
        return Err(CorpusError::TooFewUtterances(n));
    }
    let n_val = (n as f64 * val).round() as usize;
    let n_test = (n as f64 * test).round() as usize;
    if n_val + n_test > n {
        return Err(CorpusError::InvalidRatios("rounded shares exceed the corpus size".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val_idx = order[..n_val].to_vec();
    let mut test_idx = order[n_val..n_val + n_test].to_vec();
    let mut train_idx = order[n_val + n_test..].to_vec();
    let pick = |idx: &mut Vec<usize>| {
        idx.sort_unstable();
        corpus.with_utterances(idx.iter().map(|&i| corpus.utterances[i].clone()).collect())
    };
    Ok((pick(&mut train_idx), pick(&mut val_idx), pick(&mut test_idx)))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::corpus::{generate_synthetic, SynthConfig};

    fn corpus(n: usize) -> Corpus {
        generate_synthetic(&SynthConfig {
            n_utterances: n,
            syllables_per_utterance: (2, 3),
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn ids(c: &Corpus) -> BTreeSet<String> {
        c.utterances.iter().map(|u| u.id.clone()).collect()
    }

    #[test]
    fn paper_sizes() {
        let c = corpus(4500);
        let (tr, va, te) = split_corpus(&c, (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((tr.utterances.len(), va.utterances.len(), te.utterances.len()), (3600, 450, 450));
    }

    #[test]
    fn remainder_goes_to_train() {
        let c = corpus(11);
        let (tr, va, te) = split_corpus(&c, (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((tr.utterances.len(), va.utterances.len(), te.utterances.len()), (9, 1, 1));
    }

    #[test]
    fn degenerate_ratio_and_partition() {
        let c = corpus(20);
        let (tr, va, te) = split_corpus(&c, (1.0, 0.0, 0.0), 5).unwrap();
        assert_eq!(tr, c);
        assert!(va.utterances.is_empty() && te.utterances.is_empty());

        let (tr, va, te) = split_corpus(&c, (0.5, 0.25, 0.25), 5).unwrap();
        let (a, b, d) = (ids(&tr), ids(&va), ids(&te));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&d) && b.is_disjoint(&d));
        let union: BTreeSet<_> = a.union(&b).chain(d.iter()).cloned().collect();
        assert_eq!(union, ids(&c));
        assert_eq!(split_corpus(&c, (0.5, 0.25, 0.25), 5).unwrap(), (tr, va, te));
    }

    #[test]
    fn errors() {
        let c = corpus(2);
        assert!(matches!(split_corpus(&c, (0.8, 0.1, 0.1), 0), Err(CorpusError::TooFewUtterances(2))));
        let c = corpus(10);
        assert!(matches!(split_corpus(&c, (0.8, 0.1, 0.2), 0), Err(CorpusError::InvalidRatios(_))));
        assert!(matches!(split_corpus(&c, (1.2, -0.1, -0.1), 0), Err(CorpusError::InvalidRatios(_))));
    }
}
