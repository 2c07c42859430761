//! Seeded synthetic data for experiments and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Qrels;
use crate::rerank::{FeatureLayout, FeatureRow, FeatureSet};
use crate::textnorm::TokenList;

/// Tweet–article pairs where a fraction of the articles were swapped
/// between pairs.
#[derive(Debug, Clone)]
pub struct NoisyPairs {
    pub tweets: Vec<TokenList>,
    pub articles: Vec<TokenList>,
    /// Whether pair `i` still has its own article.
    pub clean: Vec<bool>,
}

impl NoisyPairs {
    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }
}

const FILLER: &[&str] = &[
    "said", "today", "people", "share", "look", "real", "post", "read", "news", "viral",
];

/// `topics × per_topic` pairs. Each topic owns a small vocabulary; a tweet
/// and its article share topic words plus one pair-specific entity token
/// that occurs nowhere else. A `noise` fraction of the pairs then have
/// their articles permuted among themselves.
pub fn noisy_pairs(topics: usize, per_topic: usize, noise: f64, seed: u64) -> NoisyPairs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tweets = Vec::new();
    let mut articles = Vec::new();
    for t in 0..topics {
        let vocab: Vec<String> = (0..6).map(|w| format!("t{t}w{w}")).collect();
        for p in 0..per_topic {
            let entity = format!("e{t}x{p}");
            let mut tw: Vec<String> = vocab.choose_multiple(&mut rng, 2).cloned().collect();
            tw.push(entity.clone());
            tw.push(FILLER.choose(&mut rng).expect("filler").to_string());
            let mut ar: Vec<String> = vocab.choose_multiple(&mut rng, 3).cloned().collect();
            ar.push(entity);
            ar.push(FILLER.choose(&mut rng).expect("filler").to_string());
            tw.shuffle(&mut rng);
            ar.shuffle(&mut rng);
            tweets.push(TokenList(tw));
            articles.push(TokenList(ar));
        }
    }
    let n = tweets.len();
    let n_noisy = (noise * n as f64).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let noisy = &idx[..n_noisy];
    // rotate so that no corrupted pair keeps its own article
    let mut perm = noisy.to_vec();
    if perm.len() > 1 {
        let shift = rng.gen_range(1..perm.len());
        perm.rotate_left(shift);
    }
    let original = articles.clone();
    let mut clean = vec![true; n];
    for (&dst, &src) in noisy.iter().zip(&perm) {
        articles[dst] = original[src].clone();
        clean[dst] = false;
    }
    NoisyPairs {
        tweets,
        articles,
        clean,
    }
}

/// Learning-to-rank benchmark over the 4-column single-model layout.
///
/// Feature 0 is uniform on [0, 1] and decides relevance (`f0 > 0.5`); the
/// other three are uniform noise. Candidates arrive in random original
/// order. Query ids are `{prefix}{i}`.
pub fn separable_ltr(prefix: &str, queries: usize, candidates: usize, seed: u64) -> (FeatureSet, Qrels) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = FeatureLayout::single();
    let mut rows = Vec::new();
    let mut qrels = Qrels::new();
    for q in 0..queries {
        let qid = format!("{prefix}{q}");
        let mut ranks: Vec<usize> = (1..=candidates).collect();
        ranks.shuffle(&mut rng);
        for (c, rank) in ranks.into_iter().enumerate() {
            let values: Vec<f64> = (0..layout.len()).map(|_| rng.gen::<f64>()).collect();
            let doc = format!("{qid}-d{c}");
            qrels.insert(qid.clone(), doc.clone(), u8::from(values[0] > 0.5));
            rows.push(FeatureRow {
                query_id: qid.clone(),
                doc_id: doc,
                orig_rank: rank,
                values,
            });
        }
    }
    rows.sort_by(|a, b| a.query_id.cmp(&b.query_id).then(a.orig_rank.cmp(&b.orig_rank)));
    (FeatureSet { layout, rows }, qrels)
}
