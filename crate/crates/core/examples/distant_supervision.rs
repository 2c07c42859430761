//! Label crowd conversations by Jaccard overlap with the linked article,
//! show how the split shrinks with the threshold, then estimate the share
//! of true matches from annotated bin tables.

use std::collections::BTreeSet;
use std::path::Path;

use claimmatch::corpus::{ingest_tweets, load_articles, resolve_triples, IngestOptions};
use claimmatch::distsup::{
    bin_statistics, build_split, label_triples, reference, BinEdges, PairScorer, ScoredPair, Strategy,
    TargetChoice,
};
use claimmatch::textnorm::NormConfig;

fn main() -> claimmatch::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let cfg = NormConfig::default();
    let tweets = ingest_tweets(dir.join("tweets.jsonl"), IngestOptions::default())?.tweets;
    let articles = load_articles(dir.join("articles.jsonl"))?;
    let urls: BTreeSet<String> = articles.iter().map(|a| a.url.clone()).collect();
    let triples = resolve_triples(&tweets, &urls);

    let scored = label_triples(&triples, &articles, &PairScorer::Jaccard, TargetChoice::Best, &cfg)?;
    for th in [0.0, 0.1, 0.2, 0.3, 0.4] {
        let n = build_split(&scored, Strategy::Jaccard, th).map_or(0, |s| s.len());
        println!("threshold {th:.1}: {n:>3} of {} pairs", scored.len());
    }

    let points: Vec<ScoredPair> = scored.iter().map(|p| ScoredPair { score: p.score, correct: None }).collect();
    let table = bin_statistics(&points, &BinEdges::jaccard())?;
    print!("{}", table.to_tsv());

    for (name, t) in [
        ("jaccard, reply target", reference::jaccard_reply()),
        ("jaccard, conversation", reference::jaccard_conversation()),
        ("cosine", reference::cosine()),
    ] {
        let e = t.estimate_matches(reference::TOTAL_PAIRS);
        println!("{name:<22} {:>7.3}% -> {:>6} matching pairs", e.fraction_pct, e.count);
    }
    Ok(())
}
