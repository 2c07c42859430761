//! Ingest the bundled mini-corpus, report what was dropped and resolve
//! conversation triples.

use std::collections::BTreeSet;
use std::path::Path;

use claimmatch::corpus::{corpus_stats, ingest_tweets, load_articles, resolve_triples, IngestOptions};
use claimmatch::textnorm::NormConfig;

fn main() -> claimmatch::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let ing = ingest_tweets(dir.join("tweets.jsonl"), IngestOptions::default())?;
    let r = &ing.report;
    println!(
        "{} lines, kept {}: malformed {}, empty {}, self-linking {}",
        r.lines, r.kept, r.malformed, r.empty_text, r.self_linking
    );
    let stats = corpus_stats(&ing.tweets, &NormConfig::default());
    println!(
        "words per tweet: mean {:.2}, median {}, max {}; vocabulary {}",
        stats.mean_words, stats.median_words, stats.max_words, stats.vocab_size
    );

    let articles = load_articles(dir.join("articles.jsonl"))?;
    let urls: BTreeSet<String> = articles.iter().map(|a| a.url.clone()).collect();
    let triples = resolve_triples(&ing.tweets, &urls);
    println!("{} articles, {} triples", articles.len(), triples.len());
    if let Some(t) = triples.first() {
        println!("  fact-check tweet: {}", t.fc_tweet.text);
        if let Some(root) = &t.root {
            println!("  conversation root: {}", root.text);
        }
        println!("  article: {}", t.article_url);
    }
    Ok(())
}
