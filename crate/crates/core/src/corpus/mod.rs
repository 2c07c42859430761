//! Tweets, fact-checking articles, conversation triples and corpus statistics.

mod html;
pub mod trec;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::{normalize, NormConfig};

pub use html::{load_article_dir, parse_article_html};
pub use trec::{load_queries, parse_predictions, parse_queries, read_predictions, write_predictions, Qrels};

/// A social post carrying a candidate claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub in_reply_to: Option<String>,
    #[serde(default)]
    pub conversation_root: Option<String>,
    #[serde(default)]
    pub urls: Vec<String>,
}

impl Tweet {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Tweet {
            id: id.into(),
            text: text.into(),
            in_reply_to: None,
            conversation_root: None,
            urls: Vec::new(),
        }
    }

    fn links_to_itself(&self) -> bool {
        let needle = format!("/status/{}", self.id);
        self.urls.iter().any(|u| {
            u.split(['?', '#'])
                .next()
                .is_some_and(|base| base.trim_end_matches('/').ends_with(&needle))
        })
    }
}

/// Metadata of one verifying article. Body text and verdict are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactCheckArticle {
    pub url: String,
    pub title: String,
    #[serde(default)]
    pub subtitle: String,
    #[serde(default)]
    pub claim: String,
    #[serde(default)]
    pub date: Option<String>,
    #[serde(default)]
    pub author: Option<String>,
}

/// The fact-checking tweet together with the conversation root and the
/// tweet it replies to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTriple {
    pub fc_tweet: Tweet,
    pub root: Option<Tweet>,
    pub reply: Option<Tweet>,
    pub article_url: String,
}

/// Canonical article key: lowercased scheme and host, no query string or
/// fragment, no trailing slash.
pub fn canonical_url(url: &str) -> String {
    let url = url.trim();
    let url = url.split('#').next().unwrap_or_default();
    let url = url.split('?').next().unwrap_or_default();
    let (scheme, rest) = match url.find("://") {
        Some(i) => (url[..i].to_ascii_lowercase() + "://", &url[i + 3..]),
        None => (String::new(), url),
    };
    let (host, path) = match rest.find('/') {
        Some(i) => (&rest[..i], &rest[i..]),
        None => (rest, ""),
    };
    let mut out = scheme + &host.to_ascii_lowercase() + path;
    while out.ends_with('/') {
        out.pop();
    }
    out
}

#[derive(Debug, Clone, Copy)]
#[derive(Default)]
pub struct IngestOptions {
    /// Drop tweets with no resolved URL.
    pub require_links: bool,
}


/// Counts of lines dropped during ingestion.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines: usize,
    pub kept: usize,
    pub malformed: usize,
    pub empty_text: usize,
    pub self_linking: usize,
    pub no_links: usize,
    pub duplicate_ids: usize,
}

impl IngestReport {
    pub fn skipped(&self) -> usize {
        self.lines - self.kept
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub tweets: Vec<Tweet>,
    pub report: IngestReport,
}

/// Parse tweets from JSONL text. Order is preserved.
pub fn parse_tweets(text: &str, opts: IngestOptions) -> Result<Ingested> {
    let mut report = IngestReport::default();
    let mut tweets = Vec::new();
    let mut seen = HashSet::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        report.lines += 1;
        let tweet: Tweet = match serde_json::from_str(line) {
            Ok(t) => t,
            Err(_) => {
                report.malformed += 1;
                continue;
            }
        };
        if tweet.id.is_empty() {
            report.malformed += 1;
        } else if tweet.text.trim().is_empty() {
            report.empty_text += 1;
        } else if tweet.links_to_itself() {
            report.self_linking += 1;
        } else if opts.require_links && tweet.urls.is_empty() {
            report.no_links += 1;
        } else if !seen.insert(tweet.id.clone()) {
            report.duplicate_ids += 1;
        } else {
            tweets.push(tweet);
        }
    }
    if report.malformed * 2 > report.lines {
        return Err(Error::Format(format!(
            "{} of {} lines are malformed",
            report.malformed, report.lines
        )));
    }
    report.kept = tweets.len();
    Ok(Ingested { tweets, report })
}

pub fn ingest_tweets(path: impl AsRef<Path>, opts: IngestOptions) -> Result<Ingested> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tweets(&text, opts)
}

/// Read articles from JSONL. URLs are canonicalized; later duplicates are dropped.
pub fn load_articles_jsonl(path: impl AsRef<Path>) -> Result<Vec<FactCheckArticle>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut article: FactCheckArticle = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), no + 1)))?;
        if article.title.trim().is_empty() {
            return Err(Error::Format(format!(
                "{}:{}: article without title",
                path.display(),
                no + 1
            )));
        }
        article.url = canonical_url(&article.url);
        if seen.insert(article.url.clone()) {
            out.push(article);
        }
    }
    Ok(out)
}

/// Load articles from a JSONL file or a directory of HTML snapshots.
pub fn load_articles(path: impl AsRef<Path>) -> Result<Vec<FactCheckArticle>> {
    let path = path.as_ref();
    if path.is_dir() {
        load_article_dir(path)
    } else {
        load_articles_jsonl(path)
    }
}

/// Emit one triple per (fact-checking tweet, matching article URL).
pub fn resolve_triples(tweets: &[Tweet], article_urls: &BTreeSet<String>) -> Vec<ConversationTriple> {
    let canonical: BTreeSet<String> = article_urls.iter().map(|u| canonical_url(u)).collect();
    let by_id: HashMap<&str, &Tweet> = tweets.iter().map(|t| (t.id.as_str(), t)).collect();
    let lookup = |id: &Option<String>, own: &str| -> Option<Tweet> {
        id.as_deref()
            .filter(|id| *id != own)
            .and_then(|id| by_id.get(id))
            .map(|t| (*t).clone())
    };

    let mut out = Vec::new();
    for tweet in tweets {
        let mut matched = BTreeSet::new();
        for url in &tweet.urls {
            let c = canonical_url(url);
            if canonical.contains(&c) {
                matched.insert(c);
            }
        }
        if matched.is_empty() {
            continue;
        }
        let root = lookup(&tweet.conversation_root, &tweet.id);
        let reply = lookup(&tweet.in_reply_to, &tweet.id);
        for article_url in matched {
            out.push(ConversationTriple {
                fc_tweet: tweet.clone(),
                root: root.clone(),
                reply: reply.clone(),
                article_url,
            });
        }
    }
    out
}

/// Length and vocabulary statistics over normalized tweets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub unique_tweets: usize,
    pub mean_words: f64,
    pub median_words: f64,
    pub max_words: usize,
    pub vocab_size: usize,
}

/// Median with the even-length convention: mean of the two middle values.
pub fn median(values: &mut [usize]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

pub fn corpus_stats(tweets: &[Tweet], cfg: &NormConfig) -> CorpusStats {
    let mut unique: BTreeMap<&str, &Tweet> = BTreeMap::new();
    for t in tweets {
        unique.entry(t.id.as_str()).or_insert(t);
    }
    if unique.is_empty() {
        return CorpusStats::default();
    }
    let mut vocab = BTreeSet::new();
    let mut lengths = Vec::with_capacity(unique.len());
    for t in unique.values() {
        let tokens = normalize(&t.text, cfg);
        lengths.push(tokens.len());
        vocab.extend(tokens.0);
    }
    let total: usize = lengths.iter().sum();
    let max_words = lengths.iter().copied().max().unwrap_or(0);
    CorpusStats {
        unique_tweets: unique.len(),
        mean_words: total as f64 / lengths.len() as f64,
        median_words: median(&mut lengths),
        max_words,
        vocab_size: vocab.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, text: &str) -> String {
        serde_json::json!({"id": id, "text": text, "urls": ["https://www.snopes.com/fact-check/x/"]}).to_string()
    }

    #[test]
    fn three_line_file() {
        let text = [line("1", "a"), line("2", "b"), line("3", "c")].join("\n");
        let got = parse_tweets(&text, IngestOptions::default()).unwrap();
        assert_eq!(got.tweets.len(), 3);
        assert_eq!(got.tweets[2].id, "3");
    }

    #[test]
    fn empty_text_skipped() {
        let text = [line("1", "a"), line("2", "  ")].join("\n");
        let got = parse_tweets(&text, IngestOptions::default()).unwrap();
        assert_eq!(got.tweets.len(), 1);
        assert_eq!(got.report.skipped(), 1);
        assert_eq!(got.report.empty_text, 1);
    }

    #[test]
    fn majority_malformed_is_format_error() {
        let mut lines: Vec<String> = (0..4).map(|i| line(&i.to_string(), "ok")).collect();
        lines.extend((0..6).map(|_| "{not json".to_string()));
        let err = parse_tweets(&lines.join("\n"), IngestOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));

        let mut lines: Vec<String> = (0..5).map(|i| line(&i.to_string(), "ok")).collect();
        lines.extend((0..5).map(|_| "[]".to_string()));
        let got = parse_tweets(&lines.join("\n"), IngestOptions::default()).unwrap();
        assert_eq!(got.report.malformed, 5);
    }

    #[test]
    fn self_link_and_missing_links() {
        let own = serde_json::json!({"id": "9", "text": "see", "urls": ["https://twitter.com/u/status/9"]});
        let bare = serde_json::json!({"id": "8", "text": "no links"});
        let text = format!("{own}\n{bare}");
        let got = parse_tweets(&text, IngestOptions { require_links: true }).unwrap();
        assert!(got.tweets.is_empty());
        assert_eq!(got.report.self_linking, 1);
        assert_eq!(got.report.no_links, 1);
    }

    #[test]
    fn canonicalization() {
        assert_eq!(
            canonical_url("HTTPS://WWW.Snopes.com/fact-check/Foo/?utm=1#x"),
            "https://www.snopes.com/fact-check/Foo"
        );
        assert_eq!(canonical_url("snopes.com/a/"), "snopes.com/a");
    }

    fn thread() -> Vec<Tweet> {
        let root = Tweet::new("r", "the claim");
        let mut fc = Tweet::new("f", "this is false");
        fc.in_reply_to = Some("r".into());
        fc.conversation_root = Some("r".into());
        fc.urls = vec!["https://snopes.com/fact-check/a/".into()];
        vec![root, fc]
    }

    #[test]
    fn two_message_thread() {
        let urls = BTreeSet::from(["https://snopes.com/fact-check/a".to_string()]);
        let triples = resolve_triples(&thread(), &urls);
        assert_eq!(triples.len(), 1);
        assert_eq!(triples[0].root.as_ref().unwrap().id, "r");
        assert_eq!(triples[0].root, triples[0].reply);
    }

    #[test]
    fn missing_parent() {
        let mut tweets = thread();
        tweets[1].in_reply_to = Some("gone".into());
        let urls = BTreeSet::from(["https://snopes.com/fact-check/a".to_string()]);
        let triples = resolve_triples(&tweets, &urls);
        assert!(triples[0].reply.is_none());
        assert!(triples[0].root.is_some());
    }

    #[test]
    fn two_articles_two_triples() {
        let mut tweets = thread();
        tweets[1].urls.push("https://snopes.com/fact-check/b".into());
        tweets[1].urls.push("https://snopes.com/fact-check/b/?x=1".into());
        let urls = BTreeSet::from([
            "https://snopes.com/fact-check/a".to_string(),
            "https://snopes.com/fact-check/b".to_string(),
        ]);
        let triples = resolve_triples(&tweets, &urls);
        assert_eq!(triples.len(), 2);
        assert_ne!(triples[0].article_url, triples[1].article_url);
    }

    #[test]
    fn stats_examples() {
        let cfg = NormConfig::new(crate::textnorm::Stopwords::empty());
        let tweets = vec![Tweet::new("1", "a b c"), Tweet::new("2", "a b")];
        let s = corpus_stats(&tweets, &cfg);
        assert_eq!(s.unique_tweets, 2);
        assert_eq!(s.mean_words, 2.5);
        assert_eq!(s.median_words, 2.5);
        assert_eq!(s.max_words, 3);
        assert_eq!(s.vocab_size, 3);

        assert_eq!(corpus_stats(&[], &cfg), CorpusStats::default());

        let dup = vec![Tweet::new("1", "same text"), Tweet::new("2", "same text")];
        assert_eq!(corpus_stats(&dup, &cfg).unique_tweets, 2);
    }
}
