//! Distant-supervision labeling of tweet–article pairs.
//!
//! Pairs come from crowd fact-checking conversations: the tweet that a
//! fact-checker replied to (or the conversation root) is paired with the
//! linked article and scored by lexical overlap or encoder cosine. Pairs
//! above a threshold form a noisy positive-only training split.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{ConversationTriple, FactCheckArticle};
use crate::encoder::EncoderModel;
use crate::error::{Error, Result};
use crate::textnorm::{jaccard, normalize, NormConfig, TokenList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Jaccard,
    Cosine,
}

impl Strategy {
    /// Closed score range.
    pub fn range(self) -> (f64, f64) {
        match self {
            Strategy::Jaccard => (0.0, 1.0),
            Strategy::Cosine => (-1.0, 1.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Jaccard => "jaccard",
            Strategy::Cosine => "cosine",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jaccard" => Ok(Strategy::Jaccard),
            "cosine" => Ok(Strategy::Cosine),
            _ => Err(Error::Config(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Which conversation tweet a pair was scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Root,
    Reply,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Root => "root",
            TargetKind::Reply => "reply",
        }
    }
}

/// Target selection when labeling. `Best` scores both and keeps the higher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetChoice {
    Root,
    Reply,
    #[default]
    Best,
}

impl FromStr for TargetChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root" => Ok(TargetChoice::Root),
            "reply" => Ok(TargetChoice::Reply),
            "best" => Ok(TargetChoice::Best),
            _ => Err(Error::Config(format!("unknown target `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub tweet_id: String,
    pub article_url: String,
    pub target: TargetKind,
    pub score: f64,
    pub strategy: Strategy,
    /// Soft label in [0, 1].
    pub label: f64,
}

/// Mean of the tweet's Jaccard overlap with the title and with the
/// subtitle. An empty subtitle contributes 0.
pub fn jaccard_tokens(tweet: &TokenList, title: &TokenList, subtitle: &TokenList) -> f64 {
    (jaccard(tweet, title) + jaccard(tweet, subtitle)) / 2.0
}

pub fn jaccard_score(tweet_text: &str, article: &FactCheckArticle, cfg: &NormConfig) -> f64 {
    jaccard_tokens(
        &normalize(tweet_text, cfg),
        &normalize(&article.title, cfg),
        &normalize(&article.subtitle, cfg),
    )
}

/// Cosine between the tweet and article encodings.
pub fn cosine_score(
    tweet_text: &str,
    article: &FactCheckArticle,
    model: &EncoderModel,
    cfg: &NormConfig,
) -> Result<f64> {
    model.similarity(&model.text_input(tweet_text, cfg), &model.article_input(article, cfg))
}

/// Scores conversation targets against their linked articles.
pub enum PairScorer<'a> {
    Jaccard,
    Cosine(&'a EncoderModel),
}

impl PairScorer<'_> {
    pub fn strategy(&self) -> Strategy {
        match self {
            PairScorer::Jaccard => Strategy::Jaccard,
            PairScorer::Cosine(_) => Strategy::Cosine,
        }
    }

    pub fn score(&self, text: &str, article: &FactCheckArticle, cfg: &NormConfig) -> Result<f64> {
        match self {
            PairScorer::Jaccard => Ok(jaccard_score(text, article, cfg)),
            PairScorer::Cosine(m) => cosine_score(text, article, m, cfg),
        }
    }
}

/// Score every triple whose article is known. Triples with no usable
/// target tweet are skipped. Labels start at 1.0.
pub fn label_triples(
    triples: &[ConversationTriple],
    articles: &[FactCheckArticle],
    scorer: &PairScorer<'_>,
    choice: TargetChoice,
    cfg: &NormConfig,
) -> Result<Vec<LabeledPair>> {
    let by_url: BTreeMap<&str, &FactCheckArticle> =
        articles.iter().map(|a| (a.url.as_str(), a)).collect();
    let mut out = Vec::new();
    for t in triples {
        let Some(article) = by_url.get(t.article_url.as_str()) else {
            continue;
        };
        let mut candidates = Vec::new();
        if matches!(choice, TargetChoice::Root | TargetChoice::Best) {
            if let Some(r) = &t.root {
                candidates.push((TargetKind::Root, r));
            }
        }
        if matches!(choice, TargetChoice::Reply | TargetChoice::Best) {
            if let Some(r) = &t.reply {
                candidates.push((TargetKind::Reply, r));
            }
        }
        let mut best: Option<LabeledPair> = None;
        for (kind, tweet) in candidates {
            let score = scorer.score(&tweet.text, article, cfg)?;
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(LabeledPair {
                    tweet_id: tweet.id.clone(),
                    article_url: article.url.clone(),
                    target: kind,
                    score,
                    strategy: scorer.strategy(),
                    label: 1.0,
                });
            }
        }
        out.extend(best);
    }
    Ok(out)
}

/// Keep pairs scoring strictly above `threshold`, one per
/// (tweet, article), the highest-scoring instance winning.
pub fn build_split(pairs: &[LabeledPair], strategy: Strategy, threshold: f64) -> Result<Vec<LabeledPair>> {
    let (lo, hi) = strategy.range();
    if !(lo..=hi).contains(&threshold) {
        return Err(Error::Config(format!(
            "threshold {threshold} outside [{lo}, {hi}] for {strategy}"
        )));
    }
    let mut kept: BTreeMap<(&str, &str), &LabeledPair> = BTreeMap::new();
    for p in pairs.iter().filter(|p| p.score > threshold) {
        kept.entry((p.tweet_id.as_str(), p.article_url.as_str()))
            .and_modify(|cur| {
                if p.score > cur.score {
                    *cur = p;
                }
            })
            .or_insert(p);
    }
    if kept.is_empty() {
        return Err(Error::EmptySplit { threshold });
    }
    Ok(kept
        .into_values()
        .map(|p| LabeledPair {
            label: 1.0,
            ..p.clone()
        })
        .collect())
}

/// Split TSV: `tweet_id<TAB>article_url<TAB>score<TAB>strategy`.
pub fn write_split(pairs: &[LabeledPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", p.tweet_id, p.article_url, p.score, p.strategy);
    }
    out
}

pub fn parse_split(text: &str) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::Format(format!(
                "split line {}: expected 4 columns, got {}",
                no + 1,
                cols.len()
            )));
        }
        let score: f64 = cols[2]
            .parse()
            .map_err(|_| Error::Format(format!("split line {}: bad score", no + 1)))?;
        out.push(LabeledPair {
            tweet_id: cols[0].to_string(),
            article_url: cols[1].to_string(),
            target: TargetKind::Reply,
            score,
            strategy: cols[3].parse().map_err(|_| {
                Error::Format(format!("split line {}: bad strategy `{}`", no + 1, cols[3]))
            })?,
            label: 1.0,
        });
    }
    Ok(out)
}

pub fn read_split(path: impl AsRef<Path>) -> Result<Vec<LabeledPair>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_split(&text)
}

/// Bin boundaries: `edges[i]..edges[i+1]`, half-open except the last bin,
/// which is closed. Scores outside the edges clamp to the end bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEdges(Vec<f64>);

impl BinEdges {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("bin edges must be strictly increasing".into()));
        }
        Ok(BinEdges(edges))
    }

    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        let n = bins as f64;
        Self::new((0..=bins).map(|i| (lo * (n - i as f64) + hi * i as f64) / n).collect())
    }

    /// Ten bins of width 0.1 over [0, 1].
    pub fn jaccard() -> Self {
        Self::uniform(0.0, 1.0, 10).expect("static edges")
    }

    /// Cosine bins: everything below 0.1 in the first bin, then width 0.1
    /// up to a closed `[0.9, 1.0]`.
    pub fn cosine() -> Self {
        let mut e = vec![-1.0];
        e.extend((1..=10).map(|i| i as f64 / 10.0));
        Self::new(e).expect("static edges")
    }

    pub fn for_strategy(s: Strategy) -> Self {
        match s {
            Strategy::Jaccard => Self::jaccard(),
            Strategy::Cosine => Self::cosine(),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edges(&self) -> &[f64] {
        &self.0
    }

    pub fn bin_of(&self, score: f64) -> usize {
        let inner = &self.0[1..self.0.len() - 1];
        inner.partition_point(|&e| e <= score)
    }

    pub fn label(&self, i: usize) -> String {
        let close = if i + 1 == self.len() { ']' } else { ')' };
        format!("[{};{}{close}", self.0[i], self.0[i + 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    /// Share of all pairs falling in this bin, in percent.
    pub example_pct: f64,
    /// Annotated pairs judged correct.
    pub correct: usize,
    pub annotated: usize,
}

impl Bin {
    pub fn correct_rate(&self) -> Option<f64> {
        (self.annotated > 0).then(|| self.correct as f64 / self.annotated as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinTable {
    pub bins: Vec<Bin>,
}

/// One scored pair with an optional human judgment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub score: f64,
    pub correct: Option<bool>,
}

pub fn bin_statistics(pairs: &[ScoredPair], edges: &BinEdges) -> Result<BinTable> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = edges.len();
    let mut counts = vec![0usize; n];
    let mut correct = vec![0usize; n];
    let mut annotated = vec![0usize; n];
    for p in pairs {
        if !p.score.is_finite() {
            return Err(Error::Numerical(format!("non-finite score {}", p.score)));
        }
        let b = edges.bin_of(p.score);
        counts[b] += 1;
        if let Some(c) = p.correct {
            annotated[b] += 1;
            correct[b] += c as usize;
        }
    }
    let e = edges.edges();
    let bins = (0..n)
        .map(|i| Bin {
            lo: e[i],
            hi: e[i + 1],
            example_pct: 100.0 * counts[i] as f64 / pairs.len() as f64,
            correct: correct[i],
            annotated: annotated[i],
        })
        .collect();
    Ok(BinTable { bins })
}

/// Estimated share and number of matching pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchEstimate {
    /// Percent of all pairs.
    pub fraction_pct: f64,
    pub count: u64,
}

impl BinTable {
    pub fn fraction_sum(&self) -> f64 {
        self.bins.iter().map(|b| b.example_pct).sum()
    }

    /// TSV: `lo<TAB>hi<TAB>example_pct<TAB>correct<TAB>annotated`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut bins = Vec::new();
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let bad = || Error::Format(format!("bin table line {}: expected lo, hi, pct, correct, annotated", no + 1));
            if cols.len() != 5 {
                return Err(bad());
            }
            let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let u = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let bin = Bin {
                lo: f(cols[0])?,
                hi: f(cols[1])?,
                example_pct: f(cols[2])?,
                correct: u(cols[3])?,
                annotated: u(cols[4])?,
            };
            if bin.correct > bin.annotated {
                return Err(bad());
            }
            bins.push(bin);
        }
        if bins.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(BinTable { bins })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# lo\thi\texample_pct\tcorrect\tannotated\n");
        for b in &self.bins {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", b.lo, b.hi, b.example_pct, b.correct, b.annotated);
        }
        out
    }

    /// Expected matches: each bin's share times its correct rate. Bins
    /// without annotations contribute nothing.
    pub fn estimate_matches(&self, total_pairs: u64) -> MatchEstimate {
        let pct: f64 = self
            .bins
            .iter()
            .map(|b| b.example_pct * b.correct_rate().unwrap_or(0.0))
            .sum();
        MatchEstimate {
            fraction_pct: pct,
            count: (pct / 100.0 * total_pairs as f64).round() as u64,
        }
    }
}

/// Reference bin tables: printed example shares with correct rates encoded
/// as whole-sample ratios.
pub mod reference {
    use super::BinTable;

    pub const JACCARD_REPLY: &str = include_str!("../data/bins/jaccard_reply.tsv");
    pub const JACCARD_CONVERSATION: &str = include_str!("../data/bins/jaccard_conversation.tsv");
    pub const COSINE: &str = include_str!("../data/bins/cosine.tsv");

    /// Total tweet pairs the reference tables were drawn from.
    pub const TOTAL_PAIRS: u64 = 332_660;

    pub fn jaccard_reply() -> BinTable {
        BinTable::parse(JACCARD_REPLY).expect("bundled table")
    }

    pub fn jaccard_conversation() -> BinTable {
        BinTable::parse(JACCARD_CONVERSATION).expect("bundled table")
    }

    pub fn cosine() -> BinTable {
        BinTable::parse(COSINE).expect("bundled table")
    }
}
