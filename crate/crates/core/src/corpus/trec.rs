//! CLEF/TREC-style relevance judgments and run files.
//!
//! qrels:       `query_id<TAB>0<TAB>article_id<TAB>relevance`
//! predictions: `query_id<TAB>article_id<TAB>rank<TAB>score<TAB>tag`
//!
//! Lines starting with `#` are metadata comments and are skipped on read.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evalmetrics::RankedList;

/// Query relevance judgments, one entry per (query, article).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u8>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or overwrite a judgment.
    pub fn insert(&mut self, query: impl Into<String>, article: impl Into<String>, relevance: u8) {
        self.judgments
            .entry(query.into())
            .or_default()
            .insert(article.into(), relevance);
    }

    pub fn contains_query(&self, query: &str) -> bool {
        self.judgments.contains_key(query)
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn relevance(&self, query: &str, article: &str) -> u8 {
        self.judgments
            .get(query)
            .and_then(|m| m.get(article))
            .copied()
            .unwrap_or(0)
    }

    pub fn relevant(&self, query: &str) -> BTreeSet<&str> {
        self.judgments
            .get(query)
            .map(|m| {
                m.iter()
                    .filter(|(_, r)| **r > 0)
                    .map(|(a, _)| a.as_str())
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keep only the given queries.
    pub fn restrict<'a>(&self, queries: impl IntoIterator<Item = &'a str>) -> Qrels {
        let keep: BTreeSet<&str> = queries.into_iter().collect();
        Qrels {
            judgments: self
                .judgments
                .iter()
                .filter(|(q, _)| keep.contains(q.as_str()))
                .map(|(q, m)| (q.clone(), m.clone()))
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut qrels = Qrels::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::Format(format!(
                    "qrels line {}: expected 4 tab-separated columns, got {}",
                    no + 1,
                    cols.len()
                )));
            }
            let relevance: u8 = cols[3].trim().parse().map_err(|_| {
                Error::Format(format!("qrels line {}: bad relevance `{}`", no + 1, cols[3]))
            })?;
            qrels.insert(cols[0].trim(), cols[2].trim(), relevance.min(1));
        }
        Ok(qrels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, m) in &self.judgments {
            for (a, r) in m {
                let _ = writeln!(out, "{q}\t0\t{a}\t{r}");
            }
        }
        out
    }
}

/// Parse a predictions file into one ranked list per query, ordered by the
/// rank column. Queries appear in first-seen order.
pub fn parse_predictions(text: &str) -> Result<Vec<RankedList>> {
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<(usize, String, f64)>> = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(Error::Format(format!(
                "predictions line {}: expected at least 4 columns, got {}",
                no + 1,
                cols.len()
            )));
        }
        let bad = |what: &str| Error::Format(format!("predictions line {}: bad {what}", no + 1));
        let rank: usize = cols[2].trim().parse().map_err(|_| bad("rank"))?;
        let score: f64 = cols[3].trim().parse().map_err(|_| bad("score"))?;
        let query = cols[0].trim().to_string();
        if !rows.contains_key(&query) {
            order.push(query.clone());
        }
        rows.entry(query)
            .or_default()
            .push((rank, cols[1].trim().to_string(), score));
    }
    order
        .into_iter()
        .map(|q| {
            let mut entries = rows.remove(&q).unwrap_or_default();
            entries.sort_by_key(|(rank, _, _)| *rank);
            RankedList::from_ordered(q, entries.into_iter().map(|(_, a, s)| (a, s)).collect())
        })
        .collect()
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<RankedList>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text)
}

/// Render runs as predictions TSV (ranks start at 1).
pub fn write_predictions(runs: &[RankedList], tag: &str) -> String {
    let mut out = String::new();
    for run in runs {
        for (i, c) in run.entries().iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{tag}", run.query_id(), c.id, i + 1, c.score);
        }
    }
    out
}

/// Labeled query texts: `query_id<TAB>text`, in file order.
pub fn parse_queries(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, body) = line.split_once('\t').ok_or_else(|| {
            Error::Format(format!("queries line {}: expected `id<TAB>text`", no + 1))
        })?;
        let id = id.trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::Format(format!("queries line {}: duplicate id `{id}`", no + 1)));
        }
        out.push((id, body.to_string()));
    }
    Ok(out)
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_queries(&text)
}
