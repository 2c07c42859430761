//! Ranking metrics (MRR, MAP@K, P@K) and inter-annotator agreement.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Qrels;
use crate::error::{Error, Result};

/// Rank cutoffs reported by [`evaluate`].
pub const CUTOFFS: [usize; 5] = [1, 3, 5, 10, 20];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub score: f64,
}

/// Ordered candidates for one query: unique ids, non-increasing scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    query_id: String,
    entries: Vec<Candidate>,
}

impl RankedList {
    /// Sort by score descending, ties by ascending candidate id.
    pub fn from_scores(query_id: impl Into<String>, mut scored: Vec<(String, f64)>) -> Result<Self> {
        if let Some((id, _)) = scored.iter().find(|(_, s)| s.is_nan()) {
            return Err(Error::Numerical(format!("NaN score for candidate `{id}`")));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_ordered(query_id.into(), scored)
    }

    /// Take an already ordered list, checking the invariants.
    pub fn from_ordered(query_id: impl Into<String>, ordered: Vec<(String, f64)>) -> Result<Self> {
        let query_id = query_id.into();
        let mut seen = HashSet::new();
        for (i, (id, score)) in ordered.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::Format(format!(
                    "duplicate candidate `{id}` for query `{query_id}`"
                )));
            }
            if i > 0 && *score > ordered[i - 1].1 {
                return Err(Error::Format(format!(
                    "scores increase at rank {} for query `{query_id}`",
                    i + 1
                )));
            }
        }
        Ok(RankedList {
            query_id,
            entries: ordered
                .into_iter()
                .map(|(id, score)| Candidate { id, score })
                .collect(),
        })
    }

    pub fn empty(query_id: impl Into<String>) -> Self {
        RankedList {
            query_id: query_id.into(),
            entries: Vec::new(),
        }
    }

    pub fn query_id(&self) -> &str {
        &self.query_id
    }

    pub fn entries(&self) -> &[Candidate] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|c| c.id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based position of a candidate.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|c| c.id == id).map(|p| p + 1)
    }

    pub fn truncate(&mut self, k: usize) {
        self.entries.truncate(k);
    }
}

/// Reciprocal rank of the first relevant item in a 0/1 relevance vector.
pub fn reciprocal_rank(rels: &[bool]) -> f64 {
    rels.iter()
        .position(|&r| r)
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

/// Truncated average precision with denominator `min(total_relevant, k)`.
pub fn average_precision_at(rels: &[bool], total_relevant: usize, k: usize) -> f64 {
    let denom = total_relevant.min(k);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in rels.iter().take(k).enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

pub fn precision_at(rels: &[bool], k: usize) -> f64 {
    rels.iter().take(k).filter(|&&r| r).count() as f64 / k as f64
}

/// Aggregate ranking metrics over evaluated queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Queries with at least one relevant article.
    pub queries: usize,
    /// Queries in qrels without any relevant article (excluded from means).
    pub excluded_no_relevant: usize,
    /// Evaluated queries with no submitted run (scored 0).
    pub missing_runs: usize,
    pub mrr: f64,
    pub map: BTreeMap<usize, f64>,
    pub precision: BTreeMap<usize, f64>,
}

impl EvalReport {
    pub fn map_at(&self, k: usize) -> f64 {
        self.map.get(&k).copied().unwrap_or(f64::NAN)
    }

    pub fn precision_at(&self, k: usize) -> f64 {
        self.precision.get(&k).copied().unwrap_or(f64::NAN)
    }

    /// Flat JSON object with `MRR`, `P@K` and `MAP@K` keys.
    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = serde_json::Map::new();
        obj.insert("queries".into(), self.queries.into());
        obj.insert("excluded_no_relevant".into(), self.excluded_no_relevant.into());
        obj.insert("missing_runs".into(), self.missing_runs.into());
        obj.insert("MRR".into(), self.mrr.into());
        for k in CUTOFFS {
            obj.insert(format!("P@{k}"), self.precision_at(k).into());
        }
        for k in CUTOFFS {
            obj.insert(format!("MAP@{k}"), self.map_at(k).into());
        }
        serde_json::Value::Object(obj)
    }

    /// Aligned text table: Model | MRR | P@1..P@20 | MAP@1..MAP@20, in percent.
    pub fn table(rows: &[(&str, &EvalReport)]) -> String {
        let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = write!(out, "{:<name_w$} {:>7}", "Model", "MRR");
        for k in CUTOFFS {
            let _ = write!(out, " {:>7}", format!("P@{k}"));
        }
        for k in CUTOFFS {
            let _ = write!(out, " {:>7}", format!("MAP@{k}"));
        }
        out.push('\n');
        for (name, r) in rows {
            let _ = write!(out, "{:<name_w$} {:>7.2}", name, 100.0 * r.mrr);
            for k in CUTOFFS {
                let _ = write!(out, " {:>7.2}", 100.0 * r.precision_at(k));
            }
            for k in CUTOFFS {
                let _ = write!(out, " {:>7.2}", 100.0 * r.map_at(k));
            }
            out.push('\n');
        }
        out
    }
}

/// Score runs against qrels.
///
/// Every run must belong to a query present in qrels. Queries without any
/// relevant article are excluded from the means; evaluated queries without
/// a run contribute zeros.
pub fn evaluate(runs: &[RankedList], qrels: &Qrels) -> Result<EvalReport> {
    let mut by_query: BTreeMap<&str, &RankedList> = BTreeMap::new();
    for run in runs {
        if !qrels.contains_query(run.query_id()) {
            return Err(Error::UnknownQuery(run.query_id().to_string()));
        }
        by_query.insert(run.query_id(), run);
    }

    let mut evaluated = 0usize;
    let mut excluded = 0usize;
    let mut missing = 0usize;
    let mut mrr = 0.0;
    let mut map: BTreeMap<usize, f64> = CUTOFFS.iter().map(|&k| (k, 0.0)).collect();
    let mut prec = map.clone();

    for query in qrels.queries() {
        let relevant = qrels.relevant(query);
        if relevant.is_empty() {
            excluded += 1;
            continue;
        }
        evaluated += 1;
        let Some(run) = by_query.get(query) else {
            missing += 1;
            continue;
        };
        let rels: Vec<bool> = run.ids().map(|id| relevant.contains(id)).collect();
        mrr += reciprocal_rank(&rels);
        for k in CUTOFFS {
            *map.get_mut(&k).expect("cutoff") += average_precision_at(&rels, relevant.len(), k);
            *prec.get_mut(&k).expect("cutoff") += precision_at(&rels, k);
        }
    }

    let n = evaluated.max(1) as f64;
    map.values_mut().for_each(|v| *v /= n);
    prec.values_mut().for_each(|v| *v /= n);
    Ok(EvalReport {
        queries: evaluated,
        excluded_no_relevant: excluded,
        missing_runs: missing,
        mrr: mrr / n,
        map,
        precision: prec,
    })
}

/// Fleiss' kappa. `ratings[item][category]` counts the raters that put the
/// item in that category; every item must have the same rater count.
pub fn fleiss_kappa(ratings: &[Vec<usize>]) -> Result<f64> {
    let Some(first) = ratings.first() else {
        return Err(Error::DegenerateData("no items".into()));
    };
    let categories = first.len();
    let raters: usize = first.iter().sum();
    if raters < 2 {
        return Err(Error::DegenerateData("need at least two raters".into()));
    }
    for row in ratings {
        if row.len() != categories || row.iter().sum::<usize>() != raters {
            return Err(Error::DegenerateData(
                "every item must be rated by the same number of raters".into(),
            ));
        }
    }
    let n_items = ratings.len() as f64;
    let n = raters as f64;

    let mut p_j = vec![0.0; categories];
    let mut p_bar = 0.0;
    for row in ratings {
        let mut agree = 0.0;
        for (j, &c) in row.iter().enumerate() {
            p_j[j] += c as f64;
            agree += (c * c.saturating_sub(1)) as f64;
        }
        p_bar += agree / (n * (n - 1.0));
    }
    p_bar /= n_items;
    let p_e: f64 = p_j.iter().map(|s| (s / (n_items * n)).powi(2)).sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(Error::DegenerateData("expected agreement is 1".into()));
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Build the item × category count table from per-item rater labels.
pub fn rating_counts<L: Ord + Clone>(labels: &[Vec<L>]) -> Vec<Vec<usize>> {
    let categories: Vec<L> = labels
        .iter()
        .flatten()
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    labels
        .iter()
        .map(|row| {
            categories
                .iter()
                .map(|c| row.iter().filter(|l| *l == c).count())
                .collect()
        })
        .collect()
}

/// Cohen's kappa between two raters.
pub fn cohen_kappa<L: Ord>(a: &[L], b: &[L]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DegenerateData(format!(
            "label vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::DegenerateData("no labels".into()));
    }
    let n = a.len() as f64;
    let p_o = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut freq_a: BTreeMap<&L, f64> = BTreeMap::new();
    let mut freq_b: BTreeMap<&L, f64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *freq_a.entry(x).or_default() += 1.0;
        *freq_b.entry(y).or_default() += 1.0;
    }
    let p_e: f64 = freq_a
        .iter()
        .map(|(l, ca)| ca / n * freq_b.get(l).copied().unwrap_or(0.0) / n)
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(Error::DegenerateData("expected agreement is 1".into()));
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
