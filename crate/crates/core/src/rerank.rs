//! LambdaMART re-ranking of candidate lists.
//!
//! Each candidate is described by the reciprocal rank and raw score it gets
//! from several first-stage scorers. Gradient-boosted regression trees are
//! fit to pairwise lambda gradients weighted by the change in MAP@K (or
//! NDCG@K) from swapping the pair.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Qrels;
use crate::error::{Error, Result};
use crate::evalmetrics::RankedList;
use crate::retrieval::FieldCombo;

/// Bump when the feature order or meaning changes.
pub const FEATURE_LAYOUT_VERSION: u32 = 1;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Tfidf,
    Encoder,
}

impl ScorerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::Tfidf => "tfidf",
            ScorerKind::Encoder => "encoder",
        }
    }
}

/// One first-stage scorer: a model family over one article field combo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScorerKey {
    pub kind: ScorerKind,
    pub fields: FieldCombo,
}

impl ScorerKey {
    pub fn new(kind: ScorerKind, fields: FieldCombo) -> Self {
        ScorerKey { kind, fields }
    }
}

impl fmt::Display for ScorerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.kind.as_str(), self.fields)
    }
}

impl FromStr for ScorerKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, fields) = s
            .split_once('_')
            .ok_or_else(|| Error::Config(format!("bad scorer `{s}`, expected e.g. tfidf_cts")))?;
        let kind = match kind {
            "tfidf" => ScorerKind::Tfidf,
            "encoder" => ScorerKind::Encoder,
            _ => return Err(Error::Config(format!("unknown scorer kind `{kind}`"))),
        };
        Ok(ScorerKey::new(kind, fields.parse()?))
    }
}

/// Ordered feature columns: for each scorer, its reciprocal rank then its
/// score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub version: u32,
    pub scorers: Vec<ScorerKey>,
}

impl FeatureLayout {
    pub fn new(scorers: Vec<ScorerKey>) -> Self {
        FeatureLayout {
            version: FEATURE_LAYOUT_VERSION,
            scorers,
        }
    }

    /// TF.IDF then encoder, each over c, ct, cts: 12 features.
    pub fn ensemble() -> Self {
        let mut s = Vec::new();
        for kind in [ScorerKind::Tfidf, ScorerKind::Encoder] {
            for f in FieldCombo::ALL {
                s.push(ScorerKey::new(kind, f));
            }
        }
        Self::new(s)
    }

    /// TF.IDF and encoder over cts: 4 features.
    pub fn single() -> Self {
        Self::new(vec![
            ScorerKey::new(ScorerKind::Tfidf, FieldCombo::Cts),
            ScorerKey::new(ScorerKind::Encoder, FieldCombo::Cts),
        ])
    }

    pub fn len(&self) -> usize {
        2 * self.scorers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scorers.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.scorers
            .iter()
            .flat_map(|s| [format!("{s}_rr"), format!("{s}_score")])
            .collect()
    }

    /// `v1:tfidf_c,encoder_cts`
    pub fn tag(&self) -> String {
        let s: Vec<String> = self.scorers.iter().map(ToString::to_string).collect();
        format!("v{}:{}", self.version, s.join(","))
    }

    pub fn parse_tag(tag: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad feature layout tag `{tag}`"));
        let (v, rest) = tag.split_once(':').ok_or_else(bad)?;
        let version: u32 = v.strip_prefix('v').and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let scorers = rest
            .split(',')
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureLayout { version, scorers })
    }
}

/// Features of one (query, candidate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub query_id: String,
    pub doc_id: String,
    /// 1-based position in the primary ranking.
    pub orig_rank: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub layout: FeatureLayout,
    pub rows: Vec<FeatureRow>,
}

/// Assemble features for the top `top_k` candidates of `primary`.
///
/// `rankings` must contain a full ranking for every scorer in the layout.
pub fn build_features(
    primary: &RankedList,
    rankings: &BTreeMap<ScorerKey, RankedList>,
    layout: &FeatureLayout,
    top_k: usize,
) -> Result<Vec<FeatureRow>> {
    let lookups: Vec<BTreeMap<&str, (usize, f64)>> = layout
        .scorers
        .iter()
        .map(|key| {
            let run = rankings.get(key).ok_or_else(|| Error::MissingScorer(key.to_string()))?;
            Ok(run
                .entries()
                .iter()
                .enumerate()
                .map(|(i, c)| (c.id.as_str(), (i + 1, c.score)))
                .collect())
        })
        .collect::<Result<_>>()?;
    primary
        .entries()
        .iter()
        .take(top_k)
        .enumerate()
        .map(|(i, cand)| {
            let mut values = Vec::with_capacity(layout.len());
            for (key, lookup) in layout.scorers.iter().zip(&lookups) {
                let (pos, score) = lookup.get(cand.id.as_str()).copied().ok_or_else(|| {
                    Error::UnknownDoc(format!("{} not ranked by {key}", cand.id))
                })?;
                values.push(1.0 / pos as f64);
                values.push(score);
            }
            Ok(FeatureRow {
                query_id: primary.query_id().to_string(),
                doc_id: cand.id.clone(),
                orig_rank: i + 1,
                values,
            })
        })
        .collect()
}

impl FeatureSet {
    /// TSV with a `# layout=` header and one row per candidate:
    /// `query<TAB>doc<TAB>orig_rank<TAB>f1<TAB>f2…`.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# layout={}\n", self.layout.tag());
        let _ = writeln!(out, "# query\tdoc\torig_rank\t{}", self.layout.names().join("\t"));
        for r in &self.rows {
            let _ = write!(out, "{}\t{}\t{}", r.query_id, r.doc_id, r.orig_rank);
            for v in &r.values {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut layout = None;
        let mut rows = Vec::new();
        for (no, line) in text.lines().enumerate() {
            if let Some(tag) = line.strip_prefix("# layout=") {
                layout = Some(FeatureLayout::parse_tag(tag.trim())?);
                continue;
            }
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let layout = layout
                .as_ref()
                .ok_or_else(|| Error::Format("features file lacks a `# layout=` header".into()))?;
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Format(format!("features line {}: malformed row", no + 1));
            if cols.len() != 3 + layout.len() {
                return Err(bad());
            }
            rows.push(FeatureRow {
                query_id: cols[0].to_string(),
                doc_id: cols[1].to_string(),
                orig_rank: cols[2].parse().map_err(|_| bad())?,
                values: cols[3..]
                    .iter()
                    .map(|v| v.parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?,
            });
        }
        Ok(FeatureSet {
            layout: layout.ok_or_else(|| Error::Format("features file lacks a `# layout=` header".into()))?,
            rows,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Rows grouped by query, in first-seen order.
    pub fn groups(&self) -> Vec<(&str, Vec<&FeatureRow>)> {
        let mut order: Vec<&str> = Vec::new();
        let mut by: BTreeMap<&str, Vec<&FeatureRow>> = BTreeMap::new();
        for r in &self.rows {
            by.entry(&r.query_id)
                .or_insert_with(|| {
                    order.push(&r.query_id);
                    Vec::new()
                })
                .push(r);
        }
        order.into_iter().map(|q| (q, by.remove(q).unwrap_or_default())).collect()
    }
}

/// List metric driving the lambdas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMetric {
    #[default]
    Map,
    Ndcg,
}

/// Truncated AP of a binary relevance list.
fn ap_at(rels: &[bool], total_relevant: usize, k: usize) -> f64 {
    let denom = total_relevant.min(k);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0;
    let mut sum = 0.0;
    for (i, &r) in rels.iter().take(k).enumerate() {
        if r {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

/// |ΔAP@k| from swapping positions `a` and `b` (0-based) of a binary list
/// where exactly one of the two is relevant. Uses prefix hit counts, so
/// only positions between the two inside the cutoff are visited.
pub fn delta_ap(rels: &[bool], total_relevant: usize, k: usize, a: usize, b: usize) -> f64 {
    let denom = total_relevant.min(k);
    if denom == 0 || rels[a] == rels[b] || (a >= k && b >= k) {
        return 0.0;
    }
    // `from` holds the relevant doc, which moves to `to`
    let (from, to) = if rels[a] { (a, b) } else { (b, a) };
    let hits_through = |pos: usize| rels[..=pos].iter().filter(|&&r| r).count();
    let mut delta = 0.0;
    if from < k {
        delta -= hits_through(from) as f64 / (from + 1) as f64;
    }
    if from < to {
        if to < k {
            delta += hits_through(to) as f64 / (to + 1) as f64;
        }
        for p in (from + 1)..to.min(k) {
            if rels[p] {
                delta -= 1.0 / (p + 1) as f64;
            }
        }
    } else {
        if to < k {
            delta += (hits_through(to) + 1) as f64 / (to + 1) as f64;
        }
        for p in (to + 1)..from.min(k) {
            if rels[p] {
                delta += 1.0 / (p + 1) as f64;
            }
        }
    }
    (delta / denom as f64).abs()
}

fn discount(pos: usize, k: usize) -> f64 {
    if pos < k {
        1.0 / ((pos + 2) as f64).log2()
    } else {
        0.0
    }
}

/// |ΔNDCG@k| from swapping positions `a` and `b`.
pub fn delta_ndcg(rels: &[bool], total_relevant: usize, k: usize, a: usize, b: usize) -> f64 {
    let ideal: f64 = (0..total_relevant.min(k)).map(|p| discount(p, k)).sum();
    if ideal == 0.0 || rels[a] == rels[b] {
        return 0.0;
    }
    ((discount(a, k) - discount(b, k)) / ideal).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaMartConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub metric: LambdaMetric,
    /// Metric cutoff.
    pub k: usize,
    pub sigma: f64,
}

impl Default for LambdaMartConfig {
    fn default() -> Self {
        LambdaMartConfig {
            trees: 300,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            metric: LambdaMetric::Map,
            k: 5,
            sigma: 1.0,
        }
    }
}

/// Lambda gradients and Hessian weights for one query's current ranking.
///
/// `scores[i]` and `rels[i]` describe document `i`; `order` lists document
/// indices by current rank. Returns per-document `(lambda, weight)` where
/// a positive lambda pushes the document up.
pub fn query_lambdas(
    scores: &[f64],
    rels: &[bool],
    order: &[usize],
    cfg: &LambdaMartConfig,
) -> (Vec<f64>, Vec<f64>) {
    let n = scores.len();
    let mut lambdas = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let ranked: Vec<bool> = order.iter().map(|&d| rels[d]).collect();
    let total = ranked.iter().filter(|&&r| r).count();
    for pi in 0..n {
        if !ranked[pi] {
            continue;
        }
        for pj in 0..n {
            if ranked[pj] {
                continue;
            }
            let delta = match cfg.metric {
                LambdaMetric::Map => delta_ap(&ranked, total, cfg.k, pi, pj),
                LambdaMetric::Ndcg => delta_ndcg(&ranked, total, cfg.k, pi, pj),
            };
            if delta == 0.0 {
                continue;
            }
            let (i, j) = (order[pi], order[pj]);
            let rho = 1.0 / (1.0 + (cfg.sigma * (scores[i] - scores[j])).exp());
            let lam = cfg.sigma * rho * delta;
            let w = cfg.sigma * cfg.sigma * rho * (1.0 - rho) * delta;
            lambdas[i] += lam;
            lambdas[j] -= lam;
            weights[i] += w;
            weights[j] += w;
        }
    }
    (lambdas, weights)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree stored as a node array rooted at index 0. A row goes
/// left when `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> Self {
        Tree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                    gain: 1.0,
                },
                Node::Leaf { value: left },
                Node::Leaf { value: right },
            ],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

struct TreeBuilder<'a> {
    x: &'a [&'a [f64]],
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a LambdaMartConfig,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn leaf(&self, idx: &[usize]) -> f64 {
        let g: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        if h > 1e-12 {
            g / h
        } else {
            0.0
        }
    }

    /// Best least-squares split of `idx` as `(gain, feature, threshold)`.
    fn best_split(&self, idx: &[usize]) -> Option<(f64, usize, f64)> {
        let n = idx.len();
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        if n < 2 * min_leaf {
            return None;
        }
        let total: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let base = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = idx.to_vec();
        for f in 0..self.x[idx[0]].len() {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = 0.0;
            for s in 0..n - 1 {
                left += self.grad[sorted[s]];
                let (lo, hi) = (self.x[sorted[s]][f], self.x[sorted[s + 1]][f]);
                let nl = s + 1;
                if lo == hi || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let right = total - left;
                let gain = left * left / nl as f64 + right * right / (n - nl) as f64 - base;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let split = if depth < self.cfg.max_depth {
            self.best_split(&idx)
        } else {
            None
        };
        match split {
            None => {
                self.nodes[id] = Node::Leaf { value: self.leaf(&idx) };
            }
            Some((gain, feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    gain,
                };
            }
        }
        id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub layout: FeatureLayout,
    pub learning_rate: f64,
    pub metric: LambdaMetric,
    pub k: usize,
    pub trees: Vec<Tree>,
    /// Training metric after each boosting round; index 0 is before any tree.
    pub train_history: Vec<f64>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: GbdtModel,
}

impl GbdtModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported re-ranker format version {}",
                f.format_version
            )));
        }
        Ok(f.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Current ranking of a query's documents: score descending, ties by
/// original rank.
fn order_by(scores: &[f64], orig: &[usize], docs: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.sort_by(|&a, &b| {
        scores[docs[b]]
            .total_cmp(&scores[docs[a]])
            .then(orig[docs[a]].cmp(&orig[docs[b]]))
    });
    order
}

fn metric_value(rels: &[bool], cfg: &LambdaMartConfig) -> f64 {
    let total = rels.iter().filter(|&&r| r).count();
    match cfg.metric {
        LambdaMetric::Map => ap_at(rels, total, cfg.k),
        LambdaMetric::Ndcg => {
            let ideal: f64 = (0..total.min(cfg.k)).map(|p| discount(p, cfg.k)).sum();
            if ideal == 0.0 {
                return 0.0;
            }
            let dcg: f64 = rels.iter().enumerate().filter(|(_, &r)| r).map(|(p, _)| discount(p, cfg.k)).sum();
            dcg / ideal
        }
    }
}

/// Fit LambdaMART on the candidate features, keeping the trees up to the
/// round with the best training metric.
pub fn train_lambdamart(features: &FeatureSet, qrels: &Qrels, cfg: &LambdaMartConfig) -> Result<GbdtModel> {
    if cfg.k == 0 || cfg.max_depth == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("k, max_depth and learning_rate must be positive".into()));
    }
    let width = features.layout.len();
    if let Some(r) = features.rows.iter().find(|r| r.values.len() != width) {
        return Err(Error::LayoutMismatch {
            expected: width.to_string(),
            found: r.values.len().to_string(),
        });
    }
    if features.rows.iter().any(|r| r.values.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numerical("non-finite feature value".into()));
    }

    let mut x: Vec<&[f64]> = Vec::new();
    let mut rels: Vec<bool> = Vec::new();
    let mut orig: Vec<usize> = Vec::new();
    let mut queries: Vec<Vec<usize>> = Vec::new();
    for (q, rows) in features.groups() {
        let relevant = qrels.relevant(q);
        let start = x.len();
        for r in &rows {
            x.push(&r.values);
            rels.push(relevant.contains(r.doc_id.as_str()));
            orig.push(r.orig_rank);
        }
        let docs: Vec<usize> = (start..x.len()).collect();
        let n_rel = docs.iter().filter(|&&d| rels[d]).count();
        if n_rel > 0 && n_rel < docs.len() {
            queries.push(docs);
        }
    }
    if queries.is_empty() {
        return Err(Error::DegenerateData(
            "no query has both relevant and non-relevant candidates".into(),
        ));
    }
    let varies = (0..width).any(|f| x.iter().any(|row| row[f] != x[0][f]));
    if !varies {
        return Err(Error::DegenerateData("all features are constant".into()));
    }

    let mean_metric = |scores: &[f64]| -> f64 {
        queries
            .iter()
            .map(|docs| {
                let order = order_by(scores, &orig, docs);
                let ranked: Vec<bool> = order.iter().map(|&p| rels[docs[p]]).collect();
                metric_value(&ranked, cfg)
            })
            .sum::<f64>()
            / queries.len() as f64
    };

    let n = x.len();
    let mut scores = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.trees);
    let mut history = vec![mean_metric(&scores)];
    for _ in 0..cfg.trees {
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        let mut idx = Vec::new();
        for docs in &queries {
            let local_scores: Vec<f64> = docs.iter().map(|&d| scores[d]).collect();
            let local_rels: Vec<bool> = docs.iter().map(|&d| rels[d]).collect();
            let order = order_by(&scores, &orig, docs);
            let (l, w) = query_lambdas(&local_scores, &local_rels, &order, cfg);
            for (k, &d) in docs.iter().enumerate() {
                grad[d] = l[k];
                hess[d] = w[k];
            }
            idx.extend_from_slice(docs);
        }
        let mut builder = TreeBuilder {
            x: &x,
            grad: &grad,
            hess: &hess,
            cfg,
            nodes: Vec::new(),
        };
        builder.grow(idx, 0);
        let tree = Tree { nodes: builder.nodes };
        for (s, row) in scores.iter_mut().zip(&x) {
            *s += cfg.learning_rate * tree.predict(row);
        }
        trees.push(tree);
        history.push(mean_metric(&scores));
    }

    let best = history
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > history[b] { i } else { b });
    trees.truncate(best);
    history.truncate(best + 1);
    Ok(GbdtModel {
        layout: features.layout.clone(),
        learning_rate: cfg.learning_rate,
        metric: cfg.metric,
        k: cfg.k,
        trees,
        train_history: history,
        meta: BTreeMap::new(),
    })
}

/// Reorder one query's candidates by model score; ties keep the original
/// order.
pub fn rerank(model: &GbdtModel, layout: &FeatureLayout, rows: &[&FeatureRow]) -> Result<RankedList> {
    if layout != &model.layout {
        return Err(Error::LayoutMismatch {
            expected: model.layout.tag(),
            found: layout.tag(),
        });
    }
    let Some(first) = rows.first() else {
        return Ok(RankedList::empty(""));
    };
    if let Some(r) = rows.iter().find(|r| r.values.len() != layout.len()) {
        return Err(Error::LayoutMismatch {
            expected: layout.len().to_string(),
            found: r.values.len().to_string(),
        });
    }
    let mut scored: Vec<(f64, usize, &str)> = rows
        .iter()
        .map(|r| (model.predict(&r.values), r.orig_rank, r.doc_id.as_str()))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    RankedList::from_ordered(
        first.query_id.clone(),
        scored.into_iter().map(|(s, _, d)| (d.to_string(), s)).collect(),
    )
}

/// Re-rank every query in a feature set.
pub fn rerank_all(model: &GbdtModel, features: &FeatureSet) -> Result<Vec<RankedList>> {
    features
        .groups()
        .into_iter()
        .map(|(_, rows)| rerank(model, &features.layout, &rows))
        .collect()
}

/// Split-gain share per feature. All zeros when the model has no splits.
pub fn feature_importance(model: &GbdtModel) -> Vec<f64> {
    let mut gains = vec![0.0; model.layout.len()];
    for t in &model.trees {
        for n in &t.nodes {
            if let Node::Split { feature, gain, .. } = n {
                gains[*feature] += gain;
            }
        }
    }
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        gains.iter_mut().for_each(|g| *g /= total);
    }
    gains
}
