//! Lexical retrieval: Okapi BM25 over an inverted index and TF.IDF cosine
//! scoring, both over a chosen combination of article fields.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::FactCheckArticle;
use crate::error::{Error, Result};
use crate::evalmetrics::RankedList;
use crate::textnorm::{normalize, NormConfig, TokenList};

/// Which article fields are concatenated into the searchable text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldCombo {
    /// claim
    C,
    /// claim + title
    Ct,
    /// claim + title + subtitle
    Cts,
}

impl FieldCombo {
    pub const ALL: [FieldCombo; 3] = [FieldCombo::C, FieldCombo::Ct, FieldCombo::Cts];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldCombo::C => "c",
            FieldCombo::Ct => "ct",
            FieldCombo::Cts => "cts",
        }
    }

    /// Fields joined by a single space, in claim, title, subtitle order.
    pub fn text(self, article: &FactCheckArticle) -> String {
        let parts: &[&str] = match self {
            FieldCombo::C => &[&article.claim],
            FieldCombo::Ct => &[&article.claim, &article.title],
            FieldCombo::Cts => &[&article.claim, &article.title, &article.subtitle],
        };
        parts.join(" ")
    }
}

impl fmt::Display for FieldCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldCombo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" => Ok(FieldCombo::C),
            "ct" => Ok(FieldCombo::Ct),
            "cts" => Ok(FieldCombo::Cts),
            other => Err(Error::Config(format!("unknown field combo `{other}`"))),
        }
    }
}

/// Tokenize every article for a field combination, sorted by article URL.
pub fn tokenize_articles(
    articles: &[FactCheckArticle],
    fields: FieldCombo,
    cfg: &NormConfig,
) -> Vec<(String, TokenList)> {
    let mut docs: Vec<(String, TokenList)> = articles
        .iter()
        .map(|a| (a.url.clone(), normalize(&fields.text(a), cfg)))
        .collect();
    docs.sort_by(|a, b| a.0.cmp(&b.0));
    docs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Inverted index with the statistics BM25 needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    doc_len: Vec<usize>,
    avgdl: f64,
    postings: BTreeMap<String, Vec<Posting>>,
    params: Bm25Params,
    fields: Option<FieldCombo>,
}

impl InvertedIndex {
    /// Build from pre-tokenized documents. Documents are ordered by id.
    pub fn from_tokens(mut docs: Vec<(String, TokenList)>, params: Bm25Params) -> Result<Self> {
        docs.sort_by(|a, b| a.0.cmp(&b.0));
        if docs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Format("duplicate document id in index".into()));
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        for (i, (_, tokens)) in docs.iter().enumerate() {
            doc_len.push(tokens.len());
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (t, n) in tf {
                postings.entry(t.to_string()).or_default().push(Posting {
                    doc: i as u32,
                    tf: n,
                });
            }
        }
        let total: usize = doc_len.iter().sum();
        let avgdl = if docs.is_empty() {
            0.0
        } else {
            total as f64 / docs.len() as f64
        };
        let index = InvertedIndex {
            doc_ids: docs.into_iter().map(|(id, _)| id).collect(),
            doc_len,
            avgdl,
            postings,
            params,
            fields: None,
        };
        index.validate()?;
        Ok(index)
    }

    pub fn build(
        articles: &[FactCheckArticle],
        fields: FieldCombo,
        cfg: &NormConfig,
        params: Bm25Params,
    ) -> Result<Self> {
        let mut index = Self::from_tokens(tokenize_articles(articles, fields, cfg), params)?;
        index.fields = Some(fields);
        Ok(index)
    }

    /// Check postings order and that statistics agree with the postings.
    pub fn validate(&self) -> Result<()> {
        let mut len = vec![0usize; self.doc_ids.len()];
        for (term, list) in &self.postings {
            if list.windows(2).any(|w| w[0].doc >= w[1].doc) {
                return Err(Error::Format(format!("postings for `{term}` not sorted")));
            }
            for p in list {
                let slot = len
                    .get_mut(p.doc as usize)
                    .ok_or_else(|| Error::Format(format!("posting for `{term}` out of range")))?;
                *slot += p.tf as usize;
            }
        }
        if len != self.doc_len {
            return Err(Error::Format("document lengths disagree with postings".into()));
        }
        Ok(())
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn fields(&self) -> Option<FieldCombo> {
        self.fields
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_freq(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// BM25 score of every document, in index order.
    pub fn scores(&self, query: &TokenList) -> Vec<f64> {
        let Bm25Params { k1, b } = self.params;
        let mut scores = vec![0.0; self.num_docs()];
        for term in query {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for p in list {
                let tf = p.tf as f64;
                let dl = self.doc_len[p.doc as usize] as f64;
                let norm = if self.avgdl > 0.0 { dl / self.avgdl } else { 0.0 };
                scores[p.doc as usize] += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
            }
        }
        scores
    }

    /// Top-k documents by BM25, ties broken by ascending document id.
    pub fn bm25_rank(&self, query_id: &str, query: &TokenList, k: usize) -> Result<RankedList> {
        if self.num_docs() == 0 {
            return Err(Error::EmptyIndex);
        }
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        top_k(query_id, &self.doc_ids, self.scores(query), k)
    }
}

fn top_k(query_id: &str, ids: &[String], scores: Vec<f64>, k: usize) -> Result<RankedList> {
    let mut list = RankedList::from_scores(query_id, ids.iter().cloned().zip(scores).collect())?;
    list.truncate(k);
    Ok(list)
}

type SparseVec = Vec<(u32, f64)>;

fn sparse_dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut sum) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

/// TF.IDF model with smoothed idf `ln((1+N)/(1+df)) + 1` and unit-norm
/// document vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    vocab: BTreeMap<String, u32>,
    idf: Vec<f64>,
    doc_ids: Vec<String>,
    doc_vecs: Vec<SparseVec>,
    fields: Option<FieldCombo>,
}

impl TfIdfModel {
    pub fn from_tokens(mut docs: Vec<(String, TokenList)>) -> Result<Self> {
        docs.sort_by(|a, b| a.0.cmp(&b.0));
        if docs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Format("duplicate document id in tf-idf model".into()));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for (_, tokens) in &docs {
            for t in tokens.unique() {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = docs.len() as f64;
        let vocab: BTreeMap<String, u32> = df
            .keys()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i as u32))
            .collect();
        let idf: Vec<f64> = df
            .values()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let mut model = TfIdfModel {
            vocab,
            idf,
            doc_ids: Vec::with_capacity(docs.len()),
            doc_vecs: Vec::with_capacity(docs.len()),
            fields: None,
        };
        for (id, tokens) in &docs {
            let v = model.vectorize(tokens);
            model.doc_ids.push(id.clone());
            model.doc_vecs.push(v);
        }
        Ok(model)
    }

    pub fn build(articles: &[FactCheckArticle], fields: FieldCombo, cfg: &NormConfig) -> Result<Self> {
        let mut model = Self::from_tokens(tokenize_articles(articles, fields, cfg))?;
        model.fields = Some(fields);
        Ok(model)
    }

    /// Unit-norm tf·idf vector; out-of-vocabulary tokens are ignored.
    pub fn vectorize(&self, tokens: &TokenList) -> SparseVec {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(&i) = self.vocab.get(t) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut v: SparseVec = tf
            .into_iter()
            .map(|(i, c)| (i, c * self.idf[i as usize]))
            .collect();
        let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|(_, x)| *x /= norm);
        }
        v
    }

    pub fn fields(&self) -> Option<FieldCombo> {
        self.fields
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    /// Cosine between the query and one stored document.
    pub fn tfidf_score(&self, query: &TokenList, article_id: &str) -> Result<f64> {
        let idx = self
            .doc_ids
            .binary_search_by(|d| d.as_str().cmp(article_id))
            .map_err(|_| Error::UnknownDoc(article_id.to_string()))?;
        Ok(sparse_dot(&self.vectorize(query), &self.doc_vecs[idx]))
    }

    pub fn scores(&self, query: &TokenList) -> Vec<f64> {
        let q = self.vectorize(query);
        self.doc_vecs.iter().map(|d| sparse_dot(&q, d)).collect()
    }

    pub fn rank(&self, query_id: &str, query: &TokenList, k: usize) -> Result<RankedList> {
        if self.num_docs() == 0 {
            return Err(Error::EmptyIndex);
        }
        top_k(query_id, &self.doc_ids, self.scores(query), k.max(1))
    }
}
