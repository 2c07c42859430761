//! Config-driven commands: each reads inputs named by a [`PipelineConfig`],
//! writes one output atomically and stamps it with the config hash and seed.
//!
//! Relative paths in a config file resolve against the file's directory.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    self, load_queries, read_predictions, resolve_triples, write_predictions, ConversationTriple,
    FactCheckArticle, IngestOptions, Qrels, Tweet,
};
use crate::distsup::{
    self, build_split, label_triples, read_split, write_split, BinEdges, BinTable, LabeledPair,
    MatchEstimate, PairScorer, ScoredPair, Strategy, TargetChoice,
};
use crate::encoder::{ArticleEmbeddings, EncoderConfig, EncoderModel, Vocab};
use crate::error::{Error, Result};
use crate::evalmetrics::{cohen_kappa, evaluate, fleiss_kappa, rating_counts, EvalReport, RankedList};
use crate::io::{header, write_atomic};
use crate::rerank::{
    build_features, rerank_all, train_lambdamart, FeatureLayout, FeatureSet, GbdtModel,
    LambdaMartConfig, ScorerKey, ScorerKind,
};
use crate::retrieval::{Bm25Params, FieldCombo, InvertedIndex, TfIdfModel};
use crate::textnorm::{normalize, NormConfig, Stopwords, TokenList};
use crate::training::{train, DevSet, EpochLog, Prediction, TrainConfig, TrainPair};

/// Which supervision the encoder sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    /// Distantly supervised crowd pairs only.
    OnlyCrowd,
    /// Labeled training queries only.
    OnlyGold,
    /// Crowd pairs, then continue on the labeled queries.
    #[default]
    Seq,
    /// Both sets shuffled together.
    Mix,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::OnlyCrowd => "only-crowd",
            TrainMode::OnlyGold => "only-gold",
            TrainMode::Seq => "seq",
            TrainMode::Mix => "mix",
        }
    }

    fn uses_crowd(self) -> bool {
        self != TrainMode::OnlyGold
    }

    fn uses_gold(self) -> bool {
        self != TrainMode::OnlyCrowd
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "only-crowd" => Ok(TrainMode::OnlyCrowd),
            "only-gold" => Ok(TrainMode::OnlyGold),
            "seq" => Ok(TrainMode::Seq),
            "mix" => Ok(TrainMode::Mix),
            _ => Err(Error::Config(format!(
                "unknown mode `{s}` (expected only-crowd, only-gold, seq or mix)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub tweets: Option<PathBuf>,
    /// JSONL file or directory of HTML snapshots.
    pub articles: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub train_queries: Option<PathBuf>,
    pub rerank_queries: Option<PathBuf>,
    pub test_queries: Option<PathBuf>,
    pub dev_queries: Option<PathBuf>,
    /// One word per line; the bundled list when absent.
    pub stopwords: Option<PathBuf>,
    /// Encoder used by `label` with the cosine strategy.
    pub label_encoder: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            tweets: None,
            articles: None,
            qrels: None,
            train_queries: None,
            rerank_queries: None,
            test_queries: None,
            dev_queries: None,
            stopwords: None,
            label_encoder: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormSection {
    pub strip_handles: bool,
    pub stem: bool,
}

impl Default for NormSection {
    fn default() -> Self {
        NormSection {
            strip_handles: true,
            stem: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    pub strategy: Strategy,
    pub threshold: f64,
    pub target: TargetChoice,
}

impl Default for LabelSection {
    fn default() -> Self {
        LabelSection {
            strategy: Strategy::Jaccard,
            threshold: 0.3,
            target: TargetChoice::Best,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSection {
    pub bm25: Bm25Params,
    pub topk: usize,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        RetrievalSection {
            bm25: Bm25Params::default(),
            topk: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankSection {
    /// Feature scorers in column order, e.g. `tfidf_cts`.
    pub scorers: Vec<String>,
    /// Scorer whose top list is re-ranked.
    pub primary: String,
    /// Candidates per query taken from the primary ranking.
    pub top_k: usize,
    pub lambdamart: LambdaMartConfig,
}

impl Default for RerankSection {
    fn default() -> Self {
        RerankSection {
            scorers: FeatureLayout::ensemble().scorers.iter().map(ToString::to_string).collect(),
            primary: "encoder_cts".into(),
            top_k: 100,
            lambdamart: LambdaMartConfig::default(),
        }
    }
}

/// Everything a pipeline run depends on. The top-level `seed` overrides
/// the encoder and training seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub mode: TrainMode,
    pub paths: Paths,
    pub norm: NormSection,
    pub label: LabelSection,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub retrieval: RetrievalSection,
    pub rerank: RerankSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            mode: TrainMode::Seq,
            paths: Paths::default(),
            norm: NormSection::default(),
            label: LabelSection::default(),
            encoder: EncoderConfig::default(),
            train: TrainConfig::default(),
            retrieval: RetrievalSection::default(),
            rerank: RerankSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse TOML, then apply `key.path=value` overrides. Values are read
    /// as TOML (`0.5`, `true`, `"x"`); anything else is taken as a string.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: PipelineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.encoder.seed = cfg.seed;
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    /// First 16 hex digits of SHA-256 over the serialized config, leaving
    /// out `paths.out_dir`.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.paths.out_dir = PathBuf::new();
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(hex::encode(&digest[..8]))
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Which labeled queries a command reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuerySet {
    Train,
    Rerank,
    Test,
    Dev,
    File(PathBuf),
}

impl QuerySet {
    fn name(&self) -> String {
        match self {
            QuerySet::Train => "train".into(),
            QuerySet::Rerank => "rerank".into(),
            QuerySet::Test => "test".into(),
            QuerySet::Dev => "dev".into(),
            QuerySet::File(p) => p.file_stem().map_or("queries".into(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

impl FromStr for QuerySet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "train" => QuerySet::Train,
            "rerank" => QuerySet::Rerank,
            "test" => QuerySet::Test,
            "dev" => QuerySet::Dev,
            path => QuerySet::File(PathBuf::from(path)),
        })
    }
}

/// First-stage retrieval model for `retrieve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrieverKind {
    Bm25,
    Tfidf,
    Encoder,
}

impl FromStr for RetrieverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm25" => Ok(RetrieverKind::Bm25),
            "tfidf" => Ok(RetrieverKind::Tfidf),
            "encoder" => Ok(RetrieverKind::Encoder),
            _ => Err(Error::Config(format!("unknown model `{s}` (expected bm25, tfidf or encoder)"))),
        }
    }
}

impl fmt::Display for RetrieverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RetrieverKind::Bm25 => "bm25",
            RetrieverKind::Tfidf => "tfidf",
            RetrieverKind::Encoder => "encoder",
        })
    }
}

/// A loaded article scorer.
pub enum Retriever {
    Bm25(InvertedIndex),
    Tfidf(TfIdfModel),
    Encoder(Box<EncoderModel>, ArticleEmbeddings),
}

impl Retriever {
    pub fn rank(&self, query_id: &str, text: &str, norm: &NormConfig, k: usize) -> Result<RankedList> {
        match self {
            Retriever::Bm25(ix) => ix.bm25_rank(query_id, &normalize(text, norm), k),
            Retriever::Tfidf(m) => m.rank(query_id, &normalize(text, norm), k),
            Retriever::Encoder(model, emb) => {
                let q = model.encode(&model.text_input(text, norm))?;
                let scored = emb.ids.iter().cloned().zip(emb.scores(&q)).collect();
                let mut run = RankedList::from_scores(query_id, scored)?;
                run.truncate(k);
                Ok(run)
            }
        }
    }

    pub fn rank_all(&self, queries: &[(String, String)], norm: &NormConfig, k: usize) -> Result<Vec<RankedList>> {
        queries.iter().map(|(id, text)| self.rank(id, text, norm, k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub mode: TrainMode,
    pub fields: FieldCombo,
    pub crowd_pairs: usize,
    pub gold_pairs: usize,
    pub tau: f64,
    pub best_dev_map5: Option<f64>,
    pub history: Vec<EpochLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub pairs: usize,
    /// `None` when no pair clears the threshold.
    pub map5: Option<f64>,
}

/// A config bound to the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub config: PipelineConfig,
    base: PathBuf,
    hash: String,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, base: impl Into<PathBuf>) -> Result<Self> {
        let hash = config.hash()?;
        Ok(Pipeline {
            config,
            base: base.into(),
            hash,
        })
    }

    /// Load a TOML config (or the defaults) and apply overrides. Without a
    /// file, paths resolve against the working directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let (text, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (text, base)
            }
            None => (String::new(), PathBuf::new()),
        };
        Self::new(PipelineConfig::from_toml(&text, overrides)?, base)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() || self.base.as_os_str().is_empty() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn required(&self, p: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        p.as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Config(format!("paths.{key} is not set")))
    }

    /// `name` inside the output directory.
    pub fn out_path(&self, name: &str) -> PathBuf {
        self.resolve(&self.config.paths.out_dir).join(name)
    }

    pub fn encoder_path(&self, fields: FieldCombo) -> PathBuf {
        self.out_path(&format!("encoder_{fields}.json"))
    }

    pub fn norm(&self) -> Result<NormConfig> {
        let stop = match &self.config.paths.stopwords {
            Some(p) => Stopwords::load(self.resolve(p))?,
            None => Stopwords::bundled(),
        };
        let mut n = NormConfig::new(stop);
        n.strip_handles = self.config.norm.strip_handles;
        n.stem = self.config.norm.stem;
        Ok(n)
    }

    fn meta(&self, extra: &[(&str, String)]) -> Vec<(String, String)> {
        let mut m = vec![
            ("config_hash".to_string(), self.hash.clone()),
            ("seed".to_string(), self.config.seed.to_string()),
        ];
        m.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
        m
    }

    fn text_header(&self, extra: &[(&str, String)]) -> String {
        let m = self.meta(extra);
        let pairs: Vec<(&str, String)> = m.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
        header(&pairs)
    }

    fn json_meta(&self, extra: &[(&str, String)]) -> serde_json::Value {
        serde_json::Value::Object(
            self.meta(extra)
                .into_iter()
                .map(|(k, v)| (k, serde_json::Value::String(v)))
                .collect(),
        )
    }

    fn write_json(&self, out: &Path, value: &serde_json::Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        write_atomic(out, text.as_bytes())
    }

    pub fn tweets(&self) -> Result<Vec<Tweet>> {
        let path = self.required(&self.config.paths.tweets, "tweets")?;
        Ok(corpus::ingest_tweets(path, IngestOptions::default())?.tweets)
    }

    pub fn articles(&self) -> Result<Vec<FactCheckArticle>> {
        corpus::load_articles(self.required(&self.config.paths.articles, "articles")?)
    }

    pub fn qrels(&self) -> Result<Qrels> {
        Qrels::load(self.required(&self.config.paths.qrels, "qrels")?)
    }

    pub fn queries(&self, set: &QuerySet) -> Result<Vec<(String, String)>> {
        let p = &self.config.paths;
        let path = match set {
            QuerySet::Train => self.required(&p.train_queries, "train_queries")?,
            QuerySet::Rerank => self.required(&p.rerank_queries, "rerank_queries")?,
            QuerySet::Test => self.required(&p.test_queries, "test_queries")?,
            QuerySet::Dev => self.required(&p.dev_queries, "dev_queries")?,
            QuerySet::File(f) => f.clone(),
        };
        load_queries(path)
    }

    /// Token lines in, token lines out (space-separated).
    pub fn normalize_text(&self, text: &str) -> Result<String> {
        let norm = self.norm()?;
        let mut out = self.text_header(&[("norm", norm.hash())]);
        for line in text.lines() {
            out.push_str(&normalize(line, &norm).join(" "));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn cmd_normalize(&self, input: &Path, out: &Path) -> Result<()> {
        let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
        write_atomic(out, self.normalize_text(&text)?.as_bytes())
    }

    /// Ingestion counts and length statistics as JSON.
    pub fn cmd_stats(&self, out: &Path) -> Result<serde_json::Value> {
        let path = self.required(&self.config.paths.tweets, "tweets")?;
        let ing = corpus::ingest_tweets(path, IngestOptions::default())?;
        let stats = corpus::corpus_stats(&ing.tweets, &self.norm()?);
        let value = serde_json::json!({
            "meta": self.json_meta(&[]),
            "ingest": ing.report,
            "corpus": stats,
        });
        self.write_json(out, &value)?;
        Ok(value)
    }

    pub fn triples(&self) -> Result<Vec<ConversationTriple>> {
        let articles = self.articles()?;
        let urls = articles.iter().map(|a| a.url.clone()).collect();
        Ok(resolve_triples(&self.tweets()?, &urls))
    }

    /// One JSON triple per line after `#` metadata lines.
    pub fn cmd_triples(&self, out: &Path) -> Result<usize> {
        let triples = self.triples()?;
        let mut text = self.text_header(&[("triples", triples.len().to_string())]);
        for t in &triples {
            text.push_str(&serde_json::to_string(t)?);
            text.push('\n');
        }
        write_atomic(out, text.as_bytes())?;
        Ok(triples.len())
    }

    /// Score every resolvable triple with the configured strategy.
    pub fn score_pairs(&self) -> Result<Vec<LabeledPair>> {
        let norm = self.norm()?;
        let articles = self.articles()?;
        let urls = articles.iter().map(|a| a.url.clone()).collect();
        let triples = resolve_triples(&self.tweets()?, &urls);
        let target = self.config.label.target;
        match self.config.label.strategy {
            Strategy::Jaccard => label_triples(&triples, &articles, &PairScorer::Jaccard, target, &norm),
            Strategy::Cosine => {
                let path = self.required(&self.config.paths.label_encoder, "label_encoder")?;
                let model = EncoderModel::load(path)?;
                model.check_norm(&norm)?;
                label_triples(&triples, &articles, &PairScorer::Cosine(&model), target, &norm)
            }
        }
    }

    /// Write the split above the configured threshold, and optionally all
    /// scored pairs. Returns (scored, kept).
    pub fn cmd_label(&self, out: &Path, pairs_out: Option<&Path>) -> Result<(usize, usize)> {
        let scored = self.score_pairs()?;
        let l = &self.config.label;
        let extra = [
            ("strategy", l.strategy.to_string()),
            ("threshold", l.threshold.to_string()),
            ("target", format!("{:?}", l.target).to_lowercase()),
        ];
        if let Some(p) = pairs_out {
            let text = self.text_header(&[&extra[..], &[("pairs", scored.len().to_string())]].concat())
                + &write_split(&scored);
            write_atomic(p, text.as_bytes())?;
        }
        let split = build_split(&scored, l.strategy, l.threshold)?;
        let text = self.text_header(&[&extra[..], &[("pairs", split.len().to_string())]].concat())
            + &write_split(&split);
        write_atomic(out, text.as_bytes())?;
        Ok((scored.len(), split.len()))
    }

    /// Bin scored pairs and attach correctness annotations
    /// (`tweet_id<TAB>article_url<TAB>0|1`).
    pub fn cmd_bins(&self, pairs: &Path, annotations: Option<&Path>, out: &Path) -> Result<BinTable> {
        let scored = read_split(pairs)?;
        let strategy = scored.first().map_or(self.config.label.strategy, |p| p.strategy);
        let notes = match annotations {
            Some(p) => parse_annotations(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
            None => BTreeMap::new(),
        };
        let points: Vec<ScoredPair> = scored
            .iter()
            .map(|p| ScoredPair {
                score: p.score,
                correct: notes.get(&(p.tweet_id.clone(), p.article_url.clone())).copied(),
            })
            .collect();
        let table = distsup::bin_statistics(&points, &BinEdges::for_strategy(strategy))?;
        let text = self.text_header(&[("strategy", strategy.to_string())]) + &table.to_tsv();
        write_atomic(out, text.as_bytes())?;
        Ok(table)
    }

    /// Estimated matching pairs from a bin table file or a bundled
    /// reference table (`jaccard-reply`, `jaccard-conversation`, `cosine`).
    pub fn cmd_estimate(&self, table: &str, total: u64, out: &Path) -> Result<MatchEstimate> {
        let bins = match table {
            "jaccard-reply" => distsup::reference::jaccard_reply(),
            "jaccard-conversation" => distsup::reference::jaccard_conversation(),
            "cosine" => distsup::reference::cosine(),
            path => BinTable::load(path)?,
        };
        let est = bins.estimate_matches(total);
        let value = serde_json::json!({
            "meta": self.json_meta(&[("table", table.to_string())]),
            "total_pairs": total,
            "fraction_pct": est.fraction_pct,
            "count": est.count,
        });
        self.write_json(out, &value)?;
        Ok(est)
    }

    fn gold_examples(&self) -> Result<Vec<(TokenList, String)>> {
        let norm = self.norm()?;
        let qrels = self.qrels()?;
        let mut out = Vec::new();
        for (qid, text) in self.queries(&QuerySet::Train)? {
            let tokens = normalize(&text, &norm);
            for url in qrels.relevant(&qid) {
                out.push((tokens.clone(), url.to_string()));
            }
        }
        Ok(out)
    }

    fn crowd_examples(&self, split: &[LabeledPair], tweets: &[Tweet]) -> Result<Vec<(TokenList, String)>> {
        let norm = self.norm()?;
        let by_id: HashMap<&str, &Tweet> = tweets.iter().map(|t| (t.id.as_str(), t)).collect();
        split
            .iter()
            .map(|p| {
                let t = by_id
                    .get(p.tweet_id.as_str())
                    .ok_or_else(|| Error::Format(format!("split names unknown tweet {}", p.tweet_id)))?;
                Ok((normalize(&t.text, &norm), p.article_url.clone()))
            })
            .collect()
    }

    fn dev_set(&self, model: &EncoderModel, articles: &[FactCheckArticle]) -> Result<Option<DevSet>> {
        if self.config.paths.dev_queries.is_none() {
            return Ok(None);
        }
        let norm = self.norm()?;
        let queries = self.queries(&QuerySet::Dev)?;
        let qrels = self.qrels()?.restrict(queries.iter().map(|(q, _)| q.as_str()));
        let mut sorted: Vec<&FactCheckArticle> = articles.iter().collect();
        sorted.sort_by(|a, b| a.url.cmp(&b.url));
        Ok(Some(DevSet {
            queries: queries
                .iter()
                .map(|(id, t)| (id.clone(), model.text_input(t, &norm)))
                .collect(),
            articles: sorted
                .into_iter()
                .map(|a| (a.url.clone(), model.article_input(a, &norm)))
                .collect(),
            qrels,
        }))
    }

    /// Train an encoder for one field combo on `split` (crowd pairs) and/or
    /// the labeled training queries, as `mode` dictates.
    pub fn fit_encoder(
        &self,
        split: &[LabeledPair],
        mode: TrainMode,
        fields: FieldCombo,
        tcfg: &TrainConfig,
    ) -> Result<(EncoderModel, TrainSummary)> {
        let norm = self.norm()?;
        let articles = self.articles()?;
        let by_url: BTreeMap<&str, &FactCheckArticle> = articles.iter().map(|a| (a.url.as_str(), a)).collect();
        let crowd = if mode.uses_crowd() {
            self.crowd_examples(split, &self.tweets()?)?
        } else {
            Vec::new()
        };
        let gold = if mode.uses_gold() { self.gold_examples()? } else { Vec::new() };
        if crowd.is_empty() && gold.is_empty() {
            return Err(Error::EmptyInput);
        }

        let article_tokens: Vec<TokenList> = articles
            .iter()
            .flat_map(|a| [&a.title, &a.subtitle, &a.claim].map(|f| normalize(f, &norm)))
            .collect();
        let ecfg = self.config.encoder;
        let vocab = Vocab::build(
            crowd.iter().chain(&gold).map(|(t, _)| t).chain(&article_tokens),
            ecfg.min_count,
            ecfg.hash_buckets,
        )?;
        let mut model = EncoderModel::init(vocab, fields, ecfg, &norm)?;
        let to_pairs = |ex: &[(TokenList, String)], model: &EncoderModel| -> Result<Vec<TrainPair>> {
            ex.iter()
                .map(|(t, url)| {
                    let a = by_url
                        .get(url.as_str())
                        .ok_or_else(|| Error::UnknownDoc(url.clone()))?;
                    Ok(TrainPair {
                        tweet: model.tweet_input(t),
                        article: model.article_input(a, &norm),
                        label: 1.0,
                    })
                })
                .collect()
        };
        let crowd_pairs = to_pairs(&crowd, &model)?;
        let gold_pairs = to_pairs(&gold, &model)?;
        let dev = self.dev_set(&model, &articles)?;

        let stages: Vec<Vec<TrainPair>> = match mode {
            TrainMode::OnlyCrowd => vec![crowd_pairs],
            TrainMode::OnlyGold => vec![gold_pairs],
            TrainMode::Seq => vec![crowd_pairs, gold_pairs],
            TrainMode::Mix => vec![crowd_pairs.into_iter().chain(gold_pairs).collect()],
        };
        // every stage starts with fresh optimizer state and temperature
        let mut history = Vec::new();
        let mut tau = tcfg.tau_init;
        let mut best = None;
        for stage in stages.into_iter().filter(|s| !s.is_empty()) {
            let state = match train(model, &stage, tcfg, dev.as_ref()) {
                Ok(s) => s,
                Err(e) => {
                    let _ = e.checkpoint.model.save(self.out_path(&format!("encoder_{fields}.checkpoint.json")));
                    return Err(e.into());
                }
            };
            model = state.model;
            tau = state.tau;
            best = state.best_dev_map5.or(best);
            history.extend(state.history);
        }
        let summary = TrainSummary {
            mode,
            fields,
            crowd_pairs: crowd.len(),
            gold_pairs: gold.len(),
            tau,
            best_dev_map5: best,
            history,
        };
        Ok((model, summary))
    }

    fn train_config(&self, baseline: bool, prediction: Option<Prediction>) -> TrainConfig {
        let mut t = if baseline {
            TrainConfig {
                lr: self.config.train.lr,
                epochs: self.config.train.epochs,
                batch_size: self.config.train.batch_size,
                seed: self.config.seed,
                ..TrainConfig::baseline()
            }
        } else {
            self.config.train.clone()
        };
        if let Some(p) = prediction {
            t.prediction = p;
        }
        t
    }

    fn load_split_for(&self, mode: TrainMode, split: Option<&Path>) -> Result<Vec<LabeledPair>> {
        if !mode.uses_crowd() {
            return Ok(Vec::new());
        }
        match split {
            Some(p) => read_split(p),
            None => read_split(self.out_path("split.tsv")),
        }
    }

    /// Train and save an encoder; the per-epoch log goes to
    /// `<out>.history.tsv`.
    pub fn cmd_train(
        &self,
        fields: FieldCombo,
        split: Option<&Path>,
        baseline: bool,
        prediction: Option<Prediction>,
        out: &Path,
    ) -> Result<TrainSummary> {
        let mode = self.config.mode;
        let tcfg = self.train_config(baseline, prediction);
        tcfg.validate()?;
        let pairs = self.load_split_for(mode, split)?;
        let (mut model, summary) = self.fit_encoder(&pairs, mode, fields, &tcfg)?;
        model.meta = self
            .meta(&[
                ("mode", mode.to_string()),
                ("baseline", baseline.to_string()),
                ("tau", summary.tau.to_string()),
            ])
            .into_iter()
            .collect();
        model.save(out)?;
        let mut hist = self.text_header(&[("mode", mode.to_string())]);
        hist.push_str("# epoch\tmean_loss\ttau\tmean_label\tdev_map5\n");
        for h in &summary.history {
            let dev = h.dev_map5.map_or("NA".to_string(), |v| v.to_string());
            let _ = writeln!(hist, "{}\t{}\t{}\t{}\t{dev}", h.epoch, h.mean_loss, h.tau, h.mean_label);
        }
        write_atomic(&sidecar(out, "history.tsv"), hist.as_bytes())?;
        Ok(summary)
    }

    /// For each threshold: rebuild the split, train, and score MAP@5 of the
    /// encoder on the dev queries (test queries when no dev set is given).
    pub fn cmd_sweep(&self, thresholds: &[f64], fields: FieldCombo, out: &Path) -> Result<Vec<SweepRow>> {
        let norm = self.norm()?;
        let scored = self.score_pairs()?;
        let eval_set = if self.config.paths.dev_queries.is_some() {
            QuerySet::Dev
        } else {
            QuerySet::Test
        };
        let queries = self.queries(&eval_set)?;
        let qrels = self.qrels()?.restrict(queries.iter().map(|(q, _)| q.as_str()));
        let articles = self.articles()?;
        let tcfg = self.train_config(false, None);
        let mut rows = Vec::new();
        for &th in thresholds {
            let split = match build_split(&scored, self.config.label.strategy, th) {
                Ok(s) => s,
                Err(Error::EmptySplit { .. }) => Vec::new(),
                Err(e) => return Err(e),
            };
            let map5 = if split.is_empty() && !self.config.mode.uses_gold() {
                None
            } else {
                let (model, _) = self.fit_encoder(&split, self.config.mode, fields, &tcfg)?;
                let emb = ArticleEmbeddings::build(&model, &articles, &norm)?;
                let r = Retriever::Encoder(Box::new(model), emb);
                let runs = r.rank_all(&queries, &norm, self.config.retrieval.topk)?;
                Some(evaluate(&runs, &qrels)?.map_at(5))
            };
            rows.push(SweepRow {
                threshold: th,
                pairs: split.len(),
                map5,
            });
        }
        let mut text = self.text_header(&[
            ("strategy", self.config.label.strategy.to_string()),
            ("eval", eval_set.name()),
        ]);
        text.push_str("# threshold\tpairs\tmap5\n");
        for r in &rows {
            let m = r.map5.map_or("NA".to_string(), |v| format!("{v:.6}"));
            let _ = writeln!(text, "{}\t{}\t{m}", r.threshold, r.pairs);
        }
        write_atomic(out, text.as_bytes())?;
        Ok(rows)
    }

    pub fn retriever(&self, kind: RetrieverKind, fields: FieldCombo, encoder: Option<&Path>) -> Result<Retriever> {
        let norm = self.norm()?;
        let articles = self.articles()?;
        Ok(match kind {
            RetrieverKind::Bm25 => Retriever::Bm25(InvertedIndex::build(
                &articles,
                fields,
                &norm,
                self.config.retrieval.bm25,
            )?),
            RetrieverKind::Tfidf => Retriever::Tfidf(TfIdfModel::build(&articles, fields, &norm)?),
            RetrieverKind::Encoder => {
                let path = encoder.map_or_else(|| self.encoder_path(fields), Path::to_path_buf);
                let model = EncoderModel::load(path)?;
                model.check_norm(&norm)?;
                let emb = ArticleEmbeddings::build(&model, &articles, &norm)?;
                Retriever::Encoder(Box::new(model), emb)
            }
        })
    }

    pub fn cmd_retrieve(
        &self,
        kind: RetrieverKind,
        fields: FieldCombo,
        queries: &QuerySet,
        encoder: Option<&Path>,
        out: &Path,
    ) -> Result<Vec<RankedList>> {
        let norm = self.norm()?;
        let r = self.retriever(kind, fields, encoder)?;
        let runs = r.rank_all(&self.queries(queries)?, &norm, self.config.retrieval.topk)?;
        let tag = format!("{kind}_{fields}");
        let text = self.text_header(&[("model", tag.clone()), ("queries", queries.name())])
            + &write_predictions(&runs, &tag);
        write_atomic(out, text.as_bytes())?;
        Ok(runs)
    }

    pub fn layout(&self) -> Result<FeatureLayout> {
        let scorers = self
            .config
            .rerank
            .scorers
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<ScorerKey>>>()?;
        if scorers.is_empty() {
            return Err(Error::Config("rerank.scorers is empty".into()));
        }
        Ok(FeatureLayout::new(scorers))
    }

    /// Feature rows for the top candidates of the primary scorer. Encoders
    /// are read from `encoder_<fields>.json` in the output directory unless
    /// given in `encoders`.
    pub fn features(&self, queries: &QuerySet, encoders: &BTreeMap<FieldCombo, PathBuf>) -> Result<FeatureSet> {
        let norm = self.norm()?;
        let layout = self.layout()?;
        let primary: ScorerKey = self.config.rerank.primary.parse()?;
        let articles = self.articles()?;
        let n = articles.len();
        let queries = self.queries(queries)?;
        let mut keys = layout.scorers.clone();
        if !keys.contains(&primary) {
            keys.push(primary);
        }
        let mut full: BTreeMap<ScorerKey, Vec<RankedList>> = BTreeMap::new();
        for key in keys {
            let kind = match key.kind {
                ScorerKind::Tfidf => RetrieverKind::Tfidf,
                ScorerKind::Encoder => RetrieverKind::Encoder,
            };
            let r = self.retriever(kind, key.fields, encoders.get(&key.fields).map(PathBuf::as_path))?;
            full.insert(key, r.rank_all(&queries, &norm, n)?);
        }
        let mut rows = Vec::new();
        for (i, _) in queries.iter().enumerate() {
            let per_query: BTreeMap<ScorerKey, RankedList> =
                full.iter().map(|(k, runs)| (*k, runs[i].clone())).collect();
            rows.extend(build_features(
                &per_query[&primary],
                &per_query,
                &layout,
                self.config.rerank.top_k,
            )?);
        }
        Ok(FeatureSet { layout, rows })
    }

    pub fn cmd_features(
        &self,
        queries: &QuerySet,
        encoders: &BTreeMap<FieldCombo, PathBuf>,
        out: &Path,
    ) -> Result<FeatureSet> {
        let fs = self.features(queries, encoders)?;
        let text = self.text_header(&[
            ("queries", queries.name()),
            ("primary", self.config.rerank.primary.clone()),
        ]) + &fs.to_tsv();
        write_atomic(out, text.as_bytes())?;
        Ok(fs)
    }

    pub fn cmd_rerank_train(&self, features: &Path, out: &Path) -> Result<GbdtModel> {
        let fs = FeatureSet::load(features)?;
        let mut model = train_lambdamart(&fs, &self.qrels()?, &self.config.rerank.lambdamart)?;
        model.meta = self.meta(&[]).into_iter().collect();
        model.save(out)?;
        Ok(model)
    }

    pub fn cmd_rerank(&self, features: &Path, model: &Path, topk: Option<usize>, out: &Path) -> Result<Vec<RankedList>> {
        let fs = FeatureSet::load(features)?;
        let model = GbdtModel::load(model)?;
        let mut runs = rerank_all(&model, &fs)?;
        if let Some(k) = topk {
            runs.iter_mut().for_each(|r| r.truncate(k));
        }
        let text = self.text_header(&[("layout", fs.layout.tag())]) + &write_predictions(&runs, "rerank");
        write_atomic(out, text.as_bytes())?;
        Ok(runs)
    }

    /// Metrics JSON keyed by run name (the file stem); the text table is
    /// returned for display. With `queries`, judgments are restricted to
    /// that query set.
    pub fn cmd_evaluate(
        &self,
        runs: &[PathBuf],
        queries: Option<&QuerySet>,
        out: &Path,
    ) -> Result<(Vec<(String, EvalReport)>, String)> {
        let mut qrels = self.qrels()?;
        if let Some(q) = queries {
            let ids = self.queries(q)?;
            qrels = qrels.restrict(ids.iter().map(|(id, _)| id.as_str()));
        }
        let mut reports = Vec::new();
        for p in runs {
            let name = p.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
            reports.push((name, evaluate(&read_predictions(p)?, &qrels)?));
        }
        let metrics: serde_json::Map<String, serde_json::Value> =
            reports.iter().map(|(n, r)| (n.clone(), r.to_json())).collect();
        let value = serde_json::json!({
            "meta": self.json_meta(&[]),
            "metrics": metrics,
        });
        self.write_json(out, &value)?;
        let rows: Vec<(&str, &EvalReport)> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
        let table = EvalReport::table(&rows);
        Ok((reports, table))
    }

    /// Agreement over `item<TAB>label<TAB>label…` rows (one column per
    /// rater). Writes Fleiss' kappa and Cohen's kappa for each rater pair.
    pub fn cmd_kappa(&self, annotations: &Path, out: &Path) -> Result<serde_json::Value> {
        let text = std::fs::read_to_string(annotations).map_err(|e| Error::io(annotations, e))?;
        let labels = parse_rater_rows(&text)?;
        let fleiss = fleiss_kappa(&rating_counts(&labels))?;
        let raters = labels[0].len();
        let mut pairs = serde_json::Map::new();
        for a in 0..raters {
            for b in a + 1..raters {
                let la: Vec<&String> = labels.iter().map(|r| &r[a]).collect();
                let lb: Vec<&String> = labels.iter().map(|r| &r[b]).collect();
                let k = cohen_kappa(&la, &lb).map_or(serde_json::Value::Null, |k| k.into());
                pairs.insert(format!("{}-{}", a + 1, b + 1), k);
            }
        }
        let value = serde_json::json!({
            "meta": self.json_meta(&[]),
            "items": labels.len(),
            "raters": raters,
            "fleiss": fleiss,
            "cohen": pairs,
        });
        self.write_json(out, &value)?;
        Ok(value)
    }
}

/// `out.json` → `out.<suffix>`
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map_or("out".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// `tweet_id<TAB>article_url<TAB>0|1` lines.
pub fn parse_annotations(text: &str) -> Result<BTreeMap<(String, String), bool>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        let ok = match cols.as_slice() {
            [_, _, "1"] => true,
            [_, _, "0"] => false,
            _ => {
                return Err(Error::Format(format!(
                    "annotations line {}: expected tweet_id, article_url, 0|1",
                    no + 1
                )))
            }
        };
        out.insert((cols[0].to_string(), cols[1].to_string()), ok);
    }
    Ok(out)
}

/// `item<TAB>label…` rows; every row must have the same rater count.
pub fn parse_rater_rows(text: &str) -> Result<Vec<Vec<String>>> {
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<String> = line
            .trim_end_matches('\r')
            .split('\t')
            .skip(1)
            .map(|s| s.trim().to_string())
            .collect();
        if cols.len() < 2 {
            return Err(Error::Format(format!("annotations line {}: need two or more raters", no + 1)));
        }
        if rows.first().is_some_and(|r| r.len() != cols.len()) {
            return Err(Error::Format(format!("annotations line {}: rater count differs", no + 1)));
        }
        rows.push(cols);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_seed() {
        let cfg = PipelineConfig::from_toml(
            "seed = 7\n[train]\nlr = 0.01\n",
            &["label.threshold=0.5".into(), "mode=mix".into(), "paths.out_dir=x/y".into()],
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.encoder.seed, 7);
        assert_eq!(cfg.train.lr, 0.01);
        assert_eq!(cfg.label.threshold, 0.5);
        assert_eq!(cfg.mode, TrainMode::Mix);
        assert_eq!(cfg.paths.out_dir, PathBuf::from("x/y"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = PipelineConfig::from_toml("[train]\nlearning_rate = 1\n", &[]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(PipelineConfig::from_toml("", &["nope".into()]).is_err());
    }

    #[test]
    fn config_roundtrip_and_hash() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&cfg.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        assert_eq!(cfg.hash().unwrap().len(), 16);
        let other = PipelineConfig::from_toml("", &["seed=1".into()]).unwrap();
        assert_ne!(other.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn rater_rows() {
        let rows = parse_rater_rows("# x\na\t1\t1\nb\t0\t1\n").unwrap();
        assert_eq!(rows, vec![vec!["1", "1"], vec!["0", "1"]]);
        assert!(parse_rater_rows("a\t1\t1\nb\t0\n").is_err());
        assert!(parse_rater_rows("a\t1\n").is_err());
    }

    #[test]
    fn annotations() {
        let m = parse_annotations("1\thttp://a\t1\n2\thttp://b\t0\n").unwrap();
        assert!(m[&("1".to_string(), "http://a".to_string())]);
        assert!(parse_annotations("1\thttp://a\tyes\n").is_err());
    }

    #[test]
    fn mode_names() {
        for m in [TrainMode::OnlyCrowd, TrainMode::OnlyGold, TrainMode::Seq, TrainMode::Mix] {
            assert_eq!(m.as_str().parse::<TrainMode>().unwrap(), m);
        }
    }
}
