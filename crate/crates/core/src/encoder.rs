//! Siamese bag-of-embeddings bi-encoder.
//!
//! Both sides share one parameter set: token embeddings are mean-pooled
//! (special tokens included), passed through one affine projection and
//! L2-normalized onto the unit sphere.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::FactCheckArticle;
use crate::error::{Error, Result};
use crate::retrieval::FieldCombo;
use crate::textnorm::{normalize, NormConfig, NormSummary, TokenList};

pub const CLS: u32 = 0;
pub const SEP: u32 = 1;
const NUM_SPECIALS: u32 = 2;

/// Bump when the serialized layout changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// 64-bit FNV-1a; stable across platforms and releases.
fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Token to row mapping. Frequent tokens get dedicated rows, the rest share
/// hashing buckets. Rows 0 and 1 are `[CLS]` and `[SEP]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: BTreeMap<String, u32>,
    hash_buckets: u32,
    min_count: usize,
}

impl Vocab {
    pub fn build<'a, I>(corpus: I, min_count: usize, hash_buckets: u32) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TokenList>,
    {
        if min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for list in corpus {
            for t in list {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let tokens = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .enumerate()
            .map(|(i, (t, _))| (t.to_string(), NUM_SPECIALS + i as u32))
            .collect();
        Ok(Vocab {
            tokens,
            hash_buckets,
            min_count,
        })
    }

    /// Total number of embedding rows.
    pub fn size(&self) -> usize {
        NUM_SPECIALS as usize + self.tokens.len() + self.hash_buckets as usize
    }

    pub fn dedicated(&self) -> usize {
        self.tokens.len()
    }

    pub fn hash_buckets(&self) -> u32 {
        self.hash_buckets
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains_key(token)
    }

    /// Row for a token; `None` only for out-of-vocabulary tokens when there
    /// are no hashing buckets.
    pub fn id(&self, token: &str) -> Option<u32> {
        if let Some(&id) = self.tokens.get(token) {
            return Some(id);
        }
        if self.hash_buckets == 0 {
            return None;
        }
        let offset = NUM_SPECIALS + self.tokens.len() as u32;
        Some(offset + (fnv1a(token) % self.hash_buckets as u64) as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Tweet,
    Article,
}

/// Token rows laid out as `[CLS] seg [SEP] seg [SEP] …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub ids: Vec<u32>,
    pub side: Side,
}

impl EncodedInput {
    pub fn from_ids(ids: Vec<u32>, side: Side) -> Self {
        EncodedInput { ids, side }
    }
}

/// Lay out segments with special tokens, dropping tokens one at a time
/// from the end of the currently longest segment until the whole input
/// fits in `max_seq`.
pub fn layout_segments(mut segments: Vec<Vec<u32>>, max_seq: usize, side: Side) -> EncodedInput {
    let specials = segments.len() + 1;
    let budget = max_seq.saturating_sub(specials);
    let mut total: usize = segments.iter().map(Vec::len).sum();
    while total > budget {
        let longest = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("non-empty when over budget");
        segments[longest].pop();
        total -= 1;
    }
    if max_seq < specials {
        return EncodedInput::from_ids(Vec::new(), side);
    }
    let mut ids = Vec::with_capacity(total + specials);
    ids.push(CLS);
    for seg in segments {
        ids.extend(seg);
        ids.push(SEP);
    }
    EncodedInput { ids, side }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    /// Embedding width.
    pub dim: usize,
    /// Output width.
    pub hidden: usize,
    pub max_seq: usize,
    pub min_count: usize,
    pub hash_buckets: u32,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            dim: 64,
            hidden: 64,
            max_seq: 128,
            min_count: 1,
            hash_buckets: 256,
            init_scale: 0.05,
            seed: 42,
        }
    }
}

/// Cached activations for one encoded input.
#[derive(Debug, Clone)]
pub struct Forward {
    ids: Vec<u32>,
    pooled: Array1<f64>,
    norm: f64,
    pub output: Array1<f64>,
}

/// Parameter gradients; embedding rows are kept sparse.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub embeddings: BTreeMap<u32, Array1<f64>>,
    pub projection: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Gradients {
    pub fn zeros(model: &EncoderModel) -> Self {
        Gradients {
            embeddings: BTreeMap::new(),
            projection: Array2::zeros(model.projection.raw_dim()),
            bias: Array1::zeros(model.bias.raw_dim()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.projection.iter().all(|x| x.is_finite())
            && self.bias.iter().all(|x| x.is_finite())
            && self.embeddings.values().all(|r| r.iter().all(|x| x.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub vocab: Vocab,
    pub fields: FieldCombo,
    pub config: EncoderConfig,
    pub norm: NormSummary,
    /// `vocab.size() × dim`
    pub embeddings: Array2<f64>,
    /// `dim × hidden`
    pub projection: Array2<f64>,
    pub bias: Array1<f64>,
    /// Free-form provenance (config hash, seed, …).
    pub meta: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    vocab: Vocab,
    fields: FieldCombo,
    config: EncoderConfig,
    norm: NormSummary,
    norm_hash: String,
    embeddings: Vec<f64>,
    projection: Vec<f64>,
    bias: Vec<f64>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

impl EncoderModel {
    /// Fresh model with seeded random parameters.
    pub fn init(vocab: Vocab, fields: FieldCombo, config: EncoderConfig, norm: &NormConfig) -> Result<Self> {
        if config.dim == 0 || config.hidden == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if config.max_seq < 4 {
            return Err(Error::Config("max_seq must be at least 4".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let s = config.init_scale;
        let embeddings = Array2::from_shape_simple_fn((vocab.size(), config.dim), || rng.gen_range(-s..s));
        let p = (3.0 / config.dim as f64).sqrt();
        let projection = Array2::from_shape_simple_fn((config.dim, config.hidden), || rng.gen_range(-p..p));
        Ok(EncoderModel {
            vocab,
            fields,
            config,
            norm: norm.summary(),
            embeddings,
            projection,
            bias: Array1::zeros(config.hidden),
            meta: BTreeMap::new(),
        })
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    fn ids(&self, tokens: &TokenList) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.vocab.id(t)).collect()
    }

    pub fn tweet_input(&self, tokens: &TokenList) -> EncodedInput {
        layout_segments(vec![self.ids(tokens)], self.config.max_seq, Side::Tweet)
    }

    /// Lay out pre-normalized segments.
    pub fn segments_input(&self, segments: &[&TokenList], side: Side) -> EncodedInput {
        let segs = segments.iter().map(|s| self.ids(s)).collect();
        layout_segments(segs, self.config.max_seq, side)
    }

    /// Article segments for this model's field layout: `claim`,
    /// `title [SEP] claim`, or `title [SEP] subtitle [SEP] claim`.
    pub fn article_input(&self, article: &FactCheckArticle, cfg: &NormConfig) -> EncodedInput {
        let n = |s: &str| self.ids(&normalize(s, cfg));
        let segments = match self.fields {
            FieldCombo::C => vec![n(&article.claim)],
            FieldCombo::Ct => vec![n(&article.title), n(&article.claim)],
            FieldCombo::Cts => vec![n(&article.title), n(&article.subtitle), n(&article.claim)],
        };
        layout_segments(segments, self.config.max_seq, Side::Article)
    }

    pub fn text_input(&self, text: &str, cfg: &NormConfig) -> EncodedInput {
        self.tweet_input(&normalize(text, cfg))
    }

    pub fn forward(&self, input: &EncodedInput) -> Result<Forward> {
        if input.ids.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut pooled = Array1::zeros(self.config.dim);
        for &id in &input.ids {
            let row = self
                .embeddings
                .get((id as usize, 0))
                .map(|_| self.embeddings.row(id as usize))
                .ok_or_else(|| Error::Format(format!("token row {id} out of range")))?;
            pooled += &row;
        }
        pooled /= input.ids.len() as f64;
        let z = pooled.dot(&self.projection) + &self.bias;
        let norm = z.dot(&z).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical(format!("projection norm {norm}")));
        }
        let output = &z / norm;
        Ok(Forward {
            ids: input.ids.clone(),
            pooled,
            norm,
            output,
        })
    }

    /// Unit-norm embedding.
    pub fn encode(&self, input: &EncodedInput) -> Result<Array1<f64>> {
        Ok(self.forward(input)?.output)
    }

    /// Cosine similarity of two inputs.
    pub fn similarity(&self, a: &EncodedInput, b: &EncodedInput) -> Result<f64> {
        Ok(self.encode(a)?.dot(&self.encode(b)?))
    }

    /// Accumulate parameter gradients given the gradient w.r.t. the output.
    pub fn backward(&self, fwd: &Forward, grad_out: ArrayView1<f64>, grads: &mut Gradients) {
        let u = &fwd.output;
        let dz = (&grad_out - &(u * u.dot(&grad_out))) / fwd.norm;
        let outer = fwd
            .pooled
            .view()
            .insert_axis(Axis(1))
            .dot(&dz.view().insert_axis(Axis(0)));
        grads.projection += &outer;
        grads.bias += &dz;
        let dp = self.projection.dot(&dz) / fwd.ids.len() as f64;
        for &id in &fwd.ids {
            grads
                .embeddings
                .entry(id)
                .and_modify(|g| *g += &dp)
                .or_insert_with(|| dp.clone());
        }
    }

    pub fn all_finite(&self) -> bool {
        self.embeddings.iter().all(|x| x.is_finite())
            && self.projection.iter().all(|x| x.is_finite())
            && self.bias.iter().all(|x| x.is_finite())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            vocab: self.vocab.clone(),
            fields: self.fields,
            config: self.config,
            norm: self.norm.clone(),
            norm_hash: norm_hash_of(&self.norm),
            embeddings: self.embeddings.iter().copied().collect(),
            projection: self.projection.iter().copied().collect(),
            bias: self.bias.to_vec(),
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        if f.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported encoder format version {}",
                f.format_version
            )));
        }
        let shape_err = |what: &str| Error::Format(format!("bad {what} shape in encoder file"));
        let embeddings = Array2::from_shape_vec((f.vocab.size(), f.config.dim), f.embeddings)
            .map_err(|_| shape_err("embedding"))?;
        let projection = Array2::from_shape_vec((f.config.dim, f.config.hidden), f.projection)
            .map_err(|_| shape_err("projection"))?;
        if f.bias.len() != f.config.hidden {
            return Err(shape_err("bias"));
        }
        Ok(EncoderModel {
            vocab: f.vocab,
            fields: f.fields,
            config: f.config,
            norm: f.norm,
            embeddings,
            projection,
            bias: Array1::from(f.bias),
            meta: f.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Fail unless the model was trained with the same normalization.
    pub fn check_norm(&self, cfg: &NormConfig) -> Result<()> {
        if self.norm != cfg.summary() {
            return Err(Error::Config(
                "encoder was trained with a different normalization config".into(),
            ));
        }
        Ok(())
    }
}

fn norm_hash_of(s: &NormSummary) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(s.stopwords_hash.as_bytes());
    h.update([s.strip_handles as u8, s.stem as u8]);
    hex::encode(&h.finalize()[..8])
}

/// Precomputed article embeddings for ranking.
#[derive(Debug, Clone)]
pub struct ArticleEmbeddings {
    pub ids: Vec<String>,
    pub vectors: Array2<f64>,
}

impl ArticleEmbeddings {
    /// Embed articles sorted by URL.
    pub fn build(model: &EncoderModel, articles: &[FactCheckArticle], cfg: &NormConfig) -> Result<Self> {
        let mut sorted: Vec<&FactCheckArticle> = articles.iter().collect();
        sorted.sort_by(|a, b| a.url.cmp(&b.url));
        let mut vectors = Array2::zeros((sorted.len(), model.hidden()));
        for (i, a) in sorted.iter().enumerate() {
            vectors.row_mut(i).assign(&model.encode(&model.article_input(a, cfg))?);
        }
        Ok(ArticleEmbeddings {
            ids: sorted.into_iter().map(|a| a.url.clone()).collect(),
            vectors,
        })
    }

    pub fn scores(&self, query: &Array1<f64>) -> Vec<f64> {
        self.vectors.dot(query).to_vec()
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }
}
