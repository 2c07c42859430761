//! Tweet-aware text normalization.
//!
//! The pipeline is fixed: lowercase, remove URLs, collapse every digit run
//! to `0`, tokenize (emoticons, handles and hashtags stay single units),
//! strip handles, drop stopwords, emoticons and punctuation-only tokens,
//! then Porter-stem what remains.

pub mod porter;

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use porter::stem;

/// The bundled English stopword list.
pub const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

static URL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:https?://|www\.)\S+|\bt\.co/\S*").expect("url regex")
});

static DIGITS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[0-9]+").expect("digit regex"));

const EMOTICON: &str = r#"(?:[<>]?[:;=8][\-o\*']?[\)\]\(\[dDpP/\:\}\{@\|\\]|[\)\]\(\[dDpP/\:\}\{@\|\\][\-o\*']?[:;=8][<>]?|<3)"#;

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    let pattern = format!(
        r"(?P<emo>{EMOTICON})|(?P<handle>@\w+)|(?P<hash>#\w+)|(?P<word>\w+(?:['\-]\w+)*)|(?P<ellipsis>\.(?:\s*\.)+)|(?P<other>\S)"
    );
    Regex::new(&pattern).expect("token regex")
});

/// A fixed set of stopwords with a content hash for provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: BTreeSet<String>,
    hash: String,
}

impl Stopwords {
    /// Parse a stopword file: one token per line, `#` comment lines ignored.
    pub fn parse(text: &str) -> Self {
        let words: BTreeSet<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self::from_words(words)
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: BTreeSet<String> = words.into_iter().map(Into::into).collect();
        let mut hasher = Sha256::new();
        for w in &words {
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        let hash = hex::encode(hasher.finalize());
        Stopwords { words, hash }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self::from_words(Vec::<String>::new())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// SHA-256 over the sorted, newline-terminated entries.
    pub fn hash(&self) -> &str {
        &self.hash
    }
}

/// Normalization settings. The stopword list is fixed at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormConfig {
    stopwords: Arc<Stopwords>,
    pub strip_handles: bool,
    pub stem: bool,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig::new(Stopwords::bundled())
    }
}

impl NormConfig {
    pub fn new(stopwords: Stopwords) -> Self {
        NormConfig {
            stopwords: Arc::new(stopwords),
            strip_handles: true,
            stem: true,
        }
    }

    pub fn stopwords(&self) -> &Stopwords {
        &self.stopwords
    }

    /// Hash identifying this configuration in output metadata.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.stopwords.hash().as_bytes());
        hasher.update([self.strip_handles as u8, self.stem as u8]);
        hex::encode(&hasher.finalize()[..8])
    }

    pub fn summary(&self) -> NormSummary {
        NormSummary {
            stopwords_hash: self.stopwords.hash().to_string(),
            stopword_count: self.stopwords.len(),
            strip_handles: self.strip_handles,
            stem: self.stem,
        }
    }
}

/// Serializable description of a [`NormConfig`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormSummary {
    pub stopwords_hash: String,
    pub stopword_count: usize,
    pub strip_handles: bool,
    pub stem: bool,
}

/// Ordered normalized tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenList(pub Vec<String>);

impl TokenList {
    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn unique(&self) -> HashSet<&str> {
        self.0.iter().map(String::as_str).collect()
    }

    pub fn join(&self, sep: &str) -> String {
        self.0.join(sep)
    }
}

impl From<Vec<&str>> for TokenList {
    fn from(v: Vec<&str>) -> Self {
        TokenList(v.into_iter().map(str::to_string).collect())
    }
}

impl<'a> IntoIterator for &'a TokenList {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Remove `http(s)://…`, `www.…` and bare `t.co/…` spans.
pub fn remove_urls(text: &str) -> String {
    URL_RE.replace_all(text, " ").into_owned()
}

/// Replace every run of ASCII digits with a single `0`.
pub fn collapse_digits(text: &str) -> String {
    DIGITS_RE.replace_all(text, "0").into_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokenKind {
    Emoticon,
    Handle,
    Hashtag,
    Word,
    Punct,
}

fn tokenize(text: &str) -> Vec<(TokenKind, &str)> {
    TOKEN_RE
        .captures_iter(text)
        .map(|caps| {
            let (kind, m) = if let Some(m) = caps.name("emo") {
                (TokenKind::Emoticon, m)
            } else if let Some(m) = caps.name("handle") {
                (TokenKind::Handle, m)
            } else if let Some(m) = caps.name("hash") {
                (TokenKind::Hashtag, m)
            } else if let Some(m) = caps.name("word") {
                (TokenKind::Word, m)
            } else if let Some(m) = caps.name("ellipsis") {
                (TokenKind::Punct, m)
            } else {
                (TokenKind::Punct, caps.name("other").expect("catch-all group"))
            };
            (kind, m.as_str())
        })
        .collect()
}

/// Tweet-aware tokenization of already lowercased text. Exposed for
/// inspection; [`normalize`] is the entry point for everything else.
pub fn tweet_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|(_, t)| t.to_string()).collect()
}

fn is_punctuation_only(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

/// Run the full normalization pipeline over one raw text.
pub fn normalize(text: &str, cfg: &NormConfig) -> TokenList {
    let lowered = text.to_lowercase().replace('’', "'");
    let no_urls = remove_urls(&lowered);
    let digits = collapse_digits(&no_urls);

    let mut out = Vec::new();
    for (kind, raw) in tokenize(&digits) {
        let token = match kind {
            TokenKind::Emoticon | TokenKind::Punct => continue,
            TokenKind::Handle if cfg.strip_handles => continue,
            TokenKind::Handle => raw.trim_start_matches('@'),
            TokenKind::Hashtag => raw.trim_start_matches('#'),
            TokenKind::Word => raw,
        };
        if token.is_empty() || is_punctuation_only(token) || cfg.stopwords.contains(token) {
            continue;
        }
        if cfg.stem {
            out.push(stem(token));
        } else {
            out.push(token.to_string());
        }
    }
    TokenList(out)
}

/// Jaccard similarity of the unique-token sets. Two empty inputs score 0.
pub fn jaccard(a: &TokenList, b: &TokenList) -> f64 {
    let sa = a.unique();
    let sb = b.unique();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}
