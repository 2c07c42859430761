use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use scraper::{Html, Selector};

use super::{canonical_url, FactCheckArticle};
use crate::error::{Error, Result};

/// One extraction rule: a CSS selector plus the attribute to read, or the
/// element text when `attr` is `None`.
struct Rule {
    selector: &'static str,
    attr: Option<&'static str>,
}

const fn attr(selector: &'static str, attr: &'static str) -> Rule {
    Rule {
        selector,
        attr: Some(attr),
    }
}

const fn text(selector: &'static str) -> Rule {
    Rule {
        selector,
        attr: None,
    }
}

const TITLE: &[Rule] = &[
    attr(r#"meta[property="og:title"]"#, "content"),
    attr(r#"meta[name="twitter:title"]"#, "content"),
    text("h1.title"),
    text("article h1"),
    text("h1"),
    text("title"),
];

const SUBTITLE: &[Rule] = &[
    attr(r#"meta[property="og:description"]"#, "content"),
    attr(r#"meta[name="description"]"#, "content"),
    text("h2.subtitle"),
    text(".subtitle"),
];

const CLAIM: &[Rule] = &[
    attr(r#"[itemprop="claimReviewed"][content]"#, "content"),
    text(r#"[itemprop="claimReviewed"]"#),
    text(".claim-text"),
    text(".claim p"),
    text(".claim"),
];

const DATE: &[Rule] = &[
    attr(r#"meta[property="article:published_time"]"#, "content"),
    attr(r#"meta[itemprop="datePublished"]"#, "content"),
    attr("time[datetime]", "datetime"),
    text(r#"[itemprop="datePublished"]"#),
];

const AUTHOR: &[Rule] = &[
    attr(r#"meta[name="author"]"#, "content"),
    text(r#"[itemprop="author"] [itemprop="name"]"#),
    text(r#"a[rel="author"]"#),
    text(".author-name"),
    text(".author"),
];

static TITLE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<title[^>]*>(.*?)</title>").expect("title regex"));
static CLAIM_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?is)\bclaim\s*:\s*(?:</?[a-z][^>]*>\s*)*([^<]+)").expect("claim regex")
});
static DATE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b(\d{4})-(\d{2})-(\d{2})\b").expect("date regex"));
static AUTHOR_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b[Bb]y:?\s+([A-Z][\w.'-]+(?: [A-Z][\w.'-]+){0,3})")
        .expect("author regex")
});
static TAG_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<[^>]*>").expect("tag regex"));

fn clean(s: &str) -> String {
    TAG_RE
        .replace_all(s, " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn first_match(doc: &Html, rules: &[Rule]) -> Option<String> {
    for rule in rules {
        let selector = Selector::parse(rule.selector).expect("static selector");
        for el in doc.select(&selector) {
            let value = match rule.attr {
                Some(a) => el.value().attr(a).map(clean),
                None => Some(clean(&el.text().collect::<String>())),
            };
            if let Some(v) = value.filter(|v| !v.is_empty()) {
                return Some(v);
            }
        }
    }
    None
}

fn iso_date(raw: &str) -> Option<String> {
    DATE_RE
        .captures(raw)
        .map(|c| format!("{}-{}-{}", &c[1], &c[2], &c[3]))
}

/// Extract title, subtitle, claim, date and author from a stored page.
///
/// Selector rules are tried first, then regex fallbacks over the raw
/// markup. Missing optional fields come back empty. Only a missing title
/// is an error.
pub fn parse_article_html(html: &str, url: &str) -> Result<FactCheckArticle> {
    let doc = Html::parse_document(html);

    let title = first_match(&doc, TITLE)
        .or_else(|| {
            TITLE_RE
                .captures(html)
                .map(|c| clean(&c[1]))
                .filter(|t| !t.is_empty())
        })
        .ok_or_else(|| Error::Parse(format!("no title found for {url}")))?;

    let subtitle = first_match(&doc, SUBTITLE).unwrap_or_default();

    let claim = first_match(&doc, CLAIM)
        .or_else(|| CLAIM_RE.captures(html).map(|c| clean(&c[1])))
        .unwrap_or_default();

    let date = first_match(&doc, DATE)
        .as_deref()
        .and_then(iso_date)
        .or_else(|| iso_date(html));

    let author = first_match(&doc, AUTHOR).or_else(|| {
        let body_text = clean(html);
        AUTHOR_RE.captures(&body_text).map(|c| c[1].to_string())
    });

    Ok(FactCheckArticle {
        url: canonical_url(url),
        title,
        subtitle,
        claim,
        date,
        author,
    })
}

fn page_url(html: &str) -> Option<String> {
    let doc = Html::parse_document(html);
    first_match(
        &doc,
        &[
            attr(r#"link[rel="canonical"]"#, "href"),
            attr(r#"meta[property="og:url"]"#, "content"),
        ],
    )
}

/// Parse every `*.html` file in a directory, sorted by file name. The
/// article URL comes from the page's canonical link, falling back to the
/// file stem.
pub fn load_article_dir(dir: &Path) -> Result<Vec<FactCheckArticle>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "html" || x == "htm"))
        .collect();
    paths.sort();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for path in paths {
        let html = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let url = page_url(&html).unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
        let article = parse_article_html(&html, &url)?;
        if seen.insert(article.url.clone()) {
            out.push(article);
        }
    }
    Ok(out)
}
