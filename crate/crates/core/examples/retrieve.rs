//! Lexical baselines on the mini-corpus test queries: BM25 and TF.IDF over
//! each article field combination.

use std::path::Path;

use claimmatch::corpus::{load_articles, load_queries, Qrels};
use claimmatch::evalmetrics::{evaluate, EvalReport};
use claimmatch::retrieval::{Bm25Params, FieldCombo, InvertedIndex, TfIdfModel};
use claimmatch::textnorm::{normalize, NormConfig};

fn main() -> claimmatch::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let cfg = NormConfig::default();
    let articles = load_articles(dir.join("articles.jsonl"))?;
    let queries = load_queries(dir.join("queries_test.tsv"))?;
    let qrels = Qrels::load(dir.join("qrels.tsv"))?.restrict(queries.iter().map(|(q, _)| q.as_str()));

    let mut reports = Vec::new();
    for fields in FieldCombo::ALL {
        let bm25 = InvertedIndex::build(&articles, fields, &cfg, Bm25Params::default())?;
        let tfidf = TfIdfModel::build(&articles, fields, &cfg)?;
        let mut bm25_runs = Vec::new();
        let mut tfidf_runs = Vec::new();
        for (id, text) in &queries {
            let q = normalize(text, &cfg);
            bm25_runs.push(bm25.bm25_rank(id, &q, 20)?);
            tfidf_runs.push(tfidf.rank(id, &q, 20)?);
        }
        reports.push((format!("bm25_{fields}"), evaluate(&bm25_runs, &qrels)?));
        reports.push((format!("tfidf_{fields}"), evaluate(&tfidf_runs, &qrels)?));
    }
    let rows: Vec<(&str, &EvalReport)> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
    print!("{}", EvalReport::table(&rows));
    Ok(())
}
