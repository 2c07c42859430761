//! The whole pipeline on the mini-corpus, as the CLI runs it: label, train
//! one encoder per field combo, retrieve, build features, fit and apply
//! the re-ranker, evaluate. Outputs go to a temporary directory.

use std::collections::BTreeMap;
use std::path::Path;

use claimmatch::pipeline::{Pipeline, QuerySet, RetrieverKind};
use claimmatch::retrieval::FieldCombo;

fn main() -> claimmatch::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let tmp = tempfile::tempdir().map_err(|e| claimmatch::Error::io(Path::new("tmp"), e))?;
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42u64);
    let sets = [format!("paths.out_dir=\"{}\"", tmp.path().display()), format!("seed={seed}")];
    let p = Pipeline::load(Some(&dir.join("config.toml")), &sets)?;
    println!("config hash {}", p.hash());

    let (scored, kept) = p.cmd_label(&p.out_path("split.tsv"), None)?;
    println!("label: {kept} of {scored} pairs");
    for f in FieldCombo::ALL {
        let s = p.cmd_train(f, None, false, None, &p.encoder_path(f))?;
        println!("train {f}: tau {:.3}, {} epochs", s.tau, s.history.len());
    }
    let mut runs = Vec::new();
    for kind in [RetrieverKind::Bm25, RetrieverKind::Tfidf, RetrieverKind::Encoder] {
        let path = p.out_path(&format!("{kind}_cts.tsv"));
        p.cmd_retrieve(kind, FieldCombo::Cts, &QuerySet::Test, None, &path)?;
        runs.push(path);
    }
    let none = BTreeMap::new();
    p.cmd_features(&QuerySet::Rerank, &none, &p.out_path("features_rerank.tsv"))?;
    p.cmd_features(&QuerySet::Test, &none, &p.out_path("features_test.tsv"))?;
    let model = p.cmd_rerank_train(&p.out_path("features_rerank.tsv"), &p.out_path("reranker.json"))?;
    println!("re-ranker: {} trees", model.trees.len());
    let reranked = p.out_path("lambdamart.tsv");
    p.cmd_rerank(&p.out_path("features_test.tsv"), &p.out_path("reranker.json"), None, &reranked)?;
    runs.push(reranked);
    let (_, table) = p.cmd_evaluate(&runs, Some(&QuerySet::Test), &p.out_path("metrics.json"))?;
    print!("{table}");
    Ok(())
}
