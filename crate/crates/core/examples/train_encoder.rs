//! Train bi-encoders on the mini-corpus under each supervision mode and
//! compare test MAP@5 with BM25.

use std::path::Path;

use claimmatch::distsup::read_split;
use claimmatch::evalmetrics::evaluate;
use claimmatch::pipeline::{Pipeline, QuerySet, Retriever, RetrieverKind, TrainMode};
use claimmatch::encoder::ArticleEmbeddings;
use claimmatch::retrieval::FieldCombo;

fn main() -> claimmatch::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let out = tempfile::tempdir().map_err(|e| claimmatch::Error::io(Path::new("tmp"), e))?;
    let set = format!("paths.out_dir=\"{}\"", out.path().display());
    let p = Pipeline::load(Some(&dir.join("config.toml")), &[set])?;
    let norm = p.norm()?;
    let articles = p.articles()?;
    let queries = p.queries(&QuerySet::Test)?;
    let qrels = p.qrels()?.restrict(queries.iter().map(|(q, _)| q.as_str()));

    let split_path = out.path().join("split.tsv");
    let (scored, kept) = p.cmd_label(&split_path, None)?;
    println!("distant supervision kept {kept} of {scored} crowd pairs");
    let split = read_split(&split_path)?;

    let bm25 = p.retriever(RetrieverKind::Bm25, FieldCombo::Cts, None)?;
    let base = evaluate(&bm25.rank_all(&queries, &norm, 50)?, &qrels)?.map_at(5);
    println!("bm25        MAP@5 {base:.4}");
    for mode in [TrainMode::OnlyCrowd, TrainMode::OnlyGold, TrainMode::Seq, TrainMode::Mix] {
        let (model, summary) = p.fit_encoder(&split, mode, FieldCombo::Cts, &p.config.train)?;
        let emb = ArticleEmbeddings::build(&model, &articles, &norm)?;
        let r = Retriever::Encoder(Box::new(model), emb);
        let map5 = evaluate(&r.rank_all(&queries, &norm, 50)?, &qrels)?.map_at(5);
        println!(
            "{:<11} MAP@5 {map5:.4} ({} crowd + {} gold pairs, final tau {:.3})",
            mode.as_str(),
            summary.crowd_pairs,
            summary.gold_pairs,
            summary.tau
        );
    }
    Ok(())
}
