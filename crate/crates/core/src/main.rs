use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use claimmatch::distsup::{reference, Strategy, TargetChoice};
use claimmatch::pipeline::{Pipeline, QuerySet, RetrieverKind, TrainMode};
use claimmatch::retrieval::FieldCombo;
use claimmatch::training::Prediction;
use claimmatch::Error;

#[derive(Parser)]
#[command(name = "claimmatch", version, about = "Detect previously fact-checked claims")]
struct Cli {
    /// TOML pipeline config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.lr=1e-4`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Normalize one text per line.
    Normalize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ingestion and length statistics of the tweet dump.
    Stats {
        #[arg(long)]
        tweets: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resolve conversation triples.
    Triples {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distant-supervision split.
    Label {
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        target: Option<TargetChoice>,
        /// Encoder for the cosine strategy.
        #[arg(long)]
        encoder: Option<PathBuf>,
        /// Also write every scored pair here.
        #[arg(long)]
        pairs_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bin scored pairs with optional correctness annotations.
    Bins {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate matching pairs from a bin table.
    Estimate {
        /// Bin table file, or jaccard-reply, jaccard-conversation, cosine.
        #[arg(long, default_value = "cosine")]
        bins: String,
        #[arg(long, default_value_t = reference::TOTAL_PAIRS)]
        total: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a bi-encoder.
    Train {
        #[arg(long)]
        mode: Option<TrainMode>,
        #[arg(long, default_value = "cts")]
        fields: FieldCombo,
        #[arg(long)]
        split: Option<PathBuf>,
        /// Fixed temperature, no refurbishment, no grouping, unweighted.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        prediction: Option<Prediction>,
        /// Comma-separated thresholds; trains once per value and writes a
        /// MAP@5 table instead of a model.
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank articles for a query set.
    Retrieve {
        #[arg(long, default_value = "bm25")]
        model: RetrieverKind,
        #[arg(long, default_value = "cts")]
        fields: FieldCombo,
        #[arg(long)]
        topk: Option<usize>,
        /// train, rerank, test, dev or a queries file.
        #[arg(long, default_value = "test")]
        queries: QuerySet,
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-ranking features for a query set.
    Features {
        #[arg(long, default_value = "rerank")]
        queries: QuerySet,
        /// `fields=path`, e.g. `cts=enc.json`. Repeatable.
        #[arg(long = "encoder", value_parser = parse_encoder_arg)]
        encoders: Vec<(FieldCombo, PathBuf)>,
        #[arg(long)]
        topk: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit LambdaMART on a features file.
    RerankTrain {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-rank a features file.
    Rerank {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        topk: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// MRR, P@K and MAP@K of prediction files.
    Evaluate {
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        qrels: Option<PathBuf>,
        /// Restrict judgments to train, rerank, test, dev or a queries file.
        #[arg(long)]
        queries: Option<QuerySet>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inter-annotator agreement.
    Kappa {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_encoder_arg(s: &str) -> Result<(FieldCombo, PathBuf), String> {
    let (f, p) = s.split_once('=').ok_or("expected fields=path")?;
    Ok((f.parse().map_err(|e: Error| e.to_string())?, PathBuf::from(p)))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn path_str(p: &Path) -> String {
    format!("\"{}\"", p.display().to_string().replace('\\', "\\\\"))
}

fn run(cli: Cli) -> claimmatch::Result<()> {
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(d) = &cli.out_dir {
        overrides.push(format!("paths.out_dir={}", path_str(d)));
    }
    match &cli.cmd {
        Cmd::Stats { tweets: Some(t), .. } => overrides.push(format!("paths.tweets={}", path_str(t))),
        Cmd::Label { strategy, threshold, target, encoder, .. } => {
            if let Some(s) = strategy {
                overrides.push(format!("label.strategy=\"{s}\""));
            }
            if let Some(t) = threshold {
                overrides.push(format!("label.threshold={t:?}"));
            }
            if let Some(t) = target {
                overrides.push(format!("label.target=\"{}\"", format!("{t:?}").to_lowercase()));
            }
            if let Some(e) = encoder {
                overrides.push(format!("paths.label_encoder={}", path_str(e)));
            }
        }
        Cmd::Train { mode: Some(m), .. } => overrides.push(format!("mode=\"{m}\"")),
        Cmd::Retrieve { topk: Some(k), .. } => overrides.push(format!("retrieval.topk={k}")),
        Cmd::Features { topk: Some(k), .. } => overrides.push(format!("rerank.top_k={k}")),
        Cmd::Evaluate { qrels: Some(q), .. } => overrides.push(format!("paths.qrels={}", path_str(q))),
        _ => {}
    }
    let p = Pipeline::load(cli.config.as_deref(), &overrides)?;
    let out_or = |out: &Option<PathBuf>, name: &str| out.clone().unwrap_or_else(|| p.out_path(name));

    match cli.cmd {
        Cmd::Normalize { input, out } => {
            let out = out_or(&out, "normalized.txt");
            p.cmd_normalize(&input, &out)?;
            println!("wrote {}", out.display());
        }
        Cmd::Stats { out, .. } => {
            let out = out_or(&out, "stats.json");
            let v = p.cmd_stats(&out)?;
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
        Cmd::Triples { out } => {
            let out = out_or(&out, "triples.jsonl");
            let n = p.cmd_triples(&out)?;
            println!("{n} triples -> {}", out.display());
        }
        Cmd::Label { pairs_out, out, .. } => {
            let out = out_or(&out, "split.tsv");
            let (scored, kept) = p.cmd_label(&out, pairs_out.as_deref())?;
            println!("{kept} of {scored} pairs kept -> {}", out.display());
        }
        Cmd::Bins { pairs, annotations, out } => {
            let out = out_or(&out, "bins.tsv");
            let t = p.cmd_bins(&pairs, annotations.as_deref(), &out)?;
            print!("{}", t.to_tsv());
        }
        Cmd::Estimate { bins, total, out } => {
            let out = out_or(&out, "estimate.json");
            let e = p.cmd_estimate(&bins, total, &out)?;
            println!("{:.4}% of {total} pairs = {}", e.fraction_pct, e.count);
        }
        Cmd::Train { fields, split, baseline, prediction, thresholds, out, .. } => {
            if thresholds.is_empty() {
                let out = out.unwrap_or_else(|| p.encoder_path(fields));
                let s = p.cmd_train(fields, split.as_deref(), baseline, prediction, &out)?;
                if let Some(last) = s.history.last() {
                    println!("epoch {} loss {:.4} tau {:.4}", last.epoch, last.mean_loss, last.tau);
                }
                println!("{} crowd + {} gold pairs -> {}", s.crowd_pairs, s.gold_pairs, out.display());
            } else {
                let out = out_or(&out, "threshold_sweep.tsv");
                for r in p.cmd_sweep(&thresholds, fields, &out)? {
                    let m = r.map5.map_or("NA".into(), |v| format!("{v:.4}"));
                    println!("{}\t{}\t{m}", r.threshold, r.pairs);
                }
            }
        }
        Cmd::Retrieve { model, fields, queries, encoder, out, .. } => {
            let out = out_or(&out, &format!("run_{model}_{fields}.tsv"));
            let runs = p.cmd_retrieve(model, fields, &queries, encoder.as_deref(), &out)?;
            println!("{} queries -> {}", runs.len(), out.display());
        }
        Cmd::Features { queries, encoders, out, .. } => {
            let enc: BTreeMap<FieldCombo, PathBuf> = encoders.into_iter().collect();
            let name = match &queries {
                QuerySet::File(_) => "features.tsv".to_string(),
                q => format!("features_{}.tsv", format!("{q:?}").to_lowercase()),
            };
            let out = out_or(&out, &name);
            let fs = p.cmd_features(&queries, &enc, &out)?;
            println!("{} rows ({} features) -> {}", fs.rows.len(), fs.layout.len(), out.display());
        }
        Cmd::RerankTrain { features, out } => {
            let out = out_or(&out, "reranker.json");
            let m = p.cmd_rerank_train(&features, &out)?;
            println!("{} trees -> {}", m.trees.len(), out.display());
        }
        Cmd::Rerank { features, model, topk, out } => {
            let out = out_or(&out, "run_rerank.tsv");
            let runs = p.cmd_rerank(&features, &model, topk, &out)?;
            println!("{} queries -> {}", runs.len(), out.display());
        }
        Cmd::Evaluate { runs, queries, out, .. } => {
            let out = out_or(&out, "metrics.json");
            let (_, table) = p.cmd_evaluate(&runs, queries.as_ref(), &out)?;
            print!("{table}");
        }
        Cmd::Kappa { annotations, out } => {
            let out = out_or(&out, "kappa.json");
            let v = p.cmd_kappa(&annotations, &out)?;
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(())
}
