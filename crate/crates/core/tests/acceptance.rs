//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 5 9`.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use claimmatch::corpus::Qrels;
use claimmatch::distsup::reference;
use claimmatch::encoder::{EncoderConfig, EncoderModel, Gradients, Side, Vocab};
use claimmatch::evalmetrics::{cohen_kappa, evaluate, fleiss_kappa, rating_counts, RankedList};
use claimmatch::pipeline::{Pipeline, QuerySet, RetrieverKind};
use claimmatch::rerank::{query_lambdas, rerank_all, train_lambdamart, LambdaMartConfig, LambdaMetric};
use claimmatch::retrieval::{Bm25Params, FieldCombo, InvertedIndex, TfIdfModel};
use claimmatch::synthetic::{noisy_pairs, separable_ltr};
use claimmatch::textnorm::{normalize, stem, NormConfig, TokenList};
use claimmatch::training::{mnr_loss, refurbish, train, TrainConfig, TrainPair};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    ensure(start.elapsed() < limit, || format!("took {:.1?}, limit {limit:?}", start.elapsed()))
}

fn mini_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini")
}

// 1 ------------------------------------------------------------------------

fn estimator() -> Outcome {
    let start = Instant::now();
    let total = reference::TOTAL_PAIRS;
    let cos = reference::cosine().estimate_matches(total);
    let reply = reference::jaccard_reply().estimate_matches(total);
    let conv = reference::jaccard_conversation().estimate_matches(total);
    for (name, got, want) in [
        ("cosine", cos.fraction_pct, 27.11),
        ("reply", reply.fraction_pct, 22.23),
        ("conversation", conv.fraction_pct, 14.79),
    ] {
        ensure((got - want).abs() <= 0.05, || format!("{name}: {got:.4}% vs {want}%"))?;
    }
    ensure(cos.count.abs_diff(90_170) <= 200, || format!("count {}", cos.count))?;
    within(Duration::from_secs(1), start)?;
    Ok(format!(
        "cosine {:.3}% = {} pairs, reply {:.3}%, conversation {:.3}%",
        cos.fraction_pct, cos.count, reply.fraction_pct, conv.fraction_pct
    ))
}

// 2 ------------------------------------------------------------------------

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.gen_range(-scale..scale))
}

/// ‖a − n‖ / (‖a‖ + ‖n‖), absolute when both are ~0.
fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt() + n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale < 1e-9 {
        diff
    } else {
        diff / scale
    }
}

fn central(f: &mut dyn FnMut(f64) -> f64, x: f64, eps: f64) -> f64 {
    (f(x + eps) - f(x - eps)) / (2.0 * eps)
}

fn fd_matrix(m: &Array2<f64>, eps: f64, loss: &dyn Fn(&Array2<f64>) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    let mut work = m.clone();
    for idx in 0..m.len() {
        let (r, c) = (idx / m.ncols(), idx % m.ncols());
        let x = m[[r, c]];
        out.push(central(
            &mut |v| {
                work[[r, c]] = v;
                let l = loss(&work);
                work[[r, c]] = x;
                l
            },
            x,
            eps,
        ));
    }
    out
}

/// Loss through the encoder and its analytic parameter gradients.
fn encoder_loss(
    model: &EncoderModel,
    tweets: &[claimmatch::encoder::EncodedInput],
    arts: &[claimmatch::encoder::EncodedInput],
    y: &[f64],
    tau: f64,
    weighted: bool,
) -> (f64, Gradients) {
    let ft: Vec<_> = tweets.iter().map(|t| model.forward(t).unwrap()).collect();
    let fa: Vec<_> = arts.iter().map(|a| model.forward(a).unwrap()).collect();
    let h = model.hidden();
    let c = Array2::from_shape_fn((ft.len(), h), |(i, j)| ft[i].output[j]);
    let v = Array2::from_shape_fn((fa.len(), h), |(i, j)| fa[i].output[j]);
    let out = mnr_loss(&c, &v, y, tau, weighted).unwrap();
    let mut g = Gradients::zeros(model);
    for i in 0..ft.len() {
        model.backward(&ft[i], out.grad_c.row(i), &mut g);
        model.backward(&fa[i], out.grad_v.row(i), &mut g);
    }
    (out.loss, g)
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for batch in 0..100 {
        let m = rng.gen_range(1..=4);
        let h = rng.gen_range(1..=8);
        let c = random_matrix(&mut rng, m, h, 1.0);
        let v = random_matrix(&mut rng, m, h, 1.0);
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let tau = rng.gen_range(0.1..2.0);
        for weighted in [false, true] {
            let out = mnr_loss(&c, &v, &y, tau, weighted).map_err(|e| e.to_string())?;
            let loss_c = |cc: &Array2<f64>| mnr_loss(cc, &v, &y, tau, weighted).unwrap().loss;
            let loss_v = |vv: &Array2<f64>| mnr_loss(&c, vv, &y, tau, weighted).unwrap().loss;
            let e_c = rel_err(out.grad_c.as_slice().unwrap(), &fd_matrix(&c, eps, &loss_c));
            let e_v = rel_err(out.grad_v.as_slice().unwrap(), &fd_matrix(&v, eps, &loss_v));
            let fd_tau = central(&mut |t| mnr_loss(&c, &v, &y, t, weighted).unwrap().loss, tau, eps);
            let e_t = rel_err(&[out.grad_tau], &[fd_tau]);
            for (what, e) in [("C", e_c), ("V", e_v), ("tau", e_t)] {
                worst = worst.max(e);
                ensure(e <= 1e-4, || {
                    format!("batch {batch} (m={m}, h={h}, weighted={weighted}): d/d{what} rel err {e:.2e}")
                })?;
            }
        }

        // every tenth batch also goes through the encoder parameters
        if batch % 10 == 0 {
            let words: Vec<TokenList> = (0..6).map(|i| TokenList(vec![format!("w{i}")])).collect();
            let vocab = Vocab::build(words.iter(), 1, 3).map_err(|e| e.to_string())?;
            let cfg = EncoderConfig {
                dim: h,
                hidden: h,
                hash_buckets: 3,
                init_scale: 0.5,
                seed: batch as u64,
                ..EncoderConfig::default()
            };
            let mut model = EncoderModel::init(vocab, FieldCombo::Cts, cfg, &NormConfig::default())
                .map_err(|e| e.to_string())?;
            let sample = |rng: &mut ChaCha8Rng| {
                let n = rng.gen_range(1..=3);
                TokenList((0..n).map(|_| format!("w{}", rng.gen_range(0..8))).collect())
            };
            let tweets: Vec<_> = (0..m).map(|_| model.tweet_input(&sample(&mut rng))).collect();
            let arts: Vec<_> = (0..m)
                .map(|_| model.segments_input(&[&sample(&mut rng)], Side::Article))
                .collect();
            for weighted in [false, true] {
                let (_, g) = encoder_loss(&model, &tweets, &arts, &y, tau, weighted);
                let mut analytic = Vec::new();
                let mut numeric = Vec::new();
                for r in 0..model.embeddings.nrows() {
                    for k in 0..h {
                        analytic.push(g.embeddings.get(&(r as u32)).map_or(0.0, |row| row[k]));
                        let x = model.embeddings[[r, k]];
                        numeric.push(central(
                            &mut |val| {
                                model.embeddings[[r, k]] = val;
                                let l = encoder_loss(&model, &tweets, &arts, &y, tau, weighted).0;
                                model.embeddings[[r, k]] = x;
                                l
                            },
                            x,
                            eps,
                        ));
                    }
                }
                let e_emb = rel_err(&analytic, &numeric);
                let mut numeric = Vec::new();
                for idx in 0..model.projection.len() {
                    let (r, k) = (idx / h, idx % h);
                    let x = model.projection[[r, k]];
                    numeric.push(central(
                        &mut |val| {
                            model.projection[[r, k]] = val;
                            let l = encoder_loss(&model, &tweets, &arts, &y, tau, weighted).0;
                            model.projection[[r, k]] = x;
                            l
                        },
                        x,
                        eps,
                    ));
                }
                let e_proj = rel_err(g.projection.as_slice().unwrap(), &numeric);
                let mut numeric = Vec::new();
                for k in 0..h {
                    let x = model.bias[k];
                    numeric.push(central(
                        &mut |val| {
                            model.bias[k] = val;
                            let l = encoder_loss(&model, &tweets, &arts, &y, tau, weighted).0;
                            model.bias[k] = x;
                            l
                        },
                        x,
                        eps,
                    ));
                }
                let e_bias = rel_err(g.bias.as_slice().unwrap(), &numeric);
                for (what, e) in [("embeddings", e_emb), ("projection", e_proj), ("bias", e_bias)] {
                    worst = worst.max(e);
                    ensure(e <= 1e-4, || format!("batch {batch}: encoder {what} rel err {e:.2e}"))?;
                }
            }
        }
    }
    within(Duration::from_secs(10), start)?;
    Ok(format!("100 batches, worst relative error {worst:.2e}"))
}

// 3 ------------------------------------------------------------------------

/// Mean in-batch softmax cross-entropy, written out directly.
fn cross_entropy_oracle(c: &Array2<f64>, v: &Array2<f64>) -> f64 {
    let m = c.nrows();
    let mut total = 0.0;
    for i in 0..m {
        let logits: Vec<f64> = (0..m)
            .map(|j| (0..c.ncols()).map(|d| c[[i, d]] * v[[j, d]]).sum())
            .collect();
        let denom: f64 = logits.iter().map(|x| x.exp()).sum();
        total += -(logits[i].exp() / denom).ln();
    }
    total / m as f64
}

fn loss_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for b in 0..1000 {
        let m = rng.gen_range(1..=8);
        let h = rng.gen_range(1..=16);
        let c = random_matrix(&mut rng, m, h, 1.0);
        let v = random_matrix(&mut rng, m, h, 1.0);
        let got = mnr_loss(&c, &v, &vec![1.0; m], 1.0, false).map_err(|e| e.to_string())?.loss;
        let want = cross_entropy_oracle(&c, &v);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-10, || format!("batch {b}: {got} vs {want}"))?;
    }
    let eye = Array2::eye(2);
    let orth = mnr_loss(&eye, &eye, &[1.0, 1.0], 1.0, false).map_err(|e| e.to_string())?.loss;
    let want = (1.0 + (-1.0f64).exp()).ln();
    ensure((orth - want).abs() <= 1e-12, || format!("orthogonal m=2: {orth} vs {want}"))?;
    Ok(format!("1000 batches, max abs diff {worst:.1e}; orthogonal case {orth:.15}"))
}

// 4 ------------------------------------------------------------------------

fn refurbishment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
    let y_hat: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
    ensure(refurbish(&y, &y_hat, 1.0) == y, || "alpha=1 changed labels".into())?;
    ensure(refurbish(&y, &y_hat, 0.0) == y_hat, || "alpha=0 did not copy predictions".into())?;
    let mut worst: f64 = 0.0;
    for alpha in [0.1, 0.5, 0.9, 0.99] {
        let mut cur = y.clone();
        for k in 1..=30 {
            cur = refurbish(&cur, &y_hat, alpha);
            for i in 0..y.len() {
                let got = (cur[i] - y_hat[i]).abs();
                let want = alpha.powi(k) * (y[i] - y_hat[i]).abs();
                worst = worst.max((got - want).abs());
                ensure((got - want).abs() <= 1e-12, || {
                    format!("alpha {alpha}, step {k}: |y-ŷ| {got} vs {want}")
                })?;
            }
        }
    }
    Ok(format!("fixed points hold; geometric decay max deviation {worst:.1e}"))
}

// 5 ------------------------------------------------------------------------

fn noise_separation() -> Outcome {
    let start = Instant::now();
    let mut gaps = Vec::new();
    for seed in 0..3u64 {
        let data = noisy_pairs(40, 10, 0.3, seed);
        let vocab = Vocab::build(data.tweets.iter().chain(&data.articles), 1, 256).map_err(|e| e.to_string())?;
        let enc = EncoderConfig { seed, ..EncoderConfig::default() };
        let model = EncoderModel::init(vocab, FieldCombo::Cts, enc, &NormConfig::default()).map_err(|e| e.to_string())?;
        let pairs: Vec<TrainPair> = data
            .tweets
            .iter()
            .zip(&data.articles)
            .map(|(t, a)| TrainPair {
                tweet: model.tweet_input(t),
                article: model.segments_input(&[a], Side::Article),
                label: 1.0,
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 20,
            refurbish_start: 2,
            alpha: 0.9,
            seed,
            ..TrainConfig::default()
        };
        let state = train(model, &pairs, &cfg, None).map_err(|e| e.to_string())?;
        let mean = |clean: bool| {
            let v: Vec<f64> = state
                .labels
                .iter()
                .zip(&data.clean)
                .filter(|(_, c)| **c == clean)
                .map(|(y, _)| *y)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let gap = mean(true) - mean(false);
        ensure(gap > 0.1, || format!("seed {seed}: clean {:.3} noisy {:.3}", mean(true), mean(false)))?;
        gaps.push(gap);
    }
    within(Duration::from_secs(120), start)?;
    Ok(format!("label gaps {:.3} {:.3} {:.3}", gaps[0], gaps[1], gaps[2]))
}

// 6 ------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
struct Frac(i64, i64);

impl Frac {
    fn new(n: i64, d: i64) -> Frac {
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        let g = gcd(n, d).max(1);
        Frac(n / g, d / g)
    }
    fn add(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }
    fn div(self, k: i64) -> Frac {
        Frac::new(self.0, self.1 * k)
    }
    fn f(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }
}

const fn q(n: i64, d: i64) -> Frac {
    Frac(n, d)
}

struct Crafted {
    /// 1-based ranks of relevant documents in the run.
    hits: &'static [usize],
    len: usize,
    /// Relevant documents in total, retrieved or not.
    relevant: usize,
    rr: Frac,
    /// AP@1, 3, 5, 10, 20
    ap: [Frac; 5],
    /// P@1, 3, 5, 10, 20
    p: [Frac; 5],
}

fn crafted() -> Vec<Crafted> {
    vec![
        Crafted { hits: &[1], len: 5, relevant: 1, rr: q(1, 1), ap: [q(1, 1); 5], p: [q(1, 1), q(1, 3), q(1, 5), q(1, 10), q(1, 20)] },
        Crafted { hits: &[2], len: 3, relevant: 1, rr: q(1, 2), ap: [q(0, 1), q(1, 2), q(1, 2), q(1, 2), q(1, 2)], p: [q(0, 1), q(1, 3), q(1, 5), q(1, 10), q(1, 20)] },
        Crafted { hits: &[6], len: 6, relevant: 1, rr: q(1, 6), ap: [q(0, 1), q(0, 1), q(0, 1), q(1, 6), q(1, 6)], p: [q(0, 1), q(0, 1), q(0, 1), q(1, 10), q(1, 20)] },
        Crafted { hits: &[], len: 3, relevant: 1, rr: q(0, 1), ap: [q(0, 1); 5], p: [q(0, 1); 5] },
        Crafted { hits: &[1, 3], len: 4, relevant: 2, rr: q(1, 1), ap: [q(1, 1), q(5, 6), q(5, 6), q(5, 6), q(5, 6)], p: [q(1, 1), q(2, 3), q(2, 5), q(1, 5), q(1, 10)] },
        Crafted { hits: &[2, 3, 5], len: 5, relevant: 3, rr: q(1, 2), ap: [q(0, 1), q(7, 18), q(53, 90), q(53, 90), q(53, 90)], p: [q(0, 1), q(2, 3), q(3, 5), q(3, 10), q(3, 20)] },
        Crafted { hits: &[2, 11], len: 11, relevant: 4, rr: q(1, 2), ap: [q(0, 1), q(1, 6), q(1, 8), q(1, 8), q(15, 88)], p: [q(0, 1), q(1, 3), q(1, 5), q(1, 10), q(1, 10)] },
        Crafted { hits: &[1, 2, 3, 4, 5], len: 5, relevant: 5, rr: q(1, 1), ap: [q(1, 1); 5], p: [q(1, 1), q(1, 1), q(1, 1), q(1, 2), q(1, 4)] },
        Crafted { hits: &[4, 21], len: 25, relevant: 2, rr: q(1, 4), ap: [q(0, 1), q(0, 1), q(1, 8), q(1, 8), q(1, 8)], p: [q(0, 1), q(0, 1), q(1, 5), q(1, 10), q(1, 20)] },
        Crafted { hits: &[3, 5, 7, 10], len: 10, relevant: 4, rr: q(1, 3), ap: [q(0, 1), q(1, 9), q(11, 60), q(41, 105), q(41, 105)], p: [q(0, 1), q(1, 3), q(2, 5), q(2, 5), q(1, 5)] },
    ]
}

const KS: [usize; 5] = [1, 3, 5, 10, 20];

fn crafted_run(i: usize, c: &Crafted, qrels: &mut Qrels) -> RankedList {
    let qid = format!("q{i}");
    let docs: Vec<(String, f64)> = (1..=c.len).map(|r| (format!("{qid}-d{r}"), (c.len - r) as f64)).collect();
    for &h in c.hits {
        qrels.insert(qid.clone(), format!("{qid}-d{h}"), 1);
    }
    for extra in c.hits.len()..c.relevant {
        qrels.insert(qid.clone(), format!("{qid}-unretrieved{extra}"), 1);
    }
    RankedList::from_ordered(qid, docs).unwrap()
}

fn metric_oracle() -> Outcome {
    let cases = crafted();
    let mut qrels = Qrels::new();
    let runs: Vec<RankedList> = cases.iter().enumerate().map(|(i, c)| crafted_run(i, c, &mut qrels)).collect();
    let tol = 1e-15;
    let close = |a: f64, b: Frac| (a - b.f()).abs() <= tol;
    for (i, (c, run)) in cases.iter().zip(&runs).enumerate() {
        let one = qrels.restrict([run.query_id()]);
        let r = evaluate(std::slice::from_ref(run), &one).map_err(|e| e.to_string())?;
        ensure(close(r.mrr, c.rr), || format!("run {i}: MRR {} vs {:?}", r.mrr, c.rr))?;
        for (j, k) in KS.iter().enumerate() {
            ensure(close(r.map_at(*k), c.ap[j]), || format!("run {i}: MAP@{k} {} vs {:?}", r.map_at(*k), c.ap[j]))?;
            ensure(close(r.precision_at(*k), c.p[j]), || {
                format!("run {i}: P@{k} {} vs {:?}", r.precision_at(*k), c.p[j])
            })?;
        }
        if c.relevant == 1 {
            ensure(r.map_at(1) == r.precision_at(1), || format!("run {i}: MAP@1 != P@1"))?;
        }
    }
    // means over all ten, accumulated as fractions
    let all = evaluate(&runs, &qrels).map_err(|e| e.to_string())?;
    let n = cases.len() as i64;
    let mean = |f: &dyn Fn(&Crafted) -> Frac| cases.iter().fold(q(0, 1), |acc, c| acc.add(f(c))).div(n);
    let mrr = mean(&|c| c.rr);
    ensure((all.mrr - mrr.f()).abs() <= 1e-15, || format!("mean MRR {} vs {:?}", all.mrr, mrr))?;
    for (j, k) in KS.iter().enumerate() {
        let map = mean(&|c| c.ap[j]);
        let p = mean(&|c| c.p[j]);
        ensure((all.map_at(*k) - map.f()).abs() <= 1e-15, || format!("MAP@{k} {} vs {:?}", all.map_at(*k), map))?;
        ensure((all.precision_at(*k) - p.f()).abs() <= 1e-15, || format!("P@{k} {} vs {:?}", all.precision_at(*k), p))?;
    }
    let map5 = mean(&|c| c.ap[2]);
    Ok(format!("10 runs match; MAP@5 = {}/{}, MRR = {}/{}", map5.0, map5.1, mrr.0, mrr.1))
}

// 7 ------------------------------------------------------------------------

fn toks(s: &str) -> TokenList {
    TokenList(s.split_whitespace().map(String::from).collect())
}

fn lexical_oracles() -> Outcome {
    // BM25 with k1 = 1.2, b = 0.75 over
    //   d1 = a b c, d2 = a a d, d3 = b e e e;  query = a e
    let docs = vec![("d1".to_string(), toks("a b c")), ("d2".into(), toks("a a d")), ("d3".into(), toks("b e e e"))];
    let ix = InvertedIndex::from_tokens(docs.clone(), Bm25Params { k1: 1.2, b: 0.75 }).map_err(|e| e.to_string())?;
    let got = ix.scores(&toks("a e"));
    let avgdl = 10.0 / 3.0;
    let idf_a = (1.5f64 / 2.5 + 1.0).ln();
    let idf_e = (2.5f64 / 1.5 + 1.0).ln();
    let part = |tf: f64, dl: f64| tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * dl / avgdl));
    let want = [idf_a * part(1.0, 3.0), idf_a * part(2.0, 3.0), idf_e * part(3.0, 4.0)];
    for i in 0..3 {
        ensure((got[i] - want[i]).abs() <= 1e-9, || format!("bm25 d{}: {} vs {}", i + 1, got[i], want[i]))?;
    }

    // tf·idf cosine against dense vectors
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vocab: Vec<String> = (0..12).map(|i| format!("t{i}")).collect();
    let mut sample = |n: usize| TokenList((0..n).map(|_| vocab[rng.gen_range(0..12)].clone()).collect());
    let corpus: Vec<(String, TokenList)> = (0..15).map(|i| (format!("doc{i:02}"), sample(8))).collect();
    let model = TfIdfModel::from_tokens(corpus.clone()).map_err(|e| e.to_string())?;
    let terms: Vec<&String> = {
        let mut t: Vec<&String> = corpus.iter().flat_map(|(_, d)| d.iter()).collect();
        t.sort();
        t.dedup();
        t
    };
    let n = corpus.len() as f64;
    let idf: Vec<f64> = terms
        .iter()
        .map(|t| {
            let df = corpus.iter().filter(|(_, d)| d.iter().any(|x| x == *t)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let dense = |d: &TokenList| -> Vec<f64> {
        let v: Vec<f64> = terms
            .iter()
            .zip(&idf)
            .map(|(t, w)| d.iter().filter(|x| x == t).count() as f64 * w)
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| if norm > 0.0 { x / norm } else { 0.0 }).collect()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let query = sample(4);
        let qv = dense(&query);
        let got = model.scores(&query);
        for (i, (_, d)) in corpus.iter().enumerate() {
            let want: f64 = dense(d).iter().zip(&qv).map(|(a, b)| a * b).sum();
            worst = worst.max((got[i] - want).abs());
            ensure((got[i] - want).abs() <= 1e-9, || format!("tfidf {}: {} vs {want}", corpus[i].0, got[i]))?;
        }
    }
    Ok(format!("bm25 {:.6} {:.6} {:.6}; tfidf max diff {worst:.1e}", got[0], got[1], got[2]))
}

// 8 ------------------------------------------------------------------------

fn brute_ap(rels: &[bool], k: usize) -> f64 {
    let total = rels.iter().filter(|&&r| r).count();
    let denom = total.min(k);
    if denom == 0 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..k.min(rels.len()) {
        if rels[i] {
            let hits = rels[..=i].iter().filter(|&&r| r).count();
            s += hits as f64 / (i + 1) as f64;
        }
    }
    s / denom as f64
}

fn brute_ndcg(rels: &[bool], k: usize) -> f64 {
    let total = rels.iter().filter(|&&r| r).count();
    let gain = |p: usize| 1.0 / ((p + 2) as f64).log2();
    let ideal: f64 = (0..total.min(k)).map(gain).sum();
    if ideal == 0.0 {
        return 0.0;
    }
    (0..k.min(rels.len())).filter(|&p| rels[p]).map(gain).sum::<f64>() / ideal
}

fn lambdamart() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for trial in 0..3000 {
        let n = rng.gen_range(2..=6);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let rels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let metric = if trial % 2 == 0 { LambdaMetric::Map } else { LambdaMetric::Ndcg };
        let cfg = LambdaMartConfig {
            metric,
            k: rng.gen_range(1..=6),
            sigma: [0.5, 1.0, 2.0][trial % 3],
            ..LambdaMartConfig::default()
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let (lam, w) = query_lambdas(&scores, &rels, &order, &cfg);

        let ranked: Vec<bool> = order.iter().map(|&d| rels[d]).collect();
        let metric_of = |r: &[bool]| match metric {
            LambdaMetric::Map => brute_ap(r, cfg.k),
            LambdaMetric::Ndcg => brute_ndcg(r, cfg.k),
        };
        let base = metric_of(&ranked);
        let mut want_l = vec![0.0; n];
        let mut want_w = vec![0.0; n];
        for pi in 0..n {
            for pj in 0..n {
                if !ranked[pi] || ranked[pj] {
                    continue;
                }
                let mut swapped = ranked.clone();
                swapped.swap(pi, pj);
                let delta = (metric_of(&swapped) - base).abs();
                let (i, j) = (order[pi], order[pj]);
                let rho = 1.0 / (1.0 + (cfg.sigma * (scores[i] - scores[j])).exp());
                want_l[i] += cfg.sigma * rho * delta;
                want_l[j] -= cfg.sigma * rho * delta;
                want_w[i] += cfg.sigma * cfg.sigma * rho * (1.0 - rho) * delta;
                want_w[j] += cfg.sigma * cfg.sigma * rho * (1.0 - rho) * delta;
            }
        }
        for d in 0..n {
            let e = (lam[d] - want_l[d]).abs().max((w[d] - want_w[d]).abs());
            worst = worst.max(e);
            ensure(e <= 1e-12, || {
                format!("trial {trial} ({metric:?}, k={}): doc {d} lambda {} vs {}", cfg.k, lam[d], want_l[d])
            })?;
        }
    }

    let (train_set, train_qrels) = separable_ltr("train", 200, 10, 1);
    let (test_set, test_qrels) = separable_ltr("test", 100, 10, 2);
    let model = train_lambdamart(&train_set, &train_qrels, &LambdaMartConfig::default()).map_err(|e| e.to_string())?;
    let runs = rerank_all(&model, &test_set).map_err(|e| e.to_string())?;
    let map5 = evaluate(&runs, &test_qrels).map_err(|e| e.to_string())?.map_at(5);
    ensure(map5 >= 0.95, || format!("test MAP@5 {map5:.4}"))?;
    within(Duration::from_secs(60), start)?;
    Ok(format!("lambdas match swap oracle (max diff {worst:.1e}); test MAP@5 {map5:.4}"))
}

// 9 ------------------------------------------------------------------------

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    for seed in [1u64, 2, 3] {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let sets = [format!("paths.out_dir=\"{}\"", tmp.path().display()), format!("seed={seed}")];
        let p = Pipeline::load(Some(&mini_dir().join("config.toml")), &sets).map_err(|e| e.to_string())?;
        let run = || -> claimmatch::Result<(f64, f64)> {
            p.cmd_label(&p.out_path("split.tsv"), None)?;
            for f in FieldCombo::ALL {
                p.cmd_train(f, None, false, None, &p.encoder_path(f))?;
            }
            let bm25 = p.out_path("bm25.tsv");
            p.cmd_retrieve(RetrieverKind::Bm25, FieldCombo::Cts, &QuerySet::Test, None, &bm25)?;
            let none = BTreeMap::new();
            p.cmd_features(&QuerySet::Rerank, &none, &p.out_path("features_rerank.tsv"))?;
            p.cmd_features(&QuerySet::Test, &none, &p.out_path("features_test.tsv"))?;
            p.cmd_rerank_train(&p.out_path("features_rerank.tsv"), &p.out_path("reranker.json"))?;
            let reranked = p.out_path("final.tsv");
            p.cmd_rerank(&p.out_path("features_test.tsv"), &p.out_path("reranker.json"), None, &reranked)?;
            let (reports, _) = p.cmd_evaluate(&[bm25, reranked], Some(&QuerySet::Test), &p.out_path("metrics.json"))?;
            Ok((reports[0].1.map_at(5), reports[1].1.map_at(5)))
        };
        let (base, fin) = run().map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(fin >= base + 0.05, || format!("seed {seed}: final MAP@5 {fin:.4} vs bm25 {base:.4}"))?;
        lines.push(format!("seed {seed} {fin:.3} vs {base:.3}"));
    }
    within(Duration::from_secs(300), start)?;
    Ok(format!("final vs bm25 MAP@5: {}", lines.join(", ")))
}

// 10 -----------------------------------------------------------------------

fn kappa() -> Outcome {
    let perfect: Vec<Vec<&str>> = vec![
        vec!["yes", "yes", "yes"],
        vec!["no", "no", "no"],
        vec!["yes", "yes", "yes"],
        vec!["unsure", "unsure", "unsure"],
        vec!["no", "no", "no"],
    ];
    let f = fleiss_kappa(&rating_counts(&perfect)).map_err(|e| e.to_string())?;
    ensure(f == 1.0, || format!("perfect fleiss {f}"))?;
    let a: Vec<&str> = perfect.iter().map(|r| r[0]).collect();
    let c = cohen_kappa(&a, &a).map_err(|e| e.to_string())?;
    ensure(c == 1.0, || format!("perfect cohen {c}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let labels: Vec<Vec<u8>> = (0..1000).map(|_| (0..3).map(|_| rng.gen_range(0..2)).collect()).collect();
    let f = fleiss_kappa(&rating_counts(&labels)).map_err(|e| e.to_string())?;
    let x: Vec<u8> = labels.iter().map(|r| r[0]).collect();
    let y: Vec<u8> = labels.iter().map(|r| r[1]).collect();
    let c = cohen_kappa(&x, &y).map_err(|e| e.to_string())?;
    ensure(f.abs() <= 0.1 && c.abs() <= 0.1, || format!("independent raters: fleiss {f:.4}, cohen {c:.4}"))?;
    Ok(format!("perfect agreement 1.0; independent raters fleiss {f:.4}, cohen {c:.4}"))
}

// 11 -----------------------------------------------------------------------

const GOLDENS: [(&str, &[&str]); 20] = [
    ("", &[]),
    ("Check https://t.co/abc NOW!!! @user", &["check", "now"]),
    ("30 unilateral actions", &["0", "unilater", "action"]),
    ("Vaccines cause autism", &["vaccin", "caus", "autism"]),
    ("@CDCgov says masks don't work", &["sai", "mask", "work"]),
    ("#StopTheSteal trending", &["stopthest", "trend"]),
    ("Over 1,000 people died!!!", &["0", "0", "peopl", "di"]),
    ("Read this: http://bit.ly/xyz now", &["read", "now"]),
    ("Masks are USELESS :) trust me", &["mask", "useless", "trust"]),
    ("RT @user: BREAKING news from #Ukraine", &["rt", "break", "new", "ukrain"]),
    ("I can't believe it's 2021...", &["can't", "believ", "0"]),
    ("Well-known doctors say otherwise", &["well-known", "doctor", "sai", "otherwis"]),
    ("HYDROXYCHLOROQUINE works!!", &["hydroxychloroquin", "work"]),
    ("Visit www.fakenews.com for more", &["visit"]),
    ("@a @b @c", &[]),
    ("!!! ??? ...", &[]),
    ("Generalizations about immigrants", &["gener", "immigr"]),
    ("Hospitals are overflowing in NYC", &["hospit", "overflow", "nyc"]),
    ("5G causes cancer <3", &["0g", "caus", "cancer", "0"]),
    ("Click here: https://example.com/a?b=c&d=e", &["click"]),
];

fn normalization_goldens() -> Outcome {
    let cfg = NormConfig::default();
    for (raw, want) in GOLDENS {
        let got = normalize(raw, &cfg);
        ensure(got.0 == want, || format!("{raw:?} -> {:?}, expected {want:?}", got.0))?;
    }
    let sample = include_str!("fixtures/porter_sample.tsv");
    let mut n = 0;
    for line in sample.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let (word, want) = line.split_once('\t').ok_or("bad porter fixture line")?;
        let got = stem(word);
        ensure(got == want, || format!("stem({word}) = {got}, expected {want}"))?;
        n += 1;
    }
    Ok(format!("20 goldens; {n} Porter sample words"))
}

// --------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("estimator", estimator),
        ("gradient check", gradient_check),
        ("loss oracle", loss_oracle),
        ("refurbishment", refurbishment),
        ("noise separation", noise_separation),
        ("metric oracle", metric_oracle),
        ("bm25/tfidf oracle", lexical_oracles),
        ("lambdamart", lambdamart),
        ("end-to-end", end_to_end),
        ("kappa", kappa),
        ("normalization goldens", normalization_goldens),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail} [{took:.2?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {why} [{took:.2?}]");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
