use std::collections::BTreeSet;
use std::sync::OnceLock;

use ndarray::Array2;
use proptest::prelude::*;

use claimmatch::corpus::Qrels;
use claimmatch::distsup::{build_split, LabeledPair, Strategy as Scoring, TargetKind};
use claimmatch::evalmetrics::{average_precision_at, cohen_kappa, evaluate, fleiss_kappa, rating_counts, RankedList};
use claimmatch::rerank::{delta_ap, rerank, train_lambdamart, FeatureSet, GbdtModel, LambdaMartConfig};
use claimmatch::retrieval::TfIdfModel;
use claimmatch::synthetic::separable_ltr;
use claimmatch::textnorm::{jaccard, normalize, NormConfig, TokenList};
use claimmatch::training::mnr_loss;

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z]{1,8}",
        "[0-9]{1,4}",
        "@[a-z]{1,6}",
        "#[A-Za-z]{1,6}",
        Just("https://t.co/x1".to_string()),
        Just(":)".to_string()),
        Just("don't".to_string()),
        Just("...".to_string()),
        Just("!!".to_string()),
    ]
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 0..12).prop_map(|w| w.join(" "))
}

fn tokens() -> impl Strategy<Value = TokenList> {
    prop::collection::vec("[a-e]", 0..8).prop_map(TokenList)
}

fn matrix(m: usize, h: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-1.0f64..1.0, m * h).prop_map(move |v| Array2::from_shape_vec((m, h), v).unwrap())
}

fn ranked_rels(max: usize) -> impl Strategy<Value = (Vec<bool>, usize)> {
    prop::collection::vec(any::<bool>(), 1..max).prop_flat_map(|rels| {
        let hits = rels.iter().filter(|r| **r).count();
        (Just(rels), hits.max(1)..hits + 4)
    })
}

fn brute_ap(rels: &[bool], total: usize, k: usize) -> f64 {
    let denom = total.min(k);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0;
    let mut s = 0.0;
    for (i, r) in rels.iter().take(k).enumerate() {
        if *r {
            hits += 1;
            s += hits as f64 / (i + 1) as f64;
        }
    }
    s / denom as f64
}

fn ltr_model() -> &'static (GbdtModel, FeatureSet) {
    static MODEL: OnceLock<(GbdtModel, FeatureSet)> = OnceLock::new();
    MODEL.get_or_init(|| {
        let (train, qrels) = separable_ltr("p", 30, 8, 4);
        let cfg = LambdaMartConfig { trees: 20, ..LambdaMartConfig::default() };
        (train_lambdamart(&train, &qrels, &cfg).unwrap(), train)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn normalization_is_idempotent_without_stemming(s in text()) {
        let mut cfg = NormConfig::default();
        cfg.stem = false;
        let once = normalize(&s, &cfg);
        let twice = normalize(&once.join(" "), &cfg);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn normalized_tokens_are_lowercase_and_nonempty(s in text()) {
        for t in normalize(&s, &NormConfig::default()).iter() {
            prop_assert!(!t.is_empty());
            prop_assert_eq!(t.to_lowercase(), t.clone());
            prop_assert!(!t.starts_with('@') && !t.starts_with('#'));
        }
    }

    #[test]
    fn jaccard_is_bounded_and_symmetric(a in tokens(), b in tokens()) {
        let j = jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j, jaccard(&b, &a));
        if !a.is_empty() {
            prop_assert_eq!(jaccard(&a, &a), 1.0);
        }
    }

    #[test]
    fn split_shrinks_as_threshold_rises(
        scores in prop::collection::vec((0usize..6, 0usize..4, 0.0f64..1.0), 1..40),
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let pairs: Vec<LabeledPair> = scores
            .iter()
            .map(|(t, a, s)| LabeledPair {
                tweet_id: format!("t{t}"),
                article_url: format!("a{a}"),
                target: TargetKind::Reply,
                score: *s,
                strategy: Scoring::Jaccard,
                label: 1.0,
            })
            .collect();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let keys = |t: f64| -> BTreeSet<(String, String)> {
            build_split(&pairs, Scoring::Jaccard, t)
                .map(|v| v.into_iter().map(|p| (p.tweet_id, p.article_url)).collect())
                .unwrap_or_default()
        };
        let (low, high) = (keys(lo), keys(hi));
        prop_assert!(high.is_subset(&low));
        for p in build_split(&pairs, Scoring::Jaccard, lo).unwrap_or_default() {
            prop_assert!(p.score > lo);
        }
    }

    #[test]
    fn tfidf_cosine_is_symmetric_and_bounded(docs in prop::collection::vec(tokens(), 2..6)) {
        let corpus: Vec<(String, TokenList)> =
            docs.iter().enumerate().map(|(i, d)| (format!("d{i}"), d.clone())).collect();
        let model = TfIdfModel::from_tokens(corpus).unwrap();
        let scores: Vec<Vec<f64>> = docs.iter().map(|d| model.scores(d)).collect();
        for i in 0..docs.len() {
            for j in 0..docs.len() {
                let (ab, ba) = (scores[i][j], scores[j][i]);
                prop_assert!((ab - ba).abs() < 1e-12, "{i},{j}");
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ab));
            }
        }
    }

    #[test]
    fn rerank_permutes_and_ignores_input_order(q in 0usize..30, shuffle in Just(()).prop_perturb(|_, mut rng| rng.next_u64())) {
        use rand::{seq::SliceRandom, SeedableRng};
        let (model, set) = ltr_model();
        let groups = set.groups();
        let (_, rows) = &groups[q % groups.len()];
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle));
        let a = rerank(model, &set.layout, rows).unwrap();
        let b = rerank(model, &set.layout, &shuffled).unwrap();
        let ids_a: Vec<&str> = a.ids().collect();
        prop_assert_eq!(&ids_a, &b.ids().collect::<Vec<_>>());
        let mut sorted_out = ids_a.clone();
        sorted_out.sort();
        let mut sorted_in: Vec<&str> = rows.iter().map(|r| r.doc_id.as_str()).collect();
        sorted_in.sort();
        prop_assert_eq!(sorted_out, sorted_in);
    }

    #[test]
    fn map_never_decreases_with_k_once_all_relevant_fit((rels, extra) in ranked_rels(12)) {
        // With R relevant documents, AP@k for k ≥ R only adds hits.
        let mut qrels = Qrels::new();
        let docs: Vec<(String, f64)> = (0..rels.len()).map(|i| (format!("d{i}"), -(i as f64))).collect();
        for (i, r) in rels.iter().enumerate() {
            if *r {
                qrels.insert("q", format!("d{i}"), 1);
            }
        }
        for e in rels.iter().filter(|r| **r).count()..extra {
            qrels.insert("q", format!("missing{e}"), 1);
        }
        let run = RankedList::from_ordered("q", docs).unwrap();
        let report = evaluate(&[run], &qrels).unwrap();
        let mut prev = 0.0;
        for k in extra.max(1)..extra + 15 {
            let m = average_precision_at(&rels, extra, k);
            prop_assert!(m + 1e-12 >= prev);
            prev = m;
        }
        for k in [1, 3, 5, 10, 20] {
            prop_assert!((report.map_at(k) - brute_ap(&rels, extra, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_ap_matches_swap((rels, total) in ranked_rels(10), k in 1usize..12, a in 0usize..10, b in 0usize..10) {
        let n = rels.len();
        let (a, b) = (a % n, b % n);
        prop_assume!(rels[a] != rels[b]);
        let mut swapped = rels.clone();
        swapped.swap(a, b);
        let want = (brute_ap(&swapped, total, k) - brute_ap(&rels, total, k)).abs();
        prop_assert!((delta_ap(&rels, total, k, a, b) - want).abs() < 1e-12);
    }

    #[test]
    fn loss_grows_with_each_weight(
        (c, v) in (1usize..5, 1usize..6).prop_flat_map(|(m, h)| (matrix(m, h), matrix(m, h))),
        tau in 0.05f64..2.0,
        weighted in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let m = c.nrows();
        let y: Vec<f64> = (0..m).map(|i| ((seed + i as u64 * 7) % 10) as f64 / 10.0).collect();
        let base = mnr_loss(&c, &v, &y, tau, weighted).unwrap();
        prop_assert!(base.loss >= 0.0);
        for i in 0..m {
            let mut up = y.clone();
            up[i] = (up[i] + 0.3).min(1.0);
            prop_assert!(mnr_loss(&c, &v, &up, tau, weighted).unwrap().loss + 1e-12 >= base.loss);
        }
        let zero = mnr_loss(&c, &v, &vec![0.0; m], tau, weighted).unwrap();
        prop_assert_eq!(zero.loss, 0.0);
        prop_assert!(zero.grad_c.iter().all(|g| *g == 0.0));
        if !weighted {
            let double: Vec<f64> = y.iter().map(|x| x * 2.0).collect();
            let d = mnr_loss(&c, &v, &double, tau, false).unwrap();
            prop_assert!((d.loss - 2.0 * base.loss).abs() < 1e-9);
            for (g2, g1) in d.grad_v.iter().zip(base.grad_v.iter()) {
                prop_assert!((g2 - 2.0 * g1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn kappa_stays_in_range(labels in prop::collection::vec(prop::collection::vec(0u8..3, 3), 2..40)) {
        let counts = rating_counts(&labels);
        if let Ok(k) = fleiss_kappa(&counts) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
        }
        let a: Vec<u8> = labels.iter().map(|r| r[0]).collect();
        let b: Vec<u8> = labels.iter().map(|r| r[1]).collect();
        if let Ok(k) = cohen_kappa(&a, &b) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
        }
        if let Ok(k) = cohen_kappa(&a, &a) {
            prop_assert_eq!(k, 1.0);
        }
    }
}
