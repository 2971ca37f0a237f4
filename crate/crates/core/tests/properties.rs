use proptest::prelude::*;

use revmine_core::active_learning::{normalized_entropy, sentence_entropy};
use revmine_core::aggregation::{facet_normalize, review_profile, ZScaler};
use revmine_core::analytics::{aggregate_disagreement, score_bin_label, Normalizer};
use revmine_core::clustering::{cluster_jaccard, sample_equal};
use revmine_core::corpus::{parse_jsonl, segment_sentences};
use revmine_core::models::stratified_folds;
use revmine_core::annotation::LabeledSentence;
use revmine_core::stats::{kendall_tau_b, pearson, percentile, spearman};
use revmine_core::{Corpus, Decision, Paper, Review, Sentiment};

fn sentiment() -> impl Strategy<Value = Sentiment> {
    (0usize..4).prop_map(Sentiment::from_index)
}

fn label_row() -> impl Strategy<Value = [Sentiment; 8]> {
    proptest::array::uniform8(sentiment())
}

fn distribution() -> impl Strategy<Value = [f64; 4]> {
    proptest::array::uniform4(0.0f64..1.0).prop_filter_map("non-zero mass", |w| {
        let z: f64 = w.iter().sum();
        (z > 1e-6).then(|| w.map(|x| x / z))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn disagreement_is_bounded_and_order_free(mut scores in proptest::collection::vec(1u8..=10, 2..12), rot in 0usize..12) {
        let d = aggregate_disagreement(&scores, Normalizer::Exact).unwrap().unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        let k = rot % scores.len();
        scores.rotate_left(k);
        prop_assert_eq!(aggregate_disagreement(&scores, Normalizer::Exact).unwrap().unwrap(), d);
    }

    #[test]
    fn correlations_are_bounded_and_symmetric(xy in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        for f in [pearson, spearman, kendall_tau_b] {
            if let (Ok(a), Ok(b)) = (f(&x, &y), f(&y, &x)) {
                prop_assert!((-1.0..=1.0).contains(&a.coefficient));
                prop_assert!((0.0..=1.0).contains(&a.p_value));
                prop_assert!((a.coefficient - b.coefficient).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_correlations_ignore_monotone_maps(xy in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..30)) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&ex, &y)) {
            prop_assert!((a.coefficient - b.coefficient).abs() < 1e-12);
        }
        if let (Ok(a), Ok(b)) = (kendall_tau_b(&x, &y), kendall_tau_b(&ex, &y)) {
            prop_assert!((a.coefficient - b.coefficient).abs() < 1e-12);
        }
    }

    #[test]
    fn percentile_is_monotone_and_within_range(v in proptest::collection::vec(-100.0f64..100.0, 1..30), q1 in 0.0f64..=100.0, q2 in 0.0f64..=100.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let (a, b) = (percentile(&v, lo).unwrap(), percentile(&v, hi).unwrap());
        prop_assert!(a <= b + 1e-12);
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a >= min - 1e-12 && b <= max + 1e-12);
    }

    #[test]
    fn review_scores_are_fractions(rows in proptest::collection::vec(label_row(), 1..40)) {
        let p = review_profile("r", &rows).unwrap();
        for (a, s) in p.scores.iter().enumerate() {
            let total = s.pos + s.neg + s.neu;
            prop_assert!(total <= 1.0 + 1e-12);
            let present = rows.iter().filter(|r| r[a] != Sentiment::Absent).count();
            prop_assert!((total - present as f64 / rows.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn facet_shares_sum_to_one(a in 0.0f64..5.0, b in 0.0f64..5.0) {
        let s = facet_normalize(a, b).unwrap();
        prop_assert!((s.accepted + s.rejected - 1.0).abs() < 1e-12);
        prop_assert_eq!(s.degenerate, a + b == 0.0);
    }

    #[test]
    fn entropy_is_normalized(heads in proptest::array::uniform8(distribution())) {
        for h in &heads {
            let e = normalized_entropy(h).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&e));
        }
        let e = sentence_entropy(&heads).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&e));
    }

    #[test]
    fn zscaler_round_trips(rows in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 3), 2..20)) {
        let scaler = ZScaler::fit(&rows);
        for row in &rows {
            let back = scaler.inverse_transform(&scaler.transform(row));
            for (i, (x, y)) in row.iter().zip(&back).enumerate() {
                if scaler.std[i] > 0.0 {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn score_bins_cover_the_scale(mean in 1.0f64..=10.0) {
        let label = score_bin_label(mean);
        prop_assert!((2..=10).contains(&label));
        prop_assert!(mean < f64::from(label) || label == 10);
    }

    #[test]
    fn segmentation_keeps_every_word(words in proptest::collection::vec("[A-Za-z]{1,8}", 1..30), cut in proptest::collection::vec(any::<bool>(), 30)) {
        let mut text = String::new();
        for (i, w) in words.iter().enumerate() {
            text.push_str(w);
            text.push_str(if cut[i] { ". " } else { " " });
        }
        let joined = segment_sentences(&text).join(" ");
        let strip = |s: &str| s.split_whitespace().map(|t| t.trim_end_matches('.').to_string()).collect::<Vec<_>>();
        prop_assert_eq!(strip(&joined), strip(&text));
    }

    #[test]
    fn folds_partition_examples(rows in proptest::collection::vec(label_row(), 10..60), folds in 2usize..6, seed in any::<u64>()) {
        let examples: Vec<LabeledSentence> = rows
            .iter()
            .enumerate()
            .map(|(i, l)| LabeledSentence { sentence_id: format!("s{i}"), text: "x".into(), labels: *l })
            .collect();
        let f = stratified_folds(&examples, folds, seed);
        prop_assert_eq!(f.len(), examples.len());
        prop_assert!(f.iter().all(|&k| k < folds));
        let mut sizes = vec![0usize; folds];
        for &k in &f {
            sizes[k] += 1;
        }
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(max - min <= 8, "{:?}", sizes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn equal_sampling_is_unique_and_sized(n in 6usize..40, k in 1usize..6, total_frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let k = k.min(n);
        let items: Vec<(String, String)> = (0..n).map(|i| (format!("s{i:03}"), format!("word{} common w{}", i % 7, i % 3))).collect();
        let a = cluster_jaccard(&items, k, 2, seed).unwrap();
        prop_assert_eq!(a.member_map.len(), n);
        prop_assert!(a.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        let total = (total_frac * n as f64) as usize;
        let picked = sample_equal(&a, total, seed).unwrap();
        let unique: std::collections::BTreeSet<&String> = picked.iter().collect();
        prop_assert_eq!(picked.len(), total);
        prop_assert_eq!(unique.len(), total);
    }

    #[test]
    fn corpus_jsonl_round_trips(reviews in proptest::collection::vec((1u8..=10, proptest::option::of(1u8..=5), "[A-Z][a-z]{2,8}( [a-z]{2,8}){0,6}\\."), 1..6)) {
        let paper = Paper {
            id: "p1".into(),
            year: 2019,
            title: "A title".into(),
            decision: Decision::Poster,
            reviews: reviews
                .iter()
                .enumerate()
                .map(|(i, (score, confidence, text))| Review {
                    id: format!("r{i}"),
                    paper_id: String::new(),
                    reviewer_alias: format!("AnonReviewer{i}"),
                    score: *score,
                    confidence: *confidence,
                    text: text.clone(),
                    sentences: vec![],
                })
                .collect(),
        };
        let corpus = Corpus::new(vec![paper]).unwrap().segmented();
        let back = parse_jsonl(corpus.to_jsonl().as_bytes()).unwrap();
        prop_assert_eq!(&back, &corpus);
    }
}
