//! Analytics over generated corpora whose structure is known in advance.

use revmine_core::aggregation::{profile_corpus, Profiles};
use revmine_core::analytics::{
    agreement_correlation_profiles, aspect_vs_aggregate, confidence_gap, disagreement_by_score_bin,
    disagreement_records, DecisionMapping, Normalizer,
};
use revmine_core::corpus::{corpus_stats, GroupBy};
use revmine_core::models::SentencePrediction;
use revmine_core::report::{build_report, ReportInputs};
use revmine_core::synth::{generate, SynthConfig, SynthData};
use revmine_core::{Aspect, Corpus, Decision, Paper, Review};

fn gold_profiles(data: &SynthData) -> Profiles {
    let predictions: Vec<SentencePrediction> = data
        .gold
        .iter()
        .map(|(id, labels)| {
            let mut d = [[0.0; 4]; 8];
            for (h, s) in labels.iter().enumerate() {
                d[h][s.index()] = 1.0;
            }
            SentencePrediction::new(id.clone(), d)
        })
        .collect();
    profile_corpus(&data.corpus, &predictions).unwrap()
}

const PLANTED: [Aspect; 3] = [Aspect::EmpiricalTheoreticalSoundness, Aspect::ImpactOfIdeas, Aspect::Clarity];

#[test]
fn agreeing_reviews_track_their_scores_more_closely() {
    let data = generate(&SynthConfig {
        papers: 400,
        seed: 11,
        disagreeing_text_random: true,
        ..SynthConfig::default()
    });
    let profiles = gold_profiles(&data);
    let out = agreement_correlation_profiles(&data.corpus, &profiles, DecisionMapping::default());
    assert!(out.agree_reviews > out.disagree_reviews && out.disagree_reviews > 50);
    for a in PLANTED {
        let row = &out.rows[a.index()];
        let (agree, disagree) = (row.agree_pearson.unwrap().coefficient, row.disagree_pearson.unwrap().coefficient);
        assert!(agree > disagree + 0.2, "{a:?}: {agree} vs {disagree}");
        assert!(row.pearson_share.unwrap().accepted > 0.5);
    }
}

#[test]
fn middling_papers_draw_the_most_disagreement() {
    let data = generate(&SynthConfig {
        papers: 1500,
        seed: 12,
        center_spread: true,
        ..SynthConfig::default()
    });
    let records = disagreement_records(&data.corpus, None, Normalizer::Exact);
    let bins = disagreement_by_score_bin(&records);
    let at = |label: u8| bins.iter().find(|b| b.label == label).and_then(|b| b.mean_disagreement).unwrap();
    let center = at(6).max(at(5));
    assert!(center > at(3) && center > at(9), "{bins:?}");
}

#[test]
fn sentiment_spread_follows_score_spread() {
    let data = generate(&SynthConfig {
        papers: 600,
        seed: 13,
        ..SynthConfig::default()
    });
    let profiles = gold_profiles(&data);
    let records = disagreement_records(&data.corpus, Some(&profiles), Normalizer::Exact);
    for t in aspect_vs_aggregate(&records) {
        if PLANTED.contains(&t.aspect) {
            let (low, high) = (t.bins[0].mean_aggregate.unwrap(), t.bins[2].mean_aggregate.unwrap());
            assert!(high > low, "{:?}: low {low} high {high}", t.aspect);
        }
    }
}

#[test]
fn agreeing_reviewers_are_more_confident() {
    let data = generate(&SynthConfig {
        papers: 800,
        seed: 14,
        ..SynthConfig::default()
    });
    let gap = confidence_gap(&data.corpus, DecisionMapping::default());
    assert!(gap.mean_agree.unwrap() > gap.mean_disagree.unwrap());
    let welch = gap.welch.unwrap();
    assert!(welch.t > 0.0 && welch.p < 0.05, "{welch:?}");
}

#[test]
fn full_report_bundle_is_reproducible() {
    let data = generate(&SynthConfig {
        papers: 60,
        seed: 15,
        ..SynthConfig::default()
    });
    let profiles = gold_profiles(&data);
    let inputs = ReportInputs {
        profiles: Some(&profiles),
        ..ReportInputs::new(&data.corpus)
    };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    build_report(&inputs).write(d1.path()).unwrap();
    build_report(&inputs).write(d2.path()).unwrap();
    for stem in [
        "fig1_positive_shares",
        "fig2_negative_shares",
        "fig3_agreement_pearson",
        "fig4_agreement_spearman",
        "fig5_disagreement_by_score",
        "fig6_aspect_vs_aggregate",
    ] {
        for ext in ["csv", "svg"] {
            let name = format!("{stem}.{ext}");
            let a = std::fs::read(d1.path().join(&name)).unwrap();
            assert_eq!(a, std::fs::read(d2.path().join(&name)).unwrap(), "{name}");
        }
    }
    let t9 = std::fs::read_to_string(d1.path().join("table9_aspect_importance.csv")).unwrap();
    assert_eq!(t9.lines().count(), 9);
}

fn review(id: &str, score: u8, text: &str) -> Review {
    Review {
        id: id.into(),
        paper_id: String::new(),
        reviewer_alias: "AnonReviewer1".into(),
        score,
        confidence: Some(3),
        text: text.into(),
        sentences: vec![],
    }
}

#[test]
fn corpus_statistics_match_hand_counts() {
    let corpus = Corpus::new(vec![
        Paper {
            id: "a".into(),
            year: 2018,
            title: "A".into(),
            decision: Decision::Oral,
            reviews: vec![
                review("a1", 8, "Good paper. Clear writing here."),
                review("a2", 7, "Solid work."),
            ],
        },
        Paper {
            id: "b".into(),
            year: 2018,
            title: "B".into(),
            decision: Decision::Reject,
            reviews: vec![review("b1", 3, "Weak results. Weak baselines. Unclear.")],
        },
        Paper {
            id: "c".into(),
            year: 2019,
            title: "C".into(),
            decision: Decision::Withdrawn,
            reviews: vec![review("c1", 1, "Withdrawn.")],
        },
    ])
    .unwrap()
    .segmented();
    let stats = corpus_stats(&corpus, GroupBy::AcceptReject);
    let accepted = &stats.groups[0];
    // Sentences per review: 2 and 1 -> mean 1.5, population std 0.5.
    assert_eq!((accepted.papers, accepted.reviews, accepted.sentences), (1, 2, 3));
    assert_eq!(accepted.sentences_per_review.mean, 1.5);
    assert_eq!(accepted.sentences_per_review.std, 0.5);
    // Lengths 2, 3, 2 words.
    assert!((accepted.sentence_length_words.mean - 7.0 / 3.0).abs() < 1e-12);
    // Unique words: {good, paper, clear, writing, here} = 5 and {solid, work} = 2.
    assert_eq!(accepted.unique_words_per_review.mean, 3.5);
    let rejected = &stats.groups[1];
    assert_eq!((rejected.reviews, rejected.sentences), (1, 3));
    assert_eq!(rejected.unique_words_per_review.mean, 4.0);
    assert_eq!(rejected.score_histogram[2], 1);
    assert_eq!(stats.decision_counts[&Decision::Withdrawn], 1);
    assert_eq!(stats.groups[2].reviews, 0);
}
