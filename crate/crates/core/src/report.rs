//! The `reports/` bundle: one CSV per table, CSV plus SVG per figure and a
//! JSON summary. Output depends only on the inputs, so rebuilding gives
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use crate::aggregation::{facet_normalize, group_mean_scores, AspectScores, Profiles};
use crate::analytics::recommendation::{AblationReport, RecNetReport};
use crate::analytics::{
    agreement_correlation_profiles, aspect_importance_correlation, aspect_vs_aggregate, chair_agreement,
    chair_intervention, confidence_gap, disagreement_by_score_bin, disagreement_records, review_samples,
    score_correlations, DecisionMapping, InterventionRule, Normalizer,
};
use crate::annotation::{Aspect, LabelDistribution};
use crate::corpus::{corpus_stats, paper_counts, review_decision_counts, GroupBy};
use crate::corpus::{Corpus, Decision};
use crate::models::EvalReport;
use crate::stats::CorrelationResult;

pub struct ReportInputs<'a> {
    pub corpus: &'a Corpus,
    pub mapping: DecisionMapping,
    pub normalizer: Normalizer,
    pub intervention_rule: InterventionRule,
    pub profiles: Option<&'a Profiles>,
    pub label_distribution: Option<&'a LabelDistribution>,
    pub evaluations: &'a [EvalReport],
    pub recommendation: Option<&'a RecNetReport>,
    pub ablation: Option<&'a AblationReport>,
}

impl<'a> ReportInputs<'a> {
    pub fn new(corpus: &'a Corpus) -> Self {
        ReportInputs {
            corpus,
            mapping: DecisionMapping::default(),
            normalizer: Normalizer::Exact,
            intervention_rule: InterventionRule::MeanThreshold,
            profiles: None,
            label_distribution: None,
            evaluations: &[],
            recommendation: None,
            ablation: None,
        }
    }
}

/// File name to contents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportBundle {
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn write(&self, dir: impl AsRef<Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, contents) in &self.files {
            std::fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }

    fn add(&mut self, name: &str, contents: String) {
        self.files.insert(name.to_string(), contents);
    }

    fn add_figure(&mut self, stem: &str, title: &str, csv: String, chart: &Chart) {
        self.add(&format!("{stem}.csv"), csv);
        self.add(&format!("{stem}.svg"), chart.render(title));
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn corr_cells(c: &Option<CorrelationResult>) -> String {
    match c {
        Some(c) => format!("{},{}", num(c.coefficient), num(c.p_value)),
        None => ",".to_string(),
    }
}

/// Grouped bar chart data: one category per x position, one bar per series.
struct Chart {
    categories: Vec<String>,
    series: Vec<(String, Vec<Option<f64>>)>,
}

const COLORS: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];

impl Chart {
    fn render(&self, title: &str) -> String {
        let (width, height) = (80.0 + 70.0 * self.categories.len().max(1) as f64, 360.0);
        let (left, top, bottom) = (50.0, 40.0, 90.0);
        let plot_h = height - top - bottom;
        let values = self.series.iter().flat_map(|s| s.1.iter().flatten().copied());
        let (lo, hi) = values.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = if hi - lo > 0.0 { hi - lo } else { 1.0 };
        let y = |v: f64| top + plot_h * (hi - v) / span;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, width / 2.0, escape(title));
        let _ = writeln!(
            svg,
            r#"<line x1="{left}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="black"/>"#,
            y(0.0),
            width - 20.0
        );
        for tick in [lo, (lo + hi) / 2.0, hi] {
            let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{:.3}</text>"#, left - 4.0, y(tick) + 4.0, tick);
        }
        let group_w = 70.0;
        let bar_w = 56.0 / self.series.len().max(1) as f64;
        for (c, category) in self.categories.iter().enumerate() {
            let x0 = left + 10.0 + group_w * c as f64;
            for (s, (_, vals)) in self.series.iter().enumerate() {
                let Some(v) = vals.get(c).copied().flatten() else {
                    continue;
                };
                let (y1, y2) = (y(v.max(0.0)), y(v.min(0.0)));
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    x0 + bar_w * s as f64,
                    y1,
                    bar_w,
                    (y2 - y1).max(0.0),
                    COLORS[s % COLORS.len()]
                );
            }
            let (lx, ly) = (x0 + 28.0, height - bottom + 12.0);
            let _ = writeln!(
                svg,
                r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-40 {lx:.2} {ly:.2})">{}</text>"#,
                escape(category)
            );
        }
        for (s, (name, _)) in self.series.iter().enumerate() {
            let lx = left + 110.0 * s as f64;
            let _ = writeln!(
                svg,
                r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{}">{}</text>"#,
                height - 18.0,
                COLORS[s % COLORS.len()],
                lx + 14.0,
                height - 9.0,
                escape(name)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn aspect_names() -> Vec<String> {
    Aspect::ALL.iter().map(|a| a.key().to_string()).collect()
}

fn table1(corpus: &Corpus) -> String {
    let mut out = String::from("year,oral,poster,workshop,reject,withdrawn,total\n");
    for (year, counts) in paper_counts(corpus) {
        let cells: Vec<String> = Decision::ALL
            .iter()
            .map(|d| counts.get(d).copied().unwrap_or(0).to_string())
            .collect();
        let _ = writeln!(out, "{year},{},{}", cells.join(","), counts.values().sum::<usize>());
    }
    out
}

fn table4(evals: &[EvalReport]) -> String {
    let mut out = String::from("model,folds,n,precision,recall,f1\n");
    for e in evals {
        let d = e.detection_micro;
        let _ = writeln!(out, "{},{},{},{},{},{}", e.kind, e.folds, e.n, num(d.precision), num(d.recall), num(d.f1));
    }
    out
}

fn table5(evals: &[EvalReport]) -> String {
    let mut out = String::from("model,aspect,precision,recall,f1,accuracy\n");
    for e in evals {
        for a in &e.per_aspect {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                e.kind,
                a.aspect.key(),
                num(a.precision),
                num(a.recall),
                num(a.f1),
                num(a.accuracy)
            );
        }
    }
    out
}

fn table7_and_10(corpus: &Corpus) -> (String, String) {
    let stats = corpus_stats(corpus, GroupBy::AcceptReject);
    let mut t7 = String::from(
        "group,papers,reviews,sentences,sentences_per_review_mean,sentences_per_review_std,\
         sentence_length_mean,sentence_length_std,unique_words_mean,unique_words_std\n",
    );
    for g in &stats.groups {
        let _ = writeln!(
            t7,
            "{},{},{},{},{},{},{},{},{},{}",
            g.key,
            g.papers,
            g.reviews,
            g.sentences,
            num(g.sentences_per_review.mean),
            num(g.sentences_per_review.std),
            num(g.sentence_length_words.mean),
            num(g.sentence_length_words.std),
            num(g.unique_words_per_review.mean),
            num(g.unique_words_per_review.std)
        );
    }
    let keys: Vec<&str> = stats.groups.iter().map(|g| g.key.as_str()).collect();
    let mut t10 = format!("score,{}\n", keys.join(","));
    for score in 0..10 {
        let cells: Vec<String> = stats.groups.iter().map(|g| g.score_histogram[score].to_string()).collect();
        let _ = writeln!(t10, "{},{}", score + 1, cells.join(","));
    }
    (t7, t10)
}

fn table11(corpus: &Corpus, mapping: DecisionMapping) -> String {
    let mut out = String::from("year,accept_reviews,reject_reviews\n");
    for (year, (acc, rej)) in review_decision_counts(corpus, mapping.threshold) {
        let _ = writeln!(out, "{year},{acc},{rej}");
    }
    out
}

fn table12(ablation: &AblationReport) -> String {
    let mut out = String::from("dropped,accuracy,drop_points\n");
    let _ = writeln!(out, "none,{},0", num(ablation.baseline.cv_accuracy));
    for d in &ablation.drops {
        let _ = writeln!(out, "{},{},{}", d.aspect.key(), num(d.accuracy), num(d.drop_points));
    }
    out
}

/// Facet-normalized group means of one sentiment for figures 1 and 2.
fn share_figure(means: &BTreeMap<String, [AspectScores; 8]>, pick: fn(&AspectScores) -> f64) -> (String, Chart) {
    let mut csv = String::from("aspect,accepted,rejected\n");
    let (mut acc, mut rej) = (Vec::new(), Vec::new());
    for a in Aspect::ALL {
        let value = |g: &str| means.get(g).map(|s| pick(&s[a.index()])).unwrap_or(0.0);
        let share = facet_normalize(value("accepted"), value("rejected")).ok();
        acc.push(share.map(|s| s.accepted));
        rej.push(share.map(|s| s.rejected));
        let _ = writeln!(csv, "{},{},{}", a.key(), opt(share.map(|s| s.accepted)), opt(share.map(|s| s.rejected)));
    }
    let chart = Chart {
        categories: aspect_names(),
        series: vec![("accepted".into(), acc), ("rejected".into(), rej)],
    };
    (csv, chart)
}

#[derive(Serialize)]
struct Summary<'a> {
    papers: usize,
    eligible_papers: usize,
    reviews: usize,
    sentences: usize,
    decision_threshold: u8,
    normalizer: Normalizer,
    chair_agreement: crate::analytics::ChairAgreement,
    confidence_gap: crate::analytics::ConfidenceGap,
    chair_intervention: crate::analytics::ChairIntervention,
    profiled_reviews: Option<usize>,
    skipped_reviews: Option<usize>,
    evaluations: Vec<serde_json::Value>,
    recommendation: Option<&'a RecNetReport>,
    ablation_ranking: Option<Vec<Aspect>>,
    warnings: Vec<String>,
    files: Vec<String>,
}

pub fn build_report(inputs: &ReportInputs) -> ReportBundle {
    let corpus = inputs.corpus;
    let mut bundle = ReportBundle::default();
    let mut warnings = Vec::new();

    bundle.add("table1_paper_counts.csv", table1(corpus));
    if let Some(dist) = inputs.label_distribution {
        bundle.add("table2_label_distribution.csv", dist.to_csv());
    }
    if !inputs.evaluations.is_empty() {
        bundle.add("table4_detection.csv", table4(inputs.evaluations));
        bundle.add("table5_aspect_sentiment.csv", table5(inputs.evaluations));
    }
    let (t7, t10) = table7_and_10(corpus);
    bundle.add("table7_corpus_stats.csv", t7);
    bundle.add("table10_score_distribution.csv", t10);
    bundle.add("table11_review_decisions.csv", table11(corpus, inputs.mapping));

    let mut t8 = String::from("aggregate,pearson,pearson_p,spearman,spearman_p,kendall_tau_b,kendall_p\n");
    match score_correlations(corpus, inputs.mapping) {
        Ok(rows) => {
            for r in rows {
                let _ = writeln!(
                    t8,
                    "{},{},{},{}",
                    r.aggregate.key(),
                    corr_cells(&r.pearson),
                    corr_cells(&r.spearman),
                    corr_cells(&r.kendall)
                );
            }
        }
        Err(e) => warnings.push(format!("score correlations: {e}")),
    }
    bundle.add("table8_score_correlations.csv", t8);

    if let Some(ablation) = inputs.ablation {
        bundle.add("table12_ablation.csv", table12(ablation));
    }

    let records = disagreement_records(corpus, inputs.profiles, inputs.normalizer);
    let bins = disagreement_by_score_bin(&records);
    let mut fig5 = String::from("bin,papers,mean_disagreement\n");
    for b in &bins {
        let _ = writeln!(fig5, "{},{},{}", b.label, b.papers, opt(b.mean_disagreement));
    }
    let chart5 = Chart {
        categories: bins.iter().map(|b| b.label.to_string()).collect(),
        series: vec![("disagreement".into(), bins.iter().map(|b| b.mean_disagreement).collect())],
    };
    bundle.add_figure("fig5_disagreement_by_score", "Disagreement by mean score", fig5, &chart5);

    if let Some(profiles) = inputs.profiles {
        let groups = corpus.eligible_papers().filter_map(|p| {
            let group = match p.decision.binary_outcome()? {
                true => "accepted",
                false => "rejected",
            };
            profiles.paper(&p.id).map(|prof| (group, prof))
        });
        let means = group_mean_scores(groups);
        let (csv, chart) = share_figure(&means, |s| s.pos);
        bundle.add_figure("fig1_positive_shares", "Positive sentiment by decision", csv, &chart);
        let (csv, chart) = share_figure(&means, |s| s.neg);
        bundle.add_figure("fig2_negative_shares", "Negative sentiment by decision", csv, &chart);

        let agreement = agreement_correlation_profiles(corpus, profiles, inputs.mapping);
        warnings.extend(agreement.warnings.iter().cloned());
        for (stem, title, pick) in [
            ("fig3_agreement_pearson", "Pearson correlation by agreement", 0),
            ("fig4_agreement_spearman", "Spearman correlation by agreement", 1),
        ] {
            let mut csv = String::from("aspect,agree_share,disagree_share,agree_r,disagree_r\n");
            let (mut agree, mut disagree) = (Vec::new(), Vec::new());
            for row in &agreement.rows {
                let (share, a, d) = if pick == 0 {
                    (row.pearson_share, &row.agree_pearson, &row.disagree_pearson)
                } else {
                    (row.spearman_share, &row.agree_spearman, &row.disagree_spearman)
                };
                agree.push(share.map(|s| s.accepted));
                disagree.push(share.map(|s| s.rejected));
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    row.aspect.key(),
                    opt(share.map(|s| s.accepted)),
                    opt(share.map(|s| s.rejected)),
                    opt(a.map(|c| c.coefficient)),
                    opt(d.map(|c| c.coefficient))
                );
            }
            let chart = Chart {
                categories: agreement.rows.iter().map(|r| r.aspect.key().to_string()).collect(),
                series: vec![("agree".into(), agree), ("disagree".into(), disagree)],
            };
            bundle.add_figure(stem, title, csv, &chart);
        }

        let tertiles = aspect_vs_aggregate(&records);
        let mut fig6 = String::from("aspect,p33,p66,low_papers,low_mean,mid_papers,mid_mean,high_papers,high_mean\n");
        let mut series: Vec<(String, Vec<Option<f64>>)> =
            ["low", "mid", "high"].iter().map(|n| (n.to_string(), Vec::new())).collect();
        for t in &tertiles {
            let _ = write!(fig6, "{},{},{}", t.aspect.key(), num(t.p33), num(t.p66));
            for (b, s) in t.bins.iter().zip(series.iter_mut()) {
                let _ = write!(fig6, ",{},{}", b.papers, opt(b.mean_aggregate));
                s.1.push(b.mean_aggregate);
            }
            fig6.push('\n');
        }
        let chart = Chart {
            categories: tertiles.iter().map(|t| t.aspect.key().to_string()).collect(),
            series,
        };
        bundle.add_figure("fig6_aspect_vs_aggregate", "Aggregate disagreement by aspect disagreement", fig6, &chart);

        let samples = review_samples(corpus, profiles, inputs.mapping);
        let reviews: Vec<_> = samples.iter().map(|s| s.0).collect();
        let scores: Vec<f64> = samples.iter().map(|s| f64::from(s.1)).collect();
        let mut t9 = String::from("aspect,pearson,p_value,n\n");
        match aspect_importance_correlation(&reviews, &scores) {
            Ok(rows) => {
                for r in rows {
                    let n = r.correlation.map(|c| c.n.to_string()).unwrap_or_default();
                    let _ = writeln!(t9, "{},{},{}", r.aspect.key(), corr_cells(&r.correlation), n);
                }
            }
            Err(e) => warnings.push(format!("aspect importance: {e}")),
        }
        bundle.add("table9_aspect_importance.csv", t9);
    } else {
        warnings.push("no aspect profiles: figures 1-4 and 6 and table 9 skipped".into());
    }

    let reviews = corpus.eligible_papers().map(|p| p.reviews.len()).sum();
    let mut files: Vec<String> = bundle.files.keys().cloned().collect();
    files.push("summary.json".into());
    files.sort();
    let summary = Summary {
        papers: corpus.len(),
        eligible_papers: corpus.eligible_papers().count(),
        reviews,
        sentences: corpus.sentence_count(),
        decision_threshold: inputs.mapping.threshold,
        normalizer: inputs.normalizer,
        chair_agreement: chair_agreement(corpus, inputs.mapping),
        confidence_gap: confidence_gap(corpus, inputs.mapping),
        chair_intervention: chair_intervention(corpus, inputs.mapping, inputs.normalizer, inputs.intervention_rule),
        profiled_reviews: inputs.profiles.map(|p| p.reviews.len()),
        skipped_reviews: inputs.profiles.map(|p| p.skipped_reviews.len()),
        evaluations: inputs
            .evaluations
            .iter()
            .map(|e| json!({"model": e.kind.as_str(), "folds": e.folds, "n": e.n, "detection_micro_f1": e.detection_micro.f1}))
            .collect(),
        recommendation: inputs.recommendation,
        ablation_ranking: inputs.ablation.map(|a| a.ranking()),
        warnings,
        files,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    bundle.add("summary.json", text);
    bundle
}
