//! One function per pipeline command. Each returns the artifacts it wrote.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use revmine_core::active_learning::{cold_start, entropy_batch, SelectionRound};
use revmine_core::aggregation::{paper_profiles_csv, profile_corpus, review_profiles_csv, Profiles};
use revmine_core::analytics::{ablation, review_samples, train_recommendation_net, AblationReport, RecNetReport};
use revmine_core::annotation::{AnnotationStore, TrainingSet};
use revmine_core::corpus::api::{fetch_corpus, ApiConfig};
use revmine_core::corpus::load_corpus;
use revmine_core::features::{load_embeddings, EmbeddingTable};
use revmine_core::models::{
    cross_validate, parse_predictions, predictions_to_jsonl, AspectClassifier, EvalReport, ModelConfig,
};
use revmine_core::report::{build_report, ReportInputs};
use revmine_core::{rng, Corpus};
use revmine_server::{AppState, RoundSettings, TOKEN_ENV};

use crate::config::RunConfig;
use crate::workspace::{Artifact, Workspace};

pub struct Ctx<'a> {
    pub ws: &'a Workspace,
    pub config: &'a RunConfig,
}

fn note(msg: impl AsRef<str>) {
    eprintln!("{}", msg.as_ref());
}

fn load_segmented(ws: &Workspace) -> Result<Corpus> {
    let path = ws.require(Artifact::Segmented)?;
    Ok(load_corpus(&path).with_context(|| format!("loading {}", path.display()))?)
}

fn load_table(ws: &Workspace) -> Result<EmbeddingTable> {
    let path = ws.require(Artifact::Embeddings)?;
    Ok(load_embeddings(&path).with_context(|| format!("loading {}", path.display()))?)
}

/// Embeddings when the model needs them.
fn embeddings_for(ws: &Workspace, model: &ModelConfig) -> Result<Option<EmbeddingTable>> {
    if model.kind.uses_embeddings() {
        load_table(ws).map(Some)
    } else {
        Ok(None)
    }
}

fn all_sentences(corpus: &Corpus) -> Vec<(String, String)> {
    corpus.sentences().map(|s| (s.id.clone(), s.text.clone())).collect()
}

fn read_rounds(ws: &Workspace) -> Result<Vec<SelectionRound>> {
    let dir = ws.path(Artifact::Rounds);
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut rounds = Vec::new();
    for entry in std::fs::read_dir(&dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(&path)?;
            let round: SelectionRound =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            rounds.push(round);
        }
    }
    rounds.sort_by_key(|r| r.round_id);
    Ok(rounds)
}

/// The adjudicated training set. A journal, when present, is exported first
/// so the file reflects the latest annotations.
fn training_set(ws: &Workspace, corpus: &Corpus) -> Result<TrainingSet> {
    if ws.has(Artifact::Journal) {
        let store = AnnotationStore::open(ws.path(Artifact::Journal), all_sentences(corpus))?;
        let set = store.export_training_set();
        ws.write(Artifact::Training.rel_path(), set.to_jsonl())?;
        return Ok(set);
    }
    let path = ws.require(Artifact::Training)?;
    let text = std::fs::read_to_string(&path)?;
    Ok(TrainingSet::parse_jsonl(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn ingest(ctx: &Ctx, input: Option<&Path>) -> Result<Vec<PathBuf>> {
    let Some(source) = input.or(ctx.config.corpus.as_deref()) else {
        bail!("no corpus given; pass --input or set `corpus` in the config");
    };
    let corpus = load_corpus(source).with_context(|| format!("loading {}", source.display()))?;
    let mut out = vec![ctx.ws.write(Artifact::Corpus.rel_path(), corpus.to_jsonl())?];
    note(format!("ingested {} papers", corpus.len()));
    if let Some(path) = &ctx.config.embeddings {
        let table = load_embeddings(path).with_context(|| format!("loading {}", path.display()))?;
        out.push(ctx.ws.write(Artifact::Embeddings.rel_path(), table.to_jsonl())?);
        note(format!("ingested {} embeddings of dimension {}", table.len(), table.dimension));
    }
    if let Some(path) = &ctx.config.training {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let set = TrainingSet::parse_jsonl(&text).with_context(|| format!("parsing {}", path.display()))?;
        out.push(ctx.ws.write(Artifact::Training.rel_path(), set.to_jsonl())?);
        note(format!("ingested {} labelled sentences", set.len()));
    }
    Ok(out)
}

pub fn fetch(ctx: &Ctx, api_config: Option<&Path>) -> Result<Vec<PathBuf>> {
    let config = match (api_config, &ctx.config.api) {
        (Some(path), _) => ApiConfig::load(path)?,
        (None, Some(api)) => {
            let mut api = api.clone();
            api.apply_env();
            api
        }
        (None, None) => bail!("no API configured; pass --api-config or set `api` in the config"),
    };
    let corpus = fetch_corpus(&config)?;
    note(format!("fetched {} papers from {}", corpus.len(), config.venue_id));
    Ok(vec![ctx.ws.write(Artifact::Corpus.rel_path(), corpus.to_jsonl())?])
}

pub fn segment(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let path = ctx.ws.require(Artifact::Corpus)?;
    let corpus = load_corpus(&path)?.segmented();
    note(format!("{} eligible sentences", corpus.sentence_count()));
    Ok(vec![ctx.ws.write(Artifact::Segmented.rel_path(), corpus.to_jsonl())?])
}

fn write_round(ctx: &Ctx, round: &SelectionRound) -> Result<PathBuf> {
    for w in &round.warnings {
        note(format!("warning: {w}"));
    }
    note(format!(
        "round {}: {} sentences selected from {} candidates",
        round.round_id,
        round.selected.len(),
        round.candidate_count
    ));
    Ok(round.write(ctx.ws.path(Artifact::Rounds))?)
}

pub fn bootstrap(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let corpus = load_segmented(ctx.ws)?;
    let table = load_table(ctx.ws)?;
    let candidates: Vec<String> = corpus.sentences().filter(|s| table.contains(&s.id)).map(|s| s.id.clone()).collect();
    if candidates.is_empty() {
        bail!("no sentence has an embedding; check that embeddings.jsonl matches the segmented corpus");
    }
    let mut r = rng::derived(ctx.config.seed, 1);
    let seeds: Vec<String> = candidates.choose_multiple(&mut r, ctx.config.seed_sentences).cloned().collect();
    let round = cold_start(&seeds, &table, &corpus, &ctx.config.cold_start, ctx.config.seed, 1)?;
    Ok(vec![write_round(ctx, &round)?])
}

pub fn select_batch(ctx: &Ctx, round_id: Option<u32>) -> Result<Vec<PathBuf>> {
    let corpus = load_segmented(ctx.ws)?;
    let training = training_set(ctx.ws, &corpus)?;
    if training.is_empty() {
        bail!("training set is empty; adjudicate some sentences first");
    }
    let rounds = read_rounds(ctx.ws)?;
    let round_id = round_id.unwrap_or_else(|| rounds.last().map_or(1, |r| r.round_id + 1));
    let mut used: BTreeSet<&str> = training.examples.iter().map(|e| e.sentence_id.as_str()).collect();
    for r in rounds.iter().filter(|r| r.round_id < round_id) {
        used.extend(r.selected.iter().map(String::as_str));
    }
    let unlabeled: Vec<(String, String)> = all_sentences(&corpus).into_iter().filter(|(id, _)| !used.contains(id.as_str())).collect();
    let embeddings = embeddings_for(ctx.ws, &ctx.config.selection_model)?;
    let seed = ctx.config.seed.wrapping_add(u64::from(round_id));
    let model = AspectClassifier::train(&training.examples, &ctx.config.selection_model, embeddings.as_ref(), seed)?;
    let round = entropy_batch(&model.scorer(embeddings.as_ref()), &unlabeled, &ctx.config.entropy_batch, seed, round_id)?;
    Ok(vec![write_round(ctx, &round)?])
}

pub fn serve(ctx: &Ctx, addr: Option<&str>, export_only: bool) -> Result<Vec<PathBuf>> {
    let corpus = load_segmented(ctx.ws)?;
    let pool = all_sentences(&corpus);
    let journal = ctx.ws.path(Artifact::Journal);
    std::fs::create_dir_all(journal.parent().expect("journal has a parent"))?;
    let mut store = AnnotationStore::open(&journal, pool.clone())?;
    if export_only {
        let set = store.export_training_set();
        note(format!("exported {} labelled sentences", set.len()));
        return Ok(vec![ctx.ws.write(Artifact::Training.rel_path(), set.to_jsonl())?]);
    }
    for a in &ctx.config.serve.annotators {
        store.register_annotator(&a.id, a.role)?;
    }
    let known: BTreeSet<u32> = store.rounds().iter().map(|r| r.round_id).collect();
    for round in read_rounds(ctx.ws)? {
        if !known.contains(&round.round_id) {
            store.open_round(round)?;
        }
    }
    let settings = RoundSettings {
        pool,
        embeddings: embeddings_for(ctx.ws, &ctx.config.selection_model)?,
        model: ctx.config.selection_model,
        params: ctx.config.entropy_batch,
        seed: ctx.config.seed,
        rounds_dir: Some(ctx.ws.path(Artifact::Rounds)),
    };
    let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
    if token.is_none() {
        note(format!("warning: {TOKEN_ENV} is not set; the service accepts unauthenticated requests"));
    }
    let addr: std::net::SocketAddr = addr
        .unwrap_or(&ctx.config.serve.addr)
        .parse()
        .context("parsing the listen address")?;
    let state = AppState::new(store, token, Some(settings));
    note(format!("serving on http://{addr}"));
    tokio::runtime::Runtime::new()?.block_on(revmine_server::serve(addr, state))?;
    Ok(vec![journal])
}

pub fn train(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let corpus = load_segmented(ctx.ws)?;
    let training = training_set(ctx.ws, &corpus)?;
    if training.is_empty() {
        bail!("training set is empty; adjudicate some sentences first");
    }
    let mut evaluations: Vec<EvalReport> = Vec::new();
    let folds = ctx.config.folds.min(training.len());
    let table = if ctx.ws.has(Artifact::Embeddings) { Some(load_table(ctx.ws)?) } else { None };
    for &kind in &ctx.config.evaluate {
        if kind.uses_embeddings() && table.is_none() {
            note(format!("warning: skipping {kind} evaluation; it needs embeddings"));
            continue;
        }
        if folds < 2 {
            note("warning: too few examples to cross-validate");
            break;
        }
        let config = if kind == ctx.config.model.kind { ctx.config.model } else { ModelConfig::new(kind) };
        let report = cross_validate(&training.examples, &config, table.as_ref(), folds, ctx.config.seed)?;
        note(format!("{kind}: detection micro-F1 {:.3}", report.detection_micro.f1));
        evaluations.push(report);
    }
    let eval = ctx.ws.write(Artifact::Evaluation.rel_path(), pretty(&evaluations)?)?;
    let embeddings = embeddings_for(ctx.ws, &ctx.config.model)?;
    let model = AspectClassifier::train(&training.examples, &ctx.config.model, embeddings.as_ref(), ctx.config.seed)?;
    let path = ctx.ws.path(Artifact::Classifier);
    model.save(&path)?;
    note(format!("trained {} on {} sentences", ctx.config.model.kind, training.len()));
    Ok(vec![ctx.ws.path(Artifact::Training), eval, path])
}

pub fn label_all(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let corpus = load_segmented(ctx.ws)?;
    let model = AspectClassifier::load(ctx.ws.require(Artifact::Classifier)?)?;
    let embeddings = if ctx.ws.has(Artifact::Embeddings) { Some(load_table(ctx.ws)?) } else { None };
    let predictions = model.predict(&all_sentences(&corpus), embeddings.as_ref())?;
    note(format!("labelled {} sentences", predictions.len()));
    Ok(vec![ctx.ws.write(Artifact::Predictions.rel_path(), predictions_to_jsonl(&predictions))?])
}

pub fn aggregate(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let corpus = load_segmented(ctx.ws)?;
    let text = std::fs::read_to_string(ctx.ws.require(Artifact::Predictions)?)?;
    let predictions = parse_predictions(&text).context("parsing predictions")?;
    let profiles = profile_corpus(&corpus, &predictions)?;
    if !profiles.skipped_reviews.is_empty() {
        note(format!("warning: {} reviews have no sentences and were skipped", profiles.skipped_reviews.len()));
    }
    Ok(vec![
        ctx.ws.write(Artifact::Profiles.rel_path(), pretty(&profiles)?)?,
        ctx.ws.write("profiles/reviews.csv", review_profiles_csv(&profiles.reviews))?,
        ctx.ws.write("profiles/papers.csv", paper_profiles_csv(&profiles.papers))?,
    ])
}

pub fn analyze(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    ctx.ws.require(Artifact::Predictions)?;
    let corpus = load_segmented(ctx.ws)?;
    let profiles: Profiles = read_json(&ctx.ws.require(Artifact::Profiles)?)?;
    let samples = review_samples(&corpus, &profiles, ctx.config.mapping()?);
    let vectors: Vec<[f64; 24]> = samples.iter().map(|s| s.0.feature_vector()).collect();
    let labels: Vec<bool> = samples.iter().map(|s| s.2).collect();
    let params = &ctx.config.recommendation;
    let (report, net) = train_recommendation_net(&vectors, &labels, params, ctx.config.seed)?;
    note(format!("recommendation accuracy {:.3} over {} reviews", report.cv_accuracy, report.n));
    let mut out = vec![
        ctx.ws.write(Artifact::Recommendation.rel_path(), pretty(&report)?)?,
        ctx.ws.write("analysis/recommendation_model.json", pretty(&net)?)?,
    ];
    let ablation_path = ctx.ws.path(Artifact::Ablation);
    if ctx.config.ablation {
        let ab = ablation(&vectors, &labels, params, ctx.config.seed)?;
        let ranking: Vec<&str> = ab.ranking().iter().map(|a| a.key()).collect();
        note(format!("ablation ranking: {}", ranking.join(", ")));
        out.push(ctx.ws.write(Artifact::Ablation.rel_path(), pretty(&ab)?)?);
    } else if ablation_path.exists() {
        std::fs::remove_file(&ablation_path)?;
    }
    Ok(out)
}

pub fn report(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let corpus = load_segmented(ctx.ws)?;
    let optional = |a: Artifact| Some(ctx.ws.path(a)).filter(|p| p.exists());
    let profiles: Option<Profiles> = optional(Artifact::Profiles).map(|p| read_json(&p)).transpose()?;
    let evaluations: Vec<EvalReport> = optional(Artifact::Evaluation).map(|p| read_json(&p)).transpose()?.unwrap_or_default();
    let recommendation: Option<RecNetReport> = optional(Artifact::Recommendation).map(|p| read_json(&p)).transpose()?;
    let ablation: Option<AblationReport> = optional(Artifact::Ablation).map(|p| read_json(&p)).transpose()?;
    let training = optional(Artifact::Training)
        .map(|p| -> Result<TrainingSet> { Ok(TrainingSet::parse_jsonl(&std::fs::read_to_string(p)?)?) })
        .transpose()?;
    let inputs = ReportInputs {
        mapping: ctx.config.mapping()?,
        normalizer: ctx.config.normalizer,
        intervention_rule: ctx.config.intervention_rule,
        profiles: profiles.as_ref(),
        label_distribution: training.as_ref().map(|t| &t.distribution),
        evaluations: &evaluations,
        recommendation: recommendation.as_ref(),
        ablation: ablation.as_ref(),
        ..ReportInputs::new(&corpus)
    };
    let bundle = build_report(&inputs);
    let dir = ctx.ws.path(Artifact::Reports);
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    bundle.write(&dir)?;
    note(format!("wrote {} report files to {}", bundle.files.len(), dir.display()));
    Ok(vec![dir])
}
