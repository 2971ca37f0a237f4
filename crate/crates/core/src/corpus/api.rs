//! Client for an OpenReview-style notes API.
//!
//! Submissions are listed page by page from
//! `GET {base}/notes?invitation={venue}&details=replies&offset={o}&limit={n}`,
//! answering `{"notes": [...], "count": total}`. Each note carries
//! `content.{title, decision, year}` and its official reviews under
//! `details.replies[*].content.{rating, confidence, review}`. Raw page bodies
//! are cached on disk; a warm cache is served without touching the network.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::{Corpus, CorpusError, Decision, Paper, Review};

pub const API_BASE_ENV: &str = "REVMINE_API_BASE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiConfig {
    pub base_url: String,
    pub venue_id: String,
    #[serde(default = "default_page_size")]
    pub page_size: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_page_size() -> usize {
    100
}

fn default_retries() -> u32 {
    2
}

impl ApiConfig {
    pub fn new(base_url: impl Into<String>, venue_id: impl Into<String>) -> Self {
        ApiConfig {
            base_url: base_url.into(),
            venue_id: venue_id.into(),
            page_size: default_page_size(),
            cache_dir: None,
            max_retries: default_retries(),
        }
    }

    /// Reads a JSON config file and applies the `REVMINE_API_BASE` override.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, FetchError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| FetchError::Config(format!("{}: {e}", path.display())))?;
        let mut config: ApiConfig =
            serde_json::from_str(&text).map_err(|e| FetchError::Config(format!("{}: {e}", path.display())))?;
        config.apply_env();
        Ok(config)
    }

    pub fn apply_env(&mut self) {
        if let Ok(base) = std::env::var(API_BASE_ENV) {
            if !base.trim().is_empty() {
                self.base_url = base;
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("network failure for {url}: {message}")]
    Network { url: String, message: String },
    #[error("venue not found: {0}")]
    VenueNotFound(String),
    #[error("http status {status} for {url}")]
    Http { status: u16, url: String },
    #[error("ingestion error, offending fields: {}", .0.join(", "))]
    Schema(Vec<String>),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl FetchError {
    pub fn is_retryable(&self) -> bool {
        match self {
            FetchError::Network { .. } => true,
            FetchError::Http { status, .. } => *status >= 500 || *status == 429,
            _ => false,
        }
    }
}

fn sanitize(venue: &str) -> String {
    venue
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

struct Client {
    agent: ureq::Agent,
    config: ApiConfig,
}

impl Client {
    fn new(config: ApiConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        Client { agent, config }
    }

    fn cache_path(&self, offset: usize) -> Option<PathBuf> {
        self.config.cache_dir.as_ref().map(|dir| {
            dir.join(sanitize(&self.config.venue_id))
                .join(format!("page_{offset}_{}.json", self.config.page_size))
        })
    }

    fn page_url(&self, offset: usize) -> String {
        format!(
            "{}/notes?invitation={}&details=replies&offset={}&limit={}",
            self.config.base_url.trim_end_matches('/'),
            encode_component(&self.config.venue_id),
            offset,
            self.config.page_size
        )
    }

    fn get_once(&self, url: &str) -> Result<String, FetchError> {
        let mut response = self.agent.get(url).call().map_err(|e| FetchError::Network {
            url: url.to_string(),
            message: e.to_string(),
        })?;
        let status = response.status().as_u16();
        if status == 404 {
            return Err(FetchError::VenueNotFound(self.config.venue_id.clone()));
        }
        if !(200..300).contains(&status) {
            return Err(FetchError::Http {
                status,
                url: url.to_string(),
            });
        }
        response
            .body_mut()
            .read_to_string()
            .map_err(|e| FetchError::Network {
                url: url.to_string(),
                message: e.to_string(),
            })
    }

    fn page(&self, offset: usize) -> Result<String, FetchError> {
        let cache = self.cache_path(offset);
        if let Some(path) = &cache {
            if let Ok(body) = fs::read_to_string(path) {
                return Ok(body);
            }
        }
        let url = self.page_url(offset);
        let mut attempt = 0;
        let body = loop {
            match self.get_once(&url) {
                Ok(body) => break body,
                Err(err) if err.is_retryable() && attempt < self.config.max_retries => {
                    attempt += 1;
                    thread::sleep(Duration::from_millis(100 * u64::from(attempt)));
                }
                Err(err) => return Err(err),
            }
        };
        if let Some(path) = &cache {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| FetchError::Cache(format!("{}: {e}", dir.display())))?;
            }
            fs::write(path, &body).map_err(|e| FetchError::Cache(format!("{}: {e}", path.display())))?;
        }
        Ok(body)
    }
}

fn encode_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.' | b'~' | b'/') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Fetches every submission of `config.venue_id` into a normalized corpus.
pub fn fetch_corpus(config: &ApiConfig) -> Result<Corpus, FetchError> {
    if config.page_size == 0 {
        return Err(FetchError::Config("page_size must be positive".into()));
    }
    let client = Client::new(config.clone());
    let mut papers = Vec::new();
    let mut offset = 0usize;
    loop {
        let body = client.page(offset)?;
        let page: Value = serde_json::from_str(&body)
            .map_err(|e| FetchError::Schema(vec![format!("page@{offset}: invalid json ({e})")]))?;
        let notes = page
            .get("notes")
            .and_then(Value::as_array)
            .ok_or_else(|| FetchError::Schema(vec![format!("page@{offset}.notes")]))?;
        let count = page.get("count").and_then(Value::as_u64).map(|c| c as usize);
        let mut problems = Vec::new();
        for (i, note) in notes.iter().enumerate() {
            match note_to_paper(note, &config.venue_id, &format!("notes[{}]", offset + i)) {
                Ok(paper) => papers.push(paper),
                Err(mut fields) => problems.append(&mut fields),
            }
        }
        if !problems.is_empty() {
            return Err(FetchError::Schema(problems));
        }
        offset += notes.len();
        let exhausted = notes.len() < config.page_size || count.is_some_and(|c| offset >= c);
        if notes.is_empty() || exhausted {
            break;
        }
    }
    Ok(Corpus::new(papers)?)
}

fn year_from_venue(venue: &str) -> Option<u32> {
    venue
        .split(|c: char| !c.is_ascii_digit())
        .find(|part| part.len() == 4)
        .and_then(|y| y.parse().ok())
}

pub fn parse_decision(raw: &str) -> Option<Decision> {
    let lower = raw.to_lowercase();
    if lower.contains("withdr") {
        Some(Decision::Withdrawn)
    } else if lower.contains("workshop") {
        Some(Decision::Workshop)
    } else if lower.contains("oral") || lower.contains("spotlight") {
        Some(Decision::Oral)
    } else if lower.contains("poster") || lower == "accept" {
        Some(Decision::Poster)
    } else if lower.contains("reject") {
        Some(Decision::Reject)
    } else {
        None
    }
}

/// Reads "6: Marginally above threshold", "6" or 6.
fn leading_int(value: &Value) -> Option<i64> {
    match value {
        Value::Number(n) => n.as_i64(),
        Value::String(s) => s.split(':').next()?.trim().parse().ok(),
        _ => None,
    }
}

fn note_to_paper(note: &Value, venue: &str, at: &str) -> Result<Paper, Vec<String>> {
    let mut problems = Vec::new();
    let id = note.get("id").and_then(Value::as_str);
    if id.is_none() {
        problems.push(format!("{at}.id"));
    }
    let content = note.get("content");
    let title = content.and_then(|c| c.get("title")).and_then(Value::as_str);
    if title.is_none() {
        problems.push(format!("{at}.content.title"));
    }
    let decision = content
        .and_then(|c| c.get("decision"))
        .and_then(Value::as_str)
        .and_then(parse_decision);
    if decision.is_none() {
        problems.push(format!("{at}.content.decision"));
    }
    let year = content
        .and_then(|c| c.get("year"))
        .and_then(Value::as_u64)
        .map(|y| y as u32)
        .or_else(|| year_from_venue(venue));
    if year.is_none() {
        problems.push(format!("{at}.content.year"));
    }
    let replies = note
        .get("details")
        .and_then(|d| d.get("replies"))
        .and_then(Value::as_array)
        .cloned()
        .unwrap_or_default();
    let mut reviews = Vec::new();
    for (r, reply) in replies.iter().enumerate() {
        let rat = format!("{at}.details.replies[{r}]");
        let Some(rc) = reply.get("content") else { continue };
        // Comments and meta-reviews carry no rating.
        let Some(rating) = rc.get("rating") else { continue };
        let score = leading_int(rating).filter(|s| (1..=10).contains(s));
        if score.is_none() {
            problems.push(format!("{rat}.content.rating"));
        }
        let confidence = match rc.get("confidence") {
            None | Some(Value::Null) => Ok(None),
            Some(v) => leading_int(v).filter(|c| (1..=5).contains(c)).map(Some).ok_or(()),
        };
        if confidence.is_err() {
            problems.push(format!("{rat}.content.confidence"));
        }
        let text = rc.get("review").and_then(Value::as_str);
        if text.is_none() {
            problems.push(format!("{rat}.content.review"));
        }
        let rid = reply.get("id").and_then(Value::as_str);
        if rid.is_none() {
            problems.push(format!("{rat}.id"));
        }
        let alias = reply
            .get("signatures")
            .and_then(Value::as_array)
            .and_then(|s| s.first())
            .and_then(Value::as_str)
            .map(|s| s.rsplit('/').next().unwrap_or(s).to_string())
            .unwrap_or_else(|| format!("reviewer{r}"));
        if let (Some(score), Ok(confidence), Some(text), Some(rid)) = (score, confidence, text, rid) {
            reviews.push(Review {
                id: rid.to_string(),
                paper_id: id.unwrap_or_default().to_string(),
                reviewer_alias: alias,
                score: score as u8,
                confidence: confidence.map(|c| c as u8),
                text: text.to_string(),
                sentences: vec![],
            });
        }
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    Ok(Paper {
        id: id.unwrap_or_default().to_string(),
        year: year.unwrap_or_default(),
        title: title.unwrap_or_default().to_string(),
        decision: decision.expect("checked above"),
        reviews,
    })
}
