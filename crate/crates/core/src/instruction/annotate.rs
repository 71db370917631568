use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::parse::{parse_personality_response, parse_triplet_response};
use super::template::{personality_prompt, triplet_prompt};
use super::{InstructionError, Traits, Triplet};

pub const DEFAULT_MODEL: &str = "gpt-4o";

pub const URL_VAR: &str = "ANNOTATE_URL";
pub const KEY_VAR: &str = "ANNOTATE_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    /// POSTs `{model, prompt}` as JSON to `base_url` and expects `{text}`.
    Live { base_url: String, api_key: Option<String> },
    /// Replays `<dir>/<fixture_key>.json` files containing `{text}`.
    Fixtures { dir: PathBuf },
}

/// Exponential backoff: the wait after failed attempt `k` (1-based) is
/// `base_delay * 2^(k-1)`, capped at `max_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    prompt: &'a str,
}

#[derive(Serialize, Deserialize)]
struct Reply {
    text: String,
}

/// File stem under which the response to `prompt` is stored in fixture mode:
/// hex SHA-256 of `model`, a newline, and `prompt`.
pub fn fixture_key(model: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update(b"\n");
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

pub fn write_fixture(dir: &Path, model: &str, prompt: &str, text: &str) -> Result<PathBuf, InstructionError> {
    let path = dir.join(format!("{}.json", fixture_key(model, prompt)));
    let body = serde_json::to_string(&Reply { text: text.to_string() }).expect("reply serialises");
    std::fs::write(&path, body + "\n").map_err(|source| InstructionError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct AnnotationClient {
    backend: Backend,
    model: String,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl AnnotationClient {
    pub fn new(backend: Backend) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        Self {
            backend,
            model: DEFAULT_MODEL.to_string(),
            retry: RetryPolicy::default(),
            agent: ureq::Agent::new_with_config(config),
        }
    }

    pub fn fixtures(dir: impl Into<PathBuf>) -> Self {
        Self::new(Backend::Fixtures { dir: dir.into() })
    }

    pub fn live(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        Self::new(Backend::Live {
            base_url: base_url.into(),
            api_key,
        })
    }

    /// Live client configured from `ANNOTATE_URL` and `ANNOTATE_KEY`.
    pub fn from_env() -> Result<Self, InstructionError> {
        let url = std::env::var(URL_VAR)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .ok_or_else(|| {
                InstructionError::NotConfigured(format!("{URL_VAR} is not set and no fixture directory given"))
            })?;
        Ok(Self::live(url, std::env::var(KEY_VAR).ok().filter(|k| !k.is_empty())))
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    /// Raw completion text for `prompt`.
    pub fn complete(&self, prompt: &str) -> Result<String, InstructionError> {
        match &self.backend {
            Backend::Fixtures { dir } => self.replay(dir, prompt),
            Backend::Live { base_url, api_key } => self.post(base_url, api_key.as_deref(), prompt),
        }
    }

    fn replay(&self, dir: &Path, prompt: &str) -> Result<String, InstructionError> {
        let path = dir.join(format!("{}.json", fixture_key(&self.model, prompt)));
        let body = match std::fs::read_to_string(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(InstructionError::FixtureMissing {
                    path: path.display().to_string(),
                })
            }
            Err(source) => {
                return Err(InstructionError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let reply: Reply = serde_json::from_str(&body)
            .map_err(|e| InstructionError::InvalidPayload(format!("{}: {e}", path.display())))?;
        Ok(reply.text)
    }

    fn post(&self, url: &str, api_key: Option<&str>, prompt: &str) -> Result<String, InstructionError> {
        let body = Request {
            model: &self.model,
            prompt,
        };
        let attempts = self.retry.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            let mut req = self.agent.post(url);
            if let Some(key) = api_key {
                req = req.header("Authorization", format!("Bearer {key}"));
            }
            match req.send_json(&body) {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        let reply: Reply = resp
                            .into_body()
                            .read_json()
                            .map_err(|e| InstructionError::InvalidPayload(e.to_string()))?;
                        return Ok(reply.text);
                    }
                    let text = resp.into_body().read_to_string().unwrap_or_default();
                    if status != 429 && status < 500 {
                        return Err(InstructionError::Rejected { status, body: text });
                    }
                    last_error = format!("status {status}");
                }
                Err(e) => last_error = e.to_string(),
            }
            log::warn!("annotation attempt {attempt}/{attempts} failed: {last_error}");
            if attempt < attempts {
                thread::sleep(self.retry.delay(attempt));
            }
        }
        Err(InstructionError::ServiceUnavailable { attempts, last_error })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnotationRequest {
    Personality { novel_title: String, character: String },
    Triplets { text: String },
}

impl AnnotationRequest {
    pub fn prompt(&self) -> String {
        match self {
            AnnotationRequest::Personality { novel_title, character } => personality_prompt(novel_title, character),
            AnnotationRequest::Triplets { text } => triplet_prompt(text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Annotation {
    Personality(Traits),
    Triplets(Vec<Triplet>),
}

/// Renders the request's prompt, submits it and parses the response.
pub fn annotate(client: &AnnotationClient, request: &AnnotationRequest) -> Result<Annotation, InstructionError> {
    let text = client.complete(&request.prompt())?;
    match request {
        AnnotationRequest::Personality { .. } => parse_personality_response(&text).map(Annotation::Personality),
        AnnotationRequest::Triplets { .. } => parse_triplet_response(&text).map(Annotation::Triplets),
    }
}

/// Annotates every request with at most `max_in_flight` outstanding at once.
/// Results are in request order.
pub fn annotate_batch(
    client: &AnnotationClient,
    requests: &[AnnotationRequest],
    max_in_flight: usize,
) -> Vec<Result<Annotation, InstructionError>> {
    let run = || requests.par_iter().map(|r| annotate(client, r)).collect();
    match rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
    {
        Ok(pool) => pool.install(run),
        Err(e) => {
            log::warn!("falling back to sequential annotation: {e}");
            requests.iter().map(|r| annotate(client, r)).collect()
        }
    }
}
