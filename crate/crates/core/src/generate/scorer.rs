//! Triple scorers: a constant stub and an HTTP client for the
//! discriminator service.
//!
//! Wire protocol: `POST {base}/score` with
//! `{"triples":[{"head":…,"relation":…,"tail":…},…]}` answered by
//! `{"scores":[…]}`; `GET {base}/health` answers `{"status":"ok"}`.

use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::Triple;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("scorer unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("scorer protocol violation: {0}")]
    Protocol(String),
    #[error("invalid scorer configuration: {0}")]
    Config(String),
}

/// Anything that maps triples to plausibility scores in `[0, 1]`.
pub trait Scorer: Sync {
    fn score_batch(&self, triples: &[Triple]) -> Result<Vec<f64>, ScorerError>;

    fn batch_size(&self) -> usize {
        64
    }
}

/// Scores everything with one constant.
#[derive(Debug, Clone, Copy)]
pub struct StubScorer {
    pub value: f64,
}

impl Default for StubScorer {
    fn default() -> Self {
        StubScorer { value: 0.5 }
    }
}

impl Scorer for StubScorer {
    fn score_batch(&self, triples: &[Triple]) -> Result<Vec<f64>, ScorerError> {
        Ok(vec![self.value; triples.len()])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerEndpoint {
    pub base_url: String,
    pub timeout: Duration,
    pub batch_size: usize,
    /// Extra attempts after a transport failure or 5xx.
    pub retries: u32,
    pub backoff: Duration,
}

impl ScorerEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            timeout: Duration::from_secs(30),
            batch_size: 64,
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    triples: &'a [Triple],
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

#[derive(Deserialize)]
struct HealthResponse {
    status: String,
}

pub struct HttpScorer {
    endpoint: ScorerEndpoint,
    agent: ureq::Agent,
}

impl HttpScorer {
    pub fn new(endpoint: ScorerEndpoint) -> Result<Self, ScorerError> {
        if endpoint.batch_size == 0 {
            return Err(ScorerError::Config("batch size must be at least 1".into()));
        }
        let agent = ureq::AgentBuilder::new().timeout(endpoint.timeout).build();
        Ok(Self { endpoint, agent })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{path}", self.endpoint.base_url.trim_end_matches('/'))
    }

    // Retries transport errors and 5xx responses; 4xx fails at once.
    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T, ureq::Error>) -> Result<T, ScorerError> {
        let attempts = self.endpoint.retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match call() {
                Ok(v) => return Ok(v),
                Err(ureq::Error::Status(code, resp)) if code < 500 => {
                    let body = resp.into_string().unwrap_or_default();
                    return Err(ScorerError::Protocol(format!("HTTP {code}: {body}")));
                }
                Err(e) => last = e.to_string(),
            }
            if attempt < attempts {
                thread::sleep(self.endpoint.backoff * attempt);
            }
        }
        Err(ScorerError::Transport {
            attempts,
            message: last,
        })
    }

    /// The service's reported status (`ok`, or `warming` during start-up).
    pub fn health(&self) -> Result<String, ScorerError> {
        let resp = self.with_retries(|| self.agent.get(&self.url("health")).call())?;
        let health: HealthResponse = resp
            .into_json()
            .map_err(|e| ScorerError::Protocol(format!("bad health body: {e}")))?;
        Ok(health.status)
    }
}

impl Scorer for HttpScorer {
    fn score_batch(&self, triples: &[Triple]) -> Result<Vec<f64>, ScorerError> {
        let body = ScoreRequest { triples };
        let resp = self.with_retries(|| self.agent.post(&self.url("score")).send_json(&body))?;
        let parsed: ScoreResponse = resp
            .into_json()
            .map_err(|e| ScorerError::Protocol(format!("bad score body: {e}")))?;
        check_scores(triples.len(), &parsed.scores)?;
        Ok(parsed.scores)
    }

    fn batch_size(&self) -> usize {
        self.endpoint.batch_size
    }
}

/// One score per input, each a finite value in `[0, 1]`.
pub fn check_scores(expected: usize, scores: &[f64]) -> Result<(), ScorerError> {
    if scores.len() != expected {
        return Err(ScorerError::Protocol(format!(
            "expected {expected} scores, got {}",
            scores.len()
        )));
    }
    if let Some((i, s)) = scores.iter().enumerate().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
        return Err(ScorerError::Protocol(format!("score {s} at position {i} is outside [0, 1]")));
    }
    Ok(())
}

/// Scores any number of triples in batches, preserving order. Batches run
/// concurrently on the rayon pool, which bounds the requests in flight.
pub fn score_all(scorer: &dyn Scorer, triples: &[Triple]) -> Result<Vec<f64>, ScorerError> {
    let batch = scorer.batch_size().max(1);
    let chunks: Vec<Vec<f64>> = triples
        .par_chunks(batch)
        .map(|chunk| {
            let scores = scorer.score_batch(chunk)?;
            check_scores(chunk.len(), &scores)?;
            Ok(scores)
        })
        .collect::<Result<_, ScorerError>>()?;
    Ok(chunks.into_iter().flatten().collect())
}
