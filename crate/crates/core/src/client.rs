//! The model-endpoint contract: wire types, answer parsing, endpoint
//! configuration, and the backend trait probes run against.
//!
//! The wire shape is a minimal completions-style HTTP+JSON contract
//! (`POST {base_url}/v1/complete`); the HTTP implementation lives in the
//! `benchaudit-net` crate, and the deterministic mock in [`crate::mock`]
//! implements the same trait in-process.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::rouge_l_f1;

/// Request body for `POST {base_url}/v1/complete`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub logprobs: bool,
    pub echo: bool,
}

/// One scored token in a response. `dist_mean`/`dist_std` are optional
/// per-position distribution moments; endpoints that cannot provide them
/// omit the fields and callers fall back from Min-K%++ to Min-K%.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireToken {
    pub token: String,
    pub logprob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist_std: Option<f64>,
}

/// Response body of `POST {base_url}/v1/complete`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<WireToken>>,
}

/// A completion plus transport metadata. Latency is kept for operator
/// logging only and never written into reports.
#[derive(Debug, Clone)]
pub struct ModelResponse {
    pub raw_text: String,
    pub tokens: Option<Vec<WireToken>>,
    pub latency: Duration,
    pub endpoint_id: String,
}

/// Retry policy for transient endpoint failures. `backoff` entries pair with
/// attempts; the last entry repeats when attempts exceed the schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff: vec![
                Duration::from_millis(100),
                Duration::from_millis(500),
                Duration::from_millis(2000),
            ],
        }
    }
}

/// Endpoint configuration. Temperature is pinned to zero: every audit metric
/// is a single-prediction indicator and sampling noise would contaminate the
/// baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    /// Name of the environment variable holding the bearer token, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auth_env_var: Option<String>,
    pub max_parallel_requests: usize,
    pub retry: RetryPolicy,
    pub timeout: Duration,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://127.0.0.1:8071".into(),
            auth_env_var: None,
            max_parallel_requests: 4,
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(30),
            temperature: 0.0,
            max_output_tokens: 64,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.base_url.trim().is_empty() {
            return Err(BackendError::Config("base_url is empty".into()));
        }
        if self.max_parallel_requests < 1 {
            return Err(BackendError::Config("max_parallel_requests must be >= 1".into()));
        }
        if self.temperature != 0.0 {
            return Err(BackendError::Config(
                "temperature must be 0 for audit runs".into(),
            ));
        }
        if self.retry.max_attempts < 1 {
            return Err(BackendError::Config("retry.max_attempts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response body: {0}")]
    Malformed(String),
    #[error("endpoint does not support echoed logprob scoring")]
    LogprobsUnsupported,
    #[error("nothing to score: text is empty")]
    NothingToScore,
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    #[error("mock model: {0}")]
    Mock(String),
}

impl BackendError {
    /// Transient failures worth retrying: timeouts, connection errors,
    /// 429 and 5xx statuses.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::Unreachable(_) => true,
            BackendError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }

    /// Stable machine-readable kind for error ledgers.
    pub fn kind(&self) -> &'static str {
        match self {
            BackendError::Timeout => "timeout",
            BackendError::Http { .. } => "http",
            BackendError::Malformed(_) => "malformed",
            BackendError::LogprobsUnsupported => "logprobs-unsupported",
            BackendError::NothingToScore => "nothing-to-score",
            BackendError::EmptyPrompt => "empty-prompt",
            BackendError::Unreachable(_) => "unreachable",
            BackendError::Config(_) => "config",
            BackendError::Mock(_) => "mock",
        }
    }
}

/// Anything that can answer prompts and (optionally) score text with
/// per-token logprobs. Implementations must be safe to call from multiple
/// threads; `*_many` methods return results aligned to input order.
pub trait CompletionBackend: Send + Sync {
    fn endpoint_id(&self) -> String;

    /// One completion at temperature 0.
    fn complete(&self, prompt: &str) -> Result<ModelResponse, BackendError>;

    /// Echoed scoring: per-token logprobs for `text` under the model.
    fn score(&self, text: &str) -> Result<Vec<WireToken>, BackendError>;

    fn complete_many(&self, prompts: &[String]) -> Vec<Result<ModelResponse, BackendError>> {
        prompts.iter().map(|p| self.complete(p)).collect()
    }

    fn score_many(&self, texts: &[String]) -> Vec<Result<Vec<WireToken>, BackendError>> {
        texts.iter().map(|t| self.score(t)).collect()
    }
}

/// A parsed model answer: a display-letter index, free text, or unparseable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ParsedAnswer {
    Letter(usize),
    Text(String),
    Unparseable,
}

impl ParsedAnswer {
    pub fn letter_index(&self) -> Option<usize> {
        match self {
            ParsedAnswer::Letter(i) => Some(*i),
            _ => None,
        }
    }
}

/// Extract a multiple-choice answer from raw model output.
///
/// Cascade: (1) the first standalone capital letter in `A..=` letter K,
/// bounded by non-alphanumerics; (2) otherwise the displayed choice with the
/// best ROUGE-L F1 against the raw text, accepted when F1 >= 0.5 and the
/// argmax is unique; (3) otherwise unparseable. Never returns an index >= K.
pub fn parse_mcq_answer(raw_text: &str, k: usize, displayed_choices: &[String]) -> ParsedAnswer {
    debug_assert_eq!(k, displayed_choices.len());
    if k < 2 || k > 26 {
        return ParsedAnswer::Unparseable;
    }
    let last_letter = (b'A' + (k as u8) - 1) as char;
    let chars: Vec<char> = raw_text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if ('A'..=last_letter).contains(&c) {
            let prev_ok = i == 0 || !chars[i - 1].is_alphanumeric();
            let next_ok = i + 1 == chars.len() || !chars[i + 1].is_alphanumeric();
            if prev_ok && next_ok {
                return ParsedAnswer::Letter((c as u8 - b'A') as usize);
            }
        }
    }
    let scores: Vec<f64> = displayed_choices.iter().map(|c| rouge_l_f1(raw_text, c)).collect();
    let best = scores
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if best >= 0.5 {
        let winners: Vec<usize> = scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == best)
            .map(|(i, _)| i)
            .collect();
        if winners.len() == 1 {
            return ParsedAnswer::Letter(winners[0]);
        }
    }
    ParsedAnswer::Unparseable
}

/// Build the wire request used for echoed scoring.
pub fn scoring_request(text: &str) -> WireRequest {
    WireRequest {
        prompt: text.to_string(),
        max_tokens: 0,
        temperature: 0.0,
        logprobs: true,
        echo: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn choices(texts: &[&str]) -> Vec<String> {
        texts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_standalone_letter() {
        let c = choices(&["north gate", "south gate", "east gate", "west gate"]);
        assert_eq!(parse_mcq_answer("The answer is B.", 4, &c), ParsedAnswer::Letter(1));
        assert_eq!(parse_mcq_answer("D", 4, &c), ParsedAnswer::Letter(3));
        assert_eq!(parse_mcq_answer("(C)", 4, &c), ParsedAnswer::Letter(2));
        // letters embedded in words do not count
        assert_eq!(parse_mcq_answer("ABCD glued", 4, &c), ParsedAnswer::Unparseable);
        // letters beyond K do not count
        assert_eq!(parse_mcq_answer("E", 4, &c), ParsedAnswer::Unparseable);
    }

    #[test]
    fn falls_back_to_rouge_match() {
        let c = choices(&["north gate", "south gate", "east gate", "the old harbor wall"]);
        assert_eq!(
            parse_mcq_answer("the old harbor wall", 4, &c),
            ParsedAnswer::Letter(3)
        );
    }

    #[test]
    fn dissimilar_text_is_unparseable() {
        let c = choices(&["north gate", "south gate", "east gate", "west gate"]);
        assert_eq!(
            parse_mcq_answer("I cannot tell from this", 4, &c),
            ParsedAnswer::Unparseable
        );
    }

    #[test]
    fn ambiguous_rouge_tie_is_unparseable() {
        let c = choices(&["same text", "same text"]);
        assert_eq!(parse_mcq_answer("same text", 2, &c), ParsedAnswer::Unparseable);
    }

    #[test]
    fn never_returns_index_out_of_range() {
        let c = choices(&["a b", "c d"]);
        for raw in ["Z", "C", "D.", "the answer", ""] {
            if let ParsedAnswer::Letter(i) = parse_mcq_answer(raw, 2, &c) {
                assert!(i < 2, "raw {raw:?} gave out-of-range {i}");
            }
        }
    }

    #[test]
    fn endpoint_config_enforces_temperature_zero() {
        let mut cfg = EndpointConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.temperature = 0.7;
        assert!(cfg.validate().is_err());
    }
}
