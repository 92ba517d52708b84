//! Blocking HTTP client for the completion wire contract, with retries and
//! bounded request parallelism.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use benchaudit_core::client::{
    scoring_request, BackendError, CompletionBackend, EndpointConfig, ModelResponse, WireRequest,
    WireResponse, WireToken,
};

/// A completions-style HTTP client bound to one endpoint.
///
/// Single requests retry transient failures (timeouts, connection errors,
/// 429/5xx) according to the configured policy; batch calls keep at most
/// `max_parallel_requests` requests in flight.
pub struct HttpCompletionClient {
    config: EndpointConfig,
    http: reqwest::blocking::Client,
    bearer_token: Option<String>,
}

impl HttpCompletionClient {
    pub fn new(config: EndpointConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let bearer_token = config
            .auth_env_var
            .as_ref()
            .and_then(|name| std::env::var(name).ok())
            .filter(|token| !token.is_empty());
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpCompletionClient { config, http, bearer_token })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn completion_url(&self) -> String {
        format!("{}/v1/complete", self.config.base_url.trim_end_matches('/'))
    }

    fn send_once(&self, request: &WireRequest) -> Result<WireResponse, BackendError> {
        let mut builder = self.http.post(self.completion_url()).json(request);
        if let Some(token) = &self.bearer_token {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Unreachable(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        if status != 200 {
            let body = response.text().unwrap_or_default();
            return Err(BackendError::Http { status, body: truncate(&body, 200) });
        }
        response
            .json::<WireResponse>()
            .map_err(|e| BackendError::Malformed(e.to_string()))
    }

    /// Retry loop around one wire request. Only failed attempts are retried,
    /// so a successful request is never duplicated.
    fn send_with_retry(&self, request: &WireRequest) -> Result<WireResponse, BackendError> {
        let policy = &self.config.retry;
        let mut attempt = 1;
        loop {
            match self.send_once(request) {
                Ok(response) => return Ok(response),
                Err(err) if err.is_retryable() && attempt < policy.max_attempts => {
                    let step = (attempt as usize - 1).min(policy.backoff.len().saturating_sub(1));
                    if let Some(delay) = policy.backoff.get(step) {
                        std::thread::sleep(*delay);
                    }
                    attempt += 1;
                }
                Err(err) => return Err(err),
            }
        }
    }

    fn answer_request(&self, prompt: &str) -> WireRequest {
        WireRequest {
            prompt: prompt.to_string(),
            max_tokens: self.config.max_output_tokens,
            temperature: self.config.temperature,
            logprobs: false,
            echo: false,
        }
    }

    /// Run `jobs` with at most `max_parallel_requests` worker threads;
    /// results come back aligned to input order.
    fn bounded_parallel<T, F>(&self, inputs: &[String], job: F) -> Vec<Result<T, BackendError>>
    where
        T: Send,
        F: Fn(&str) -> Result<T, BackendError> + Sync,
    {
        let n = inputs.len();
        if n == 0 {
            return Vec::new();
        }
        let workers = self.config.max_parallel_requests.min(n);
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<(usize, Result<T, BackendError>)>();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let next = &next;
                let job = &job;
                scope.spawn(move || loop {
                    let index = next.fetch_add(1, Ordering::Relaxed);
                    if index >= n {
                        break;
                    }
                    let result = job(&inputs[index]);
                    if tx.send((index, result)).is_err() {
                        break;
                    }
                });
            }
        });
        drop(tx);
        let mut results: Vec<Option<Result<T, BackendError>>> = (0..n).map(|_| None).collect();
        for (index, result) in rx {
            results[index] = Some(result);
        }
        results
            .into_iter()
            .map(|r| r.expect("every index produced exactly one result"))
            .collect()
    }
}

fn truncate(s: &str, max: usize) -> String {
    if s.len() <= max {
        s.to_string()
    } else {
        let mut end = max;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &s[..end])
    }
}

impl CompletionBackend for HttpCompletionClient {
    fn endpoint_id(&self) -> String {
        self.config.base_url.clone()
    }

    fn complete(&self, prompt: &str) -> Result<ModelResponse, BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let started = Instant::now();
        let response = self.send_with_retry(&self.answer_request(prompt))?;
        Ok(ModelResponse {
            raw_text: response.text,
            tokens: response.tokens,
            latency: started.elapsed(),
            endpoint_id: self.endpoint_id(),
        })
    }

    fn score(&self, text: &str) -> Result<Vec<WireToken>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::NothingToScore);
        }
        let response = self.send_with_retry(&scoring_request(text))?;
        response.tokens.ok_or(BackendError::LogprobsUnsupported)
    }

    fn complete_many(&self, prompts: &[String]) -> Vec<Result<ModelResponse, BackendError>> {
        self.bounded_parallel(prompts, |prompt| self.complete(prompt))
    }

    fn score_many(&self, texts: &[String]) -> Vec<Result<Vec<WireToken>, BackendError>> {
        self.bounded_parallel(texts, |text| self.score(text))
    }
}
