//! Mock inference server: serves the deterministic mock model over the same
//! wire contract real endpoints use, plus a `/debug/stats` endpoint exposing
//! the counters concurrency tests rely on.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::Rng;
use thiserror::Error;
use tokio::sync::oneshot;

use benchaudit_core::client::WireRequest;
use benchaudit_core::mock::MockModel;
use benchaudit_core::rng::sha256_hex;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("failed to bind {addr}: {message}")]
    Bind { addr: SocketAddr, message: String },
    #[error("server thread failed: {0}")]
    Runtime(String),
}

/// Serving options unrelated to model behavior.
#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Uniformly random artificial latency per request, in milliseconds.
    /// Response bodies stay deterministic; only timing moves.
    pub delay_ms: Option<(u64, u64)>,
    /// Respond 429 to the first N hits of each distinct prompt. Fault
    /// injection for retry tests.
    pub fault_429_per_prompt: u32,
}

struct ServerState {
    model: Arc<MockModel>,
    options: ServeOptions,
    requests_total: AtomicU64,
    in_flight: AtomicU64,
    max_in_flight: AtomicU64,
    request_log: Mutex<Vec<String>>,
    fault_counts: Mutex<HashMap<String, u32>>,
}

struct InFlightGuard<'a>(&'a ServerState);

impl<'a> InFlightGuard<'a> {
    fn enter(state: &'a ServerState) -> Self {
        let now = state.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        state.max_in_flight.fetch_max(now, Ordering::SeqCst);
        InFlightGuard(state)
    }
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

async fn complete_handler(
    State(state): State<Arc<ServerState>>,
    Json(request): Json<WireRequest>,
) -> Response {
    let _guard = InFlightGuard::enter(&state);
    state.requests_total.fetch_add(1, Ordering::SeqCst);
    let digest = sha256_hex(request.prompt.as_bytes());
    state.request_log.lock().expect("log lock").push(digest.clone());

    if state.options.fault_429_per_prompt > 0 {
        let mut counts = state.fault_counts.lock().expect("fault lock");
        let seen = counts.entry(digest).or_insert(0);
        if *seen < state.options.fault_429_per_prompt {
            *seen += 1;
            return (
                StatusCode::TOO_MANY_REQUESTS,
                Json(serde_json::json!({ "error": "injected rate limit" })),
            )
                .into_response();
        }
    }

    if let Some((lo, hi)) = state.options.delay_ms {
        let ms = if hi > lo { rand::thread_rng().gen_range(lo..=hi) } else { lo };
        tokio::time::sleep(std::time::Duration::from_millis(ms)).await;
    }

    match state.model.handle(&request) {
        Ok(response) => Json(response).into_response(),
        Err(err) => (
            StatusCode::BAD_REQUEST,
            Json(serde_json::json!({ "error": err.to_string() })),
        )
            .into_response(),
    }
}

async fn stats_handler(State(state): State<Arc<ServerState>>) -> Response {
    let body = serde_json::json!({
        "requests_total": state.requests_total.load(Ordering::SeqCst),
        "in_flight": state.in_flight.load(Ordering::SeqCst),
        "max_concurrent_observed": state.max_in_flight.load(Ordering::SeqCst),
        "request_log_len": state.request_log.lock().expect("log lock").len(),
        "unknown_scored": state.model.unknown_scored(),
    });
    Json(body).into_response()
}

fn router(state: Arc<ServerState>) -> Router {
    Router::new()
        .route("/v1/complete", post(complete_handler))
        .route("/debug/stats", get(stats_handler))
        .with_state(state)
}

/// A running mock server; shuts down gracefully on drop.
pub struct MockServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    join: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Bind and serve on a background thread. Use port 0 to pick a free port;
    /// the bound address is available from [`MockServer::addr`].
    pub fn start(
        model: Arc<MockModel>,
        bind: SocketAddr,
        options: ServeOptions,
    ) -> Result<MockServer, ServeError> {
        let state = Arc::new(ServerState {
            model,
            options,
            requests_total: AtomicU64::new(0),
            in_flight: AtomicU64::new(0),
            max_in_flight: AtomicU64::new(0),
            request_log: Mutex::new(Vec::new()),
            fault_counts: Mutex::new(HashMap::new()),
        });
        let (addr_tx, addr_rx) = std::sync::mpsc::channel::<Result<SocketAddr, String>>();
        let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
        let join = std::thread::spawn(move || {
            let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
                Ok(rt) => rt,
                Err(e) => {
                    let _ = addr_tx.send(Err(e.to_string()));
                    return;
                }
            };
            runtime.block_on(async move {
                let listener = match tokio::net::TcpListener::bind(bind).await {
                    Ok(l) => l,
                    Err(e) => {
                        let _ = addr_tx.send(Err(e.to_string()));
                        return;
                    }
                };
                let addr = listener.local_addr().expect("bound listener has an address");
                let _ = addr_tx.send(Ok(addr));
                let app = router(state);
                let serve = axum::serve(listener, app).with_graceful_shutdown(async {
                    let _ = shutdown_rx.await;
                });
                if let Err(e) = serve.await {
                    eprintln!("mock server error: {e}");
                }
            });
        });
        let addr = addr_rx
            .recv()
            .map_err(|e| ServeError::Runtime(e.to_string()))?
            .map_err(|message| ServeError::Bind { addr: bind, message })?;
        Ok(MockServer { addr, shutdown: Some(shutdown_tx), join: Some(join) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Serve until Ctrl-C; the CLI `mock-serve` entry point.
pub fn serve_blocking(
    model: Arc<MockModel>,
    bind: SocketAddr,
    options: ServeOptions,
) -> Result<(), ServeError> {
    let server = MockServer::start(model, bind, options)?;
    println!("mock endpoint listening on {}", server.base_url());
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| ServeError::Runtime(e.to_string()))?;
    runtime
        .block_on(tokio::signal::ctrl_c())
        .map_err(|e| ServeError::Runtime(e.to_string()))?;
    println!("shutting down");
    server.shutdown();
    Ok(())
}
