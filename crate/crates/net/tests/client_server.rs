//! Client/server integration: the blocking HTTP client against the mock
//! server, plus failure-path tests against hand-rolled sockets.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::time::Duration;

use benchaudit_core::client::{BackendError, CompletionBackend, EndpointConfig, RetryPolicy};
use benchaudit_core::mock::{MockConfig, MockModel};
use benchaudit_core::perturb::{permute_choices, PermutationSampling, PromptTemplate};
use benchaudit_core::synth::{synth_parallel_mcq, SynthMcqSpec};
use benchaudit_net::{HttpCompletionClient, MockServer, ServeOptions};

fn spec(n: usize) -> SynthMcqSpec {
    SynthMcqSpec { n_items: n, languages: vec!["en".into()], seed: 2, ..SynthMcqSpec::default() }
}

fn mock_model(n: usize, config: MockConfig) -> Arc<MockModel> {
    let mut model = MockModel::new(config).unwrap();
    let datasets = synth_parallel_mcq(&spec(n));
    for items in datasets.values() {
        model.add_mcq_items(items).unwrap();
    }
    Arc::new(model)
}

fn start_server(n: usize, options: ServeOptions) -> MockServer {
    let model = mock_model(n, MockConfig { base_accuracy: 1.0, seed: 9, ..MockConfig::default() });
    MockServer::start(model, "127.0.0.1:0".parse().unwrap(), options).unwrap()
}

fn client_for(server: &MockServer, max_parallel: usize) -> HttpCompletionClient {
    let config = EndpointConfig {
        base_url: server.base_url(),
        max_parallel_requests: max_parallel,
        retry: RetryPolicy {
            max_attempts: 3,
            backoff: vec![Duration::from_millis(10), Duration::from_millis(20)],
        },
        timeout: Duration::from_secs(5),
        ..EndpointConfig::default()
    };
    HttpCompletionClient::new(config).unwrap()
}

fn stats(server: &MockServer) -> serde_json::Value {
    reqwest::blocking::get(format!("{}/debug/stats", server.base_url()))
        .unwrap()
        .json()
        .unwrap()
}

#[test]
fn complete_round_trip_over_http() {
    let server = start_server(4, ServeOptions::default());
    let client = client_for(&server, 2);
    let items = synth_parallel_mcq(&spec(4)).remove("en").unwrap();
    let view = permute_choices(
        &items[0],
        7,
        PermutationSampling::Unrestricted,
        &PromptTemplate::tacd_mcq_default(),
    )
    .unwrap();
    let response = client.complete(&view.prompt).unwrap();
    let expected = ((b'A' + view.displayed_gold_index as u8) as char).to_string();
    assert_eq!(response.raw_text, expected);
    assert_eq!(stats(&server)["requests_total"], 1);
}

#[test]
fn score_echo_round_trip() {
    let server = start_server(2, ServeOptions::default());
    let client = client_for(&server, 1);
    let tokens = client.score("A").unwrap();
    assert_eq!(tokens.len(), 1);
    assert_eq!(tokens[0].token, "A");
    assert!(tokens[0].logprob <= 0.0);
    // same text scores identically across calls
    assert_eq!(client.score("A").unwrap(), tokens);
    // empty text is rejected client-side without a request
    assert!(matches!(client.score("  "), Err(BackendError::NothingToScore)));
}

#[test]
fn retry_succeeds_after_injected_429s() {
    let server = start_server(2, ServeOptions { fault_429_per_prompt: 2, ..Default::default() });
    let client = client_for(&server, 1);
    let tokens = client.score("retry target").unwrap();
    assert!(!tokens.is_empty());
    // two 429s then one success: three requests total
    assert_eq!(stats(&server)["requests_total"], 3);
}

#[test]
fn retries_exhaust_into_http_error() {
    let server = start_server(2, ServeOptions { fault_429_per_prompt: 10, ..Default::default() });
    let client = client_for(&server, 1);
    match client.score("never succeeds") {
        Err(BackendError::Http { status: 429, .. }) => {}
        other => panic!("expected 429 after exhausting retries, got {other:?}"),
    }
    assert_eq!(stats(&server)["requests_total"], 3, "max_attempts bounds the request count");
}

#[test]
fn bounded_parallelism_is_observable() {
    let server = start_server(64, ServeOptions { delay_ms: Some((5, 15)), ..Default::default() });
    let client = client_for(&server, 8);
    let items = synth_parallel_mcq(&spec(64)).remove("en").unwrap();
    let tpl = PromptTemplate::tacd_mcq_default();
    let prompts: Vec<String> = items
        .iter()
        .map(|i| {
            permute_choices(i, 7, PermutationSampling::Unrestricted, &tpl)
                .unwrap()
                .prompt
        })
        .collect();
    let results = client.complete_many(&prompts);
    assert_eq!(results.len(), 64);
    assert!(results.iter().all(|r| r.is_ok()));
    let stats = stats(&server);
    assert_eq!(stats["requests_total"], 64, "no duplicated successes");
    let max_concurrent = stats["max_concurrent_observed"].as_u64().unwrap();
    assert!(max_concurrent <= 8, "observed concurrency {max_concurrent} exceeds bound");
    assert!(max_concurrent >= 2, "parallel client should overlap requests");
}

#[test]
fn batch_results_align_with_inputs() {
    let server = start_server(16, ServeOptions { delay_ms: Some((0, 10)), ..Default::default() });
    let client = client_for(&server, 4);
    let items = synth_parallel_mcq(&spec(16)).remove("en").unwrap();
    let tpl = PromptTemplate::tacd_mcq_default();
    let views: Vec<_> = items
        .iter()
        .map(|i| permute_choices(i, 7, PermutationSampling::Unrestricted, &tpl).unwrap())
        .collect();
    let prompts: Vec<String> = views.iter().map(|v| v.prompt.clone()).collect();
    let results = client.complete_many(&prompts);
    for (view, result) in views.iter().zip(results) {
        let expected = ((b'A' + view.displayed_gold_index as u8) as char).to_string();
        assert_eq!(result.unwrap().raw_text, expected, "result order must match input order");
    }
}

#[test]
fn unknown_prompt_is_a_permanent_400() {
    let server = start_server(2, ServeOptions::default());
    let client = client_for(&server, 1);
    match client.complete("free-form text the grammar rejects") {
        Err(BackendError::Http { status: 400, body }) => {
            assert!(body.contains("prompt"), "error body should explain: {body}");
        }
        other => panic!("expected HTTP 400, got {other:?}"),
    }
    // a 400 is not retryable: exactly one request on the wire
    assert_eq!(stats(&server)["requests_total"], 1);
}

#[test]
fn timeout_is_a_typed_error() {
    // listener that accepts and never responds; exits after the two
    // attempts the retry policy allows
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let mut held = Vec::new();
        for stream in listener.incoming() {
            match stream {
                Ok(s) => {
                    held.push(s);
                    if held.len() >= 2 {
                        break;
                    }
                }
                Err(_) => break,
            }
        }
        // keep sockets open long enough for the client timeouts to fire
        std::thread::sleep(Duration::from_millis(500));
    });
    let config = EndpointConfig {
        base_url: format!("http://{addr}"),
        retry: RetryPolicy { max_attempts: 2, backoff: vec![Duration::from_millis(1)] },
        timeout: Duration::from_millis(150),
        ..EndpointConfig::default()
    };
    let client = HttpCompletionClient::new(config).unwrap();
    match client.complete("anything") {
        Err(BackendError::Timeout) => {}
        other => panic!("expected timeout, got {other:?}"),
    }
    drop(client);
    let _ = handle.join();
}

#[test]
fn missing_logprobs_degrade_to_capability_error() {
    // minimal HTTP endpoint that answers without a tokens array
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        if let Ok((mut stream, _)) = listener.accept() {
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
            let body = r#"{"text":"ok"}"#;
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            let _ = stream.write_all(response.as_bytes());
        }
    });
    let config = EndpointConfig {
        base_url: format!("http://{addr}"),
        retry: RetryPolicy { max_attempts: 1, backoff: vec![] },
        timeout: Duration::from_secs(2),
        ..EndpointConfig::default()
    };
    let client = HttpCompletionClient::new(config).unwrap();
    match client.score("some text") {
        Err(BackendError::LogprobsUnsupported) => {}
        other => panic!("expected capability error, got {other:?}"),
    }
    let _ = handle.join();
}

#[test]
fn server_restart_with_same_config_is_stateless() {
    let items = synth_parallel_mcq(&spec(3)).remove("en").unwrap();
    let view = permute_choices(
        &items[1],
        5,
        PermutationSampling::Unrestricted,
        &PromptTemplate::tacd_mcq_default(),
    )
    .unwrap();
    let config = MockConfig {
        memorized_ids: BTreeSet::from([items[1].id.clone()]),
        index_memory_strength: 1.0,
        seed: 4,
        ..MockConfig::default()
    };
    let answer = |cfg: MockConfig| {
        let mut model = MockModel::new(cfg).unwrap();
        model.add_mcq_items(&items).unwrap();
        let server = MockServer::start(Arc::new(model), "127.0.0.1:0".parse().unwrap(), ServeOptions::default()).unwrap();
        let client = client_for(&server, 1);
        client.complete(&view.prompt).unwrap().raw_text
    };
    assert_eq!(answer(config.clone()), answer(config));
}
