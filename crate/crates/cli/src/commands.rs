//! Implementations of the CLI subcommands.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Result;

use benchaudit_core::client::{BackendError, EndpointConfig, RetryPolicy};
use benchaudit_core::corpus::{corpus_stats_mcq, corpus_stats_qa, select_contaminated_subset};
use benchaudit_core::mock::{LogprobProfile, MockConfig, MockModel};
use benchaudit_core::perturb::{PermutationSampling, PromptTemplate};
use benchaudit_core::probes::{
    run_mink_audit_mcq, run_mink_audit_qa, run_tacd, run_ts_guessing_mcq, run_ts_guessing_qa,
    ProbeConfig, ProbeError, ProbeKind,
};
use benchaudit_core::report::{
    mock_config_echo, AuditReport, ConditionBlock, RunManifest,
};
use benchaudit_core::scoring::SCORING_FORMAT_VERSION;
use benchaudit_net::{serve_blocking, HttpCompletionClient, ServeOptions};

use crate::data::{aligned_mcq, digests_for, load_any, load_mcq_by_language, LoadedDataset};
use crate::{AuditArgs, Failure, MockServeArgs, ProbeArg, StatsArgs, SweepArgs, ValidateArgs};

fn data_err(err: impl std::fmt::Display) -> Failure {
    Failure::data(err.to_string())
}

/// Probe failures that mean the endpoint is unusable map to exit code 2;
/// everything else is a data/config problem.
fn probe_err(err: ProbeError) -> Failure {
    match err {
        ProbeError::AllInstancesFailed { .. } => Failure::endpoint(err.to_string()),
        other => Failure::data(other.to_string()),
    }
}

pub fn validate(args: ValidateArgs) -> Result<(), Failure> {
    let mut mcq_paths = Vec::new();
    for path in &args.datasets {
        let loaded = load_any(path).map_err(data_err)?;
        println!(
            "{}: OK ({} items, kind={}, language={})",
            path.display(),
            loaded.len(),
            loaded.kind_name(),
            loaded.language()
        );
        if matches!(loaded, LoadedDataset::Mcq { .. }) {
            mcq_paths.push(path.clone());
        }
    }
    if mcq_paths.len() >= 2 {
        let alignment = aligned_mcq(&mcq_paths).map_err(data_err)?;
        println!(
            "alignment: {} parallel instances, {} dropped ids",
            alignment.instances.len(),
            alignment.dropped_ids.len()
        );
    }
    Ok(())
}

pub fn stats(args: StatsArgs) -> Result<(), Failure> {
    let mut all = BTreeMap::new();
    for path in &args.datasets {
        let loaded = load_any(path).map_err(data_err)?;
        let stats = match &loaded {
            LoadedDataset::Mcq { items, .. } => corpus_stats_mcq(items).map_err(data_err)?,
            LoadedDataset::Qa { items, .. } => corpus_stats_qa(items).map_err(data_err)?,
        };
        println!(
            "{}: {} items, {} tokens, vocabulary {}, TTR {:.2}%",
            path.display(),
            stats.item_count,
            stats.total_tokens,
            stats.vocabulary_size,
            stats.type_token_ratio_pct
        );
        if let Some(overlap) = &stats.context_question_overlap_pct {
            println!(
                "  context-question overlap %: mean {:.2} P90 {:.2} P99 {:.2}",
                overlap.mean, overlap.p90, overlap.p99
            );
        }
        if let Some(answers) = &stats.answer_length_words {
            println!(
                "  answer length (words): mean {:.2} P90 {:.0} P99 {:.0}",
                answers.mean, answers.p90, answers.p99
            );
        }
        all.insert(path.display().to_string(), stats);
    }
    if let Some(out) = &args.out {
        let body = serde_json::to_string_pretty(&all).map_err(data_err)?;
        std::fs::write(out, format!("{body}\n")).map_err(data_err)?;
        println!("stats written to {}", out.display());
    }
    Ok(())
}

fn endpoint_config(args: &AuditArgs) -> EndpointConfig {
    EndpointConfig {
        base_url: args.endpoint.clone(),
        auth_env_var: args.auth_env.clone(),
        max_parallel_requests: args.max_parallel,
        retry: RetryPolicy {
            max_attempts: args.retries,
            backoff: vec![
                Duration::from_millis(100),
                Duration::from_millis(500),
                Duration::from_millis(2000),
            ],
        },
        timeout: Duration::from_secs(args.timeout_secs),
        temperature: 0.0,
        max_output_tokens: args.max_output_tokens,
    }
}

fn probe_config_from(args: &AuditArgs, languages: Vec<String>) -> ProbeConfig {
    ProbeConfig {
        kind: args.probe.into(),
        languages,
        k_percent: args.k_percent,
        permutation_mode: args.permutation_mode.into(),
        sampling: args.sampling(),
        mask_strategy: args.mask_strategy.into(),
        run_seed: args.seed,
        condition_p: args.p,
    }
}

pub fn audit(args: AuditArgs) -> Result<(), Failure> {
    let client = HttpCompletionClient::new(endpoint_config(&args)).map_err(|e| match e {
        BackendError::Config(_) => data_err(e),
        other => Failure::endpoint(other.to_string()),
    })?;
    let mut digest_paths = args.datasets.clone();
    if let Some(heldout) = &args.heldout {
        digest_paths.push(heldout.clone());
    }
    let dataset_digests = digests_for(&digest_paths).map_err(data_err)?;

    let mut template_hashes = BTreeMap::new();
    let (config, block, records, errors, mink) = match args.probe {
        ProbeArg::TsMcq => {
            let loaded = load_any(&args.datasets[0]).map_err(data_err)?;
            let LoadedDataset::Mcq { items, language } = loaded else {
                return Err(Failure::data("ts-mcq expects an MCQ dataset"));
            };
            let template = PromptTemplate::ts_mcq_default();
            template_hashes.insert("ts-mcq".into(), template.hash_hex().to_string());
            let config = probe_config_from(&args, vec![language]);
            let run = run_ts_guessing_mcq(&items, &client, &config, &template).map_err(probe_err)?;
            let block = ConditionBlock::from_ts_mcq(args.p, &run.aggregate);
            (config, block, run.records, run.errors, false)
        }
        ProbeArg::TsQa => {
            let loaded = load_any(&args.datasets[0]).map_err(data_err)?;
            let LoadedDataset::Qa { items, language } = loaded else {
                return Err(Failure::data("ts-qa expects a QA dataset"));
            };
            let template = PromptTemplate::ts_qa_default();
            template_hashes.insert("ts-qa".into(), template.hash_hex().to_string());
            let config = probe_config_from(&args, vec![language]);
            let run = run_ts_guessing_qa(&items, &client, &config, &template).map_err(probe_err)?;
            let block = ConditionBlock::from_ts_qa(args.p, &run.aggregate);
            (config, block, run.records, run.errors, false)
        }
        ProbeArg::Mink => {
            let heldout_path = args
                .heldout
                .as_ref()
                .ok_or_else(|| Failure::data("mink requires --heldout"))?;
            let benchmark = load_any(&args.datasets[0]).map_err(data_err)?;
            let heldout = load_any(heldout_path).map_err(data_err)?;
            let config = probe_config_from(&args, vec![benchmark.language().to_string()]);
            let run = match (&benchmark, &heldout) {
                (
                    LoadedDataset::Mcq { items: bench, .. },
                    LoadedDataset::Mcq { items: held, .. },
                ) => run_mink_audit_mcq(bench, held, &client, &config).map_err(probe_err)?,
                (
                    LoadedDataset::Qa { items: bench, .. },
                    LoadedDataset::Qa { items: held, .. },
                ) => run_mink_audit_qa(bench, held, &client, &config).map_err(probe_err)?,
                _ => return Err(Failure::data("benchmark and heldout datasets must share a kind")),
            };
            let block = ConditionBlock::from_mink(args.p, &run.aggregate);
            (config, block, run.records, run.errors, true)
        }
        ProbeArg::Tacd => {
            let alignment = aligned_mcq(&args.datasets).map_err(data_err)?;
            if alignment.instances.is_empty() {
                return Err(Failure::data("no aligned instances across the given datasets"));
            }
            let languages = args.languages.clone().unwrap_or_else(|| {
                alignment.instances[0].views.keys().cloned().collect()
            });
            let template = PromptTemplate::tacd_mcq_default();
            template_hashes.insert("tacd-mcq".into(), template.hash_hex().to_string());
            let config = probe_config_from(&args, languages);
            let run = run_tacd(&alignment.instances, &client, &config, &template).map_err(probe_err)?;
            let block = ConditionBlock::from_tacd(args.p, &run.aggregate);
            (config, block, run.records, run.errors, false)
        }
    };

    let mut manifest = RunManifest::new(
        config,
        args.endpoint.clone(),
        template_hashes,
        dataset_digests,
        None,
    );
    if mink {
        manifest.mink_serialization = Some(SCORING_FORMAT_VERSION.to_string());
    }
    let report = AuditReport::new(manifest, vec![block], errors);
    let records_path = report.write(&args.out, &records).map_err(data_err)?;
    print!("{}", report.human_summary());
    println!("report: {}", args.out.display());
    println!("records: {}", records_path.display());
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let datasets = load_mcq_by_language(&args.datasets).map_err(data_err)?;
    let alignment = aligned_mcq(&args.datasets).map_err(data_err)?;
    if alignment.instances.is_empty() {
        return Err(Failure::data("no aligned instances across the given datasets"));
    }
    let languages: Vec<String> = args
        .languages
        .clone()
        .unwrap_or_else(|| datasets.keys().cloned().collect());
    let canonical_ids: Vec<String> = alignment
        .instances
        .iter()
        .map(|i| i.canonical_id.clone())
        .collect();
    let collapse_letter = parse_collapse_letter(args.collapse_letter)?;
    let base_config = MockConfig {
        index_memory_strength: args.alpha,
        surface_memory: args.surface_memory,
        crosslingual_invariance: args.beta,
        collapse_letter,
        base_accuracy: args.base_accuracy,
        logprob_profile: LogprobProfile::default(),
        seed: args.seed,
        ..MockConfig::default()
    };
    base_config.validate().map_err(data_err)?;
    let template = PromptTemplate::tacd_mcq_default();

    let mut blocks = Vec::new();
    let mut all_errors = Vec::new();
    let mut all_records = Vec::new();
    for &p in &args.p_list {
        let condition = select_contaminated_subset(&canonical_ids, p, args.seed).map_err(data_err)?;
        let mut config = base_config.clone();
        config.contamination_p = p;
        config.memorized_ids = condition.selected_ids;
        let mut model = MockModel::new(config).map_err(data_err)?;
        for items in datasets.values() {
            model.add_mcq_items(items).map_err(data_err)?;
        }
        let probe_config = ProbeConfig {
            kind: ProbeKind::Tacd,
            languages: languages.clone(),
            permutation_mode: args.permutation_mode.into(),
            sampling: PermutationSampling::Unrestricted,
            run_seed: args.seed,
            condition_p: p,
            ..ProbeConfig::default()
        };
        let run = run_tacd(&alignment.instances, &model, &probe_config, &template).map_err(probe_err)?;
        blocks.push(ConditionBlock::from_tacd(p, &run.aggregate));
        all_errors.extend(run.errors);
        all_records.extend(run.records);
    }

    let manifest_config = ProbeConfig {
        kind: ProbeKind::Tacd,
        languages,
        permutation_mode: args.permutation_mode.into(),
        sampling: PermutationSampling::Unrestricted,
        run_seed: args.seed,
        condition_p: args.p_list.first().copied().unwrap_or(0),
        ..ProbeConfig::default()
    };
    let mut template_hashes = BTreeMap::new();
    template_hashes.insert("tacd-mcq".into(), template.hash_hex().to_string());
    let manifest = RunManifest::new(
        manifest_config,
        "mock:in-process".into(),
        template_hashes,
        digests_for(&args.datasets).map_err(data_err)?,
        Some(mock_config_echo(&base_config)),
    );
    let report = AuditReport::new(manifest, blocks, all_errors);
    let records_path = report.write(&args.out, &all_records).map_err(data_err)?;
    print!("{}", report.human_summary());
    println!("report: {}", args.out.display());
    println!("records: {}", records_path.display());
    Ok(())
}

pub fn mock_serve(args: MockServeArgs) -> Result<(), Failure> {
    let addr: std::net::SocketAddr = args
        .addr
        .parse()
        .map_err(|e| Failure::data(format!("invalid --addr {}: {e}", args.addr)))?;
    let collapse_letter = parse_collapse_letter(args.collapse_letter)?;

    let mut mcq_items = Vec::new();
    let mut qa_items = Vec::new();
    for path in &args.datasets {
        match load_any(path).map_err(data_err)? {
            LoadedDataset::Mcq { items, .. } => mcq_items.push(items),
            LoadedDataset::Qa { items, .. } => qa_items.push(items),
        }
    }
    // memorization is keyed by canonical id: use the first dataset's id order
    let ids: Vec<String> = mcq_items
        .first()
        .map(|items| items.iter().map(|i| i.id.clone()).collect())
        .or_else(|| qa_items.first().map(|items| items.iter().map(|i| i.id.clone()).collect()))
        .unwrap_or_default();
    let condition = select_contaminated_subset(&ids, args.p, args.seed).map_err(data_err)?;

    let config = MockConfig {
        contamination_p: args.p,
        memorized_ids: condition.selected_ids,
        index_memory_strength: args.alpha,
        surface_memory: args.surface_memory,
        crosslingual_invariance: args.beta,
        collapse_letter,
        base_accuracy: args.base_accuracy,
        logprob_profile: LogprobProfile {
            member_mean: args.member_mean,
            member_std: args.member_std,
            nonmember_mean: args.nonmember_mean,
            nonmember_std: args.nonmember_std,
        },
        seed: args.seed,
        dummy_token: args.dummy_token.clone(),
    };
    let mut model = MockModel::new(config).map_err(data_err)?;
    for items in &mcq_items {
        model.add_mcq_items(items).map_err(data_err)?;
    }
    for items in &qa_items {
        model.add_qa_items(items).map_err(data_err)?;
    }
    let options = ServeOptions {
        delay_ms: parse_delay(args.delay_ms.as_deref())?,
        fault_429_per_prompt: args.fault_429,
    };
    println!(
        "mock model: p={} memorized={} alpha={} beta={} base_accuracy={} surface_memory={}",
        args.p,
        model.config().memorized_ids.len(),
        args.alpha,
        args.beta,
        args.base_accuracy,
        args.surface_memory
    );
    serve_blocking(Arc::new(model), addr, options).map_err(|e| Failure::endpoint(e.to_string()))
}

fn parse_collapse_letter(letter: Option<char>) -> Result<Option<usize>, Failure> {
    letter
        .map(|c| {
            let upper = c.to_ascii_uppercase();
            if upper.is_ascii_uppercase() {
                Ok((upper as u8 - b'A') as usize)
            } else {
                Err(Failure::data(format!("--collapse-letter must be A-Z, got {c:?}")))
            }
        })
        .transpose()
}

fn parse_delay(spec: Option<&str>) -> Result<Option<(u64, u64)>, Failure> {
    let Some(spec) = spec else { return Ok(None) };
    let (lo, hi) = spec
        .split_once(':')
        .ok_or_else(|| Failure::data(format!("--delay-ms expects lo:hi, got {spec:?}")))?;
    let lo: u64 = lo.parse().map_err(|_| Failure::data("--delay-ms lo is not a number"))?;
    let hi: u64 = hi.parse().map_err(|_| Failure::data("--delay-ms hi is not a number"))?;
    if hi < lo {
        return Err(Failure::data("--delay-ms hi must be >= lo"));
    }
    Ok(Some((lo, hi)))
}
