//! Probe drivers: TS-Guessing (MCQ and QA), the Min-K likelihood audit, and
//! TACD. Each driver fans prompts out through a [`CompletionBackend`],
//! records one [`ProbeRecord`] per answered view, collects per-instance
//! errors without aborting the run, and aggregates metrics over the
//! key-sorted record stream.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{parse_mcq_answer, BackendError, CompletionBackend, ParsedAnswer};
use crate::corpus::{McqItem, ParallelInstance, QaItem};
use crate::metrics::{
    auroc, cross_lingual_consistency, exact_match, index_recall_rate, min_k_pp_score,
    min_k_score, rouge_l_f1, MetricsError, ProbeRecord,
};
use crate::perturb::{
    build_tacd_views, mask_choice, mask_question_token, permute_choices, MaskStrategy, McqView,
    PermutationMode, PermutationSampling, PerturbError, PromptTemplate,
};
use crate::scoring::{mcq_scoring_text, qa_scoring_text};
use crate::text::tokenize_lower;

/// A language's predicted-letter histogram flags collapse when a single
/// letter holds at least this fraction of the parsed predictions.
pub const COLLAPSE_MASS_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    TsMcq,
    TsQa,
    Mink,
    Tacd,
}

impl ProbeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProbeKind::TsMcq => "ts-mcq",
            ProbeKind::TsQa => "ts-qa",
            ProbeKind::Mink => "mink",
            ProbeKind::Tacd => "tacd",
        }
    }
}

/// Shared probe configuration. Fields that do not apply to a probe kind are
/// ignored by its driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub kind: ProbeKind,
    /// TACD only; must have at least 2 entries there.
    pub languages: Vec<String>,
    /// Min-K percentage in (0, 100].
    pub k_percent: f64,
    pub permutation_mode: PermutationMode,
    pub sampling: PermutationSampling,
    pub mask_strategy: MaskStrategy,
    pub run_seed: u64,
    /// Condition label recorded on every emitted record and report block.
    pub condition_p: u32,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            kind: ProbeKind::TsMcq,
            languages: vec!["en".into(), "ar".into(), "fr".into()],
            k_percent: 20.0,
            permutation_mode: PermutationMode::Shared,
            sampling: PermutationSampling::Unrestricted,
            mask_strategy: MaskStrategy::LongestContentWord,
            run_seed: 0,
            condition_p: 0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        match self.kind {
            ProbeKind::Tacd => {
                if self.languages.len() < 2 {
                    return Err(ProbeError::Config(
                        "tacd requires at least 2 languages".into(),
                    ));
                }
            }
            ProbeKind::Mink => {
                if !(self.k_percent > 0.0 && self.k_percent <= 100.0) {
                    return Err(ProbeError::Config(format!(
                        "k_percent {} outside (0, 100]",
                        self.k_percent
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid probe configuration: {0}")]
    Config(String),
    #[error("empty dataset for probe")]
    EmptyDataset,
    #[error("probe expects a single-language dataset; found {a:?} and {b:?}")]
    MixedLanguages { a: String, b: String },
    #[error("duplicate record key: ({id:?}, {language:?})")]
    DuplicateKey { id: String, language: String },
    #[error("all instances failed; endpoint unusable: last error: {last}")]
    AllInstancesFailed { last: String },
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// A per-instance failure recorded in the report's error ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceError {
    pub canonical_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub kind: String,
    pub message: String,
}

impl InstanceError {
    fn from_backend(id: &str, language: Option<&str>, err: &BackendError) -> Self {
        InstanceError {
            canonical_id: id.to_string(),
            language: language.map(|l| l.to_string()),
            kind: err.kind().to_string(),
            message: err.to_string(),
        }
    }
}

/// Records, errors, and the aggregate for one probe run.
#[derive(Debug, Clone)]
pub struct ProbeRun<A> {
    pub records: Vec<ProbeRecord>,
    pub errors: Vec<InstanceError>,
    pub aggregate: A,
}

fn ensure_single_language<'a>(
    mut languages: impl Iterator<Item = &'a str>,
) -> Result<String, ProbeError> {
    let first = languages.next().ok_or(ProbeError::EmptyDataset)?;
    for lang in languages {
        if lang != first {
            return Err(ProbeError::MixedLanguages {
                a: first.to_string(),
                b: lang.to_string(),
            });
        }
    }
    Ok(first.to_string())
}

fn sort_and_check_records(records: &mut [ProbeRecord]) -> Result<(), ProbeError> {
    records.sort_by(|a, b| {
        (a.canonical_id.as_str(), a.language.as_str(), a.cohort.as_deref())
            .cmp(&(b.canonical_id.as_str(), b.language.as_str(), b.cohort.as_deref()))
    });
    for pair in records.windows(2) {
        if pair[0].canonical_id == pair[1].canonical_id
            && pair[0].language == pair[1].language
            && pair[0].cohort == pair[1].cohort
        {
            return Err(ProbeError::DuplicateKey {
                id: pair[0].canonical_id.clone(),
                language: pair[0].language.clone(),
            });
        }
    }
    Ok(())
}

fn sort_errors(errors: &mut [InstanceError]) {
    errors.sort_by(|a, b| {
        (a.canonical_id.as_str(), a.language.as_deref()).cmp(&(b.canonical_id.as_str(), b.language.as_deref()))
    });
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn mcq_record(
    probe: &ProbeKind,
    condition_p: u32,
    view: &McqView,
    raw_text: &str,
) -> ProbeRecord {
    let k = view.displayed_choices.len();
    let parsed = parse_mcq_answer(raw_text, k, &view.displayed_choices);
    let slot = parsed.letter_index();
    let canonical = slot.map(|s| view.permutation.original_of(s));
    ProbeRecord {
        canonical_id: view.canonical_id.clone(),
        language: view.language.clone(),
        condition_p,
        probe: probe.as_str().to_string(),
        predicted: parsed,
        predicted_display_slot: slot,
        predicted_canonical_choice: canonical,
        idr_hit: slot.map(|s| s == view.original_gold_index),
        accuracy_hit: canonical.map(|c| c == view.original_gold_index),
        em_hit: None,
        rouge_l_f1: view
            .mask_reference
            .as_ref()
            .map(|reference| rouge_l_f1(raw_text, reference)),
        min_k: None,
        cohort: None,
        skip_reason: None,
    }
}

/// TS-Guessing over a single-language MCQ dataset: shuffle choices, mask one
/// incorrect option, and record both the index-recall hit (parsed letter vs
/// the ORIGINAL gold index) and the ROUGE-L F1 of the raw output against the
/// hidden option text.
#[derive(Debug, Clone, Serialize)]
pub struct TsMcqAggregate {
    pub n_usable: usize,
    pub n_errors: usize,
    pub idr: f64,
    /// Mean 1/K over scored items; 0.25 for a uniform 4-way dataset.
    pub idr_baseline: f64,
    pub mean_rouge_l_f1: f64,
    pub accuracy: f64,
}

pub fn run_ts_guessing_mcq(
    items: &[McqItem],
    backend: &dyn CompletionBackend,
    config: &ProbeConfig,
    template: &PromptTemplate,
) -> Result<ProbeRun<TsMcqAggregate>, ProbeError> {
    config.validate()?;
    ensure_single_language(items.iter().map(|i| i.language.as_str()))?;
    let mut views = Vec::with_capacity(items.len());
    for item in items {
        let permuted = permute_choices(item, config.run_seed, config.sampling, template)?;
        views.push(mask_choice(&permuted, config.run_seed, template)?);
    }
    let prompts: Vec<String> = views.iter().map(|v| v.prompt.clone()).collect();
    let responses = backend.complete_many(&prompts);

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut inverse_k = HashMap::new();
    for (view, response) in views.iter().zip(responses) {
        match response {
            Ok(resp) => {
                records.push(mcq_record(&config.kind, config.condition_p, view, &resp.raw_text));
                inverse_k.insert(view.canonical_id.clone(), 1.0 / view.displayed_choices.len() as f64);
            }
            Err(err) => errors.push(InstanceError::from_backend(
                &view.canonical_id,
                Some(&view.language),
                &err,
            )),
        }
    }
    if records.is_empty() {
        let last = errors.last().map(|e| e.message.clone()).unwrap_or_default();
        return Err(ProbeError::AllInstancesFailed { last });
    }
    sort_and_check_records(&mut records)?;
    sort_errors(&mut errors);

    let idr = index_recall_rate(&records)?;
    let aggregate = TsMcqAggregate {
        n_usable: records.len(),
        n_errors: errors.len(),
        idr,
        idr_baseline: mean(records.iter().map(|r| inverse_k[&r.canonical_id])).unwrap_or(0.0),
        mean_rouge_l_f1: mean(records.iter().filter_map(|r| r.rouge_l_f1)).unwrap_or(0.0),
        accuracy: records.iter().filter(|r| r.accuracy_hit == Some(true)).count() as f64
            / records.len() as f64,
    };
    Ok(ProbeRun { records, errors, aggregate })
}

/// TS-Guessing over a single-language QA dataset: mask one question token,
/// leave the context untouched, and score the completion against the hidden
/// token with exact match and ROUGE-L F1. Unmaskable questions are recorded
/// as skips.
#[derive(Debug, Clone, Serialize)]
pub struct TsQaAggregate {
    pub n_usable: usize,
    pub n_skipped: usize,
    pub n_errors: usize,
    pub em: f64,
    pub mean_rouge_l_f1: f64,
}

/// Lowercase token frequencies over questions and contexts; the corpus table
/// behind the rarest-token masking strategy.
pub fn question_context_frequency(items: &[QaItem]) -> HashMap<String, u64> {
    let mut freq = HashMap::new();
    for item in items {
        for token in tokenize_lower(&item.question).into_iter().chain(tokenize_lower(&item.context)) {
            *freq.entry(token).or_default() += 1;
        }
    }
    freq
}

pub fn run_ts_guessing_qa(
    items: &[QaItem],
    backend: &dyn CompletionBackend,
    config: &ProbeConfig,
    template: &PromptTemplate,
) -> Result<ProbeRun<TsQaAggregate>, ProbeError> {
    config.validate()?;
    ensure_single_language(items.iter().map(|i| i.language.as_str()))?;
    let frequency = matches!(config.mask_strategy, MaskStrategy::RarestByCorpusFrequency)
        .then(|| question_context_frequency(items));

    let mut views = Vec::new();
    let mut records = Vec::new();
    for item in items {
        match mask_question_token(
            item,
            config.mask_strategy,
            config.run_seed,
            frequency.as_ref(),
            template,
        ) {
            Ok(view) => views.push(view),
            Err(PerturbError::NoMaskableToken { .. }) => records.push(ProbeRecord {
                canonical_id: item.id.clone(),
                language: item.language.clone(),
                condition_p: config.condition_p,
                probe: config.kind.as_str().to_string(),
                predicted: ParsedAnswer::Unparseable,
                predicted_display_slot: None,
                predicted_canonical_choice: None,
                idr_hit: None,
                accuracy_hit: None,
                em_hit: None,
                rouge_l_f1: None,
                min_k: None,
                cohort: None,
                skip_reason: Some("no maskable token".into()),
            }),
            Err(other) => return Err(other.into()),
        }
    }
    let prompts: Vec<String> = views.iter().map(|v| v.prompt.clone()).collect();
    let responses = backend.complete_many(&prompts);

    let mut errors = Vec::new();
    for (view, response) in views.iter().zip(responses) {
        match response {
            Ok(resp) => records.push(ProbeRecord {
                canonical_id: view.canonical_id.clone(),
                language: view.language.clone(),
                condition_p: config.condition_p,
                probe: config.kind.as_str().to_string(),
                predicted: ParsedAnswer::Text(resp.raw_text.clone()),
                predicted_display_slot: None,
                predicted_canonical_choice: None,
                idr_hit: None,
                accuracy_hit: None,
                em_hit: Some(exact_match(&resp.raw_text, &view.masked_surface)),
                rouge_l_f1: Some(rouge_l_f1(&resp.raw_text, &view.masked_surface)),
                min_k: None,
                cohort: None,
                skip_reason: None,
            }),
            Err(err) => errors.push(InstanceError::from_backend(
                &view.canonical_id,
                Some(&view.language),
                &err,
            )),
        }
    }
    let usable: Vec<&ProbeRecord> = records.iter().filter(|r| r.is_usable()).collect();
    if usable.is_empty() && !views.is_empty() {
        let last = errors.last().map(|e| e.message.clone()).unwrap_or_default();
        return Err(ProbeError::AllInstancesFailed { last });
    }
    let n_usable = usable.len();
    let em = usable.iter().filter(|r| r.em_hit == Some(true)).count() as f64 / n_usable.max(1) as f64;
    let mean_rouge = mean(usable.iter().filter_map(|r| r.rouge_l_f1)).unwrap_or(0.0);
    sort_and_check_records(&mut records)?;
    sort_errors(&mut errors);
    let aggregate = TsQaAggregate {
        n_usable,
        n_skipped: records.iter().filter(|r| !r.is_usable()).count(),
        n_errors: errors.len(),
        em,
        mean_rouge_l_f1: mean_rouge,
    };
    Ok(ProbeRun { records, errors, aggregate })
}

/// Which Min-K formula a run actually used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinkVariant {
    MinK,
    MinKPlusPlus,
}

impl MinkVariant {
    /// Annotation written into reports.
    pub fn annotation(&self) -> &'static str {
        match self {
            MinkVariant::MinK => "min-k% (moments unavailable; fell back from min-k%++)",
            MinkVariant::MinKPlusPlus => "min-k%++ (as per cited work)",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinkAggregate {
    pub auroc: f64,
    pub variant: MinkVariant,
    pub k_percent: f64,
    pub serialization: &'static str,
    pub n_member: usize,
    pub n_nonmember: usize,
    pub n_errors: usize,
    pub member_scores: Vec<f64>,
    pub nonmember_scores: Vec<f64>,
}

/// Case-insensitive to item kind: everything the Min-K audit needs is an id,
/// a language, and the canonical scoring text.
#[derive(Debug, Clone)]
struct ScorableText {
    id: String,
    language: String,
    text: String,
}

fn mink_run(
    benchmark: Vec<ScorableText>,
    heldout: Vec<ScorableText>,
    backend: &dyn CompletionBackend,
    config: &ProbeConfig,
) -> Result<ProbeRun<MinkAggregate>, ProbeError> {
    config.validate()?;
    if benchmark.is_empty() {
        return Err(ProbeError::Config("benchmark side is empty".into()));
    }
    if heldout.is_empty() {
        return Err(ProbeError::Config("heldout side is empty".into()));
    }
    let sides: [(&str, &Vec<ScorableText>); 2] =
        [("benchmark", &benchmark), ("heldout", &heldout)];

    let mut errors = Vec::new();
    let mut scored: Vec<(usize, &ScorableText, Vec<crate::client::WireToken>)> = Vec::new();
    for (side_idx, (side, texts)) in sides.iter().enumerate() {
        let bodies: Vec<String> = texts.iter().map(|t| t.text.clone()).collect();
        for (item, response) in texts.iter().zip(backend.score_many(&bodies)) {
            match response {
                Ok(tokens) if tokens.is_empty() => errors.push(InstanceError {
                    canonical_id: item.id.clone(),
                    language: Some(item.language.clone()),
                    kind: "empty-score".into(),
                    message: format!("{side}: endpoint returned no tokens"),
                }),
                Ok(tokens) => scored.push((side_idx, item, tokens)),
                Err(err) => errors.push(InstanceError::from_backend(
                    &item.id,
                    Some(&item.language),
                    &err,
                )),
            }
        }
    }
    if scored.is_empty() {
        let last = errors.last().map(|e| e.message.clone()).unwrap_or_default();
        return Err(ProbeError::AllInstancesFailed { last });
    }

    // Min-K%++ only when every scored token carries distribution moments;
    // mixing variants across items would skew the AUROC.
    let moments_everywhere = scored
        .iter()
        .all(|(_, _, tokens)| tokens.iter().all(|t| t.dist_mean.is_some() && t.dist_std.is_some()));
    let variant = if moments_everywhere { MinkVariant::MinKPlusPlus } else { MinkVariant::MinK };

    let mut records = Vec::new();
    let mut side_scores: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (side_idx, item, tokens) in &scored {
        let score = match variant {
            MinkVariant::MinKPlusPlus => min_k_pp_score(tokens, config.k_percent),
            MinkVariant::MinK => {
                let logprobs: Vec<f64> = tokens.iter().map(|t| t.logprob).collect();
                min_k_score(&logprobs, config.k_percent)
            }
        };
        match score {
            Ok(value) => {
                side_scores[*side_idx].push(value);
                records.push(ProbeRecord {
                    canonical_id: item.id.clone(),
                    language: item.language.clone(),
                    condition_p: config.condition_p,
                    probe: "mink".into(),
                    predicted: ParsedAnswer::Unparseable,
                    predicted_display_slot: None,
                    predicted_canonical_choice: None,
                    idr_hit: None,
                    accuracy_hit: None,
                    em_hit: None,
                    rouge_l_f1: None,
                    min_k: Some(value),
                    cohort: Some(sides[*side_idx].0.to_string()),
                    skip_reason: None,
                });
            }
            Err(err) => errors.push(InstanceError {
                canonical_id: item.id.clone(),
                language: Some(item.language.clone()),
                kind: "metrics".into(),
                message: err.to_string(),
            }),
        }
    }
    sort_and_check_records(&mut records)?;
    sort_errors(&mut errors);
    let [member_scores, nonmember_scores] = side_scores;
    let auroc = auroc(&member_scores, &nonmember_scores)?;
    let aggregate = MinkAggregate {
        auroc,
        variant,
        k_percent: config.k_percent,
        serialization: crate::scoring::SCORING_FORMAT_VERSION,
        n_member: member_scores.len(),
        n_nonmember: nonmember_scores.len(),
        n_errors: errors.len(),
        member_scores,
        nonmember_scores,
    };
    Ok(ProbeRun { records, errors, aggregate })
}

/// Min-K audit over MCQ items: benchmark items are the hypothesized member
/// side, held-out items the non-member side.
pub fn run_mink_audit_mcq(
    benchmark: &[McqItem],
    heldout: &[McqItem],
    backend: &dyn CompletionBackend,
    config: &ProbeConfig,
) -> Result<ProbeRun<MinkAggregate>, ProbeError> {
    let to_text = |items: &[McqItem]| {
        items
            .iter()
            .map(|i| ScorableText {
                id: i.id.clone(),
                language: i.language.clone(),
                text: mcq_scoring_text(i),
            })
            .collect()
    };
    mink_run(to_text(benchmark), to_text(heldout), backend, config)
}

/// Min-K audit over QA items.
pub fn run_mink_audit_qa(
    benchmark: &[QaItem],
    heldout: &[QaItem],
    backend: &dyn CompletionBackend,
    config: &ProbeConfig,
) -> Result<ProbeRun<MinkAggregate>, ProbeError> {
    let to_text = |items: &[QaItem]| {
        items
            .iter()
            .map(|i| ScorableText {
                id: i.id.clone(),
                language: i.language.clone(),
                text: qa_scoring_text(i),
            })
            .collect()
    };
    mink_run(to_text(benchmark), to_text(heldout), backend, config)
}

/// TACD aggregates: pooled and per-language IDR, CLC, analytic baselines,
/// per-language predicted-letter histograms, and the collapse diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct TacdAggregate {
    pub n_instances: usize,
    pub n_usable_views: usize,
    pub n_errors: usize,
    pub groups_counted: usize,
    pub groups_incomplete: usize,
    pub idr: f64,
    pub idr_baseline: f64,
    pub per_language_idr: BTreeMap<String, f64>,
    pub per_language_usable: BTreeMap<String, usize>,
    /// Pooled IDR equals the usable-count weighted mean of per-language IDRs;
    /// verified on every run.
    pub idr_pooling_consistent: bool,
    pub accuracy: f64,
    pub clc: f64,
    pub clc_baseline: f64,
    pub letter_histograms: BTreeMap<String, BTreeMap<String, u64>>,
    /// Per language: does one letter hold >= [`COLLAPSE_MASS_THRESHOLD`] of
    /// the parsed predictions?
    pub collapse_flags: BTreeMap<String, bool>,
}

/// Run TACD over aligned parallel MCQ instances: one plain-answer view per
/// configured language (no option masked), IDR pooled over every language
/// view, CLC over per-instance groups.
pub fn run_tacd(
    instances: &[ParallelInstance<McqItem>],
    backend: &dyn CompletionBackend,
    config: &ProbeConfig,
    template: &PromptTemplate,
) -> Result<ProbeRun<TacdAggregate>, ProbeError> {
    config.validate()?;
    if instances.is_empty() {
        return Err(ProbeError::EmptyDataset);
    }
    let mut views = Vec::with_capacity(instances.len() * config.languages.len());
    for instance in instances {
        views.extend(build_tacd_views(
            instance,
            &config.languages,
            config.run_seed,
            config.permutation_mode,
            config.sampling,
            template,
        )?);
    }
    let prompts: Vec<String> = views.iter().map(|v| v.prompt.clone()).collect();
    let responses = backend.complete_many(&prompts);

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut inverse_k: HashMap<String, f64> = HashMap::new();
    for (view, response) in views.iter().zip(responses) {
        match response {
            Ok(resp) => {
                records.push(mcq_record(&ProbeKind::Tacd, config.condition_p, view, &resp.raw_text));
                inverse_k.insert(view.canonical_id.clone(), 1.0 / view.displayed_choices.len() as f64);
            }
            Err(err) => errors.push(InstanceError::from_backend(
                &view.canonical_id,
                Some(&view.language),
                &err,
            )),
        }
    }
    if records.is_empty() {
        let last = errors.last().map(|e| e.message.clone()).unwrap_or_default();
        return Err(ProbeError::AllInstancesFailed { last });
    }
    sort_and_check_records(&mut records)?;
    sort_errors(&mut errors);

    let pooled_idr = index_recall_rate(&records)?;
    let mut per_language_idr = BTreeMap::new();
    let mut per_language_usable = BTreeMap::new();
    let mut histograms: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut collapse_flags = BTreeMap::new();
    for language in &config.languages {
        let lang_records: Vec<ProbeRecord> = records
            .iter()
            .filter(|r| &r.language == language)
            .cloned()
            .collect();
        if lang_records.is_empty() {
            continue;
        }
        per_language_idr.insert(language.clone(), index_recall_rate(&lang_records)?);
        per_language_usable.insert(language.clone(), lang_records.len());
        let mut histogram: BTreeMap<String, u64> = BTreeMap::new();
        let mut parsed = 0u64;
        for record in &lang_records {
            if let Some(slot) = record.predicted_display_slot {
                let letter = ((b'A' + slot as u8) as char).to_string();
                *histogram.entry(letter).or_default() += 1;
                parsed += 1;
            }
        }
        let max_mass = histogram
            .values()
            .map(|&c| c as f64 / parsed.max(1) as f64)
            .fold(0.0, f64::max);
        collapse_flags.insert(language.clone(), parsed > 0 && max_mass >= COLLAPSE_MASS_THRESHOLD);
        histograms.insert(language.clone(), histogram);
    }
    let weighted: f64 = per_language_idr
        .iter()
        .map(|(lang, idr)| idr * per_language_usable[lang] as f64)
        .sum::<f64>()
        / per_language_usable.values().sum::<usize>() as f64;
    let idr_pooling_consistent = (pooled_idr - weighted).abs() < 1e-12;
    debug_assert!(idr_pooling_consistent, "pooled {pooled_idr} vs weighted {weighted}");

    let clc_outcome = cross_lingual_consistency(&records, &config.languages)?;
    let l = config.languages.len();
    let clc_baseline = mean(
        records
            .iter()
            .map(|r| inverse_k[&r.canonical_id].powi(l as i32 - 1)),
    )
    .unwrap_or(0.0);
    let accuracy =
        records.iter().filter(|r| r.accuracy_hit == Some(true)).count() as f64 / records.len() as f64;
    let aggregate = TacdAggregate {
        n_instances: instances.len(),
        n_usable_views: records.len(),
        n_errors: errors.len(),
        groups_counted: clc_outcome.groups_counted,
        groups_incomplete: clc_outcome.groups_incomplete,
        idr: pooled_idr,
        idr_baseline: mean(records.iter().map(|r| inverse_k[&r.canonical_id])).unwrap_or(0.0),
        per_language_idr,
        per_language_usable,
        idr_pooling_consistent,
        accuracy,
        clc: clc_outcome.clc,
        clc_baseline,
        letter_histograms: histograms,
        collapse_flags,
    };
    Ok(ProbeRun { records, errors, aggregate })
}
