//! Dataset ingestion, validation, parallel alignment, contamination subsets,
//! and descriptive corpus statistics.
//!
//! Dataset files are UTF-8 JSON Lines, one record per line, one file per
//! (dataset, language). See [`load_mcq_dataset`] and [`load_qa_dataset`] for
//! the record fields.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::keyed_stream;
use crate::text::{nearest_rank_percentile, tokenize_lower};

/// One multiple-choice benchmark instance in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    pub gold_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub language: String,
}

/// One extractive-QA benchmark instance in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    pub context: String,
    pub question: String,
    pub answer_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_char_start: Option<usize>,
    pub language: String,
}

/// One canonical instance with aligned views in every configured language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelInstance<T> {
    pub canonical_id: String,
    pub views: BTreeMap<String, T>,
}

/// Result of aligning per-language datasets by shared id.
#[derive(Debug, Clone)]
pub struct Alignment<T> {
    pub instances: Vec<ParallelInstance<T>>,
    /// Ids present in some but not all languages, in sorted order.
    pub dropped_ids: Vec<String>,
}

/// A deterministic contamination subset: `p`% of a dataset, selected by one
/// seeded shuffle followed by a prefix take, so subsets nest across `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContaminationCondition {
    pub p: u32,
    pub seed: u64,
    pub selected_ids: BTreeSet<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: record {id:?}, field `{field}`: {message}")]
    Invalid {
        path: String,
        line: usize,
        id: String,
        field: &'static str,
        message: String,
    },
    #[error("{path}:{line}: duplicate id {id:?}")]
    DuplicateId {
        path: String,
        line: usize,
        id: String,
    },
    #[error("{path}: expected language {expected:?} but record {id:?} has {found:?}")]
    LanguageMismatch {
        path: String,
        id: String,
        expected: String,
        found: String,
    },
    #[error("instance {id:?}: gold_index differs across languages: {details}")]
    GoldIndexMismatch { id: String, details: String },
    #[error("instance {id:?}: choice count differs across languages: {details}")]
    ChoiceCountMismatch { id: String, details: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("contamination percentage {p} outside [0, 100]")]
    InvalidPercentage { p: u32 },
    #[error("alignment needs at least one dataset")]
    NoDatasets,
}

fn trimmed_nonempty(s: &str) -> bool {
    !s.trim().is_empty()
}

/// Validate a single MCQ item against its invariants.
pub fn validate_mcq_item(item: &McqItem) -> Result<(), (&'static str, String)> {
    if !trimmed_nonempty(&item.id) {
        return Err(("id", "must be non-empty".into()));
    }
    if !trimmed_nonempty(&item.question) {
        return Err(("question", "must be non-empty after trimming".into()));
    }
    if item.choices.len() < 2 {
        return Err(("choices", format!("need at least 2 choices, got {}", item.choices.len())));
    }
    if let Some(pos) = item.choices.iter().position(|c| !trimmed_nonempty(c)) {
        return Err(("choices", format!("choice {pos} is empty after trimming")));
    }
    if item.gold_index >= item.choices.len() {
        return Err((
            "gold_index",
            format!("gold_index out of range: {} with {} choices", item.gold_index, item.choices.len()),
        ));
    }
    if !trimmed_nonempty(&item.language) {
        return Err(("language", "must be non-empty".into()));
    }
    Ok(())
}

/// Validate a single QA item against its invariants.
pub fn validate_qa_item(item: &QaItem) -> Result<(), (&'static str, String)> {
    if !trimmed_nonempty(&item.id) {
        return Err(("id", "must be non-empty".into()));
    }
    if !trimmed_nonempty(&item.question) {
        return Err(("question", "must be non-empty after trimming".into()));
    }
    if !trimmed_nonempty(&item.context) {
        return Err(("context", "must be non-empty after trimming".into()));
    }
    if item.answer_text.is_empty() {
        return Err(("answer_text", "must be non-empty".into()));
    }
    if let Some(start) = item.answer_char_start {
        let ok = item
            .context
            .get(start..)
            .map(|tail| tail.starts_with(&item.answer_text))
            .unwrap_or(false);
        if !ok {
            return Err((
                "answer_char_start",
                format!("context[{start}..] does not begin with answer_text"),
            ));
        }
    }
    if !trimmed_nonempty(&item.language) {
        return Err(("language", "must be non-empty".into()));
    }
    Ok(())
}

fn load_lines(path: &Path) -> Result<Vec<(usize, String)>, CorpusError> {
    let body = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(body
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn load_dataset<T, F>(
    path: &Path,
    expected_language: Option<&str>,
    validate: F,
    id_of: fn(&T) -> &str,
    lang_of: fn(&T) -> &str,
) -> Result<Vec<T>, CorpusError>
where
    T: serde::de::DeserializeOwned,
    F: Fn(&T) -> Result<(), (&'static str, String)>,
{
    let path_str = path.display().to_string();
    let mut items = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (line, raw) in load_lines(path)? {
        let item: T = serde_json::from_str(&raw).map_err(|e| CorpusError::Malformed {
            path: path_str.clone(),
            line,
            message: e.to_string(),
        })?;
        validate(&item).map_err(|(field, message)| CorpusError::Invalid {
            path: path_str.clone(),
            line,
            id: id_of(&item).to_string(),
            field,
            message,
        })?;
        if let Some(expected) = expected_language {
            if lang_of(&item) != expected {
                return Err(CorpusError::LanguageMismatch {
                    path: path_str.clone(),
                    id: id_of(&item).to_string(),
                    expected: expected.to_string(),
                    found: lang_of(&item).to_string(),
                });
            }
        }
        if !seen.insert(id_of(&item).to_string()) {
            return Err(CorpusError::DuplicateId {
                path: path_str.clone(),
                line,
                id: id_of(&item).to_string(),
            });
        }
        items.push(item);
    }
    Ok(items)
}

/// Load an MCQ dataset file, validating every record and preserving input
/// order. All records must carry `language == expected`.
pub fn load_mcq_dataset(path: &Path, language: &str) -> Result<Vec<McqItem>, CorpusError> {
    load_dataset(path, Some(language), validate_mcq_item, |i: &McqItem| &i.id, |i| &i.language)
}

/// Load an MCQ dataset file, taking the language from the records themselves
/// (they must all agree).
pub fn load_mcq_dataset_auto(path: &Path) -> Result<Vec<McqItem>, CorpusError> {
    let items = load_dataset(path, None, validate_mcq_item, |i: &McqItem| &i.id, |i| &i.language)?;
    ensure_uniform_language(path, items.iter().map(|i| (i.id.as_str(), i.language.as_str())))?;
    Ok(items)
}

/// Load a QA dataset file, validating every record and preserving input order.
pub fn load_qa_dataset(path: &Path, language: &str) -> Result<Vec<QaItem>, CorpusError> {
    load_dataset(path, Some(language), validate_qa_item, |i: &QaItem| &i.id, |i| &i.language)
}

/// Load a QA dataset file, taking the language from the records themselves.
pub fn load_qa_dataset_auto(path: &Path) -> Result<Vec<QaItem>, CorpusError> {
    let items = load_dataset(path, None, validate_qa_item, |i: &QaItem| &i.id, |i| &i.language)?;
    ensure_uniform_language(path, items.iter().map(|i| (i.id.as_str(), i.language.as_str())))?;
    Ok(items)
}

fn ensure_uniform_language<'a>(
    path: &Path,
    mut pairs: impl Iterator<Item = (&'a str, &'a str)>,
) -> Result<(), CorpusError> {
    if let Some((_, first)) = pairs.next() {
        for (id, lang) in pairs {
            if lang != first {
                return Err(CorpusError::LanguageMismatch {
                    path: path.display().to_string(),
                    id: id.to_string(),
                    expected: first.to_string(),
                    found: lang.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Serialize items back to the JSON Lines on-disk form.
pub fn items_to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable item"));
        out.push('\n');
    }
    out
}

/// Write items as a JSON Lines dataset file.
pub fn write_dataset<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    fs::write(path, items_to_jsonl(items)).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn align_by_id<T: Clone>(
    datasets: &BTreeMap<String, Vec<T>>,
    id_of: fn(&T) -> &str,
) -> Result<Alignment<T>, CorpusError> {
    if datasets.is_empty() {
        return Err(CorpusError::NoDatasets);
    }
    let mut maps: BTreeMap<&str, BTreeMap<&str, &T>> = BTreeMap::new();
    for (lang, items) in datasets {
        maps.insert(lang, items.iter().map(|i| (id_of(i), i)).collect());
    }
    let reference = datasets.values().next().expect("nonempty");
    let mut instances = Vec::new();
    let mut kept: HashSet<&str> = HashSet::new();
    for item in reference {
        let id = id_of(item);
        if maps.values().all(|m| m.contains_key(id)) {
            kept.insert(id);
            let views = datasets
                .iter()
                .map(|(lang, _)| (lang.clone(), (*maps[lang.as_str()][id]).clone()))
                .collect();
            instances.push(ParallelInstance {
                canonical_id: id.to_string(),
                views,
            });
        }
    }
    let mut dropped: BTreeSet<String> = BTreeSet::new();
    for items in datasets.values() {
        for item in items {
            let id = id_of(item);
            if !kept.contains(id) {
                dropped.insert(id.to_string());
            }
        }
    }
    Ok(Alignment {
        instances,
        dropped_ids: dropped.into_iter().collect(),
    })
}

/// Align per-language MCQ datasets by shared id. Only ids present in every
/// language are emitted, in the order of the first (lexicographically
/// smallest) language's file. Gold index and choice count must agree across
/// languages for each kept id.
pub fn align_parallel_mcq(
    datasets: &BTreeMap<String, Vec<McqItem>>,
) -> Result<Alignment<McqItem>, CorpusError> {
    let alignment = align_by_id(datasets, |i: &McqItem| &i.id)?;
    for instance in &alignment.instances {
        let mut views = instance.views.iter();
        let (first_lang, first) = views.next().expect("at least one view");
        for (lang, item) in views {
            if item.choices.len() != first.choices.len() {
                return Err(CorpusError::ChoiceCountMismatch {
                    id: instance.canonical_id.clone(),
                    details: format!(
                        "{first_lang}={}, {lang}={}",
                        first.choices.len(),
                        item.choices.len()
                    ),
                });
            }
            if item.gold_index != first.gold_index {
                return Err(CorpusError::GoldIndexMismatch {
                    id: instance.canonical_id.clone(),
                    details: format!("{first_lang}={}, {lang}={}", first.gold_index, item.gold_index),
                });
            }
        }
    }
    Ok(alignment)
}

/// Align per-language QA datasets by shared id.
pub fn align_parallel_qa(
    datasets: &BTreeMap<String, Vec<QaItem>>,
) -> Result<Alignment<QaItem>, CorpusError> {
    align_by_id(datasets, |i: &QaItem| &i.id)
}

/// Select `floor(p * N / 100)` instance ids deterministically: one seeded
/// uniform shuffle of the full id list, then a prefix take. For a fixed seed
/// the selections nest: `selected(p1) ⊆ selected(p2)` whenever `p1 <= p2`.
pub fn select_contaminated_subset(
    ids: &[String],
    p: u32,
    seed: u64,
) -> Result<ContaminationCondition, CorpusError> {
    if p > 100 {
        return Err(CorpusError::InvalidPercentage { p });
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let mut rng = keyed_stream(seed, &["contamination-subset"]);
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let take = (p as usize) * ids.len() / 100;
    let selected_ids = order[..take].iter().map(|&i| ids[i].clone()).collect();
    Ok(ContaminationCondition { p, seed, selected_ids })
}

/// Mean and upper-tail percentiles of a per-item statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub p90: f64,
    pub p99: f64,
}

impl SummaryStats {
    fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite stats"));
        SummaryStats {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            p90: nearest_rank_percentile(&sorted, 90.0),
            p99: nearest_rank_percentile(&sorted, 99.0),
        }
    }
}

/// Descriptive statistics of a dataset. The QA-only fields are absent for
/// MCQ corpora.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusStats {
    pub item_count: usize,
    pub total_tokens: usize,
    pub vocabulary_size: usize,
    /// Unique tokens as a percentage of total tokens.
    pub type_token_ratio_pct: f64,
    /// Per-item `|tokens(question) ∩ tokens(context)| / |tokens(question)|`
    /// in percent, unique-token semantics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_question_overlap_pct: Option<SummaryStats>,
    /// Per-item answer length in tokens.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer_length_words: Option<SummaryStats>,
}

/// Corpus statistics over MCQ items (question and choice texts).
pub fn corpus_stats_mcq(items: &[McqItem]) -> Result<CorpusStats, CorpusError> {
    if items.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    let mut total = 0usize;
    for item in items {
        for text in std::iter::once(&item.question).chain(item.choices.iter()) {
            for token in tokenize_lower(text) {
                total += 1;
                vocab.insert(token);
            }
        }
    }
    Ok(CorpusStats {
        item_count: items.len(),
        total_tokens: total,
        vocabulary_size: vocab.len(),
        type_token_ratio_pct: 100.0 * vocab.len() as f64 / total.max(1) as f64,
        context_question_overlap_pct: None,
        answer_length_words: None,
    })
}

/// Corpus statistics over QA items (context, question, and answer texts),
/// including context-question lexical overlap and answer length summaries.
pub fn corpus_stats_qa(items: &[QaItem]) -> Result<CorpusStats, CorpusError> {
    if items.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    let mut total = 0usize;
    let mut overlaps = Vec::with_capacity(items.len());
    let mut answer_lens = Vec::with_capacity(items.len());
    for item in items {
        let q_tokens = tokenize_lower(&item.question);
        let c_tokens = tokenize_lower(&item.context);
        let a_tokens = tokenize_lower(&item.answer_text);
        total += q_tokens.len() + c_tokens.len() + a_tokens.len();
        let q_set: BTreeSet<&String> = q_tokens.iter().collect();
        let c_set: BTreeSet<&String> = c_tokens.iter().collect();
        if !q_set.is_empty() {
            let shared = q_set.intersection(&c_set).count();
            overlaps.push(100.0 * shared as f64 / q_set.len() as f64);
        }
        answer_lens.push(a_tokens.len() as f64);
        for token in q_tokens.into_iter().chain(c_tokens).chain(a_tokens) {
            vocab.insert(token);
        }
    }
    Ok(CorpusStats {
        item_count: items.len(),
        total_tokens: total,
        vocabulary_size: vocab.len(),
        type_token_ratio_pct: 100.0 * vocab.len() as f64 / total.max(1) as f64,
        context_question_overlap_pct: (!overlaps.is_empty()).then(|| SummaryStats::from_values(&overlaps)),
        answer_length_words: Some(SummaryStats::from_values(&answer_lens)),
    })
}
