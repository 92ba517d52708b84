//! A deterministic synthetic "memorizing model".
//!
//! The mock serves the same completion contract as a real endpoint but its
//! behavior is a pure function of `(MockConfig, request)`: decision draws are
//! keyed by `(seed, instance id[, language])`, never by a shared stateful
//! generator, so responses are independent of request arrival order and
//! reruns are bit-identical.
//!
//! To answer a prompt the mock parses it with the shipped template grammar,
//! recovers the instance from a knowledge base built from the same dataset
//! files the auditor uses, and walks a decision cascade:
//!
//! 1. masked prompt + memorized + `surface_memory` -> the exact hidden text
//! 2. memorized, draw < `index_memory_strength` -> the ORIGINAL gold letter,
//!    ignoring the shuffle (the memorized-index reflex)
//! 3. memorized, draw < `crosslingual_invariance` -> a language-independent
//!    letter (per-instance by default, or a global collapse letter)
//! 4. draw < `base_accuracy` -> the displayed gold letter (a correct reasoner)
//! 5. otherwise a uniform letter, independent per language
//!
//! Scoring requests are resolved through a digest side channel (canonical
//! scoring text -> instance id); memorized instances draw per-token logprobs
//! from the member profile, everything else from the non-member profile.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{
    BackendError, CompletionBackend, ModelResponse, WireRequest, WireResponse, WireToken,
};
use crate::corpus::{McqItem, QaItem};
use crate::perturb::MASK_PLACEHOLDER;
use crate::rng::{keyed_stream, keyed_unit, sha256_hex};
use crate::scoring::{mcq_scoring_text, qa_scoring_text};
use crate::text::{is_stopword, token_spans};

/// Per-token logprob profiles for member (memorized) and non-member texts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogprobProfile {
    pub member_mean: f64,
    pub member_std: f64,
    pub nonmember_mean: f64,
    pub nonmember_std: f64,
}

impl Default for LogprobProfile {
    fn default() -> Self {
        LogprobProfile {
            member_mean: -0.5,
            member_std: 0.2,
            nonmember_mean: -2.5,
            nonmember_std: 0.8,
        }
    }
}

/// Full mock-model configuration. See the module docs for the cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    pub contamination_p: u32,
    pub memorized_ids: BTreeSet<String>,
    /// alpha: probability a memorized item is answered with its ORIGINAL
    /// pre-shuffle gold letter.
    pub index_memory_strength: f64,
    /// Memorized masked prompts are answered with the exact hidden text.
    pub surface_memory: bool,
    /// beta: probability a memorized item gets a language-independent answer.
    pub crosslingual_invariance: f64,
    /// When set, the beta branch answers this letter for every instance (the
    /// single-letter collapse regime); otherwise each instance gets its own
    /// fixed letter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collapse_letter: Option<usize>,
    /// Probability of answering with the displayed gold letter otherwise.
    pub base_accuracy: f64,
    pub logprob_profile: LogprobProfile,
    pub seed: u64,
    /// Emitted for unmemorized masked-QA prompts; fixtures pick references
    /// disjoint from it.
    pub dummy_token: String,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig {
            contamination_p: 0,
            memorized_ids: BTreeSet::new(),
            index_memory_strength: 0.0,
            surface_memory: false,
            crosslingual_invariance: 0.0,
            collapse_letter: None,
            base_accuracy: 0.0,
            logprob_profile: LogprobProfile::default(),
            seed: 0,
            dummy_token: "xyzzy".into(),
        }
    }
}

impl MockConfig {
    pub fn validate(&self) -> Result<(), MockError> {
        for (name, value) in [
            ("index_memory_strength", self.index_memory_strength),
            ("crosslingual_invariance", self.crosslingual_invariance),
            ("base_accuracy", self.base_accuracy),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(MockError::Config(format!("{name} {value} outside [0, 1]")));
            }
        }
        if self.contamination_p > 100 {
            return Err(MockError::Config(format!(
                "contamination_p {} outside [0, 100]",
                self.contamination_p
            )));
        }
        let p = &self.logprob_profile;
        if p.member_mean <= p.nonmember_mean {
            return Err(MockError::Config(
                "member_mean must exceed nonmember_mean".into(),
            ));
        }
        if p.member_std <= 0.0 || p.nonmember_std <= 0.0 {
            return Err(MockError::Config("profile stds must be positive".into()));
        }
        if let Some(letter) = self.collapse_letter {
            if letter >= 26 {
                return Err(MockError::Config(format!("collapse_letter {letter} out of range")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MockError {
    #[error("invalid mock configuration: {0}")]
    Config(String),
    #[error("unrecognized prompt shape: {0}")]
    UnrecognizedPrompt(String),
    #[error("prompt does not match any known instance")]
    UnknownInstance,
    #[error("prompt options are inconsistent with instance {id:?}")]
    InconsistentPrompt { id: String },
    #[error("knowledge base: {0}")]
    KnowledgeBase(String),
    #[error("nothing to score: text is empty")]
    EmptyText,
}

#[derive(Debug, Clone)]
struct KbMcqEntry {
    canonical_id: String,
    language: String,
    choices: Vec<String>,
    gold_index: usize,
}

#[derive(Debug, Clone)]
struct KbQaEntry {
    canonical_id: String,
    surface: String,
}

/// The mock model: configuration plus a knowledge base of the datasets it is
/// allowed to "remember".
pub struct MockModel {
    config: MockConfig,
    mcq_by_question: HashMap<String, Vec<KbMcqEntry>>,
    qa_by_masked_question: HashMap<String, Vec<KbQaEntry>>,
    scoring_digest_to_id: HashMap<String, String>,
    unknown_scored: AtomicU64,
}

impl MockModel {
    pub fn new(config: MockConfig) -> Result<Self, MockError> {
        config.validate()?;
        Ok(MockModel {
            config,
            mcq_by_question: HashMap::new(),
            qa_by_masked_question: HashMap::new(),
            scoring_digest_to_id: HashMap::new(),
            unknown_scored: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    /// Texts scored through the digest side channel that matched no known
    /// instance (scored as non-member).
    pub fn unknown_scored(&self) -> u64 {
        self.unknown_scored.load(Ordering::Relaxed)
    }

    /// Register MCQ items. Choice texts must be unique within an item so the
    /// masked option can be recovered by elimination.
    pub fn add_mcq_items(&mut self, items: &[McqItem]) -> Result<(), MockError> {
        for item in items {
            let mut sorted = item.choices.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != item.choices.len() {
                return Err(MockError::KnowledgeBase(format!(
                    "item {:?}: duplicate choice texts",
                    item.id
                )));
            }
            self.mcq_by_question
                .entry(item.question.clone())
                .or_default()
                .push(KbMcqEntry {
                    canonical_id: item.id.clone(),
                    language: item.language.clone(),
                    choices: item.choices.clone(),
                    gold_index: item.gold_index,
                });
            self.scoring_digest_to_id
                .insert(sha256_hex(mcq_scoring_text(item).as_bytes()), item.id.clone());
        }
        Ok(())
    }

    /// Register QA items. Every candidate masked variant of each question is
    /// enumerated so masked prompts can be matched exactly.
    pub fn add_qa_items(&mut self, items: &[QaItem]) -> Result<(), MockError> {
        for item in items {
            for (start, end) in token_spans(&item.question) {
                let token = &item.question[start..end];
                if token.chars().count() < 3 || is_stopword(&token.to_lowercase(), &item.language) {
                    continue;
                }
                let mut masked = String::with_capacity(item.question.len());
                masked.push_str(&item.question[..start]);
                masked.push_str(MASK_PLACEHOLDER);
                masked.push_str(&item.question[end..]);
                self.qa_by_masked_question
                    .entry(masked)
                    .or_default()
                    .push(KbQaEntry {
                        canonical_id: item.id.clone(),
                        surface: token.to_string(),
                    });
            }
            self.scoring_digest_to_id
                .insert(sha256_hex(qa_scoring_text(item).as_bytes()), item.id.clone());
        }
        Ok(())
    }

    fn is_memorized(&self, id: &str) -> bool {
        self.config.memorized_ids.contains(id)
    }

    fn letter(&self, index: usize) -> String {
        ((b'A' + index as u8) as char).to_string()
    }

    /// Answer a completion prompt. Errors on prompts that do not match the
    /// shipped template grammar or any known instance.
    pub fn answer_prompt(&self, prompt: &str) -> Result<String, MockError> {
        match parse_prompt(prompt)? {
            ParsedPrompt::Mcq { question, options, masked_slot } => {
                self.answer_mcq(&question, &options, masked_slot)
            }
            ParsedPrompt::Qa { masked_question } => self.answer_qa(&masked_question),
        }
    }

    fn answer_mcq(
        &self,
        question: &str,
        options: &[String],
        masked_slot: Option<usize>,
    ) -> Result<String, MockError> {
        let entries = self
            .mcq_by_question
            .get(question)
            .ok_or(MockError::UnknownInstance)?;
        let entry = entries
            .iter()
            .find(|e| options_match(&e.choices, options, masked_slot))
            .ok_or(MockError::UnknownInstance)?;
        let k = entry.choices.len();
        if options.len() != k {
            return Err(MockError::InconsistentPrompt { id: entry.canonical_id.clone() });
        }
        let id = entry.canonical_id.as_str();
        let lang = entry.language.as_str();
        let seed = self.config.seed;
        let memorized = self.is_memorized(id);

        if masked_slot.is_some() && memorized && self.config.surface_memory {
            // the hidden text is the one choice not visible in the prompt
            let hidden = entry
                .choices
                .iter()
                .find(|c| !options.contains(c))
                .ok_or(MockError::InconsistentPrompt { id: id.to_string() })?;
            return Ok(hidden.clone());
        }
        if memorized && keyed_unit(seed, &["mock-alpha", id]) < self.config.index_memory_strength {
            return Ok(self.letter(entry.gold_index));
        }
        if memorized && keyed_unit(seed, &["mock-beta", id]) < self.config.crosslingual_invariance {
            let letter = match self.config.collapse_letter {
                Some(l) => l.min(k - 1),
                None => crate::rng::keyed_index(seed, &["mock-beta-letter", id], k),
            };
            return Ok(self.letter(letter));
        }
        if keyed_unit(seed, &["mock-base", id, lang]) < self.config.base_accuracy {
            let displayed_gold = options
                .iter()
                .position(|o| o == &entry.choices[entry.gold_index])
                .ok_or(MockError::InconsistentPrompt { id: id.to_string() })?;
            return Ok(self.letter(displayed_gold));
        }
        Ok(self.letter(crate::rng::keyed_index(seed, &["mock-uniform", id, lang], k)))
    }

    fn answer_qa(&self, masked_question: &str) -> Result<String, MockError> {
        let entries = self
            .qa_by_masked_question
            .get(masked_question)
            .ok_or(MockError::UnknownInstance)?;
        let entry = &entries[0];
        if self.is_memorized(&entry.canonical_id) && self.config.surface_memory {
            return Ok(entry.surface.clone());
        }
        Ok(self.config.dummy_token.clone())
    }

    /// Score a text: whitespace tokens, each with a logprob drawn
    /// deterministically from the member or non-member profile. The reported
    /// distribution moments are the non-member (background) moments, constant
    /// per position, so the Min-K%++ path is exercisable.
    pub fn score_text(&self, text: &str) -> Result<Vec<WireToken>, MockError> {
        if text.trim().is_empty() {
            return Err(MockError::EmptyText);
        }
        let digest = sha256_hex(text.as_bytes());
        let member = match self.scoring_digest_to_id.get(&digest) {
            Some(id) => self.is_memorized(id),
            None => {
                self.unknown_scored.fetch_add(1, Ordering::Relaxed);
                false
            }
        };
        let profile = self.config.logprob_profile;
        let (mean, std) = if member {
            (profile.member_mean, profile.member_std)
        } else {
            (profile.nonmember_mean, profile.nonmember_std)
        };
        let normal = Normal::new(mean, std).expect("validated profile");
        let mut rng = keyed_stream(self.config.seed, &["mock-score", &digest]);
        Ok(text
            .split_whitespace()
            .map(|piece| WireToken {
                token: piece.to_string(),
                logprob: normal.sample(&mut rng).min(-1e-9),
                dist_mean: Some(profile.nonmember_mean),
                dist_std: Some(profile.nonmember_std),
            })
            .collect())
    }

    /// Dispatch a wire request: echoed-logprob requests go to scoring,
    /// everything else is answered through the prompt grammar.
    pub fn handle(&self, request: &WireRequest) -> Result<WireResponse, MockError> {
        if request.echo && request.logprobs {
            let tokens = self.score_text(&request.prompt)?;
            Ok(WireResponse { text: request.prompt.clone(), tokens: Some(tokens) })
        } else {
            let text = self.answer_prompt(&request.prompt)?;
            Ok(WireResponse { text, tokens: None })
        }
    }
}

fn options_match(choices: &[String], options: &[String], masked_slot: Option<usize>) -> bool {
    if choices.len() != options.len() {
        return false;
    }
    options.iter().enumerate().all(|(slot, option)| {
        if masked_slot == Some(slot) {
            option == MASK_PLACEHOLDER
        } else {
            choices.contains(option)
        }
    })
}

enum ParsedPrompt {
    Mcq {
        question: String,
        options: Vec<String>,
        masked_slot: Option<usize>,
    },
    Qa {
        masked_question: String,
    },
}

/// Parse a prompt produced by the shipped templates. The grammar is
/// intentionally narrow: a `Question:`/`Options:` block for MCQ, a
/// `Context:`/`Question:` pair for QA.
fn parse_prompt(prompt: &str) -> Result<ParsedPrompt, MockError> {
    let has_options = prompt.contains("\nOptions:\n");
    let has_context = prompt.contains("Context: ");
    if has_options {
        let q_start = prompt
            .find("Question: ")
            .ok_or_else(|| MockError::UnrecognizedPrompt("no Question: line".into()))?
            + "Question: ".len();
        let q_end = prompt[q_start..]
            .find("\nOptions:\n")
            .ok_or_else(|| MockError::UnrecognizedPrompt("no Options: block".into()))?
            + q_start;
        let question = prompt[q_start..q_end].trim().to_string();
        let mut options = Vec::new();
        let mut masked_slot = None;
        for line in prompt[q_end + "\nOptions:\n".len()..].lines() {
            let bytes = line.as_bytes();
            let expected = (b'A' + options.len() as u8) as char;
            if bytes.len() >= 3 && bytes[0] == expected as u8 && &line[1..3] == ". " {
                let text = line[3..].to_string();
                if text == MASK_PLACEHOLDER {
                    masked_slot = Some(options.len());
                }
                options.push(text);
            } else {
                break;
            }
        }
        if options.len() < 2 {
            return Err(MockError::UnrecognizedPrompt("fewer than 2 options".into()));
        }
        Ok(ParsedPrompt::Mcq { question, options, masked_slot })
    } else if has_context {
        let c_start = prompt
            .find("Context: ")
            .expect("checked above")
            + "Context: ".len();
        let q_marker = "\nQuestion: ";
        let q_start = prompt[c_start..]
            .find(q_marker)
            .ok_or_else(|| MockError::UnrecognizedPrompt("no Question: line after context".into()))?
            + c_start
            + q_marker.len();
        let q_end = prompt[q_start..]
            .find("\n\n")
            .map(|i| i + q_start)
            .unwrap_or(prompt.len());
        let masked_question = prompt[q_start..q_end].trim().to_string();
        Ok(ParsedPrompt::Qa { masked_question })
    } else {
        Err(MockError::UnrecognizedPrompt(
            "prompt matches neither the MCQ nor the QA template".into(),
        ))
    }
}

impl CompletionBackend for MockModel {
    fn endpoint_id(&self) -> String {
        "mock:in-process".into()
    }

    fn complete(&self, prompt: &str) -> Result<ModelResponse, BackendError> {
        if prompt.trim().is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let text = self
            .answer_prompt(prompt)
            .map_err(|e| BackendError::Mock(e.to_string()))?;
        Ok(ModelResponse {
            raw_text: text,
            tokens: None,
            latency: Duration::ZERO,
            endpoint_id: self.endpoint_id(),
        })
    }

    fn score(&self, text: &str) -> Result<Vec<WireToken>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::NothingToScore);
        }
        self.score_text(text).map_err(|e| BackendError::Mock(e.to_string()))
    }
}

/// Convenience: a mock with items loaded and a memorized subset selected from
/// the given ids at `p`% with the config's seed.
pub fn mock_with_memorized_subset(
    mut config: MockConfig,
    ids: &[String],
    p: u32,
) -> Result<MockConfig, MockError> {
    let condition = crate::corpus::select_contaminated_subset(ids, p, config.seed)
        .map_err(|e| MockError::Config(e.to_string()))?;
    config.contamination_p = p;
    config.memorized_ids = condition.selected_ids;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::{
        mask_choice, permute_choices, PermutationSampling, PromptTemplate,
    };

    fn items() -> Vec<McqItem> {
        (0..8)
            .map(|i| McqItem {
                id: format!("item-{i}"),
                question: format!("Which crate handles case {i}?"),
                choices: vec![
                    format!("crate alpha {i}"),
                    format!("crate beta {i}"),
                    format!("crate gamma {i}"),
                    format!("crate delta {i}"),
                ],
                gold_index: i % 4,
                subject: None,
                language: "en".into(),
            })
            .collect()
    }

    fn model_with(config: MockConfig) -> MockModel {
        let mut model = MockModel::new(config).unwrap();
        model.add_mcq_items(&items()).unwrap();
        model
    }

    fn all_ids() -> BTreeSet<String> {
        items().iter().map(|i| i.id.clone()).collect()
    }

    #[test]
    fn alpha_one_replays_original_gold_letter() {
        let config = MockConfig {
            memorized_ids: all_ids(),
            index_memory_strength: 1.0,
            seed: 3,
            ..MockConfig::default()
        };
        let model = model_with(config);
        let tpl = PromptTemplate::ts_mcq_default();
        for item in items() {
            let view = permute_choices(&item, 11, PermutationSampling::DisplaceGold, &tpl).unwrap();
            let masked = mask_choice(&view, 11, &tpl).unwrap();
            let answer = model.answer_prompt(&masked.prompt).unwrap();
            assert_eq!(answer, ((b'A' + item.gold_index as u8) as char).to_string());
        }
    }

    #[test]
    fn base_accuracy_one_answers_displayed_gold() {
        let config = MockConfig { base_accuracy: 1.0, seed: 3, ..MockConfig::default() };
        let model = model_with(config);
        let tpl = PromptTemplate::tacd_mcq_default();
        for item in items() {
            let view = permute_choices(&item, 11, PermutationSampling::Unrestricted, &tpl).unwrap();
            let answer = model.answer_prompt(&view.prompt).unwrap();
            let expected = ((b'A' + view.displayed_gold_index as u8) as char).to_string();
            assert_eq!(answer, expected);
        }
    }

    #[test]
    fn beta_one_is_language_independent() {
        let mut en = items();
        let mut ar = items();
        for item in &mut ar {
            item.language = "ar".into();
            item.question = format!("AR {}", item.question);
            item.choices = item.choices.iter().map(|c| format!("ar {c}")).collect();
        }
        let config = MockConfig {
            memorized_ids: all_ids(),
            crosslingual_invariance: 1.0,
            seed: 5,
            ..MockConfig::default()
        };
        let mut model = MockModel::new(config).unwrap();
        model.add_mcq_items(&en).unwrap();
        model.add_mcq_items(&ar).unwrap();
        en.truncate(4);
        let tpl = PromptTemplate::tacd_mcq_default();
        for (e, a) in en.iter().zip(ar.iter()) {
            let ve = permute_choices(e, 2, PermutationSampling::Unrestricted, &tpl).unwrap();
            let va = permute_choices(a, 2, PermutationSampling::Unrestricted, &tpl).unwrap();
            assert_eq!(
                model.answer_prompt(&ve.prompt).unwrap(),
                model.answer_prompt(&va.prompt).unwrap(),
                "beta branch must not depend on language"
            );
        }
    }

    #[test]
    fn surface_memory_reproduces_masked_option_text() {
        let config = MockConfig {
            memorized_ids: all_ids(),
            surface_memory: true,
            seed: 9,
            ..MockConfig::default()
        };
        let model = model_with(config);
        let tpl = PromptTemplate::ts_mcq_default();
        let item = &items()[3];
        let view = permute_choices(item, 4, PermutationSampling::Unrestricted, &tpl).unwrap();
        let masked = mask_choice(&view, 4, &tpl).unwrap();
        let answer = model.answer_prompt(&masked.prompt).unwrap();
        assert_eq!(Some(answer), masked.mask_reference);
    }

    #[test]
    fn identical_requests_get_identical_responses() {
        let config = MockConfig { seed: 7, ..MockConfig::default() };
        let model = model_with(config);
        let tpl = PromptTemplate::tacd_mcq_default();
        let view = permute_choices(&items()[0], 1, PermutationSampling::Unrestricted, &tpl).unwrap();
        let a = model.answer_prompt(&view.prompt).unwrap();
        let b = model.answer_prompt(&view.prompt).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_prompt_shapes_error() {
        let model = model_with(MockConfig::default());
        assert!(matches!(
            model.answer_prompt("tell me a story"),
            Err(MockError::UnrecognizedPrompt(_))
        ));
        let tpl = PromptTemplate::tacd_mcq_default();
        let mut foreign = items()[0].clone();
        foreign.question = "A question the model never saw?".into();
        let view = permute_choices(&foreign, 1, PermutationSampling::Unrestricted, &tpl).unwrap();
        assert!(matches!(model.answer_prompt(&view.prompt), Err(MockError::UnknownInstance)));
    }

    #[test]
    fn memorized_scores_sit_in_member_band() {
        let config = MockConfig {
            memorized_ids: all_ids(),
            seed: 13,
            ..MockConfig::default()
        };
        let model = model_with(config);
        let text = mcq_scoring_text(&items()[0]);
        let tokens = model.score_text(&text).unwrap();
        assert!(!tokens.is_empty());
        let mut in_band = 0usize;
        for t in &tokens {
            assert!(t.logprob < 0.0, "logprobs must stay negative");
            assert_eq!(t.dist_mean, Some(-2.5));
            assert_eq!(t.dist_std, Some(0.8));
            if t.logprob >= -1.1 {
                in_band += 1;
            }
        }
        // member profile N(-0.5, 0.2): essentially all tokens within 3 sigma
        assert!(in_band as f64 / tokens.len() as f64 > 0.95);
    }

    #[test]
    fn unknown_digest_scored_as_nonmember_and_counted() {
        let config = MockConfig { memorized_ids: all_ids(), seed: 13, ..MockConfig::default() };
        let model = model_with(config);
        let tokens = model.score_text("completely unknown text").unwrap();
        assert_eq!(model.unknown_scored(), 1);
        for t in tokens {
            assert!(t.logprob < -0.5, "nonmember profile draws should sit low, got {}", t.logprob);
        }
    }

    #[test]
    fn score_is_deterministic() {
        let model = model_with(MockConfig { seed: 21, ..MockConfig::default() });
        let a = model.score_text("some benchmark sentence").unwrap();
        let b = model.score_text("some benchmark sentence").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_score_text_errors() {
        let model = model_with(MockConfig::default());
        assert!(matches!(model.score_text("   "), Err(MockError::EmptyText)));
    }

    #[test]
    fn qa_surface_and_dummy_paths() {
        let qa = QaItem {
            id: "qa-1".into(),
            context: "The gate was rebuilt in 1874.".into(),
            question: "Which guild rebuilt the gate?".into(),
            answer_text: "the harbor guild".into(),
            answer_char_start: None,
            language: "en".into(),
        };
        let mut config = MockConfig { surface_memory: true, ..MockConfig::default() };
        config.memorized_ids.insert("qa-1".into());
        let mut model = MockModel::new(config).unwrap();
        model.add_qa_items(std::slice::from_ref(&qa)).unwrap();
        let tpl = PromptTemplate::ts_qa_default();
        let view = crate::perturb::mask_question_token(
            &qa,
            crate::perturb::MaskStrategy::LongestContentWord,
            0,
            None,
            &tpl,
        )
        .unwrap();
        assert_eq!(model.answer_prompt(&view.prompt).unwrap(), view.masked_surface);

        let clean = MockModel::new(MockConfig::default()).unwrap();
        let mut clean = clean;
        clean.add_qa_items(std::slice::from_ref(&qa)).unwrap();
        assert_eq!(clean.answer_prompt(&view.prompt).unwrap(), "xyzzy");
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut config = MockConfig { index_memory_strength: 1.5, ..MockConfig::default() };
        assert!(config.validate().is_err());
        config.index_memory_strength = 0.5;
        config.logprob_profile.member_mean = -3.0;
        assert!(config.validate().is_err(), "member mean must exceed nonmember mean");
    }
}
