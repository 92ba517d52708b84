//! Perturbed evaluation views: seeded choice permutations, masked-option MCQ
//! prompts, masked-token QA prompts, and per-language TACD views.
//!
//! All randomness is drawn from streams keyed by `(run_seed, instance id)`
//! (plus the language in per-language permutation mode), so views are
//! reproducible and independent of evaluation order.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{McqItem, ParallelInstance, QaItem};
use crate::rng::{keyed_stream, sha256_hex};
use crate::text::{is_stopword, token_spans};

/// The literal placeholder spliced into masked prompts.
pub const MASK_PLACEHOLDER: &str = "[MASK]";

/// Letters cap the choice count; templates enumerate options as A., B., ...
pub const MAX_CHOICES: usize = 26;

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("instance {id:?}: need at least 2 choices, got {k}")]
    TooFewChoices { id: String, k: usize },
    #[error("instance {id:?}: at most {MAX_CHOICES} choices supported, got {k}")]
    TooManyChoices { id: String, k: usize },
    #[error("instance {id:?}: view already carries a mask")]
    AlreadyMasked { id: String },
    #[error("instance {id:?}: no incorrect option to mask")]
    NoIncorrectOption { id: String },
    #[error("instance {id:?}: no maskable token in question")]
    NoMaskableToken { id: String },
    #[error("rarest-by-corpus-frequency masking needs a frequency table")]
    MissingFrequencyTable,
    #[error("instance {id:?}: missing language view {language:?}")]
    MissingLanguageView { id: String, language: String },
    #[error("template: {0}")]
    Template(String),
    #[error("permutation mapping {mapping:?} is not a bijection")]
    NotABijection { mapping: Vec<usize> },
}

/// A permutation of K display slots. `mapping[i]` is the display slot of
/// original choice `i`, so `displayed[mapping[i]] == choices[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Permutation { mapping: (0..k).collect() }
    }

    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self, PerturbError> {
        let k = mapping.len();
        let mut seen = vec![false; k];
        for &slot in &mapping {
            if slot >= k || seen[slot] {
                return Err(PerturbError::NotABijection { mapping });
            }
            seen[slot] = true;
        }
        Ok(Permutation { mapping })
    }

    /// Uniform draw over all K! permutations (Fisher-Yates on the display
    /// order, then inverted into original-to-slot form).
    pub fn sample<R: Rng>(k: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..k).collect(); // order[slot] = original index
        for i in (1..k).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut mapping = vec![0usize; k];
        for (slot, &original) in order.iter().enumerate() {
            mapping[original] = slot;
        }
        Permutation { mapping }
    }

    pub fn size(&self) -> usize {
        self.mapping.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    /// Display slot of original choice `i`.
    pub fn slot_of(&self, original: usize) -> usize {
        self.mapping[original]
    }

    /// Original choice shown at display slot `s`.
    pub fn original_of(&self, slot: usize) -> usize {
        self.mapping.iter().position(|&x| x == slot).expect("bijection")
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0usize; self.mapping.len()];
        for (original, &slot) in self.mapping.iter().enumerate() {
            inv[slot] = original;
        }
        Permutation { mapping: inv }
    }

    pub fn apply<T: Clone>(&self, items: &[T]) -> Vec<T> {
        assert_eq!(items.len(), self.mapping.len());
        let mut out: Vec<Option<T>> = vec![None; items.len()];
        for (original, &slot) in self.mapping.iter().enumerate() {
            out[slot] = Some(items[original].clone());
        }
        out.into_iter().map(|x| x.expect("bijection")).collect()
    }
}

/// How permutations are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationSampling {
    /// Uniform over all K! permutations. This is the default: the 1/K IDR
    /// chance floor presumes unrestricted sampling.
    Unrestricted,
    /// Restrict to permutations that move the gold choice off its original
    /// slot. Sharper separation, but shifts the chance floor; labeled in
    /// reports.
    DisplaceGold,
}

/// Whether TACD samples one permutation per instance or one per language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMode {
    /// One permutation per instance, applied in every language view. Letter
    /// and content comparisons coincide for consistency checks.
    Shared,
    /// Independent permutation per language view.
    PerLanguage,
}

/// How the masked question token is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskStrategy {
    LongestContentWord,
    RarestByCorpusFrequency,
}

/// Provenance of a view's randomness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub run_seed: u64,
    pub instance_id: String,
}

/// A perturbed, prompt-ready MCQ rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqView {
    pub canonical_id: String,
    pub language: String,
    pub question: String,
    pub permutation: Permutation,
    pub displayed_choices: Vec<String>,
    pub displayed_gold_index: usize,
    pub original_gold_index: usize,
    /// Display slot whose text is masked in the prompt; never the gold slot.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masked_display_slot: Option<usize>,
    /// The removed option text, kept as the ROUGE-L reference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_reference: Option<String>,
    pub prompt: String,
    pub seed_trace: SeedTrace,
}

/// A masked-question QA rendering; the context is left byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaView {
    pub canonical_id: String,
    pub language: String,
    pub masked_surface: String,
    /// Index of the masked token among the question's tokens.
    pub masked_token_position: usize,
    pub masked_question: String,
    pub context: String,
    pub prompt: String,
    pub seed_trace: SeedTrace,
}

/// A prompt template with named placeholders. MCQ templates must contain
/// `{question}` and `{choices}`; QA templates `{context}` and `{question}`.
/// The SHA-256 of the template text is recorded in reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
    hash_hex: String,
}

const TS_MCQ_TEMPLATE: &str = include_str!("../templates/ts_mcq.txt");
const TACD_MCQ_TEMPLATE: &str = include_str!("../templates/tacd_mcq.txt");
const TS_QA_TEMPLATE: &str = include_str!("../templates/ts_qa.txt");

impl PromptTemplate {
    pub fn new_mcq(text: impl Into<String>) -> Result<Self, PerturbError> {
        let text = text.into();
        for needed in ["{question}", "{choices}"] {
            if !text.contains(needed) {
                return Err(PerturbError::Template(format!("missing placeholder {needed}")));
            }
        }
        Ok(Self::from_text(text))
    }

    pub fn new_qa(text: impl Into<String>) -> Result<Self, PerturbError> {
        let text = text.into();
        for needed in ["{context}", "{question}"] {
            if !text.contains(needed) {
                return Err(PerturbError::Template(format!("missing placeholder {needed}")));
            }
        }
        Ok(Self::from_text(text))
    }

    fn from_text(text: String) -> Self {
        let hash_hex = sha256_hex(text.as_bytes());
        PromptTemplate { text, hash_hex }
    }

    /// Shipped default for the masked-option TS-Guessing MCQ probe.
    pub fn ts_mcq_default() -> Self {
        Self::new_mcq(TS_MCQ_TEMPLATE).expect("shipped template is valid")
    }

    /// Shipped default for the plain-answer TACD MCQ prompt.
    pub fn tacd_mcq_default() -> Self {
        Self::new_mcq(TACD_MCQ_TEMPLATE).expect("shipped template is valid")
    }

    /// Shipped default for the masked-token TS-Guessing QA probe.
    pub fn ts_qa_default() -> Self {
        Self::new_qa(TS_QA_TEMPLATE).expect("shipped template is valid")
    }

    pub fn hash_hex(&self) -> &str {
        &self.hash_hex
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Substitute placeholders in a single pass; substituted values are never
    /// rescanned, so braces inside dataset text cannot corrupt the prompt.
    fn render(&self, values: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len() + 128);
        let mut rest = self.text.as_str();
        'outer: while !rest.is_empty() {
            let mut earliest: Option<(usize, &str, &str)> = None;
            for (name, value) in values {
                let pattern = format!("{{{name}}}");
                if let Some(pos) = rest.find(&pattern) {
                    if earliest.map(|(p, _, _)| pos < p).unwrap_or(true) {
                        earliest = Some((pos, *name, *value));
                    }
                }
            }
            match earliest {
                Some((pos, name, value)) => {
                    out.push_str(&rest[..pos]);
                    out.push_str(value);
                    rest = &rest[pos + name.len() + 2..];
                }
                None => {
                    out.push_str(rest);
                    break 'outer;
                }
            }
        }
        out
    }

    fn render_mcq(&self, question: &str, displayed: &[String], masked_slot: Option<usize>) -> String {
        let choices_block = render_choices_block(displayed, masked_slot);
        self.render(&[("question", question), ("choices", &choices_block)])
    }

    fn render_qa(&self, context: &str, masked_question: &str) -> String {
        self.render(&[("context", context), ("question", masked_question)])
    }
}

/// Render the lettered options block, substituting the mask placeholder for
/// the masked slot's text.
pub fn render_choices_block(displayed: &[String], masked_slot: Option<usize>) -> String {
    let mut out = String::new();
    for (slot, text) in displayed.iter().enumerate() {
        let letter = (b'A' + slot as u8) as char;
        let shown = if masked_slot == Some(slot) { MASK_PLACEHOLDER } else { text };
        out.push_str(&format!("{letter}. {shown}"));
        if slot + 1 < displayed.len() {
            out.push('\n');
        }
    }
    out
}

fn check_choice_count(item: &McqItem) -> Result<(), PerturbError> {
    let k = item.choices.len();
    if k < 2 {
        return Err(PerturbError::TooFewChoices { id: item.id.clone(), k });
    }
    if k > MAX_CHOICES {
        return Err(PerturbError::TooManyChoices { id: item.id.clone(), k });
    }
    Ok(())
}

fn sample_item_permutation(
    k: usize,
    gold_index: usize,
    run_seed: u64,
    canonical_id: &str,
    language_salt: Option<&str>,
    sampling: PermutationSampling,
) -> Permutation {
    let mut rng = match language_salt {
        Some(lang) => keyed_stream(run_seed, &["permute-choices", canonical_id, lang]),
        None => keyed_stream(run_seed, &["permute-choices", canonical_id]),
    };
    loop {
        let perm = Permutation::sample(k, &mut rng);
        match sampling {
            PermutationSampling::Unrestricted => return perm,
            PermutationSampling::DisplaceGold => {
                if perm.slot_of(gold_index) != gold_index {
                    return perm;
                }
            }
        }
    }
}

fn view_from_permutation(
    item: &McqItem,
    perm: Permutation,
    run_seed: u64,
    template: &PromptTemplate,
) -> McqView {
    let displayed = perm.apply(&item.choices);
    let displayed_gold = perm.slot_of(item.gold_index);
    let prompt = template.render_mcq(&item.question, &displayed, None);
    McqView {
        canonical_id: item.id.clone(),
        language: item.language.clone(),
        question: item.question.clone(),
        permutation: perm,
        displayed_choices: displayed,
        displayed_gold_index: displayed_gold,
        original_gold_index: item.gold_index,
        masked_display_slot: None,
        mask_reference: None,
        prompt,
        seed_trace: SeedTrace { run_seed, instance_id: item.id.clone() },
    }
}

/// Permute an item's choices with a permutation drawn from the stream keyed
/// by `(run_seed, item id)`. Deterministic: the same key always yields the
/// same view.
pub fn permute_choices(
    item: &McqItem,
    run_seed: u64,
    sampling: PermutationSampling,
    template: &PromptTemplate,
) -> Result<McqView, PerturbError> {
    check_choice_count(item)?;
    let perm = sample_item_permutation(
        item.choices.len(),
        item.gold_index,
        run_seed,
        &item.id,
        None,
        sampling,
    );
    Ok(view_from_permutation(item, perm, run_seed, template))
}

/// Mask one displayed option chosen uniformly among the non-gold slots. The
/// removed text becomes the ROUGE-L reference and the prompt is re-rendered
/// with the placeholder.
pub fn mask_choice(
    view: &McqView,
    run_seed: u64,
    template: &PromptTemplate,
) -> Result<McqView, PerturbError> {
    if view.masked_display_slot.is_some() {
        return Err(PerturbError::AlreadyMasked { id: view.canonical_id.clone() });
    }
    let k = view.displayed_choices.len();
    if k < 2 {
        return Err(PerturbError::NoIncorrectOption { id: view.canonical_id.clone() });
    }
    let candidates: Vec<usize> = (0..k).filter(|&s| s != view.displayed_gold_index).collect();
    let mut rng = keyed_stream(run_seed, &["mask-choice", &view.canonical_id]);
    let slot = candidates[rng.gen_range(0..candidates.len())];
    let mut masked = view.clone();
    masked.masked_display_slot = Some(slot);
    masked.mask_reference = Some(view.displayed_choices[slot].clone());
    masked.prompt = template.render_mcq(&view.question, &view.displayed_choices, Some(slot));
    Ok(masked)
}

/// Candidate content-word spans of a question: tokens of length >= 3 chars
/// that are not stopwords for the item's language.
fn content_word_spans(question: &str, language: &str) -> Vec<(usize, usize)> {
    token_spans(question)
        .into_iter()
        .filter(|&(s, e)| {
            let token = &question[s..e];
            token.chars().count() >= 3 && !is_stopword(&token.to_lowercase(), language)
        })
        .collect()
}

/// Mask one "critical" question token and render the QA prompt. The context
/// is passed through byte-identical. Returns `NoMaskableToken` when every
/// token is a stopword or shorter than 3 characters; callers record that as
/// a skip, not a failure.
pub fn mask_question_token(
    item: &QaItem,
    strategy: MaskStrategy,
    run_seed: u64,
    corpus_frequency: Option<&HashMap<String, u64>>,
    template: &PromptTemplate,
) -> Result<QaView, PerturbError> {
    let candidates = content_word_spans(&item.question, &item.language);
    if candidates.is_empty() {
        return Err(PerturbError::NoMaskableToken { id: item.id.clone() });
    }
    let chosen = match strategy {
        MaskStrategy::LongestContentWord => {
            // strict > keeps the earliest candidate on ties
            let mut best = candidates[0];
            let mut best_len = item.question[best.0..best.1].chars().count();
            for &span in &candidates[1..] {
                let len = item.question[span.0..span.1].chars().count();
                if len > best_len {
                    best = span;
                    best_len = len;
                }
            }
            best
        }
        MaskStrategy::RarestByCorpusFrequency => {
            let freq = corpus_frequency.ok_or(PerturbError::MissingFrequencyTable)?;
            let mut best = candidates[0];
            let mut best_freq = *freq
                .get(&item.question[best.0..best.1].to_lowercase())
                .unwrap_or(&0);
            for &span in &candidates[1..] {
                let f = *freq
                    .get(&item.question[span.0..span.1].to_lowercase())
                    .unwrap_or(&0);
                if f < best_freq {
                    best = span;
                    best_freq = f;
                }
            }
            best
        }
    };
    let all_spans = token_spans(&item.question);
    let position = all_spans.iter().position(|&s| s == chosen).expect("candidate is a token");
    let surface = item.question[chosen.0..chosen.1].to_string();
    let mut masked_question = String::with_capacity(item.question.len());
    masked_question.push_str(&item.question[..chosen.0]);
    masked_question.push_str(MASK_PLACEHOLDER);
    masked_question.push_str(&item.question[chosen.1..]);
    let prompt = template.render_qa(&item.context, &masked_question);
    Ok(QaView {
        canonical_id: item.id.clone(),
        language: item.language.clone(),
        masked_surface: surface,
        masked_token_position: position,
        masked_question,
        context: item.context.clone(),
        prompt,
        seed_trace: SeedTrace { run_seed, instance_id: item.id.clone() },
    })
}

/// Build one plain-answer view per requested language for a parallel
/// instance. In `Shared` mode a single permutation (keyed by the instance id
/// alone) is applied in every language; in `PerLanguage` mode each language
/// draws independently.
pub fn build_tacd_views(
    instance: &ParallelInstance<McqItem>,
    languages: &[String],
    run_seed: u64,
    mode: PermutationMode,
    sampling: PermutationSampling,
    template: &PromptTemplate,
) -> Result<Vec<McqView>, PerturbError> {
    for language in languages {
        if !instance.views.contains_key(language) {
            return Err(PerturbError::MissingLanguageView {
                id: instance.canonical_id.clone(),
                language: language.clone(),
            });
        }
    }
    let mut views = Vec::with_capacity(languages.len());
    let mut shared: Option<Permutation> = None;
    for language in languages {
        let item = &instance.views[language];
        check_choice_count(item)?;
        let perm = match mode {
            PermutationMode::Shared => shared
                .get_or_insert_with(|| {
                    sample_item_permutation(
                        item.choices.len(),
                        item.gold_index,
                        run_seed,
                        &instance.canonical_id,
                        None,
                        sampling,
                    )
                })
                .clone(),
            PermutationMode::PerLanguage => sample_item_permutation(
                item.choices.len(),
                item.gold_index,
                run_seed,
                &instance.canonical_id,
                Some(language),
                sampling,
            ),
        };
        views.push(view_from_permutation(item, perm, run_seed, template));
    }
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn item(id: &str, gold: usize) -> McqItem {
        McqItem {
            id: id.into(),
            question: "Which gate faces the river?".into(),
            choices: vec![
                "north gate".into(),
                "south gate".into(),
                "east gate".into(),
                "west gate".into(),
            ],
            gold_index: gold,
            subject: None,
            language: "en".into(),
        }
    }

    #[test]
    fn identity_permutation_preserves_order() {
        let it = item("a", 3);
        let perm = Permutation::identity(4);
        let view = view_from_permutation(&it, perm, 0, &PromptTemplate::tacd_mcq_default());
        assert_eq!(view.displayed_choices, it.choices);
        assert_eq!(view.displayed_gold_index, view.original_gold_index);
    }

    #[test]
    fn hand_applied_permutation() {
        // choices [w,x,y,z], gold 3, mapping [2,0,3,1]:
        // displayed[2]=w, displayed[0]=x, displayed[3]=y, displayed[1]=z
        // => displayed = [x,z,w,y], gold slot = mapping[3] = 1
        let mut it = item("a", 3);
        it.choices = vec!["w".into(), "x".into(), "y".into(), "z".into()];
        let perm = Permutation::from_mapping(vec![2, 0, 3, 1]).unwrap();
        let view = view_from_permutation(&it, perm, 0, &PromptTemplate::tacd_mcq_default());
        assert_eq!(view.displayed_choices, vec!["x", "z", "w", "y"]);
        assert_eq!(view.displayed_gold_index, 1);
        assert_eq!(view.original_gold_index, 3);
    }

    #[test]
    fn displayed_slot_of_each_original_matches_mapping() {
        let it = item("a", 1);
        let tpl = PromptTemplate::tacd_mcq_default();
        let view = permute_choices(&it, 42, PermutationSampling::Unrestricted, &tpl).unwrap();
        for (original, choice) in it.choices.iter().enumerate() {
            assert_eq!(&view.displayed_choices[view.permutation.slot_of(original)], choice);
        }
    }

    #[test]
    fn permute_is_deterministic_per_key() {
        let it = item("a", 2);
        let tpl = PromptTemplate::tacd_mcq_default();
        let v1 = permute_choices(&it, 7, PermutationSampling::Unrestricted, &tpl).unwrap();
        let v2 = permute_choices(&it, 7, PermutationSampling::Unrestricted, &tpl).unwrap();
        assert_eq!(v1, v2);
        let v3 = permute_choices(&it, 8, PermutationSampling::Unrestricted, &tpl).unwrap();
        // different seed almost surely differs; compare mappings not views
        assert!(v1.permutation != v3.permutation || v1.prompt == v3.prompt);
    }

    #[test]
    fn permute_rejects_k_below_two() {
        let mut it = item("a", 0);
        it.choices = vec!["only".into()];
        let err = permute_choices(
            &it,
            0,
            PermutationSampling::Unrestricted,
            &PromptTemplate::tacd_mcq_default(),
        )
        .unwrap_err();
        assert!(matches!(err, PerturbError::TooFewChoices { .. }));
    }

    #[test]
    fn displace_gold_never_fixes_gold() {
        let tpl = PromptTemplate::tacd_mcq_default();
        for i in 0..200 {
            let it = item(&format!("item-{i}"), i % 4);
            let view = permute_choices(&it, 11, PermutationSampling::DisplaceGold, &tpl).unwrap();
            assert_ne!(view.displayed_gold_index, view.original_gold_index);
        }
    }

    #[test]
    fn permutation_uniformity_k4() {
        // 24,000 draws over distinct instance keys: each of the 24
        // permutations should land within 1/24 +/- 0.01.
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        let draws = 24_000u64;
        for i in 0..draws {
            let mut rng = keyed_stream(5, &["permute-choices", &format!("u{i}")]);
            let perm = Permutation::sample(4, &mut rng);
            *counts.entry(perm.mapping().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        for (mapping, count) in counts {
            let freq = count as f64 / draws as f64;
            assert!(
                (freq - 1.0 / 24.0).abs() <= 0.01,
                "mapping {mapping:?} frequency {freq}"
            );
        }
    }

    #[test]
    fn permutation_composes_with_inverse_to_identity() {
        for i in 0..50 {
            let mut rng = keyed_stream(3, &["inv", &i.to_string()]);
            let perm = Permutation::sample(5, &mut rng);
            let inv = perm.inverse();
            for original in 0..5 {
                assert_eq!(inv.slot_of(perm.slot_of(original)), original);
            }
        }
    }

    #[test]
    fn mask_choice_never_masks_gold_and_is_uniform() {
        let tpl = PromptTemplate::ts_mcq_default();
        let mut counts = [0u64; 4];
        let draws = 3000;
        for i in 0..draws {
            let mut it = item(&format!("m{i}"), 0);
            it.gold_index = 2;
            let view = view_from_permutation(&it, Permutation::identity(4), i as u64, &tpl);
            let masked = mask_choice(&view, i as u64, &tpl).unwrap();
            let slot = masked.masked_display_slot.unwrap();
            assert_ne!(slot, masked.displayed_gold_index);
            counts[slot] += 1;
        }
        assert_eq!(counts[2], 0);
        for slot in [0usize, 1, 3] {
            let freq = counts[slot] as f64 / draws as f64;
            assert!((freq - 1.0 / 3.0).abs() <= 0.03, "slot {slot} frequency {freq}");
        }
    }

    #[test]
    fn mask_choice_k2_is_forced() {
        let mut it = item("a", 0);
        it.choices = vec!["gold text".into(), "other text".into()];
        let tpl = PromptTemplate::ts_mcq_default();
        let view = view_from_permutation(&it, Permutation::identity(2), 1, &tpl);
        let masked = mask_choice(&view, 1, &tpl).unwrap();
        assert_eq!(masked.masked_display_slot, Some(1));
        assert_eq!(masked.mask_reference.as_deref(), Some("other text"));
    }

    #[test]
    fn mask_replaces_exactly_one_span() {
        let tpl = PromptTemplate::ts_mcq_default();
        let it = item("a", 1);
        let view = permute_choices(&it, 9, PermutationSampling::Unrestricted, &tpl).unwrap();
        let masked = mask_choice(&view, 9, &tpl).unwrap();
        // byte-level diff: everything outside one contiguous replaced span
        // is untouched
        let before = view.prompt.as_bytes();
        let after = masked.prompt.as_bytes();
        let prefix = before
            .iter()
            .zip(after.iter())
            .take_while(|(a, b)| a == b)
            .count();
        let suffix = before[prefix..]
            .iter()
            .rev()
            .zip(after[prefix..].iter().rev())
            .take_while(|(a, b)| a == b)
            .count();
        let removed = &view.prompt[prefix..view.prompt.len() - suffix];
        let inserted = &masked.prompt[prefix..masked.prompt.len() - suffix];
        let reference = view.mask_reference.clone();
        let masked_text = masked.mask_reference.clone().unwrap();
        assert!(reference.is_none());
        assert!(masked_text.contains(removed) || removed.contains(&masked_text));
        assert!(MASK_PLACEHOLDER.contains(inserted) || inserted.contains(MASK_PLACEHOLDER));
        assert_eq!(masked.prompt.matches(MASK_PLACEHOLDER).count(), 1);
    }

    #[test]
    fn double_masking_is_rejected() {
        let tpl = PromptTemplate::ts_mcq_default();
        let it = item("a", 1);
        let view = permute_choices(&it, 9, PermutationSampling::Unrestricted, &tpl).unwrap();
        let masked = mask_choice(&view, 9, &tpl).unwrap();
        assert!(matches!(
            mask_choice(&masked, 9, &tpl),
            Err(PerturbError::AlreadyMasked { .. })
        ));
    }

    fn qa(id: &str, question: &str) -> QaItem {
        QaItem {
            id: id.into(),
            context: "The river gate was rebuilt in 1874 by the harbor guild.".into(),
            question: question.into(),
            answer_text: "1874".into(),
            answer_char_start: None,
            language: "en".into(),
        }
    }

    #[test]
    fn masks_longest_content_word() {
        let it = qa("q1", "What is the capital of France?");
        let view = mask_question_token(
            &it,
            MaskStrategy::LongestContentWord,
            0,
            None,
            &PromptTemplate::ts_qa_default(),
        )
        .unwrap();
        assert_eq!(view.masked_surface, "capital");
        assert_eq!(view.masked_question, "What is the [MASK] of France?");
        assert_eq!(view.context, it.context, "context must stay byte-identical");
        assert_eq!(view.prompt.matches(MASK_PLACEHOLDER).count(), 1);
    }

    #[test]
    fn stopword_only_question_is_skipped() {
        let it = qa("q2", "Who won?");
        let err = mask_question_token(
            &it,
            MaskStrategy::LongestContentWord,
            0,
            None,
            &PromptTemplate::ts_qa_default(),
        )
        .unwrap_err();
        assert!(matches!(err, PerturbError::NoMaskableToken { .. }));
    }

    #[test]
    fn longest_tie_breaks_to_earliest() {
        let it = qa("q3", "red door blue door");
        let view = mask_question_token(
            &it,
            MaskStrategy::LongestContentWord,
            0,
            None,
            &PromptTemplate::ts_qa_default(),
        )
        .unwrap();
        assert_eq!(view.masked_surface, "door");
        assert_eq!(view.masked_question, "red [MASK] blue door");
        assert_eq!(view.masked_token_position, 1);
    }

    #[test]
    fn rarest_strategy_uses_frequency_table() {
        let it = qa("q4", "Which guild rebuilt the gate?");
        let mut freq = HashMap::new();
        freq.insert("guild".to_string(), 40u64);
        freq.insert("rebuilt".to_string(), 2);
        freq.insert("gate".to_string(), 90);
        let view = mask_question_token(
            &it,
            MaskStrategy::RarestByCorpusFrequency,
            0,
            Some(&freq),
            &PromptTemplate::ts_qa_default(),
        )
        .unwrap();
        assert_eq!(view.masked_surface, "rebuilt");
        assert!(matches!(
            mask_question_token(&it, MaskStrategy::RarestByCorpusFrequency, 0, None, &PromptTemplate::ts_qa_default()),
            Err(PerturbError::MissingFrequencyTable)
        ));
    }

    fn parallel(id: &str) -> ParallelInstance<McqItem> {
        let mut views = BTreeMap::new();
        for lang in ["en", "ar", "fr"] {
            let mut it = item(id, 2);
            it.language = lang.into();
            it.question = format!("[{lang}] {}", it.question);
            it.choices = it.choices.iter().map(|c| format!("{lang} {c}")).collect();
            views.insert(lang.to_string(), it);
        }
        ParallelInstance { canonical_id: id.into(), views }
    }

    #[test]
    fn tacd_single_language_yields_one_view() {
        let inst = parallel("t1");
        let views = build_tacd_views(
            &inst,
            &["en".to_string()],
            3,
            PermutationMode::Shared,
            PermutationSampling::Unrestricted,
            &PromptTemplate::tacd_mcq_default(),
        )
        .unwrap();
        assert_eq!(views.len(), 1);
    }

    #[test]
    fn shared_mode_reuses_one_permutation() {
        let inst = parallel("t2");
        let langs: Vec<String> = ["en", "ar", "fr"].iter().map(|s| s.to_string()).collect();
        let views = build_tacd_views(
            &inst,
            &langs,
            3,
            PermutationMode::Shared,
            PermutationSampling::Unrestricted,
            &PromptTemplate::tacd_mcq_default(),
        )
        .unwrap();
        assert_eq!(views.len(), 3);
        assert!(views.windows(2).all(|w| w[0].permutation == w[1].permutation));
    }

    #[test]
    fn per_language_mode_is_reproducible_but_independent() {
        let inst = parallel("t3");
        let langs: Vec<String> = ["en", "ar", "fr"].iter().map(|s| s.to_string()).collect();
        let run = |seed| {
            build_tacd_views(
                &inst,
                &langs,
                seed,
                PermutationMode::PerLanguage,
                PermutationSampling::Unrestricted,
                &PromptTemplate::tacd_mcq_default(),
            )
            .unwrap()
        };
        let a = run(3);
        let b = run(3);
        assert_eq!(a, b, "same seed reruns identically");
        // with K=4 and three languages, identical permutations in all three
        // languages over many instances would be vanishingly unlikely; check a
        // few instances until a difference shows up
        let mut any_diff = false;
        for i in 0..20 {
            let inst = parallel(&format!("t3-{i}"));
            let views = build_tacd_views(
                &inst,
                &langs,
                3,
                PermutationMode::PerLanguage,
                PermutationSampling::Unrestricted,
                &PromptTemplate::tacd_mcq_default(),
            )
            .unwrap();
            if views.windows(2).any(|w| w[0].permutation != w[1].permutation) {
                any_diff = true;
                break;
            }
        }
        assert!(any_diff, "per-language permutations should generally differ");
    }

    #[test]
    fn missing_language_view_is_an_error() {
        let inst = parallel("t4");
        let err = build_tacd_views(
            &inst,
            &["en".to_string(), "de".to_string()],
            3,
            PermutationMode::Shared,
            PermutationSampling::Unrestricted,
            &PromptTemplate::tacd_mcq_default(),
        )
        .unwrap_err();
        assert!(matches!(err, PerturbError::MissingLanguageView { .. }));
    }

    #[test]
    fn template_hash_is_stable_and_placeholders_enforced() {
        let a = PromptTemplate::ts_mcq_default();
        let b = PromptTemplate::ts_mcq_default();
        assert_eq!(a.hash_hex(), b.hash_hex());
        assert!(PromptTemplate::new_mcq("no placeholders here").is_err());
        assert!(PromptTemplate::new_qa("{context} only").is_err());
    }

    #[test]
    fn braces_in_dataset_text_do_not_corrupt_prompts() {
        let tpl = PromptTemplate::new_mcq("Q: {question}\n{choices}\n").unwrap();
        let mut it = item("a", 0);
        it.question = "Does {choices} literal survive?".into();
        let view = view_from_permutation(&it, Permutation::identity(4), 0, &tpl);
        assert!(view.prompt.starts_with("Q: Does {choices} literal survive?\n"));
        assert!(view.prompt.contains("A. north gate"));
    }
}
