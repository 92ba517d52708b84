//! Synthetic aligned corpora for offline verification, demos, and tests.
//!
//! Generation is a pure function of the spec: same seed, same corpus. Items
//! carry distinctive multi-word texts per language so prompt parsing, ROUGE
//! scoring, and masking all behave as they would on real data.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{McqItem, ParallelInstance, QaItem};
use crate::rng::keyed_stream;

/// Shape of a synthetic parallel MCQ corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthMcqSpec {
    pub n_items: usize,
    pub choices_per_item: usize,
    pub languages: Vec<String>,
    pub seed: u64,
}

impl Default for SynthMcqSpec {
    fn default() -> Self {
        SynthMcqSpec {
            n_items: 200,
            choices_per_item: 4,
            languages: vec!["en".into(), "ar".into(), "fr".into()],
            seed: 0,
        }
    }
}

const EN_TOPICS: &[&str] = &[
    "harbor", "granite", "lantern", "meridian", "orchard", "turbine", "glacier", "archive",
    "compass", "aqueduct", "foundry", "observatory", "monsoon", "basalt", "caravan", "estuary",
];

const AR_TOPICS: &[&str] = &[
    "الميناء", "الجرانيت", "الفانوس", "البستان", "التوربين", "الأرشيف", "البوصلة", "القناة",
    "المسبك", "المرصد", "القافلة", "المصب",
];

const FR_TOPICS: &[&str] = &[
    "phare", "granit", "lanterne", "verger", "turbine", "glacier", "archive", "boussole",
    "aqueduc", "fonderie", "observatoire", "mousson", "basalte", "caravane", "estuaire",
];

fn topics_for(language: &str) -> &'static [&'static str] {
    match language.split('-').next().unwrap_or(language) {
        "ar" => AR_TOPICS,
        "fr" => FR_TOPICS,
        _ => EN_TOPICS,
    }
}

fn question_for(language: &str, id: &str, topic_a: &str, topic_b: &str) -> String {
    match language.split('-').next().unwrap_or(language) {
        "ar" => format!("أي خيار يطابق السجل {id} بخصوص {topic_a} و{topic_b}؟"),
        "fr" => format!("Quel choix correspond au registre {id} concernant {topic_a} et {topic_b} ?"),
        _ => format!("Which choice matches record {id} regarding the {topic_a} and the {topic_b}?"),
    }
}

fn choice_for(language: &str, id_num: usize, choice_idx: usize, topic: &str) -> String {
    match language.split('-').next().unwrap_or(language) {
        "ar" => format!("إجابة {topic} رقم {id_num} خيار {choice_idx}"),
        "fr" => format!("réponse {topic} numéro {id_num} option {choice_idx}"),
        _ => format!("{topic} answer {id_num} variant {choice_idx}"),
    }
}

/// Generate aligned per-language MCQ datasets. Gold indices are uniform by a
/// per-item stream and identical across languages; choice texts are unique
/// within each item.
pub fn synth_parallel_mcq(spec: &SynthMcqSpec) -> BTreeMap<String, Vec<McqItem>> {
    assert!(spec.choices_per_item >= 2 && spec.choices_per_item <= 26);
    let mut datasets: BTreeMap<String, Vec<McqItem>> = BTreeMap::new();
    for language in &spec.languages {
        datasets.insert(language.clone(), Vec::with_capacity(spec.n_items));
    }
    for index in 0..spec.n_items {
        let id = format!("item-{index:05}");
        let gold = keyed_stream(spec.seed, &["synth-gold", &id]).gen_range(0..spec.choices_per_item);
        for language in &spec.languages {
            let topics = topics_for(language);
            let mut rng = keyed_stream(spec.seed, &["synth-text", &id, language]);
            let topic_a = topics[rng.gen_range(0..topics.len())];
            let topic_b = topics[rng.gen_range(0..topics.len())];
            let choices = (0..spec.choices_per_item)
                .map(|c| {
                    let topic = topics[(rng.gen_range(0..topics.len()) + c) % topics.len()];
                    choice_for(language, index, c, topic)
                })
                .collect();
            datasets.get_mut(language).expect("inserted above").push(McqItem {
                id: id.clone(),
                question: question_for(language, &id, topic_a, topic_b),
                choices,
                gold_index: gold,
                subject: None,
                language: language.clone(),
            });
        }
    }
    datasets
}

/// Aligned parallel instances straight from a synthetic spec.
pub fn synth_parallel_instances(spec: &SynthMcqSpec) -> Vec<ParallelInstance<McqItem>> {
    let datasets = synth_parallel_mcq(spec);
    crate::corpus::align_parallel_mcq(&datasets)
        .expect("synthetic corpora are aligned by construction")
        .instances
}

const CONTEXT_SUBJECTS: &[&str] = &[
    "northern facility", "river gate", "signal tower", "salt warehouse", "survey office",
    "eastern terrace", "pump station", "customs hall",
];

const CONTEXT_OBJECTS: &[&str] = &[
    "copper fittings", "grain ledgers", "survey charts", "tide tables", "brass instruments",
    "timber samples", "quarry reports", "signal flags",
];

/// Generate a single-language synthetic QA dataset. Every question contains
/// maskable content words, and each answer appears verbatim in its context.
pub fn synth_qa_items(n_items: usize, language: &str, seed: u64) -> Vec<QaItem> {
    (0..n_items)
        .map(|index| {
            let id = format!("qa-{index:05}");
            let mut rng = keyed_stream(seed, &["synth-qa", &id]);
            let subject = CONTEXT_SUBJECTS[rng.gen_range(0..CONTEXT_SUBJECTS.len())];
            let object = CONTEXT_OBJECTS[rng.gen_range(0..CONTEXT_OBJECTS.len())];
            let year = 1820 + rng.gen_range(0..80);
            let context = format!(
                "The {subject} was commissioned in {year}. Inventory {index} notes that the {subject} stores {object} behind the main doors."
            );
            let answer_text = object.to_string();
            let answer_char_start = context.find(&answer_text);
            QaItem {
                id,
                context,
                question: format!("What does the {subject} store behind the main doors?"),
                answer_text,
                answer_char_start,
                language: language.to_string(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{validate_mcq_item, validate_qa_item};

    #[test]
    fn synth_mcq_is_deterministic_and_valid() {
        let spec = SynthMcqSpec { n_items: 20, ..SynthMcqSpec::default() };
        let a = synth_parallel_mcq(&spec);
        let b = synth_parallel_mcq(&spec);
        assert_eq!(a, b);
        for items in a.values() {
            for item in items {
                validate_mcq_item(item).unwrap();
                let mut texts = item.choices.clone();
                texts.sort();
                texts.dedup();
                assert_eq!(texts.len(), item.choices.len(), "choices must be unique");
            }
        }
    }

    #[test]
    fn synth_mcq_gold_agrees_across_languages() {
        let spec = SynthMcqSpec { n_items: 30, ..SynthMcqSpec::default() };
        let instances = synth_parallel_instances(&spec);
        assert_eq!(instances.len(), 30);
        for instance in instances {
            let golds: Vec<usize> = instance.views.values().map(|v| v.gold_index).collect();
            assert!(golds.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn synth_gold_is_roughly_uniform() {
        let spec = SynthMcqSpec { n_items: 2000, languages: vec!["en".into()], ..SynthMcqSpec::default() };
        let datasets = synth_parallel_mcq(&spec);
        let mut counts = [0usize; 4];
        for item in &datasets["en"] {
            counts[item.gold_index] += 1;
        }
        for count in counts {
            let freq = count as f64 / 2000.0;
            assert!((freq - 0.25).abs() < 0.05, "gold index frequency {freq}");
        }
    }

    #[test]
    fn synth_qa_valid_and_answer_located() {
        let items = synth_qa_items(25, "en", 3);
        for item in &items {
            validate_qa_item(item).unwrap();
            assert!(item.answer_char_start.is_some());
        }
    }
}
