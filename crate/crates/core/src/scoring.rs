//! Canonical text serialization for likelihood scoring.
//!
//! The exact strings handed to `score` are part of the audit contract:
//! reports record the format version, and changing the serialization is a
//! version bump, not a silent edit.

use crate::corpus::{McqItem, QaItem};

/// Version tag recorded in every Min-K report.
pub const SCORING_FORMAT_VERSION: &str = "mink-serialization/v1";

/// MCQ scoring text: question, lettered options, then the gold answer line.
pub fn mcq_scoring_text(item: &McqItem) -> String {
    let mut out = String::new();
    out.push_str(&item.question);
    out.push('\n');
    for (i, choice) in item.choices.iter().enumerate() {
        let letter = (b'A' + i as u8) as char;
        out.push_str(&format!("{letter}. {choice}\n"));
    }
    let gold_letter = (b'A' + item.gold_index as u8) as char;
    out.push_str(&format!("Answer: {gold_letter}. {}", item.choices[item.gold_index]));
    out
}

/// QA scoring text: question then the answer line.
pub fn qa_scoring_text(item: &QaItem) -> String {
    format!("{}\nAnswer: {}", item.question, item.answer_text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mcq_serialization_is_fixed() {
        let item = McqItem {
            id: "x".into(),
            question: "Which way is north?".into(),
            choices: vec!["up".into(), "down".into()],
            gold_index: 0,
            subject: None,
            language: "en".into(),
        };
        assert_eq!(
            mcq_scoring_text(&item),
            "Which way is north?\nA. up\nB. down\nAnswer: A. up"
        );
    }

    #[test]
    fn qa_serialization_is_fixed() {
        let item = QaItem {
            id: "x".into(),
            context: "ctx".into(),
            question: "When?".into(),
            answer_text: "1874".into(),
            answer_char_start: None,
            language: "en".into(),
        };
        assert_eq!(qa_scoring_text(&item), "When?\nAnswer: 1874");
    }
}
