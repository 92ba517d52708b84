//! Browser demo for the contamination audit toolkit.
//!
//! Three interactive operations, all running entirely in the page against
//! the deterministic in-process mock model (no network, no endpoints):
//!
//! - [`tacd_sweep`]: IDR/CLC curves over a contamination sweep
//! - [`mink_explorer`]: member/non-member Min-K score distributions and AUROC
//! - [`perturb_preview`]: how one item is shuffled, masked, and rendered
//!
//! Each function takes and returns JSON strings so the page stays a single
//! static file with no framework.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use benchaudit_core::corpus::{select_contaminated_subset, McqItem};
use benchaudit_core::metrics::{auroc, min_k_pp_score};
use benchaudit_core::mock::{LogprobProfile, MockConfig, MockModel};
use benchaudit_core::perturb::{
    mask_choice, permute_choices, PermutationSampling, PromptTemplate,
};
use benchaudit_core::probes::{run_tacd, ProbeConfig, ProbeKind};
use benchaudit_core::scoring::mcq_scoring_text;
use benchaudit_core::synth::{synth_parallel_instances, synth_parallel_mcq, SynthMcqSpec};

fn err_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

#[derive(Debug, Deserialize)]
struct SweepRequest {
    #[serde(default = "default_n_items")]
    n_items: usize,
    #[serde(default)]
    seed: u64,
    alpha: f64,
    beta: f64,
    base_accuracy: f64,
    #[serde(default)]
    collapse_letter: Option<usize>,
    #[serde(default = "default_p_list")]
    p_list: Vec<u32>,
}

fn default_n_items() -> usize {
    300
}

fn default_p_list() -> Vec<u32> {
    vec![0, 10, 25, 50, 75, 100]
}

#[derive(Debug, Serialize)]
struct SweepPoint {
    p: u32,
    idr: f64,
    clc: f64,
    accuracy: f64,
    idr_baseline: f64,
    clc_baseline: f64,
    collapse_flags: BTreeMap<String, bool>,
    letter_histograms: BTreeMap<String, BTreeMap<String, u64>>,
}

/// Run a TACD contamination sweep against the mock model and return one
/// point per contamination level.
#[wasm_bindgen]
pub fn tacd_sweep(request_json: &str) -> String {
    let request: SweepRequest = match serde_json::from_str(request_json) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let n = request.n_items.clamp(10, 2000);
    let spec = SynthMcqSpec { n_items: n, seed: request.seed, ..SynthMcqSpec::default() };
    let datasets = synth_parallel_mcq(&spec);
    let instances = synth_parallel_instances(&spec);
    let ids: Vec<String> = instances.iter().map(|i| i.canonical_id.clone()).collect();
    let template = PromptTemplate::tacd_mcq_default();

    let mut points = Vec::new();
    for &p in &request.p_list {
        let condition = match select_contaminated_subset(&ids, p, request.seed) {
            Ok(c) => c,
            Err(e) => return err_json(e),
        };
        let config = MockConfig {
            contamination_p: p,
            memorized_ids: condition.selected_ids,
            index_memory_strength: request.alpha,
            crosslingual_invariance: request.beta,
            collapse_letter: request.collapse_letter,
            base_accuracy: request.base_accuracy,
            seed: request.seed,
            ..MockConfig::default()
        };
        let mut model = match MockModel::new(config) {
            Ok(m) => m,
            Err(e) => return err_json(e),
        };
        for items in datasets.values() {
            if let Err(e) = model.add_mcq_items(items) {
                return err_json(e);
            }
        }
        let probe_config = ProbeConfig {
            kind: ProbeKind::Tacd,
            run_seed: request.seed,
            condition_p: p,
            ..ProbeConfig::default()
        };
        match run_tacd(&instances, &model, &probe_config, &template) {
            Ok(run) => points.push(SweepPoint {
                p,
                idr: run.aggregate.idr,
                clc: run.aggregate.clc,
                accuracy: run.aggregate.accuracy,
                idr_baseline: run.aggregate.idr_baseline,
                clc_baseline: run.aggregate.clc_baseline,
                collapse_flags: run.aggregate.collapse_flags,
                letter_histograms: run.aggregate.letter_histograms,
            }),
            Err(e) => return err_json(e),
        }
    }
    serde_json::json!({ "points": points }).to_string()
}

#[derive(Debug, Deserialize)]
struct MinkRequest {
    #[serde(default = "default_mink_n")]
    n_texts: usize,
    #[serde(default)]
    seed: u64,
    p: u32,
    #[serde(default = "default_k_percent")]
    k_percent: f64,
    member_mean: f64,
    member_std: f64,
    nonmember_mean: f64,
    nonmember_std: f64,
}

fn default_mink_n() -> usize {
    400
}

fn default_k_percent() -> f64 {
    20.0
}

/// Score a synthetic corpus under the mock's member/non-member profiles and
/// return the two Min-K score lists plus their AUROC.
#[wasm_bindgen]
pub fn mink_explorer(request_json: &str) -> String {
    let request: MinkRequest = match serde_json::from_str(request_json) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let n = request.n_texts.clamp(20, 2000);
    let spec = SynthMcqSpec {
        n_items: n,
        languages: vec!["en".into()],
        seed: request.seed,
        ..SynthMcqSpec::default()
    };
    let items: Vec<McqItem> = synth_parallel_mcq(&spec).remove("en").expect("en generated");
    let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
    let condition = match select_contaminated_subset(&ids, request.p, request.seed) {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    let profile = LogprobProfile {
        member_mean: request.member_mean,
        member_std: request.member_std,
        nonmember_mean: request.nonmember_mean,
        nonmember_std: request.nonmember_std,
    };
    let config = MockConfig {
        contamination_p: request.p,
        memorized_ids: condition.selected_ids.clone(),
        logprob_profile: profile,
        seed: request.seed,
        ..MockConfig::default()
    };
    let mut model = match MockModel::new(config) {
        Ok(m) => m,
        Err(e) => return err_json(e),
    };
    if let Err(e) = model.add_mcq_items(&items) {
        return err_json(e);
    }

    let mut member_scores = Vec::new();
    let mut nonmember_scores = Vec::new();
    for item in &items {
        let tokens = match model.score_text(&mcq_scoring_text(item)) {
            Ok(t) => t,
            Err(e) => return err_json(e),
        };
        let score = match min_k_pp_score(&tokens, request.k_percent) {
            Ok(s) => s,
            Err(e) => return err_json(e),
        };
        if condition.selected_ids.contains(&item.id) {
            member_scores.push(score);
        } else {
            nonmember_scores.push(score);
        }
    }
    let auroc_value = if member_scores.is_empty() || nonmember_scores.is_empty() {
        None
    } else {
        auroc(&member_scores, &nonmember_scores).ok()
    };
    serde_json::json!({
        "auroc": auroc_value,
        "member_scores": member_scores,
        "nonmember_scores": nonmember_scores,
    })
    .to_string()
}

#[derive(Debug, Deserialize)]
struct PreviewRequest {
    question: String,
    choices: Vec<String>,
    gold_index: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    displace_gold: bool,
}

/// Show how one MCQ item turns into a TS-Guessing view: the sampled
/// permutation, the displayed order, the masked slot, and the final prompt.
#[wasm_bindgen]
pub fn perturb_preview(request_json: &str) -> String {
    let request: PreviewRequest = match serde_json::from_str(request_json) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    let item = McqItem {
        id: "preview".into(),
        question: request.question,
        choices: request.choices,
        gold_index: request.gold_index,
        subject: None,
        language: "en".into(),
    };
    if let Err((field, message)) = benchaudit_core::corpus::validate_mcq_item(&item) {
        return err_json(format!("{field}: {message}"));
    }
    let sampling = if request.displace_gold {
        PermutationSampling::DisplaceGold
    } else {
        PermutationSampling::Unrestricted
    };
    let template = PromptTemplate::ts_mcq_default();
    let view = match permute_choices(&item, request.seed, sampling, &template) {
        Ok(v) => v,
        Err(e) => return err_json(e),
    };
    let masked = match mask_choice(&view, request.seed, &template) {
        Ok(v) => v,
        Err(e) => return err_json(e),
    };
    serde_json::json!({
        "permutation": masked.permutation.mapping(),
        "displayed_choices": masked.displayed_choices,
        "displayed_gold_index": masked.displayed_gold_index,
        "original_gold_index": masked.original_gold_index,
        "masked_display_slot": masked.masked_display_slot,
        "mask_reference": masked.mask_reference,
        "prompt": masked.prompt,
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_points_track_beta() {
        let out = tacd_sweep(
            r#"{"n_items":80,"seed":3,"alpha":0.0,"beta":1.0,"base_accuracy":0.0,"p_list":[0,100]}"#,
        );
        let value: serde_json::Value = serde_json::from_str(&out).unwrap();
        let points = value["points"].as_array().unwrap();
        assert_eq!(points.len(), 2);
        let clc0 = points[0]["clc"].as_f64().unwrap();
        let clc100 = points[1]["clc"].as_f64().unwrap();
        assert!(clc100 > clc0, "full invariance must raise CLC: {clc0} -> {clc100}");
        assert_eq!(clc100, 1.0);
    }

    #[test]
    fn mink_explorer_separates_at_full_contamination() {
        let out = mink_explorer(
            r#"{"n_texts":120,"seed":3,"p":50,"k_percent":20.0,
                "member_mean":-0.5,"member_std":0.2,"nonmember_mean":-2.5,"nonmember_std":0.8}"#,
        );
        let value: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(value["auroc"].as_f64().unwrap() > 0.9);
        assert_eq!(
            value["member_scores"].as_array().unwrap().len()
                + value["nonmember_scores"].as_array().unwrap().len(),
            120
        );
    }

    #[test]
    fn preview_masks_a_non_gold_slot() {
        let out = perturb_preview(
            r#"{"question":"Which gate faces the river?",
                "choices":["north gate","south gate","east gate","west gate"],
                "gold_index":2,"seed":9}"#,
        );
        let value: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(value.get("error").is_none(), "{out}");
        let masked = value["masked_display_slot"].as_u64().unwrap();
        let gold = value["displayed_gold_index"].as_u64().unwrap();
        assert_ne!(masked, gold);
        assert_eq!(value["prompt"].as_str().unwrap().matches("[MASK]").count(), 1);
    }

    #[test]
    fn bad_input_returns_error_json() {
        let out = perturb_preview(r#"{"question":"q","choices":["only one"],"gold_index":0}"#);
        let value: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(value.get("error").is_some());
    }
}
