//! Pure metric kernels: ROUGE-L F1, exact match, index recall rate (IDR),
//! cross-lingual consistency (CLC) and its independence baseline, Min-K%,
//! Min-K%++, and AUROC.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{ParsedAnswer, WireToken};
use crate::text::{normalize_for_exact_match, tokenize_lower};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty metric cell: no usable records")]
    EmptyCell,
    #[error("empty score side: {side}")]
    EmptySide { side: &'static str },
    #[error("empty token sequence: nothing to score")]
    EmptySequence,
    #[error("k percent {k} outside (0, 100]")]
    KOutOfRange { k: f64 },
    #[error("token {position}: distribution std is zero")]
    ZeroStd { position: usize },
    #[error("token {position}: distribution moments missing")]
    MissingMoments { position: usize },
    #[error("invalid baseline parameters: K={k}, L={l}")]
    InvalidBaselineParams { k: usize, l: usize },
}

/// One scored prediction for one (instance, language, probe) cell.
///
/// `idr_hit` compares the predicted display letter against the original
/// pre-shuffle gold index; `accuracy_hit` compares the predicted underlying
/// choice (via the inverse permutation) against the gold choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub canonical_id: String,
    pub language: String,
    pub condition_p: u32,
    pub probe: String,
    pub predicted: ParsedAnswer,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_display_slot: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_canonical_choice: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idr_hit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_hit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em_hit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_k: Option<f64>,
    /// Which AUROC side this record belongs to ("benchmark" or "heldout").
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cohort: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

impl ProbeRecord {
    pub fn is_usable(&self) -> bool {
        self.skip_reason.is_none()
    }
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // rolling single-row DP
    let mut row = vec![0usize; b.len() + 1];
    for item_a in a {
        let mut diag = 0;
        for (j, item_b) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if item_a == item_b {
                diag + 1
            } else {
                up.max(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F1 over tokenized texts: `P = LCS/|pred|`, `R = LCS/|ref|`,
/// `F1 = 2PR/(P+R)`. Returns 0 when either side is empty or the LCS is empty.
pub fn rouge_l_f1(prediction: &str, reference: &str) -> f64 {
    let pred = tokenize_lower(prediction);
    let refr = tokenize_lower(reference);
    if pred.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&pred, &refr);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / pred.len() as f64;
    let r = lcs as f64 / refr.len() as f64;
    2.0 * p * r / (p + r)
}

/// Normalized string equality (see [`normalize_for_exact_match`]).
pub fn exact_match(prediction: &str, reference: &str) -> bool {
    normalize_for_exact_match(prediction) == normalize_for_exact_match(reference)
}

/// Fraction of usable records whose predicted display letter equals the
/// original pre-shuffle gold index. Unparseable predictions count as
/// non-hits; skipped records are excluded from the denominator.
pub fn index_recall_rate(records: &[ProbeRecord]) -> Result<f64, MetricsError> {
    let usable: Vec<&ProbeRecord> = records.iter().filter(|r| r.is_usable()).collect();
    if usable.is_empty() {
        return Err(MetricsError::EmptyCell);
    }
    let hits = usable.iter().filter(|r| r.idr_hit == Some(true)).count();
    Ok(hits as f64 / usable.len() as f64)
}

/// Outcome of a cross-lingual consistency computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClcOutcome {
    pub clc: f64,
    /// Groups with a record for every requested language.
    pub groups_counted: usize,
    /// Groups missing at least one language, excluded from the rate.
    pub groups_incomplete: usize,
}

/// Fraction of instances whose predictions are identical across all language
/// views. The comparison key is the predicted underlying choice
/// (`predicted_canonical_choice`), so under a shared permutation letter
/// equality and content equality coincide. Any unparseable member makes its
/// group inconsistent; groups missing a language are excluded and counted.
pub fn cross_lingual_consistency(
    records: &[ProbeRecord],
    languages: &[String],
) -> Result<ClcOutcome, MetricsError> {
    let mut groups: BTreeMap<&str, BTreeMap<&str, &ProbeRecord>> = BTreeMap::new();
    for record in records.iter().filter(|r| r.is_usable()) {
        if languages.iter().any(|l| l == &record.language) {
            groups
                .entry(&record.canonical_id)
                .or_default()
                .insert(&record.language, record);
        }
    }
    let mut counted = 0usize;
    let mut consistent = 0usize;
    let mut incomplete = 0usize;
    for views in groups.values() {
        if languages.iter().any(|l| !views.contains_key(l.as_str())) {
            incomplete += 1;
            continue;
        }
        counted += 1;
        let choices: Vec<Option<usize>> = languages
            .iter()
            .map(|l| views[l.as_str()].predicted_canonical_choice)
            .collect();
        let all_parsed = choices.iter().all(|c| c.is_some());
        if all_parsed && choices.windows(2).all(|w| w[0] == w[1]) {
            consistent += 1;
        }
    }
    if counted == 0 {
        return Err(MetricsError::EmptyCell);
    }
    Ok(ClcOutcome {
        clc: consistent as f64 / counted as f64,
        groups_counted: counted,
        groups_incomplete: incomplete,
    })
}

/// Expected CLC under independent uniform guessing: `(1/K)^(L-1)`.
pub fn clc_random_baseline(k: usize, l: usize) -> Result<f64, MetricsError> {
    if k < 2 || l < 1 {
        return Err(MetricsError::InvalidBaselineParams { k, l });
    }
    Ok((1.0 / k as f64).powi(l as i32 - 1))
}

fn bottom_k_count(n: usize, k_percent: f64) -> usize {
    (((k_percent / 100.0) * n as f64).floor() as usize).max(1)
}

/// Mean of the `max(1, floor(k% * n))` lowest token log-probabilities.
/// Higher (closer to zero) means more member-like.
pub fn min_k_score(token_logprobs: &[f64], k_percent: f64) -> Result<f64, MetricsError> {
    if token_logprobs.is_empty() {
        return Err(MetricsError::EmptySequence);
    }
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(MetricsError::KOutOfRange { k: k_percent });
    }
    let mut sorted = token_logprobs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite logprobs"));
    let m = bottom_k_count(sorted.len(), k_percent);
    Ok(sorted[..m].iter().sum::<f64>() / m as f64)
}

/// Min-K%++ over standardized token scores `z_t = (logprob_t - μ_t) / σ_t`,
/// where `μ_t`/`σ_t` are the endpoint-reported per-position distribution
/// moments. Requires every token to carry moments with `σ_t > 0`.
pub fn min_k_pp_score(tokens: &[WireToken], k_percent: f64) -> Result<f64, MetricsError> {
    if tokens.is_empty() {
        return Err(MetricsError::EmptySequence);
    }
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(MetricsError::KOutOfRange { k: k_percent });
    }
    let mut z = Vec::with_capacity(tokens.len());
    for (position, token) in tokens.iter().enumerate() {
        let mean = token.dist_mean.ok_or(MetricsError::MissingMoments { position })?;
        let std = token.dist_std.ok_or(MetricsError::MissingMoments { position })?;
        if std <= 0.0 {
            return Err(MetricsError::ZeroStd { position });
        }
        z.push((token.logprob - mean) / std);
    }
    z.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let m = bottom_k_count(z.len(), k_percent);
    Ok(z[..m].iter().sum::<f64>() / m as f64)
}

/// AUROC of member scores against non-member scores: the probability that a
/// random member outscores a random non-member, with ties credited 0.5
/// (Mann-Whitney normalization, computed via averaged ranks).
pub fn auroc(member_scores: &[f64], nonmember_scores: &[f64]) -> Result<f64, MetricsError> {
    if member_scores.is_empty() {
        return Err(MetricsError::EmptySide { side: "member" });
    }
    if nonmember_scores.is_empty() {
        return Err(MetricsError::EmptySide { side: "nonmember" });
    }
    let mut all: Vec<(f64, bool)> = member_scores
        .iter()
        .map(|&s| (s, true))
        .chain(nonmember_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));
    let n = all.len();
    let mut rank_sum_members = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        // 1-based average rank of the tie group [i, j)
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for entry in &all[i..j] {
            if entry.1 {
                rank_sum_members += avg_rank;
            }
        }
        i = j;
    }
    let m = member_scores.len() as f64;
    let u = rank_sum_members - m * (m + 1.0) / 2.0;
    Ok(u / (m * nonmember_scores.len() as f64))
}
