//! Property tests for the metric kernels and perturbation invariants.

use proptest::prelude::*;

use benchaudit_core::metrics::{auroc, min_k_score, rouge_l_f1};
use benchaudit_core::perturb::Permutation;
use benchaudit_core::rng::keyed_stream;
use benchaudit_core::text::{nearest_rank_percentile, normalize_for_exact_match};

/// Brute-force LCS: enumerate every subsequence of `a` and keep the longest
/// that is also a subsequence of `b`. Exponential, deliberately unrelated to
/// the DP in the implementation.
fn lcs_brute(a: &[char], b: &[char]) -> usize {
    fn is_subsequence(needle: &[char], haystack: &[char]) -> bool {
        let mut it = haystack.iter();
        needle.iter().all(|c| it.any(|h| h == c))
    }
    let n = a.len();
    let mut best = 0usize;
    for mask in 0u32..(1u32 << n) {
        let sub: Vec<char> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| a[i]).collect();
        if sub.len() > best && is_subsequence(&sub, b) {
            best = sub.len();
        }
    }
    best
}

fn rouge_from_lcs(lcs: usize, pred_len: usize, ref_len: usize) -> f64 {
    if pred_len == 0 || ref_len == 0 || lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / pred_len as f64;
    let r = lcs as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

fn words(symbols: &[char]) -> String {
    symbols.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

proptest! {
    #[test]
    fn rouge_matches_brute_force_oracle(
        a in proptest::collection::vec(prop::sample::select(vec!['x', 'y', 'z']), 0..7),
        b in proptest::collection::vec(prop::sample::select(vec!['x', 'y', 'z']), 0..7),
    ) {
        let expected = rouge_from_lcs(lcs_brute(&a, &b), a.len(), b.len());
        let actual = rouge_l_f1(&words(&a), &words(&b));
        prop_assert!((actual - expected).abs() < 1e-12, "a={a:?} b={b:?} {actual} vs {expected}");
    }

    #[test]
    fn rouge_is_one_on_identical_nonempty(
        a in proptest::collection::vec(prop::sample::select(vec!['x', 'y', 'z']), 1..8),
    ) {
        prop_assert_eq!(rouge_l_f1(&words(&a), &words(&a)), 1.0);
    }

    #[test]
    fn auroc_complement_sums_to_one(
        members in proptest::collection::vec(-10.0f64..10.0, 1..15),
        nonmembers in proptest::collection::vec(-10.0f64..10.0, 1..15),
    ) {
        let fwd = auroc(&members, &nonmembers).unwrap();
        let rev = auroc(&nonmembers, &members).unwrap();
        prop_assert!((fwd + rev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auroc_invariant_under_increasing_transform(
        members in proptest::collection::vec(-5.0f64..5.0, 1..12),
        nonmembers in proptest::collection::vec(-5.0f64..5.0, 1..12),
    ) {
        // x -> x^3 is strictly increasing on all of R and preserves ties
        let cube = |v: &[f64]| v.iter().map(|x| x.powi(3)).collect::<Vec<_>>();
        let base = auroc(&members, &nonmembers).unwrap();
        let transformed = auroc(&cube(&members), &cube(&nonmembers)).unwrap();
        prop_assert!((base - transformed).abs() < 1e-12);
    }

    #[test]
    fn min_k_full_window_is_the_mean(
        logprobs in proptest::collection::vec(-12.0f64..-0.001, 1..40),
    ) {
        let mean = logprobs.iter().sum::<f64>() / logprobs.len() as f64;
        prop_assert!((min_k_score(&logprobs, 100.0).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn min_k_monotone_in_single_logprob(
        logprobs in proptest::collection::vec(-12.0f64..-0.001, 2..20),
        index in 0usize..19,
        bump in 0.001f64..5.0,
    ) {
        let index = index % logprobs.len();
        let base = min_k_score(&logprobs, 40.0).unwrap();
        let mut raised = logprobs.clone();
        raised[index] = (raised[index] + bump).min(-0.0005);
        let after = min_k_score(&raised, 40.0).unwrap();
        prop_assert!(after + 1e-12 >= base, "raising one logprob cannot lower the score");
    }

    #[test]
    fn permutation_inverse_composes_to_identity(k in 2usize..10, seed in 0u64..5000) {
        let mut rng = keyed_stream(seed, &["prop-perm"]);
        let perm = Permutation::sample(k, &mut rng);
        let inv = perm.inverse();
        for i in 0..k {
            prop_assert_eq!(inv.slot_of(perm.slot_of(i)), i);
            prop_assert_eq!(perm.original_of(perm.slot_of(i)), i);
        }
    }

    #[test]
    fn normalization_is_idempotent(s in "[ -~]{0,40}") {
        let once = normalize_for_exact_match(&s);
        let twice = normalize_for_exact_match(&once);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn percentile_endpoints_hold(
        mut values in proptest::collection::vec(-100.0f64..100.0, 1..50),
    ) {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(nearest_rank_percentile(&values, 0.0), values[0]);
        prop_assert_eq!(nearest_rank_percentile(&values, 100.0), *values.last().unwrap());
    }
}

#[test]
fn record_order_does_not_change_rates() {
    use benchaudit_core::client::ParsedAnswer;
    use benchaudit_core::metrics::{cross_lingual_consistency, index_recall_rate, ProbeRecord};

    let languages: Vec<String> = ["ar", "en", "fr"].iter().map(|s| s.to_string()).collect();
    let mut records = Vec::new();
    for i in 0..30 {
        for lang in &languages {
            let choice = (i * 7 + lang.len()) % 4;
            records.push(ProbeRecord {
                canonical_id: format!("item-{i:03}"),
                language: lang.clone(),
                condition_p: 0,
                probe: "tacd".into(),
                predicted: ParsedAnswer::Letter(choice),
                predicted_display_slot: Some(choice),
                predicted_canonical_choice: Some(choice),
                idr_hit: Some(choice == 1),
                accuracy_hit: None,
                em_hit: None,
                rouge_l_f1: None,
                min_k: None,
                cohort: None,
                skip_reason: None,
            });
        }
    }
    let idr = index_recall_rate(&records).unwrap();
    let clc = cross_lingual_consistency(&records, &languages).unwrap();
    let mut reversed = records.clone();
    reversed.reverse();
    assert_eq!(index_recall_rate(&reversed).unwrap(), idr);
    assert_eq!(cross_lingual_consistency(&reversed, &languages).unwrap(), clc);
}
