//! Benchmark contamination auditing toolkit.
//!
//! Detects memorization-consistent behavior of text-completion endpoints
//! with three probe families:
//!
//! - **TS-Guessing**: shuffle multiple-choice options, mask one incorrect
//!   option (or one question token for extractive QA), and check whether the
//!   model reconstructs the hidden content or falls back to a memorized
//!   answer letter.
//! - **Min-K scoring**: per-token log-probability probes (Min-K% and
//!   Min-K%++) with AUROC separation between benchmark and held-out texts.
//! - **TACD**: translation-aware detection that pools index recall (IDR) and
//!   cross-lingual consistency (CLC) over permuted views in several
//!   languages, with analytic chance baselines.
//!
//! A deterministic synthetic "memorizing model" ([`mock`]) serves the same
//! wire contract as real endpoints, so every signal can be verified offline.

pub mod client;
pub mod corpus;
pub mod metrics;
pub mod mock;
pub mod perturb;
pub mod probes;
pub mod report;
pub mod rng;
pub mod scoring;
pub mod synth;
pub mod text;
