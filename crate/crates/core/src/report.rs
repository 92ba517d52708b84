//! Versioned audit reports: structured JSON with a shipped schema, a flat
//! per-record JSONL table, and a human-readable summary.
//!
//! Reports are byte-deterministic: maps are ordered, no wall-clock values are
//! written unless `SOURCE_DATE_EPOCH` is set, and identical runs therefore
//! produce identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::metrics::ProbeRecord;
use crate::mock::MockConfig;
use crate::probes::{
    InstanceError, MinkAggregate, ProbeConfig, TacdAggregate, TsMcqAggregate, TsQaAggregate,
};
use crate::rng::sha256_hex;

pub const REPORT_SCHEMA_VERSION: &str = "benchaudit-report/v1";

/// The shipped schema this module validates against on every write.
pub const REPORT_SCHEMA_JSON: &str = include_str!("../schema/report-v1.json");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report failed schema validation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Everything needed to reproduce a run bit-exactly against the mock.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub probe_config: ProbeConfig,
    pub endpoint_id: String,
    pub template_hashes: BTreeMap<String, String>,
    pub dataset_digests: BTreeMap<String, String>,
    pub config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mink_serialization: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mock: Option<Value>,
    /// Present only when `SOURCE_DATE_EPOCH` is set; wall-clock timestamps
    /// would break the byte-identical rerun contract.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_unix: Option<u64>,
}

impl RunManifest {
    pub fn new(
        probe_config: ProbeConfig,
        endpoint_id: String,
        template_hashes: BTreeMap<String, String>,
        dataset_digests: BTreeMap<String, String>,
        mock: Option<Value>,
    ) -> Self {
        let digest_input = serde_json::to_string(&(
            &probe_config,
            &endpoint_id,
            &template_hashes,
            &dataset_digests,
            &mock,
        ))
        .expect("manifest pieces are serializable");
        RunManifest {
            probe_config,
            endpoint_id,
            template_hashes,
            dataset_digests,
            config_digest: sha256_hex(digest_input.as_bytes()),
            mink_serialization: None,
            mock,
            generated_unix: source_date_epoch(),
        }
    }
}

fn source_date_epoch() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok())
}

/// A mock-config echo for manifests: the id set is folded into a count and a
/// digest so manifests stay small.
pub fn mock_config_echo(config: &MockConfig) -> Value {
    let mut ids: Vec<&str> = config.memorized_ids.iter().map(|s| s.as_str()).collect();
    ids.sort_unstable();
    serde_json::json!({
        "contamination_p": config.contamination_p,
        "memorized_count": config.memorized_ids.len(),
        "memorized_digest": sha256_hex(ids.join("\n").as_bytes()),
        "index_memory_strength": config.index_memory_strength,
        "surface_memory": config.surface_memory,
        "crosslingual_invariance": config.crosslingual_invariance,
        "collapse_letter": config.collapse_letter,
        "base_accuracy": config.base_accuracy,
        "logprob_profile": config.logprob_profile,
        "seed": config.seed,
        "dummy_token": config.dummy_token,
    })
}

/// Per-condition metric block. Every metric carries its N alongside; fields
/// that do not apply to the probe are omitted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConditionBlock {
    pub p: u32,
    pub probe: String,
    pub n_usable: usize,
    pub n_skipped: usize,
    pub n_errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_percent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idr_baseline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_language_idr: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idr_pooling_consistent: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clc_baseline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups_counted: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups_incomplete: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_rouge_l_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auroc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mink_variant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_member: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_nonmember: Option<usize>,
    /// Raw score lists are emitted so downstream tools can bootstrap their
    /// own intervals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub member_scores: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonmember_scores: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub letter_histograms: Option<BTreeMap<String, BTreeMap<String, u64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collapse_flags: Option<BTreeMap<String, bool>>,
}

impl ConditionBlock {
    fn base(p: u32, probe: &str) -> Self {
        ConditionBlock {
            p,
            probe: probe.to_string(),
            ..ConditionBlock::default()
        }
    }

    pub fn from_ts_mcq(p: u32, agg: &TsMcqAggregate) -> Self {
        ConditionBlock {
            n_usable: agg.n_usable,
            n_errors: agg.n_errors,
            accuracy: Some(agg.accuracy),
            idr: Some(agg.idr),
            idr_baseline: Some(agg.idr_baseline),
            mean_rouge_l_f1: Some(agg.mean_rouge_l_f1),
            ..ConditionBlock::base(p, "ts-mcq")
        }
    }

    pub fn from_ts_qa(p: u32, agg: &TsQaAggregate) -> Self {
        ConditionBlock {
            n_usable: agg.n_usable,
            n_skipped: agg.n_skipped,
            n_errors: agg.n_errors,
            em: Some(agg.em),
            mean_rouge_l_f1: Some(agg.mean_rouge_l_f1),
            ..ConditionBlock::base(p, "ts-qa")
        }
    }

    pub fn from_mink(p: u32, agg: &MinkAggregate) -> Self {
        ConditionBlock {
            n_usable: agg.n_member + agg.n_nonmember,
            n_errors: agg.n_errors,
            k_percent: Some(agg.k_percent),
            auroc: Some(agg.auroc),
            mink_variant: Some(agg.variant.annotation().to_string()),
            n_member: Some(agg.n_member),
            n_nonmember: Some(agg.n_nonmember),
            member_scores: Some(agg.member_scores.clone()),
            nonmember_scores: Some(agg.nonmember_scores.clone()),
            ..ConditionBlock::base(p, "mink")
        }
    }

    pub fn from_tacd(p: u32, agg: &TacdAggregate) -> Self {
        ConditionBlock {
            n_usable: agg.n_usable_views,
            n_errors: agg.n_errors,
            accuracy: Some(agg.accuracy),
            idr: Some(agg.idr),
            idr_baseline: Some(agg.idr_baseline),
            per_language_idr: Some(agg.per_language_idr.clone()),
            idr_pooling_consistent: Some(agg.idr_pooling_consistent),
            clc: Some(agg.clc),
            clc_baseline: Some(agg.clc_baseline),
            groups_counted: Some(agg.groups_counted),
            groups_incomplete: Some(agg.groups_incomplete),
            letter_histograms: Some(agg.letter_histograms.clone()),
            collapse_flags: Some(agg.collapse_flags.clone()),
            ..ConditionBlock::base(p, "tacd")
        }
    }
}

/// Monotonicity flags over a multi-condition sweep, computed on blocks sorted
/// by `p`. Absent when the report has fewer than two blocks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrendFlags {
    pub clc_strictly_increasing: bool,
    pub idr_strictly_increasing: bool,
}

pub fn trend_flags(blocks: &[ConditionBlock]) -> Option<TrendFlags> {
    if blocks.len() < 2 {
        return None;
    }
    let mut sorted: Vec<&ConditionBlock> = blocks.iter().collect();
    sorted.sort_by_key(|b| b.p);
    let strictly_increasing = |values: Vec<Option<f64>>| -> bool {
        let flat: Vec<f64> = values.into_iter().flatten().collect();
        flat.len() >= 2 && flat.windows(2).all(|w| w[0] < w[1])
    };
    Some(TrendFlags {
        clc_strictly_increasing: strictly_increasing(sorted.iter().map(|b| b.clc).collect()),
        idr_strictly_increasing: strictly_increasing(sorted.iter().map(|b| b.idr).collect()),
    })
}

/// A complete audit report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: String,
    pub run: RunManifest,
    pub blocks: Vec<ConditionBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trend: Option<TrendFlags>,
    pub errors: Vec<InstanceError>,
}

impl AuditReport {
    pub fn new(run: RunManifest, blocks: Vec<ConditionBlock>, errors: Vec<InstanceError>) -> Self {
        let trend = trend_flags(&blocks);
        AuditReport {
            schema_version: REPORT_SCHEMA_VERSION.to_string(),
            run,
            blocks,
            trend,
            errors,
        }
    }

    /// Validate against the shipped schema and write the report plus the
    /// per-record table. Returns the records path.
    pub fn write(&self, out: &Path, records: &[ProbeRecord]) -> Result<PathBuf, ReportError> {
        let value = serde_json::to_value(self)?;
        validate_report_json(&value)?;
        let body = format!("{}\n", serde_json::to_string_pretty(&value)?);
        fs::write(out, body).map_err(|source| ReportError::Io {
            path: out.display().to_string(),
            source,
        })?;
        let records_path = records_path_for(out);
        let mut table = String::new();
        for record in records {
            table.push_str(&serde_json::to_string(record)?);
            table.push('\n');
        }
        fs::write(&records_path, table).map_err(|source| ReportError::Io {
            path: records_path.display().to_string(),
            source,
        })?;
        Ok(records_path)
    }

    /// One human line per block, with baseline deltas.
    pub fn human_summary(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            let mut parts = vec![format!("p={} {}: N={}", block.p, block.probe, block.n_usable)];
            if block.n_skipped > 0 {
                parts.push(format!("skips={}", block.n_skipped));
            }
            if block.n_errors > 0 {
                parts.push(format!("errors={}", block.n_errors));
            }
            if let (Some(idr), Some(baseline)) = (block.idr, block.idr_baseline) {
                parts.push(format!("IDR {idr:.3} vs chance {baseline:.3}"));
            }
            if let (Some(clc), Some(baseline)) = (block.clc, block.clc_baseline) {
                parts.push(format!("CLC {clc:.3} vs chance {baseline:.4}"));
            }
            if let Some(accuracy) = block.accuracy {
                parts.push(format!("accuracy {accuracy:.3}"));
            }
            if let Some(em) = block.em {
                parts.push(format!("EM {em:.3}"));
            }
            if let Some(rl) = block.mean_rouge_l_f1 {
                parts.push(format!("mean RL-F1 {rl:.3}"));
            }
            if let Some(auroc) = block.auroc {
                parts.push(format!("AUROC {auroc:.3} (chance 0.500)"));
            }
            if let Some(flags) = &block.collapse_flags {
                if flags.values().any(|&f| f) {
                    let langs: Vec<&str> = flags
                        .iter()
                        .filter(|(_, &f)| f)
                        .map(|(l, _)| l.as_str())
                        .collect();
                    parts.push(format!("COLLAPSE diagnostic in [{}]", langs.join(", ")));
                }
            }
            out.push_str(&parts.join(" | "));
            out.push('\n');
        }
        if let Some(trend) = &self.trend {
            out.push_str(&format!(
                "trend: CLC monotone (strictly increasing): {} | IDR monotone: {}\n",
                trend.clc_strictly_increasing, trend.idr_strictly_increasing
            ));
        }
        out
    }
}

/// Records table path: `report.json` -> `report.records.jsonl`.
pub fn records_path_for(report_path: &Path) -> PathBuf {
    report_path.with_extension("records.jsonl")
}

/// SHA-256 digest of a dataset file, for run manifests.
pub fn dataset_digest(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

#[derive(Debug, Error)]
#[error("{message} at {path}")]
pub struct SchemaViolation {
    pub path: String,
    pub message: String,
}

/// Validate a JSON value against the subset of JSON Schema used by the
/// shipped report schema: `type`, `required`, `properties`, `items`, `enum`,
/// and `additionalProperties: false`.
pub fn validate_schema(value: &Value, schema: &Value, path: &str) -> Result<(), SchemaViolation> {
    if let Some(expected) = schema.get("type") {
        let names: Vec<&str> = match expected {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(|v| v.as_str()).collect(),
            _ => vec![],
        };
        let matches = names.iter().any(|name| match *name {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_i64() || value.is_u64(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => false,
        });
        if !matches {
            return Err(SchemaViolation {
                path: path.to_string(),
                message: format!("expected type {names:?}"),
            });
        }
    }
    if let Some(allowed) = schema.get("enum").and_then(|e| e.as_array()) {
        if !allowed.contains(value) {
            return Err(SchemaViolation {
                path: path.to_string(),
                message: format!("value {value} not in enum"),
            });
        }
    }
    if let Some(object) = value.as_object() {
        if let Some(required) = schema.get("required").and_then(|r| r.as_array()) {
            for name in required.iter().filter_map(|n| n.as_str()) {
                if !object.contains_key(name) {
                    return Err(SchemaViolation {
                        path: path.to_string(),
                        message: format!("missing required field {name:?}"),
                    });
                }
            }
        }
        let properties = schema.get("properties").and_then(|p| p.as_object());
        if let Some(properties) = properties {
            for (name, sub) in properties {
                if let Some(field) = object.get(name) {
                    validate_schema(field, sub, &format!("{path}.{name}"))?;
                }
            }
        }
        if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
            for name in object.keys() {
                if properties.map(|p| !p.contains_key(name)).unwrap_or(true) {
                    return Err(SchemaViolation {
                        path: path.to_string(),
                        message: format!("unexpected field {name:?}"),
                    });
                }
            }
        }
    }
    if let (Some(array), Some(item_schema)) = (value.as_array(), schema.get("items")) {
        for (i, item) in array.iter().enumerate() {
            validate_schema(item, item_schema, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

/// Validate a report JSON value against the shipped schema.
pub fn validate_report_json(value: &Value) -> Result<(), ReportError> {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA_JSON).expect("shipped schema parses");
    validate_schema(value, &schema, "$").map_err(|v| ReportError::Schema {
        path: v.path,
        message: v.message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> RunManifest {
        RunManifest::new(
            ProbeConfig::default(),
            "mock:in-process".into(),
            BTreeMap::new(),
            BTreeMap::new(),
            None,
        )
    }

    fn block(p: u32, clc: f64, idr: f64) -> ConditionBlock {
        ConditionBlock {
            clc: Some(clc),
            idr: Some(idr),
            n_usable: 10,
            ..ConditionBlock::base(p, "tacd")
        }
    }

    #[test]
    fn valid_report_passes_schema() {
        let report = AuditReport::new(manifest(), vec![block(0, 0.1, 0.2)], vec![]);
        let value = serde_json::to_value(&report).unwrap();
        validate_report_json(&value).unwrap();
    }

    #[test]
    fn corrupted_report_fails_schema() {
        let report = AuditReport::new(manifest(), vec![block(0, 0.1, 0.2)], vec![]);
        let mut value = serde_json::to_value(&report).unwrap();
        value["blocks"][0]["p"] = Value::String("not a number".into());
        assert!(validate_report_json(&value).is_err());
        let mut missing = serde_json::to_value(&report).unwrap();
        missing.as_object_mut().unwrap().remove("run");
        assert!(validate_report_json(&missing).is_err());
    }

    #[test]
    fn trend_flags_require_two_blocks_and_strictness() {
        assert!(trend_flags(&[block(0, 0.1, 0.2)]).is_none());
        let rising = [block(0, 0.1, 0.25), block(10, 0.2, 0.25), block(50, 0.3, 0.26)];
        let flags = trend_flags(&rising).unwrap();
        assert!(flags.clc_strictly_increasing);
        assert!(!flags.idr_strictly_increasing, "plateau is not strict increase");
        // order independence: blocks sorted by p before the check
        let shuffled = [rising[2].clone(), rising[0].clone(), rising[1].clone()];
        assert!(trend_flags(&shuffled).unwrap().clc_strictly_increasing);
    }

    #[test]
    fn write_emits_report_and_records_table() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report.json");
        let report = AuditReport::new(manifest(), vec![block(0, 0.1, 0.2)], vec![]);
        let records = vec![];
        let records_path = report.write(&out, &records).unwrap();
        assert_eq!(records_path, dir.path().join("report.records.jsonl"));
        let body = std::fs::read_to_string(&out).unwrap();
        assert!(body.contains("benchaudit-report/v1"));
        // identical write is byte-identical
        report.write(&out, &records).unwrap();
        assert_eq!(body, std::fs::read_to_string(&out).unwrap());
    }

    #[test]
    fn config_digest_tracks_inputs() {
        let a = manifest();
        let mut config = ProbeConfig::default();
        config.run_seed = 99;
        let b = RunManifest::new(config, "mock:in-process".into(), BTreeMap::new(), BTreeMap::new(), None);
        assert_ne!(a.config_digest, b.config_digest);
    }
}
