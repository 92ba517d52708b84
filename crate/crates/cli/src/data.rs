//! Dataset file handling for the CLI: kind detection, loading, digests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use benchaudit_core::corpus::{
    align_parallel_mcq, load_mcq_dataset_auto, load_qa_dataset_auto, Alignment, McqItem, QaItem,
};
use benchaudit_core::report::dataset_digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Mcq,
    Qa,
}

/// Inspect the first record to decide whether a file is MCQ or QA.
pub fn detect_kind(path: &Path) -> Result<DatasetKind> {
    let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = body
        .lines()
        .find(|l| !l.trim().is_empty())
        .with_context(|| format!("{}: file has no records", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(first).with_context(|| format!("{}:1: not valid JSON", path.display()))?;
    if value.get("choices").is_some() {
        Ok(DatasetKind::Mcq)
    } else if value.get("context").is_some() {
        Ok(DatasetKind::Qa)
    } else {
        bail!(
            "{}: records carry neither `choices` (MCQ) nor `context` (QA)",
            path.display()
        );
    }
}

#[derive(Debug)]
pub enum LoadedDataset {
    Mcq { language: String, items: Vec<McqItem> },
    Qa { language: String, items: Vec<QaItem> },
}

impl LoadedDataset {
    pub fn language(&self) -> &str {
        match self {
            LoadedDataset::Mcq { language, .. } | LoadedDataset::Qa { language, .. } => language,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LoadedDataset::Mcq { items, .. } => items.len(),
            LoadedDataset::Qa { items, .. } => items.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LoadedDataset::Mcq { .. } => "mcq",
            LoadedDataset::Qa { .. } => "qa",
        }
    }
}

pub fn load_any(path: &Path) -> Result<LoadedDataset> {
    match detect_kind(path)? {
        DatasetKind::Mcq => {
            let items = load_mcq_dataset_auto(path)?;
            let language = items
                .first()
                .map(|i| i.language.clone())
                .unwrap_or_else(|| "en".into());
            Ok(LoadedDataset::Mcq { language, items })
        }
        DatasetKind::Qa => {
            let items = load_qa_dataset_auto(path)?;
            let language = items
                .first()
                .map(|i| i.language.clone())
                .unwrap_or_else(|| "en".into());
            Ok(LoadedDataset::Qa { language, items })
        }
    }
}

/// Load several MCQ files as one parallel corpus keyed by language.
pub fn load_mcq_by_language(paths: &[PathBuf]) -> Result<BTreeMap<String, Vec<McqItem>>> {
    let mut datasets: BTreeMap<String, Vec<McqItem>> = BTreeMap::new();
    for path in paths {
        let items = load_mcq_dataset_auto(path)?;
        let language = items
            .first()
            .map(|i| i.language.clone())
            .with_context(|| format!("{}: empty dataset", path.display()))?;
        if datasets.insert(language.clone(), items).is_some() {
            bail!("two datasets carry the same language {language:?}");
        }
    }
    Ok(datasets)
}

pub fn aligned_mcq(paths: &[PathBuf]) -> Result<Alignment<McqItem>> {
    let datasets = load_mcq_by_language(paths)?;
    Ok(align_parallel_mcq(&datasets)?)
}

/// SHA-256 digests of the given files, keyed by file name.
pub fn digests_for(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    let mut digests = BTreeMap::new();
    for path in paths {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| path.display().to_string());
        digests.insert(
            name,
            dataset_digest(path).with_context(|| format!("digesting {}", path.display()))?,
        );
    }
    Ok(digests)
}
