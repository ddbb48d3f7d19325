//! Dataset ingestion: two-column (label, text) CSV files, label remapping,
//! deduplication and stratified seeded subsampling into train/test splits.

use crate::model::shuffle;
use crate::seed::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("malformed row {0}")]
    MalformedRow(usize),
    #[error("unknown label value {0:?}")]
    UnknownLabel(String),
    #[error("not enough examples of class {class}: need {need}, have {have}")]
    NotEnough { class: u8, need: usize, have: usize },
}

/// How raw label values map to the internal 0/1 polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelScheme {
    /// Labels already 0 (negative) / 1 (positive).
    ZeroOne,
    /// Polarity corpora where 1 = negative, 2 = positive.
    OneTwo,
}

impl LabelScheme {
    pub fn parse(name: &str) -> Option<LabelScheme> {
        match name {
            "zero-one" => Some(LabelScheme::ZeroOne),
            "one-two" => Some(LabelScheme::OneTwo),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LabelScheme::ZeroOne => "zero-one",
            LabelScheme::OneTwo => "one-two",
        }
    }

    fn remap(&self, raw: &str) -> Result<u8, DatasetError> {
        let unknown = || DatasetError::UnknownLabel(raw.to_string());
        match self {
            LabelScheme::ZeroOne => match raw {
                "0" => Ok(0),
                "1" => Ok(1),
                _ => Err(unknown()),
            },
            LabelScheme::OneTwo => match raw {
                "1" => Ok(0),
                "2" => Ok(1),
                _ => Err(unknown()),
            },
        }
    }
}

/// Where a split came from, for the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub train_path: String,
    pub test_path: String,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

/// A named dataset with disjoint train/test review lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitDataset {
    pub name: String,
    pub train: Vec<(u8, String)>,
    pub test: Vec<(u8, String)>,
    pub provenance: Provenance,
}

/// Read a (label, text) CSV and remap labels.
pub fn read_labeled_csv(path: &Path, scheme: LabelScheme) -> Result<Vec<(u8, String)>, DatasetError> {
    if !path.exists() {
        return Err(DatasetError::MissingFile(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|_| DatasetError::MissingFile(path.display().to_string()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|_| DatasetError::MalformedRow(i + 1))?;
        if record.len() != 2 {
            return Err(DatasetError::MalformedRow(i + 1));
        }
        let label = scheme.remap(&record[0])?;
        rows.push((label, record[1].to_string()));
    }
    Ok(rows)
}

/// Label-balanced subsample of `size` rows, seeded and order-stable. Rows
/// already used (by text) are excluded first.
fn stratified_subsample(
    rows: &[(u8, String)],
    size: usize,
    seed: u64,
    used: &mut HashSet<String>,
) -> Result<Vec<(u8, String)>, DatasetError> {
    let per_class = size / 2;
    let mut out = Vec::with_capacity(size);
    for class in [0u8, 1u8] {
        let mut pool: Vec<&(u8, String)> = rows
            .iter()
            .filter(|(l, text)| *l == class && !used.contains(text))
            .collect();
        // drop duplicate texts within the pool as well
        let mut seen = HashSet::new();
        pool.retain(|(_, text)| seen.insert(text.clone()));
        if pool.len() < per_class {
            return Err(DatasetError::NotEnough {
                class,
                need: per_class,
                have: pool.len(),
            });
        }
        let mut order: Vec<usize> = (0..pool.len()).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(seed, "subsample", &[class as u64]));
        shuffle(&mut order, &mut rng);
        for &i in order.iter().take(per_class) {
            used.insert(pool[i].1.clone());
            out.push(pool[i].clone());
        }
    }
    Ok(out)
}

/// Load train/test CSVs, remap labels, dedup texts, and subsample each side
/// to the requested balanced size. Test texts never overlap train texts.
pub fn ingest_dataset(
    name: &str,
    train_path: &Path,
    test_path: &Path,
    scheme: LabelScheme,
    train_size: usize,
    test_size: usize,
    seed: u64,
) -> Result<SplitDataset, DatasetError> {
    let train_rows = read_labeled_csv(train_path, scheme)?;
    let test_rows = read_labeled_csv(test_path, scheme)?;
    let mut used = HashSet::new();
    let train = stratified_subsample(&train_rows, train_size, derive_seed(seed, "train", &[]), &mut used)?;
    let test = stratified_subsample(&test_rows, test_size, derive_seed(seed, "test", &[]), &mut used)?;
    Ok(SplitDataset {
        name: name.to_string(),
        train,
        test,
        provenance: Provenance {
            train_path: train_path.display().to_string(),
            test_path: test_path.display().to_string(),
            train_size,
            test_size,
            seed,
        },
    })
}
