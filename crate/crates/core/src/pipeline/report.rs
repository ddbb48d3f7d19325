//! Report emission: the accuracy table with the published full-scale
//! results alongside the desk-scale measurements.

use crate::attack::phase3::{AttackReport, SweepReport};
use crate::text::UposTag;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Published full-scale accuracies (percent): baseline then accuracy under
/// 1%, 5%, 10% and 15% perturbation.
pub const PAPER_FULL_SCALE: [(&str, [u32; 5]); 3] = [
    ("imdb", [97, 54, 73, 62, 61]),
    ("amazon", [91, 85, 70, 58, 43]),
    ("yelp", [92, 81, 55, 18, 15]),
];

/// Victim evaluation summary persisted by the training stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub dataset: String,
    pub test_accuracy: f64,
    pub n_test: usize,
    pub epochs_trained: usize,
}

fn fmt_acc(v: Option<f64>) -> String {
    v.map(|a| format!("{a:.4}")).unwrap_or_default()
}

/// Build the accuracy table CSV. Desk-scale attack cells come from the
/// sweep when available (the VERB_ADJ_NOUN column), otherwise from the
/// single attack report at its configured ratio.
pub fn accuracy_table_csv(
    eval: &EvalSummary,
    attack: Option<&AttackReport>,
    sweep: Option<&SweepReport>,
) -> Result<String, ReportError> {
    if attack.is_none() && sweep.as_ref().is_none_or(|s| s.cells.is_empty()) {
        return Err(ReportError::MissingArtifact(
            "no attack report or sweep cells".into(),
        ));
    }
    let mut desk: [Option<f64>; 5] = [Some(eval.test_accuracy), None, None, None, None];
    let all_three: BTreeSet<UposTag> =
        [UposTag::Verb, UposTag::Adj, UposTag::Noun].into_iter().collect();
    if let Some(sweep) = sweep {
        for cell in &sweep.cells {
            // tag order varies by producer; compare as sets
            if cell.pos_set.iter().copied().collect::<BTreeSet<_>>() == all_three {
                let slot = match cell.ratio {
                    1 => 1,
                    5 => 2,
                    10 => 3,
                    15 => 4,
                    _ => continue,
                };
                desk[slot] = Some(cell.attack_acc);
            }
        }
    }
    if let Some(attack) = attack {
        let slot = match attack.ratio {
            1 => Some(1),
            5 => Some(2),
            10 => Some(3),
            15 => Some(4),
            _ => None,
        };
        if let Some(slot) = slot {
            desk[slot].get_or_insert(attack.attack_acc);
        }
    }

    let rows = [
        "baseline",
        "1% perturbation",
        "5% perturbation",
        "10% perturbation",
        "15% perturbation",
    ];
    let mut out = format!(
        "metric,desk_scale_{},paper_full_scale_imdb,paper_full_scale_amazon,paper_full_scale_yelp\n",
        eval.dataset
    );
    for (i, name) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            name,
            fmt_acc(desk[i]),
            PAPER_FULL_SCALE[0].1[i],
            PAPER_FULL_SCALE[1].1[i],
            PAPER_FULL_SCALE[2].1[i],
        ));
    }
    Ok(out)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ReportError> {
    if !path.exists() {
        return Err(ReportError::MissingArtifact(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| ReportError::MissingArtifact(format!("{}: {e}", path.display())))
}
