//! Phase 3: generate candidate perturbations for fresh source reviews, rank
//! them with the phase-2 net, keep the top-k, and measure the victim's
//! accuracy before and after the attack. Also hosts the POS-configuration
//! sweep that produces the 7x4 accuracy grid.

use crate::attack::phase1::{
    build_adversarial_dataset, candidate_positions, deletion_count_for, perturb,
    DeletedToken, PerturbationSpec, Phase1Error,
};
use crate::attack::phase2::{train_adv_net, AdvNet, Phase2Error};
use crate::model::{classify, ModelError, SentimentModel};
use crate::seed::derive_seed;
use crate::text::{TaggedReview, UposTag};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Phase3Error {
    #[error("need {need} candidates for top-k selection, have {have}")]
    InsufficientCandidates { have: usize, need: usize },
    #[error("attack config invalid: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Phase1(#[from] Phase1Error),
    #[error(transparent)]
    Phase2(#[from] Phase2Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Knobs for one attack run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackConfig {
    pub n_source_reviews: usize,
    pub replications: usize,
    pub top_k: usize,
    pub spec: PerturbationSpec,
    pub seed: u64,
    /// Keep only the best-scoring variant of each source review.
    pub best_per_source: bool,
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), Phase3Error> {
        self.spec.validate()?;
        if self.n_source_reviews == 0 || self.replications == 0 || self.top_k == 0 {
            return Err(Phase3Error::InvalidConfig(
                "counts must be positive".into(),
            ));
        }
        if self.top_k > self.n_source_reviews * self.replications {
            return Err(Phase3Error::InvalidConfig(format!(
                "top_k {} exceeds candidate pool {}",
                self.top_k,
                self.n_source_reviews * self.replications
            )));
        }
        Ok(())
    }
}

/// One perturbed variant of a source review.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    pub id: u64,
    pub replication: usize,
    pub original: TaggedReview,
    pub manipulated: Vec<String>,
    pub deleted: Vec<DeletedToken>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub candidate: Candidate,
    pub score: f32,
}

/// One selected example's outcome against the victim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: u64,
    pub replication: usize,
    pub score: f32,
    pub baseline_correct: bool,
    pub attack_correct: bool,
    pub flipped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackReport {
    pub dataset: String,
    pub pos_set: Vec<UposTag>,
    pub ratio: u32,
    pub baseline_acc: f64,
    pub attack_acc: f64,
    pub rows: Vec<ReportRow>,
}

/// Same perturbation mechanics as phase 1, on its own seed stream: every
/// source review gets `replications` independently sampled deletion sets.
pub fn generate_candidates(
    reviews: &[TaggedReview],
    spec: &PerturbationSpec,
) -> Result<Vec<Candidate>, Phase3Error> {
    spec.validate()?;
    let mut out = Vec::with_capacity(reviews.len() * spec.replications);
    for review in reviews {
        let candidates = candidate_positions(review, &spec.pos_set);
        let n = deletion_count_for(spec, review.len(), candidates.len());
        for rep in 0..spec.replications {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                spec.seed,
                "phase3",
                &[review.id, rep as u64],
            ));
            let positions: Vec<usize> = if n == 0 {
                Vec::new()
            } else {
                sample(&mut rng, candidates.len(), n)
                    .into_iter()
                    .map(|i| candidates[i])
                    .collect()
            };
            let (manipulated, deleted) = perturb(review, &positions)?;
            out.push(Candidate {
                id: review.id,
                replication: rep,
                original: review.clone(),
                manipulated,
                deleted,
            });
        }
    }
    Ok(out)
}

/// Score all candidates and keep the `top_k` best: sort by score descending,
/// ties broken by (review id, replication index) ascending. With
/// `best_per_source`, at most one variant per source review survives.
pub fn rank_and_select(
    net: &AdvNet,
    candidates: &[Candidate],
    top_k: usize,
    best_per_source: bool,
) -> Result<Vec<ScoredCandidate>, Phase3Error> {
    if candidates.len() < top_k {
        return Err(Phase3Error::InsufficientCandidates {
            have: candidates.len(),
            need: top_k,
        });
    }
    let max_len = net.config.model.max_len;
    let mut scored: Vec<ScoredCandidate> = candidates
        .iter()
        .map(|c| {
            let o = net.vocab.encode(&c.original.tokens, max_len);
            let m = net.vocab.encode_tokens(&c.manipulated, max_len);
            Ok(ScoredCandidate { candidate: c.clone(), score: net.score(&o, &m)? })
        })
        .collect::<Result<_, Phase2Error>>()?;
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| {
                (a.candidate.id, a.candidate.replication)
                    .cmp(&(b.candidate.id, b.candidate.replication))
            })
    });
    if best_per_source {
        let mut seen = HashSet::new();
        scored.retain(|s| seen.insert(s.candidate.id));
    }
    scored.truncate(top_k);
    Ok(scored)
}

/// Victim accuracy on the selected originals vs their manipulated versions,
/// both judged against gold labels.
pub fn attack_evaluate(
    victim: &SentimentModel,
    selected: &[ScoredCandidate],
    dataset: &str,
    spec: &PerturbationSpec,
) -> Result<AttackReport, Phase3Error> {
    let max_len = victim.config.max_len;
    let originals: Vec<_> = selected
        .iter()
        .map(|s| victim.vocab.encode(&s.candidate.original.tokens, max_len))
        .collect();
    let manipulated: Vec<_> = selected
        .iter()
        .map(|s| victim.vocab.encode_tokens(&s.candidate.manipulated, max_len))
        .collect();
    let base_p = victim.predict_proba(&originals)?;
    let attack_p = victim.predict_proba(&manipulated)?;

    let mut rows = Vec::with_capacity(selected.len());
    let mut base_correct = 0;
    let mut attack_correct = 0;
    for ((s, bp), ap) in selected.iter().zip(&base_p).zip(&attack_p) {
        let label = s.candidate.original.label;
        let bpred = classify(*bp, victim.config.threshold);
        let apred = classify(*ap, victim.config.threshold);
        if bpred == label {
            base_correct += 1;
        }
        if apred == label {
            attack_correct += 1;
        }
        rows.push(ReportRow {
            id: s.candidate.id,
            replication: s.candidate.replication,
            score: s.score,
            baseline_correct: bpred == label,
            attack_correct: apred == label,
            flipped: apred != bpred,
        });
    }
    let n = selected.len().max(1) as f64;
    Ok(AttackReport {
        dataset: dataset.to_string(),
        pos_set: spec.pos_set.iter().copied().collect(),
        ratio: spec.ratio_percent,
        baseline_acc: base_correct as f64 / n,
        attack_acc: attack_correct as f64 / n,
        rows,
    })
}

/// Run a complete phase 1 -> 2 -> 3 attack for one (pos_set, ratio) cell.
pub fn run_attack_cell(
    victim: &SentimentModel,
    net: &mut AdvNet,
    phase1_reviews: &[TaggedReview],
    attack_reviews: &[TaggedReview],
    config: &AttackConfig,
    dataset: &str,
    val_split: f64,
) -> Result<AttackReport, Phase3Error> {
    config.validate()?;
    let records = build_adversarial_dataset(victim, phase1_reviews, &config.spec)?;
    train_adv_net(net, &records, val_split)?;

    let sources = &attack_reviews[..config.n_source_reviews.min(attack_reviews.len())];
    let attack_spec = PerturbationSpec {
        replications: config.replications,
        seed: derive_seed(config.seed, "attack-candidates", &[]),
        ..config.spec.clone()
    };
    let candidates = generate_candidates(sources, &attack_spec)?;
    let selected = rank_and_select(net, &candidates, config.top_k, config.best_per_source)?;
    attack_evaluate(victim, &selected, dataset, &config.spec)
}

/// The seven deletion-target configurations of the sweep.
pub const SWEEP_POS_SETS: [&[UposTag]; 7] = [
    &[UposTag::Verb],
    &[UposTag::Adj],
    &[UposTag::Noun],
    &[UposTag::Verb, UposTag::Adj],
    &[UposTag::Verb, UposTag::Noun],
    &[UposTag::Adj, UposTag::Noun],
    &[UposTag::Verb, UposTag::Adj, UposTag::Noun],
];

pub const SWEEP_RATIOS: [u32; 4] = [1, 5, 10, 15];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub pos_set: Vec<UposTag>,
    pub ratio: u32,
    pub baseline_acc: f64,
    pub attack_acc: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub dataset: String,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    /// Flat CSV with one row per cell; pos sets are underscore-joined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,pos_set,ratio,baseline_acc,attack_acc,n\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.dataset,
                pos_set_name(&c.pos_set),
                c.ratio,
                c.baseline_acc,
                c.attack_acc,
                c.n
            ));
        }
        out
    }
}

pub fn pos_set_name(pos_set: &[UposTag]) -> String {
    pos_set
        .iter()
        .map(|t| t.as_str())
        .collect::<Vec<_>>()
        .join("_")
}

/// Run every (pos_set, ratio) cell: a fresh phase-2 net is built per cell
/// via `net_builder`, trained on that cell's phase-1 dataset, and used to
/// select the attack set.
pub fn pos_sweep(
    victim: &SentimentModel,
    net_builder: &mut dyn FnMut() -> Result<AdvNet, Phase2Error>,
    phase1_reviews: &[TaggedReview],
    attack_reviews: &[TaggedReview],
    template: &AttackConfig,
    dataset: &str,
    val_split: f64,
) -> Result<SweepReport, Phase3Error> {
    let mut cells = Vec::with_capacity(SWEEP_POS_SETS.len() * SWEEP_RATIOS.len());
    for (pi, pos_set) in SWEEP_POS_SETS.iter().enumerate() {
        for (ri, &ratio) in SWEEP_RATIOS.iter().enumerate() {
            let cell_seed =
                derive_seed(template.seed, "sweep-cell", &[pi as u64, ri as u64]);
            let config = AttackConfig {
                spec: PerturbationSpec {
                    pos_set: pos_set.iter().copied().collect(),
                    ratio_percent: ratio,
                    seed: cell_seed,
                    ..template.spec.clone()
                },
                seed: cell_seed,
                ..template.clone()
            };
            let mut net = net_builder()?;
            let report = run_attack_cell(
                victim,
                &mut net,
                phase1_reviews,
                attack_reviews,
                &config,
                dataset,
                val_split,
            )?;
            cells.push(SweepCell {
                pos_set: report.pos_set.clone(),
                ratio,
                baseline_acc: report.baseline_acc,
                attack_acc: report.attack_acc,
                n: report.rows.len(),
            });
        }
    }
    Ok(SweepReport { dataset: dataset.to_string(), cells })
}
