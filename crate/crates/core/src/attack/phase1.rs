//! Phase 1: the random-deletion sensitivity study and construction of the
//! labeled adversarial dataset. Deletions replace tokens with a placeholder
//! so sequence length is preserved; labels mark which deletion sets flipped
//! a previously-correct prediction.

use crate::model::{classify, ModelError, SentimentModel};
use crate::seed::derive_seed;
use crate::text::{TaggedReview, UposTag, PLACEHOLDER_TOKEN};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Phase1Error {
    #[error("position {0} out of range for review of length {1}")]
    PositionOutOfRange(usize, usize),
    #[error("duplicate deletion position {0}")]
    DuplicatePosition(usize),
    #[error("perturbation spec invalid: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which count the deletion ratio applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioBase {
    /// Ratio of the candidate POS token count (default).
    Candidates,
    /// Ratio of the full review length, for comparison runs.
    ReviewLength,
}

/// Deletion recipe shared by the dataset builder and the candidate generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub pos_set: BTreeSet<UposTag>,
    pub ratio_percent: u32,
    pub replications: usize,
    pub seed: u64,
    pub ratio_base: RatioBase,
}

impl PerturbationSpec {
    pub fn new(pos_set: &[UposTag], ratio_percent: u32, replications: usize, seed: u64) -> Self {
        PerturbationSpec {
            pos_set: pos_set.iter().copied().collect(),
            ratio_percent,
            replications,
            seed,
            ratio_base: RatioBase::Candidates,
        }
    }

    pub fn validate(&self) -> Result<(), Phase1Error> {
        if self.pos_set.is_empty() {
            return Err(Phase1Error::InvalidSpec("pos_set must be nonempty".into()));
        }
        if self.ratio_percent == 0 || self.ratio_percent > 100 {
            return Err(Phase1Error::InvalidSpec(format!(
                "ratio_percent must be in (0, 100], got {}",
                self.ratio_percent
            )));
        }
        if self.replications == 0 {
            return Err(Phase1Error::InvalidSpec("replications must be >= 1".into()));
        }
        Ok(())
    }
}

/// One (position, word, tag) deletion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletedToken {
    pub pos: usize,
    pub word: String,
    pub tag: UposTag,
}

/// One replication of one review, fully labeled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvDatasetRecord {
    pub id: u64,
    pub replication: usize,
    pub tokens: Vec<String>,
    pub manipulated: Vec<String>,
    pub deleted: Vec<DeletedToken>,
    pub orig_label: u8,
    pub pred_label: u8,
    pub adv_pred: u8,
    pub adv_label: u8,
}

/// Per-tag distribution of deletion counts among successful random attacks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosHistogram {
    /// counts[tag][c] = successes whose deletion set held exactly c tokens
    /// of that tag; one row per studied tag, c in 0..=k_words.
    pub counts: Vec<(UposTag, Vec<u64>)>,
    pub attempts: u64,
    pub successes: u64,
    pub skipped_short: u64,
    pub wrong_baseline_reviews: u64,
}

impl PosHistogram {
    fn new(k_words: usize) -> Self {
        PosHistogram {
            counts: UposTag::STUDIED
                .iter()
                .map(|&t| (t, vec![0; k_words + 1]))
                .collect(),
            attempts: 0,
            successes: 0,
            skipped_short: 0,
            wrong_baseline_reviews: 0,
        }
    }

    /// Fraction of successes whose deletion set held at least one token of
    /// the given tag.
    pub fn frac_with_tag(&self, tag: UposTag) -> f64 {
        let row = self
            .counts
            .iter()
            .find(|(t, _)| *t == tag)
            .map(|(_, row)| row)
            .expect("studied tag");
        if self.successes == 0 {
            return 0.0;
        }
        let with: u64 = row[1..].iter().sum();
        with as f64 / self.successes as f64
    }

    /// Tag-by-count matrix as CSV, one row per tag.
    pub fn to_csv(&self) -> String {
        let bins = self.counts.first().map_or(0, |(_, row)| row.len());
        let mut out = String::from("tag");
        for c in 0..bins {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
        for (tag, row) in &self.counts {
            out.push_str(tag.as_str());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Ascending indices of tokens whose tag is in the target set. Placeholder
/// tokens are never candidates.
pub fn candidate_positions(review: &TaggedReview, pos_set: &BTreeSet<UposTag>) -> Vec<usize> {
    review
        .tags
        .iter()
        .enumerate()
        .filter(|&(i, tag)| {
            pos_set.contains(tag) && review.tokens.0[i] != PLACEHOLDER_TOKEN
        })
        .map(|(i, _)| i)
        .collect()
}

/// n = ceil(ratio/100 * candidate_count), never more than the candidates.
pub fn deletion_count(ratio_percent: u32, candidate_count: usize) -> usize {
    let n = (ratio_percent as usize * candidate_count).div_ceil(100);
    n.min(candidate_count)
}

/// Deletion count under the spec's ratio-base flag.
pub fn deletion_count_for(spec: &PerturbationSpec, review_len: usize, candidates: usize) -> usize {
    let base = match spec.ratio_base {
        RatioBase::Candidates => candidates,
        RatioBase::ReviewLength => review_len,
    };
    (spec.ratio_percent as usize * base).div_ceil(100).min(candidates)
}

/// Replace the given positions with the placeholder token, recording what
/// was deleted in ascending position order.
pub fn perturb(
    review: &TaggedReview,
    positions: &[usize],
) -> Result<(Vec<String>, Vec<DeletedToken>), Phase1Error> {
    let mut seen = BTreeSet::new();
    for &p in positions {
        if p >= review.len() {
            return Err(Phase1Error::PositionOutOfRange(p, review.len()));
        }
        if !seen.insert(p) {
            return Err(Phase1Error::DuplicatePosition(p));
        }
    }
    let mut manipulated = review.tokens.0.clone();
    let mut deleted = Vec::with_capacity(seen.len());
    for &p in &seen {
        deleted.push(DeletedToken {
            pos: p,
            word: manipulated[p].clone(),
            tag: review.tags[p],
        });
        manipulated[p] = PLACEHOLDER_TOKEN.to_string();
    }
    Ok((manipulated, deleted))
}

/// The labeling rule: 1 iff the classifier was right on the original and
/// the manipulated version flipped its prediction.
pub fn adv_label(orig_label: u8, pred_label: u8, adv_pred: u8) -> u8 {
    debug_assert!(orig_label <= 1 && pred_label <= 1 && adv_pred <= 1);
    u8::from(pred_label == orig_label && adv_pred != pred_label)
}

/// Delete `k_words` uniformly-random tokens (any POS) from each review,
/// `replications` times, and tally which POS tags the successful attacks
/// deleted. Reviews shorter than `k_words` are skipped and counted.
pub fn random_attack_study(
    model: &SentimentModel,
    reviews: &[TaggedReview],
    k_words: usize,
    replications: usize,
    seed: u64,
) -> Result<PosHistogram, Phase1Error> {
    let mut hist = PosHistogram::new(k_words);
    let max_len = model.config.max_len;

    for review in reviews {
        if review.len() < k_words {
            hist.skipped_short += 1;
            continue;
        }
        let base = model.predict_proba(&[model.vocab.encode(&review.tokens, max_len)])?;
        let pred = classify(base[0], model.config.threshold);
        let baseline_correct = pred == review.label;
        if !baseline_correct {
            hist.wrong_baseline_reviews += 1;
        }

        let mut encoded = Vec::with_capacity(replications);
        let mut tag_counts = Vec::with_capacity(replications);
        for rep in 0..replications {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                seed,
                "random-study",
                &[review.id, rep as u64],
            ));
            let positions = sample(&mut rng, review.len(), k_words).into_vec();
            let (manipulated, deleted) = perturb(review, &positions)?;
            let mut per_tag = [0u64; 10];
            for d in &deleted {
                if let Some(i) = UposTag::STUDIED.iter().position(|&t| t == d.tag) {
                    per_tag[i] += 1;
                }
            }
            encoded.push(model.vocab.encode_tokens(&manipulated, max_len));
            tag_counts.push(per_tag);
        }
        hist.attempts += replications as u64;

        if baseline_correct {
            let probas = model.predict_proba(&encoded)?;
            for (p, per_tag) in probas.iter().zip(&tag_counts) {
                if classify(*p, model.config.threshold) != pred {
                    hist.successes += 1;
                    for (i, &c) in per_tag.iter().enumerate() {
                        hist.counts[i].1[c as usize] += 1;
                    }
                }
            }
        }
    }
    Ok(hist)
}

/// Algorithm: replicate each review, sample an independent deletion subset
/// per replication from its own rng stream, query the classifier and attach
/// labels. Output is sorted by (review id, replication index).
pub fn build_adversarial_dataset(
    model: &SentimentModel,
    test_reviews: &[TaggedReview],
    spec: &PerturbationSpec,
) -> Result<Vec<AdvDatasetRecord>, Phase1Error> {
    spec.validate()?;
    let max_len = model.config.max_len;
    let mut records = Vec::with_capacity(test_reviews.len() * spec.replications);

    for review in test_reviews {
        let base = model.predict_proba(&[model.vocab.encode(&review.tokens, max_len)])?;
        let pred_label = classify(base[0], model.config.threshold);
        let candidates = candidate_positions(review, &spec.pos_set);
        let n = deletion_count_for(spec, review.len(), candidates.len());

        let mut encoded = Vec::with_capacity(spec.replications);
        let mut partial = Vec::with_capacity(spec.replications);
        for rep in 0..spec.replications {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                spec.seed,
                "phase1",
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
            encoded.push(model.vocab.encode_tokens(&manipulated, max_len));
            partial.push((manipulated, deleted));
        }
        let probas = model.predict_proba(&encoded)?;

        for (rep, ((manipulated, deleted), p)) in
            partial.into_iter().zip(probas).enumerate()
        {
            let adv_pred = classify(p, model.config.threshold);
            records.push(AdvDatasetRecord {
                id: review.id,
                replication: rep,
                tokens: review.tokens.0.clone(),
                manipulated,
                deleted,
                orig_label: review.label,
                pred_label,
                adv_pred,
                adv_label: adv_label(review.label, pred_label, adv_pred),
            });
        }
    }
    records.sort_by_key(|r| (r.id, r.replication));
    Ok(records)
}

/// Serialize records as line-delimited JSON.
pub fn write_jsonl(records: &[AdvDatasetRecord], path: &Path) -> Result<(), Phase1Error> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut file, record).map_err(std::io::Error::from)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<AdvDatasetRecord>, Phase1Error> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(|line| serde_json::from_str(line).map_err(|e| std::io::Error::from(e).into()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::text::{EmbeddingTable, TokenSeq, Vocabulary};
    use proptest::prelude::*;

    fn review(id: u64, words: &[&str], tags: &[UposTag], label: u8) -> TaggedReview {
        TaggedReview::new(
            id,
            TokenSeq(words.iter().map(|s| s.to_string()).collect()),
            tags.to_vec(),
            label,
        )
    }

    fn pos(tags: &[UposTag]) -> BTreeSet<UposTag> {
        tags.iter().copied().collect()
    }

    #[test]
    fn candidates_filter_by_tag() {
        let r = review(
            0,
            &["the", "film", "crawls"],
            &[UposTag::Det, UposTag::Noun, UposTag::Verb],
            0,
        );
        assert_eq!(candidate_positions(&r, &pos(&[UposTag::Noun])), vec![1]);
        assert_eq!(
            candidate_positions(&r, &pos(&[UposTag::Verb, UposTag::Noun])),
            vec![1, 2]
        );
        assert!(candidate_positions(&r, &pos(&[UposTag::Adj])).is_empty());
    }

    #[test]
    fn placeholder_positions_excluded() {
        let r = review(
            0,
            &["<del>", "film"],
            &[UposTag::Noun, UposTag::Noun],
            0,
        );
        assert_eq!(candidate_positions(&r, &pos(&[UposTag::Noun])), vec![1]);
    }

    #[test]
    fn deletion_count_examples() {
        assert_eq!(deletion_count(1, 73), 1);
        assert_eq!(deletion_count(15, 20), 3);
        assert_eq!(deletion_count(10, 0), 0);
        assert_eq!(deletion_count(100, 7), 7);
    }

    #[test]
    fn perturb_substitutes_and_records() {
        let r = review(
            0,
            &["the", "movie", "crawls"],
            &[UposTag::Det, UposTag::Noun, UposTag::Verb],
            0,
        );
        let (manipulated, deleted) = perturb(&r, &[2]).unwrap();
        assert_eq!(manipulated, vec!["the", "movie", PLACEHOLDER_TOKEN]);
        assert_eq!(
            deleted,
            vec![DeletedToken { pos: 2, word: "crawls".into(), tag: UposTag::Verb }]
        );

        let (identity, none) = perturb(&r, &[]).unwrap();
        assert_eq!(identity, r.tokens.0);
        assert!(none.is_empty());
    }

    #[test]
    fn perturb_rejects_bad_positions() {
        let r = review(0, &["a"], &[UposTag::Det], 0);
        assert!(matches!(
            perturb(&r, &[1]),
            Err(Phase1Error::PositionOutOfRange(1, 1))
        ));
        let r2 = review(0, &["a", "b"], &[UposTag::Det, UposTag::Det], 0);
        assert!(matches!(
            perturb(&r2, &[0, 0]),
            Err(Phase1Error::DuplicatePosition(0))
        ));
    }

    #[test]
    fn adv_label_truth_table() {
        // 1 iff classifier was right on the original and flipped after
        let expected = [
            ((0, 0, 0), 0),
            ((0, 0, 1), 1),
            ((0, 1, 0), 0),
            ((0, 1, 1), 0),
            ((1, 0, 0), 0),
            ((1, 0, 1), 0),
            ((1, 1, 0), 1),
            ((1, 1, 1), 0),
        ];
        for ((orig, pred, adv), want) in expected {
            assert_eq!(adv_label(orig, pred, adv), want, "case {orig}{pred}{adv}");
        }
    }

    fn trained_model() -> SentimentModel {
        let corpus = vec![TokenSeq(vec![
            "good".into(),
            "bad".into(),
            "film".into(),
            "the".into(),
        ])];
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let table = EmbeddingTable::seeded_random(&vocab, 8, 3);
        let config = ModelConfig {
            max_len: 8,
            embedding_dim: 8,
            filters: 4,
            kernel_size: 3,
            batch_size: 4,
            max_epochs: 10,
            ..ModelConfig::default()
        };
        let mut model = SentimentModel::build(config, vocab.clone(), &table).unwrap();
        let train: Vec<_> = (0..200)
            .map(|i| {
                let label = (i % 2) as u8;
                let word = if label == 1 { "good" } else { "bad" };
                let seq = TokenSeq(vec![word.to_string(), "film".to_string()]);
                (vocab.encode(&seq, 8), label)
            })
            .collect();
        model.train(&train).unwrap();
        model
    }

    fn sentiment_review(id: u64, positive: bool) -> TaggedReview {
        let word = if positive { "good" } else { "bad" };
        review(
            id,
            &[word, "film", "the", "the"],
            &[UposTag::Adj, UposTag::Noun, UposTag::Det, UposTag::Det],
            u8::from(positive),
        )
    }

    #[test]
    fn dataset_counts_and_ordering() {
        let model = trained_model();
        let reviews: Vec<_> = (0..4).map(|i| sentiment_review(i, i % 2 == 0)).collect();
        let spec = PerturbationSpec::new(&[UposTag::Adj, UposTag::Noun], 100, 5, 9);
        let records = build_adversarial_dataset(&model, &reviews, &spec).unwrap();
        assert_eq!(records.len(), 20);
        let keys: Vec<_> = records.iter().map(|r| (r.id, r.replication)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for r in &records {
            assert_eq!(r.tokens.len(), r.manipulated.len());
            for d in &r.deleted {
                assert!(spec.pos_set.contains(&d.tag));
                assert_eq!(r.manipulated[d.pos], PLACEHOLDER_TOKEN);
            }
            assert_eq!(
                r.adv_label,
                adv_label(r.orig_label, r.pred_label, r.adv_pred)
            );
        }
    }

    #[test]
    fn no_candidates_yields_empty_deletions() {
        let model = trained_model();
        let reviews = vec![sentiment_review(0, true)];
        let spec = PerturbationSpec::new(&[UposTag::Verb], 10, 3, 1);
        let records = build_adversarial_dataset(&model, &reviews, &spec).unwrap();
        for r in &records {
            assert!(r.deleted.is_empty());
            assert_eq!(r.manipulated, r.tokens);
            assert_eq!(r.adv_label, 0);
        }
    }

    #[test]
    fn dataset_archive_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let model = trained_model();
        let reviews: Vec<_> = (0..3).map(|i| sentiment_review(i, i % 2 == 0)).collect();
        let spec = PerturbationSpec::new(&[UposTag::Adj], 100, 4, 5);
        let a = build_adversarial_dataset(&model, &reviews, &spec).unwrap();
        let b = build_adversarial_dataset(&model, &reviews, &spec).unwrap();
        let pa = dir.path().join("a.jsonl");
        let pb = dir.path().join("b.jsonl");
        write_jsonl(&a, &pa).unwrap();
        write_jsonl(&b, &pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
        let loaded = read_jsonl(&pa).unwrap();
        assert_eq!(loaded.len(), a.len());
        assert_eq!(loaded[0].manipulated, a[0].manipulated);
    }

    #[test]
    fn spec_validation() {
        assert!(PerturbationSpec::new(&[], 10, 1, 0).validate().is_err());
        assert!(PerturbationSpec::new(&[UposTag::Noun], 0, 1, 0).validate().is_err());
        assert!(PerturbationSpec::new(&[UposTag::Noun], 101, 1, 0).validate().is_err());
        assert!(PerturbationSpec::new(&[UposTag::Noun], 10, 0, 0).validate().is_err());
        assert!(PerturbationSpec::new(&[UposTag::Noun], 10, 1, 0).validate().is_ok());
    }

    #[test]
    fn study_histogram_invariants() {
        let model = trained_model();
        let reviews: Vec<_> = (0..6).map(|i| sentiment_review(i, i % 2 == 0)).collect();
        let hist = random_attack_study(&model, &reviews, 2, 10, 7).unwrap();
        assert_eq!(hist.attempts, 60);
        for (tag, row) in &hist.counts {
            let sum: u64 = row.iter().sum();
            assert_eq!(sum, hist.successes, "row sum for {tag}");
        }
        let csv = hist.to_csv();
        assert!(csv.starts_with("tag,0,1,2\n"));
        assert_eq!(csv.lines().count(), 11);
    }

    #[test]
    fn study_skips_short_reviews() {
        let model = trained_model();
        let short = review(0, &["good"], &[UposTag::Adj], 1);
        let hist = random_attack_study(&model, &[short], 2, 5, 7).unwrap();
        assert_eq!(hist.skipped_short, 1);
        assert_eq!(hist.attempts, 0);
    }

    #[test]
    fn ratio_base_flag_changes_count() {
        // 10 tokens, 2 candidates: candidate base gives ceil(0.2)=1,
        // review-length base gives ceil(1.0)=1 at 10% but 2 at 20%
        let spec = PerturbationSpec {
            ratio_base: RatioBase::ReviewLength,
            ..PerturbationSpec::new(&[UposTag::Noun], 20, 1, 0)
        };
        assert_eq!(deletion_count_for(&spec, 10, 2), 2);
        let spec2 = PerturbationSpec::new(&[UposTag::Noun], 20, 1, 0);
        assert_eq!(deletion_count_for(&spec2, 10, 2), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn perturb_preserves_length_and_rest(
            len in 1usize..40,
            seed in 0u64..1000,
        ) {
            let tags: Vec<UposTag> = (0..len)
                .map(|i| UposTag::STUDIED[i % 10])
                .collect();
            let words: Vec<String> = (0..len).map(|i| format!("w{i}")).collect();
            let word_refs: Vec<&str> = words.iter().map(|s| s.as_str()).collect();
            let r = review(0, &word_refs, &tags, 0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = (seed as usize) % (len + 1);
            let positions = sample(&mut rng, len, k).into_vec();
            let (manipulated, deleted) = perturb(&r, &positions).unwrap();
            prop_assert_eq!(manipulated.len(), len);
            prop_assert_eq!(deleted.len(), k);
            let set: BTreeSet<usize> = positions.iter().copied().collect();
            for (i, tok) in manipulated.iter().enumerate() {
                if set.contains(&i) {
                    prop_assert_eq!(tok.as_str(), PLACEHOLDER_TOKEN);
                } else {
                    prop_assert_eq!(tok.as_str(), r.tokens.0[i].as_str());
                }
            }
            // deleted is ascending by position
            for w in deleted.windows(2) {
                prop_assert!(w[0].pos < w[1].pos);
            }
        }

        #[test]
        fn deletion_count_law(r in 1u32..=100, c in 0usize..500) {
            let n = deletion_count(r, c);
            prop_assert!(n <= c);
            if c > 0 {
                prop_assert!(n >= 1);
                // n is the exact ceiling of r*c/100 (before the cap):
                // smallest integer with n*100 >= r*c
                let exact = r as usize * c;
                if n < c {
                    prop_assert!(n * 100 >= exact);
                    prop_assert!((n - 1) * 100 < exact);
                }
            } else {
                prop_assert_eq!(n, 0);
            }
        }
    }
}
