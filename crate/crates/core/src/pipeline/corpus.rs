//! Seeded synthetic review corpus for desk-scale runs. Each review carries
//! exactly one strong polarity word that decides its label, surrounded by
//! neutral movie vocabulary and a balanced pair of weak qualifiers, so the
//! corpus is learnable by the classifier and attackable by targeted
//! deletion of verbs, adjectives and nouns.

use crate::pipeline::dataset::LabelScheme;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

// strong words span all three targeted tags so that every POS-set
// configuration of the sweep has reviews it can flip
const STRONG_POS_ADJ: [&str; 3] = ["excellent", "superb", "wonderful"];
const STRONG_POS_VERB: [&str; 3] = ["impress", "captivate", "enjoy"];
const STRONG_POS_NOUN: [&str; 3] = ["masterpiece", "triumph", "gem"];
const STRONG_NEG_ADJ: [&str; 3] = ["terrible", "awful", "dreadful"];
const STRONG_NEG_VERB: [&str; 3] = ["bore", "disappoint", "ruin"];
const STRONG_NEG_NOUN: [&str; 3] = ["disaster", "failure", "flop"];
const NOUNS: [&str; 12] = [
    "film", "movie", "plot", "story", "acting", "script", "ending", "scene", "director",
    "cast", "dialogue", "music",
];
const NEUTRAL_VERBS: [&str; 6] = ["watch", "see", "show", "play", "think", "say"];
// weak qualifiers appear in both classes so they carry no label signal
const WEAK_A: [&str; 4] = ["slow", "flat", "long", "short"];
const WEAK_B: [&str; 4] = ["fine", "fresh", "crisp", "clever"];

/// One synthetic review: the text plus its binary label.
pub fn synthetic_review(rng: &mut ChaCha8Rng, label: u8) -> String {
    let kind = rng.gen_range(0..3);
    let pool: &[&str] = match (label, kind) {
        (1, 0) => &STRONG_POS_ADJ,
        (1, 1) => &STRONG_POS_VERB,
        (1, _) => &STRONG_POS_NOUN,
        (_, 0) => &STRONG_NEG_ADJ,
        (_, 1) => &STRONG_NEG_VERB,
        (_, _) => &STRONG_NEG_NOUN,
    };
    let strong = pool[rng.gen_range(0..pool.len())];
    let noun = |rng: &mut ChaCha8Rng| NOUNS[rng.gen_range(0..NOUNS.len())];
    let verb = |rng: &mut ChaCha8Rng| NEUTRAL_VERBS[rng.gen_range(0..NEUTRAL_VERBS.len())];

    let strong_clause = match kind {
        0 => format!("the {} is {}", noun(rng), strong),
        1 => format!("i {} the {}", strong, noun(rng)),
        _ => format!("the {} is a {}", noun(rng), strong),
    };
    let mut clauses = vec![strong_clause];
    for _ in 0..rng.gen_range(1..=3) {
        clauses.push(format!("i {} the {}", verb(rng), noun(rng)));
    }
    clauses.push(format!(
        "the {} is {} and the {} is {}",
        noun(rng),
        WEAK_A[rng.gen_range(0..WEAK_A.len())],
        noun(rng),
        WEAK_B[rng.gen_range(0..WEAK_B.len())],
    ));
    // clause order varies but the strong clause stays somewhere inside
    let pivot = rng.gen_range(0..clauses.len());
    clauses.swap(0, pivot);
    clauses.join(" ")
}

/// Balanced labeled corpus: `n` reviews, alternating labels.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<(u8, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            (label, synthetic_review(&mut rng, label))
        })
        .collect()
}

/// Write rows as a two-column CSV with labels in the given scheme.
pub fn write_corpus_csv(
    path: &Path,
    rows: &[(u8, String)],
    scheme: LabelScheme,
) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut writer = csv::Writer::from_writer(&mut file);
    for (label, text) in rows {
        let raw = match scheme {
            LabelScheme::ZeroOne => label.to_string(),
            LabelScheme::OneTwo => (label + 1).to_string(),
        };
        writer
            .write_record([raw.as_str(), text.as_str()])
            .map_err(std::io::Error::other)?;
    }
    writer.flush()?;
    drop(writer);
    file.flush()
}
