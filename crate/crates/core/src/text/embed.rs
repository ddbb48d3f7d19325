use super::{TextError, Vocabulary, PAD_INDEX, PLACEHOLDER_INDEX};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader};
use std::path::Path;

/// Dense word-embedding matrix aligned with a [`Vocabulary`].
///
/// The PAD and PLACEHOLDER rows are all-zero, so padding and deleted words
/// contribute nothing through convolution and max-pooling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    /// |vocab| x dim, row-major.
    pub matrix: Vec<f32>,
}

impl EmbeddingTable {
    /// Load pretrained vectors (`word f1 .. fD` per line) for every vocabulary
    /// word found in the file. Words not in the file get small uniform random
    /// rows from the given seed; PAD and PLACEHOLDER rows stay zero.
    pub fn load(
        path: &Path,
        dim: usize,
        vocab: &Vocabulary,
        seed: u64,
    ) -> Result<Self, TextError> {
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);

        let mut table = Self::seeded_random(vocab, dim, seed);
        for (line_no, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields
                .next()
                .ok_or(TextError::MalformedLine(line_no + 1))?;
            let values: Result<Vec<f32>, _> = fields.map(|f| f.parse::<f32>()).collect();
            let values = values.map_err(|_| TextError::MalformedLine(line_no + 1))?;
            if values.len() != dim {
                return Err(TextError::DimensionMismatch {
                    found: values.len(),
                    requested: dim,
                });
            }
            let idx = vocab.lookup(word);
            if idx >= 3 {
                table.matrix[idx as usize * dim..(idx as usize + 1) * dim]
                    .copy_from_slice(&values);
            }
        }
        Ok(table)
    }

    /// All-random table (uniform +-0.05) for runs without a pretrained file.
    /// PAD and PLACEHOLDER rows are zero, reserved OOV gets a random row.
    pub fn seeded_random(vocab: &Vocabulary, dim: usize, seed: u64) -> Self {
        assert!(dim >= 1);
        let size = vocab.size();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut matrix = vec![0.0f32; size * dim];
        for row in 0..size {
            if row as u32 == PAD_INDEX || row as u32 == PLACEHOLDER_INDEX {
                continue;
            }
            for v in &mut matrix[row * dim..(row + 1) * dim] {
                *v = rng.gen_range(-0.05..0.05);
            }
        }
        EmbeddingTable { dim, matrix }
    }

    pub fn row(&self, index: u32) -> &[f32] {
        let i = index as usize;
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> usize {
        self.matrix.len() / self.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::TokenSeq;
    use std::io::Write;

    fn vocab(words: &[&str]) -> Vocabulary {
        let seq = TokenSeq(words.iter().map(|s| s.to_string()).collect());
        Vocabulary::build(&[seq], 1).unwrap()
    }

    fn write_file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn copies_file_vectors_verbatim() {
        let v = vocab(&["the"]);
        let f = write_file("the 0.1 0.2\n");
        let table = EmbeddingTable::load(f.path(), 2, &v, 7).unwrap();
        assert_eq!(table.row(v.lookup("the")), &[0.1, 0.2]);
    }

    #[test]
    fn pad_and_placeholder_rows_zero() {
        let v = vocab(&["the"]);
        let f = write_file("the 0.1 0.2\n");
        let table = EmbeddingTable::load(f.path(), 2, &v, 7).unwrap();
        assert_eq!(table.row(PAD_INDEX), &[0.0, 0.0]);
        assert_eq!(table.row(PLACEHOLDER_INDEX), &[0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let v = vocab(&["the"]);
        let f = write_file("the 0.1\n");
        let err = EmbeddingTable::load(f.path(), 2, &v, 7).unwrap_err();
        assert!(matches!(err, TextError::DimensionMismatch { found: 1, requested: 2 }));
    }

    #[test]
    fn malformed_line_reports_number() {
        let v = vocab(&["the"]);
        let f = write_file("the 0.1 0.2\nbroken 0.3 oops\n");
        let err = EmbeddingTable::load(f.path(), 2, &v, 7).unwrap_err();
        assert!(matches!(err, TextError::MalformedLine(2)));
    }

    #[test]
    fn unmatched_words_get_small_seeded_rows() {
        let v = vocab(&["the", "unseen"]);
        let f = write_file("the 0.1 0.2\n");
        let a = EmbeddingTable::load(f.path(), 2, &v, 7).unwrap();
        let b = EmbeddingTable::load(f.path(), 2, &v, 7).unwrap();
        let row = a.row(v.lookup("unseen"));
        assert!(row.iter().any(|&x| x != 0.0));
        assert!(row.iter().all(|&x| x.abs() < 0.05));
        assert_eq!(a.matrix, b.matrix, "same seed, same table");
    }
}
