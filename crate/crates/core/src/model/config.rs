use serde::{Deserialize, Serialize};

/// Hyperparameters for the sentiment classifier and its training loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub max_len: usize,
    pub embedding_dim: usize,
    pub filters: usize,
    pub kernel_size: usize,
    pub dropout_rate: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early-stopping patience in epochs.
    pub patience: usize,
    /// Decision boundary on the sigmoid output.
    pub threshold: f64,
    pub seed: u64,
    /// Keep the pretrained embedding rows fixed during training.
    pub freeze_embeddings: bool,
    /// Fraction of the training set carved off for validation.
    pub val_split: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_len: 400,
            embedding_dim: 100,
            filters: 100,
            kernel_size: 5,
            dropout_rate: 0.5,
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 20,
            patience: 3,
            threshold: 0.5,
            seed: 0,
            freeze_embeddings: false,
            val_split: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_len == 0
            || self.embedding_dim == 0
            || self.filters == 0
            || self.kernel_size == 0
            || self.batch_size == 0
            || self.max_epochs == 0
            || self.patience == 0
        {
            return Err("all size hyperparameters must be positive".into());
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err("kernel size must be odd".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err("dropout rate must be in [0, 1)".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err("threshold must be in (0, 1)".into());
        }
        if !(self.val_split > 0.0 && self.val_split < 1.0) {
            return Err("val_split must be in (0, 1)".into());
        }
        if self.lr <= 0.0 {
            return Err("learning rate must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        assert!(ModelConfig::default().validate().is_ok());
    }

    #[test]
    fn even_kernel_rejected() {
        let cfg = ModelConfig { kernel_size: 4, ..ModelConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
