//! The victim classifier: embedding -> same-padded 1D convolution (ReLU) ->
//! batch norm -> dropout -> global max-pool -> dense sigmoid, trained with
//! Adam on binary cross-entropy and early stopping on validation loss.

mod config;

pub use config::ModelConfig;

use crate::nn::{
    adam_step, batch_norm_backward, batch_norm_forward, bce_grad, bce_loss, conv1d_backward,
    conv1d_forward, dense_sigmoid_backward, dense_sigmoid_forward, dropout_backward,
    dropout_forward, global_max_pool, global_max_pool_backward, read_checkpoint,
    write_checkpoint, AdamHyper, AdamState, BatchNormParams, Conv1dCache, Conv1dParams,
    DenseParams, Mode, NnError, Tensor,
};
use crate::seed::derive_seed;
use crate::text::{EmbeddingTable, IdSeq, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("embedding dimension mismatch: table has {table}, config wants {config}")]
    DimensionMismatch { table: usize, config: usize },
    #[error("insufficient training data: need at least {need}, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-epoch training record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// Accuracy plus confusion counts, with per-example outputs retained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_pos: usize,
    pub probas: Vec<f32>,
    pub preds: Vec<u8>,
}

#[derive(Clone)]
struct ParamSnapshot {
    embedding: Tensor<f32>,
    conv: Conv1dParams<f32>,
    bn: BatchNormParams<f32>,
    dense: DenseParams<f32>,
}

#[derive(Debug)]
pub struct SentimentModel {
    pub vocab: Vocabulary,
    /// `[vocab, dim]` word vectors, trainable unless frozen by config.
    pub embedding: Tensor<f32>,
    pub conv: Conv1dParams<f32>,
    pub bn: BatchNormParams<f32>,
    pub dense: DenseParams<f32>,
    pub config: ModelConfig,
    pub history: Vec<EpochStats>,
    trained: bool,
}

/// Decision rule on the sigmoid output; the boundary itself goes to class 1.
pub fn classify(proba: f32, threshold: f64) -> u8 {
    if f64::from(proba) >= threshold {
        1
    } else {
        0
    }
}

fn glorot_uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Tensor<f32> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-limit..limit) as f32).collect();
    Tensor::new(shape, data)
}

struct ForwardCache {
    conv_caches: Vec<Conv1dCache<f32>>,
    bn_cache: crate::nn::BatchNormCache<f32>,
    dropout_mask: crate::nn::DropoutMask<f32>,
    argmax: Vec<Vec<usize>>,
    pooled: Vec<Tensor<f32>>,
    probas: Vec<f32>,
}

struct OptState {
    hyper: AdamHyper,
    emb: AdamState<f32>,
    conv_w: AdamState<f32>,
    conv_b: AdamState<f32>,
    gamma: AdamState<f32>,
    beta: AdamState<f32>,
    dense_w: AdamState<f32>,
    dense_b: AdamState<f32>,
}

impl SentimentModel {
    /// Assemble an untrained model with seed-driven glorot initialization for
    /// the conv and dense layers and embedding rows copied from the table.
    pub fn build(
        config: ModelConfig,
        vocab: Vocabulary,
        embeddings: &EmbeddingTable,
    ) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        if embeddings.dim != config.embedding_dim {
            return Err(ModelError::DimensionMismatch {
                table: embeddings.dim,
                config: config.embedding_dim,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "model-init", &[]));
        let (k, d, nf) = (config.kernel_size, config.embedding_dim, config.filters);
        let conv = Conv1dParams::new(
            glorot_uniform(&mut rng, vec![k, d, nf], k * d, k * nf),
            Tensor::zeros(vec![nf]),
        )?;
        let dense = DenseParams::new(
            glorot_uniform(&mut rng, vec![nf, 1], nf, 1),
            Tensor::zeros(vec![1]),
        )?;
        let embedding = Tensor::new(
            vec![embeddings.rows(), embeddings.dim],
            embeddings.matrix.clone(),
        );
        Ok(SentimentModel {
            vocab,
            embedding,
            conv,
            bn: BatchNormParams::new(nf),
            dense,
            config,
            history: Vec::new(),
            trained: false,
        })
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Test-only escape hatch: mark an untrained model as servable.
    pub fn force_trained(&mut self) {
        self.trained = true;
    }

    fn embed(&self, ids: &IdSeq) -> Tensor<f32> {
        let d = self.config.embedding_dim;
        let mut out = Tensor::zeros(vec![ids.len(), d]);
        {
            let o = out.data_mut();
            let e = self.embedding.data();
            for (t, &id) in ids.iter().enumerate() {
                let row = id as usize * d;
                o[t * d..(t + 1) * d].copy_from_slice(&e[row..row + d]);
            }
        }
        out
    }

    fn forward_batch(
        &mut self,
        batch: &[&IdSeq],
        mode: Mode,
        dropout_rng: &mut ChaCha8Rng,
    ) -> Result<ForwardCache, ModelError> {
        let b = batch.len();
        let len = self.config.max_len;
        let nf = self.config.filters;

        let embedded: Vec<Tensor<f32>> =
            batch.iter().map(|ids| self.embed(ids)).collect();

        let mut conv_out = Tensor::zeros(vec![b, len, nf]);
        let mut conv_caches = Vec::with_capacity(b);
        for (i, x) in embedded.iter().enumerate() {
            let (out, cache) = conv1d_forward(x, &self.conv)?;
            conv_out.data_mut()[i * len * nf..(i + 1) * len * nf]
                .copy_from_slice(out.data());
            conv_caches.push(cache);
        }

        let (bn_out, bn_cache) = batch_norm_forward(&conv_out, &mut self.bn, mode)?;
        let (dropped, dropout_mask) =
            dropout_forward(&bn_out, self.config.dropout_rate, mode, dropout_rng);

        let mut argmax = Vec::with_capacity(b);
        let mut pooled = Vec::with_capacity(b);
        let mut probas = Vec::with_capacity(b);
        for i in 0..b {
            let slice = Tensor::new(
                vec![len, nf],
                dropped.data()[i * len * nf..(i + 1) * len * nf].to_vec(),
            );
            let (pool, arg) = global_max_pool(&slice)?;
            let p = dense_sigmoid_forward(&pool, &self.dense)?;
            argmax.push(arg);
            pooled.push(pool);
            probas.push(p);
        }

        Ok(ForwardCache {
            conv_caches,
            bn_cache,
            dropout_mask,
            argmax,
            pooled,
            probas,
        })
    }

    fn train_batch(
        &mut self,
        batch: &[&IdSeq],
        labels: &[u8],
        dropout_rng: &mut ChaCha8Rng,
        opt: &mut OptState,
    ) -> Result<(f64, usize), ModelError> {
        let b = batch.len();
        let len = self.config.max_len;
        let nf = self.config.filters;
        let d = self.config.embedding_dim;

        let cache = self.forward_batch(batch, Mode::Train, dropout_rng)?;

        let y = Tensor::new(vec![b], labels.iter().map(|&l| f32::from(l)).collect());
        let yhat = Tensor::new(vec![b], cache.probas.clone());
        let loss = bce_loss(&y, &yhat)?;
        let gp = bce_grad(&y, &yhat)?;
        let correct = cache
            .probas
            .iter()
            .zip(labels)
            .filter(|(&p, &l)| classify(p, self.config.threshold) == l)
            .count();

        // dense + pool backward, per example
        let mut dense_gw = Tensor::zeros(self.dense.weight.shape().to_vec());
        let mut dense_gb = Tensor::zeros(vec![1]);
        let mut grad_dropped = Tensor::zeros(vec![b, len, nf]);
        for i in 0..b {
            let (gpool, dg) =
                dense_sigmoid_backward(gp[i], cache.probas[i], &cache.pooled[i], &self.dense)?;
            for (acc, g) in dense_gw.data_mut().iter_mut().zip(dg.weight.data()) {
                *acc += *g;
            }
            dense_gb[0] += dg.bias[0];
            let gslice = global_max_pool_backward(&gpool, &cache.argmax[i], len)?;
            grad_dropped.data_mut()[i * len * nf..(i + 1) * len * nf]
                .copy_from_slice(gslice.data());
        }

        let grad_bn_out = dropout_backward(&grad_dropped, &cache.dropout_mask);
        let (grad_conv_out, bn_grads) =
            batch_norm_backward(&grad_bn_out, &cache.bn_cache, &self.bn)?;

        let mut conv_gw = Tensor::zeros(self.conv.weight.shape().to_vec());
        let mut conv_gb = Tensor::zeros(vec![nf]);
        let mut emb_grad = Tensor::zeros(self.embedding.shape().to_vec());
        for (i, ids) in batch.iter().enumerate() {
            let gslice = Tensor::new(
                vec![len, nf],
                grad_conv_out.data()[i * len * nf..(i + 1) * len * nf].to_vec(),
            );
            let (ginput, cg) = conv1d_backward(&gslice, &cache.conv_caches[i], &self.conv)?;
            for (acc, g) in conv_gw.data_mut().iter_mut().zip(cg.weight.data()) {
                *acc += *g;
            }
            for (acc, g) in conv_gb.data_mut().iter_mut().zip(cg.bias.data()) {
                *acc += *g;
            }
            if !self.config.freeze_embeddings {
                let eg = emb_grad.data_mut();
                let gi = ginput.data();
                for (t, &id) in ids.iter().enumerate() {
                    let row = id as usize * d;
                    for j in 0..d {
                        eg[row + j] += gi[t * d + j];
                    }
                }
            }
        }

        adam_step(&mut self.conv.weight, &conv_gw, &mut opt.conv_w, &opt.hyper)?;
        adam_step(&mut self.conv.bias, &conv_gb, &mut opt.conv_b, &opt.hyper)?;
        adam_step(&mut self.bn.gamma, &bn_grads.gamma, &mut opt.gamma, &opt.hyper)?;
        adam_step(&mut self.bn.beta, &bn_grads.beta, &mut opt.beta, &opt.hyper)?;
        adam_step(&mut self.dense.weight, &dense_gw, &mut opt.dense_w, &opt.hyper)?;
        adam_step(&mut self.dense.bias, &dense_gb, &mut opt.dense_b, &opt.hyper)?;
        if !self.config.freeze_embeddings {
            adam_step(&mut self.embedding, &emb_grad, &mut opt.emb, &opt.hyper)?;
            // keep the PAD and PLACEHOLDER rows pinned at zero
            let d = self.config.embedding_dim;
            for reserved in [crate::text::PAD_INDEX, crate::text::PLACEHOLDER_INDEX] {
                let row = reserved as usize * d;
                self.embedding.data_mut()[row..row + d].iter_mut().for_each(|v| *v = 0.0);
            }
        }

        Ok((loss as f64 * b as f64, correct))
    }

    fn snapshot(&self) -> ParamSnapshot {
        ParamSnapshot {
            embedding: self.embedding.clone(),
            conv: self.conv.clone(),
            bn: self.bn.clone(),
            dense: self.dense.clone(),
        }
    }

    fn restore(&mut self, snap: ParamSnapshot) {
        self.embedding = snap.embedding;
        self.conv = snap.conv;
        self.bn = snap.bn;
        self.dense = snap.dense;
    }

    /// Train with early stopping: stop after `patience` consecutive epochs
    /// without a validation-loss improvement and restore the best epoch's
    /// weights. The validation split is carved deterministically from the
    /// tail of the seed-shuffled training set.
    pub fn train(&mut self, train_set: &[(IdSeq, u8)]) -> Result<(), ModelError> {
        let need = 10 * self.config.batch_size;
        if train_set.len() < need {
            return Err(ModelError::InsufficientData { need, got: train_set.len() });
        }

        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.config.seed, "train-split", &[]));
        shuffle(&mut order, &mut shuffle_rng);
        let val_len = ((train_set.len() as f64) * self.config.val_split).round() as usize;
        let val_len = val_len.clamp(1, train_set.len() - 2);
        let (train_idx, val_idx) = order.split_at(train_set.len() - val_len);
        let train_idx = train_idx.to_vec();
        let val: Vec<&(IdSeq, u8)> = val_idx.iter().map(|&i| &train_set[i]).collect();

        let hyper = AdamHyper::with_lr(self.config.lr);
        let mut opt = OptState {
            hyper,
            emb: AdamState::for_param(&self.embedding),
            conv_w: AdamState::for_param(&self.conv.weight),
            conv_b: AdamState::for_param(&self.conv.bias),
            gamma: AdamState::for_param(&self.bn.gamma),
            beta: AdamState::for_param(&self.bn.beta),
            dense_w: AdamState::for_param(&self.dense.weight),
            dense_b: AdamState::for_param(&self.dense.bias),
        };

        let mut best_val = f64::INFINITY;
        let mut best_snap: Option<ParamSnapshot> = None;
        let mut epochs_without_improvement = 0;
        self.history.clear();

        for epoch in 0..self.config.max_epochs {
            let mut epoch_order = train_idx.clone();
            let mut epoch_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                self.config.seed,
                "train-epoch",
                &[epoch as u64],
            ));
            shuffle(&mut epoch_order, &mut epoch_rng);
            let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                self.config.seed,
                "dropout",
                &[epoch as u64],
            ));

            let mut loss_sum = 0.0;
            let mut correct = 0;
            let mut seen = 0;
            for chunk in epoch_order.chunks(self.config.batch_size) {
                if chunk.len() < 2 {
                    continue; // train-mode batch norm needs at least 2 examples
                }
                let batch: Vec<&IdSeq> = chunk.iter().map(|&i| &train_set[i].0).collect();
                let labels: Vec<u8> = chunk.iter().map(|&i| train_set[i].1).collect();
                let (batch_loss, batch_correct) =
                    self.train_batch(&batch, &labels, &mut dropout_rng, &mut opt)?;
                loss_sum += batch_loss;
                correct += batch_correct;
                seen += chunk.len();
            }
            let train_loss = loss_sum / seen.max(1) as f64;
            let train_acc = correct as f64 / seen.max(1) as f64;

            let (val_loss, val_acc) = self.eval_loss_acc(&val)?;
            self.history.push(EpochStats { epoch, train_loss, val_loss, train_acc, val_acc });

            if val_loss < best_val {
                best_val = val_loss;
                best_snap = Some(self.snapshot());
                epochs_without_improvement = 0;
            } else {
                epochs_without_improvement += 1;
                if epochs_without_improvement >= self.config.patience {
                    break;
                }
            }
        }

        if let Some(snap) = best_snap {
            self.restore(snap);
        }
        self.trained = true;
        Ok(())
    }

    fn eval_loss_acc(&mut self, examples: &[&(IdSeq, u8)]) -> Result<(f64, f64), ModelError> {
        let ids: Vec<&IdSeq> = examples.iter().map(|e| &e.0).collect();
        let probas = self.eval_forward(&ids)?;
        let y = Tensor::new(
            vec![examples.len()],
            examples.iter().map(|e| f32::from(e.1)).collect(),
        );
        let yhat = Tensor::new(vec![examples.len()], probas.clone());
        let loss = bce_loss(&y, &yhat)? as f64;
        let correct = probas
            .iter()
            .zip(examples)
            .filter(|(&p, e)| classify(p, self.config.threshold) == e.1)
            .count();
        Ok((loss, correct as f64 / examples.len().max(1) as f64))
    }

    fn eval_forward(&self, reviews: &[&IdSeq]) -> Result<Vec<f32>, ModelError> {
        // eval mode touches no state; dropout is identity and batch norm uses
        // running stats, so batching is just a loop
        let mut probas = Vec::with_capacity(reviews.len());
        let mut bn = self.bn.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for ids in reviews {
            let x = self.embed(ids);
            let (conv_out, _) = conv1d_forward(&x, &self.conv)?;
            let len = conv_out.shape()[0];
            let nf = conv_out.shape()[1];
            let as3 = Tensor::new(vec![1, len, nf], conv_out.data().to_vec());
            let (bn_out, _) = batch_norm_forward(&as3, &mut bn, Mode::Eval)?;
            let (dropped, _) =
                dropout_forward(&bn_out, self.config.dropout_rate, Mode::Eval, &mut rng);
            let slice = Tensor::new(vec![len, nf], dropped.data().to_vec());
            let (pool, _) = global_max_pool(&slice)?;
            probas.push(dense_sigmoid_forward(&pool, &self.dense)?);
        }
        Ok(probas)
    }

    /// Black-box prediction surface: deterministic, order-preserving, eval
    /// mode only. This is the sole entry point the attack phases may use.
    pub fn predict_proba(&self, reviews: &[IdSeq]) -> Result<Vec<f32>, ModelError> {
        if !self.trained {
            return Err(ModelError::UntrainedModel);
        }
        let refs: Vec<&IdSeq> = reviews.iter().collect();
        self.eval_forward(&refs)
    }

    pub fn evaluate(&self, test_set: &[(IdSeq, u8)]) -> Result<EvalReport, ModelError> {
        if test_set.is_empty() {
            return Err(ModelError::EmptyTestSet);
        }
        let ids: Vec<IdSeq> = test_set.iter().map(|e| e.0.clone()).collect();
        let probas = self.predict_proba(&ids)?;
        let preds: Vec<u8> =
            probas.iter().map(|&p| classify(p, self.config.threshold)).collect();
        let mut report = EvalReport {
            accuracy: 0.0,
            true_neg: 0,
            false_pos: 0,
            false_neg: 0,
            true_pos: 0,
            probas,
            preds: preds.clone(),
        };
        for (pred, (_, label)) in preds.iter().zip(test_set) {
            match (label, pred) {
                (0, 0) => report.true_neg += 1,
                (0, 1) => report.false_pos += 1,
                (1, 0) => report.false_neg += 1,
                (1, 1) => report.true_pos += 1,
                _ => unreachable!("labels are binary"),
            }
        }
        report.accuracy =
            (report.true_neg + report.true_pos) as f64 / test_set.len() as f64;
        Ok(report)
    }

    /// Persist as a JSON-header checkpoint (config, vocabulary, history)
    /// followed by the parameter tensors.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let hyper = serde_json::json!({
            "config": self.config,
            "vocab": self.vocab.words(),
            "trained": self.trained,
            "history": self.history,
        });
        write_checkpoint(
            path,
            hyper,
            &[
                ("embedding", &self.embedding),
                ("conv.weight", &self.conv.weight),
                ("conv.bias", &self.conv.bias),
                ("bn.gamma", &self.bn.gamma),
                ("bn.beta", &self.bn.beta),
                ("bn.running_mean", &self.bn.running_mean),
                ("bn.running_var", &self.bn.running_var),
                ("dense.weight", &self.dense.weight),
                ("dense.bias", &self.dense.bias),
            ],
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let ckpt = read_checkpoint(path)?;
        let config: ModelConfig = serde_json::from_value(ckpt.hyper["config"].clone())
            .map_err(|e| ModelError::Config(format!("bad checkpoint config: {e}")))?;
        let words: Vec<String> = serde_json::from_value(ckpt.hyper["vocab"].clone())
            .map_err(|e| ModelError::Config(format!("bad checkpoint vocab: {e}")))?;
        let history: Vec<EpochStats> =
            serde_json::from_value(ckpt.hyper["history"].clone()).unwrap_or_default();
        let trained = ckpt.hyper["trained"].as_bool().unwrap_or(false);
        let vocab = Vocabulary::from_words(words);

        let conv = Conv1dParams::new(
            ckpt.tensor("conv.weight")?.clone(),
            ckpt.tensor("conv.bias")?.clone(),
        )?;
        let mut bn = BatchNormParams::new(config.filters);
        bn.gamma = ckpt.tensor("bn.gamma")?.clone();
        bn.beta = ckpt.tensor("bn.beta")?.clone();
        bn.running_mean = ckpt.tensor("bn.running_mean")?.clone();
        bn.running_var = ckpt.tensor("bn.running_var")?.clone();
        let dense = DenseParams::new(
            ckpt.tensor("dense.weight")?.clone(),
            ckpt.tensor("dense.bias")?.clone(),
        )?;
        Ok(SentimentModel {
            vocab,
            embedding: ckpt.tensor("embedding")?.clone(),
            conv,
            bn,
            dense,
            config,
            history,
            trained,
        })
    }

    /// Training history as CSV (epoch, train_loss, val_loss, train_acc, val_acc).
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,train_acc,val_acc\n");
        for s in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.epoch, s.train_loss, s.val_loss, s.train_acc, s.val_acc
            ));
        }
        out
    }
}

/// Fisher-Yates with an explicit rng so shuffles are reproducible.
pub fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::TokenSeq;

    fn tiny_vocab() -> (Vocabulary, EmbeddingTable) {
        let corpus = vec![TokenSeq(vec!["good".into(), "bad".into(), "pad".into()])];
        let vocab = Vocabulary::build(&corpus, 1).unwrap();
        let table = EmbeddingTable::seeded_random(&vocab, 8, 3);
        (vocab, table)
    }

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            max_len: 6,
            embedding_dim: 8,
            filters: 4,
            kernel_size: 3,
            batch_size: 4,
            max_epochs: 10,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn conv_weight_shape_follows_config() {
        let (vocab, table) = tiny_vocab();
        let model = SentimentModel::build(tiny_config(), vocab, &table).unwrap();
        assert_eq!(model.conv.weight.shape(), &[3, 8, 4]);
    }

    #[test]
    fn same_seed_identical_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let (vocab, table) = tiny_vocab();
        let a = SentimentModel::build(tiny_config(), vocab.clone(), &table).unwrap();
        let b = SentimentModel::build(tiny_config(), vocab, &table).unwrap();
        let pa = dir.path().join("a.ckpt");
        let pb = dir.path().join("b.ckpt");
        a.save(&pa).unwrap();
        b.save(&pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    }

    #[test]
    fn dim_mismatch_rejected() {
        let (vocab, _) = tiny_vocab();
        let table = EmbeddingTable::seeded_random(&vocab, 4, 3);
        let err = SentimentModel::build(tiny_config(), vocab, &table).unwrap_err();
        assert!(matches!(err, ModelError::DimensionMismatch { table: 4, config: 8 }));
    }

    fn separable_set(vocab: &Vocabulary, n: usize, max_len: usize) -> Vec<(IdSeq, u8)> {
        // word "good" => label 1, word "bad" => label 0
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let word = if label == 1 { "good" } else { "bad" };
                let seq = TokenSeq(vec![word.to_string(), "pad".to_string()]);
                (vocab.encode(&seq, max_len), label)
            })
            .collect()
    }

    #[test]
    fn learns_separable_corpus() {
        let (vocab, table) = tiny_vocab();
        let config = tiny_config();
        let mut model = SentimentModel::build(config, vocab.clone(), &table).unwrap();
        let train = separable_set(&vocab, 200, 6);
        model.train(&train).unwrap();
        let report = model.evaluate(&train).unwrap();
        assert!(report.accuracy >= 0.99, "train accuracy = {}", report.accuracy);
    }

    #[test]
    fn insufficient_data_rejected() {
        let (vocab, table) = tiny_vocab();
        let mut model = SentimentModel::build(tiny_config(), vocab.clone(), &table).unwrap();
        let train = separable_set(&vocab, 10, 6);
        assert!(matches!(
            model.train(&train),
            Err(ModelError::InsufficientData { .. })
        ));
    }

    #[test]
    fn untrained_model_rejects_predict() {
        let (vocab, table) = tiny_vocab();
        let model = SentimentModel::build(tiny_config(), vocab, &table).unwrap();
        assert!(matches!(
            model.predict_proba(&[vec![0, 0, 0, 0, 0, 0]]),
            Err(ModelError::UntrainedModel)
        ));
    }

    #[test]
    fn predict_is_deterministic_and_order_preserving() {
        let (vocab, table) = tiny_vocab();
        let config = tiny_config();
        let mut model = SentimentModel::build(config, vocab.clone(), &table).unwrap();
        let train = separable_set(&vocab, 200, 6);
        model.train(&train).unwrap();
        let a = vocab.encode(&TokenSeq(vec!["good".into()]), 6);
        let b = vocab.encode(&TokenSeq(vec!["bad".into()]), 6);
        let p1 = model.predict_proba(&[a.clone(), b.clone()]).unwrap();
        let p2 = model.predict_proba(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(p1, p2);
        // batch of 1 equals the same review inside a larger batch
        let solo = model.predict_proba(std::slice::from_ref(&a)).unwrap();
        assert!((solo[0] - p1[0]).abs() < 1e-6);
        // all-PAD input is still a finite probability
        let pad = model.predict_proba(&[vec![0; 6]]).unwrap();
        assert!(pad[0].is_finite() && pad[0] > 0.0 && pad[0] < 1.0);
    }

    #[test]
    fn classify_boundary_goes_up() {
        assert_eq!(classify(0.5, 0.5), 1);
        assert_eq!(classify(0.499, 0.5), 0);
    }

    #[test]
    fn evaluate_counts_confusion() {
        let (vocab, table) = tiny_vocab();
        let mut model = SentimentModel::build(tiny_config(), vocab.clone(), &table).unwrap();
        let train = separable_set(&vocab, 200, 6);
        model.train(&train).unwrap();
        let report = model.evaluate(&train[..10]).unwrap();
        assert_eq!(
            report.true_neg + report.false_pos + report.false_neg + report.true_pos,
            10
        );
        assert!((report.accuracy - 1.0).abs() < 1e-9);
        assert!(matches!(model.evaluate(&[]), Err(ModelError::EmptyTestSet)));
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let (vocab, table) = tiny_vocab();
        let mut model = SentimentModel::build(tiny_config(), vocab.clone(), &table).unwrap();
        let train = separable_set(&vocab, 200, 6);
        model.train(&train).unwrap();
        let path = dir.path().join("model.ckpt");
        model.save(&path).unwrap();
        let loaded = SentimentModel::load(&path).unwrap();
        let x = vocab.encode(&TokenSeq(vec!["good".into()]), 6);
        assert_eq!(
            model.predict_proba(std::slice::from_ref(&x)).unwrap(),
            loaded.predict_proba(&[x]).unwrap()
        );
    }
}
