//! Phase 2: a two-branch network that learns, from the labeled dataset of
//! phase 1, which deletion sets fool the classifier. Branch A encodes the
//! original review and branch B the manipulated one; pooled branch outputs
//! are concatenated and passed through a small dense stack.

use crate::attack::phase1::AdvDatasetRecord;
use crate::model::{classify, shuffle, ModelConfig};
use crate::nn::{
    adam_step, bce_grad, bce_loss, conv1d_backward, conv1d_forward, dense_sigmoid_backward,
    dense_sigmoid_forward, global_max_pool, global_max_pool_backward, read_checkpoint,
    write_checkpoint, AdamHyper, AdamState, Conv1dParams, DenseParams, NnError, Tensor,
};
use crate::seed::derive_seed;
use crate::text::{EmbeddingTable, IdSeq, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Phase2Error {
    #[error("embedding dimension mismatch: table has {table}, config wants {config}")]
    DimensionMismatch { table: usize, config: usize },
    #[error("dataset contains a single label class ({0})")]
    SingleClassDataset(u8),
    #[error("adversarial net has not been trained")]
    UntrainedModel,
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

/// Hyperparameters: the classifier knob set plus the fusion layer width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvNetConfig {
    pub model: ModelConfig,
    pub fusion_width: usize,
}

impl AdvNetConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.model.validate()?;
        if self.fusion_width == 0 {
            return Err("fusion width must be positive".into());
        }
        Ok(())
    }
}

impl Default for AdvNetConfig {
    fn default() -> Self {
        AdvNetConfig { model: ModelConfig::default(), fusion_width: 64 }
    }
}

pub struct AdvNet {
    pub vocab: Vocabulary,
    /// Shared across branches and frozen during training.
    pub embedding: Tensor<f32>,
    pub conv_a: Conv1dParams<f32>,
    pub conv_b: Conv1dParams<f32>,
    /// First fusion layer, ReLU, input width 2 x filters.
    pub fusion: DenseParams<f32>,
    /// Output layer, sigmoid.
    pub head: DenseParams<f32>,
    pub config: AdvNetConfig,
    trained: bool,
}

fn glorot(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize, fan_out: usize) -> Tensor<f32> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len).map(|_| rng.gen_range(-limit..limit) as f32).collect();
    Tensor::new(shape, data)
}

fn dense_relu_forward(
    input: &Tensor<f32>,
    params: &DenseParams<f32>,
) -> Result<Tensor<f32>, NnError> {
    if input.shape() != [params.d_in()] {
        return Err(NnError::ShapeMismatch(format!(
            "fusion input must be [{}], got {:?}",
            params.d_in(),
            input.shape()
        )));
    }
    let (din, dout) = (params.d_in(), params.d_out());
    let mut out = Tensor::zeros(vec![dout]);
    let w = params.weight.data();
    for j in 0..dout {
        let mut z = params.bias[j];
        for i in 0..din {
            z += input[i] * w[i * dout + j];
        }
        out[j] = z.max(0.0);
    }
    Ok(out)
}

fn dense_relu_backward(
    grad_out: &Tensor<f32>,
    output: &Tensor<f32>,
    input: &Tensor<f32>,
    params: &DenseParams<f32>,
) -> (Tensor<f32>, Tensor<f32>, Tensor<f32>) {
    let (din, dout) = (params.d_in(), params.d_out());
    let mut grad_input = Tensor::zeros(vec![din]);
    let mut grad_w = Tensor::zeros(vec![din, dout]);
    let mut grad_b = Tensor::zeros(vec![dout]);
    let w = params.weight.data();
    for j in 0..dout {
        // ReLU gate: the pre-activation was positive iff the output is
        let gz = if output[j] > 0.0 { grad_out[j] } else { 0.0 };
        if gz == 0.0 {
            continue;
        }
        grad_b[j] += gz;
        for i in 0..din {
            grad_w.data_mut()[i * dout + j] += input[i] * gz;
            grad_input[i] += w[i * dout + j] * gz;
        }
    }
    (grad_input, grad_w, grad_b)
}

struct PairCache {
    cache_a: crate::nn::Conv1dCache<f32>,
    cache_b: crate::nn::Conv1dCache<f32>,
    arg_a: Vec<usize>,
    arg_b: Vec<usize>,
    concat: Tensor<f32>,
    hidden: Tensor<f32>,
    proba: f32,
}

struct OptState {
    hyper: AdamHyper,
    conv_a_w: AdamState<f32>,
    conv_a_b: AdamState<f32>,
    conv_b_w: AdamState<f32>,
    conv_b_b: AdamState<f32>,
    fusion_w: AdamState<f32>,
    fusion_b: AdamState<f32>,
    head_w: AdamState<f32>,
    head_b: AdamState<f32>,
}

impl AdvNet {
    pub fn build(
        config: AdvNetConfig,
        vocab: Vocabulary,
        embeddings: &EmbeddingTable,
    ) -> Result<Self, Phase2Error> {
        config.validate().map_err(Phase2Error::Config)?;
        if embeddings.dim != config.model.embedding_dim {
            return Err(Phase2Error::DimensionMismatch {
                table: embeddings.dim,
                config: config.model.embedding_dim,
            });
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.model.seed, "advnet-init", &[]));
        let (k, d, nf) = (
            config.model.kernel_size,
            config.model.embedding_dim,
            config.model.filters,
        );
        let h = config.fusion_width;
        let conv_a = Conv1dParams::new(
            glorot(&mut rng, vec![k, d, nf], k * d, k * nf),
            Tensor::zeros(vec![nf]),
        )?;
        let conv_b = Conv1dParams::new(
            glorot(&mut rng, vec![k, d, nf], k * d, k * nf),
            Tensor::zeros(vec![nf]),
        )?;
        let fusion = DenseParams::new(
            glorot(&mut rng, vec![2 * nf, h], 2 * nf, h),
            Tensor::zeros(vec![h]),
        )?;
        let head =
            DenseParams::new(glorot(&mut rng, vec![h, 1], h, 1), Tensor::zeros(vec![1]))?;
        let embedding = Tensor::new(
            vec![embeddings.rows(), embeddings.dim],
            embeddings.matrix.clone(),
        );
        Ok(AdvNet {
            vocab,
            embedding,
            conv_a,
            conv_b,
            fusion,
            head,
            config,
            trained: false,
        })
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn force_trained(&mut self) {
        self.trained = true;
    }

    fn embed(&self, ids: &IdSeq) -> Tensor<f32> {
        let d = self.config.model.embedding_dim;
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

    fn forward_pair(&self, original: &IdSeq, manipulated: &IdSeq) -> Result<PairCache, Phase2Error> {
        let nf = self.config.model.filters;
        let x_a = self.embed(original);
        let x_b = self.embed(manipulated);
        let (out_a, cache_a) = conv1d_forward(&x_a, &self.conv_a)?;
        let (out_b, cache_b) = conv1d_forward(&x_b, &self.conv_b)?;
        let (pool_a, arg_a) = global_max_pool(&out_a)?;
        let (pool_b, arg_b) = global_max_pool(&out_b)?;
        let mut concat = Tensor::zeros(vec![2 * nf]);
        concat.data_mut()[..nf].copy_from_slice(pool_a.data());
        concat.data_mut()[nf..].copy_from_slice(pool_b.data());
        let hidden = dense_relu_forward(&concat, &self.fusion)?;
        let proba = dense_sigmoid_forward(&hidden, &self.head)?;
        Ok(PairCache { cache_a, cache_b, arg_a, arg_b, concat, hidden, proba })
    }

    /// Likelihood that the (original, manipulated) pair fools the victim.
    /// Branch A always receives the original review.
    pub fn score(&self, original: &IdSeq, manipulated: &IdSeq) -> Result<f32, Phase2Error> {
        if !self.trained {
            return Err(Phase2Error::UntrainedModel);
        }
        Ok(self.forward_pair(original, manipulated)?.proba)
    }

    /// Order-preserving batch scoring.
    pub fn score_batch(&self, pairs: &[(IdSeq, IdSeq)]) -> Result<Vec<f32>, Phase2Error> {
        pairs.iter().map(|(o, m)| self.score(o, m)).collect()
    }

    fn train_batch(
        &mut self,
        batch: &[&(IdSeq, IdSeq, u8)],
        opt: &mut OptState,
    ) -> Result<(f64, usize), Phase2Error> {
        let nf = self.config.model.filters;
        let len = self.config.model.max_len;

        let caches: Vec<PairCache> = batch
            .iter()
            .map(|(o, m, _)| self.forward_pair(o, m))
            .collect::<Result<_, _>>()?;
        let labels: Vec<f32> = batch.iter().map(|&&(_, _, l)| f32::from(l)).collect();
        let y = Tensor::new(vec![batch.len()], labels);
        let yhat = Tensor::new(vec![batch.len()], caches.iter().map(|c| c.proba).collect());
        let loss = bce_loss(&y, &yhat)?;
        let gp = bce_grad(&y, &yhat)?;
        let correct = caches
            .iter()
            .zip(batch)
            .filter(|(c, &&(_, _, l))| classify(c.proba, self.config.model.threshold) == l)
            .count();

        let mut g_conv_a_w = Tensor::zeros(self.conv_a.weight.shape().to_vec());
        let mut g_conv_a_b = Tensor::zeros(vec![nf]);
        let mut g_conv_b_w = Tensor::zeros(self.conv_b.weight.shape().to_vec());
        let mut g_conv_b_b = Tensor::zeros(vec![nf]);
        let mut g_fusion_w = Tensor::zeros(self.fusion.weight.shape().to_vec());
        let mut g_fusion_b = Tensor::zeros(vec![self.config.fusion_width]);
        let mut g_head_w = Tensor::zeros(self.head.weight.shape().to_vec());
        let mut g_head_b = Tensor::zeros(vec![1]);

        for (i, cache) in caches.iter().enumerate() {
            let (g_hidden, dg) =
                dense_sigmoid_backward(gp[i], cache.proba, &cache.hidden, &self.head)?;
            for (acc, g) in g_head_w.data_mut().iter_mut().zip(dg.weight.data()) {
                *acc += *g;
            }
            g_head_b[0] += dg.bias[0];

            let (g_concat, g_fw, g_fb) =
                dense_relu_backward(&g_hidden, &cache.hidden, &cache.concat, &self.fusion);
            for (acc, g) in g_fusion_w.data_mut().iter_mut().zip(g_fw.data()) {
                *acc += *g;
            }
            for (acc, g) in g_fusion_b.data_mut().iter_mut().zip(g_fb.data()) {
                *acc += *g;
            }

            let g_pool_a = Tensor::new(vec![nf], g_concat.data()[..nf].to_vec());
            let g_pool_b = Tensor::new(vec![nf], g_concat.data()[nf..].to_vec());
            let g_conv_out_a = global_max_pool_backward(&g_pool_a, &cache.arg_a, len)?;
            let g_conv_out_b = global_max_pool_backward(&g_pool_b, &cache.arg_b, len)?;
            let (_, cg_a) = conv1d_backward(&g_conv_out_a, &cache.cache_a, &self.conv_a)?;
            let (_, cg_b) = conv1d_backward(&g_conv_out_b, &cache.cache_b, &self.conv_b)?;
            for (acc, g) in g_conv_a_w.data_mut().iter_mut().zip(cg_a.weight.data()) {
                *acc += *g;
            }
            for (acc, g) in g_conv_a_b.data_mut().iter_mut().zip(cg_a.bias.data()) {
                *acc += *g;
            }
            for (acc, g) in g_conv_b_w.data_mut().iter_mut().zip(cg_b.weight.data()) {
                *acc += *g;
            }
            for (acc, g) in g_conv_b_b.data_mut().iter_mut().zip(cg_b.bias.data()) {
                *acc += *g;
            }
        }

        adam_step(&mut self.conv_a.weight, &g_conv_a_w, &mut opt.conv_a_w, &opt.hyper)?;
        adam_step(&mut self.conv_a.bias, &g_conv_a_b, &mut opt.conv_a_b, &opt.hyper)?;
        adam_step(&mut self.conv_b.weight, &g_conv_b_w, &mut opt.conv_b_w, &opt.hyper)?;
        adam_step(&mut self.conv_b.bias, &g_conv_b_b, &mut opt.conv_b_b, &opt.hyper)?;
        adam_step(&mut self.fusion.weight, &g_fusion_w, &mut opt.fusion_w, &opt.hyper)?;
        adam_step(&mut self.fusion.bias, &g_fusion_b, &mut opt.fusion_b, &opt.hyper)?;
        adam_step(&mut self.head.weight, &g_head_w, &mut opt.head_w, &opt.hyper)?;
        adam_step(&mut self.head.bias, &g_head_b, &mut opt.head_b, &opt.hyper)?;

        Ok((loss as f64 * batch.len() as f64, correct))
    }

    fn eval_loss_acc(&self, examples: &[&(IdSeq, IdSeq, u8)]) -> Result<(f64, f64), Phase2Error> {
        let probas: Vec<f32> = examples
            .iter()
            .map(|(o, m, _)| self.forward_pair(o, m).map(|c| c.proba))
            .collect::<Result<_, _>>()?;
        let y = Tensor::new(
            vec![examples.len()],
            examples.iter().map(|e| f32::from(e.2)).collect(),
        );
        let yhat = Tensor::new(vec![examples.len()], probas.clone());
        let loss = bce_loss(&y, &yhat)? as f64;
        let correct = probas
            .iter()
            .zip(examples)
            .filter(|(&p, e)| classify(p, self.config.model.threshold) == e.2)
            .count();
        Ok((loss, correct as f64 / examples.len().max(1) as f64))
    }

    pub fn save(&self, path: &Path) -> Result<(), Phase2Error> {
        let hyper = serde_json::json!({
            "config": self.config,
            "vocab": self.vocab.words(),
            "trained": self.trained,
        });
        write_checkpoint(
            path,
            hyper,
            &[
                ("embedding", &self.embedding),
                ("branch_a.conv.weight", &self.conv_a.weight),
                ("branch_a.conv.bias", &self.conv_a.bias),
                ("branch_b.conv.weight", &self.conv_b.weight),
                ("branch_b.conv.bias", &self.conv_b.bias),
                ("fusion.weight", &self.fusion.weight),
                ("fusion.bias", &self.fusion.bias),
                ("head.weight", &self.head.weight),
                ("head.bias", &self.head.bias),
            ],
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, Phase2Error> {
        let ckpt = read_checkpoint(path)?;
        let config: AdvNetConfig = serde_json::from_value(ckpt.hyper["config"].clone())
            .map_err(|e| Phase2Error::Config(format!("bad checkpoint config: {e}")))?;
        let words: Vec<String> = serde_json::from_value(ckpt.hyper["vocab"].clone())
            .map_err(|e| Phase2Error::Config(format!("bad checkpoint vocab: {e}")))?;
        let trained = ckpt.hyper["trained"].as_bool().unwrap_or(false);
        Ok(AdvNet {
            vocab: Vocabulary::from_words(words),
            embedding: ckpt.tensor("embedding")?.clone(),
            conv_a: Conv1dParams::new(
                ckpt.tensor("branch_a.conv.weight")?.clone(),
                ckpt.tensor("branch_a.conv.bias")?.clone(),
            )?,
            conv_b: Conv1dParams::new(
                ckpt.tensor("branch_b.conv.weight")?.clone(),
                ckpt.tensor("branch_b.conv.bias")?.clone(),
            )?,
            fusion: DenseParams::new(
                ckpt.tensor("fusion.weight")?.clone(),
                ckpt.tensor("fusion.bias")?.clone(),
            )?,
            head: DenseParams::new(
                ckpt.tensor("head.weight")?.clone(),
                ckpt.tensor("head.bias")?.clone(),
            )?,
            config,
            trained,
        })
    }
}

#[derive(Clone)]
struct NetSnapshot {
    conv_a: Conv1dParams<f32>,
    conv_b: Conv1dParams<f32>,
    fusion: DenseParams<f32>,
    head: DenseParams<f32>,
}

/// Train on phase-1 records: dedup exact (original, manipulated) pairs,
/// carve a validation tail, oversample the minority class to 1:1 inside
/// each epoch, and early-stop on validation loss.
pub fn train_adv_net(
    net: &mut AdvNet,
    records: &[AdvDatasetRecord],
    val_split: f64,
) -> Result<(), Phase2Error> {
    let max_len = net.config.model.max_len;
    let mut seen = HashSet::new();
    let mut examples: Vec<(IdSeq, IdSeq, u8)> = Vec::new();
    for r in records {
        let o = net.vocab.encode_tokens(&r.tokens, max_len);
        let m = net.vocab.encode_tokens(&r.manipulated, max_len);
        if seen.insert((o.clone(), m.clone())) {
            examples.push((o, m, r.adv_label));
        }
    }
    let positives = examples.iter().filter(|e| e.2 == 1).count();
    if positives == 0 {
        return Err(Phase2Error::SingleClassDataset(0));
    }
    if positives == examples.len() {
        return Err(Phase2Error::SingleClassDataset(1));
    }

    let seed = net.config.model.seed;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "advnet-split", &[]));
    shuffle(&mut order, &mut rng);
    let val_len = ((examples.len() as f64) * val_split).round() as usize;
    let val_len = val_len.clamp(1, examples.len() - 2);
    let (train_idx, val_idx) = order.split_at(examples.len() - val_len);
    let val: Vec<&(IdSeq, IdSeq, u8)> = val_idx.iter().map(|&i| &examples[i]).collect();

    let minority_label =
        if 2 * positives < examples.len() { 1u8 } else { 0u8 };
    let minority: Vec<usize> = train_idx
        .iter()
        .copied()
        .filter(|&i| examples[i].2 == minority_label)
        .collect();
    let majority_n = train_idx.len() - minority.len();

    let hyper = AdamHyper::with_lr(net.config.model.lr);
    let mut opt = OptState {
        hyper,
        conv_a_w: AdamState::for_param(&net.conv_a.weight),
        conv_a_b: AdamState::for_param(&net.conv_a.bias),
        conv_b_w: AdamState::for_param(&net.conv_b.weight),
        conv_b_b: AdamState::for_param(&net.conv_b.bias),
        fusion_w: AdamState::for_param(&net.fusion.weight),
        fusion_b: AdamState::for_param(&net.fusion.bias),
        head_w: AdamState::for_param(&net.head.weight),
        head_b: AdamState::for_param(&net.head.bias),
    };

    let mut best_val = f64::INFINITY;
    let mut best: Option<NetSnapshot> = None;
    let mut stale = 0;

    for epoch in 0..net.config.model.max_epochs {
        let mut epoch_rng = ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            "advnet-epoch",
            &[epoch as u64],
        ));
        let mut epoch_order: Vec<usize> = train_idx.to_vec();
        // oversample the minority class up to the majority count
        if !minority.is_empty() {
            for _ in 0..majority_n.saturating_sub(minority.len()) {
                let pick = minority[epoch_rng.gen_range(0..minority.len())];
                epoch_order.push(pick);
            }
        }
        shuffle(&mut epoch_order, &mut epoch_rng);

        let mut loss_sum = 0.0;
        let mut correct = 0;
        let mut n = 0;
        for chunk in epoch_order.chunks(net.config.model.batch_size) {
            let batch: Vec<&(IdSeq, IdSeq, u8)> =
                chunk.iter().map(|&i| &examples[i]).collect();
            let (l, c) = net.train_batch(&batch, &mut opt)?;
            loss_sum += l;
            correct += c;
            n += chunk.len();
        }
        let _ = (loss_sum / n.max(1) as f64, correct as f64 / n.max(1) as f64);

        let (val_loss, _) = net.eval_loss_acc(&val)?;
        if val_loss < best_val {
            best_val = val_loss;
            best = Some(NetSnapshot {
                conv_a: net.conv_a.clone(),
                conv_b: net.conv_b.clone(),
                fusion: net.fusion.clone(),
                head: net.head.clone(),
            });
            stale = 0;
        } else {
            stale += 1;
            if stale >= net.config.model.patience {
                break;
            }
        }
    }

    if let Some(snap) = best {
        net.conv_a = snap.conv_a;
        net.conv_b = snap.conv_b;
        net.fusion = snap.fusion;
        net.head = snap.head;
    }
    net.trained = true;
    Ok(())
}
