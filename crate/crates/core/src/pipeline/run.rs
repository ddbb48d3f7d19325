//! Experiment orchestration: wires dataset preparation, victim training,
//! the three attack phases and report emission into restartable stages,
//! records every artifact in a content-hashed manifest, and fails fast with
//! the offending stage named.

use crate::attack::phase1::{
    build_adversarial_dataset, random_attack_study, read_jsonl, write_jsonl,
    PerturbationSpec,
};
use crate::attack::phase2::{train_adv_net, AdvNet, Phase2Error};
use crate::attack::phase3::{
    attack_evaluate, generate_candidates, pos_sweep, rank_and_select, AttackConfig,
    AttackReport, SweepReport,
};
use crate::model::SentimentModel;
use crate::pipeline::config::RunConfig;
use crate::pipeline::corpus::{synthetic_corpus, write_corpus_csv};
use crate::pipeline::dataset::{ingest_dataset, SplitDataset};
use crate::pipeline::report::{accuracy_table_csv, read_json, EvalSummary};
use crate::seed::derive_seed;
use crate::text::{
    normalize_and_tokenize, EmbeddingTable, TaggedReview, Tagger, Vocabulary,
};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("stage {stage} failed: {message}")]
pub struct PipelineError {
    pub stage: String,
    pub message: String,
}

fn fail<E: Display>(stage: &str) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError { stage: stage.to_string(), message: e.to_string() }
}

/// Files a stage wrote and read, as paths relative to the output directory
/// where possible.
#[derive(Debug, Default, Clone)]
pub struct StageOutput {
    pub written: Vec<String>,
    pub read: Vec<String>,
}

impl StageOutput {
    fn wrote(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    fn reads(&mut self, name: &str) {
        self.read.push(name.to_string());
    }

    fn merge(&mut self, other: StageOutput) {
        self.written.extend(other.written);
        self.read.extend(other.read);
    }
}

pub const MODEL_CKPT: &str = "model.ckpt";
pub const HISTORY_CSV: &str = "history.csv";
pub const EVAL_JSON: &str = "eval.json";
pub const STUDY_HISTOGRAM_CSV: &str = "pos_histogram.csv";
pub const STUDY_JSON: &str = "study.json";
pub const ADV_DATASET_JSONL: &str = "adv_dataset.jsonl";
pub const ADVNET_CKPT: &str = "advnet.ckpt";
pub const ATTACK_REPORT_JSON: &str = "attack_report.json";
pub const ATTACK_REPORT_CSV: &str = "attack_report.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
const SYNTH_TRAIN_CSV: &str = "synthetic_train.csv";
const SYNTH_TEST_CSV: &str = "synthetic_test.csv";

fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    std::fs::write(path, text)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::from)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// Check every externally referenced file before any work starts.
pub fn preflight(cfg: &RunConfig) -> Result<(), PipelineError> {
    let stage = "preflight";
    for (key, value) in [
        ("train_csv", &cfg.train_csv),
        ("test_csv", &cfg.test_csv),
        ("embedding_file", &cfg.embedding_file),
    ] {
        if !value.is_empty() && !Path::new(value).exists() {
            return Err(PipelineError {
                stage: stage.into(),
                message: format!("missing file for {key}: {value}"),
            });
        }
    }
    cfg.model_config().validate().map_err(fail(stage))?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(fail(stage))?;
    Ok(())
}

/// Ingest the configured CSVs, or synthesize and ingest the bundled corpus
/// when no paths are given.
fn load_dataset(cfg: &RunConfig, out: &mut StageOutput) -> Result<SplitDataset, PipelineError> {
    let stage = "ingest";
    let (train_path, test_path) = if cfg.train_csv.is_empty() {
        let train_path = cfg.out_dir.join(SYNTH_TRAIN_CSV);
        let test_path = cfg.out_dir.join(SYNTH_TEST_CSV);
        // oversized pools leave room for dedup and stratification
        let train_rows =
            synthetic_corpus(cfg.train_size * 2, derive_seed(cfg.seed, "corpus-train", &[]));
        let test_rows =
            synthetic_corpus(cfg.test_size * 2, derive_seed(cfg.seed, "corpus-test", &[]));
        write_corpus_csv(&train_path, &train_rows, cfg.label_scheme).map_err(fail(stage))?;
        write_corpus_csv(&test_path, &test_rows, cfg.label_scheme).map_err(fail(stage))?;
        out.wrote(SYNTH_TRAIN_CSV);
        out.wrote(SYNTH_TEST_CSV);
        out.reads(SYNTH_TRAIN_CSV);
        out.reads(SYNTH_TEST_CSV);
        (train_path, test_path)
    } else {
        out.reads(&cfg.train_csv);
        out.reads(&cfg.test_csv);
        (PathBuf::from(&cfg.train_csv), PathBuf::from(&cfg.test_csv))
    };
    ingest_dataset(
        &cfg.dataset,
        &train_path,
        &test_path,
        cfg.label_scheme,
        cfg.train_size,
        cfg.test_size,
        derive_seed(cfg.seed, "ingest", &[]),
    )
    .map_err(fail(stage))
}

fn tag_rows(rows: &[(u8, String)], id_offset: u64, tagger: &Tagger) -> Vec<TaggedReview> {
    rows.iter()
        .enumerate()
        .map(|(i, (label, text))| {
            let tokens = normalize_and_tokenize(text);
            let tags = tagger.tag_pos(&tokens);
            TaggedReview::new(id_offset + i as u64, tokens, tags, *label)
        })
        .collect()
}

const TEST_ID_OFFSET: u64 = 1_000_000;

struct PreparedData {
    train: Vec<TaggedReview>,
    test: Vec<TaggedReview>,
}

fn prepare(cfg: &RunConfig, out: &mut StageOutput) -> Result<PreparedData, PipelineError> {
    let dataset = load_dataset(cfg, out)?;
    let tagger = Tagger::bundled();
    Ok(PreparedData {
        train: tag_rows(&dataset.train, 0, &tagger),
        test: tag_rows(&dataset.test, TEST_ID_OFFSET, &tagger),
    })
}

fn load_victim(cfg: &RunConfig, stage: &str, out: &mut StageOutput) -> Result<SentimentModel, PipelineError> {
    out.reads(MODEL_CKPT);
    SentimentModel::load(&cfg.out_dir.join(MODEL_CKPT)).map_err(fail(stage))
}

/// Train the victim classifier and persist checkpoint, history and the
/// held-out evaluation summary.
pub fn stage_train(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let stage = "train";
    let mut out = StageOutput::default();
    let data = prepare(cfg, &mut out)?;

    let corpus: Vec<_> = data.train.iter().map(|r| r.tokens.clone()).collect();
    let vocab = Vocabulary::build(&corpus, cfg.min_count).map_err(fail(stage))?;
    let embeddings = if cfg.embedding_file.is_empty() {
        EmbeddingTable::seeded_random(
            &vocab,
            cfg.embedding_dim,
            derive_seed(cfg.seed, "embeddings", &[]),
        )
    } else {
        out.reads(&cfg.embedding_file);
        EmbeddingTable::load(
            Path::new(&cfg.embedding_file),
            cfg.embedding_dim,
            &vocab,
            derive_seed(cfg.seed, "embeddings", &[]),
        )
        .map_err(fail(stage))?
    };

    let mut model =
        SentimentModel::build(cfg.model_config(), vocab, &embeddings).map_err(fail(stage))?;
    let train_set: Vec<_> = data
        .train
        .iter()
        .map(|r| (model.vocab.encode(&r.tokens, cfg.max_len), r.label))
        .collect();
    model.train(&train_set).map_err(fail(stage))?;

    let test_set: Vec<_> = data
        .test
        .iter()
        .map(|r| (model.vocab.encode(&r.tokens, cfg.max_len), r.label))
        .collect();
    let eval = model.evaluate(&test_set).map_err(fail(stage))?;

    model.save(&cfg.out_dir.join(MODEL_CKPT)).map_err(fail(stage))?;
    write_text(&cfg.out_dir.join(HISTORY_CSV), &model.history_csv()).map_err(fail(stage))?;
    write_json(
        &cfg.out_dir.join(EVAL_JSON),
        &EvalSummary {
            dataset: cfg.dataset.clone(),
            test_accuracy: eval.accuracy,
            n_test: test_set.len(),
            epochs_trained: model.history.len(),
        },
    )
    .map_err(fail(stage))?;
    out.wrote(MODEL_CKPT);
    out.wrote(HISTORY_CSV);
    out.wrote(EVAL_JSON);
    Ok(out)
}

/// The any-POS random-deletion study over the first `study_reviews` test
/// reviews; writes the per-tag deletion histogram.
pub fn stage_random_study(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let stage = "random-study";
    let mut out = StageOutput::default();
    let data = prepare(cfg, &mut out)?;
    let model = load_victim(cfg, stage, &mut out)?;

    let reviews = &data.test[..cfg.study_reviews.min(data.test.len())];
    let hist = random_attack_study(
        &model,
        reviews,
        cfg.study_k_words,
        cfg.study_replications,
        derive_seed(cfg.seed, "study", &[]),
    )
    .map_err(fail(stage))?;

    write_text(&cfg.out_dir.join(STUDY_HISTOGRAM_CSV), &hist.to_csv()).map_err(fail(stage))?;
    write_json(&cfg.out_dir.join(STUDY_JSON), &hist).map_err(fail(stage))?;
    out.wrote(STUDY_HISTOGRAM_CSV);
    out.wrote(STUDY_JSON);
    Ok(out)
}

fn phase1_spec(cfg: &RunConfig) -> PerturbationSpec {
    PerturbationSpec {
        pos_set: cfg.pos.iter().copied().collect(),
        ratio_percent: cfg.ratio,
        replications: cfg.phase1_replications,
        seed: derive_seed(cfg.seed, "phase1-spec", &[]),
        ratio_base: cfg.ratio_base,
    }
}

/// Build the labeled adversarial dataset from the leading test reviews.
pub fn stage_phase1(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let stage = "phase1";
    let mut out = StageOutput::default();
    let data = prepare(cfg, &mut out)?;
    let model = load_victim(cfg, stage, &mut out)?;

    let reviews = &data.test[..cfg.phase1_reviews.min(data.test.len())];
    let records =
        build_adversarial_dataset(&model, reviews, &phase1_spec(cfg)).map_err(fail(stage))?;
    write_jsonl(&records, &cfg.out_dir.join(ADV_DATASET_JSONL)).map_err(fail(stage))?;
    out.wrote(ADV_DATASET_JSONL);
    Ok(out)
}

fn victim_embedding_table(model: &SentimentModel) -> EmbeddingTable {
    EmbeddingTable {
        dim: model.config.embedding_dim,
        matrix: model.embedding.data().to_vec(),
    }
}

/// Train the two-branch adversarial net on the phase-1 dataset.
pub fn stage_phase2(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let stage = "phase2";
    let mut out = StageOutput::default();
    let model = load_victim(cfg, stage, &mut out)?;
    out.reads(ADV_DATASET_JSONL);
    let records = read_jsonl(&cfg.out_dir.join(ADV_DATASET_JSONL)).map_err(fail(stage))?;

    let mut net = AdvNet::build(
        cfg.adv_net_config(),
        model.vocab.clone(),
        &victim_embedding_table(&model),
    )
    .map_err(fail(stage))?;
    train_adv_net(&mut net, &records, cfg.adv_val_split).map_err(fail(stage))?;
    net.save(&cfg.out_dir.join(ADVNET_CKPT)).map_err(fail(stage))?;
    out.wrote(ADVNET_CKPT);
    Ok(out)
}

fn attack_rows_csv(report: &AttackReport) -> String {
    let mut out =
        String::from("id,replication,score,baseline_correct,attack_correct,flipped\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.id, r.replication, r.score, r.baseline_correct, r.attack_correct, r.flipped
        ));
    }
    out
}

/// Generate candidates from fresh test reviews, rank with the phase-2 net,
/// and evaluate the selected examples against the victim.
pub fn stage_phase3(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let stage = "phase3";
    let mut out = StageOutput::default();
    let data = prepare(cfg, &mut out)?;
    let model = load_victim(cfg, stage, &mut out)?;
    out.reads(ADVNET_CKPT);
    let net = AdvNet::load(&cfg.out_dir.join(ADVNET_CKPT)).map_err(fail(stage))?;

    let start = cfg.phase1_reviews;
    let end = start + cfg.n_source;
    if data.test.len() < end {
        return Err(PipelineError {
            stage: stage.into(),
            message: format!(
                "need {end} test reviews ({} phase1 + {} sources), have {}",
                cfg.phase1_reviews,
                cfg.n_source,
                data.test.len()
            ),
        });
    }
    let sources = &data.test[start..end];
    let spec = PerturbationSpec {
        replications: cfg.attack_replications,
        seed: derive_seed(cfg.seed, "phase3-spec", &[]),
        ..phase1_spec(cfg)
    };
    let candidates = generate_candidates(sources, &spec).map_err(fail(stage))?;
    let selected =
        rank_and_select(&net, &candidates, cfg.top_k, cfg.best_per_source).map_err(fail(stage))?;
    let report =
        attack_evaluate(&model, &selected, &cfg.dataset, &spec).map_err(fail(stage))?;

    write_json(&cfg.out_dir.join(ATTACK_REPORT_JSON), &report).map_err(fail(stage))?;
    write_text(&cfg.out_dir.join(ATTACK_REPORT_CSV), &attack_rows_csv(&report))
        .map_err(fail(stage))?;
    out.wrote(ATTACK_REPORT_JSON);
    out.wrote(ATTACK_REPORT_CSV);
    Ok(out)
}

/// Run all 7x4 (pos_set, ratio) cells, each with its own phase-2 net.
pub fn stage_sweep(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let stage = "sweep";
    let mut out = StageOutput::default();
    let data = prepare(cfg, &mut out)?;
    let model = load_victim(cfg, stage, &mut out)?;

    let start = cfg.phase1_reviews;
    let end = start + cfg.n_source;
    if data.test.len() < end {
        return Err(PipelineError {
            stage: stage.into(),
            message: format!("need {end} test reviews, have {}", data.test.len()),
        });
    }
    let phase1_reviews = &data.test[..start];
    let sources = &data.test[start..end];

    let template = AttackConfig {
        n_source_reviews: cfg.n_source,
        replications: cfg.attack_replications,
        top_k: cfg.top_k,
        spec: phase1_spec(cfg),
        seed: cfg.seed,
        best_per_source: cfg.best_per_source,
    };
    let adv_config = cfg.adv_net_config();
    let vocab = model.vocab.clone();
    let table = victim_embedding_table(&model);
    let mut builder = || -> Result<AdvNet, Phase2Error> {
        AdvNet::build(adv_config.clone(), vocab.clone(), &table)
    };
    let report = pos_sweep(
        &model,
        &mut builder,
        phase1_reviews,
        sources,
        &template,
        &cfg.dataset,
        cfg.adv_val_split,
    )
    .map_err(fail(stage))?;

    write_json(&cfg.out_dir.join(SWEEP_JSON), &report).map_err(fail(stage))?;
    write_text(&cfg.out_dir.join(SWEEP_CSV), &report.to_csv()).map_err(fail(stage))?;
    out.wrote(SWEEP_JSON);
    out.wrote(SWEEP_CSV);
    Ok(out)
}

/// Combine persisted artifacts into the final accuracy table.
pub fn stage_report(cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    let stage = "report";
    let mut out = StageOutput::default();
    out.reads(EVAL_JSON);
    let eval: EvalSummary = read_json(&cfg.out_dir.join(EVAL_JSON)).map_err(fail(stage))?;
    let attack: Option<AttackReport> = {
        let path = cfg.out_dir.join(ATTACK_REPORT_JSON);
        if path.exists() {
            out.reads(ATTACK_REPORT_JSON);
            Some(read_json(&path).map_err(fail(stage))?)
        } else {
            None
        }
    };
    let sweep: Option<SweepReport> = {
        let path = cfg.out_dir.join(SWEEP_JSON);
        if path.exists() {
            out.reads(SWEEP_JSON);
            Some(read_json(&path).map_err(fail(stage))?)
        } else {
            None
        }
    };
    let table = accuracy_table_csv(&eval, attack.as_ref(), sweep.as_ref()).map_err(fail(stage))?;
    write_text(&cfg.out_dir.join(REPORT_CSV), &table).map_err(fail(stage))?;
    out.wrote(REPORT_CSV);
    Ok(out)
}

fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Fingerprint of the configuration with the output location normalized
/// out, so identical experiments hash identically wherever they run.
pub fn config_fingerprint(cfg: &RunConfig) -> String {
    let mut canonical = cfg.clone();
    canonical.out_dir = PathBuf::new();
    let json = serde_json::to_string(&canonical).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Full run: train, optional random study, the three phases, the report,
/// then a manifest hashing every artifact.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    preflight(cfg)?;
    let mut all = StageOutput::default();
    all.merge(stage_train(cfg)?);
    if cfg.study_reviews > 0 {
        all.merge(stage_random_study(cfg)?);
    }
    all.merge(stage_phase1(cfg)?);
    all.merge(stage_phase2(cfg)?);
    all.merge(stage_phase3(cfg)?);
    all.merge(stage_report(cfg)?);
    write_manifest(cfg, &all)
}

pub fn write_manifest(cfg: &RunConfig, output: &StageOutput) -> Result<PathBuf, PipelineError> {
    let stage = "manifest";
    let fingerprint = config_fingerprint(cfg);
    let mut artifacts = BTreeMap::new();
    let mut reads: BTreeSet<String> = BTreeSet::new();
    // stage-by-stage invocations accumulate into one manifest as long as
    // the configuration has not changed underneath them
    let existing = cfg.out_dir.join(MANIFEST_JSON);
    if existing.exists() {
        if let Ok(prev) = serde_json::from_str::<serde_json::Value>(
            &std::fs::read_to_string(&existing).map_err(fail(stage))?,
        ) {
            if prev["config"] == serde_json::Value::String(fingerprint.clone()) {
                if let Some(map) = prev["artifacts"].as_object() {
                    for (k, v) in map {
                        if let Some(hash) = v.as_str() {
                            artifacts.insert(k.clone(), hash.to_string());
                        }
                    }
                }
                if let Some(list) = prev["reads"].as_array() {
                    reads.extend(list.iter().filter_map(|v| v.as_str()).map(String::from));
                }
            }
        }
    }
    for name in &output.written {
        let hash = sha256_file(&cfg.out_dir.join(name)).map_err(fail(stage))?;
        artifacts.insert(name.clone(), hash);
    }
    reads.extend(output.read.iter().cloned());
    let manifest = serde_json::json!({
        "version": 1,
        "dataset": cfg.dataset,
        "seed": cfg.seed,
        "config": fingerprint,
        "artifacts": artifacts,
        "reads": reads,
    });
    let path = cfg.out_dir.join(MANIFEST_JSON);
    write_json(&path, &manifest).map_err(fail(stage))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &Path) -> RunConfig {
        RunConfig {
            out_dir: dir.to_path_buf(),
            train_size: 400,
            test_size: 60,
            max_len: 40,
            embedding_dim: 16,
            filters: 8,
            batch_size: 16,
            max_epochs: 4,
            fusion_width: 8,
            phase1_reviews: 30,
            phase1_replications: 5,
            n_source: 20,
            attack_replications: 10,
            top_k: 30,
            study_reviews: 10,
            study_replications: 5,
            study_k_words: 3,
            ..RunConfig::default()
        }
    }

    #[test]
    fn preflight_catches_missing_embedding_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.embedding_file = "/no/such/vectors.txt".into();
        let err = preflight(&cfg).unwrap_err();
        assert_eq!(err.stage, "preflight");
        assert!(err.message.contains("embedding_file"));
    }

    #[test]
    fn stage_order_is_enforced_by_missing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        preflight(&cfg).unwrap();
        let err = stage_phase1(&cfg).unwrap_err();
        assert_eq!(err.stage, "phase1");
    }

    #[test]
    fn full_pipeline_produces_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let manifest_path = run_pipeline(&cfg).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
        let artifacts = manifest["artifacts"].as_object().unwrap();
        for name in [MODEL_CKPT, ADV_DATASET_JSONL, ADVNET_CKPT, ATTACK_REPORT_JSON, REPORT_CSV]
        {
            assert!(artifacts.contains_key(name), "missing {name}");
        }
        assert_eq!(manifest["seed"], 0);
    }
}
