//! Training loop, evaluation, run artifacts and the slot-count sweep.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cells::CellState;
use crate::checkpoint::Checkpoint;
use crate::config::{MemoryPolicy, OptimizerKind, TrainConfig};
use crate::data::{load_conll, write_predictions, Corpus, TaggedSequence, VocabMode, UNK};
use crate::error::{Error, Result};
use crate::eval::{score_f1, EntropySeries, F1Report};
use crate::optim::{clip_gradients, AdaDeltaState, Optimizer};
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::synth::generate_synthetic;
use crate::tagger::{ModelDims, TaggerModel};

pub const ENTROPY_FILE: &str = "entropy.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const PREDICTIONS_FILE: &str = "predictions.conll";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Training, test and optional held-out corpora sharing one vocabulary.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub train: Corpus,
    pub test: Option<Corpus>,
    pub dev: Option<Corpus>,
}

impl Dataset {
    /// Files named in the config, or the synthetic task when no training file is given.
    pub fn resolve(cfg: &TrainConfig) -> Result<Self> {
        let Some(train_path) = &cfg.train_path else {
            let (train, test) = generate_synthetic(&cfg.synth)?;
            return Ok(Dataset {
                train,
                test: Some(test),
                dev: None,
            });
        };
        let train = load_conll(train_path, VocabMode::Build)?;
        let reuse = |p: &PathBuf| {
            load_conll(
                p,
                VocabMode::Reuse {
                    words: train.words.clone(),
                    labels: train.labels.clone(),
                },
            )
        };
        let test = cfg.test_path.as_ref().map(reuse).transpose()?;
        let dev = cfg.dev_path.as_ref().map(reuse).transpose()?;
        Ok(Dataset { train, test, dev })
    }
}

pub fn model_dims(cfg: &TrainConfig, corpus: &Corpus) -> ModelDims {
    let memory = cfg.cell.uses_memory();
    ModelDims {
        vocab: corpus.words.len(),
        embed: cfg.embed_dim,
        hidden: cfg.hidden,
        labels: corpus.labels.len(),
        slot_dim: if memory { cfg.slot_dim } else { 0 },
        slot_count: if memory { cfg.slot_count } else { 0 },
        window_size: cfg.window_size,
    }
}

fn new_optimizer(cfg: &TrainConfig, model: &TaggerModel) -> Result<Optimizer> {
    match cfg.optimizer {
        OptimizerKind::Adadelta => Ok(Optimizer::AdaDelta(AdaDeltaState::new(model.params(), cfg.rho, cfg.eps)?)),
        OptimizerKind::Sgd => Optimizer::sgd(cfg.learning_rate),
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Best model by held-out F1 when a dev set is given, else the final one.
    pub model: TaggerModel,
    pub optimizer: Optimizer,
    pub entropy: EntropySeries,
    pub best_epoch: usize,
    pub dev_f1: Vec<f64>,
}

/// Per-sentence updates in corpus order for `cfg.epochs` epochs.
pub fn train(cfg: &TrainConfig, corpus: &Corpus, dev: Option<&Corpus>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.sequences.is_empty() {
        return Err(Error::contract("empty training corpus"));
    }
    let root = Rng::new(cfg.seed);
    let mut model = TaggerModel::new(cfg.cell, model_dims(cfg, corpus), &mut root.fork(0))?;
    let mut optimizer = new_optimizer(cfg, &model)?;
    let mut unk_rng = root.fork(1);
    let singletons = corpus.singletons();
    let mut grads = model.params().zeroed();
    let mut entropy = EntropySeries::default();
    let mut dev_f1 = Vec::new();
    let mut best: Option<(f64, usize, TaggerModel, Optimizer)> = None;

    for epoch in 1..=cfg.epochs {
        let fresh = model.initial_state(cfg.memory_init)?;
        let mut state = fresh.clone();
        let (mut nll, mut tokens) = (0.0, 0usize);
        for sentence in &corpus.sequences {
            state = next_sentence_state(state, &fresh, cfg.memory_policy);
            let input = replace_singletons(sentence, &singletons, cfg.unk_prob, &mut unk_rng);
            let pass = model.forward_sequence(&input, &state)?;
            grads.zero();
            model.backward_into(&pass, &mut grads)?;
            if cfg.clip {
                clip_gradients(&mut grads, cfg.clip_norm);
            }
            optimizer.step(model.params_mut(), &grads)?;
            nll += pass.loss.total_nll;
            tokens += pass.loss.token_count;
            state = pass.final_state;
        }
        entropy.push(nll / tokens as f64);
        if let Some(dev) = dev {
            let f1 = evaluate(&model, dev, cfg.memory_policy, cfg.memory_init)?.0.f1();
            dev_f1.push(f1);
            if best.as_ref().is_none_or(|(b, ..)| f1 > *b) {
                best = Some((f1, epoch, model.clone(), optimizer.clone()));
            }
        }
    }
    let (model, optimizer, best_epoch) = match best {
        Some((_, epoch, m, o)) => (m, o, epoch),
        None => (model, optimizer, cfg.epochs),
    };
    Ok(TrainOutcome {
        model,
        optimizer,
        entropy,
        best_epoch,
        dev_f1,
    })
}

fn next_sentence_state(mut state: CellState, fresh: &CellState, policy: MemoryPolicy) -> CellState {
    match policy {
        MemoryPolicy::Persistent => {
            state.clear_hidden();
            state
        }
        MemoryPolicy::ResetPerSentence => fresh.clone(),
    }
}

fn replace_singletons(s: &TaggedSequence, singletons: &[bool], prob: f64, rng: &mut Rng) -> TaggedSequence {
    let mut out = s.clone();
    if prob > 0.0 {
        for w in &mut out.words {
            if singletons[*w] && rng.bernoulli(prob) {
                *w = UNK;
            }
        }
    }
    out
}

/// Argmax labels for every sentence, in corpus order.
pub fn predict_corpus(
    model: &TaggerModel,
    corpus: &Corpus,
    policy: MemoryPolicy,
    memory_init: f64,
) -> Result<Vec<Vec<usize>>> {
    let fresh = model.initial_state(memory_init)?;
    let mut state = fresh.clone();
    let mut out = Vec::with_capacity(corpus.sequences.len());
    for s in &corpus.sequences {
        state = next_sentence_state(state, &fresh, policy);
        let (labels, next) = model.predict(&s.words, &state)?;
        out.push(labels);
        state = next;
    }
    Ok(out)
}

/// Segment F1 against the corpus' original label strings, plus the predicted strings.
pub fn evaluate(
    model: &TaggerModel,
    corpus: &Corpus,
    policy: MemoryPolicy,
    memory_init: f64,
) -> Result<(F1Report, Vec<Vec<String>>)> {
    let predicted: Vec<Vec<String>> = predict_corpus(model, corpus, policy, memory_init)?
        .into_iter()
        .map(|s| s.into_iter().map(|l| corpus.labels.item(l).to_string()).collect())
        .collect();
    let report = score_f1(&corpus.label_strings(), &predicted)?;
    Ok((report, predicted))
}

/// Mean per-word NLL over a corpus under the given memory policy, without updates.
pub fn corpus_entropy(model: &TaggerModel, corpus: &Corpus, policy: MemoryPolicy, memory_init: f64) -> Result<f64> {
    let fresh = model.initial_state(memory_init)?;
    let mut state = fresh.clone();
    let (mut nll, mut tokens) = (0.0, 0);
    for s in &corpus.sequences {
        state = next_sentence_state(state, &fresh, policy);
        let pass = model.forward_sequence(s, &state)?;
        nll += pass.loss.total_nll;
        tokens += pass.loss.token_count;
        state = pass.final_state;
    }
    Ok(nll / tokens as f64)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Written next to every training run; enough to replay it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: TrainConfig,
    pub data: Vec<DataDigest>,
    pub synthetic: bool,
    pub final_entropy: f64,
    pub best_epoch: usize,
    pub test_f1: Option<f64>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Fails if any input file changed since the run was recorded.
    pub fn verify_data(&self) -> Result<()> {
        for d in &self.data {
            let now = file_sha256(&d.path)?;
            if now != d.sha256 {
                return Err(Error::Contract(format!(
                    "{} data {} changed since the run (sha256 {} != {})",
                    d.role,
                    d.path.display(),
                    now,
                    d.sha256
                )));
            }
        }
        Ok(())
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("hashing {}", path.display()), e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn digests(cfg: &TrainConfig) -> Result<Vec<DataDigest>> {
    [("train", &cfg.train_path), ("test", &cfg.test_path), ("dev", &cfg.dev_path)]
        .into_iter()
        .filter_map(|(role, p)| p.as_ref().map(|p| (role, p)))
        .map(|(role, p)| {
            Ok(DataDigest {
                role: role.to_string(),
                path: p.clone(),
                sha256: file_sha256(p)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub test_report: Option<F1Report>,
    pub entropy: EntropySeries,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Trains and writes the entropy CSV, checkpoint, config, test predictions and manifest into `cfg.out_dir`.
pub fn run_train(cfg: &TrainConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let data = Dataset::resolve(cfg)?;
    let digests = digests(cfg)?;
    let outcome = train(cfg, &data.train, data.dev.as_ref())?;
    let out = &cfg.out_dir;
    create_dir(out)?;

    let mut csv = Vec::new();
    outcome.entropy.write_csv(&mut csv)?;
    write_file(&out.join(ENTROPY_FILE), csv)?;
    cfg.save(&out.join(CONFIG_FILE))?;
    Checkpoint {
        model: outcome.model.clone(),
        optimizer: outcome.optimizer.clone(),
        words: data.train.words.clone(),
        labels: data.train.labels.clone(),
        // The output location is not part of the model; leaving it out keeps replays byte-identical.
        config: TrainConfig {
            out_dir: PathBuf::new(),
            ..cfg.clone()
        },
        epoch: outcome.best_epoch,
    }
    .save(out.join(CHECKPOINT_FILE))?;

    let test_report = match &data.test {
        Some(test) => {
            let (report, predicted) = evaluate(&outcome.model, test, cfg.memory_policy, cfg.memory_init)?;
            write_predictions(out.join(PREDICTIONS_FILE), &test.sequences, &predicted)?;
            Some(report)
        }
        None => None,
    };
    let manifest = Manifest {
        config: cfg.clone(),
        data: digests,
        synthetic: cfg.train_path.is_none(),
        final_entropy: outcome.entropy.last().unwrap_or(f64::NAN),
        best_epoch: outcome.best_epoch,
        test_f1: test_report.as_ref().map(F1Report::f1),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write_file(&out.join(MANIFEST_FILE), json)?;
    Ok(RunArtifacts {
        out_dir: out.clone(),
        manifest,
        test_report,
        entropy: outcome.entropy,
    })
}

/// Re-runs a recorded training run, optionally into another directory.
pub fn replay(manifest_path: impl AsRef<Path>, out_dir: Option<PathBuf>) -> Result<RunArtifacts> {
    let manifest = Manifest::load(manifest_path)?;
    manifest.verify_data()?;
    let mut cfg = manifest.config;
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    run_train(&cfg)
}

/// Scores a saved model on a CoNLL file and writes three-column predictions.
pub fn run_eval(checkpoint: impl AsRef<Path>, data: impl AsRef<Path>, predictions: Option<&Path>) -> Result<F1Report> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let corpus = load_conll(
        data.as_ref(),
        VocabMode::Reuse {
            words: ckpt.words.clone(),
            labels: ckpt.labels.clone(),
        },
    )?;
    let known = corpus.sequences.iter().flat_map(|s| &s.words).filter(|&&w| w != UNK).count();
    if known == 0 {
        return Err(Error::Contract(format!(
            "vocabulary mismatch: no token of {} is in the checkpoint vocabulary",
            data.as_ref().display()
        )));
    }
    let (report, predicted) = evaluate(&ckpt.model, &corpus, ckpt.config.memory_policy, ckpt.config.memory_init)?;
    if let Some(p) = predictions {
        write_predictions(p, &corpus.sequences, &predicted)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub slot_count: usize,
    pub f1: Option<f64>,
    /// Final-epoch training entropy (mean per-word NLL).
    pub entropy: Option<f64>,
    pub log10_entropy: Option<f64>,
    pub error: Option<String>,
}

/// One training run per slot count with everything else fixed. Failed runs are recorded, not fatal.
pub fn sweep_slots(base: &TrainConfig, slots: &[usize], data: &Dataset) -> Result<Vec<SweepRow>> {
    if slots.is_empty() {
        return Err(Error::Config("empty slot list".into()));
    }
    let test = data.test.as_ref().unwrap_or(&data.train);
    Ok(slots
        .iter()
        .map(|&n| {
            let cfg = TrainConfig {
                slot_count: n,
                ..base.clone()
            };
            let run = train(&cfg, &data.train, data.dev.as_ref()).and_then(|o| {
                let f1 = evaluate(&o.model, test, cfg.memory_policy, cfg.memory_init)?.0.f1();
                Ok((f1, o.entropy.last().unwrap_or(f64::NAN)))
            });
            match run {
                Ok((f1, e)) => SweepRow {
                    slot_count: n,
                    f1: Some(f1),
                    entropy: Some(e),
                    log10_entropy: Some(e.log10()),
                    error: None,
                },
                Err(e) => SweepRow {
                    slot_count: n,
                    f1: None,
                    entropy: None,
                    log10_entropy: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Format(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
