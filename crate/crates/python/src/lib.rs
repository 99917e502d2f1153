//! Python bindings: corpora, taggers, checkpoints, training, evaluation and gradient checks.

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;

use rnnem::cells::CellKind;
use rnnem::checkpoint::Checkpoint;
use rnnem::config::TrainConfig;
use rnnem::data::{self, TaggedSequence, VocabMode};
use rnnem::eval;
use rnnem::experiment::{self, Dataset};
use rnnem::gradcheck::GradcheckOptions;
use rnnem::params::ParamSet;
use rnnem::rng::Rng;
use rnnem::synth::{self, SynthConfig};
use rnnem::tagger::{ModelDims, TaggerModel};
use rnnem::tensor::Tensor;
use rnnem::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Converts any serializable value into plain Python objects through JSON.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = value.py().import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_kind(cell: &str) -> PyResult<CellKind> {
    cell.parse().map_err(py_err)
}

/// Training configuration. Keyword arguments override the defaults field by field.
#[pyclass(name = "TrainConfig", module = "rnnem_py", skip_from_py_object)]
#[derive(Clone)]
struct PyTrainConfig {
    inner: TrainConfig,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let inner = match overrides {
            None => TrainConfig::default(),
            Some(o) => {
                let base = to_py(o.py(), &TrainConfig::default())?;
                let merged = base.cast_into::<PyDict>()?;
                for (k, v) in o.iter() {
                    merged.set_item(k, v)?;
                }
                from_py(merged.as_any())?
            }
        };
        inner.validate().map_err(py_err)?;
        Ok(PyTrainConfig { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyTrainConfig {
            inner: TrainConfig::from_toml(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyTrainConfig {
            inner: TrainConfig::load(&path).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainConfig(cell={}, hidden={}, slot_count={}, epochs={}, seed={})",
            self.inner.cell, self.inner.hidden, self.inner.slot_count, self.inner.epochs, self.inner.seed
        )
    }
}

/// Tokenized sentences with their word and label vocabularies.
#[pyclass(name = "Corpus", module = "rnnem_py", skip_from_py_object)]
#[derive(Clone)]
struct PyCorpus {
    inner: data::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyCorpus {
            inner: data::load_conll(path, VocabMode::Build).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyCorpus {
            inner: data::parse_conll(text, "<string>", VocabMode::Build).map_err(py_err)?,
        })
    }

    /// Re-reads `path` through this corpus' vocabularies (held-out data).
    fn load_aligned(&self, path: PathBuf) -> PyResult<Self> {
        let mode = VocabMode::Reuse {
            words: self.inner.words.clone(),
            labels: self.inner.labels.clone(),
        };
        Ok(PyCorpus {
            inner: data::load_conll(path, mode).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        data::write_conll(path, &self.inner).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.sequences.len()
    }

    #[getter]
    fn token_count(&self) -> usize {
        self.inner.token_count()
    }

    #[getter]
    fn words(&self) -> Vec<String> {
        self.inner.words.items().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.items().to_vec()
    }

    /// `(word_ids, label_ids)` of sentence `i`.
    fn indices(&self, i: usize) -> PyResult<(Vec<usize>, Vec<usize>)> {
        let s = self
            .inner
            .sequences
            .get(i)
            .ok_or_else(|| PyKeyError::new_err(format!("sentence {i} out of range")))?;
        Ok((s.words.clone(), s.labels.clone()))
    }

    fn label_strings(&self) -> Vec<Vec<String>> {
        self.inner.label_strings()
    }
}

/// Embedding window, recurrent cell and softmax output layer.
#[pyclass(name = "Tagger", module = "rnnem_py", skip_from_py_object)]
#[derive(Clone)]
struct PyTagger {
    inner: TaggerModel,
    memory_init: f64,
}

impl PyTagger {
    fn sentence(&self, words: Vec<usize>, labels: Vec<usize>) -> TaggedSequence {
        TaggedSequence {
            words,
            labels,
            raw_tokens: vec![],
            raw_labels: vec![],
        }
    }
}

#[pymethods]
impl PyTagger {
    #[new]
    #[pyo3(signature = (cell, vocab, labels, embed_dim=100, hidden=100, slot_dim=40, slot_count=8, window_size=3, seed=1, memory_init=0.1))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        cell: &str,
        vocab: usize,
        labels: usize,
        embed_dim: usize,
        hidden: usize,
        slot_dim: usize,
        slot_count: usize,
        window_size: usize,
        seed: u64,
        memory_init: f64,
    ) -> PyResult<Self> {
        let kind = parse_kind(cell)?;
        let memory = kind.uses_memory();
        let dims = ModelDims {
            vocab,
            embed: embed_dim,
            hidden,
            labels,
            slot_dim: if memory { slot_dim } else { 0 },
            slot_count: if memory { slot_count } else { 0 },
            window_size,
        };
        let inner = TaggerModel::new(kind, dims, &mut Rng::new(seed)).map_err(py_err)?;
        Ok(PyTagger { inner, memory_init })
    }

    #[getter]
    fn cell(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn dims<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.dims())
    }

    /// Number of recurrent-cell parameters (embeddings and output layer excluded).
    #[getter]
    fn cell_param_count(&self) -> usize {
        self.inner.cell_param_count()
    }

    fn param_names(&self) -> Vec<&'static str> {
        self.inner.params().tensors().into_iter().map(|(n, _)| n).collect()
    }

    fn get_param(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        let params = self.inner.params();
        let (_, t) = params
            .tensors()
            .into_iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        Ok((0..t.rows()).map(|r| t.row(r).to_vec()).collect())
    }

    fn set_param(&mut self, name: &str, rows: Vec<Vec<f64>>) -> PyResult<()> {
        let slices: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let value = Tensor::from_rows(&slices).map_err(py_err)?;
        let mut params = self.inner.params_mut().tensors_mut();
        let (_, t) = params
            .iter_mut()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| PyKeyError::new_err(name.to_string()))?;
        if t.shape() != value.shape() {
            return Err(PyValueError::new_err(format!(
                "{name} has shape {:?}, got {:?}",
                t.shape(),
                value.shape()
            )));
        }
        **t = value;
        Ok(())
    }

    /// Summed negative log-likelihood of `labels` from a fresh state.
    fn loss(&self, words: Vec<usize>, labels: Vec<usize>) -> PyResult<f64> {
        let init = self.inner.initial_state(self.memory_init).map_err(py_err)?;
        let pass = self.inner.forward_sequence(&self.sentence(words, labels), &init).map_err(py_err)?;
        Ok(pass.loss.total_nll)
    }

    /// Per-step label distributions.
    fn probabilities(&self, words: Vec<usize>) -> PyResult<Vec<Vec<f64>>> {
        let labels = vec![0; words.len()];
        let init = self.inner.initial_state(self.memory_init).map_err(py_err)?;
        let pass = self.inner.forward_sequence(&self.sentence(words, labels), &init).map_err(py_err)?;
        Ok(pass.probs.iter().map(|p| p.data().to_vec()).collect())
    }

    /// Gradient of `loss` with respect to every parameter, keyed by name.
    fn gradients<'py>(&self, py: Python<'py>, words: Vec<usize>, labels: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
        let init = self.inner.initial_state(self.memory_init).map_err(py_err)?;
        let pass = self.inner.forward_sequence(&self.sentence(words, labels), &init).map_err(py_err)?;
        let grads = self.inner.backward_sequence(&pass).map_err(py_err)?;
        let out = PyDict::new(py);
        for (name, t) in grads.tensors() {
            let rows: Vec<Vec<f64>> = (0..t.rows()).map(|r| t.row(r).to_vec()).collect();
            out.set_item(name, rows)?;
        }
        Ok(out)
    }

    /// Most likely label index per word.
    fn predict(&self, words: Vec<usize>) -> PyResult<Vec<usize>> {
        let init = self.inner.initial_state(self.memory_init).map_err(py_err)?;
        Ok(self.inner.predict(&words, &init).map_err(py_err)?.0)
    }

    fn __repr__(&self) -> String {
        let d = self.inner.dims();
        format!(
            "Tagger(cell={}, hidden={}, slot_dim={}, slot_count={})",
            self.inner.kind(),
            d.hidden,
            d.slot_dim,
            d.slot_count
        )
    }
}

/// Saved model, optimizer state, vocabularies and training configuration.
#[pyclass(name = "Checkpoint", module = "rnnem_py", skip_from_py_object)]
struct PyCheckpoint {
    inner: Checkpoint,
}

#[pymethods]
impl PyCheckpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyCheckpoint {
            inner: Checkpoint::load(path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_bytes(bytes: &[u8]) -> PyResult<Self> {
        Ok(PyCheckpoint {
            inner: Checkpoint::from_bytes(bytes).map_err(py_err)?,
        })
    }

    fn to_bytes(&self) -> PyResult<Vec<u8>> {
        self.inner.to_bytes().map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    #[getter]
    fn tagger(&self) -> PyTagger {
        PyTagger {
            inner: self.inner.model.clone(),
            memory_init: self.inner.config.memory_init,
        }
    }

    #[getter]
    fn config(&self) -> PyTrainConfig {
        PyTrainConfig {
            inner: self.inner.config.clone(),
        }
    }

    #[getter]
    fn epoch(&self) -> usize {
        self.inner.epoch
    }

    #[getter]
    fn words(&self) -> Vec<String> {
        self.inner.words.items().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.items().to_vec()
    }
}

/// Synthetic long-range slot-filling corpora `(train, test)`.
#[pyfunction]
#[pyo3(signature = (train_size=2000, test_size=400, seed=None))]
fn synthetic(train_size: usize, test_size: usize, seed: Option<u64>) -> PyResult<(PyCorpus, PyCorpus)> {
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        train_size,
        test_size,
        seed: seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let (train, test) = synth::generate_synthetic(&cfg).map_err(py_err)?;
    Ok((PyCorpus { inner: train }, PyCorpus { inner: test }))
}

/// Trains in memory and returns the model with its per-epoch training entropy.
#[pyfunction]
#[pyo3(signature = (config, corpus, dev=None))]
fn fit(config: &PyTrainConfig, corpus: &PyCorpus, dev: Option<&PyCorpus>) -> PyResult<(PyTagger, Vec<f64>)> {
    let out = experiment::train(&config.inner, &corpus.inner, dev.map(|d| &d.inner)).map_err(py_err)?;
    let entropy = out.entropy.points.iter().map(|p| p.nll).collect();
    Ok((
        PyTagger {
            inner: out.model,
            memory_init: config.inner.memory_init,
        },
        entropy,
    ))
}

/// Full training run writing artifacts to `config.out_dir`; returns the manifest.
#[pyfunction]
fn train<'py>(py: Python<'py>, config: &PyTrainConfig) -> PyResult<Bound<'py, PyAny>> {
    let run = experiment::run_train(&config.inner).map_err(py_err)?;
    to_py(py, &run.manifest)
}

/// Scores a tagger on a corpus read with the same vocabularies.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, tagger: &PyTagger, corpus: &PyCorpus) -> PyResult<Bound<'py, PyAny>> {
    let policy = rnnem::config::MemoryPolicy::Persistent;
    let (report, _) = experiment::evaluate(&tagger.inner, &corpus.inner, policy, tagger.memory_init).map_err(py_err)?;
    to_py(py, &report)
}

/// Scores a checkpoint on a CoNLL file, optionally writing predictions.
#[pyfunction]
#[pyo3(signature = (checkpoint, data, predictions=None))]
fn evaluate_checkpoint<'py>(
    py: Python<'py>,
    checkpoint: PathBuf,
    data: PathBuf,
    predictions: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let report = experiment::run_eval(&checkpoint, &data, predictions.as_deref()).map_err(py_err)?;
    to_py(py, &report)
}

/// Segment precision, recall and F1 of predicted against gold label strings.
#[pyfunction]
fn score_f1<'py>(py: Python<'py>, gold: Vec<Vec<String>>, predicted: Vec<Vec<String>>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &eval::score_f1(&gold, &predicted).map_err(py_err)?)
}

/// Finite-difference gradient check for the given cells (all by default).
#[pyfunction]
#[pyo3(signature = (seed=7, samples=200, cells=None))]
fn gradcheck<'py>(py: Python<'py>, seed: u64, samples: usize, cells: Option<Vec<String>>) -> PyResult<Bound<'py, PyAny>> {
    let kinds = match cells {
        Some(c) => c.iter().map(|s| parse_kind(s)).collect::<PyResult<Vec<_>>>()?,
        None => CellKind::ALL.to_vec(),
    };
    let report = rnnem::gradcheck::gradcheck(&GradcheckOptions {
        seed,
        samples,
        kinds,
        ..GradcheckOptions::default()
    })
    .map_err(py_err)?;
    to_py(py, &report)
}

/// One training run per slot count; failed runs carry an `error` entry.
#[pyfunction]
fn sweep_slots<'py>(py: Python<'py>, config: &PyTrainConfig, slots: Vec<usize>) -> PyResult<Bound<'py, PyList>> {
    let data = Dataset::resolve(&config.inner).map_err(py_err)?;
    let rows = experiment::sweep_slots(&config.inner, &slots, &data).map_err(py_err)?;
    let out = PyList::empty(py);
    for r in &rows {
        out.append(to_py(py, r)?)?;
    }
    Ok(out)
}

#[pymodule]
fn rnnem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyTagger>()?;
    m.add_class::<PyCheckpoint>()?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_checkpoint, m)?)?;
    m.add_function(wrap_pyfunction!(score_f1, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_slots, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
