//! Binary checkpoints.
//!
//! Layout: 8 magic bytes, a little-endian `u32` format version, a little-endian `u64`
//! header length, a JSON header, then every tensor listed in the header as
//! little-endian `f64` values in row-major order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cells::CellKind;
use crate::config::TrainConfig;
use crate::data::Vocab;
use crate::error::{Error, Result};
use crate::optim::{AdaDeltaState, Optimizer};
use crate::params::ParamSet;
use crate::tagger::{ModelDims, TaggerModel};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"RNNEMCKP";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to resume training or to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: TaggerModel,
    pub optimizer: Optimizer,
    pub words: Vocab,
    pub labels: Vocab,
    pub config: TrainConfig,
    /// Completed training epochs.
    pub epoch: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum OptimizerHeader {
    Adadelta { rho: f64, eps: f64 },
    Sgd { learning_rate: f64 },
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    cell: CellKind,
    dims: ModelDims,
    epoch: usize,
    words: Vocab,
    labels: Vocab,
    optimizer: OptimizerHeader,
    config: TrainConfig,
    tensors: Vec<TensorEntry>,
}

fn entries<'a>(prefix: &str, tensors: impl IntoIterator<Item = (&'static str, &'a Tensor)>) -> Vec<(String, &'a Tensor)> {
    tensors.into_iter().map(|(n, t)| (format!("{prefix}{n}"), t)).collect()
}

impl Checkpoint {
    fn blocks(&self) -> Vec<(String, &Tensor)> {
        let params = self.model.params().tensors();
        let names: Vec<&'static str> = params.iter().map(|(n, _)| *n).collect();
        let mut out = entries("model.", params);
        if let Optimizer::AdaDelta(s) = &self.optimizer {
            out.extend(entries("sq_grad.", names.iter().copied().zip(&s.sq_grad)));
            out.extend(entries("sq_delta.", names.iter().copied().zip(&s.sq_delta)));
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let blocks = self.blocks();
        let header = Header {
            cell: self.model.kind(),
            dims: self.model.dims(),
            epoch: self.epoch,
            words: self.words.clone(),
            labels: self.labels.clone(),
            optimizer: match &self.optimizer {
                Optimizer::AdaDelta(s) => OptimizerHeader::Adadelta { rho: s.rho, eps: s.eps },
                Optimizer::Sgd { learning_rate } => OptimizerHeader::Sgd {
                    learning_rate: *learning_rate,
                },
            },
            config: self.config.clone(),
            tensors: blocks
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    rows: t.rows(),
                    cols: t.cols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let floats: usize = blocks.iter().map(|(_, t)| t.len()).sum();
        let mut out = Vec::with_capacity(20 + json.len() + 8 * floats);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, t) in blocks {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(8)? != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic bytes)".into()));
        }
        let version = u32::from_le_bytes(cursor.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let header_len = u64::from_le_bytes(cursor.take(8)?.try_into().expect("8 bytes"));
        let header_len = usize::try_from(header_len).map_err(|_| Error::Format("header length overflow".into()))?;
        let header: Header =
            serde_json::from_slice(cursor.take(header_len)?).map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;

        if header.words.len() != header.dims.vocab || header.labels.len() != header.dims.labels {
            return Err(Error::Format(format!(
                "vocabulary sizes {}/{} disagree with dims {}/{}",
                header.words.len(),
                header.labels.len(),
                header.dims.vocab,
                header.dims.labels
            )));
        }
        let mut model = TaggerModel::zeros(header.cell, header.dims)?;
        let mut optimizer = match header.optimizer {
            OptimizerHeader::Adadelta { rho, eps } => Optimizer::AdaDelta(AdaDeltaState::new(model.params(), rho, eps)?),
            OptimizerHeader::Sgd { learning_rate } => Optimizer::sgd(learning_rate)?,
        };
        {
            let mut targets: Vec<(String, &mut Tensor)> = model
                .params_mut()
                .tensors_mut()
                .into_iter()
                .map(|(n, t)| (format!("model.{n}"), t))
                .collect();
            let names: Vec<String> = targets.iter().map(|(n, _)| n["model.".len()..].to_string()).collect();
            if let Optimizer::AdaDelta(s) = &mut optimizer {
                targets.extend(names.iter().map(|n| format!("sq_grad.{n}")).zip(s.sq_grad.iter_mut()));
                targets.extend(names.iter().map(|n| format!("sq_delta.{n}")).zip(s.sq_delta.iter_mut()));
            }
            if targets.len() != header.tensors.len() {
                return Err(Error::Format(format!(
                    "checkpoint lists {} tensors, model needs {}",
                    header.tensors.len(),
                    targets.len()
                )));
            }
            for (entry, (name, target)) in header.tensors.iter().zip(targets) {
                if entry.name != name || (entry.rows, entry.cols) != target.shape() {
                    return Err(Error::Format(format!(
                        "tensor {} is {}x{}, expected {name} of shape {:?}",
                        entry.name,
                        entry.rows,
                        entry.cols,
                        target.shape()
                    )));
                }
                let raw = cursor.take(8 * target.len())?;
                for (v, chunk) in target.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
                    *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
                }
            }
        }
        if cursor.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after checkpoint", bytes.len() - cursor.pos)));
        }
        Ok(Checkpoint {
            model: TaggerModel::from_parts(header.cell, header.dims, model.params().clone())?,
            optimizer,
            words: header.words,
            labels: header.labels,
            config: header.config,
            epoch: header.epoch,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!(
                "checkpoint truncated: needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}
