//! End-to-end tagger: windowed embeddings, a recurrent cell and a softmax output layer,
//! trained with the summed per-token negative log-likelihood.

use serde::{Deserialize, Serialize};

use crate::cells::{step_backward_accumulate, step_forward, CellDims, CellKind, CellParams, CellState, StateGrad, StepCache};
use crate::data::{TaggedSequence, PAD};
use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tensor::{softmax_in_place, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub labels: usize,
    pub slot_dim: usize,
    pub slot_count: usize,
    /// Total window width: the current word and `window_size / 2` neighbours each side. Odd.
    pub window_size: usize,
}

impl ModelDims {
    pub fn context(&self) -> usize {
        self.window_size / 2
    }

    pub fn cell_dims(&self) -> CellDims {
        CellDims::new(self.window_size * self.embed, self.hidden, self.slot_dim, self.slot_count)
    }

    fn validate(&self) -> Result<()> {
        if self.window_size.is_multiple_of(2) {
            return Err(Error::Config(format!("window size must be odd, got {}", self.window_size)));
        }
        if self.vocab <= PAD || self.embed == 0 || self.labels == 0 {
            return Err(Error::Config(format!("model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// All trainable tensors of a tagger. Also used for their gradients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub embeddings: Tensor,
    pub cell: CellParams,
    pub output_w: Tensor,
    pub output_b: Tensor,
}

impl ParamSet for ModelParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = vec![("embeddings", &self.embeddings)];
        v.extend(self.cell.tensors());
        v.push(("output_w", &self.output_w));
        v.push(("output_b", &self.output_b));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut v = vec![("embeddings", &mut self.embeddings)];
        v.extend(self.cell.tensors_mut());
        v.push(("output_w", &mut self.output_w));
        v.push(("output_b", &mut self.output_b));
        v
    }
}

#[derive(Clone, Debug)]
pub struct TaggerModel {
    kind: CellKind,
    dims: ModelDims,
    params: ModelParams,
    /// Bumped on every mutable access so caches from older parameters are rejected.
    version: u64,
}

impl PartialEq for TaggerModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.dims == other.dims && self.params == other.params
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceLoss {
    /// Natural-log cross-entropy summed over timesteps.
    pub total_nll: f64,
    pub per_word_nll: f64,
    pub token_count: usize,
}

/// Forward intermediates of one sentence.
#[derive(Clone, Debug)]
pub struct SequenceCache {
    version: u64,
    words: Vec<usize>,
    labels: Vec<usize>,
    steps: Vec<StepCache>,
    hidden: Vec<Tensor>,
}

#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub probs: Vec<Tensor>,
    pub final_state: CellState,
    pub loss: SequenceLoss,
    pub cache: SequenceCache,
}

/// Concatenated embeddings of positions `t - k ..= t + k`; out-of-range positions use the padding row.
pub fn window_input(sentence: &[usize], t: usize, k: usize, embeddings: &Tensor) -> Result<Tensor> {
    if t >= sentence.len() {
        return Err(Error::contract(format!(
            "window position {t} outside sentence of length {}",
            sentence.len()
        )));
    }
    let d = embeddings.cols();
    let mut x = Vec::with_capacity((2 * k + 1) * d);
    for pos in t as isize - k as isize..=(t + k) as isize {
        let w = if pos < 0 || pos as usize >= sentence.len() {
            PAD
        } else {
            sentence[pos as usize]
        };
        if w >= embeddings.rows() {
            return Err(Error::contract(format!("word index {w} outside vocabulary of {}", embeddings.rows())));
        }
        x.extend_from_slice(embeddings.row(w));
    }
    Ok(Tensor::vector(x))
}

impl TaggerModel {
    /// Glorot-uniform embeddings and weights, zero biases.
    pub fn new(kind: CellKind, dims: ModelDims, rng: &mut Rng) -> Result<Self> {
        dims.validate()?;
        let cell = CellParams::init(kind, dims.cell_dims(), rng)?;
        let mut embeddings = Tensor::zeros(dims.vocab, dims.embed);
        crate::cells::glorot_fill(&mut embeddings, rng);
        let mut output_w = Tensor::zeros(dims.labels, dims.hidden);
        crate::cells::glorot_fill(&mut output_w, rng);
        Ok(TaggerModel {
            kind,
            dims,
            params: ModelParams {
                embeddings,
                cell,
                output_w,
                output_b: Tensor::zeros(dims.labels, 1),
            },
            version: 0,
        })
    }

    /// Zero parameters with the right shapes, e.g. as a target for loading.
    pub fn zeros(kind: CellKind, dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        Ok(TaggerModel {
            kind,
            dims,
            params: ModelParams {
                embeddings: Tensor::zeros(dims.vocab, dims.embed),
                cell: CellParams::zeros(kind, dims.cell_dims())?,
                output_w: Tensor::zeros(dims.labels, dims.hidden),
                output_b: Tensor::zeros(dims.labels, 1),
            },
            version: 0,
        })
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        self.version += 1;
        &mut self.params
    }

    /// Parameters of the recurrent cell only.
    pub fn cell_param_count(&self) -> usize {
        self.params.cell.param_count()
    }

    pub fn initial_state(&self, memory_init: f64) -> Result<CellState> {
        self.params.cell.initial_state(memory_init)
    }

    fn check_sentence(&self, words: &[usize]) -> Result<()> {
        if words.is_empty() {
            return Err(Error::contract("empty sentence"));
        }
        if let Some(&w) = words.iter().find(|&&w| w >= self.dims.vocab) {
            return Err(Error::contract(format!("word index {w} outside vocabulary of {}", self.dims.vocab)));
        }
        Ok(())
    }

    fn output(&self, h: &[f64]) -> Vec<f64> {
        let mut logits = self.params.output_b.data().to_vec();
        self.params.output_w.mul_vec_into(h, &mut logits);
        logits
    }

    fn step(&self, words: &[usize], t: usize, state: &CellState) -> Result<(CellState, StepCache)> {
        let x = window_input(words, t, self.dims.context(), &self.params.embeddings)?;
        step_forward(&self.params.cell, state, &x).map_err(|e| match e {
            Error::Numeric { what, .. } => Error::Numeric { what, step: t },
            other => other,
        })
    }

    pub fn forward_sequence(&self, sentence: &TaggedSequence, init: &CellState) -> Result<ForwardPass> {
        self.check_sentence(&sentence.words)?;
        if sentence.labels.len() != sentence.words.len() {
            return Err(Error::contract("words and labels differ in length"));
        }
        if let Some(&l) = sentence.labels.iter().find(|&&l| l >= self.dims.labels) {
            return Err(Error::contract(format!("label index {l} outside {} labels", self.dims.labels)));
        }
        let n = sentence.len();
        let mut state = init.clone();
        let mut probs = Vec::with_capacity(n);
        let mut steps = Vec::with_capacity(n);
        let mut hidden = Vec::with_capacity(n);
        let mut total = 0.0;
        for t in 0..n {
            let (next, cache) = self.step(&sentence.words, t, &state)?;
            let mut p = self.output(next.h.data());
            let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + p.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += log_z - p[sentence.labels[t]];
            softmax_in_place(&mut p);
            probs.push(Tensor::vector(p));
            hidden.push(next.h.clone());
            steps.push(cache);
            state = next;
        }
        if !total.is_finite() {
            return Err(Error::Numeric {
                what: "sequence loss".into(),
                step: n - 1,
            });
        }
        Ok(ForwardPass {
            probs,
            final_state: state,
            loss: SequenceLoss {
                total_nll: total,
                per_word_nll: total / n as f64,
                token_count: n,
            },
            cache: SequenceCache {
                version: self.version,
                words: sentence.words.clone(),
                labels: sentence.labels.clone(),
                steps,
                hidden,
            },
        })
    }

    /// Gradients of the summed NLL with respect to every parameter.
    pub fn backward_sequence(&self, pass: &ForwardPass) -> Result<ModelParams> {
        let mut grads = self.params.zeroed();
        self.backward_into(pass, &mut grads)?;
        Ok(grads)
    }

    /// Adds this sentence's gradients into `grads`.
    pub fn backward_into(&self, pass: &ForwardPass, grads: &mut ModelParams) -> Result<()> {
        let cache = &pass.cache;
        if cache.version != self.version {
            return Err(Error::contract("stale forward cache: parameters changed since the forward pass"));
        }
        if cache.steps.is_empty() {
            return Err(Error::contract("backward on an empty sentence"));
        }
        let k = self.dims.context();
        let d = self.dims.embed;
        let n = cache.steps.len();
        let mut upstream = StateGrad::zeros_for(&pass.final_state);
        for t in (0..n).rev() {
            let mut d_logits = pass.probs[t].data().to_vec();
            d_logits[cache.labels[t]] -= 1.0;
            let h = cache.hidden[t].data();
            grads.output_w.add_outer(&d_logits, h);
            for (b, g) in grads.output_b.data_mut().iter_mut().zip(&d_logits) {
                *b += g;
            }
            let mut dh = vec![0.0; self.dims.hidden];
            self.params.output_w.mul_vec_t_into(&d_logits, &mut dh);
            let (prev, dx) =
                step_backward_accumulate(&self.params.cell, &cache.steps[t], &Tensor::vector(dh), &upstream, &mut grads.cell)?;
            for (slot, pos) in (t as isize - k as isize..=(t + k) as isize).enumerate() {
                let w = if pos < 0 || pos as usize >= n { PAD } else { cache.words[pos as usize] };
                let row = grads.embeddings.row_mut(w);
                for (r, g) in row.iter_mut().zip(&dx.data()[slot * d..(slot + 1) * d]) {
                    *r += g;
                }
            }
            upstream = prev;
        }
        Ok(())
    }

    /// Argmax label per position, plus the state after the sentence.
    pub fn predict(&self, words: &[usize], init: &CellState) -> Result<(Vec<usize>, CellState)> {
        self.check_sentence(words)?;
        let mut state = init.clone();
        let mut out = Vec::with_capacity(words.len());
        for t in 0..words.len() {
            let (next, _) = self.step(words, t, &state)?;
            let logits = self.output(next.h.data());
            let best = logits
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0;
            out.push(best);
            state = next;
        }
        Ok((out, state))
    }

    pub(crate) fn from_parts(kind: CellKind, dims: ModelDims, params: ModelParams) -> Result<Self> {
        let reference = TaggerModel::zeros(kind, dims)?;
        for ((name, got), (_, want)) in params.tensors().into_iter().zip(reference.params.tensors()) {
            if got.shape() != want.shape() {
                return Err(Error::Shape {
                    op: name,
                    left: got.shape(),
                    right: want.shape(),
                });
            }
        }
        if params.tensors().len() != reference.params.tensors().len() {
            return Err(Error::contract("parameter set does not match the cell kind"));
        }
        Ok(TaggerModel {
            kind,
            dims,
            params,
            version: 0,
        })
    }
}
