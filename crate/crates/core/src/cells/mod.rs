//! Recurrent cells behind one interface: Elman, LSTM, GRU-style gated RNN, and the
//! memory-augmented cell. Each provides a forward step that caches its intermediates
//! and a hand-derived backward step.

mod elman;
mod gru;
mod lstm;
mod memory_cell;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::ExternalMemory;
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub use elman::ElmanParams;
pub use gru::GruParams;
pub use lstm::LstmParams;
pub use memory_cell::MemoryCellParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    SimpleRnn,
    Lstm,
    Grnn,
    RnnEm,
}

impl CellKind {
    pub const ALL: [CellKind; 4] = [CellKind::SimpleRnn, CellKind::Lstm, CellKind::Grnn, CellKind::RnnEm];

    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::SimpleRnn => "simple_rnn",
            CellKind::Lstm => "lstm",
            CellKind::Grnn => "grnn",
            CellKind::RnnEm => "rnn_em",
        }
    }

    pub fn uses_memory(self) -> bool {
        self == CellKind::RnnEm
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CellKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown cell kind '{s}' (expected simple_rnn, lstm, grnn or rnn_em)")))
    }
}

/// Sizes of one cell. `slot_dim` and `slot_count` only matter for the memory cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDims {
    pub input: usize,
    pub hidden: usize,
    pub slot_dim: usize,
    pub slot_count: usize,
}

impl CellDims {
    pub fn new(input: usize, hidden: usize, slot_dim: usize, slot_count: usize) -> Self {
        CellDims {
            input,
            hidden,
            slot_dim,
            slot_count,
        }
    }

    fn validate(&self, kind: CellKind) -> Result<()> {
        if self.input == 0 || self.hidden == 0 {
            return Err(Error::Config(format!("cell dimensions must be positive: {self:?}")));
        }
        if kind.uses_memory() && (self.slot_dim == 0 || self.slot_count == 0) {
            return Err(Error::Config(format!("memory dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CellParams {
    SimpleRnn(ElmanParams),
    Lstm(LstmParams),
    Grnn(GruParams),
    RnnEm(MemoryCellParams),
}

impl CellParams {
    pub fn zeros(kind: CellKind, dims: CellDims) -> Result<Self> {
        dims.validate(kind)?;
        Ok(match kind {
            CellKind::SimpleRnn => CellParams::SimpleRnn(ElmanParams::zeros(dims.input, dims.hidden)),
            CellKind::Lstm => CellParams::Lstm(LstmParams::zeros(dims.input, dims.hidden)),
            CellKind::Grnn => CellParams::Grnn(GruParams::zeros(dims.input, dims.hidden)),
            CellKind::RnnEm => CellParams::RnnEm(MemoryCellParams::zeros(dims)),
        })
    }

    /// Glorot-uniform weights (`r = sqrt(6 / (fan_in + fan_out))` per matrix), zero biases.
    pub fn init(kind: CellKind, dims: CellDims, rng: &mut Rng) -> Result<Self> {
        let mut params = CellParams::zeros(kind, dims)?;
        for (name, t) in params.tensors_mut() {
            if is_bias(name) {
                continue;
            }
            glorot_fill(t, rng);
        }
        Ok(params)
    }

    pub fn kind(&self) -> CellKind {
        match self {
            CellParams::SimpleRnn(_) => CellKind::SimpleRnn,
            CellParams::Lstm(_) => CellKind::Lstm,
            CellParams::Grnn(_) => CellKind::Grnn,
            CellParams::RnnEm(_) => CellKind::RnnEm,
        }
    }

    pub fn dims(&self) -> CellDims {
        match self {
            CellParams::SimpleRnn(p) => CellDims::new(p.input_w.cols(), p.input_w.rows(), 0, 0),
            CellParams::Lstm(p) => CellDims::new(p.input_dim(), p.hidden_dim(), 0, 0),
            CellParams::Grnn(p) => CellDims::new(p.input_w.cols(), p.input_w.rows(), 0, 0),
            CellParams::RnnEm(p) => p.dims(),
        }
    }

    /// Fresh recurrent state: zero hidden (and cell) vectors, reset memory.
    pub fn initial_state(&self, memory_init: f64) -> Result<CellState> {
        let dims = self.dims();
        let h = Tensor::zeros(dims.hidden, 1);
        Ok(match self.kind() {
            CellKind::SimpleRnn | CellKind::Grnn => CellState {
                h,
                cell: None,
                memory: None,
            },
            CellKind::Lstm => CellState {
                h,
                cell: Some(Tensor::zeros(dims.hidden, 1)),
                memory: None,
            },
            CellKind::RnnEm => CellState {
                h,
                cell: None,
                memory: Some(ExternalMemory::new(dims.slot_dim, dims.slot_count, memory_init)?),
            },
        })
    }
}

impl ParamSet for CellParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            CellParams::SimpleRnn(p) => p.tensors(),
            CellParams::Lstm(p) => p.tensors(),
            CellParams::Grnn(p) => p.tensors(),
            CellParams::RnnEm(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        match self {
            CellParams::SimpleRnn(p) => p.tensors_mut(),
            CellParams::Lstm(p) => p.tensors_mut(),
            CellParams::Grnn(p) => p.tensors_mut(),
            CellParams::RnnEm(p) => p.tensors_mut(),
        }
    }
}

pub(crate) fn is_bias(name: &str) -> bool {
    name.ends_with("_b")
}

pub(crate) fn glorot_fill(t: &mut Tensor, rng: &mut Rng) {
    let r = (6.0 / (t.rows() + t.cols()) as f64).sqrt();
    for v in t.data_mut() {
        *v = rng.uniform(-r, r);
    }
}

/// Recurrent state carried between timesteps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub h: Tensor,
    /// LSTM cell vector.
    pub cell: Option<Tensor>,
    /// Memory cell only.
    pub memory: Option<ExternalMemory>,
}

impl CellState {
    /// Memory-cell states keep their memory but get a zero hidden vector.
    pub fn clear_hidden(&mut self) {
        self.h.fill(0.0);
        if let Some(c) = self.cell.as_mut() {
            c.fill(0.0);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryGrad {
    pub content: Tensor,
    pub weights: Tensor,
}

/// Gradient of the loss with respect to a [`CellState`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateGrad {
    pub h: Tensor,
    pub cell: Option<Tensor>,
    pub memory: Option<MemoryGrad>,
}

impl StateGrad {
    pub fn zeros_for(state: &CellState) -> StateGrad {
        StateGrad {
            h: Tensor::zeros_like(&state.h),
            cell: state.cell.as_ref().map(Tensor::zeros_like),
            memory: state.memory.as_ref().map(|m| MemoryGrad {
                content: Tensor::zeros_like(m.content()),
                weights: Tensor::zeros_like(m.weights()),
            }),
        }
    }
}

/// Per-step intermediates retained for the backward pass.
#[derive(Clone, Debug)]
pub enum StepCache {
    SimpleRnn(elman::ElmanCache),
    Lstm(lstm::LstmCache),
    Grnn(gru::GruCache),
    RnnEm(Box<memory_cell::MemoryCellCache>),
}

/// One forward step. Returns the next state and the cache for [`step_backward`].
pub fn step_forward(params: &CellParams, state: &CellState, x: &Tensor) -> Result<(CellState, StepCache)> {
    let dims = params.dims();
    if x.len() != dims.input || !x.is_vector() {
        return Err(Error::Shape {
            op: "step_forward input",
            left: x.shape(),
            right: (dims.input, 1),
        });
    }
    if state.h.len() != dims.hidden {
        return Err(Error::Shape {
            op: "step_forward state",
            left: state.h.shape(),
            right: (dims.hidden, 1),
        });
    }
    let (next, cache) = match params {
        CellParams::SimpleRnn(p) => {
            let (s, c) = elman::forward(p, state, x.data());
            (s, StepCache::SimpleRnn(c))
        }
        CellParams::Lstm(p) => {
            let (s, c) = lstm::forward(p, state, x.data())?;
            (s, StepCache::Lstm(c))
        }
        CellParams::Grnn(p) => {
            let (s, c) = gru::forward(p, state, x.data());
            (s, StepCache::Grnn(c))
        }
        CellParams::RnnEm(p) => {
            let (s, c) = memory_cell::forward(p, state, x.data())?;
            (s, StepCache::RnnEm(Box::new(c)))
        }
    };
    if !next.h.is_finite() {
        return Err(Error::Numeric {
            what: "hidden state".into(),
            step: 0,
        });
    }
    Ok((next, cache))
}

/// Gradients produced by one backward step.
#[derive(Clone, Debug)]
pub struct StepGrads {
    pub params: CellParams,
    pub state: StateGrad,
    pub x: Tensor,
}

/// Backward through one step. `grad_h` is the gradient reaching `h_t` from outside the
/// recurrence (the output layer); `grad_next` is the gradient on the state this step produced.
pub fn step_backward(
    params: &CellParams,
    cache: &StepCache,
    grad_h: &Tensor,
    grad_next: &StateGrad,
) -> Result<StepGrads> {
    let mut grads = params.zeroed();
    let (state, x) = step_backward_accumulate(params, cache, grad_h, grad_next, &mut grads)?;
    Ok(StepGrads { params: grads, state, x })
}

/// Like [`step_backward`] but adds parameter gradients into `grads`.
pub fn step_backward_accumulate(
    params: &CellParams,
    cache: &StepCache,
    grad_h: &Tensor,
    grad_next: &StateGrad,
    grads: &mut CellParams,
) -> Result<(StateGrad, Tensor)> {
    if grad_h.len() != params.dims().hidden || grad_next.h.len() != grad_h.len() {
        return Err(Error::Shape {
            op: "step_backward",
            left: grad_h.shape(),
            right: grad_next.h.shape(),
        });
    }
    let dh: Vec<f64> = grad_h.data().iter().zip(grad_next.h.data()).map(|(a, b)| a + b).collect();
    match (params, cache, grads) {
        (CellParams::SimpleRnn(p), StepCache::SimpleRnn(c), CellParams::SimpleRnn(g)) => Ok(elman::backward(p, c, dh, g)),
        (CellParams::Lstm(p), StepCache::Lstm(c), CellParams::Lstm(g)) => lstm::backward(p, c, dh, grad_next, g),
        (CellParams::Grnn(p), StepCache::Grnn(c), CellParams::Grnn(g)) => Ok(gru::backward(p, c, dh, g)),
        (CellParams::RnnEm(p), StepCache::RnnEm(c), CellParams::RnnEm(g)) => memory_cell::backward(p, c, dh, grad_next, g),
        _ => Err(Error::contract("step cache or gradient buffer does not match the cell kind")),
    }
}

/// `out = b + W1 x1 + W2 x2 + ...`
pub(crate) fn affine(bias: &Tensor, terms: &[(&Tensor, &[f64])]) -> Vec<f64> {
    let mut out = bias.data().to_vec();
    for (w, x) in terms {
        w.mul_vec_into(x, &mut out);
    }
    out
}

#[cfg(test)]
mod tests;
