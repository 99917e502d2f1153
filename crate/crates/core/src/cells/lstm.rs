use serde::{Deserialize, Serialize};

use super::gru::add_into;
use super::{affine, CellState, StateGrad};
use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::tensor::{sigmoid, Tensor};

/// Input, previous hidden and bias weights of one LSTM gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub input_w: Tensor,
    pub recurrent_w: Tensor,
    pub b: Tensor,
}

impl GateParams {
    fn zeros(input: usize, hidden: usize) -> Self {
        GateParams {
            input_w: Tensor::zeros(hidden, input),
            recurrent_w: Tensor::zeros(hidden, hidden),
            b: Tensor::zeros(hidden, 1),
        }
    }

    fn pre(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        affine(&self.b, &[(&self.input_w, x), (&self.recurrent_w, h)])
    }

    fn accumulate(&self, d_pre: &[f64], x: &[f64], h: &[f64], g: &mut GateParams, dx: &mut [f64], dh: &mut [f64]) {
        g.input_w.add_outer(d_pre, x);
        g.recurrent_w.add_outer(d_pre, h);
        add_into(g.b.data_mut(), d_pre);
        self.input_w.mul_vec_t_into(d_pre, dx);
        self.recurrent_w.mul_vec_t_into(d_pre, dh);
    }
}

/// LSTM without peepholes:
///
/// ```text
/// i = sigmoid(W_xi x + W_hi h_prev + b_i)     f = sigmoid(...)     o = sigmoid(...)
/// g = tanh(W_xc x + W_hc h_prev + b_c)
/// c = f ⊙ c_prev + i ⊙ g
/// h = o ⊙ tanh(c)
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_gate: GateParams,
    pub forget_gate: GateParams,
    pub output_gate: GateParams,
    pub candidate: GateParams,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            input_gate: GateParams::zeros(input, hidden),
            forget_gate: GateParams::zeros(input, hidden),
            output_gate: GateParams::zeros(input, hidden),
            candidate: GateParams::zeros(input, hidden),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_gate.input_w.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.input_gate.input_w.rows()
    }
}

impl ParamSet for LstmParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("input_gate_input_w", &self.input_gate.input_w),
            ("input_gate_recurrent_w", &self.input_gate.recurrent_w),
            ("input_gate_b", &self.input_gate.b),
            ("forget_gate_input_w", &self.forget_gate.input_w),
            ("forget_gate_recurrent_w", &self.forget_gate.recurrent_w),
            ("forget_gate_b", &self.forget_gate.b),
            ("output_gate_input_w", &self.output_gate.input_w),
            ("output_gate_recurrent_w", &self.output_gate.recurrent_w),
            ("output_gate_b", &self.output_gate.b),
            ("candidate_input_w", &self.candidate.input_w),
            ("candidate_recurrent_w", &self.candidate.recurrent_w),
            ("candidate_b", &self.candidate.b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("input_gate_input_w", &mut self.input_gate.input_w),
            ("input_gate_recurrent_w", &mut self.input_gate.recurrent_w),
            ("input_gate_b", &mut self.input_gate.b),
            ("forget_gate_input_w", &mut self.forget_gate.input_w),
            ("forget_gate_recurrent_w", &mut self.forget_gate.recurrent_w),
            ("forget_gate_b", &mut self.forget_gate.b),
            ("output_gate_input_w", &mut self.output_gate.input_w),
            ("output_gate_recurrent_w", &mut self.output_gate.recurrent_w),
            ("output_gate_b", &mut self.output_gate.b),
            ("candidate_input_w", &mut self.candidate.input_w),
            ("candidate_recurrent_w", &mut self.candidate.recurrent_w),
            ("candidate_b", &mut self.candidate.b),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct LstmCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

pub(super) fn forward(p: &LstmParams, state: &CellState, x: &[f64]) -> Result<(CellState, LstmCache)> {
    let h_prev = state.h.data();
    let c_prev = state
        .cell
        .as_ref()
        .ok_or_else(|| Error::contract("LSTM state without a cell vector"))?
        .data();
    let sig = |mut v: Vec<f64>| {
        v.iter_mut().for_each(|x| *x = sigmoid(*x));
        v
    };
    let i = sig(p.input_gate.pre(x, h_prev));
    let f = sig(p.forget_gate.pre(x, h_prev));
    let o = sig(p.output_gate.pre(x, h_prev));
    let mut g = p.candidate.pre(x, h_prev);
    g.iter_mut().for_each(|v| *v = v.tanh());
    let n = h_prev.len();
    let c: Vec<f64> = (0..n).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..n).map(|k| o[k] * tanh_c[k]).collect();
    let next = CellState {
        h: Tensor::vector(h),
        cell: Some(Tensor::vector(c)),
        memory: None,
    };
    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        o,
        g,
        tanh_c,
    };
    Ok((next, cache))
}

pub(super) fn backward(
    p: &LstmParams,
    c: &LstmCache,
    dh: Vec<f64>,
    grad_next: &StateGrad,
    g: &mut LstmParams,
) -> Result<(StateGrad, Tensor)> {
    let dc_next = grad_next
        .cell
        .as_ref()
        .ok_or_else(|| Error::contract("LSTM state gradient without a cell vector"))?
        .data();
    let n = dh.len();
    let mut d_in = vec![0.0; n];
    let mut d_forget = vec![0.0; n];
    let mut d_out = vec![0.0; n];
    let mut d_cand = vec![0.0; n];
    let mut dc_prev = vec![0.0; n];
    for k in 0..n {
        let dc = dc_next[k] + dh[k] * c.o[k] * (1.0 - c.tanh_c[k] * c.tanh_c[k]);
        d_out[k] = dh[k] * c.tanh_c[k] * c.o[k] * (1.0 - c.o[k]);
        d_in[k] = dc * c.g[k] * c.i[k] * (1.0 - c.i[k]);
        d_forget[k] = dc * c.c_prev[k] * c.f[k] * (1.0 - c.f[k]);
        d_cand[k] = dc * c.i[k] * (1.0 - c.g[k] * c.g[k]);
        dc_prev[k] = dc * c.f[k];
    }
    let mut dx = vec![0.0; c.x.len()];
    let mut dh_prev = vec![0.0; n];
    p.input_gate.accumulate(&d_in, &c.x, &c.h_prev, &mut g.input_gate, &mut dx, &mut dh_prev);
    p.forget_gate.accumulate(&d_forget, &c.x, &c.h_prev, &mut g.forget_gate, &mut dx, &mut dh_prev);
    p.output_gate.accumulate(&d_out, &c.x, &c.h_prev, &mut g.output_gate, &mut dx, &mut dh_prev);
    p.candidate.accumulate(&d_cand, &c.x, &c.h_prev, &mut g.candidate, &mut dx, &mut dh_prev);
    let state = StateGrad {
        h: Tensor::vector(dh_prev),
        cell: Some(Tensor::vector(dc_prev)),
        memory: None,
    };
    Ok((state, Tensor::vector(dx)))
}
