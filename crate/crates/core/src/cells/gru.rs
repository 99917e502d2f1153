use serde::{Deserialize, Serialize};

use super::{affine, CellState, StateGrad};
use crate::params::ParamSet;
use crate::tensor::{sigmoid, Tensor};

/// Gated RNN with reset gate `r` and update gate `z`:
///
/// ```text
/// r  = sigmoid(W_xr x + W_hr h_prev + b_r)
/// z  = sigmoid(W_xz x + W_hz h_prev + b_z)
/// h~ = tanh(W_xh x + W_hh (r ⊙ h_prev) + b_h)
/// h  = (1 - z) ⊙ h_prev + z ⊙ h~
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub input_w: Tensor,
    pub recurrent_w: Tensor,
    pub hidden_b: Tensor,
    pub reset_input_w: Tensor,
    pub reset_recurrent_w: Tensor,
    pub reset_b: Tensor,
    pub update_input_w: Tensor,
    pub update_recurrent_w: Tensor,
    pub update_b: Tensor,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            input_w: Tensor::zeros(hidden, input),
            recurrent_w: Tensor::zeros(hidden, hidden),
            hidden_b: Tensor::zeros(hidden, 1),
            reset_input_w: Tensor::zeros(hidden, input),
            reset_recurrent_w: Tensor::zeros(hidden, hidden),
            reset_b: Tensor::zeros(hidden, 1),
            update_input_w: Tensor::zeros(hidden, input),
            update_recurrent_w: Tensor::zeros(hidden, hidden),
            update_b: Tensor::zeros(hidden, 1),
        }
    }
}

impl ParamSet for GruParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("input_w", &self.input_w),
            ("recurrent_w", &self.recurrent_w),
            ("hidden_b", &self.hidden_b),
            ("reset_input_w", &self.reset_input_w),
            ("reset_recurrent_w", &self.reset_recurrent_w),
            ("reset_b", &self.reset_b),
            ("update_input_w", &self.update_input_w),
            ("update_recurrent_w", &self.update_recurrent_w),
            ("update_b", &self.update_b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("input_w", &mut self.input_w),
            ("recurrent_w", &mut self.recurrent_w),
            ("hidden_b", &mut self.hidden_b),
            ("reset_input_w", &mut self.reset_input_w),
            ("reset_recurrent_w", &mut self.reset_recurrent_w),
            ("reset_b", &mut self.reset_b),
            ("update_input_w", &mut self.update_input_w),
            ("update_recurrent_w", &mut self.update_recurrent_w),
            ("update_b", &mut self.update_b),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct GruCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    reset: Vec<f64>,
    update: Vec<f64>,
    candidate: Vec<f64>,
    reset_h: Vec<f64>,
}

pub(super) fn forward(p: &GruParams, state: &CellState, x: &[f64]) -> (CellState, GruCache) {
    let h_prev = state.h.data();
    let mut reset = affine(&p.reset_b, &[(&p.reset_input_w, x), (&p.reset_recurrent_w, h_prev)]);
    reset.iter_mut().for_each(|v| *v = sigmoid(*v));
    let mut update = affine(&p.update_b, &[(&p.update_input_w, x), (&p.update_recurrent_w, h_prev)]);
    update.iter_mut().for_each(|v| *v = sigmoid(*v));
    let reset_h: Vec<f64> = reset.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let mut candidate = affine(&p.hidden_b, &[(&p.input_w, x), (&p.recurrent_w, &reset_h)]);
    candidate.iter_mut().for_each(|v| *v = v.tanh());
    let h: Vec<f64> = (0..h_prev.len())
        .map(|i| (1.0 - update[i]) * h_prev[i] + update[i] * candidate[i])
        .collect();
    let next = CellState {
        h: Tensor::vector(h),
        cell: None,
        memory: None,
    };
    let cache = GruCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        reset,
        update,
        candidate,
        reset_h,
    };
    (next, cache)
}

pub(super) fn backward(p: &GruParams, c: &GruCache, dh: Vec<f64>, g: &mut GruParams) -> (StateGrad, Tensor) {
    let n = dh.len();
    let mut dh_prev: Vec<f64> = (0..n).map(|i| dh[i] * (1.0 - c.update[i])).collect();
    let mut dx = vec![0.0; c.x.len()];

    let d_cand_pre: Vec<f64> = (0..n)
        .map(|i| dh[i] * c.update[i] * (1.0 - c.candidate[i] * c.candidate[i]))
        .collect();
    g.input_w.add_outer(&d_cand_pre, &c.x);
    g.recurrent_w.add_outer(&d_cand_pre, &c.reset_h);
    add_into(g.hidden_b.data_mut(), &d_cand_pre);
    p.input_w.mul_vec_t_into(&d_cand_pre, &mut dx);
    let mut d_reset_h = vec![0.0; n];
    p.recurrent_w.mul_vec_t_into(&d_cand_pre, &mut d_reset_h);

    let d_update_pre: Vec<f64> = (0..n)
        .map(|i| dh[i] * (c.candidate[i] - c.h_prev[i]) * c.update[i] * (1.0 - c.update[i]))
        .collect();
    let d_reset_pre: Vec<f64> = (0..n)
        .map(|i| d_reset_h[i] * c.h_prev[i] * c.reset[i] * (1.0 - c.reset[i]))
        .collect();
    for i in 0..n {
        dh_prev[i] += d_reset_h[i] * c.reset[i];
    }

    g.update_input_w.add_outer(&d_update_pre, &c.x);
    g.update_recurrent_w.add_outer(&d_update_pre, &c.h_prev);
    add_into(g.update_b.data_mut(), &d_update_pre);
    p.update_input_w.mul_vec_t_into(&d_update_pre, &mut dx);
    p.update_recurrent_w.mul_vec_t_into(&d_update_pre, &mut dh_prev);

    g.reset_input_w.add_outer(&d_reset_pre, &c.x);
    g.reset_recurrent_w.add_outer(&d_reset_pre, &c.h_prev);
    add_into(g.reset_b.data_mut(), &d_reset_pre);
    p.reset_input_w.mul_vec_t_into(&d_reset_pre, &mut dx);
    p.reset_recurrent_w.mul_vec_t_into(&d_reset_pre, &mut dh_prev);

    let state = StateGrad {
        h: Tensor::vector(dh_prev),
        cell: None,
        memory: None,
    };
    (state, Tensor::vector(dx))
}

pub(super) fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
