use serde::{Deserialize, Serialize};

use super::{affine, CellState, StateGrad};
use crate::params::ParamSet;
use crate::tensor::Tensor;

/// `h_t = tanh(W_xh x_t + W_hh h_{t-1} + b_h)`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElmanParams {
    pub input_w: Tensor,
    pub recurrent_w: Tensor,
    pub hidden_b: Tensor,
}

impl ElmanParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        ElmanParams {
            input_w: Tensor::zeros(hidden, input),
            recurrent_w: Tensor::zeros(hidden, hidden),
            hidden_b: Tensor::zeros(hidden, 1),
        }
    }
}

impl ParamSet for ElmanParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("input_w", &self.input_w),
            ("recurrent_w", &self.recurrent_w),
            ("hidden_b", &self.hidden_b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("input_w", &mut self.input_w),
            ("recurrent_w", &mut self.recurrent_w),
            ("hidden_b", &mut self.hidden_b),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct ElmanCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    h: Vec<f64>,
}

pub(super) fn forward(p: &ElmanParams, state: &CellState, x: &[f64]) -> (CellState, ElmanCache) {
    let h_prev = state.h.data();
    let mut h = affine(&p.hidden_b, &[(&p.input_w, x), (&p.recurrent_w, h_prev)]);
    h.iter_mut().for_each(|v| *v = v.tanh());
    let next = CellState {
        h: Tensor::vector(h.clone()),
        cell: None,
        memory: None,
    };
    let cache = ElmanCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        h,
    };
    (next, cache)
}

pub(super) fn backward(p: &ElmanParams, c: &ElmanCache, dh: Vec<f64>, g: &mut ElmanParams) -> (StateGrad, Tensor) {
    let da: Vec<f64> = dh.iter().zip(&c.h).map(|(d, h)| d * (1.0 - h * h)).collect();
    g.input_w.add_outer(&da, &c.x);
    g.recurrent_w.add_outer(&da, &c.h_prev);
    for (b, d) in g.hidden_b.data_mut().iter_mut().zip(&da) {
        *b += d;
    }
    let mut dx = vec![0.0; c.x.len()];
    p.input_w.mul_vec_t_into(&da, &mut dx);
    let mut dh_prev = vec![0.0; c.h_prev.len()];
    p.recurrent_w.mul_vec_t_into(&da, &mut dh_prev);
    let state = StateGrad {
        h: Tensor::vector(dh_prev),
        cell: None,
        memory: None,
    };
    (state, Tensor::vector(dx))
}
