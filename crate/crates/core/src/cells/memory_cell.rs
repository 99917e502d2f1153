use serde::{Deserialize, Serialize};

use super::gru::add_into;
use super::{affine, CellDims, CellState, MemoryGrad, StateGrad};
use crate::error::{Error, Result};
use crate::memory::{address, address_backward, interpolate_weight, write_backward, Addressing, AddressingParams, WriteTrace};
use crate::params::ParamSet;
use crate::tensor::Tensor;

/// Elman-style cell whose recurrent input is a read from an external memory:
///
/// ```text
/// c_t = M_{t-1} w_{t-1}
/// h_t = tanh(W_ih x_t + W_c c_t + b_h)
/// ```
///
/// followed by addressing, weight interpolation and the gated write.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryCellParams {
    pub input_w: Tensor,
    pub read_w: Tensor,
    pub hidden_b: Tensor,
    pub addressing: AddressingParams,
}

impl MemoryCellParams {
    pub fn zeros(dims: CellDims) -> Self {
        MemoryCellParams {
            input_w: Tensor::zeros(dims.hidden, dims.input),
            read_w: Tensor::zeros(dims.hidden, dims.slot_dim),
            hidden_b: Tensor::zeros(dims.hidden, 1),
            addressing: AddressingParams::zeros(dims.hidden, dims.slot_dim, dims.slot_count),
        }
    }

    pub fn dims(&self) -> CellDims {
        CellDims::new(
            self.input_w.cols(),
            self.input_w.rows(),
            self.read_w.cols(),
            self.addressing.erase_w.rows(),
        )
    }
}

impl ParamSet for MemoryCellParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut v = vec![
            ("input_w", &self.input_w),
            ("read_w", &self.read_w),
            ("hidden_b", &self.hidden_b),
        ];
        v.extend(self.addressing.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut v = vec![
            ("input_w", &mut self.input_w),
            ("read_w", &mut self.read_w),
            ("hidden_b", &mut self.hidden_b),
        ];
        v.extend(self.addressing.tensors_mut());
        v
    }
}

#[derive(Clone, Debug)]
pub struct MemoryCellCache {
    x: Vec<f64>,
    read: Vec<f64>,
    prev_content: Tensor,
    prev_weights: Vec<f64>,
    h: Vec<f64>,
    addressing: Addressing,
    gate: f64,
    weights: Vec<f64>,
    write: WriteTrace,
}

pub(super) fn forward(p: &MemoryCellParams, state: &CellState, x: &[f64]) -> Result<(CellState, MemoryCellCache)> {
    let mem = state
        .memory
        .as_ref()
        .ok_or_else(|| Error::contract("memory cell state without an external memory"))?;
    let dims = p.dims();
    if mem.slot_dim() != dims.slot_dim || mem.slot_count() != dims.slot_count {
        return Err(Error::Shape {
            op: "memory cell state",
            left: mem.content().shape(),
            right: (dims.slot_dim, dims.slot_count),
        });
    }
    let read = mem.read();
    let mut h = affine(&p.hidden_b, &[(&p.input_w, x), (&p.read_w, read.data())]);
    h.iter_mut().for_each(|v| *v = v.tanh());
    let h = Tensor::vector(h);
    let addressing = address(mem, &p.addressing, &h)?;
    let (_, gate) = p.addressing.gate(h.data());
    let w = interpolate_weight(mem.weights(), &addressing.w_hat, gate)?;
    let (next_mem, write) = mem.write_traced(&p.addressing, &h, &w)?;
    if !next_mem.content().is_finite() {
        return Err(Error::Numeric {
            what: "external memory".into(),
            step: 0,
        });
    }
    let cache = MemoryCellCache {
        x: x.to_vec(),
        read: read.into_vec(),
        prev_content: mem.content().clone(),
        prev_weights: mem.weights().data().to_vec(),
        h: h.data().to_vec(),
        addressing,
        gate,
        weights: w.into_vec(),
        write,
    };
    let next = CellState {
        h,
        cell: None,
        memory: Some(next_mem),
    };
    Ok((next, cache))
}

pub(super) fn backward(
    p: &MemoryCellParams,
    c: &MemoryCellCache,
    mut dh: Vec<f64>,
    grad_next: &StateGrad,
    g: &mut MemoryCellParams,
) -> Result<(StateGrad, Tensor)> {
    let next = grad_next
        .memory
        .as_ref()
        .ok_or_else(|| Error::contract("memory cell state gradient without memory"))?;
    let (m, n) = c.prev_content.shape();
    let mut d_content = Tensor::zeros(m, n);

    // write: M' = M diag(f) + v wᵀ, f = 1 - w ⊙ e
    let wg = write_backward(&c.prev_content, &c.weights, &c.write, &next.content, &mut d_content);
    let dw: Vec<f64> = next.weights.data().iter().zip(&wg.d_weights).map(|(a, b)| a + b).collect();

    // w = (1 - g) w_prev + g w_hat
    let w_hat = c.addressing.w_hat.data();
    let mut dw_prev: Vec<f64> = dw.iter().map(|d| (1.0 - c.gate) * d).collect();
    let dw_hat: Vec<f64> = dw.iter().map(|d| c.gate * d).collect();
    let dgate: f64 = (0..n).map(|k| (w_hat[k] - c.prev_weights[k]) * dw[k]).sum();
    let d_gate_pre = dgate * c.gate * (1.0 - c.gate);

    let ag = address_backward(&c.prev_content, &c.addressing, &dw_hat, &mut d_content);

    let a = &p.addressing;
    let ga = &mut g.addressing;
    ga.key_w.add_outer(&ag.d_key, &c.h);
    add_into(ga.key_b.data_mut(), &ag.d_key);
    a.key_w.mul_vec_t_into(&ag.d_key, &mut dh);
    ga.sharpen_w.add_outer(&[ag.d_sharpen_pre], &c.h);
    ga.sharpen_b.data_mut()[0] += ag.d_sharpen_pre;
    a.sharpen_w.mul_vec_t_into(&[ag.d_sharpen_pre], &mut dh);
    ga.gate_w.add_outer(&[d_gate_pre], &c.h);
    ga.gate_b.data_mut()[0] += d_gate_pre;
    a.gate_w.mul_vec_t_into(&[d_gate_pre], &mut dh);
    ga.content_w.add_outer(&wg.d_content, &c.h);
    add_into(ga.content_b.data_mut(), &wg.d_content);
    a.content_w.mul_vec_t_into(&wg.d_content, &mut dh);
    ga.erase_w.add_outer(&wg.d_erase_pre, &c.h);
    add_into(ga.erase_b.data_mut(), &wg.d_erase_pre);
    a.erase_w.mul_vec_t_into(&wg.d_erase_pre, &mut dh);

    // h = tanh(W_ih x + W_c c + b)
    let da: Vec<f64> = dh.iter().zip(&c.h).map(|(d, h)| d * (1.0 - h * h)).collect();
    g.input_w.add_outer(&da, &c.x);
    g.read_w.add_outer(&da, &c.read);
    add_into(g.hidden_b.data_mut(), &da);
    let mut dx = vec![0.0; c.x.len()];
    p.input_w.mul_vec_t_into(&da, &mut dx);
    let mut d_read = vec![0.0; m];
    p.read_w.mul_vec_t_into(&da, &mut d_read);

    // read: c = M_prev w_prev
    d_content.add_outer(&d_read, &c.prev_weights);
    c.prev_content.mul_vec_t_into(&d_read, &mut dw_prev);

    let state = StateGrad {
        h: Tensor::zeros(c.h.len(), 1),
        cell: None,
        memory: Some(MemoryGrad {
            content: d_content,
            weights: Tensor::vector(dw_prev),
        }),
    };
    Ok((state, Tensor::vector(dx)))
}
