//! External memory: an `m x n` matrix of `n` slots, content-addressed by cosine similarity.
//!
//! One timestep of the memory-augmented cell uses the pieces here in this order:
//! [`ExternalMemory::read`] with the previous weights, hidden update (in the cell),
//! [`address`], [`interpolate_weight`], then [`ExternalMemory::write`].
//!
//! Writes are per slot: `M'(:,c) = f(c) M(:,c) + w(c) v` with `f = 1 - w ⊙ e`,
//! i.e. `M' = M diag(f) + v wᵀ`. The erase vector has one entry per slot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::tensor::{cosine_slices, dot, norm, sigmoid, softmax_in_place, softplus, softplus_grad, Tensor, COSINE_EPS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalMemory {
    slot_dim: usize,
    slot_count: usize,
    /// `slot_dim x slot_count`, one slot per column.
    content: Tensor,
    /// Read weights from the previous step, on the simplex.
    weights: Tensor,
    init_value: f64,
}

impl ExternalMemory {
    pub fn new(slot_dim: usize, slot_count: usize, init_value: f64) -> Result<Self> {
        if slot_dim == 0 || slot_count == 0 {
            return Err(Error::Config(format!(
                "memory needs positive dimensions, got {slot_dim}x{slot_count}"
            )));
        }
        if !init_value.is_finite() {
            return Err(Error::Config("memory init value must be finite".into()));
        }
        let mut mem = ExternalMemory {
            slot_dim,
            slot_count,
            content: Tensor::zeros(slot_dim, slot_count),
            weights: Tensor::zeros(slot_count, 1),
            init_value,
        };
        mem.reset();
        Ok(mem)
    }

    /// Builds a memory from explicit contents and weights. Weights must lie on the simplex.
    pub fn from_parts(content: Tensor, weights: Tensor, init_value: f64) -> Result<Self> {
        let (m, n) = content.shape();
        if weights.shape() != (n, 1) {
            return Err(Error::Shape {
                op: "ExternalMemory::from_parts",
                left: content.shape(),
                right: weights.shape(),
            });
        }
        check_simplex(&weights, "memory weights")?;
        Ok(ExternalMemory {
            slot_dim: m,
            slot_count: n,
            content,
            weights,
            init_value,
        })
    }

    /// Like [`ExternalMemory::from_parts`] without the simplex check; finite-difference probes only.
    #[cfg(test)]
    pub(crate) fn from_parts_unchecked(content: Tensor, weights: Tensor, init_value: f64) -> Self {
        ExternalMemory {
            slot_dim: content.rows(),
            slot_count: content.cols(),
            content,
            weights,
            init_value,
        }
    }

    pub fn slot_dim(&self) -> usize {
        self.slot_dim
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn content(&self) -> &Tensor {
        &self.content
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn init_value(&self) -> f64 {
        self.init_value
    }

    pub fn slot(&self, c: usize) -> Vec<f64> {
        self.content.column(c)
    }

    /// Fills every slot with the init value and makes the weights uniform.
    pub fn reset(&mut self) {
        self.content.fill(self.init_value);
        self.weights.fill(1.0 / self.slot_count as f64);
    }

    /// `c = M w` with the stored (previous-step) memory and weights.
    pub fn read(&self) -> Tensor {
        let mut c = vec![0.0; self.slot_dim];
        self.content.mul_vec_into(self.weights.data(), &mut c);
        Tensor::vector(c)
    }

    /// Writes with weights `w` driven by hidden activity `h`; `w` becomes the stored weights.
    pub fn write(&self, params: &AddressingParams, h: &Tensor, w: &Tensor) -> Result<ExternalMemory> {
        if w.len() == self.slot_count {
            check_simplex(w, "write weights")?;
        }
        Ok(self.write_traced(params, h, w)?.0)
    }

    pub(crate) fn write_traced(
        &self,
        params: &AddressingParams,
        h: &Tensor,
        w: &Tensor,
    ) -> Result<(ExternalMemory, WriteTrace)> {
        params.check_dims(h.len(), self.slot_dim, self.slot_count)?;
        if w.shape() != (self.slot_count, 1) {
            return Err(Error::Shape {
                op: "write",
                left: self.content.shape(),
                right: w.shape(),
            });
        }
        let h = h.data();
        let mut v = params.content_b.data().to_vec();
        params.content_w.mul_vec_into(h, &mut v);
        let mut e_pre = params.erase_b.data().to_vec();
        params.erase_w.mul_vec_into(h, &mut e_pre);
        let e: Vec<f64> = e_pre.iter().map(|&x| sigmoid(x)).collect();
        let f: Vec<f64> = w.data().iter().zip(&e).map(|(wc, ec)| 1.0 - wc * ec).collect();
        let mut next = self.content.clone();
        apply_write(&mut next, &f, w.data(), &v);
        let mem = ExternalMemory {
            slot_dim: self.slot_dim,
            slot_count: self.slot_count,
            content: next,
            weights: w.clone(),
            init_value: self.init_value,
        };
        Ok((mem, WriteTrace { content: v, erase: e, forget: f }))
    }
}

/// `M(:,c) <- f(c) M(:,c) + w(c) v`. Slots with `w(c) == 0` are left bit-identical.
fn apply_write(content: &mut Tensor, forget: &[f64], w: &[f64], v: &[f64]) {
    let n = content.cols();
    for (r, vr) in v.iter().enumerate() {
        let row = content.row_mut(r);
        for c in 0..n {
            if w[c] == 0.0 {
                continue;
            }
            row[c] = forget[c] * row[c] + w[c] * vr;
        }
    }
}

/// Trainable parameters of the key, sharpening, interpolation gate, new-content and erase maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddressingParams {
    pub key_w: Tensor,
    pub key_b: Tensor,
    pub sharpen_w: Tensor,
    pub sharpen_b: Tensor,
    pub gate_w: Tensor,
    pub gate_b: Tensor,
    pub content_w: Tensor,
    pub content_b: Tensor,
    pub erase_w: Tensor,
    pub erase_b: Tensor,
}

impl AddressingParams {
    pub fn zeros(hidden: usize, slot_dim: usize, slot_count: usize) -> Self {
        AddressingParams {
            key_w: Tensor::zeros(slot_dim, hidden),
            key_b: Tensor::zeros(slot_dim, 1),
            sharpen_w: Tensor::zeros(1, hidden),
            sharpen_b: Tensor::zeros(1, 1),
            gate_w: Tensor::zeros(1, hidden),
            gate_b: Tensor::zeros(1, 1),
            content_w: Tensor::zeros(slot_dim, hidden),
            content_b: Tensor::zeros(slot_dim, 1),
            erase_w: Tensor::zeros(slot_count, hidden),
            erase_b: Tensor::zeros(slot_count, 1),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.key_w.cols()
    }

    pub fn check_dims(&self, hidden: usize, slot_dim: usize, slot_count: usize) -> Result<()> {
        let (p, m, n) = (hidden, slot_dim, slot_count);
        let expected = [(m, p), (m, 1), (1, p), (1, 1), (1, p), (1, 1), (m, p), (m, 1), (n, p), (n, 1)];
        for ((name, got), want) in self.tensors().into_iter().zip(expected) {
            if got.shape() != want {
                return Err(Error::Shape {
                    op: name,
                    left: got.shape(),
                    right: want,
                });
            }
        }
        Ok(())
    }

    /// Interpolation gate `g = sigmoid(W_g h + b_g)`, returning `(pre-activation, g)`.
    pub fn gate(&self, h: &[f64]) -> (f64, f64) {
        let pre = dot(self.gate_w.data(), h) + self.gate_b.data()[0];
        (pre, sigmoid(pre))
    }
}

impl ParamSet for AddressingParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("key_w", &self.key_w),
            ("key_b", &self.key_b),
            ("sharpen_w", &self.sharpen_w),
            ("sharpen_b", &self.sharpen_b),
            ("gate_w", &self.gate_w),
            ("gate_b", &self.gate_b),
            ("content_w", &self.content_w),
            ("content_b", &self.content_b),
            ("erase_w", &self.erase_w),
            ("erase_b", &self.erase_b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![
            ("key_w", &mut self.key_w),
            ("key_b", &mut self.key_b),
            ("sharpen_w", &mut self.sharpen_w),
            ("sharpen_b", &mut self.sharpen_b),
            ("gate_w", &mut self.gate_w),
            ("gate_b", &mut self.gate_b),
            ("content_w", &mut self.content_w),
            ("content_b", &mut self.content_b),
            ("erase_w", &mut self.erase_w),
            ("erase_b", &mut self.erase_b),
        ]
    }
}

/// Result of content addressing against the stored memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Addressing {
    pub key: Tensor,
    pub sharpen_pre: f64,
    pub beta: f64,
    /// Cosine similarity of the key with each slot.
    pub similarity: Vec<f64>,
    pub w_hat: Tensor,
}

/// Content addressing: `w_hat ∝ exp(beta * cos(k, M(:,c)))` with `beta = softplus(W_β h + b_β)`.
pub fn address(mem: &ExternalMemory, params: &AddressingParams, h: &Tensor) -> Result<Addressing> {
    params.check_dims(h.len(), mem.slot_dim, mem.slot_count)?;
    if !h.is_vector() {
        return Err(Error::Shape {
            op: "address",
            left: h.shape(),
            right: (params.hidden_dim(), 1),
        });
    }
    let h = h.data();
    let mut key = params.key_b.data().to_vec();
    params.key_w.mul_vec_into(h, &mut key);
    let sharpen_pre = dot(params.sharpen_w.data(), h) + params.sharpen_b.data()[0];
    let beta = softplus(sharpen_pre);
    let similarity: Vec<f64> = (0..mem.slot_count)
        .map(|c| cosine_slices(&key, &mem.slot(c)))
        .collect();
    let mut w_hat: Vec<f64> = similarity.iter().map(|s| beta * s).collect();
    softmax_in_place(&mut w_hat);
    Ok(Addressing {
        key: Tensor::vector(key),
        sharpen_pre,
        beta,
        similarity,
        w_hat: Tensor::vector(w_hat),
    })
}

/// `w = (1 - g) w_prev + g w_hat` for `g` in `[0, 1]`.
pub fn interpolate_weight(w_prev: &Tensor, w_hat: &Tensor, g: f64) -> Result<Tensor> {
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::contract(format!("interpolation gate {g} outside [0, 1]")));
    }
    w_prev.check_same_shape("interpolate_weight", w_hat)?;
    Ok(Tensor::vector(
        w_prev
            .data()
            .iter()
            .zip(w_hat.data())
            .map(|(p, q)| (1.0 - g) * p + g * q)
            .collect(),
    ))
}

pub(crate) fn check_simplex(w: &Tensor, what: &str) -> Result<()> {
    let sum: f64 = w.data().iter().sum();
    if w.data().iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!("{what} not on the probability simplex (sum {sum})")));
    }
    Ok(())
}

/// Intermediates of a write kept for the backward pass.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct WriteTrace {
    pub content: Vec<f64>,
    pub erase: Vec<f64>,
    pub forget: Vec<f64>,
}

/// Gradients flowing out of a write.
pub(crate) struct WriteGrads {
    pub d_content: Vec<f64>,
    pub d_erase_pre: Vec<f64>,
    pub d_weights: Vec<f64>,
}

/// Backward through the write given `d_next = dL/dM'`. Adds `dL/dM` into `d_prev`.
pub(crate) fn write_backward(
    prev: &Tensor,
    weights: &[f64],
    trace: &WriteTrace,
    d_next: &Tensor,
    d_prev: &mut Tensor,
) -> WriteGrads {
    let (m, n) = prev.shape();
    let mut d_forget = vec![0.0; n];
    let mut d_weights = vec![0.0; n];
    let mut d_content = vec![0.0; m];
    for r in 0..m {
        let dn = d_next.row(r);
        let pr = prev.row(r);
        let dp = d_prev.row_mut(r);
        let vr = trace.content[r];
        for c in 0..n {
            dp[c] += trace.forget[c] * dn[c];
            d_forget[c] += dn[c] * pr[c];
            d_weights[c] += dn[c] * vr;
            d_content[r] += weights[c] * dn[c];
        }
    }
    let mut d_erase_pre = vec![0.0; n];
    for c in 0..n {
        // f = 1 - w e
        d_weights[c] -= trace.erase[c] * d_forget[c];
        let d_erase = -weights[c] * d_forget[c];
        d_erase_pre[c] = d_erase * trace.erase[c] * (1.0 - trace.erase[c]);
    }
    WriteGrads {
        d_content,
        d_erase_pre,
        d_weights,
    }
}

pub(crate) struct AddressGrads {
    pub d_key: Vec<f64>,
    pub d_sharpen_pre: f64,
}

/// Backward through content addressing given `dL/dw_hat`. Adds `dL/dM` into `d_mem`.
pub(crate) fn address_backward(
    mem: &Tensor,
    addr: &Addressing,
    d_w_hat: &[f64],
    d_mem: &mut Tensor,
) -> AddressGrads {
    let (m, n) = mem.shape();
    let w_hat = addr.w_hat.data();
    let inner = dot(d_w_hat, w_hat);
    let key = addr.key.data();
    let key_norm = norm(key);
    let mut d_key = vec![0.0; m];
    let mut d_beta = 0.0;
    for c in 0..n {
        let dz = w_hat[c] * (d_w_hat[c] - inner);
        d_beta += dz * addr.similarity[c];
        let ds = addr.beta * dz;
        if ds == 0.0 {
            continue;
        }
        let slot = mem.column(c);
        let slot_norm = norm(&slot);
        let num = dot(key, &slot);
        let den = key_norm * slot_norm + COSINE_EPS;
        // d/dk [k·s / (|k||s| + eps)] = s/den - num |s| k / (|k| den²)
        let key_coef = if key_norm > 0.0 { num * slot_norm / (key_norm * den * den) } else { 0.0 };
        let slot_coef = if slot_norm > 0.0 { num * key_norm / (slot_norm * den * den) } else { 0.0 };
        for r in 0..m {
            d_key[r] += ds * (slot[r] / den - key_coef * key[r]);
            let dm = ds * (key[r] / den - slot_coef * slot[r]);
            d_mem.set(r, c, d_mem.get(r, c) + dm);
        }
    }
    AddressGrads {
        d_key,
        d_sharpen_pre: d_beta * softplus_grad(addr.sharpen_pre),
    }
}
