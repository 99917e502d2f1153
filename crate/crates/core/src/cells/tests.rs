use super::*;
use crate::memory::ExternalMemory;
use crate::rng::Rng;

fn random_vec(rng: &mut Rng, n: usize, scale: f64) -> Tensor {
    Tensor::vector((0..n).map(|_| rng.uniform(-scale, scale)).collect())
}

fn random_simplex(rng: &mut Rng, n: usize) -> Tensor {
    let raw: Vec<f64> = (0..n).map(|_| rng.uniform(0.05, 1.0)).collect();
    let s: f64 = raw.iter().sum();
    Tensor::vector(raw.into_iter().map(|x| x / s).collect())
}

/// Parameters with every tensor, biases included, drawn uniformly from `[-scale, scale]`.
fn random_params(kind: CellKind, dims: CellDims, rng: &mut Rng, scale: f64) -> CellParams {
    let mut p = CellParams::zeros(kind, dims).unwrap();
    for (_, t) in p.tensors_mut() {
        for v in t.data_mut() {
            *v = rng.uniform(-scale, scale);
        }
    }
    p
}

fn random_state(params: &CellParams, rng: &mut Rng) -> CellState {
    let dims = params.dims();
    let mut s = params.initial_state(0.1).unwrap();
    s.h = random_vec(rng, dims.hidden, 0.9);
    if let Some(c) = s.cell.as_mut() {
        *c = random_vec(rng, dims.hidden, 1.0);
    }
    if let Some(m) = s.memory.as_mut() {
        let content = random_vec(rng, dims.slot_dim * dims.slot_count, 1.0).into_vec();
        *m = ExternalMemory::from_parts(
            Tensor::from_vec(dims.slot_dim, dims.slot_count, content).unwrap(),
            random_simplex(rng, dims.slot_count),
            0.1,
        )
        .unwrap();
    }
    s
}

/// Random linear functional of a state: the "upstream" gradient used for checks.
fn random_state_grad(state: &CellState, rng: &mut Rng) -> StateGrad {
    let mut g = StateGrad::zeros_for(state);
    g.h = random_vec(rng, g.h.len(), 1.0);
    if let Some(c) = g.cell.as_mut() {
        *c = random_vec(rng, c.len(), 1.0);
    }
    if let Some(m) = g.memory.as_mut() {
        let (r, c) = m.content.shape();
        m.content = Tensor::from_vec(r, c, random_vec(rng, r * c, 1.0).into_vec()).unwrap();
        m.weights = random_vec(rng, m.weights.len(), 1.0);
    }
    g
}

fn pair(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// `L = <dh_out, h> + <g.h, h> + <g.cell, cell> + <g.M, M> + <g.w, w>` for the produced state.
fn functional(state: &CellState, grad_h: &Tensor, g: &StateGrad) -> f64 {
    let mut l = pair(&state.h, grad_h) + pair(&state.h, &g.h);
    if let (Some(c), Some(gc)) = (&state.cell, &g.cell) {
        l += pair(c, gc);
    }
    if let (Some(m), Some(gm)) = (&state.memory, &g.memory) {
        l += pair(m.content(), &gm.content) + pair(m.weights(), &gm.weights);
    }
    l
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

const FD_STEP: f64 = 1e-5;

#[test]
fn zero_params_zero_state_gives_zero_hidden() {
    let dims = CellDims::new(4, 3, 0, 0);
    let params = CellParams::zeros(CellKind::SimpleRnn, dims).unwrap();
    let state = params.initial_state(0.1).unwrap();
    let (next, _) = step_forward(&params, &state, &Tensor::vector(vec![0.3, -1.0, 2.0, 0.5])).unwrap();
    assert!(next.h.data().iter().all(|&v| v == 0.0));
}

#[test]
fn closed_update_gate_keeps_previous_hidden() {
    let mut rng = Rng::new(10);
    let dims = CellDims::new(4, 3, 0, 0);
    let mut params = random_params(CellKind::Grnn, dims, &mut rng, 0.5);
    if let CellParams::Grnn(p) = &mut params {
        p.update_b.fill(-60.0);
    }
    let state = random_state(&params, &mut rng);
    let (next, _) = step_forward(&params, &state, &random_vec(&mut rng, 4, 1.0)).unwrap();
    for (a, b) in next.h.data().iter().zip(state.h.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn open_gates_reduce_gru_to_elman() {
    let mut rng = Rng::new(11);
    let dims = CellDims::new(5, 4, 0, 0);
    let mut gru = GruParams::zeros(5, 4);
    let mut elman = ElmanParams::zeros(5, 4);
    for t in [&mut elman.input_w, &mut elman.recurrent_w, &mut elman.hidden_b] {
        for v in t.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
    }
    gru.input_w = elman.input_w.clone();
    gru.recurrent_w = elman.recurrent_w.clone();
    gru.hidden_b = elman.hidden_b.clone();
    gru.reset_b.fill(100.0);
    gru.update_b.fill(100.0);
    let gru = CellParams::Grnn(gru);
    let elman = CellParams::SimpleRnn(elman);
    assert_eq!(gru.dims(), dims);
    let mut sg = gru.initial_state(0.1).unwrap();
    let mut se = elman.initial_state(0.1).unwrap();
    for _ in 0..5 {
        let x = random_vec(&mut rng, 5, 1.0);
        sg = step_forward(&gru, &sg, &x).unwrap().0;
        se = step_forward(&elman, &se, &x).unwrap().0;
        assert_eq!(sg.h, se.h);
    }
}

/// Straight-line evaluation of one memory-cell step with plain arrays.
struct OracleStep {
    h: Vec<f64>,
    w: Vec<f64>,
    memory: Vec<Vec<f64>>,
}

fn oracle_memory_step(
    p: &MemoryCellParams,
    x: &[f64],
    mem: &[Vec<f64>], // mem[r][c], m rows, n columns
    w_prev: &[f64],
) -> OracleStep {
    let (pd, m, n) = (p.input_w.rows(), mem.len(), w_prev.len());
    let d = x.len();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut c = vec![0.0; m];
    for r in 0..m {
        for j in 0..n {
            c[r] += mem[r][j] * w_prev[j];
        }
    }
    let mut h = vec![0.0; pd];
    for i in 0..pd {
        let mut a = p.hidden_b.get(i, 0);
        for j in 0..d {
            a += p.input_w.get(i, j) * x[j];
        }
        for j in 0..m {
            a += p.read_w.get(i, j) * c[j];
        }
        h[i] = a.tanh();
    }
    let ad = &p.addressing;
    let lin = |w: &Tensor, b: &Tensor, row: usize| {
        let mut s = b.get(row, 0);
        for j in 0..pd {
            s += w.get(row, j) * h[j];
        }
        s
    };
    let k: Vec<f64> = (0..m).map(|r| lin(&ad.key_w, &ad.key_b, r)).collect();
    let beta = (1.0 + lin(&ad.sharpen_w, &ad.sharpen_b, 0).exp()).ln();
    let knorm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut scores = vec![0.0; n];
    for j in 0..n {
        let mut dotp = 0.0;
        let mut snorm = 0.0;
        for r in 0..m {
            dotp += k[r] * mem[r][j];
            snorm += mem[r][j] * mem[r][j];
        }
        let cos = dotp / (knorm * snorm.sqrt() + 1e-8);
        scores[j] = (beta * cos).exp();
    }
    let z: f64 = scores.iter().sum();
    let g = sig(lin(&ad.gate_w, &ad.gate_b, 0));
    let w: Vec<f64> = (0..n).map(|j| (1.0 - g) * w_prev[j] + g * scores[j] / z).collect();
    let v: Vec<f64> = (0..m).map(|r| lin(&ad.content_w, &ad.content_b, r)).collect();
    let e: Vec<f64> = (0..n).map(|j| sig(lin(&ad.erase_w, &ad.erase_b, j))).collect();
    let memory = (0..m)
        .map(|r| (0..n).map(|j| (1.0 - w[j] * e[j]) * mem[r][j] + w[j] * v[r]).collect())
        .collect();
    OracleStep { h, w, memory }
}

#[test]
fn memory_step_matches_straight_line_oracle() {
    let mut rng = Rng::new(2015);
    let dims = CellDims::new(4, 3, 2, 2);
    let params = random_params(CellKind::RnnEm, dims, &mut rng, 1.0);
    let state = random_state(&params, &mut rng);
    let x = random_vec(&mut rng, 4, 1.0);
    let (next, _) = step_forward(&params, &state, &x).unwrap();

    let CellParams::RnnEm(p) = &params else { unreachable!() };
    let mem = state.memory.as_ref().unwrap();
    let rows: Vec<Vec<f64>> = (0..2).map(|r| mem.content().row(r).to_vec()).collect();
    let oracle = oracle_memory_step(p, x.data(), &rows, mem.weights().data());
    for (a, b) in next.h.data().iter().zip(&oracle.h) {
        assert!((a - b).abs() < 1e-12);
    }
    let got = next.memory.as_ref().unwrap();
    for (a, b) in got.weights().data().iter().zip(&oracle.w) {
        assert!((a - b).abs() < 1e-12);
    }
    for r in 0..2 {
        for c in 0..2 {
            assert!((got.content().get(r, c) - oracle.memory[r][c]).abs() < 1e-12);
        }
    }
}

#[test]
fn single_slot_memory_step_is_gated_recurrence() {
    let mut rng = Rng::new(12);
    let dims = CellDims::new(3, 4, 5, 1);
    let params = random_params(CellKind::RnnEm, dims, &mut rng, 0.7);
    let state = random_state(&params, &mut rng);
    let (next, _) = step_forward(&params, &state, &random_vec(&mut rng, 3, 1.0)).unwrap();
    let CellParams::RnnEm(p) = &params else { unreachable!() };
    let h = next.h.data();
    let e = crate::tensor::sigmoid(crate::tensor::dot(p.addressing.erase_w.data(), h) + p.addressing.erase_b.data()[0]);
    let mut v = p.addressing.content_b.data().to_vec();
    p.addressing.content_w.mul_vec_into(h, &mut v);
    let before = state.memory.as_ref().unwrap().content();
    let after = next.memory.as_ref().unwrap();
    assert_eq!(after.weights().data(), &[1.0]);
    for r in 0..5 {
        assert_eq!(after.content().get(r, 0), (1.0 - e) * before.get(r, 0) + v[r]);
    }
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut rng = Rng::new(13);
    for kind in CellKind::ALL {
        let dims = CellDims::new(3, 4, 3, 2);
        let params = random_params(kind, dims, &mut rng, 0.5);
        let state = random_state(&params, &mut rng);
        let (next, cache) = step_forward(&params, &state, &random_vec(&mut rng, 3, 1.0)).unwrap();
        let zero = StateGrad::zeros_for(&next);
        let grads = step_backward(&params, &cache, &Tensor::zeros(4, 1), &zero).unwrap();
        assert_eq!(grads.params.sum_squares(), 0.0, "{kind}");
        assert_eq!(grads.x.sum_squares(), 0.0);
        assert_eq!(grads.state, StateGrad::zeros_for(&state), "{kind}");
    }
}

#[test]
fn mismatched_cache_is_a_contract_error() {
    let mut rng = Rng::new(14);
    let dims = CellDims::new(3, 4, 3, 2);
    let elman = random_params(CellKind::SimpleRnn, dims, &mut rng, 0.5);
    let gru = random_params(CellKind::Grnn, dims, &mut rng, 0.5);
    let state = elman.initial_state(0.1).unwrap();
    let (next, cache) = step_forward(&elman, &state, &random_vec(&mut rng, 3, 1.0)).unwrap();
    let err = step_backward(&gru, &cache, &Tensor::zeros(4, 1), &StateGrad::zeros_for(&next)).unwrap_err();
    assert!(matches!(err, Error::Contract(_)));
}

#[test]
fn forward_rejects_bad_shapes() {
    let dims = CellDims::new(3, 4, 3, 2);
    for kind in CellKind::ALL {
        let params = CellParams::zeros(kind, dims).unwrap();
        let state = params.initial_state(0.1).unwrap();
        assert!(step_forward(&params, &state, &Tensor::zeros(2, 1)).is_err());
    }
    let em = CellParams::zeros(CellKind::RnnEm, dims).unwrap();
    let elman_state = CellParams::zeros(CellKind::SimpleRnn, dims).unwrap().initial_state(0.1).unwrap();
    assert!(matches!(
        step_forward(&em, &elman_state, &Tensor::zeros(3, 1)),
        Err(Error::Contract(_))
    ));
}

/// Every parameter, input and previous-state coordinate of one step against central differences.
fn check_single_step(kind: CellKind, dims: CellDims, seed: u64) {
    let mut rng = Rng::new(seed);
    let params = random_params(kind, dims, &mut rng, 0.8);
    let state = random_state(&params, &mut rng);
    let x = random_vec(&mut rng, dims.input, 1.0);
    let (next, cache) = step_forward(&params, &state, &x).unwrap();
    let grad_h = random_vec(&mut rng, dims.hidden, 1.0);
    let upstream = random_state_grad(&next, &mut rng);
    let grads = step_backward(&params, &cache, &grad_h, &upstream).unwrap();

    let loss = |p: &CellParams, s: &CellState, x: &Tensor| {
        let (n, _) = step_forward(p, s, x).unwrap();
        functional(&n, &grad_h, &upstream)
    };

    let names: Vec<&str> = params.tensors().iter().map(|(n, _)| *n).collect();
    for (ti, name) in names.iter().enumerate() {
        let len = params.tensors()[ti].1.len();
        for i in 0..len {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].1.data_mut()[i] += FD_STEP;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].1.data_mut()[i] -= FD_STEP;
            let numeric = (loss(&plus, &state, &x) - loss(&minus, &state, &x)) / (2.0 * FD_STEP);
            let analytic = grads.params.tensors()[ti].1.data()[i];
            assert!(
                rel_err(analytic, numeric) < 1e-4,
                "{kind} {name}[{i}]: analytic {analytic} numeric {numeric}"
            );
        }
    }
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += FD_STEP;
        let mut minus = x.clone();
        minus.data_mut()[i] -= FD_STEP;
        let numeric = (loss(&params, &state, &plus) - loss(&params, &state, &minus)) / (2.0 * FD_STEP);
        assert!(rel_err(grads.x.data()[i], numeric) < 1e-4, "{kind} x[{i}]");
    }
    // Previous hidden state (unused by the memory cell, whose gradient must then be zero).
    for i in 0..dims.hidden {
        let mut plus = state.clone();
        plus.h.data_mut()[i] += FD_STEP;
        let mut minus = state.clone();
        minus.h.data_mut()[i] -= FD_STEP;
        let numeric = (loss(&params, &plus, &x) - loss(&params, &minus, &x)) / (2.0 * FD_STEP);
        assert!(rel_err(grads.state.h.data()[i], numeric) < 1e-4, "{kind} h_prev[{i}]");
    }
    if let Some(c) = &state.cell {
        for i in 0..c.len() {
            let mut plus = state.clone();
            plus.cell.as_mut().unwrap().data_mut()[i] += FD_STEP;
            let mut minus = state.clone();
            minus.cell.as_mut().unwrap().data_mut()[i] -= FD_STEP;
            let numeric = (loss(&params, &plus, &x) - loss(&params, &minus, &x)) / (2.0 * FD_STEP);
            assert!(rel_err(grads.state.cell.as_ref().unwrap().data()[i], numeric) < 1e-4, "{kind} c_prev[{i}]");
        }
    }
    if let Some(mem) = &state.memory {
        let gm = grads.state.memory.as_ref().unwrap();
        for i in 0..mem.content().len() {
            let perturb = |delta: f64| {
                let mut content = mem.content().clone();
                content.data_mut()[i] += delta;
                let mut s = state.clone();
                s.memory = Some(ExternalMemory::from_parts(content, mem.weights().clone(), 0.1).unwrap());
                s
            };
            let numeric = (loss(&params, &perturb(FD_STEP), &x) - loss(&params, &perturb(-FD_STEP), &x)) / (2.0 * FD_STEP);
            assert!(rel_err(gm.content.data()[i], numeric) < 1e-4, "{kind} M_prev[{i}]");
        }
        for i in 0..mem.slot_count() {
            let perturb = |delta: f64| {
                let mut w = mem.weights().clone();
                w.data_mut()[i] += delta;
                let mut s = state.clone();
                s.memory = Some(ExternalMemory::from_parts_unchecked(mem.content().clone(), w, 0.1));
                s
            };
            let numeric = (loss(&params, &perturb(FD_STEP), &x) - loss(&params, &perturb(-FD_STEP), &x)) / (2.0 * FD_STEP);
            assert!(rel_err(gm.weights.data()[i], numeric) < 1e-4, "{kind} w_prev[{i}]");
        }
    }
}

#[test]
fn single_step_gradients_match_finite_differences() {
    let configs = [
        CellDims::new(4, 5, 4, 3),
        CellDims::new(2, 3, 2, 1),
        CellDims::new(3, 2, 3, 2),
    ];
    for (i, dims) in configs.into_iter().enumerate() {
        for kind in CellKind::ALL {
            check_single_step(kind, dims, 100 + i as u64);
        }
    }
}

/// Runs `len` steps and returns `sum_t <a_t, h_t>` restricted to the last step when `last_only`.
fn unrolled_loss(params: &CellParams, init: &CellState, xs: &[Tensor], coefs: &[Tensor], last_only: bool) -> f64 {
    let mut state = init.clone();
    let mut loss = 0.0;
    for (t, x) in xs.iter().enumerate() {
        state = step_forward(params, &state, x).unwrap().0;
        if !last_only || t + 1 == xs.len() {
            loss += pair(&state.h, &coefs[t]);
        }
    }
    loss
}

fn unrolled_grads(params: &CellParams, init: &CellState, xs: &[Tensor], coefs: &[Tensor], last_only: bool) -> CellParams {
    let mut states = vec![init.clone()];
    let mut caches = Vec::new();
    for x in xs {
        let (s, c) = step_forward(params, states.last().unwrap(), x).unwrap();
        states.push(s);
        caches.push(c);
    }
    let mut grads = params.zeroed();
    let mut upstream = StateGrad::zeros_for(states.last().unwrap());
    for t in (0..xs.len()).rev() {
        let gh = if !last_only || t + 1 == xs.len() {
            coefs[t].clone()
        } else {
            Tensor::zeros_like(&coefs[t])
        };
        upstream = step_backward_accumulate(params, &caches[t], &gh, &upstream, &mut grads).unwrap().0;
    }
    grads
}

#[test]
fn memory_carries_gradient_across_steps() {
    let mut rng = Rng::new(15);
    let dims = CellDims::new(3, 4, 3, 3);
    let params = random_params(CellKind::RnnEm, dims, &mut rng, 0.8);
    let init = params.initial_state(0.1).unwrap();
    let xs: Vec<Tensor> = (0..4).map(|_| random_vec(&mut rng, 3, 1.0)).collect();
    let coefs: Vec<Tensor> = (0..4).map(|_| random_vec(&mut rng, 4, 1.0)).collect();
    // Loss only at the fourth step: the new-content map reaches it only through memory written earlier.
    let grads = unrolled_grads(&params, &init, &xs, &coefs, true);
    let CellParams::RnnEm(g) = &grads else { unreachable!() };
    assert!(g.addressing.content_w.max_abs() > 1e-6);

    for (ti, (name, t)) in params.tensors().into_iter().enumerate() {
        for i in 0..t.len() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].1.data_mut()[i] += FD_STEP;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].1.data_mut()[i] -= FD_STEP;
            let numeric = (unrolled_loss(&plus, &init, &xs, &coefs, true) - unrolled_loss(&minus, &init, &xs, &coefs, true))
                / (2.0 * FD_STEP);
            let analytic = grads.tensors()[ti].1.data()[i];
            assert!(rel_err(analytic, numeric) < 1e-4, "{name}[{i}]: {analytic} vs {numeric}");
        }
    }
}

#[test]
fn six_step_bptt_matches_finite_differences() {
    for (k, kind) in CellKind::ALL.into_iter().enumerate() {
        let mut rng = Rng::new(200 + k as u64);
        let dims = CellDims::new(4, 5, 4, 3);
        let params = random_params(kind, dims, &mut rng, 0.6);
        let init = params.initial_state(0.1).unwrap();
        let xs: Vec<Tensor> = (0..6).map(|_| random_vec(&mut rng, 4, 1.0)).collect();
        let coefs: Vec<Tensor> = (0..6).map(|_| random_vec(&mut rng, 5, 1.0)).collect();
        let grads = unrolled_grads(&params, &init, &xs, &coefs, false);
        for (ti, (name, t)) in params.tensors().into_iter().enumerate() {
            for i in 0..t.len() {
                let mut plus = params.clone();
                plus.tensors_mut()[ti].1.data_mut()[i] += FD_STEP;
                let mut minus = params.clone();
                minus.tensors_mut()[ti].1.data_mut()[i] -= FD_STEP;
                let numeric = (unrolled_loss(&plus, &init, &xs, &coefs, false)
                    - unrolled_loss(&minus, &init, &xs, &coefs, false))
                    / (2.0 * FD_STEP);
                let analytic = grads.tensors()[ti].1.data()[i];
                assert!(rel_err(analytic, numeric) < 1e-4, "{kind} {name}[{i}]: {analytic} vs {numeric}");
            }
        }
    }
}

#[test]
fn init_is_deterministic_and_bounded() {
    let dims = CellDims::new(6, 5, 4, 3);
    for kind in CellKind::ALL {
        let a = CellParams::init(kind, dims, &mut Rng::new(7)).unwrap();
        let b = CellParams::init(kind, dims, &mut Rng::new(7)).unwrap();
        assert_eq!(a, b);
        for (name, t) in a.tensors() {
            if is_bias(name) {
                assert_eq!(t.max_abs(), 0.0, "{name}");
            } else {
                let r = (6.0 / (t.rows() + t.cols()) as f64).sqrt();
                assert!(t.max_abs() <= r, "{name}");
                assert!(t.max_abs() > 0.0, "{name}");
            }
        }
    }
    assert!(CellParams::init(CellKind::SimpleRnn, CellDims::new(0, 5, 0, 0), &mut Rng::new(1)).is_err());
    assert!(CellParams::init(CellKind::RnnEm, CellDims::new(3, 5, 0, 2), &mut Rng::new(1)).is_err());
}

#[test]
fn reference_configuration_shapes() {
    // 100 hidden units, 8 slots of dimension 40, window of 3 embeddings of dimension 100.
    let dims = CellDims::new(3 * 100, 100, 40, 8);
    let params = CellParams::init(CellKind::RnnEm, dims, &mut Rng::new(1)).unwrap();
    let CellParams::RnnEm(p) = &params else { unreachable!() };
    assert_eq!(p.input_w.shape(), (100, 300));
    assert_eq!(p.read_w.shape(), (100, 40));
    assert_eq!(p.addressing.key_w.shape(), (40, 100));
    assert_eq!(p.addressing.sharpen_w.shape(), (1, 100));
    assert_eq!(p.addressing.content_w.shape(), (40, 100));
    assert_eq!(p.addressing.erase_w.shape(), (8, 100));
    assert_eq!(params.dims(), dims);
    let state = params.initial_state(0.1).unwrap();
    assert_eq!(state.memory.unwrap().content().shape(), (40, 8));
}

#[test]
fn parameter_counts() {
    let elman = CellParams::zeros(CellKind::SimpleRnn, CellDims::new(3, 2, 0, 0)).unwrap();
    assert_eq!(elman.param_count(), 12);
    let lstm = CellParams::zeros(CellKind::Lstm, CellDims::new(3, 2, 0, 0)).unwrap();
    assert_eq!(lstm.param_count(), 4 * 12);
    let gru = CellParams::zeros(CellKind::Grnn, CellDims::new(3, 2, 0, 0)).unwrap();
    assert_eq!(gru.param_count(), 3 * 12);
    // p*d + p*m + p + (m*p + m) + (p + 1) + (p + 1) + (m*p + m) + (n*p + n)
    let (d, p, m, n) = (7, 5, 4, 3);
    let em = CellParams::zeros(CellKind::RnnEm, CellDims::new(d, p, m, n)).unwrap();
    let expected = p * d + p * m + p + (m * p + m) + (p + 1) + (p + 1) + (m * p + m) + (n * p + n);
    assert_eq!(em.param_count(), expected);
}

#[test]
fn table_three_reference_counts() {
    // Recurrent part only, with a window of three 100-dimensional embeddings as input.
    let input = 300;
    let count = |kind, hidden, m, n| {
        CellParams::zeros(kind, CellDims::new(input, hidden, m, n))
            .unwrap()
            .param_count()
    };
    let brute = |hidden: usize, gates: usize| gates * (hidden * input + hidden * hidden + hidden);
    assert_eq!(count(CellKind::SimpleRnn, 115, 0, 0), brute(115, 1));
    assert_eq!(count(CellKind::Lstm, 50, 0, 0), brute(50, 4));
    assert_eq!(count(CellKind::Grnn, 60, 0, 0), brute(60, 3));
    assert_eq!(count(CellKind::RnnEm, 100, 40, 8), 100 * 300 + 100 * 40 + 100 + 2 * (40 * 100 + 40) + 2 * 101 + 8 * 100 + 8);
}

#[test]
fn kind_names_round_trip() {
    for kind in CellKind::ALL {
        assert_eq!(kind.as_str().parse::<CellKind>().unwrap(), kind);
    }
    assert!("gru".parse::<CellKind>().is_err());
}
