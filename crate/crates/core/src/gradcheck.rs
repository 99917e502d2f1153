//! Finite-difference check of full-model gradients on random tiny configurations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cells::CellKind;
use crate::data::TaggedSequence;
use crate::error::Result;
use crate::params::ParamSet;
use crate::rng::Rng;
use crate::tagger::{ModelDims, TaggerModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckOptions {
    pub seed: u64,
    pub kinds: Vec<CellKind>,
    pub seq_len: usize,
    /// Coordinates sampled per cell kind; every tensor gets at least one.
    pub samples: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Test hook: perturbs the analytic gradient of this tensor before comparing.
    pub corrupt: Option<String>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            seed: 7,
            kinds: CellKind::ALL.to_vec(),
            seq_len: 6,
            samples: 200,
            step: 1e-5,
            tolerance: 1e-4,
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub sampled: usize,
    pub worst_rel_err: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindCheck {
    pub kind: CellKind,
    pub dims: ModelDims,
    pub tensors: Vec<TensorCheck>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub kinds: Vec<KindCheck>,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradcheckReport {
    pub fn failures(&self) -> Vec<(CellKind, &str)> {
        self.kinds
            .iter()
            .flat_map(|k| k.tensors.iter().filter(|t| !t.passed).map(move |t| (k.kind, t.name.as_str())))
            .collect()
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in &self.kinds {
            let d = &k.dims;
            writeln!(
                f,
                "{} {} (d={} p={} m={} n={} L={})",
                k.kind,
                if k.passed { "PASS" } else { "FAIL" },
                d.embed,
                d.hidden,
                d.slot_dim,
                d.slot_count,
                d.labels
            )?;
            for t in &k.tensors {
                writeln!(
                    f,
                    "  {:<28} {:>4} coords  worst rel err {:.3e}{}",
                    t.name,
                    t.sampled,
                    t.worst_rel_err,
                    if t.passed { "" } else { "  FAIL" }
                )?;
            }
        }
        write!(
            f,
            "gradcheck {} (tolerance {:e})",
            if self.passed { "passed" } else { "FAILED" },
            self.tolerance
        )
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn random_dims(rng: &mut Rng) -> ModelDims {
    ModelDims {
        vocab: 2 + rng.range_inclusive(3, 6),
        embed: rng.range_inclusive(2, 4),
        hidden: rng.range_inclusive(2, 5),
        labels: rng.range_inclusive(2, 5),
        slot_dim: rng.range_inclusive(1, 4),
        slot_count: rng.range_inclusive(1, 3),
        window_size: 3,
    }
}

pub fn gradcheck(opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let root = Rng::new(opts.seed);
    let mut kinds = Vec::new();
    for (i, &kind) in opts.kinds.iter().enumerate() {
        let mut rng = root.fork(i as u64 + 1);
        kinds.push(check_kind(kind, opts, &mut rng)?);
    }
    let passed = kinds.iter().all(|k| k.passed);
    Ok(GradcheckReport {
        kinds,
        tolerance: opts.tolerance,
        passed,
    })
}

fn check_kind(kind: CellKind, opts: &GradcheckOptions, rng: &mut Rng) -> Result<KindCheck> {
    let mut dims = random_dims(rng);
    if !kind.uses_memory() {
        dims.slot_dim = 0;
        dims.slot_count = 0;
    }
    let mut model = TaggerModel::new(kind, dims, rng)?;
    // Nonzero biases so every term of every gradient is exercised.
    for (_, t) in model.params_mut().tensors_mut() {
        for v in t.data_mut() {
            *v += rng.uniform(-0.5, 0.5);
        }
    }
    let words: Vec<usize> = (0..opts.seq_len).map(|_| rng.range_inclusive(2, dims.vocab - 1)).collect();
    let labels: Vec<usize> = (0..opts.seq_len).map(|_| rng.below(dims.labels)).collect();
    let sentence = TaggedSequence {
        words,
        labels,
        raw_tokens: vec![],
        raw_labels: vec![],
    };
    let mut init = model.initial_state(0.1)?;
    if let Some(mem) = init.memory.as_mut() {
        let mut content = mem.content().clone();
        for v in content.data_mut() {
            *v = rng.uniform(-0.5, 0.5);
        }
        *mem = crate::memory::ExternalMemory::from_parts(content, mem.weights().clone(), 0.1)?;
    }
    let pass = model.forward_sequence(&sentence, &init)?;
    let mut grads = model.backward_sequence(&pass)?;
    if let Some(name) = &opts.corrupt {
        for (n, t) in grads.tensors_mut() {
            if n == name {
                for v in t.data_mut() {
                    *v = *v * 1.5 + 1e-2;
                }
            }
        }
    }

    let sizes: Vec<(String, usize)> = model.params().tensors().iter().map(|(n, t)| (n.to_string(), t.len())).collect();
    let total: usize = sizes.iter().map(|(_, s)| s).sum();
    let mut picks: Vec<(usize, usize)> = sizes.iter().enumerate().map(|(ti, (_, s))| (ti, rng.below(*s))).collect();
    while picks.len() < opts.samples.max(sizes.len()).min(total) {
        let mut flat = rng.below(total);
        let mut ti = 0;
        while flat >= sizes[ti].1 {
            flat -= sizes[ti].1;
            ti += 1;
        }
        picks.push((ti, flat));
    }

    let loss_at = |ti: usize, i: usize, delta: f64| -> Result<f64> {
        let mut m = model.clone();
        m.params_mut().tensors_mut()[ti].1.data_mut()[i] += delta;
        Ok(m.forward_sequence(&sentence, &init)?.loss.total_nll)
    };
    let mut worst = vec![0.0f64; sizes.len()];
    let mut counts = vec![0usize; sizes.len()];
    for (ti, i) in picks {
        let numeric = (loss_at(ti, i, opts.step)? - loss_at(ti, i, -opts.step)?) / (2.0 * opts.step);
        let analytic = grads.tensors()[ti].1.data()[i];
        worst[ti] = worst[ti].max(relative_error(analytic, numeric));
        counts[ti] += 1;
    }
    let tensors: Vec<TensorCheck> = sizes
        .into_iter()
        .zip(worst.into_iter().zip(counts))
        .map(|((name, _), (w, c))| TensorCheck {
            name,
            sampled: c,
            worst_rel_err: w,
            passed: w < opts.tolerance,
        })
        .collect();
    let passed = tensors.iter().all(|t| t.passed);
    Ok(KindCheck {
        kind,
        dims,
        tensors,
        passed,
    })
}
