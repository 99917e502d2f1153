//! Parameter updates: AdaDelta (default), plain SGD, and global-norm gradient clipping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSet;
use crate::tensor::Tensor;

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPS: f64 = 1e-6;

/// Running averages of squared gradients and squared updates, one pair per parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaDeltaState {
    pub rho: f64,
    pub eps: f64,
    pub sq_grad: Vec<Tensor>,
    pub sq_delta: Vec<Tensor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    AdaDelta(AdaDeltaState),
    Sgd { learning_rate: f64 },
}

impl AdaDeltaState {
    pub fn new<P: ParamSet + ?Sized>(params: &P, rho: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) || eps <= 0.0 {
            return Err(Error::Config(format!("AdaDelta needs 0 <= rho < 1 and eps > 0, got rho={rho} eps={eps}")));
        }
        let zeros: Vec<Tensor> = params.tensors().into_iter().map(|(_, t)| Tensor::zeros_like(t)).collect();
        Ok(AdaDeltaState {
            rho,
            eps,
            sq_grad: zeros.clone(),
            sq_delta: zeros,
        })
    }
}

impl Optimizer {
    pub fn adadelta<P: ParamSet + ?Sized>(params: &P) -> Result<Self> {
        Ok(Optimizer::AdaDelta(AdaDeltaState::new(params, DEFAULT_RHO, DEFAULT_EPS)?))
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {learning_rate}")));
        }
        Ok(Optimizer::Sgd { learning_rate })
    }

    /// Applies one update. Nothing is modified if any check fails.
    pub fn step<P: ParamSet + ?Sized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        check_grads(params, grads)?;
        if let Optimizer::AdaDelta(s) = self {
            if s.sq_grad.len() != grads.tensors().len() {
                return Err(Error::contract("optimizer state does not match the parameter set"));
            }
            for ((_, g), acc) in grads.tensors().into_iter().zip(&s.sq_grad) {
                if g.shape() != acc.shape() {
                    return Err(Error::Shape {
                        op: "adadelta state",
                        left: acc.shape(),
                        right: g.shape(),
                    });
                }
            }
        }
        let grads = grads.tensors();
        match self {
            Optimizer::Sgd { learning_rate } => {
                for ((_, p), (_, g)) in params.tensors_mut().into_iter().zip(grads) {
                    p.axpy(-*learning_rate, g)?;
                }
            }
            Optimizer::AdaDelta(s) => {
                let (rho, eps) = (s.rho, s.eps);
                let iter = params.tensors_mut().into_iter().zip(grads).zip(s.sq_grad.iter_mut().zip(s.sq_delta.iter_mut()));
                for (((_, p), (_, g)), (eg, ed)) in iter {
                    let p = p.data_mut();
                    let eg = eg.data_mut();
                    let ed = ed.data_mut();
                    for (i, &gi) in g.data().iter().enumerate() {
                        eg[i] = rho * eg[i] + (1.0 - rho) * gi * gi;
                        let delta = -((ed[i] + eps).sqrt() / (eg[i] + eps).sqrt()) * gi;
                        ed[i] = rho * ed[i] + (1.0 - rho) * delta * delta;
                        p[i] += delta;
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_grads<P: ParamSet + ?Sized>(params: &P, grads: &P) -> Result<()> {
    let (ps, gs) = (params.tensors(), grads.tensors());
    if ps.len() != gs.len() {
        return Err(Error::contract("gradient set does not match the parameter set"));
    }
    for ((name, p), (_, g)) in ps.into_iter().zip(gs) {
        if p.shape() != g.shape() {
            return Err(Error::Shape {
                op: name,
                left: p.shape(),
                right: g.shape(),
            });
        }
        if !g.is_finite() {
            return Err(Error::Numeric {
                what: format!("gradient of {name}"),
                step: 0,
            });
        }
    }
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns the norm before clipping.
pub fn clip_gradients<P: ParamSet + ?Sized>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.sum_squares().sqrt();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(Clone, Debug, PartialEq)]
    struct Pair {
        a: Tensor,
        b: Tensor,
    }

    impl ParamSet for Pair {
        fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
            vec![("a", &self.a), ("b", &self.b)]
        }
        fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
            vec![("a", &mut self.a), ("b", &mut self.b)]
        }
    }

    fn pair(a: Vec<f64>, b: Vec<f64>) -> Pair {
        Pair {
            a: Tensor::vector(a),
            b: Tensor::vector(b),
        }
    }

    #[test]
    fn first_adadelta_step_matches_hand_computation() {
        let mut p = pair(vec![1.0, -2.0], vec![0.5]);
        let g = pair(vec![0.3, -4.0], vec![0.0]);
        let mut opt = Optimizer::adadelta(&p).unwrap();
        opt.step(&mut p, &g).unwrap();
        // E[g²] = 0.05 g², Δ = -sqrt(1e-6) / sqrt(0.05 g² + 1e-6) · g
        let expect = |x: f64, gi: f64| x - (1e-6f64).sqrt() / (0.05 * gi * gi + 1e-6).sqrt() * gi;
        assert!((p.a.data()[0] - expect(1.0, 0.3)).abs() < 1e-15);
        assert!((p.a.data()[1] - expect(-2.0, -4.0)).abs() < 1e-15);
        assert_eq!(p.b.data()[0], 0.5);
        let Optimizer::AdaDelta(s) = &opt else { unreachable!() };
        let d0: f64 = expect(1.0, 0.3) - 1.0;
        assert!((s.sq_delta[0].data()[0] / (0.05 * d0 * d0) - 1.0).abs() < 1e-9);
        assert!((s.sq_grad[0].data()[1] - 0.05 * 16.0).abs() < 1e-15);
    }

    #[test]
    fn second_step_is_larger_for_constant_gradient() {
        let mut p = pair(vec![0.0], vec![0.0]);
        let g = pair(vec![1.0], vec![1.0]);
        let mut opt = Optimizer::adadelta(&p).unwrap();
        opt.step(&mut p, &g).unwrap();
        let first = -p.a.data()[0];
        opt.step(&mut p, &g).unwrap();
        let second = -p.a.data()[0] - first;
        assert!(first > 0.0 && second > first, "{first} {second}");
    }

    #[test]
    fn sgd_step() {
        let mut p = pair(vec![1.0], vec![2.0]);
        let g = pair(vec![0.5], vec![-1.0]);
        Optimizer::sgd(0.1).unwrap().step(&mut p, &g).unwrap();
        assert_eq!(p, pair(vec![0.95], vec![2.1]));
        assert!(Optimizer::sgd(0.0).is_err());
    }

    #[test]
    fn rejects_bad_gradients_without_touching_parameters() {
        let mut p = pair(vec![1.0], vec![2.0]);
        let before = p.clone();
        let mut opt = Optimizer::adadelta(&p).unwrap();
        let state_before = opt.clone();
        let mut nan = pair(vec![0.0], vec![0.0]);
        nan.a.data_mut()[0] = f64::NAN;
        assert!(matches!(opt.step(&mut p, &nan), Err(Error::Numeric { .. })));
        let wrong = pair(vec![1.0, 2.0], vec![0.0]);
        assert!(matches!(opt.step(&mut p, &wrong), Err(Error::Shape { .. })));
        assert_eq!(p, before);
        assert_eq!(opt, state_before);
        assert!(AdaDeltaState::new(&p, 1.0, 1e-6).is_err());
    }

    #[test]
    fn clipping_cases() {
        let mut g = pair(vec![3.0], vec![4.0]);
        assert_eq!(clip_gradients(&mut g, 10.0), 5.0);
        assert_eq!(g, pair(vec![3.0], vec![4.0]));
        assert_eq!(clip_gradients(&mut g, 1.0), 5.0);
        assert!((g.a.data()[0] - 0.6).abs() < 1e-15 && (g.b.data()[0] - 0.8).abs() < 1e-15);
        let mut z = pair(vec![0.0], vec![0.0]);
        assert_eq!(clip_gradients(&mut z, 1.0), 0.0);
    }

    proptest! {
        #[test]
        fn clipping_never_increases_norm(v in prop::collection::vec(-1e3f64..1e3, 1..8), max in 0.01f64..100.0) {
            let mut g = pair(v.clone(), vec![1.0]);
            let before = g.sum_squares().sqrt();
            clip_gradients(&mut g, max);
            let after = g.sum_squares().sqrt();
            prop_assert!(after <= before + 1e-12);
            prop_assert!(after <= max * (1.0 + 1e-12) || after <= before + 1e-12 && before <= max);
        }

        #[test]
        fn adadelta_stays_finite(seed in 0u64..50) {
            let mut rng = crate::rng::Rng::new(seed);
            let mut p = pair(vec![0.0; 4], vec![0.0]);
            let mut opt = Optimizer::adadelta(&p).unwrap();
            for _ in 0..10_000 {
                let scale = 10f64.powf(rng.uniform(-6.0, 6.0));
                let g = pair((0..4).map(|_| rng.uniform(-scale, scale)).collect(), vec![rng.uniform(-1.0, 1.0)]);
                opt.step(&mut p, &g).unwrap();
            }
            prop_assert!(p.a.is_finite() && p.b.is_finite());
            let Optimizer::AdaDelta(s) = &opt else { unreachable!() };
            prop_assert!(s.sq_grad.iter().chain(&s.sq_delta).all(|t| t.is_finite()));
        }
    }
}
