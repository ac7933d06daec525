use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "ADAM")]
    Adam,
    #[serde(rename = "RMSPROP")]
    RmsProp,
    #[serde(rename = "SGD")]
    Sgd,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [OptimizerKind::Adam, OptimizerKind::RmsProp, OptimizerKind::Sgd];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "ADAM",
            OptimizerKind::RmsProp => "RMSPROP",
            OptimizerKind::Sgd => "SGD",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s.trim()))
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const RMSPROP_RHO: f64 = 0.9;
pub const RMSPROP_EPS: f64 = 1e-7;

/// Optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Adam => (vec![0.0; n_params], vec![0.0; n_params]),
            OptimizerKind::RmsProp => (Vec::new(), vec![0.0; n_params]),
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
        };
        Self { kind, lr, step: 0, m, v }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Nothing changes if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(NnError::ParamCount {
                expected: params.len(),
                actual: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(NnError::Diverged);
        }
        self.step += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::RmsProp => {
                for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.v) {
                    *v = RMSPROP_RHO * *v + (1.0 - RMSPROP_RHO) * g * g;
                    *p -= lr * g / (libm::sqrt(*v) + RMSPROP_EPS);
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as f64;
                let c1 = 1.0 - libm::pow(ADAM_BETA1, t);
                let c2 = 1.0 - libm::pow(ADAM_BETA2, t);
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (libm::sqrt(v_hat) + ADAM_EPS);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    extern crate std;

    #[test]
    fn sgd_step() {
        let mut p = [1.0];
        Optimizer::new(OptimizerKind::Sgd, 0.1, 1).step(&mut p, &[0.5]).unwrap();
        assert!((p[0] - 0.95).abs() < 1e-15);
        let mut q = [1.0, -2.0];
        Optimizer::new(OptimizerKind::Sgd, 0.1, 2).step(&mut q, &[0.0, 0.0]).unwrap();
        assert_eq!(q, [1.0, -2.0]);
    }

    #[test]
    fn adam_first_step_is_sign_step() {
        for g in [1e-3, 0.5, 40.0] {
            let mut p = [0.0];
            Optimizer::new(OptimizerKind::Adam, 0.01, 1).step(&mut p, &[g]).unwrap();
            let expected = 0.01 * g / (g + ADAM_EPS);
            assert!((p[0] + expected).abs() < 1e-15);
            assert!((p[0].abs() - 0.01).abs() < 1e-7);
        }
    }

    #[test]
    fn rmsprop_first_step() {
        let mut p = [0.0];
        Optimizer::new(OptimizerKind::RmsProp, 0.01, 1).step(&mut p, &[2.0]).unwrap();
        let v: f64 = 0.1 * 4.0;
        assert!((p[0] + 0.01 * 2.0 / (v.sqrt() + RMSPROP_EPS)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_diverges() {
        let mut p = [1.0, 1.0];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.01, 2);
        assert_eq!(opt.step(&mut p, &[0.1, f64::NAN]), Err(NnError::Diverged));
        assert_eq!(p, [1.0, 1.0]);
        assert_eq!(opt.steps_taken(), 0);
    }

    #[test]
    fn names_parse() {
        for k in OptimizerKind::ALL {
            assert_eq!(OptimizerKind::parse(k.name()), Some(k));
        }
        assert_eq!(OptimizerKind::parse("rmsprop"), Some(OptimizerKind::RmsProp));
    }
}
