use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::net::{DiscriminatorNet, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::config("optimizer", format!("unknown optimizer `{s}` (expected adam or sgd)"))),
        }
    }
}

/// First-order optimiser state over a flat list of parameter tensors.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: u64,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
    Sgd {
        lr: f64,
        momentum: f64,
        velocity: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Result<Self> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::config("lr", format!("learning rate must be positive, got {lr}")));
        }
        Ok(match kind {
            OptimizerKind::Adam => Optimizer::adam(lr),
            OptimizerKind::Sgd => Optimizer::sgd(lr, 0.9),
        })
    }

    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn sgd(lr: f64, momentum: f64) -> Self {
        Optimizer::Sgd {
            lr,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            Optimizer::Adam { lr, .. } | Optimizer::Sgd { lr, .. } => *lr,
        }
    }

    pub fn set_learning_rate(&mut self, value: f64) {
        match self {
            Optimizer::Adam { lr, .. } | Optimizer::Sgd { lr, .. } => *lr = value,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Adam { .. } => OptimizerKind::Adam,
            Optimizer::Sgd { .. } => OptimizerKind::Sgd,
        }
    }

    /// Update `params` in place with descent direction `grads`.
    pub fn step_tensors(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len()
            || params.iter().zip(grads).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::Shape("parameter and gradient tensors differ".into()));
        }
        let lazy_init = |state: &mut Vec<Vec<f64>>| {
            if state.is_empty() {
                *state = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            }
        };
        match self {
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                lazy_init(m);
                lazy_init(v);
                *step += 1;
                let bc1 = 1.0 - beta1.powi(*step as i32);
                let bc2 = 1.0 - beta2.powi(*step as i32);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    for (i, (pi, &gi)) in p.iter_mut().zip(g.iter()).enumerate() {
                        let mi = &mut m[k][i];
                        let vi = &mut v[k][i];
                        *mi = *beta1 * *mi + (1.0 - *beta1) * gi;
                        *vi = *beta2 * *vi + (1.0 - *beta2) * gi * gi;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *pi -= *lr * m_hat / (v_hat.sqrt() + *eps);
                    }
                }
            }
            Optimizer::Sgd {
                lr,
                momentum,
                velocity,
            } => {
                lazy_init(velocity);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    for (i, (pi, &gi)) in p.iter_mut().zip(g.iter()).enumerate() {
                        let vel = &mut velocity[k][i];
                        *vel = *momentum * *vel + gi;
                        *pi -= *lr * *vel;
                    }
                }
            }
        }
        Ok(())
    }

    /// Apply one descent step to a network. Non-finite gradients abort the
    /// step and leave the network untouched.
    pub fn step(&mut self, net: &mut DiscriminatorNet, grads: &Gradients) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::Training("non-finite gradient".into()));
        }
        let g = grads.tensors();
        let mut p = net.param_tensors_mut();
        self.step_tensors(&mut p, &g)
    }
}
