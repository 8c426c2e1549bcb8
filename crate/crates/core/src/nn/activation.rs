use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    LeakyRelu(f64),
    Sigmoid,
    Softplus,
    /// Row-wise softmax; only valid on the output layer.
    Softmax,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Activation {
    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu(DEFAULT_LEAKY_SLOPE)
    }

    pub(crate) fn apply(&self, z: &Array2<f64>) -> Array2<f64> {
        match *self {
            Activation::Linear => z.clone(),
            Activation::LeakyRelu(slope) => z.mapv(|v| if v > 0.0 { v } else { slope * v }),
            Activation::Sigmoid => z.mapv(sigmoid),
            Activation::Softplus => z.mapv(softplus),
            Activation::Softmax => {
                let mut out = z.clone();
                for mut row in out.axis_iter_mut(Axis(0)) {
                    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    row.mapv_inplace(|v| (v - max).exp());
                    let total = row.sum();
                    row.mapv_inplace(|v| v / total);
                }
                out
            }
        }
    }

    /// Gradient with respect to the pre-activation given the gradient with
    /// respect to the activation output.
    pub(crate) fn backward(
        &self,
        pre: &Array2<f64>,
        out: &Array2<f64>,
        grad_out: ArrayView2<f64>,
    ) -> Array2<f64> {
        match *self {
            Activation::Linear => grad_out.to_owned(),
            Activation::LeakyRelu(slope) => {
                Zip::from(pre)
                    .and(grad_out)
                    .map_collect(|&z, &g| if z > 0.0 { g } else { slope * g })
            }
            Activation::Sigmoid => Zip::from(out)
                .and(grad_out)
                .map_collect(|&a, &g| g * a * (1.0 - a)),
            Activation::Softplus => Zip::from(pre)
                .and(grad_out)
                .map_collect(|&z, &g| g * sigmoid(z)),
            Activation::Softmax => {
                let mut grad = Array2::zeros(out.raw_dim());
                for ((a, g), mut dz) in out
                    .axis_iter(Axis(0))
                    .zip(grad_out.axis_iter(Axis(0)))
                    .zip(grad.axis_iter_mut(Axis(0)))
                {
                    let dot = a.dot(&g);
                    Zip::from(&mut dz)
                        .and(&a)
                        .and(&g)
                        .for_each(|d, &ai, &gi| *d = ai * (gi - dot));
                }
                grad
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Linear => f.write_str("linear"),
            Activation::LeakyRelu(slope) => write!(f, "leaky_relu:{slope:e}"),
            Activation::Sigmoid => f.write_str("sigmoid"),
            Activation::Softplus => f.write_str("softplus"),
            Activation::Softmax => f.write_str("softmax"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("activation", format!("unknown activation `{s}`"));
        match s {
            "linear" => Ok(Activation::Linear),
            "sigmoid" => Ok(Activation::Sigmoid),
            "softplus" => Ok(Activation::Softplus),
            "softmax" => Ok(Activation::Softmax),
            "leaky_relu" => Ok(Activation::leaky_relu()),
            other => match other.strip_prefix("leaky_relu:") {
                Some(slope) => slope.parse().map(Activation::LeakyRelu).map_err(|_| bad()),
                None => Err(bad()),
            },
        }
    }
}
