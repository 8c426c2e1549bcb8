//! Synthetic classification benchmark: a 2-D Gaussian mixture whose Bayes
//! classifier is known in closed form.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{argmax_rows, neural_decode, neural_posteriors, DecoderTraining};
use crate::divergence::{Divergence, DivergenceSpec};
use crate::error::{Error, Result};
use crate::nn::{Activation, DiscriminatorNet, NetConfig, NetMode};
use crate::objectives::{activation_for, SupervisedBatch};
use crate::par::{map_indexed, Execution};
use crate::rng::{substream, StreamRng};
use crate::train::{train_supervised, SupervisedLoss, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: [f64; 2],
    /// Row-major covariance `[[a, b], [b, c]]`.
    pub cov: [[f64; 2]; 2],
}

impl Component {
    fn chol(&self) -> Result<[[f64; 2]; 2]> {
        let [[a, b], [b2, c]] = self.cov;
        if (b - b2).abs() > 1e-12 || !(a > 0.0) || !(a * c - b * b > 0.0) {
            return Err(Error::config("cov", format!("{:?} is not symmetric positive definite", self.cov)));
        }
        let l11 = a.sqrt();
        let l21 = b / l11;
        let l22 = (c - l21 * l21).sqrt();
        Ok([[l11, 0.0], [l21, l22]])
    }

    /// `log N(y; mean, cov)`.
    pub fn log_density(&self, y: ArrayView1<f64>) -> f64 {
        let [[a, b], [_, c]] = self.cov;
        let det = a * c - b * b;
        let (dx, dy) = (y[0] - self.mean[0], y[1] - self.mean[1]);
        let quad = (c * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
        -0.5 * quad - (2.0 * PI).ln() - 0.5 * det.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub components: Vec<Component>,
}

impl Mixture {
    /// Three overlapping classes with unequal priors and covariances.
    pub fn standard() -> Self {
        Mixture {
            components: vec![
                Component { weight: 0.5, mean: [0.0, 0.0], cov: [[1.0, 0.3], [0.3, 1.0]] },
                Component { weight: 0.3, mean: [2.0, 0.5], cov: [[0.8, -0.2], [-0.2, 1.2]] },
                Component { weight: 0.2, mean: [0.8, 2.2], cov: [[1.5, 0.0], [0.0, 0.6]] },
            ],
        }
    }

    /// Same components with the given priors.
    pub fn with_weights(mut self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.components.len() {
            return Err(Error::config("weights", "one weight per component"));
        }
        for (c, &w) in self.components.iter_mut().zip(weights) {
            c.weight = w;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.len() < 2 {
            return Err(Error::config("components", "need at least two classes"));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if self.components.iter().any(|c| !(c.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("weights", "must be non-negative and sum to 1"));
        }
        for c in &self.components {
            c.chol()?;
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.components.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Array2<f64>, Vec<usize>)> {
        let weights: Vec<f64> = self.components.iter().map(|c| c.weight).collect();
        let pick = WeightedIndex::new(&weights).map_err(|e| Error::config("weights", e.to_string()))?;
        let chols: Vec<_> = self.components.iter().map(Component::chol).collect::<Result<_>>()?;
        let mut y = Array2::zeros((n, 2));
        let mut labels = Vec::with_capacity(n);
        for mut row in y.rows_mut() {
            let k = pick.sample(rng);
            let (z0, z1): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let l = chols[k];
            let m = self.components[k].mean;
            row[0] = m[0] + l[0][0] * z0;
            row[1] = m[1] + l[1][0] * z0 + l[1][1] * z1;
            labels.push(k);
        }
        Ok((y, labels))
    }

    pub fn supervised_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SupervisedBatch> {
        let (y, labels) = self.sample(n, rng)?;
        SupervisedBatch::new(y, labels, self.classes())
    }

    /// Bayes decisions `argmax_i w_i N_i(y)`.
    pub fn bayes_decode(&self, y: ArrayView2<f64>) -> Vec<usize> {
        let scores = Array2::from_shape_fn((y.nrows(), self.classes()), |(i, k)| {
            let c = &self.components[k];
            c.weight.ln() + c.log_density(y.row(i))
        });
        argmax_rows(scores.view())
    }

    /// Exact class posteriors `w_i N_i(y) / sum_k w_k N_k(y)`, one row per
    /// observation.
    pub fn posterior(&self, y: ArrayView2<f64>) -> Array2<f64> {
        let mut post = Array2::from_shape_fn((y.nrows(), self.classes()), |(i, k)| {
            let c = &self.components[k];
            if c.weight > 0.0 {
                c.weight.ln() + c.log_density(y.row(i))
            } else {
                f64::NEG_INFINITY
            }
        });
        for mut row in post.rows_mut() {
            let top = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - top).exp());
            let total = row.sum();
            row.mapv_inplace(|v| v / total);
        }
        post
    }

    /// Bayes accuracy `int max_i w_i N_i(y) dy` by midpoint quadrature over
    /// a box covering every component to 8 standard deviations.
    pub fn bayes_rate(&self, points_per_axis: usize) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.components {
            for d in 0..2 {
                let s = c.cov[d][d].sqrt();
                lo[d] = lo[d].min(c.mean[d] - 8.0 * s);
                hi[d] = hi[d].max(c.mean[d] + 8.0 * s);
            }
        }
        let n = points_per_axis;
        let h = [(hi[0] - lo[0]) / n as f64, (hi[1] - lo[1]) / n as f64];
        let mut total = 0.0;
        let mut y = ndarray::Array1::zeros(2);
        for i in 0..n {
            y[0] = lo[0] + (i as f64 + 0.5) * h[0];
            for j in 0..n {
                y[1] = lo[1] + (j as f64 + 0.5) * h[1];
                let best = self
                    .components
                    .iter()
                    .filter(|c| c.weight > 0.0)
                    .map(|c| c.weight * c.log_density(y.view()).exp())
                    .fold(0.0, f64::max);
                total += best;
            }
        }
        total * h[0] * h[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub mixture: Mixture,
    pub n_test: usize,
    pub training: DecoderTraining,
    /// Number of leading test points whose raw posterior estimates are kept
    /// in the report.
    pub posterior_points: usize,
    pub seed: u64,
}

impl MixtureConfig {
    pub fn new(seed: u64) -> Self {
        MixtureConfig {
            mixture: Mixture::standard(),
            n_test: 100_000,
            training: DecoderTraining {
                hidden: vec![100, 100],
                dropout: 0.0,
                train: TrainConfig {
                    lr: 2e-3,
                    lr_final_fraction: 0.05,
                    batch_size: 256,
                    epochs: 20,
                    steps_per_epoch: 100,
                    seed,
                    ..TrainConfig::default()
                },
            },
            posterior_points: 0,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureEntry {
    pub divergence: String,
    pub accuracy: f64,
    pub gap_to_bayes: f64,
    /// Raw (unnormalised) posterior estimates on the leading test points.
    pub posteriors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureReport {
    pub bayes_rate: f64,
    pub bayes_test_accuracy: f64,
    pub n_test: usize,
    pub seed: u64,
    pub entries: Vec<MixtureEntry>,
    /// Exact posteriors on the leading test points.
    pub bayes_posteriors: Vec<Vec<f64>>,
}

fn accuracy(decisions: &[usize], labels: &[usize]) -> f64 {
    decisions.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len().max(1) as f64
}

/// Train one supervised network per divergence and compare its test
/// accuracy with the Bayes classifier on a shared test set.
pub fn mixture_bench(config: &MixtureConfig, divergences: &[Divergence], exec: Execution) -> Result<MixtureReport> {
    config.mixture.validate()?;
    if config.n_test == 0 {
        return Err(Error::config("n_test", "must be positive"));
    }
    let mut test_rng: StreamRng = substream(config.seed, "mixture-test");
    let (y_test, labels) = config.mixture.sample(config.n_test, &mut test_rng)?;
    let bayes_test_accuracy = accuracy(&config.mixture.bayes_decode(y_test.view()), &labels);
    let head = y_test.slice(ndarray::s![..config.posterior_points.min(config.n_test), ..]);
    let results = map_indexed(exec, divergences.len(), |i| -> Result<MixtureEntry> {
        let kind = divergences[i];
        let mut train = config.training.train.clone();
        train.seed = substream(config.seed, &format!("mixture-train-{kind}")).random();
        let mut net = DiscriminatorNet::new(&NetConfig {
            input_dim: 2,
            hidden: config.training.hidden.clone(),
            hidden_activation: Activation::leaky_relu(),
            output_activation: activation_for(kind),
            mode: NetMode::Supervised { classes: config.mixture.classes() },
            dropout: config.training.dropout,
            seed: train.seed,
        })?;
        let loss = SupervisedLoss::Divergence(DivergenceSpec::unit(kind));
        train_supervised(&mut net, loss, &train, |n, rng| config.mixture.supervised_batch(n, rng))?;
        let decisions = neural_decode(&net, Some(kind), y_test.view(), Execution::Sequential)?;
        let acc = accuracy(&decisions, &labels);
        let posteriors = neural_posteriors(&net, Some(kind), head.view())?.rows().into_iter().map(|r| r.to_vec()).collect();
        Ok(MixtureEntry {
            divergence: kind.name().to_string(),
            accuracy: acc,
            gap_to_bayes: bayes_test_accuracy - acc,
            posteriors,
        })
    });
    Ok(MixtureReport {
        bayes_rate: config.mixture.bayes_rate(600),
        bayes_test_accuracy,
        n_test: config.n_test,
        seed: config.seed,
        entries: results.into_iter().collect::<Result<_>>()?,
        bayes_posteriors: config.mixture.posterior(head).rows().into_iter().map(|r| r.to_vec()).collect(),
    })
}
