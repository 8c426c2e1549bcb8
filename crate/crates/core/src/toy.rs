//! Continuous-posterior toy tasks with closed-form oracles.
//!
//! Both tasks observe `Y = X + N` with `X` and `N` independent:
//!
//! * exponential: `X, N ~ Exp(lambda)`, so `p(x|y) = 1/y` on `0 < x < y`;
//! * gaussian: `X ~ N(0, sx^2)`, `N ~ N(0, sn^2)`, so `p(x|y)` is Gaussian
//!   with mean `y sx^2 / (sx^2 + sn^2)` and variance `sx^2 sn^2 / (sx^2 + sn^2)`.
//!
//! The unsupervised estimator needs a finite support measure `|T_x|`; the
//! exponential prior is truncated to `[0, q]` with `q` its 99.9th
//! percentile, and samples outside the configured box are redrawn.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::divergence::{Divergence, DivergenceSpec};
use crate::error::{Error, Result};
use crate::nn::{Activation, DiscriminatorNet, NetConfig, NetMode};
use crate::objectives::{activation_for, marginal_resample, JointBatch, SupportBox};
use crate::posterior::posterior_from_d_clamped;
use crate::rng::substream;
use crate::train::{train_unsupervised, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ToyKind {
    Exponential { lambda: f64 },
    Gaussian { sigma_x: f64, sigma_n: f64 },
}

impl ToyKind {
    pub fn name(&self) -> &'static str {
        match self {
            ToyKind::Exponential { .. } => "exp",
            ToyKind::Gaussian { .. } => "gauss",
        }
    }

    /// Closed-form posterior density `p(x|y)`.
    pub fn oracle(&self, x: f64, y: f64) -> Result<f64> {
        match *self {
            ToyKind::Exponential { .. } => exp_posterior_closed(x, y),
            ToyKind::Gaussian { sigma_x, sigma_n } => gauss_posterior_closed(x, y, sigma_x, sigma_n),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be positive, got {v}")))
            }
        };
        match *self {
            ToyKind::Exponential { lambda } => positive("lambda", lambda),
            ToyKind::Gaussian { sigma_x, sigma_n } => {
                positive("sigma_x", sigma_x)?;
                positive("sigma_n", sigma_n)
            }
        }
    }
}

impl fmt::Display for ToyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ToyKind {
    type Err = Error;

    /// `exp` and `gauss` select the unit-parameter tasks.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" | "exponential" => Ok(ToyKind::Exponential { lambda: 1.0 }),
            "gauss" | "gaussian" => Ok(ToyKind::Gaussian { sigma_x: 1.0, sigma_n: 1.0 }),
            other => Err(Error::config("task", format!("unknown task `{other}` (expected exp or gauss)"))),
        }
    }
}

/// `p(x|y) = 1/y` for `0 < x < y`, zero elsewhere.
pub fn exp_posterior_closed(x: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::domain("observation", y, "(0, inf)"));
    }
    Ok(if x > 0.0 && x < y { 1.0 / y } else { 0.0 })
}

/// Gaussian posterior written with `k = (sx^2 + sn^2) / sx^2`:
/// `sqrt(sy^2 / (2 pi sn^2 sx^2)) exp(-(k x - y)^2 / (2 k sn^2))`.
pub fn gauss_posterior_closed(x: f64, y: f64, sigma_x: f64, sigma_n: f64) -> Result<f64> {
    if !(sigma_x > 0.0 && sigma_n > 0.0) {
        return Err(Error::config("sigma", "standard deviations must be positive"));
    }
    let (vx, vn) = (sigma_x * sigma_x, sigma_n * sigma_n);
    let vy = vx + vn;
    let k = vy / vx;
    let z = k * x - y;
    Ok((vy / (2.0 * PI * vn * vx)).sqrt() * (-z * z / (2.0 * k * vn)).exp())
}

/// Evenly spaced points including both ends.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Composite Simpson integral of `f` on `[lo, hi]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let mut total = f(lo) + f(hi);
    for i in 1..n {
        total += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    total * h / 3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x: (f64, f64, usize),
    pub y: (f64, f64, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTaskConfig {
    pub kind: ToyKind,
    pub support: SupportBox,
    pub grid: GridSpec,
    pub n_train: usize,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub seed: u64,
}

impl ToyTaskConfig {
    /// Defaults: exponential box `[0, q]`, gaussian box `[-5 sx, 5 sx]`;
    /// grids of 50x50 points over `[0, 4] x [0.2, 4]` and `[-3, 3]^2`.
    pub fn new(kind: ToyKind, seed: u64) -> Result<Self> {
        kind.validate()?;
        let (support, grid) = match kind {
            ToyKind::Exponential { lambda } => (
                SupportBox::interval(0.0, -(0.001f64).ln() / lambda)?,
                GridSpec { x: (0.0, 4.0, 50), y: (0.2, 4.0, 50) },
            ),
            ToyKind::Gaussian { sigma_x, .. } => (
                SupportBox::interval(-5.0 * sigma_x, 5.0 * sigma_x)?,
                GridSpec { x: (-3.0, 3.0, 50), y: (-3.0, 3.0, 50) },
            ),
        };
        Ok(ToyTaskConfig {
            kind,
            support,
            grid,
            n_train: 200_000,
            hidden: vec![100, 100],
            train: TrainConfig {
                lr: 1e-3,
                lr_final_fraction: 0.05,
                batch_size: 512,
                epochs: 40,
                steps_per_epoch: 250,
                seed,
                ..TrainConfig::default()
            },
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if self.support.dim() != 1 {
            return Err(Error::config("support_box", "toy tasks have scalar X"));
        }
        if self.n_train == 0 {
            return Err(Error::config("n_train", "must be positive"));
        }
        if self.grid.x.2 == 0 || self.grid.y.2 == 0 {
            return Err(Error::config("grid", "needs at least one point per axis"));
        }
        if let ToyKind::Exponential { .. } = self.kind {
            if self.grid.y.0 <= 0.0 {
                return Err(Error::config("grid", "exponential task needs y > 0"));
            }
        }
        self.train.validate()
    }

    pub fn spec(&self, kind: Divergence) -> Result<DivergenceSpec> {
        DivergenceSpec::new(kind, self.support.measure())
    }
}

/// Draw `n` pairs `(x, y)`; `x` outside the support box is redrawn.
pub fn sample_task<R: Rng + ?Sized>(config: &ToyTaskConfig, n: usize, rng: &mut R) -> Result<(Array2<f64>, Array2<f64>)> {
    config.kind.validate()?;
    let (lo, hi) = (config.support.lo[0], config.support.hi[0]);
    let mut xs = Array2::zeros((n, 1));
    let mut ys = Array2::zeros((n, 1));
    match config.kind {
        ToyKind::Exponential { lambda } => {
            let d = Exp::new(lambda).map_err(|e| Error::config("lambda", e.to_string()))?;
            draw(&mut xs, &mut ys, rng, lo, hi, |r| d.sample(r), |r| d.sample(r))?;
        }
        ToyKind::Gaussian { sigma_x, sigma_n } => {
            let dx = Normal::new(0.0, sigma_x).map_err(|e| Error::config("sigma_x", e.to_string()))?;
            let dn = Normal::new(0.0, sigma_n).map_err(|e| Error::config("sigma_n", e.to_string()))?;
            draw(&mut xs, &mut ys, rng, lo, hi, |r| dx.sample(r), |r| dn.sample(r))?;
        }
    }
    Ok((xs, ys))
}

fn draw<R: Rng + ?Sized>(
    xs: &mut Array2<f64>,
    ys: &mut Array2<f64>,
    rng: &mut R,
    lo: f64,
    hi: f64,
    mut prior: impl FnMut(&mut R) -> f64,
    mut noise: impl FnMut(&mut R) -> f64,
) -> Result<()> {
    for i in 0..xs.nrows() {
        let mut tries = 0;
        let x = loop {
            let x = prior(rng);
            if x >= lo && x <= hi {
                break x;
            }
            tries += 1;
            if tries > 10_000 {
                return Err(Error::config("support_box", "box has negligible prior mass"));
            }
        };
        xs[[i, 0]] = x;
        ys[[i, 0]] = x + noise(rng);
    }
    Ok(())
}

/// Posterior estimates vs. the closed form on a regular grid. Matrices are
/// indexed `[y, x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub x_axis: Vec<f64>,
    pub y_axis: Vec<f64>,
    pub estimate: Array2<f64>,
    pub oracle: Array2<f64>,
    /// Points included in the error (positive oracle support).
    pub mask: Array2<bool>,
    pub mse: f64,
}

/// One CSV row of a grid dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    pub estimate: f64,
    pub oracle: f64,
}

impl PosteriorGrid {
    /// Build from an estimator `est(x, y)`.
    pub fn evaluate(config: &ToyTaskConfig, est: impl Fn(&Array2<f64>) -> Result<Array1<f64>>) -> Result<Self> {
        let x_axis = linspace(config.grid.x.0, config.grid.x.1, config.grid.x.2);
        let y_axis = linspace(config.grid.y.0, config.grid.y.1, config.grid.y.2);
        let (nx, ny) = (x_axis.len(), y_axis.len());
        let inputs = Array2::from_shape_fn((nx * ny, 2), |(i, c)| if c == 0 { x_axis[i % nx] } else { y_axis[i / nx] });
        let values = est(&inputs)?;
        let estimate = Array2::from_shape_vec((ny, nx), values.to_vec()).map_err(|e| Error::Shape(e.to_string()))?;
        let mut oracle = Array2::zeros((ny, nx));
        for ((j, i), v) in oracle.indexed_iter_mut() {
            *v = config.kind.oracle(x_axis[i], y_axis[j])?;
        }
        let mask = match config.kind {
            ToyKind::Exponential { .. } => oracle.mapv(|v| v > 0.0),
            ToyKind::Gaussian { .. } => Array2::from_elem((ny, nx), true),
        };
        let mse = grid_mse(&estimate, &oracle, &mask)?;
        Ok(PosteriorGrid { x_axis, y_axis, estimate, oracle, mask, mse })
    }

    pub fn rows(&self) -> Vec<GridRow> {
        let mut rows = Vec::with_capacity(self.estimate.len());
        for ((j, i), &e) in self.estimate.indexed_iter() {
            rows.push(GridRow { x: self.x_axis[i], y: self.y_axis[j], estimate: e, oracle: self.oracle[[j, i]] });
        }
        rows
    }

    /// Largest deviation from `1/y` relative to `1/y` along each grid row,
    /// restricted to the oracle support (exponential task).
    pub fn max_relative_row_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &y) in self.y_axis.iter().enumerate() {
            for i in 0..self.x_axis.len() {
                if self.mask[[j, i]] {
                    worst = worst.max((self.estimate[[j, i]] * y - 1.0).abs());
                }
            }
        }
        worst
    }
}

pub fn grid_mse(estimate: &Array2<f64>, oracle: &Array2<f64>, mask: &Array2<bool>) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for ((e, o), &m) in estimate.iter().zip(oracle).zip(mask) {
        if m {
            total += (e - o) * (e - o);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("grid support"));
    }
    Ok(total / count as f64)
}

/// Fresh unsupervised network for a toy task.
pub fn toy_network(config: &ToyTaskConfig, kind: Divergence) -> Result<DiscriminatorNet> {
    DiscriminatorNet::new(&NetConfig {
        input_dim: 2,
        hidden: config.hidden.clone(),
        hidden_activation: Activation::leaky_relu(),
        output_activation: activation_for(kind),
        mode: NetMode::Unsupervised,
        dropout: 0.0,
        seed: config.seed,
    })
}

/// Posterior estimates of an unsupervised network at `(x, y)` rows.
pub fn network_estimate(net: &DiscriminatorNet, kind: Divergence, inputs: &Array2<f64>) -> Result<Array1<f64>> {
    Ok(net.predict(inputs.view())?.column(0).mapv(|d| posterior_from_d_clamped(kind, d)))
}

#[derive(Debug, Clone)]
pub struct ToyFit {
    pub grid: PosteriorGrid,
    pub net: DiscriminatorNet,
    pub report: TrainReport,
}

/// Train an unsupervised estimator and evaluate it on the grid.
pub fn fit_and_grid(config: &ToyTaskConfig, kind: Divergence) -> Result<ToyFit> {
    config.validate()?;
    let spec = config.spec(kind)?;
    let mut data_rng = substream(config.seed, &format!("toy-data-{}", config.kind));
    let (xs, ys) = sample_task(config, config.n_train, &mut data_rng)?;
    let mut net = toy_network(config, kind)?;
    let n = config.n_train;
    let sample = |b: usize, rng: &mut crate::rng::StreamRng| -> Result<JointBatch> {
        let idx: Vec<usize> = (0..b).map(|_| rng.random_range(0..n)).collect();
        let xj = xs.select(ndarray::Axis(0), &idx);
        let yj = ys.select(ndarray::Axis(0), &idx);
        marginal_resample(xj, yj, &config.support, rng)
    };
    let report = train_unsupervised(&mut net, &spec, &config.train, sample)?;
    let grid = PosteriorGrid::evaluate(config, |inp| network_estimate(&net, kind, inp))?;
    Ok(ToyFit { grid, net, report })
}
