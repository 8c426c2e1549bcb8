//! Simulated decoding experiments.
//!
//! Three channels are provided:
//!
//! * `pam4`: 4-PAM through the memoryless nonlinearity `sgn(x) sqrt|x|`
//!   followed by additive Gaussian noise;
//! * `awgn`: antipodal (`+-1`) vectors of dimension `d` (2^d classes) through
//!   additive white Gaussian noise;
//! * `pam4-nonuniform`: 4-PAM through a linear AWGN channel with the two
//!   negative symbols having probability `P/2` each and the two positive
//!   symbols `(1 - P)/2` each.
//!
//! SNR is `E[x^2] / sigma^2` in dB, with the expectation taken under the
//! source prior. The default PAM amplitudes are `{-3, -1, 1, 3} / sqrt(5)`
//! (unit average power).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::divergence::{Divergence, DivergenceSpec};
use crate::error::{Error, Result};
use crate::nn::{Activation, DiscriminatorNet, NetConfig, NetMode};
use crate::objectives::{activation_for, SupervisedBatch};
use crate::par::{map_chunks, map_indexed, Execution};
use crate::posterior::posterior_from_d_clamped;
use crate::rng::{indexed_substream, StreamRng};
use crate::train::{train_supervised, SupervisedLoss, TrainConfig};

pub const NONUNIFORM_P: f64 = 0.05;
pub const DEFAULT_AWGN_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    Pam4Nonlinear,
    AwgnVector { dim: usize },
    Pam4Nonuniform,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKind::Pam4Nonlinear => f.write_str("pam4"),
            ChannelKind::AwgnVector { .. } => f.write_str("awgn"),
            ChannelKind::Pam4Nonuniform => f.write_str("pam4-nonuniform"),
        }
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pam4" => Ok(ChannelKind::Pam4Nonlinear),
            "awgn" => Ok(ChannelKind::AwgnVector { dim: DEFAULT_AWGN_DIM }),
            "pam4-nonuniform" => Ok(ChannelKind::Pam4Nonuniform),
            other => Err(Error::config(
                "channel",
                format!("unknown channel `{other}` (expected pam4, awgn or pam4-nonuniform)"),
            )),
        }
    }
}

pub fn default_pam4() -> Vec<f64> {
    let s = 5f64.sqrt();
    vec![-3.0 / s, -1.0 / s, 1.0 / s, 3.0 / s]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    /// PAM amplitudes; unused by the vector channel.
    pub constellation: Vec<f64>,
    pub prior: Vec<f64>,
    pub noise_sigma: f64,
    pub snr_db: f64,
}

impl ChannelModel {
    pub fn new(kind: ChannelKind, snr_db: f64) -> Result<Self> {
        let (constellation, prior) = match kind {
            ChannelKind::Pam4Nonlinear => (default_pam4(), vec![0.25; 4]),
            ChannelKind::Pam4Nonuniform => {
                let p = NONUNIFORM_P;
                (default_pam4(), vec![p / 2.0, p / 2.0, (1.0 - p) / 2.0, (1.0 - p) / 2.0])
            }
            ChannelKind::AwgnVector { dim } => {
                if !(1..=16).contains(&dim) {
                    return Err(Error::config("dim", format!("vector dimension must be in 1..=16, got {dim}")));
                }
                (Vec::new(), vec![1.0 / (1usize << dim) as f64; 1 << dim])
            }
        };
        let mut model = ChannelModel { kind, constellation, prior, noise_sigma: 1.0, snr_db };
        model.set_snr_db(snr_db)?;
        Ok(model)
    }

    /// Replace the amplitudes, keeping the SNR.
    pub fn with_constellation(mut self, constellation: Vec<f64>) -> Result<Self> {
        self.constellation = constellation;
        if self.prior.len() != self.constellation.len() {
            self.prior = vec![1.0 / self.constellation.len().max(1) as f64; self.constellation.len()];
        }
        self.set_snr_db(self.snr_db)?;
        Ok(self)
    }

    pub fn with_prior(mut self, prior: Vec<f64>) -> Result<Self> {
        self.prior = prior;
        self.set_snr_db(self.snr_db)?;
        Ok(self)
    }

    /// Fix the noise level directly (the SNR field is updated to match).
    pub fn with_noise_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::config("noise_sigma", format!("must be non-negative, got {sigma}")));
        }
        self.noise_sigma = sigma;
        self.snr_db = 10.0 * (self.signal_power() / (sigma * sigma)).log10();
        self.validate()?;
        Ok(self)
    }

    pub fn set_snr_db(&mut self, snr_db: f64) -> Result<()> {
        if !snr_db.is_finite() {
            return Err(Error::config("snr", format!("must be finite, got {snr_db}")));
        }
        self.snr_db = snr_db;
        self.validate()?;
        self.noise_sigma = (self.signal_power() / 10f64.powf(snr_db / 10.0)).sqrt();
        Ok(())
    }

    pub fn at_snr(&self, snr_db: f64) -> Result<Self> {
        let mut m = self.clone();
        m.set_snr_db(snr_db)?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.classes();
        if n < 2 {
            return Err(Error::config("constellation", "need at least two symbols"));
        }
        if self.prior.len() != n {
            return Err(Error::config("prior", format!("{} probabilities for {n} symbols", self.prior.len())));
        }
        if self.prior.iter().any(|&p| !(p >= 0.0 && p.is_finite())) || (self.prior.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("prior", "must be non-negative and sum to 1"));
        }
        if !matches!(self.kind, ChannelKind::AwgnVector { .. }) {
            let mut c = self.constellation.clone();
            c.sort_by(f64::total_cmp);
            if c.iter().any(|v| !v.is_finite()) || c.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::config("constellation", "amplitudes must be finite and distinct"));
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        match self.kind {
            ChannelKind::AwgnVector { dim } => 1 << dim,
            _ => self.constellation.len(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self.kind {
            ChannelKind::AwgnVector { dim } => dim,
            _ => 1,
        }
    }

    /// Transmitted signal of every symbol, one row per class.
    pub fn symbols(&self) -> Array2<f64> {
        match self.kind {
            ChannelKind::AwgnVector { dim } => Array2::from_shape_fn((1 << dim, dim), |(c, j)| {
                if (c >> j) & 1 == 1 { 1.0 } else { -1.0 }
            }),
            _ => Array2::from_shape_fn((self.constellation.len(), 1), |(c, _)| self.constellation[c]),
        }
    }

    /// Noise-free channel output of every symbol, one row per class.
    pub fn images(&self) -> Array2<f64> {
        let s = self.symbols();
        match self.kind {
            ChannelKind::Pam4Nonlinear => s.mapv(|x| x.signum() * x.abs().sqrt()),
            _ => s,
        }
    }

    /// `E[|x|^2]` per channel use (per dimension for the vector channel).
    pub fn signal_power(&self) -> f64 {
        let s = self.symbols();
        let dim = s.ncols() as f64;
        s.rows()
            .into_iter()
            .zip(&self.prior)
            .map(|(row, p)| p * row.dot(&row) / dim)
            .sum()
    }

    pub fn sample_symbols<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        let dist = WeightedIndex::new(&self.prior).map_err(|e| Error::config("prior", e.to_string()))?;
        Ok((0..n).map(|_| dist.sample(rng)).collect())
    }

    /// Channel outputs for the given symbol indices.
    pub fn transmit<R: Rng + ?Sized>(&self, symbols: &[usize], rng: &mut R) -> Result<Array2<f64>> {
        let images = self.images();
        let classes = self.classes();
        let mut out = Array2::zeros((symbols.len(), self.obs_dim()));
        for (mut row, &s) in out.rows_mut().into_iter().zip(symbols) {
            if s >= classes {
                return Err(Error::config("symbols", format!("index {s} outside [0, {classes})")));
            }
            for (v, &img) in row.iter_mut().zip(images.row(s)) {
                let noise: f64 = rng.sample(StandardNormal);
                *v = img + self.noise_sigma * noise;
            }
        }
        Ok(out)
    }

    /// Labelled training batch drawn from the prior.
    pub fn supervised_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SupervisedBatch> {
        let labels = self.sample_symbols(n, rng)?;
        let y = self.transmit(&labels, rng)?;
        SupervisedBatch::new(y, labels, self.classes())
    }

    /// Per-class scores `log prior + log likelihood` up to a shared constant.
    fn scores(&self, obs: ArrayView2<f64>, use_prior: bool) -> Array2<f64> {
        let images = self.images();
        let inv = 1.0 / (2.0 * self.noise_sigma * self.noise_sigma);
        let log_prior: Vec<f64> = self.prior.iter().map(|p| p.ln()).collect();
        let mut out = Array2::zeros((obs.nrows(), self.classes()));
        for (y, mut row) in obs.rows().into_iter().zip(out.rows_mut()) {
            for (c, s) in row.iter_mut().enumerate() {
                let dist2: f64 = y.iter().zip(images.row(c)).map(|(a, b)| (a - b) * (a - b)).sum();
                *s = -dist2 * inv + if use_prior { log_prior[c] } else { 0.0 };
            }
        }
        out
    }

    /// Exact posterior `p(x | y)` for each observation row.
    pub fn analytic_posterior(&self, obs: ArrayView2<f64>) -> Array2<f64> {
        let mut s = self.scores(obs, true);
        for mut row in s.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let total = row.sum();
            row.mapv_inplace(|v| v / total);
        }
        s
    }

    fn is_uniform(&self) -> bool {
        self.prior.iter().all(|&p| (p - self.prior[0]).abs() < 1e-15)
    }

    /// Bayes-optimal decisions using the true channel and prior.
    pub fn map_genie_decode(&self, obs: ArrayView2<f64>) -> Vec<usize> {
        if self.noise_sigma == 0.0 || (matches!(self.kind, ChannelKind::AwgnVector { .. }) && self.is_uniform()) {
            return self.nearest(obs);
        }
        argmax_rows(self.scores(obs, true).view())
    }

    /// Maximum-likelihood decisions ignoring the prior.
    pub fn maxl_decode(&self, obs: ArrayView2<f64>) -> Vec<usize> {
        if self.noise_sigma == 0.0 || matches!(self.kind, ChannelKind::AwgnVector { .. }) {
            return self.nearest(obs);
        }
        argmax_rows(self.scores(obs, false).view())
    }

    /// Nearest noise-free image; for the antipodal vector channel this is
    /// the per-coordinate sign (bit set when the coordinate is positive).
    fn nearest(&self, obs: ArrayView2<f64>) -> Vec<usize> {
        if let ChannelKind::AwgnVector { .. } = self.kind {
            return obs
                .rows()
                .into_iter()
                .map(|y| y.iter().enumerate().fold(0, |acc, (j, &v)| if v > 0.0 { acc | (1 << j) } else { acc }))
                .collect();
        }
        argmax_rows(self.scores_unit(obs).view())
    }

    fn scores_unit(&self, obs: ArrayView2<f64>) -> Array2<f64> {
        let images = self.images();
        Array2::from_shape_fn((obs.nrows(), self.classes()), |(i, c)| {
            -obs.row(i).iter().zip(images.row(c)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
    }
}

/// Row-wise argmax, ties to the lowest index.
pub fn argmax_rows(scores: ArrayView2<f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Decoders compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decoder {
    MapGenie,
    MaxL,
    /// Network trained with a divergence objective.
    Neural(Divergence),
    /// Softmax network trained with cross-entropy.
    CrossEntropy,
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decoder::MapGenie => f.write_str("map-genie"),
            Decoder::MaxL => f.write_str("maxl"),
            Decoder::Neural(d) => write!(f, "{}", d.name()),
            Decoder::CrossEntropy => f.write_str("ce"),
        }
    }
}

impl FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "map-genie" => Ok(Decoder::MapGenie),
            "maxl" => Ok(Decoder::MaxL),
            "ce" => Ok(Decoder::CrossEntropy),
            other => other.parse().map(Decoder::Neural).map_err(|_| {
                Error::config("decoder", format!("unknown decoder `{other}`"))
            }),
        }
    }
}

/// Network shape and optimiser settings for neural decoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderTraining {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub train: TrainConfig,
}

impl Default for DecoderTraining {
    fn default() -> Self {
        DecoderTraining {
            hidden: vec![100, 100],
            dropout: 0.0,
            train: TrainConfig {
                lr: 2e-3,
                lr_final_fraction: 0.05,
                batch_size: 256,
                epochs: 30,
                steps_per_epoch: 100,
                ..TrainConfig::default()
            },
        }
    }
}

/// Train a supervised decoder on freshly simulated symbols every step.
pub fn train_neural_decoder(model: &ChannelModel, loss: SupervisedLoss, cfg: &DecoderTraining) -> Result<DiscriminatorNet> {
    model.validate()?;
    let output = match loss {
        SupervisedLoss::Divergence(spec) => activation_for(spec.kind),
        SupervisedLoss::CrossEntropy => Activation::Softmax,
    };
    let net_cfg = NetConfig {
        input_dim: model.obs_dim(),
        hidden: cfg.hidden.clone(),
        hidden_activation: Activation::leaky_relu(),
        output_activation: output,
        mode: NetMode::Supervised { classes: model.classes() },
        dropout: cfg.dropout,
        seed: cfg.train.seed,
    };
    let mut net = DiscriminatorNet::new(&net_cfg)?;
    train_supervised(&mut net, loss, &cfg.train, |n, rng| model.supervised_batch(n, rng))?;
    Ok(net)
}

/// Posterior estimates of a trained supervised network, one row per
/// observation. `kind` is `None` for cross-entropy networks, whose outputs
/// are already probabilities.
pub fn neural_posteriors(net: &DiscriminatorNet, kind: Option<Divergence>, obs: ArrayView2<f64>) -> Result<Array2<f64>> {
    let out = net.predict(obs)?;
    Ok(match kind {
        Some(k) => out.mapv(|d| posterior_from_d_clamped(k, d)),
        None => out,
    })
}

const DECODE_CHUNK: usize = 8192;

/// MAP decisions of a trained network on a large observation block.
pub fn neural_decode(net: &DiscriminatorNet, kind: Option<Divergence>, obs: ArrayView2<f64>, exec: Execution) -> Result<Vec<usize>> {
    let rows: Vec<usize> = (0..obs.nrows()).collect();
    let parts = map_chunks(exec, &rows, DECODE_CHUNK, |idx| {
        let block = obs.select(Axis(0), idx);
        vec![neural_posteriors(net, kind, block.view()).map(|p| argmax_rows(p.view()))]
    });
    let mut out = Vec::with_capacity(obs.nrows());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn symbol_error_rate(decisions: &[usize], truth: &[usize]) -> f64 {
    let errors = decisions.iter().zip(truth).filter(|(a, b)| a != b).count();
    errors as f64 / truth.len().max(1) as f64
}

/// Binomial standard error `sqrt(p (1 - p) / n)`.
pub fn ser_stderr(ser: f64, n: usize) -> f64 {
    (ser * (1.0 - ser) / n.max(1) as f64).sqrt()
}

/// SER per decoder over an SNR grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerCurve {
    pub channel: String,
    pub snr_points: Vec<f64>,
    pub ser: BTreeMap<String, Vec<f64>>,
    pub stderr: BTreeMap<String, Vec<f64>>,
    pub n_symbols: usize,
    pub seed: u64,
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerRow {
    pub snr_db: f64,
    pub decoder: String,
    pub ser: f64,
    pub stderr: f64,
    pub n_symbols: usize,
    pub seed: u64,
}

impl SerCurve {
    pub fn rows(&self) -> Vec<SerRow> {
        let mut rows = Vec::new();
        for (i, &snr) in self.snr_points.iter().enumerate() {
            for (name, values) in &self.ser {
                rows.push(SerRow {
                    snr_db: snr,
                    decoder: name.clone(),
                    ser: values[i],
                    stderr: self.stderr[name][i],
                    n_symbols: self.n_symbols,
                    seed: self.seed,
                });
            }
        }
        rows
    }

    pub fn curve(&self, decoder: &Decoder) -> Option<&[f64]> {
        self.ser.get(&decoder.to_string()).map(Vec::as_slice)
    }
}

/// Parse `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::config("snr", format!("{msg} in `{text}`"));
    if text.contains(':') {
        let parts: Vec<f64> = text
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad("not a number")))
            .collect::<Result<_>>()?;
        let [start, step, stop] = parts[..] else {
            return Err(bad("expected start:step:stop"));
        };
        if !(step > 0.0) || stop < start {
            return Err(bad("step must be positive and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + step * i as f64).collect())
    } else {
        let v: Vec<f64> = text
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad("not a number")))
            .collect::<Result<_>>()?;
        if v.is_empty() {
            return Err(bad("empty list"));
        }
        Ok(v)
    }
}

/// Evaluate every decoder at every SNR point on a common test set per point.
///
/// Each point draws its test symbols from its own substream
/// `(seed, "sweep-test", index)` and trains neural decoders with seeds
/// derived from `(seed, "sweep-train-<decoder>", index)`, so results do not
/// depend on the execution mode.
pub fn snr_sweep(
    template: &ChannelModel,
    decoders: &[Decoder],
    snr_db: &[f64],
    n_symbols: usize,
    seed: u64,
    training: &DecoderTraining,
    exec: Execution,
) -> Result<SerCurve> {
    if decoders.is_empty() {
        return Err(Error::Empty("decoder list"));
    }
    if snr_db.is_empty() {
        return Err(Error::Empty("SNR grid"));
    }
    if n_symbols == 0 {
        return Err(Error::config("n", "need at least one test symbol"));
    }
    let points = map_indexed(exec, snr_db.len(), |i| -> Result<Vec<f64>> {
        let model = template.at_snr(snr_db[i])?;
        let mut rng: StreamRng = indexed_substream(seed, "sweep-test", i);
        let truth = model.sample_symbols(n_symbols, &mut rng)?;
        let obs = model.transmit(&truth, &mut rng)?;
        decoders
            .iter()
            .map(|dec| {
                let decisions = match dec {
                    Decoder::MapGenie => model.map_genie_decode(obs.view()),
                    Decoder::MaxL => model.maxl_decode(obs.view()),
                    Decoder::Neural(_) | Decoder::CrossEntropy => {
                        let mut cfg = training.clone();
                        let mut seed_rng = indexed_substream(seed, &format!("sweep-train-{dec}"), i);
                        cfg.train.seed = seed_rng.random();
                        let (loss, kind) = match dec {
                            Decoder::Neural(k) => (SupervisedLoss::Divergence(DivergenceSpec::unit(*k)), Some(*k)),
                            _ => (SupervisedLoss::CrossEntropy, None),
                        };
                        let net = train_neural_decoder(&model, loss, &cfg)?;
                        neural_decode(&net, kind, obs.view(), Execution::Sequential)?
                    }
                };
                Ok(symbol_error_rate(&decisions, &truth))
            })
            .collect()
    });
    let mut ser: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut stderr: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for point in points {
        for (dec, value) in decoders.iter().zip(point?) {
            ser.entry(dec.to_string()).or_default().push(value);
            stderr.entry(dec.to_string()).or_default().push(ser_stderr(value, n_symbols));
        }
    }
    Ok(SerCurve {
        channel: template.kind.to_string(),
        snr_points: snr_db.to_vec(),
        ser,
        stderr,
        n_symbols,
        seed,
    })
}

/// Mean absolute error between normalised network posteriors and the exact
/// posterior on `obs`.
pub fn posterior_mae(model: &ChannelModel, net: &DiscriminatorNet, kind: Option<Divergence>, obs: ArrayView2<f64>) -> Result<f64> {
    let mut est = neural_posteriors(net, kind, obs)?;
    for mut row in est.rows_mut() {
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    let exact = model.analytic_posterior(obs);
    Ok((&est - &exact).mapv(f64::abs).mean().unwrap_or(f64::NAN))
}

/// Mean of the observations per symbol; used by simulation self-checks.
pub fn mean_output(model: &ChannelModel, symbol: usize, n: usize, rng: &mut StreamRng) -> Result<Array1<f64>> {
    let y = model.transmit(&vec![symbol; n], rng)?;
    y.mean_axis(Axis(0)).ok_or(Error::Empty("observations"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use ndarray::array;

    #[test]
    fn nonlinearity_without_noise() {
        let model = ChannelModel::new(ChannelKind::Pam4Nonlinear, 10.0)
            .unwrap()
            .with_constellation(vec![-4.0, -1.0, 1.0, 4.0])
            .unwrap()
            .with_noise_sigma(0.0)
            .unwrap();
        let y = model.transmit(&[3, 1], &mut substream(0, "t")).unwrap();
        assert_eq!(y[[0, 0]], 2.0);
        assert_eq!(y[[1, 0]], -1.0);
        assert!(model.transmit(&[4], &mut substream(0, "t")).is_err());
    }

    #[test]
    fn snr_sets_noise_level() {
        let m = ChannelModel::new(ChannelKind::Pam4Nonlinear, 10.0).unwrap();
        assert!((m.signal_power() - 1.0).abs() < 1e-12);
        assert!((m.noise_sigma - 0.1f64.sqrt()).abs() < 1e-12);
        let nu = ChannelModel::new(ChannelKind::Pam4Nonuniform, 0.0).unwrap();
        assert!((nu.prior[0] - 0.025).abs() < 1e-15 && (nu.prior[3] - 0.475).abs() < 1e-15);
        assert!((nu.noise_sigma - 1.0).abs() < 1e-12);
        let v = ChannelModel::new(ChannelKind::AwgnVector { dim: 6 }, 0.0).unwrap();
        assert_eq!(v.classes(), 64);
        assert!((v.signal_power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let m = ChannelModel::new(ChannelKind::Pam4Nonlinear, 5.0).unwrap();
        assert!(m.clone().with_constellation(vec![1.0, 1.0, 2.0, 3.0]).is_err());
        assert!(m.clone().with_prior(vec![0.5, 0.5, 0.5, 0.5]).is_err());
        assert!("qam".parse::<ChannelKind>().is_err());
        assert!(ChannelModel::new(ChannelKind::AwgnVector { dim: 0 }, 0.0).is_err());
    }

    #[test]
    fn decoders_on_image_points() {
        let m = ChannelModel::new(ChannelKind::Pam4Nonlinear, 8.0).unwrap();
        let images = m.images();
        assert_eq!(m.map_genie_decode(images.view()), vec![0, 1, 2, 3]);
        // equidistant between a rare and a common image: prior decides
        let nu = ChannelModel::new(ChannelKind::Pam4Nonuniform, 8.0).unwrap();
        let img = nu.images();
        let mid = array![[(img[[1, 0]] + img[[2, 0]]) / 2.0]];
        assert_eq!(nu.map_genie_decode(mid.view()), vec![2]);
        assert_eq!(nu.maxl_decode(mid.view()), vec![1]);
    }

    #[test]
    fn uniform_prior_decoders_agree() {
        let m = ChannelModel::new(ChannelKind::Pam4Nonlinear, 4.0).unwrap();
        let mut rng = substream(3, "obs");
        let s = m.sample_symbols(5000, &mut rng).unwrap();
        let y = m.transmit(&s, &mut rng).unwrap();
        assert_eq!(m.map_genie_decode(y.view()), m.maxl_decode(y.view()));
        let v = ChannelModel::new(ChannelKind::AwgnVector { dim: 3 }, 2.0).unwrap();
        let s = v.sample_symbols(2000, &mut rng).unwrap();
        let y = v.transmit(&s, &mut rng).unwrap();
        assert_eq!(v.map_genie_decode(y.view()), argmax_rows(v.scores(y.view(), true).view()));
        let noiseless = v.with_noise_sigma(0.0).unwrap();
        let y0 = noiseless.transmit(&s, &mut rng).unwrap();
        assert_eq!(noiseless.maxl_decode(y0.view()), s);
    }

    #[test]
    fn analytic_posterior_rows_sum_to_one() {
        let m = ChannelModel::new(ChannelKind::Pam4Nonuniform, 3.0).unwrap();
        let p = m.analytic_posterior(array![[-2.0], [0.0], [0.4], [5.0]].view());
        for row in p.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn snr_grid_parsing() {
        assert_eq!(parse_snr_grid("0:2:16").unwrap().len(), 9);
        assert_eq!(parse_snr_grid("1, 3,5").unwrap(), vec![1.0, 3.0, 5.0]);
        assert!(parse_snr_grid("0:0:4").is_err());
        assert!(parse_snr_grid("a").is_err());
    }

    #[test]
    fn decoder_names() {
        for d in [Decoder::MapGenie, Decoder::MaxL, Decoder::CrossEntropy, Decoder::Neural(Divergence::Sl)] {
            assert_eq!(d.to_string().parse::<Decoder>().unwrap(), d);
        }
    }

    #[test]
    fn sweep_is_deterministic_and_mode_independent() {
        let m = ChannelModel::new(ChannelKind::Pam4Nonlinear, 0.0).unwrap();
        let mut training = DecoderTraining { hidden: vec![8], ..Default::default() };
        training.train.epochs = 2;
        training.train.steps_per_epoch = 5;
        let decs = [Decoder::MapGenie, Decoder::MaxL, Decoder::Neural(Divergence::Sl)];
        let a = snr_sweep(&m, &decs, &[0.0, 6.0], 2000, 5, &training, Execution::Sequential).unwrap();
        let b = snr_sweep(&m, &decs, &[0.0, 6.0], 2000, 5, &training, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows().len(), 6);
        assert_eq!(a.curve(&Decoder::MapGenie), a.curve(&Decoder::MaxL));
    }
}
