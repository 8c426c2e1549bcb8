//! Numerical certification suite behind the `verify` command.
//!
//! Each check compares a closed form with an independent numerical route
//! (grid suprema, bisection, golden-section search, finite differences) and
//! reports its worst-case error against a fixed tolerance.

use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bottom_up::{pointwise_optimal_d, steepness_compare, BottomUpSpec};
use crate::divergence::{brute_force_conjugate, default_u_grid, log_grid, numeric_f_divergence, Divergence, DivergenceSpec, Form};
use crate::error::Result;
use crate::nn::{Activation, DiscriminatorNet, NetConfig, NetMode};
use crate::objectives::{
    activation_for, cross_entropy_objective, discrete_bound, discrete_optimal_d, discrete_product, marginal_resample,
    supervised_objective, unsupervised_objective, SupervisedBatch, SupportBox,
};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed error (or violation count).
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn timed(name: &str, tolerance: f64, f: impl FnOnce() -> Result<(f64, String)>) -> CheckResult {
    let start = Instant::now();
    let (passed, worst, detail) = match f() {
        Ok((worst, detail)) => (worst <= tolerance, worst, detail),
        Err(e) => (false, f64::NAN, format!("error: {e}")),
    };
    CheckResult {
        name: name.to_string(),
        passed,
        worst,
        tolerance,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// `n` conjugate arguments `t = f'(u)` for `u` log-spaced in
/// `[0.02 T, 20 T]`, where the grid supremum is attained well inside the
/// brute-force grid.
pub fn duality_points(spec: &DivergenceSpec, form: Form, n: usize) -> Result<Vec<f64>> {
    let t = match form {
        Form::Supervised => 1.0,
        Form::Unsupervised => spec.tx_measure(),
    };
    log_grid(0.02 * t, 20.0 * t, n).into_iter().map(|u| spec.f_prime(u, form)).collect()
}

/// Inverse of `f'` by bisection in `log u`.
pub fn inverse_f_prime(spec: &DivergenceSpec, form: Form, t: f64) -> Result<f64> {
    let (mut lo, mut hi) = ((1e-12f64).ln(), (1e12f64).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spec.f_prime(mid.exp(), form)? < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

pub fn check_conjugate_duality() -> CheckResult {
    timed("conjugate duality (closed form vs grid supremum)", 1e-3, || {
        let grid = default_u_grid();
        let mut worst: f64 = 0.0;
        for kind in Divergence::ALL {
            for (spec, form) in [(DivergenceSpec::unit(kind), Form::Supervised), (DivergenceSpec::new(kind, 4.0)?, Form::Unsupervised)] {
                for t in duality_points(&spec, form, 50)? {
                    let err = (spec.f_star(t, form)? - brute_force_conjugate(&spec, t, form, &grid)).abs();
                    worst = worst.max(err);
                }
            }
        }
        Ok((worst, "6 divergences x 2 forms x 50 points".into()))
    })
}

pub fn check_inverse_derivative() -> CheckResult {
    timed("conjugate derivative equals inverse generator derivative", 1e-6, || {
        let mut worst: f64 = 0.0;
        for kind in Divergence::ALL {
            for (spec, form) in [(DivergenceSpec::unit(kind), Form::Supervised), (DivergenceSpec::new(kind, 4.0)?, Form::Unsupervised)] {
                for t in duality_points(&spec, form, 50)? {
                    let err = (spec.f_star_prime(t, form)? - inverse_f_prime(&spec, form, t)?).abs();
                    worst = worst.max(err);
                }
            }
        }
        Ok((worst, "6 divergences x 2 forms x 50 points".into()))
    })
}

/// Random strictly positive probability vector of length `n`.
pub fn random_pmf<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // absorb rounding so the vector sums to one within 1e-15
    let drift: f64 = p.iter().sum::<f64>() - 1.0;
    p[0] -= drift;
    p
}

pub fn check_sl_bound(seed: u64) -> CheckResult {
    timed("shifted-log divergence bounded by log 2", 1e-9, || {
        let mut rng = substream(seed, "verify-sl-bound");
        let sl = DivergenceSpec::unit(Divergence::Sl);
        let mut worst: f64 = 0.0;
        let mut worst_equal: f64 = 0.0;
        for _ in 0..1000 {
            let n = rng.random_range(2..10);
            let p = random_pmf(n, &mut rng);
            let q = random_pmf(n, &mut rng);
            let d = numeric_f_divergence(&sl, Form::Supervised, &p, &q)?;
            worst = worst.max(-d).max(d - 2f64.ln());
            worst_equal = worst_equal.max(numeric_f_divergence(&sl, Form::Supervised, &p, &p)?.abs());
        }
        let detail = format!("1000 random pairs; excess beyond [0, log 2]; |D(P||P)| <= {worst_equal:e}");
        if worst_equal > 1e-12 {
            return Ok((f64::INFINITY, detail));
        }
        Ok((worst.max(0.0), detail))
    })
}

/// Random densities in `[0.05, 1]`.
fn density_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    (rng.random_range(0.05..1.0), rng.random_range(0.05..1.0))
}

pub fn check_pointwise_optimum(seed: u64) -> CheckResult {
    timed("per-bin maximiser equals the optimal-output map", 1e-6, || {
        let mut rng = substream(seed, "verify-pointwise");
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let (pj, pp) = density_pair(&mut rng);
            for kind in Divergence::ALL {
                let expected = BottomUpSpec::for_divergence(kind).k(pj / pp);
                worst = worst.max((pointwise_optimal_d(kind, pj, pp)? - expected).abs());
            }
        }
        Ok((worst, "100 random density pairs x 6 divergences".into()))
    })
}

/// Random discrete joint with `nx x ny` strictly positive cells.
pub fn random_joint<R: Rng + ?Sized>(nx: usize, ny: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_vec((nx, ny), random_pmf(nx * ny, rng)).expect("shape")
}

pub fn check_tightness(seed: u64) -> CheckResult {
    timed("bound at the optimum equals the f-divergence on discrete joints", 1e-6, || {
        let mut rng = substream(seed, "verify-tightness");
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let (nx, ny) = (rng.random_range(2..=4), rng.random_range(2..=4));
            let p = random_joint(nx, ny, &mut rng);
            let pu = discrete_product(p.view());
            for kind in Divergence::ALL {
                let spec = DivergenceSpec::new(kind, nx as f64)?;
                let d = discrete_optimal_d(&spec, p.view())?;
                let bound = discrete_bound(&spec, d.view(), p.view(), pu.view())?;
                let flat_p: Vec<f64> = p.iter().copied().collect();
                let flat_q: Vec<f64> = pu.iter().copied().collect();
                let exact = numeric_f_divergence(&spec, Form::Unsupervised, &flat_p, &flat_q)?;
                worst = worst.max((bound - exact).abs());
            }
        }
        Ok((worst, "20 random joints up to 4x4 x 6 divergences".into()))
    })
}

pub fn check_steepness(seed: u64) -> CheckResult {
    timed("GAN integrand at least as steep as SL near the optimum", 0.0, || {
        let mut rng = substream(seed, "verify-steepness");
        let mut violations = 0usize;
        for _ in 0..1000 {
            let (pj, pp) = (rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
            for delta in [0.01, -0.01, 0.05, -0.05] {
                let (g, s) = steepness_compare(pj, pp, delta)?;
                if g < s {
                    violations += 1;
                }
            }
        }
        Ok((violations as f64, "1000 density pairs x 4 offsets; violations".into()))
    })
}

/// Central-difference check of `grads` for the scalar `loss(net)`.
/// Returns the worst relative error, with denominators floored at `1e-3`.
pub fn finite_difference_error(
    net: &mut DiscriminatorNet,
    loss: &dyn Fn(&DiscriminatorNet) -> Result<f64>,
    analytic: &[f64],
    h: f64,
) -> Result<f64> {
    let theta = net.params_flat();
    let mut worst: f64 = 0.0;
    for (i, &g) in analytic.iter().enumerate() {
        let mut p = theta.clone();
        p[i] = theta[i] + h;
        net.set_params_flat(&p)?;
        let up = loss(net)?;
        p[i] = theta[i] - h;
        net.set_params_flat(&p)?;
        let down = loss(net)?;
        let num = (up - down) / (2.0 * h);
        worst = worst.max((num - g).abs() / num.abs().max(g.abs()).max(1e-3));
    }
    net.set_params_flat(&theta)?;
    Ok(worst)
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// Gradient checks over every activation and both architectures:
/// three network sizes x five seeds each.
pub fn gradient_check_worst(seed: u64) -> Result<f64> {
    let sizes: [&[usize]; 3] = [&[3], &[6, 5], &[4, 4, 4]];
    let mut worst: f64 = 0.0;
    for (si, hidden) in sizes.iter().enumerate() {
        for s in 0..5u64 {
            let net_seed = seed.wrapping_add(100 * si as u64 + s);
            let mut rng = substream(net_seed, "verify-grad");
            // supervised: every divergence with its own activation, plus softmax
            let y = gaussian_matrix(7, 2, &mut rng);
            let labels: Vec<usize> = (0..7).map(|_| rng.random_range(0..3)).collect();
            let batch = SupervisedBatch::new(y, labels, 3)?;
            let mut outputs: Vec<(Activation, Divergence)> =
                Divergence::ALL.iter().map(|&k| (activation_for(k), k)).collect();
            outputs.push((Activation::Softmax, Divergence::Kl));
            for (act, kind) in outputs {
                let mut cfg = NetConfig::standard(2, NetMode::Supervised { classes: 3 }, act, net_seed);
                cfg.hidden = hidden.to_vec();
                let mut net = DiscriminatorNet::new(&cfg)?;
                let spec = DivergenceSpec::unit(kind);
                let g = supervised_objective(&spec, &net, &batch, None)?.grads.to_flat();
                let f = |n: &DiscriminatorNet| supervised_objective(&spec, n, &batch, None).map(|e| e.loss);
                worst = worst.max(finite_difference_error(&mut net, &f, &g, 1e-5)?);
            }
            // unsupervised: every divergence
            let x = Array2::from_shape_fn((6, 1), |_| rng.random_range(0.0..3.0));
            let yj = gaussian_matrix(6, 1, &mut rng);
            let jb = marginal_resample(x, yj, &SupportBox::interval(0.0, 3.0)?, &mut rng)?;
            for kind in Divergence::ALL {
                let mut cfg = NetConfig::standard(2, NetMode::Unsupervised, activation_for(kind), net_seed);
                cfg.hidden = hidden.to_vec();
                let mut net = DiscriminatorNet::new(&cfg)?;
                let spec = DivergenceSpec::new(kind, 3.0)?;
                let g = unsupervised_objective(&spec, &net, &jb, None)?.grads.to_flat();
                let f = |n: &DiscriminatorNet| unsupervised_objective(&spec, n, &jb, None).map(|e| e.loss);
                worst = worst.max(finite_difference_error(&mut net, &f, &g, 1e-5)?);
            }
            // linear output under a quadratic loss, with linear hidden layers too
            for hidden_act in [Activation::Linear, Activation::Sigmoid, Activation::Softplus, Activation::leaky_relu()] {
                let cfg = NetConfig {
                    input_dim: 2,
                    hidden: hidden.to_vec(),
                    hidden_activation: hidden_act,
                    output_activation: Activation::Linear,
                    mode: NetMode::Unsupervised,
                    dropout: 0.0,
                    seed: net_seed,
                };
                let mut net = DiscriminatorNet::new(&cfg)?;
                let inputs = gaussian_matrix(5, 2, &mut rng);
                let target = gaussian_matrix(5, 1, &mut rng);
                let quad = |n: &DiscriminatorNet| -> Result<(f64, Array2<f64>)> {
                    let out = n.predict(inputs.view())?;
                    let diff = &out - &target;
                    Ok((0.5 * diff.mapv(|v| v * v).sum(), diff))
                };
                let tape = net.forward(inputs.view())?;
                let (_, diff) = quad(&net)?;
                let g = net.backward(&tape, diff.view())?.to_flat();
                worst = worst.max(finite_difference_error(&mut net, &|n| quad(n).map(|v| v.0), &g, 1e-5)?);
            }
        }
    }
    Ok(worst)
}

pub fn check_gradients(seed: u64) -> CheckResult {
    timed("reverse-mode gradients vs central differences", 1e-4, || {
        Ok((gradient_check_worst(seed)?, "3 sizes x 5 seeds, all activations, both architectures".into()))
    })
}

/// Largest difference between supervised-KL and cross-entropy gradients on
/// softmax networks over random batches.
pub fn kl_cross_entropy_gap(seed: u64, trials: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let spec = DivergenceSpec::unit(Divergence::Kl);
    for trial in 0..trials {
        let mut rng = substream(seed.wrapping_add(trial as u64), "verify-kl-ce");
        let classes = rng.random_range(2..6);
        let n = rng.random_range(1..64);
        let y = gaussian_matrix(n, 3, &mut rng);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let batch = SupervisedBatch::new(y, labels, classes)?;
        let net = DiscriminatorNet::new(&NetConfig::standard(3, NetMode::Supervised { classes }, Activation::Softmax, rng.random()))?;
        let kl = supervised_objective(&spec, &net, &batch, None)?;
        let ce = cross_entropy_objective(&net, &batch, None)?;
        for (a, b) in kl.grads.to_flat().iter().zip(ce.grads.to_flat()) {
            worst = worst.max((a - b).abs());
        }
        worst = worst.max((kl.loss - ce.loss - 1.0).abs());
    }
    Ok(worst)
}

pub fn check_kl_cross_entropy(seed: u64) -> CheckResult {
    timed("supervised KL gradient equals cross-entropy gradient", 1e-10, || {
        Ok((kl_cross_entropy_gap(seed, 20)?, "20 random batches on softmax networks".into()))
    })
}

/// Run the full certification suite.
pub fn run_all(seed: u64) -> VerifyReport {
    VerifyReport {
        seed,
        checks: vec![
            check_conjugate_duality(),
            check_inverse_derivative(),
            check_sl_bound(seed),
            check_pointwise_optimum(seed),
            check_tightness(seed),
            check_steepness(seed),
            check_gradients(seed),
            check_kl_cross_entropy(seed),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let report = run_all(0);
        for c in &report.checks {
            assert!(c.passed, "{}: worst {} > {} ({})", c.name, c.worst, c.tolerance, c.detail);
        }
    }

    #[test]
    fn random_pmf_is_normalised() {
        let mut rng = substream(0, "pmf");
        for n in 2..10 {
            let p = random_pmf(n, &mut rng);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(p.iter().all(|&v| v > 0.0));
        }
    }
}
