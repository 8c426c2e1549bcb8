//! Training objectives for posterior estimation.
//!
//! Every divergence yields a variational lower bound `J(D)` written in terms
//! of the discriminator output `D` through the change of variable
//! `T = r(D)`. With constants dropped, each bound has the shape
//!
//! ```text
//! J(D) = E_joint[a(D)] - |T_x| E_{uniform x, marginal y}[b(D)]      (unsupervised)
//! J(D) = E_(x,y)[a(D_x(y))] - E_y[sum_i b(D_i(y))]                  (supervised)
//! ```
//!
//! | name | a(D)       | b(D)      |
//! |------|------------|-----------|
//! | KL   | log D      | D         |
//! | RKL  | -D         | -log D    |
//! | HD   | -sqrt D    | 1/sqrt D  |
//! | GAN  | log(1 - D) | -log D    |
//! | P    | 2(D - 1)   | D^2       |
//! | SL   | -D         | D - log D |
//!
//! Losses are returned as `-J` so every trainer minimises.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::divergence::{Divergence, DivergenceSpec, Form};
use crate::error::{Error, Result};
use crate::nn::{Activation, DiscriminatorNet, Gradients, NetMode};
use crate::rng::StreamRng;

/// Lower clamp applied to discriminator outputs before logs and divisions.
pub const D_FLOOR: f64 = 1e-6;
/// Upper clamp for outputs confined to `(0, 1)`.
pub const D_CEIL_UNIT: f64 = 1.0 - 1e-6;

/// Final-layer activation producing outputs in the divergence's domain.
pub fn activation_for(kind: Divergence) -> Activation {
    match kind {
        Divergence::Gan | Divergence::Sl => Activation::Sigmoid,
        Divergence::Kl | Divergence::Rkl | Divergence::Hd | Divergence::Pearson => {
            Activation::Softplus
        }
    }
}

fn check_output_activation(kind: Divergence, act: Activation) -> Result<()> {
    let ok = match act {
        Activation::Sigmoid | Activation::Softmax => true,
        Activation::Softplus => kind.d_domain().hi.is_infinite(),
        Activation::Linear | Activation::LeakyRelu(_) => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::config(
            "activation",
            format!("output activation {act} does not map into the {kind} domain {}", kind.d_domain()),
        ))
    }
}

/// Clamp `d` into the safe interior of the domain; the second value is the
/// derivative of the clamp (0 where it is active).
fn clamp(kind: Divergence, d: f64) -> (f64, f64) {
    let hi = if kind.d_domain().hi.is_finite() { D_CEIL_UNIT } else { f64::INFINITY };
    if d < D_FLOOR {
        (D_FLOOR, 0.0)
    } else if d > hi {
        (hi, 0.0)
    } else {
        (d, 1.0)
    }
}

/// `a(D)` and its derivative.
pub fn joint_term(kind: Divergence, d: f64) -> (f64, f64) {
    match kind {
        Divergence::Kl => (d.ln(), 1.0 / d),
        Divergence::Rkl | Divergence::Sl => (-d, -1.0),
        Divergence::Hd => (-d.sqrt(), -0.5 / d.sqrt()),
        Divergence::Gan => ((-d).ln_1p(), -1.0 / (1.0 - d)),
        Divergence::Pearson => (2.0 * (d - 1.0), 2.0),
    }
}

/// `b(D)` and its derivative.
pub fn product_term(kind: Divergence, d: f64) -> (f64, f64) {
    match kind {
        Divergence::Kl => (d, 1.0),
        Divergence::Rkl | Divergence::Gan => (-d.ln(), -1.0 / d),
        Divergence::Hd => (1.0 / d.sqrt(), -0.5 / (d * d.sqrt())),
        Divergence::Pearson => (d * d, 2.0 * d),
        Divergence::Sl => (d - d.ln(), 1.0 - 1.0 / d),
    }
}

/// Axis-aligned box `T_x` for continuous inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SupportBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::config("support_box", "bounds must be non-empty and of equal length"));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && h > l) {
                return Err(Error::config(
                    "support_box",
                    format!("dimension {i}: [{l}, {h}] has zero or undefined measure"),
                ));
            }
        }
        Ok(SupportBox { lo, hi })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Lebesgue measure `|T_x|`.
    pub fn measure(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| v >= l && v <= h)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        let dists: Vec<_> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| Uniform::new_inclusive(l, h).expect("validated bounds"))
            .collect();
        let mut out = Array2::zeros((n, self.dim()));
        for mut row in out.rows_mut() {
            for (v, d) in row.iter_mut().zip(&dists) {
                *v = d.sample(rng);
            }
        }
        out
    }
}

/// Joint samples plus an independently drawn batch from `p_U(x) p_Y(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBatch {
    pub x_joint: Array2<f64>,
    pub y_joint: Array2<f64>,
    pub x_marginal: Array2<f64>,
    pub y_marginal: Array2<f64>,
}

impl JointBatch {
    pub fn batch_size(&self) -> usize {
        self.x_joint.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x_joint.nrows();
        if n == 0 {
            return Err(Error::Empty("joint batch"));
        }
        let rows = [self.y_joint.nrows(), self.x_marginal.nrows(), self.y_marginal.nrows()];
        if rows.iter().any(|&r| r != n) {
            return Err(Error::Shape(format!("batch blocks have {n} and {rows:?} rows")));
        }
        if self.x_joint.ncols() != self.x_marginal.ncols() || self.y_joint.ncols() != self.y_marginal.ncols() {
            return Err(Error::Shape("joint and marginal blocks differ in width".into()));
        }
        Ok(())
    }

    /// Network inputs `x || y` for the joint and the product batch.
    pub fn inputs(&self) -> (Array2<f64>, Array2<f64>) {
        (
            concatenate![Axis(1), self.x_joint, self.y_joint],
            concatenate![Axis(1), self.x_marginal, self.y_marginal],
        )
    }
}

/// Pair `x_joint, y_joint` with uniform draws from the support box and a
/// random permutation of `y_joint`.
pub fn marginal_resample<R: Rng + ?Sized>(
    x_joint: Array2<f64>,
    y_joint: Array2<f64>,
    support: &SupportBox,
    rng: &mut R,
) -> Result<JointBatch> {
    if x_joint.ncols() != support.dim() {
        return Err(Error::Shape(format!(
            "x has {} columns but the support box has {} dimensions",
            x_joint.ncols(),
            support.dim()
        )));
    }
    let n = x_joint.nrows();
    let x_marginal = support.sample(n, rng);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let y_marginal = y_joint.select(Axis(0), &order);
    let batch = JointBatch { x_joint, y_joint, x_marginal, y_marginal };
    batch.validate()?;
    Ok(batch)
}

/// Labelled observations for the supervised architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedBatch {
    pub y: Array2<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl SupervisedBatch {
    pub fn new(y: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let batch = SupervisedBatch { y, labels, classes };
        batch.validate()?;
        Ok(batch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::config("classes", format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.labels.is_empty() {
            return Err(Error::Empty("supervised batch"));
        }
        if self.labels.len() != self.y.nrows() {
            return Err(Error::Shape(format!(
                "{} labels for {} observations",
                self.labels.len(),
                self.y.nrows()
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.classes) {
            return Err(Error::config("labels", format!("label {bad} outside [0, {})", self.classes)));
        }
        Ok(())
    }
}

/// Loss value together with its gradient with respect to the network outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputLoss {
    pub loss: f64,
    pub grad: Array2<f64>,
}

/// `-J` of the unsupervised bound evaluated on raw outputs. Returns the loss
/// and the gradients for the joint and product batches.
pub fn unsupervised_loss_from_outputs(
    spec: &DivergenceSpec,
    d_joint: ArrayView2<f64>,
    d_marginal: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let (nj, nm) = (d_joint.nrows(), d_marginal.nrows());
    if nj == 0 || nm == 0 {
        return Err(Error::Empty("discriminator outputs"));
    }
    if d_joint.ncols() != 1 || d_marginal.ncols() != 1 {
        return Err(Error::Shape("unsupervised outputs must be a single column".into()));
    }
    let kind = spec.kind;
    let t = spec.tx_measure();
    let mut loss = 0.0;
    let g_joint = d_joint.mapv(|d| {
        let (dc, gate) = clamp(kind, d);
        let (a, da) = joint_term(kind, dc);
        loss -= a / nj as f64;
        -da * gate / nj as f64
    });
    let g_marg = d_marginal.mapv(|d| {
        let (dc, gate) = clamp(kind, d);
        let (b, db) = product_term(kind, dc);
        loss += t * b / nm as f64;
        t * db * gate / nm as f64
    });
    if !loss.is_finite() {
        return Err(Error::Training(format!("non-finite {kind} loss")));
    }
    Ok((loss, g_joint, g_marg))
}

/// `-J` of the supervised bound evaluated on an `n x m` output matrix.
pub fn supervised_loss_from_outputs(
    spec: &DivergenceSpec,
    d: ArrayView2<f64>,
    labels: &[usize],
) -> Result<OutputLoss> {
    let n = d.nrows();
    if n == 0 {
        return Err(Error::Empty("discriminator outputs"));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} output rows", labels.len())));
    }
    let m = d.ncols();
    if let Some(&bad) = labels.iter().find(|&&l| l >= m) {
        return Err(Error::config("labels", format!("label {bad} outside [0, {m})")));
    }
    let kind = spec.kind;
    let scale = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(d.raw_dim());
    for (i, (row, &label)) in d.rows().into_iter().zip(labels).enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let (dc, gate) = clamp(kind, v);
            let (b, db) = product_term(kind, dc);
            let mut g = db;
            loss += b * scale;
            if j == label {
                let (a, da) = joint_term(kind, dc);
                loss -= a * scale;
                g -= da;
            }
            grad[[i, j]] = g * gate * scale;
        }
    }
    if !loss.is_finite() {
        return Err(Error::Training(format!("non-finite {kind} loss")));
    }
    Ok(OutputLoss { loss, grad })
}

/// Mean cross-entropy `-log p_label` on probability rows.
pub fn cross_entropy_from_outputs(probs: ArrayView2<f64>, labels: &[usize]) -> Result<OutputLoss> {
    let n = probs.nrows();
    if n == 0 {
        return Err(Error::Empty("probabilities"));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} rows", labels.len())));
    }
    let mut grad = Array2::zeros(probs.raw_dim());
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        if label >= probs.ncols() {
            return Err(Error::config("labels", format!("label {label} outside [0, {})", probs.ncols())));
        }
        // the loss is flat below the floor, so the gradient vanishes there
        let p = probs[[i, label]];
        loss -= p.max(D_FLOOR).ln() / n as f64;
        grad[[i, label]] = if p < D_FLOOR { 0.0 } else { -1.0 / (p * n as f64) };
    }
    Ok(OutputLoss { loss, grad })
}

/// Loss and parameter gradients from one objective evaluation.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub loss: f64,
    pub grads: Gradients,
}

fn forward(net: &DiscriminatorNet, x: ArrayView2<f64>, rng: Option<&mut StreamRng>) -> Result<crate::nn::Tape> {
    match rng {
        Some(rng) => net.forward_train(x, rng),
        None => net.forward(x),
    }
}

/// Unsupervised objective on a network with scalar output fed `x || y`.
/// Dropout is active when `dropout_rng` is given.
pub fn unsupervised_objective(
    spec: &DivergenceSpec,
    net: &DiscriminatorNet,
    batch: &JointBatch,
    mut dropout_rng: Option<&mut StreamRng>,
) -> Result<ObjectiveEval> {
    if net.mode() != NetMode::Unsupervised {
        return Err(Error::config("arch", "unsupervised objective needs an unsupervised network"));
    }
    check_output_activation(spec.kind, net.output_activation())?;
    batch.validate()?;
    let (joint, product) = batch.inputs();
    let tape_j = forward(net, joint.view(), dropout_rng.as_deref_mut())?;
    let tape_m = forward(net, product.view(), dropout_rng)?;
    let (loss, g_j, g_m) = unsupervised_loss_from_outputs(spec, tape_j.output().view(), tape_m.output().view())?;
    let mut grads = net.backward(&tape_j, g_j.view())?;
    grads.add_assign(&net.backward(&tape_m, g_m.view())?);
    Ok(ObjectiveEval { loss, grads })
}

/// Supervised objective on a network with one output per class fed `y`.
pub fn supervised_objective(
    spec: &DivergenceSpec,
    net: &DiscriminatorNet,
    batch: &SupervisedBatch,
    dropout_rng: Option<&mut StreamRng>,
) -> Result<ObjectiveEval> {
    check_supervised(net, batch)?;
    check_output_activation(spec.kind, net.output_activation())?;
    let tape = forward(net, batch.y.view(), dropout_rng)?;
    let out = supervised_loss_from_outputs(spec, tape.output().view(), &batch.labels)?;
    let grads = net.backward(&tape, out.grad.view())?;
    Ok(ObjectiveEval { loss: out.loss, grads })
}

/// Standard cross-entropy on a softmax network, as a reference trainer.
pub fn cross_entropy_objective(
    net: &DiscriminatorNet,
    batch: &SupervisedBatch,
    dropout_rng: Option<&mut StreamRng>,
) -> Result<ObjectiveEval> {
    check_supervised(net, batch)?;
    if net.output_activation() != Activation::Softmax {
        return Err(Error::config("activation", "cross-entropy needs a softmax output"));
    }
    let tape = forward(net, batch.y.view(), dropout_rng)?;
    let out = cross_entropy_from_outputs(tape.output().view(), &batch.labels)?;
    let grads = net.backward(&tape, out.grad.view())?;
    Ok(ObjectiveEval { loss: out.loss, grads })
}

fn check_supervised(net: &DiscriminatorNet, batch: &SupervisedBatch) -> Result<()> {
    batch.validate()?;
    match net.mode() {
        NetMode::Supervised { classes } if classes == batch.classes => Ok(()),
        NetMode::Supervised { classes } => Err(Error::Shape(format!(
            "network has {classes} outputs, batch has {} classes",
            batch.classes
        ))),
        NetMode::Unsupervised => Err(Error::config("arch", "supervised objective needs a supervised network")),
    }
}

/// Exact value of the unsupervised bound on a finite alphabet, where every
/// probability is known: `sum pj r(D) - sum pu f_u*(r(D)) + K`. Tables are
/// indexed `[x, y]`; `p_prod` holds `p_U(x) p_Y(y)`.
pub fn discrete_bound(
    spec: &DivergenceSpec,
    d: ArrayView2<f64>,
    p_joint: ArrayView2<f64>,
    p_prod: ArrayView2<f64>,
) -> Result<f64> {
    if d.raw_dim() != p_joint.raw_dim() || d.raw_dim() != p_prod.raw_dim() {
        return Err(Error::Shape("discriminator and probability tables differ".into()));
    }
    let mut total = spec.constant_term(Form::Unsupervised) * p_prod.sum();
    for ((&dv, &pj), &pu) in d.iter().zip(p_joint.iter()).zip(p_prod.iter()) {
        let t = spec.r(dv)?;
        total += pj * t - pu * spec.f_star(t, Form::Unsupervised)?;
    }
    Ok(total)
}

/// Optimal discriminator table for a discrete joint `p[x, y]` with uniform
/// `p_U` over the `x` alphabet.
pub fn discrete_optimal_d(spec: &DivergenceSpec, p_joint: ArrayView2<f64>) -> Result<Array2<f64>> {
    let p_y: Array1<f64> = p_joint.sum_axis(Axis(0));
    let mut out = Array2::zeros(p_joint.raw_dim());
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = spec.optimal_d(p_joint[[i, j]] / p_y[j])?;
    }
    Ok(out)
}

/// `p_U(x) p_Y(y)` for a discrete joint with uniform `p_U` over `x`.
pub fn discrete_product(p_joint: ArrayView2<f64>) -> Array2<f64> {
    let m = p_joint.nrows() as f64;
    let p_y = p_joint.sum_axis(Axis(0));
    let mut out = Array2::zeros(p_joint.raw_dim());
    for mut row in out.rows_mut() {
        row.assign(&(&p_y / m));
    }
    out
}

/// Split an `n x (dx + dy)` block back into its `x` and `y` parts.
pub fn split_xy(inputs: ArrayView2<f64>, dx: usize) -> (Array2<f64>, Array2<f64>) {
    (inputs.slice(s![.., ..dx]).to_owned(), inputs.slice(s![.., dx..]).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::numeric_f_divergence;
    use crate::nn::{Layer, NetConfig};
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn spec(kind: Divergence, t: f64) -> DivergenceSpec {
        DivergenceSpec::new(kind, t).unwrap()
    }

    #[test]
    fn sl_constant_output_value() {
        let d = Array2::from_elem((5, 1), 0.5);
        let (loss, _, _) = unsupervised_loss_from_outputs(&spec(Divergence::Sl, 2.0), d.view(), d.view()).unwrap();
        assert_abs_diff_eq!(loss, 0.5 + 2.0 * (0.5 + 2f64.ln()), epsilon = 1e-12);
        assert_abs_diff_eq!(loss, 2.8863, epsilon = 1e-4);
    }

    #[test]
    fn supervised_examples() {
        let kl = supervised_loss_from_outputs(&DivergenceSpec::unit(Divergence::Kl), array![[0.7, 0.2, 0.1]].view(), &[0]).unwrap();
        assert_abs_diff_eq!(kl.loss, 1.0 - 0.7f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(kl.loss, 1.3567, epsilon = 1e-4);
        let sl = supervised_loss_from_outputs(&DivergenceSpec::unit(Divergence::Sl), Array2::from_elem((3, 4), 0.5).view(), &[0, 3, 1]).unwrap();
        assert_abs_diff_eq!(sl.loss, 5.2726, epsilon = 1e-4);
    }

    #[test]
    fn empty_and_bad_batches_error() {
        let s = DivergenceSpec::unit(Divergence::Kl);
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(unsupervised_loss_from_outputs(&s, empty.view(), empty.view()).is_err());
        assert!(supervised_loss_from_outputs(&s, array![[0.5, 0.5]].view(), &[2]).is_err());
        assert!(SupervisedBatch::new(array![[0.0]], vec![1], 1).is_err());
        assert!(SupervisedBatch::new(array![[0.0]], vec![3], 2).is_err());
    }

    #[test]
    fn marginal_resample_properties() {
        let mut rng = substream(3, "marginal");
        let n = 1000;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / n as f64);
        let y = Array2::from_shape_fn((n, 1), |(i, _)| (i * 7 % 13) as f64);
        let b = marginal_resample(x, y.clone(), &SupportBox::interval(0.0, 4.0).unwrap(), &mut rng).unwrap();
        let mean = b.x_marginal.mean().unwrap();
        assert!((mean - 2.0).abs() < 0.15, "mean {mean}");
        assert!(b.x_marginal.iter().all(|&v| (0.0..=4.0).contains(&v)));
        let mut a: Vec<f64> = y.iter().copied().collect();
        let mut c: Vec<f64> = b.y_marginal.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        c.sort_by(f64::total_cmp);
        assert_eq!(a, c);
        assert!(SupportBox::interval(1.0, 1.0).is_err());
    }

    #[test]
    fn activation_mapping() {
        assert_eq!(activation_for(Divergence::Gan), Activation::Sigmoid);
        assert_eq!(activation_for(Divergence::Sl), Activation::Sigmoid);
        for k in [Divergence::Kl, Divergence::Rkl, Divergence::Hd, Divergence::Pearson] {
            assert_eq!(activation_for(k), Activation::Softplus);
        }
        assert!(check_output_activation(Divergence::Sl, Activation::Softplus).is_err());
        assert!(check_output_activation(Divergence::Kl, Activation::Linear).is_err());
    }

    #[test]
    fn discrete_bound_is_tight_at_optimum() {
        let p = array![[0.30, 0.05, 0.05], [0.05, 0.25, 0.05], [0.02, 0.03, 0.20]];
        let pu = discrete_product(p.view());
        let m = p.nrows() as f64;
        for kind in Divergence::ALL {
            let s = spec(kind, m);
            let d = discrete_optimal_d(&s, p.view()).unwrap();
            let bound = discrete_bound(&s, d.view(), p.view(), pu.view()).unwrap();
            let flat_p: Vec<f64> = p.iter().copied().collect();
            let flat_q: Vec<f64> = pu.iter().copied().collect();
            let exact = numeric_f_divergence(&s, Form::Unsupervised, &flat_p, &flat_q).unwrap();
            assert_abs_diff_eq!(bound, exact, epsilon = 1e-9);
            // any perturbation lowers the bound
            let lower = discrete_bound(&s, (&d * 0.9).view(), p.view(), pu.view()).unwrap();
            assert!(lower < bound, "{kind}");
        }
    }

    fn fd_check(net: &mut DiscriminatorNet, loss: &dyn Fn(&DiscriminatorNet) -> f64, analytic: &[f64]) -> f64 {
        let theta = net.params_flat();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (i, &g) in analytic.iter().enumerate() {
            let mut p = theta.clone();
            p[i] += h;
            net.set_params_flat(&p).unwrap();
            let up = loss(net);
            p[i] -= 2.0 * h;
            net.set_params_flat(&p).unwrap();
            let down = loss(net);
            let num = (up - down) / (2.0 * h);
            let err = (num - g).abs() / (num.abs().max(g.abs()).max(1e-3));
            worst = worst.max(err);
        }
        net.set_params_flat(&theta).unwrap();
        worst
    }

    #[test]
    fn objective_gradients_match_finite_differences() {
        let mut rng = substream(1, "batch");
        let x = Array2::from_shape_fn((6, 1), |_| rng.random_range(0.0..2.0));
        let y = Array2::from_shape_fn((6, 1), |_| rng.random_range(0.0..2.0));
        let batch = marginal_resample(x, y, &SupportBox::interval(0.0, 2.0).unwrap(), &mut rng).unwrap();
        for kind in Divergence::ALL {
            let s = spec(kind, 2.0);
            let mut cfg = NetConfig::standard(2, NetMode::Unsupervised, activation_for(kind), 4);
            cfg.hidden = vec![5, 4];
            let mut net = DiscriminatorNet::new(&cfg).unwrap();
            let eval = unsupervised_objective(&s, &net, &batch, None).unwrap();
            let worst = fd_check(&mut net, &|n| unsupervised_objective(&s, n, &batch, None).unwrap().loss, &eval.grads.to_flat());
            assert!(worst < 1e-4, "{kind}: {worst}");
        }
    }

    #[test]
    fn kl_softmax_gradient_equals_cross_entropy() {
        let mut rng = substream(2, "batch");
        let y = Array2::from_shape_fn((8, 2), |_| rng.random_range(-2.0..2.0));
        let labels: Vec<usize> = (0..8).map(|i| i % 3).collect();
        let batch = SupervisedBatch::new(y, labels, 3).unwrap();
        let net = DiscriminatorNet::new(&NetConfig::standard(2, NetMode::Supervised { classes: 3 }, Activation::Softmax, 9)).unwrap();
        let kl = supervised_objective(&DivergenceSpec::unit(Divergence::Kl), &net, &batch, None).unwrap();
        let ce = cross_entropy_objective(&net, &batch, None).unwrap();
        assert_abs_diff_eq!(kl.loss, ce.loss + 1.0, epsilon = 1e-12);
        for (a, b) in kl.grads.to_flat().iter().zip(ce.grads.to_flat()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn wrong_architecture_is_rejected() {
        let layer = Layer { weights: array![[1.0]], bias: array![0.0], activation: Activation::Sigmoid };
        let net = DiscriminatorNet::from_layers(vec![layer], NetMode::Unsupervised, 0.0, 0).unwrap();
        let batch = SupervisedBatch::new(array![[0.0], [1.0]], vec![0, 1], 2).unwrap();
        assert!(supervised_objective(&DivergenceSpec::unit(Divergence::Sl), &net, &batch, None).is_err());
    }
}
