//! Bottom-up certification of the objectives.
//!
//! A per-bin integrand `J(D)` whose derivative factors as
//! `(D - k(p)) g1(D)` with `g1 < 0` is concave with its maximum at
//! `D = k(p)`, where `p = p_joint / p_prod` is the posterior density and
//! `p_prod = |T_x| p_U(x) p_Y(y)`. Each divergence is one `(k, alpha, beta)`
//! choice in `g1(D) = -p1 / D^alpha * (1 / (1 - D))^beta`:
//!
//! | name | k(p)      | p1             | alpha | beta |
//! |------|-----------|----------------|-------|------|
//! | KL   | p         | p_prod         | 1     | 0    |
//! | RKL  | 1/p       | p_joint        | 1     | 0    |
//! | HD   | 1/p       | p_joint / 2    | 3/2   | 0    |
//! | GAN  | 1/(1+p)   | p_joint+p_prod | 1     | 1    |
//! | P    | p         | 2 p_prod       | 0     | 0    |
//! | SL   | 1/(1+p)   | p_joint+p_prod | 1     | 0    |

use serde::{Deserialize, Serialize};

use crate::divergence::{Divergence, DivergenceSpec, Form};
use crate::error::{Error, Result};

/// One `(k, alpha, beta)` entry of the catalogue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BottomUpSpec {
    pub kind: Divergence,
    pub alpha: f64,
    pub beta: f64,
}

impl BottomUpSpec {
    pub fn for_divergence(kind: Divergence) -> Self {
        let (alpha, beta) = match kind {
            Divergence::Kl | Divergence::Rkl | Divergence::Sl => (1.0, 0.0),
            Divergence::Hd => (1.5, 0.0),
            Divergence::Gan => (1.0, 1.0),
            Divergence::Pearson => (0.0, 0.0),
        };
        BottomUpSpec { kind, alpha, beta }
    }

    pub fn catalogue() -> Vec<BottomUpSpec> {
        Divergence::ALL.iter().map(|&k| Self::for_divergence(k)).collect()
    }

    /// `k(p)`, the optimal output for posterior density `p`.
    pub fn k(&self, p: f64) -> f64 {
        match self.kind {
            Divergence::Kl | Divergence::Pearson => p,
            Divergence::Rkl | Divergence::Hd => 1.0 / p,
            Divergence::Gan | Divergence::Sl => 1.0 / (1.0 + p),
        }
    }

    fn p1(&self, p_joint: f64, p_prod: f64) -> f64 {
        match self.kind {
            Divergence::Kl => p_prod,
            Divergence::Rkl => p_joint,
            Divergence::Hd => 0.5 * p_joint,
            Divergence::Gan | Divergence::Sl => p_joint + p_prod,
            Divergence::Pearson => 2.0 * p_prod,
        }
    }

    /// `g1(D, k)`.
    pub fn g1(&self, d: f64, p_joint: f64, p_prod: f64) -> Result<f64> {
        check_inputs(self.kind, d, p_joint, p_prod)?;
        Ok(-self.p1(p_joint, p_prod) / d.powf(self.alpha) * (1.0 / (1.0 - d)).powf(self.beta))
    }
}

fn check_inputs(kind: Divergence, d: f64, p_joint: f64, p_prod: f64) -> Result<()> {
    for (name, v) in [("joint density", p_joint), ("product density", p_prod)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(name, v, "(0, inf)"));
        }
    }
    let dom = kind.d_domain();
    if !dom.contains(d) {
        return Err(Error::domain("discriminator output", d, dom));
    }
    Ok(())
}

/// `dJ/dD = (D - k(p_joint / p_prod)) g1(D, k)`.
pub fn integrand_derivative(bspec: &BottomUpSpec, d: f64, p_joint: f64, p_prod: f64) -> Result<f64> {
    let g1 = bspec.g1(d, p_joint, p_prod)?;
    Ok((d - bspec.k(p_joint / p_prod)) * g1)
}

/// Per-bin integrand of the variational bound,
/// `p_joint r(D) - p_prod f*(r(D))`, using the unit-measure conjugate.
pub fn bin_integrand(kind: Divergence, d: f64, p_joint: f64, p_prod: f64) -> Result<f64> {
    check_inputs(kind, d, p_joint, p_prod)?;
    let spec = DivergenceSpec::unit(kind);
    let t = spec.r(d)?;
    Ok(p_joint * t - p_prod * spec.f_star(t, Form::Supervised)?)
}

/// Closed-form derivative of [`bin_integrand`] through the chain rule
/// `r'(D) (p_joint - p_prod f*'(r(D)))`.
pub fn bin_integrand_derivative(kind: Divergence, d: f64, p_joint: f64, p_prod: f64) -> Result<f64> {
    check_inputs(kind, d, p_joint, p_prod)?;
    let spec = DivergenceSpec::unit(kind);
    let t = spec.r(d)?;
    Ok(spec.r_prime(d)? * (p_joint - p_prod * spec.f_star_prime(t, Form::Supervised)?))
}

/// Search bracket for the pointwise maximiser.
pub fn search_bracket(kind: Divergence) -> (f64, f64) {
    if kind.d_domain().hi.is_finite() {
        (1e-6, 1.0 - 1e-6)
    } else {
        (1e-6, 1e3)
    }
}

pub const GOLDEN_ITERATIONS: usize = 200;

/// Maximise a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section_max(f: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64, iterations: usize) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::Search(format!("empty bracket [{lo}, {hi}]")));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..iterations {
        if b - a <= f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let edge = 1e-9 * (hi - lo);
    if x - lo < edge || hi - x < edge {
        return Err(Error::Search(format!("maximum at bracket edge {x} of [{lo}, {hi}]")));
    }
    Ok(x)
}

/// Numerical argmax of the per-bin integrand.
pub fn pointwise_optimal_d(kind: Divergence, p_joint: f64, p_prod: f64) -> Result<f64> {
    let (lo, hi) = search_bracket(kind);
    golden_section_max(|d| bin_integrand(kind, d, p_joint, p_prod), lo, hi, GOLDEN_ITERATIONS)
}

/// Magnitudes `(|dJ_GAN/dD|, |dJ_SL/dD|)` at `D = D_opt + delta`, where
/// both share the optimum `D_opt = 1/(1 + p_joint/p_prod)`.
pub fn steepness_compare(p_joint: f64, p_prod: f64, delta: f64) -> Result<(f64, f64)> {
    let d_opt = 1.0 / (1.0 + p_joint / p_prod);
    let d = d_opt + delta;
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::domain("shifted discriminator output", d, "(0, 1)"));
    }
    let gan = integrand_derivative(&BottomUpSpec::for_divergence(Divergence::Gan), d, p_joint, p_prod)?;
    let sl = integrand_derivative(&BottomUpSpec::for_divergence(Divergence::Sl), d, p_joint, p_prod)?;
    Ok((gan.abs(), sl.abs()))
}
