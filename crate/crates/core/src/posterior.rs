//! From discriminator outputs to posterior densities and MAP decisions.

use ndarray::{Array1, ArrayView1};

use crate::divergence::{Divergence, DivergenceSpec, Form};
use crate::error::{Error, Result};

/// Invert the optimal-output map: KL and P give `D`, RKL and HD give `1/D`,
/// GAN and SL give `(1 - D)/D`.
pub fn posterior_from_d(kind: Divergence, d: f64) -> Result<f64> {
    let dom = kind.d_domain();
    if !dom.contains(d) {
        return Err(Error::domain("discriminator output", d, dom));
    }
    Ok(match kind {
        Divergence::Kl | Divergence::Pearson => d,
        Divergence::Rkl | Divergence::Hd => 1.0 / d,
        Divergence::Gan | Divergence::Sl => (1.0 - d) / d,
    })
}

/// Like [`posterior_from_d`] but clamps outputs into the open domain first,
/// so saturated network outputs still give finite estimates.
pub fn posterior_from_d_clamped(kind: Divergence, d: f64) -> f64 {
    let dom = kind.d_domain();
    let lo = crate::objectives::D_FLOOR;
    let hi = if dom.hi.is_finite() { crate::objectives::D_CEIL_UNIT } else { f64::MAX };
    posterior_from_d(kind, d.clamp(lo, hi)).expect("clamped into domain")
}

/// Index of the largest entry; ties go to the lowest index.
pub fn map_classify(values: ArrayView1<f64>) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::Empty("posterior vector"));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::domain("posterior value", v, "finite reals"));
        }
        if v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// First-order estimate of `p(D_opt) - p(D_current)`:
/// `delta * (f_u*)''(r(D_current)) / |T_x|` with `delta = r(D_opt) - r(D_current)`.
pub fn posterior_gap_estimate(spec: &DivergenceSpec, d_current: f64, d_optimal: f64) -> Result<f64> {
    let t_cur = spec.r(d_current)?;
    let delta = spec.r(d_optimal)? - t_cur;
    Ok(delta * spec.f_star_second(t_cur, Form::Unsupervised)? / spec.tx_measure())
}

/// Per-class (or scalar) posterior estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEstimate {
    pub values: Array1<f64>,
    pub normalized: bool,
}

impl PosteriorEstimate {
    pub fn from_outputs(kind: Divergence, outputs: ArrayView1<f64>) -> Self {
        PosteriorEstimate {
            values: outputs.mapv(|d| posterior_from_d_clamped(kind, d)),
            normalized: false,
        }
    }

    /// Rescale to sum to one. Decisions are unchanged.
    pub fn normalize(&self) -> Result<Self> {
        let total = self.values.sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::domain("posterior mass", total, "(0, inf)"));
        }
        Ok(PosteriorEstimate {
            values: &self.values / total,
            normalized: true,
        })
    }

    pub fn map(&self) -> Result<usize> {
        map_classify(self.values.view())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(posterior_from_d(Divergence::Sl, 0.5).unwrap(), 1.0);
        assert_abs_diff_eq!(posterior_from_d(Divergence::Gan, 0.25).unwrap(), 3.0, epsilon = 1e-15);
        assert_eq!(posterior_from_d(Divergence::Rkl, 2.0).unwrap(), 0.5);
        assert!(posterior_from_d(Divergence::Sl, 1.5).is_err());
        assert!(posterior_from_d(Divergence::Kl, 0.0).is_err());
    }

    #[test]
    fn round_trip_through_optimal_output() {
        for kind in Divergence::ALL {
            let s = DivergenceSpec::unit(kind);
            for i in 1..200 {
                let p = i as f64 * 0.05;
                let back = posterior_from_d(kind, s.optimal_d(p).unwrap()).unwrap();
                assert!((back - p).abs() <= 1e-12 * p.max(1.0), "{kind} {p} {back}");
            }
        }
    }

    #[test]
    fn map_rules() {
        assert_eq!(map_classify(array![0.1, 0.7, 0.2].view()).unwrap(), 1);
        assert_eq!(map_classify(array![0.5, 0.5].view()).unwrap(), 0);
        assert_eq!(map_classify(array![2.0, 6.0, 2.0].view()).unwrap(), 1);
        assert!(map_classify(Array1::<f64>::zeros(0).view()).is_err());
        assert!(map_classify(array![f64::NAN].view()).is_err());
    }

    #[test]
    fn gap_examples() {
        let kl = DivergenceSpec::unit(Divergence::Kl);
        assert_eq!(posterior_gap_estimate(&kl, 1.3, 1.3).unwrap(), 0.0);
        let gap = posterior_gap_estimate(&kl, 1.9, 2.0).unwrap();
        let exact = posterior_from_d(Divergence::Kl, 2.0).unwrap() - posterior_from_d(Divergence::Kl, 1.9).unwrap();
        assert_abs_diff_eq!(gap, 1.9 * (2.0f64 / 1.9).ln(), epsilon = 1e-12);
        assert!((gap - exact).abs() < 5e-3);
        assert!(posterior_gap_estimate(&kl, 2.1, 2.0).unwrap() < 0.0);
        let sl = DivergenceSpec::new(Divergence::Sl, 3.0).unwrap();
        assert!(posterior_gap_estimate(&sl, 1.2, 0.5).is_err());
    }

    #[test]
    fn normalisation_keeps_decision() {
        let est = PosteriorEstimate::from_outputs(Divergence::Sl, array![0.9, 0.2, 0.6].view());
        let n = est.normalize().unwrap();
        assert!(n.normalized);
        assert_abs_diff_eq!(n.values.sum(), 1.0, epsilon = 1e-12);
        assert_eq!(est.map().unwrap(), n.map().unwrap());
        assert_eq!(est.map().unwrap(), 1);
    }

    proptest! {
        #[test]
        fn decisions_are_scale_free(v in prop::collection::vec(0.0f64..10.0, 1..8), c in 1e-3f64..1e3) {
            let a = Array1::from(v);
            prop_assert_eq!(map_classify(a.view()).unwrap(), map_classify((&a * c).view()).unwrap());
        }

        #[test]
        fn gap_sign_follows_kl_posterior(d in 0.05f64..5.0, d_opt in 0.05f64..5.0) {
            let kl = DivergenceSpec::unit(Divergence::Kl);
            let gap = posterior_gap_estimate(&kl, d, d_opt).unwrap();
            prop_assert_eq!(gap.partial_cmp(&0.0), (d_opt - d).partial_cmp(&0.0));
        }
    }
}
