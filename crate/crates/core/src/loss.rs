//! Losses, their derivatives, and the Newton pseudo-response.
//!
//! Squared loss is `½(y − g)²`, so its hessian is exactly 1 and the Newton
//! step reduces to ordinary least squares on residuals. Log-loss takes `g` as
//! log-odds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HESSIAN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Squared,
    Logloss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub hessian_floor: f64,
}

impl LossSpec {
    pub fn squared() -> Self {
        Self {
            kind: LossKind::Squared,
            hessian_floor: DEFAULT_HESSIAN_FLOOR,
        }
    }

    pub fn logloss() -> Self {
        Self {
            kind: LossKind::Logloss,
            hessian_floor: DEFAULT_HESSIAN_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hessian_floor > 0.0 && self.hessian_floor.is_finite()) {
            return Err(Error::config(format!(
                "hessian_floor must be positive, got {}",
                self.hessian_floor
            )));
        }
        Ok(())
    }

    /// Whether every hessian is identically 1.
    pub fn unit_hessian(&self) -> bool {
        self.kind == LossKind::Squared
    }

    /// Pointwise loss.
    pub fn value(&self, y: f64, g: f64) -> f64 {
        match self.kind {
            LossKind::Squared => 0.5 * (y - g) * (y - g),
            // log(1 + e^g) − y·g, evaluated without overflow
            LossKind::Logloss => softplus(g) - y * g,
        }
    }

    /// Gradient, hessian and pseudo-response at one point.
    pub fn newton_point(&self, y: f64, g: f64) -> (f64, f64, f64) {
        match self.kind {
            LossKind::Squared => (g - y, 1.0, y - g),
            LossKind::Logloss => {
                let p = sigmoid(g);
                let grad = p - y;
                let hess = (p * (1.0 - p)).max(self.hessian_floor);
                (grad, hess, -grad / hess)
            }
        }
    }

    /// Newton quantities for every row. `y` and `g` must have equal length.
    pub fn derivatives(&self, y: &[f64], g: &[f64]) -> Result<NewtonState> {
        if y.len() != g.len() {
            return Err(Error::data(format!(
                "response has {} rows, scores have {}",
                y.len(),
                g.len()
            )));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite score at row {i}")));
        }
        let n = y.len();
        let mut state = NewtonState {
            gradient: vec![0.0; n],
            hessian: vec![0.0; n],
            pseudo_response: vec![0.0; n],
        };
        for i in 0..n {
            let (gr, h, z) = self.newton_point(y[i], g[i]);
            state.gradient[i] = gr;
            state.hessian[i] = h;
            state.pseudo_response[i] = z;
        }
        Ok(state)
    }

    /// Unweighted mean loss.
    pub fn mean_loss(&self, y: &[f64], g: &[f64]) -> Result<f64> {
        if y.is_empty() {
            return Err(Error::data("mean loss of an empty vector"));
        }
        if y.len() != g.len() {
            return Err(Error::data("response and score lengths differ"));
        }
        let total: f64 = y.iter().zip(g).map(|(&yi, &gi)| self.value(yi, gi)).sum();
        Ok(total / y.len() as f64)
    }

    /// Constant starting score: the mean for squared loss, the logit of the
    /// mean for log-loss.
    pub fn initial_score(&self, y: &[f64]) -> Result<f64> {
        if y.is_empty() {
            return Err(Error::data("initial score of an empty response"));
        }
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        match self.kind {
            LossKind::Squared => Ok(mean),
            LossKind::Logloss => {
                if !(mean > 0.0 && mean < 1.0) {
                    return Err(Error::data(
                        "binary response is constant; log-odds intercept undefined",
                    ));
                }
                Ok((mean / (1.0 - mean)).ln())
            }
        }
    }
}

/// Per-row gradient, hessian and pseudo-response `z = −G/H`.
#[derive(Debug, Clone)]
pub struct NewtonState {
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
    pub pseudo_response: Vec<f64>,
}

pub fn sigmoid(g: f64) -> f64 {
    if g >= 0.0 {
        1.0 / (1.0 + (-g).exp())
    } else {
        let e = g.exp();
        e / (1.0 + e)
    }
}

fn softplus(g: f64) -> f64 {
    if g > 0.0 {
        g + (-g).exp().ln_1p()
    } else {
        g.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn squared_point() {
        let (g, h, z) = LossSpec::squared().newton_point(1.0, 0.3);
        assert!((g + 0.7).abs() < 1e-15);
        assert_eq!(h, 1.0);
        assert!((z - 0.7).abs() < 1e-15);
    }

    #[test]
    fn logloss_point_at_zero() {
        let (g, h, z) = LossSpec::logloss().newton_point(1.0, 0.0);
        assert_eq!(g, -0.5);
        assert_eq!(h, 0.25);
        assert_eq!(z, 2.0);
    }

    #[test]
    fn logloss_hessian_floor() {
        let spec = LossSpec::logloss();
        let (_, h, z) = spec.newton_point(0.0, 20.0);
        assert_eq!(h, spec.hessian_floor);
        assert!(z.is_finite());
    }

    #[test]
    fn mean_loss_examples() {
        let sq = LossSpec::squared();
        assert_eq!(sq.mean_loss(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(sq.mean_loss(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 0.5);
        let ll = LossSpec::logloss().mean_loss(&[1.0], &[0.0]).unwrap();
        assert!((ll - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(sq.mean_loss(&[], &[]).is_err());
    }

    #[test]
    fn initial_scores() {
        assert_eq!(LossSpec::squared().initial_score(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        let ll = LossSpec::logloss();
        assert_eq!(ll.initial_score(&[0.0, 1.0]).unwrap(), 0.0);
        let v = ll.initial_score(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(ll.initial_score(&[1.0, 1.0]).is_err());
        assert!(ll.initial_score(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn rejects_non_finite_scores() {
        assert!(LossSpec::squared().derivatives(&[1.0], &[f64::NAN]).is_err());
    }

    #[test]
    fn large_scores_do_not_overflow() {
        let ll = LossSpec::logloss();
        assert!((ll.value(1.0, 800.0)).abs() < 1e-12);
        assert!((ll.value(0.0, 800.0) - 800.0).abs() < 1e-9);
        assert!((ll.value(1.0, -800.0) - 800.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn squared_pseudo_response_is_residual(y in -1e3f64..1e3, g in -1e3f64..1e3) {
            let (_, h, z) = LossSpec::squared().newton_point(y, g);
            prop_assert_eq!(h, 1.0);
            prop_assert_eq!(z, y - g);
        }

        #[test]
        fn pseudo_response_is_minus_g_over_h(y in 0u8..2, g in -30f64..30.0) {
            let (gr, h, z) = LossSpec::logloss().newton_point(f64::from(y), g);
            prop_assert!(h >= DEFAULT_HESSIAN_FLOOR);
            prop_assert_eq!(z, -gr / h);
        }

        #[test]
        fn mean_loss_permutation_invariant(
            pairs in prop::collection::vec((0u8..2, -5f64..5.0), 1..50),
            shift in 0usize..50,
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let g: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let k = shift % y.len();
            let mut y2 = y.clone();
            let mut g2 = g.clone();
            y2.rotate_left(k);
            g2.rotate_left(k);
            for spec in [LossSpec::squared(), LossSpec::logloss()] {
                let a = spec.mean_loss(&y, &g).unwrap();
                let b = spec.mean_loss(&y2, &g2).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
