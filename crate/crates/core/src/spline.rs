//! Degree-1 (hat function) B-spline basis on quantile knots.

use serde::{Deserialize, Serialize};

use crate::binning::quantile_sorted;
use crate::error::{Error, Result};

pub const DEFAULT_KNOTS: usize = 5;
pub const MIN_KNOTS: usize = 3;

/// Linear B-spline basis with one hat function per knot, boundary knots
/// included. Inputs outside `[first knot, last knot]` are clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    knots: Vec<f64>,
}

impl SplineBasis {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < MIN_KNOTS {
            return Err(Error::config(format!(
                "spline needs at least {MIN_KNOTS} knots, got {}",
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::config("spline knots must be finite and strictly increasing"));
        }
        Ok(Self { knots })
    }

    /// Knots at the training quantiles `0, 1/(K−1), …, 1`. Coinciding
    /// quantiles are merged; fewer than three surviving knots is an error,
    /// which callers treat as "use a plain linear design instead".
    pub fn fit_knots(values: &[f64], n_knots: usize) -> Result<Self> {
        if n_knots < MIN_KNOTS {
            return Err(Error::config(format!(
                "spline needs at least {MIN_KNOTS} knots, got {n_knots}"
            )));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.is_empty() {
            return Err(Error::data("no values to place knots on"));
        }
        let mut knots: Vec<f64> = (0..n_knots)
            .map(|i| quantile_sorted(&sorted, i as f64 / (n_knots - 1) as f64))
            .collect();
        knots.dedup();
        if knots.len() < MIN_KNOTS {
            return Err(Error::data(format!(
                "only {} distinct knot positions; spline basis unavailable",
                knots.len()
            )));
        }
        Self::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions (equal to the number of knots).
    pub fn dim(&self) -> usize {
        self.knots.len()
    }

    /// Sparse evaluation: basis `idx` has weight `w` and basis `idx + 1` has
    /// weight `1 − w`. Every other basis value is zero.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let k = &self.knots;
        let last = k.len() - 1;
        if !(x > k[0]) {
            return (0, 1.0);
        }
        if x >= k[last] {
            return (last - 1, 0.0);
        }
        // first knot strictly greater than x, in 1..=last
        let hi = k.partition_point(|&t| t <= x);
        let lo = hi - 1;
        let w = (k[hi] - x) / (k[hi] - k[lo]);
        (lo, w)
    }

    /// Dense basis row.
    pub fn evaluate(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.evaluate_into(x, &mut out);
        out
    }

    pub fn evaluate_into(&self, x: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (i, w) = self.locate(x);
        out[i] = w;
        out[i + 1] = 1.0 - w;
    }

    /// `Σ_k coef[k]·b_k(x)`.
    #[inline]
    pub fn combine(&self, coef: &[f64], x: f64) -> f64 {
        let (i, w) = self.locate(x);
        w * coef[i] + (1.0 - w) * coef[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn basis5() -> SplineBasis {
        SplineBasis::new(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap()
    }

    #[test]
    fn uniform_sample_knots() {
        let values: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let b = SplineBasis::fit_knots(&values, 5).unwrap();
        for (k, want) in b.knots().iter().zip([0.0, 0.25, 0.5, 0.75, 1.0]) {
            assert!((k - want).abs() < 1e-12);
        }
    }

    #[test]
    fn two_distinct_values_is_an_error() {
        let mut values = vec![0.0; 99];
        values.push(1.0);
        assert!(SplineBasis::fit_knots(&values, 5).is_err());
    }

    #[test]
    fn symmetric_sample_middle_knot_is_median() {
        let values: Vec<f64> = (-500..=500).map(|i| i as f64 / 500.0).collect();
        let b = SplineBasis::fit_knots(&values, 3).unwrap();
        assert_eq!(b.knots().len(), 3);
        assert!(b.knots()[1].abs() < 1e-12);
    }

    #[test]
    fn interpolates_at_knots() {
        let b = basis5();
        for (i, &k) in b.knots().iter().enumerate() {
            let row = b.evaluate(k);
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn midpoint_splits_evenly() {
        let row = basis5().evaluate(0.375);
        assert!((row[1] - 0.5).abs() < 1e-15);
        assert!((row[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clamps_outside_range() {
        let b = basis5();
        assert_eq!(b.evaluate(-3.0), b.evaluate(0.0));
        assert_eq!(b.evaluate(7.0), b.evaluate(1.0));
    }

    #[test]
    fn reproduces_linear_functions() {
        // a + b·x has coefficients a + b·knot_k on the hat basis
        let b = basis5();
        let coef: Vec<f64> = b.knots().iter().map(|k| 1.5 - 2.0 * k).collect();
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            assert!((b.combine(&coef, x) - (1.5 - 2.0 * x)).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_local_support(x in -3.0f64..3.0) {
            let b = basis5();
            let row = b.evaluate(x);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().filter(|v| **v != 0.0).count() <= 2);
            prop_assert!(row.iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn linear_between_knots(seg in 0usize..4, t in 0.0f64..1.0) {
            let b = basis5();
            let lo = b.knots()[seg];
            let hi = b.knots()[seg + 1];
            let x = lo + t * (hi - lo);
            let (ra, rb, rx) = (b.evaluate(lo), b.evaluate(hi), b.evaluate(x));
            for k in 0..b.dim() {
                let want = (1.0 - t) * ra[k] + t * rb[k];
                prop_assert!((rx[k] - want).abs() < 1e-12);
            }
        }
    }
}
