//! Synthetic benchmark generator: four additive-plus-interaction models on
//! 30 equi-correlated Gaussian features, of which only the first 10 matter.
//!
//! Randomness comes from ChaCha8 seeded with `seed`, split into independent
//! streams: stream 0 draws the first feature block (x1..x20), stream 1 the
//! second block (x21..x30), stream 2 the additive noise and stream 3 the
//! Bernoulli draws. Within a stream values are drawn row by row; standard
//! normals use the ziggurat sampler from `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::loss::sigmoid;

pub const N_FEATURES: usize = 30;
pub const N_ACTIVE: usize = 10;
const FIRST_BLOCK: usize = 20;
pub const DEFAULT_NOISE_SD: f64 = 0.5;
pub const DEFAULT_BOUND: f64 = 2.5;
const INTERCEPT_TOL: f64 = 1e-4;

const STREAM_BLOCK1: u64 = 0;
const STREAM_BLOCK2: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_BERNOULLI: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model_id: u8,
    pub n: usize,
    pub rho: f64,
    pub response: ResponseKind,
    pub seed: u64,
    pub noise_sd: f64,
    pub bound: f64,
}

impl SimConfig {
    pub fn new(model_id: u8, n: usize, rho: f64, response: ResponseKind, seed: u64) -> Self {
        Self {
            model_id,
            n,
            rho,
            response,
            seed,
            noise_sd: DEFAULT_NOISE_SD,
            bound: DEFAULT_BOUND,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.model_id) {
            return Err(Error::config(format!("model must be 1..=4, got {}", self.model_id)));
        }
        if self.n == 0 {
            return Err(Error::config("sample size must be positive"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::config(format!("rho must be in [0, 1), got {}", self.rho)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::config("noise sd must be finite and non-negative"));
        }
        if !(self.bound > 0.0) {
            return Err(Error::config("truncation bound must be positive"));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Feature columns `x1..x30`, before or after truncation to `[−bound, bound]`.
    pub fn draw_features(&self, truncate: bool) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let mut columns: Vec<Vec<f64>> = (0..N_FEATURES).map(|_| Vec::with_capacity(self.n)).collect();
        let (a, b) = (self.rho.sqrt(), (1.0 - self.rho).sqrt());
        for (stream, range) in [(STREAM_BLOCK1, 0..FIRST_BLOCK), (STREAM_BLOCK2, FIRST_BLOCK..N_FEATURES)] {
            let mut rng = self.rng(stream);
            for _ in 0..self.n {
                let z0: f64 = rng.sample(StandardNormal);
                for j in range.clone() {
                    let zj: f64 = rng.sample(StandardNormal);
                    columns[j].push(a * z0 + b * zj);
                }
            }
        }
        if truncate {
            for col in &mut columns {
                col.iter_mut().for_each(|v| *v = v.clamp(-self.bound, self.bound));
            }
        }
        Ok(columns)
    }
}

/// Evaluable true model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthOracle {
    pub model_id: u8,
}

impl TruthOracle {
    pub fn new(model_id: u8) -> Result<Self> {
        if !(1..=4).contains(&model_id) {
            return Err(Error::config(format!("model must be 1..=4, got {model_id}")));
        }
        Ok(Self { model_id })
    }

    /// Zero-based indices of features entering `g`.
    pub fn main_features(&self) -> Vec<usize> {
        (0..N_ACTIVE).collect()
    }

    /// Zero-based true interaction pairs `(j, k)`, `j < k`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let one_based: Vec<(usize, usize)> = match self.model_id {
            1 => (1..=N_ACTIVE)
                .flat_map(|j| (j + 1..=N_ACTIVE).map(move |k| (j, k)))
                .collect(),
            2 => vec![(1, 2), (1, 3), (4, 5), (4, 6), (5, 6), (7, 8), (7, 9), (8, 9)],
            3 => vec![(1, 2), (3, 4), (5, 6), (7, 8)],
            _ => vec![(1, 2), (1, 3), (2, 3), (4, 5), (4, 6), (5, 6)],
        };
        one_based.into_iter().map(|(j, k)| (j - 1, k - 1)).collect()
    }

    /// True regression function at one row; `x` holds at least `x1..x10`.
    pub fn g(&self, x: &[f64]) -> f64 {
        let x1 = |j: usize| x[j - 1];
        let base = (1..=5).map(x1).sum::<f64>()
            + (6..=8).map(|j| 0.5 * x1(j) * x1(j)).sum::<f64>()
            + (9..=10).map(|j| hinge(x1(j))).sum::<f64>();
        let (v1, v2, v3, v4, v5, v6, v7, v8, v9) = (x1(1), x1(2), x1(3), x1(4), x1(5), x1(6), x1(7), x1(8), x1(9));
        let inter = match self.model_id {
            1 => {
                let mut s = 0.0;
                for j in 1..=N_ACTIVE {
                    for k in j + 1..=N_ACTIVE {
                        s += 0.2 * x1(j) * x1(k);
                    }
                }
                s
            }
            2 => {
                0.25 * v1 * v2
                    + 0.25 * v1 * v3 * v3
                    + 0.25 * v4 * v4 * v5 * v5
                    + (v4 * v6 / 3.0).exp()
                    + v5 * v6 * step(v5) * step(v6)
                    + clip_unchecked(v7 + v8, -1.0, 0.0)
                    + clip_unchecked(v7 * v9, -1.0, 1.0)
                    + step(v8) * step(v9)
            }
            3 => {
                use std::f64::consts::PI;
                0.25 * v1 * v1 * v2 * v2
                    + 2.0 * hinge(v3 - 0.5) * hinge(v4 - 0.5)
                    + 0.5 * (PI * v5).sin() * (PI * v6).sin()
                    + 0.5 * (PI * (v7 + v8)).sin()
            }
            _ => {
                v1 * v2 + v1 * v3 + v2 * v3 + 0.5 * v1 * v2 * v3 + v4 * v5 + v4 * v6 + v5 * v6
                    + 0.5 * step(v4) * v5 * v6
            }
        };
        base + inter
    }

    /// `g` at every row of column-major `columns`.
    pub fn g_columns(&self, columns: &[Vec<f64>]) -> Vec<f64> {
        let n = columns.first().map_or(0, Vec::len);
        let mut row = [0.0; N_ACTIVE];
        (0..n)
            .map(|i| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = columns[j][i];
                }
                self.g(&row)
            })
            .collect()
    }
}

/// `min(max(x, a), b)`.
pub fn clip(x: f64, a: f64, b: f64) -> Result<f64> {
    if a > b {
        return Err(Error::config(format!("clip bounds out of order: {a} > {b}")));
    }
    Ok(clip_unchecked(x, a, b))
}

#[inline]
fn clip_unchecked(x: f64, a: f64, b: f64) -> f64 {
    x.max(a).min(b)
}

#[inline]
fn step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Positive part `(x)_+`, exactly zero for `x ≤ 0`.
#[inline]
fn hinge(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: Dataset,
    pub truth: TruthOracle,
    /// `g(x)` at every row.
    pub signal: Vec<f64>,
    /// Calibrated intercept for binary responses.
    pub intercept: Option<f64>,
}

pub fn feature_names() -> Vec<String> {
    (1..=N_FEATURES).map(|j| format!("x{j}")).collect()
}

pub fn generate(config: &SimConfig) -> Result<Simulation> {
    let truth = TruthOracle::new(config.model_id)?;
    let columns = config.draw_features(true)?;
    let signal = truth.g_columns(&columns);
    let (response, intercept) = match config.response {
        ResponseKind::Continuous => {
            let mut rng = config.rng(STREAM_NOISE);
            let y = signal
                .iter()
                .map(|g| {
                    let e: f64 = rng.sample(StandardNormal);
                    g + config.noise_sd * e
                })
                .collect();
            (y, None)
        }
        ResponseKind::Binary => {
            let b0 = balance_intercept(&signal);
            let mut rng = config.rng(STREAM_BERNOULLI);
            let y = signal
                .iter()
                .map(|g| {
                    let u: f64 = rng.random();
                    if u < sigmoid(b0 + g) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            (y, Some(b0))
        }
    };
    let data = Dataset::new(feature_names(), columns, response)?;
    Ok(Simulation {
        data,
        truth,
        signal,
        intercept,
    })
}

/// Bisection for `b` with `mean(sigmoid(b + g)) = 0.5`.
fn balance_intercept(signal: &[f64]) -> f64 {
    let mean_p = |b: f64| signal.iter().map(|g| sigmoid(b + g)).sum::<f64>() / signal.len() as f64;
    let (gmin, gmax) = signal
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)));
    // mean_p is increasing in b; at b = -gmax every probability is ≤ 0.5
    let (mut lo, mut hi) = (-gmax, -gmin);
    while hi - lo > INTERCEPT_TOL {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input() {
        for m in [1, 3, 4] {
            assert_eq!(TruthOracle::new(m).unwrap().g(&[0.0; 30]), 0.0);
        }
        // exp(x4·x6/3) is 1 at the origin
        assert_eq!(TruthOracle::new(2).unwrap().g(&[0.0; 30]), 1.0);
    }

    #[test]
    fn model_one_at_ones() {
        let mut x = [0.0; 30];
        x[..10].fill(1.0);
        assert!((TruthOracle::new(1).unwrap().g(&x) - 17.5).abs() < 1e-12);
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip(0.5, -1.0, 0.0).unwrap(), 0.0);
        assert_eq!(clip(-2.0, -1.0, 1.0).unwrap(), -1.0);
        assert_eq!(clip(0.3, -1.0, 1.0).unwrap(), 0.3);
        assert!(clip(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn hinge_is_flat_below_knot() {
        let t = TruthOracle::new(3).unwrap();
        let mut x = [0.0; 10];
        for v in [-1.0, 0.0, 0.25, 0.5] {
            x[2] = v;
            x[3] = 2.0;
            // (x3 − 0.5)_+ vanishes, leaving only the additive parts
            let additive = v + 2.0;
            assert_eq!(t.g(&x), additive);
        }
    }

    #[test]
    fn pair_counts() {
        let counts: Vec<usize> = (1..=4).map(|m| TruthOracle::new(m).unwrap().pairs().len()).collect();
        assert_eq!(counts, vec![45, 8, 4, 6]);
        for m in 1..=4 {
            assert!(TruthOracle::new(m).unwrap().pairs().iter().all(|&(j, k)| j < k && k < 10));
        }
    }

    #[test]
    fn reproducible_and_bounded() {
        let c = SimConfig::new(2, 500, 0.5, ResponseKind::Continuous, 11);
        let a = generate(&c).unwrap();
        let b = generate(&c).unwrap();
        assert_eq!(a.data.columns(), b.data.columns());
        assert_eq!(a.data.response(), b.data.response());
        assert_eq!(a.data.n_features(), 30);
        assert!(a.data.columns().iter().flatten().all(|v| v.abs() <= 2.5));
        let other = generate(&SimConfig { seed: 12, ..c }).unwrap();
        assert_ne!(a.data.response(), other.data.response());
    }

    #[test]
    fn invalid_configs() {
        let ok = SimConfig::new(1, 10, 0.0, ResponseKind::Continuous, 0);
        for bad in [
            SimConfig { model_id: 5, ..ok },
            SimConfig { n: 0, ..ok },
            SimConfig { rho: 1.0, ..ok },
            SimConfig { rho: -0.1, ..ok },
            SimConfig { bound: 0.0, ..ok },
        ] {
            assert!(generate(&bad).is_err());
        }
    }

    #[test]
    fn binary_intercept_balances_probabilities() {
        let signal: Vec<f64> = (0..1000).map(|i| (i as f64 / 100.0).powi(2)).collect();
        let b = balance_intercept(&signal);
        let p = signal.iter().map(|g| sigmoid(b + g)).sum::<f64>() / 1000.0;
        assert!((p - 0.5).abs() < 1e-4);
    }
}
