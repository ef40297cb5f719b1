//! End-to-end simulation runs: generate, split 50/25/25, fit, purify on the
//! training split and score the test split.

use serde::{Deserialize, Serialize};

use crate::binning::{BinMap, DEFAULT_MAX_BINS};
use crate::dataset::SplitTag;
use crate::error::Result;
use crate::gami::{self, GamiConfig, GamiModel};
use crate::loss::{LossKind, LossSpec};
use crate::metrics;
use crate::simgen::{self, ResponseKind, SimConfig, Simulation};

pub const SPLIT: (f64, f64, f64) = (0.5, 0.25, 0.25);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model_id: u8,
    pub n: usize,
    pub rho: f64,
    pub response: ResponseKind,
    /// Seeds both the generator and the split.
    pub seed: u64,
}

impl Scenario {
    pub fn new(model_id: u8, n: usize, rho: f64, response: ResponseKind, seed: u64) -> Self {
        Self {
            model_id,
            n,
            rho,
            response,
            seed,
        }
    }

    /// Fit configuration: defaults, with 45 screened pairs for model 1 and 10
    /// otherwise.
    pub fn fit_config(&self) -> GamiConfig {
        GamiConfig {
            n_pairs: if self.model_id == 1 { 45 } else { 10 },
            loss: match self.response {
                ResponseKind::Continuous => LossSpec::squared(),
                ResponseKind::Binary => LossSpec::logloss(),
            },
            seed: self.seed,
            ..GamiConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub mse: f64,
    /// Binary responses only.
    pub auc: Option<f64>,
    pub logloss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub sim: Simulation,
    pub bins: BinMap,
    pub model: GamiModel,
    pub metrics: TestMetrics,
}

pub fn simulate(s: &Scenario) -> Result<(Simulation, BinMap)> {
    let mut sim = simgen::generate(&SimConfig::new(s.model_id, s.n, s.rho, s.response, s.seed))?;
    sim.data = sim.data.split(SPLIT, s.seed)?;
    let bins = BinMap::build(&sim.data, DEFAULT_MAX_BINS)?;
    Ok((sim, bins))
}

pub fn run(s: &Scenario) -> Result<ScenarioRun> {
    run_with(s, &s.fit_config())
}

pub fn run_with(s: &Scenario, config: &GamiConfig) -> Result<ScenarioRun> {
    let (sim, bins) = simulate(s)?;
    let mut model = gami::fit(&sim.data, &bins, config)?;
    let train = sim.data.rows(SplitTag::Train);
    model.purify(&sim.data, &train)?;
    let metrics = evaluate(&model, &sim)?;
    Ok(ScenarioRun {
        scenario: *s,
        sim,
        bins,
        model,
        metrics,
    })
}

/// Metrics on the test split. MSE is `(y − ĝ)²` on the raw score for squared
/// loss and `(y − p̂)²` for log-loss.
pub fn evaluate(model: &GamiModel, sim: &Simulation) -> Result<TestMetrics> {
    let test = sim.data.rows(SplitTag::Test);
    let columns: Vec<Vec<f64>> = sim
        .data
        .columns()
        .iter()
        .map(|c| test.iter().map(|&i| c[i]).collect())
        .collect();
    let y: Vec<f64> = test.iter().map(|&i| sim.data.response()[i]).collect();
    let g = model.predict(&columns)?;
    Ok(match model.loss.kind {
        LossKind::Squared => TestMetrics {
            mse: metrics::mse(&y, &g)?,
            auc: None,
            logloss: None,
        },
        LossKind::Logloss => {
            let p: Vec<f64> = g.iter().map(|&v| crate::loss::sigmoid(v)).collect();
            TestMetrics {
                mse: metrics::mse(&y, &p)?,
                auc: Some(metrics::auc(&y, &g)?),
                logloss: Some(metrics::logloss(&y, &g)?),
            }
        }
    })
}
