//! Round-based fitting: main effects, interaction screening, interaction
//! boosting, repeated until neither stage adds a tree or the round budget is
//! spent.

use serde::{Deserialize, Serialize};

use crate::binning::{quantile_sorted, BinMap};
use crate::boost::{self, ScaledTree, StageConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::filter::{self, FilterOptions, PairScore};
use crate::loss::{sigmoid, LossKind, LossSpec};
use crate::modeltree::{FitContext, TreeParams};
use crate::purify::{self, EffectStore, TermImportance};
use crate::spline::{SplineBasis, DEFAULT_KNOTS};

pub const DEFAULT_ROUNDS: usize = 5;
pub const DEFAULT_PAIRS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamiConfig {
    pub rounds: usize,
    pub main: StageConfig,
    pub interaction: StageConfig,
    /// Pairs kept by screening each round (`q`).
    pub n_pairs: usize,
    pub loss: LossSpec,
    pub tree: TreeParams,
    pub n_knots: usize,
    pub filter_subsample: Option<usize>,
    pub seed: u64,
}

impl Default for GamiConfig {
    fn default() -> Self {
        Self {
            rounds: DEFAULT_ROUNDS,
            main: StageConfig::default(),
            interaction: StageConfig::default(),
            n_pairs: DEFAULT_PAIRS,
            loss: LossSpec::squared(),
            tree: TreeParams::default(),
            n_knots: DEFAULT_KNOTS,
            filter_subsample: Some(filter::DEFAULT_SUBSAMPLE_CAP),
            seed: 0,
        }
    }
}

impl GamiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("rounds must be at least 1"));
        }
        self.main.validate()?;
        self.interaction.validate()?;
        self.loss.validate()?;
        if self.n_knots < crate::spline::MIN_KNOTS {
            return Err(Error::config(format!("need at least 3 knots, got {}", self.n_knots)));
        }
        Ok(())
    }
}

/// Effect term a tree contributes to. Pairs are stored with `j < k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Main(usize),
    Pair(usize, usize),
}

impl Term {
    pub fn pair(a: usize, b: usize) -> Self {
        Term::Pair(a.min(b), a.max(b))
    }

    pub fn label(&self, names: &[String]) -> String {
        match *self {
            Term::Main(j) => names[j].clone(),
            Term::Pair(j, k) => format!("{}:{}", names[j], names[k]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Main,
    Interaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedTree {
    pub round: usize,
    pub stage: StageKind,
    pub term: Term,
    #[serde(flatten)]
    pub tree: ScaledTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub main_stop: usize,
    pub main_iterations: usize,
    pub int_stop: usize,
    pub int_iterations: usize,
    pub main_trace: Vec<f64>,
    pub int_trace: Vec<f64>,
    /// Screening ranking computed after this round's main stage.
    pub ranking: Vec<PairScore>,
    /// Oriented `(model_var, split_var)` set passed to the interaction stage.
    pub selected: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamiModel {
    pub loss: LossSpec,
    pub intercept: f64,
    pub feature_names: Vec<String>,
    pub bin_edges: Vec<Vec<f64>>,
    /// Per-feature spline bases used by interaction trees and purification.
    pub splines: Vec<Option<SplineBasis>>,
    pub train_summary: Vec<FeatureSummary>,
    pub trees: Vec<TaggedTree>,
    pub rounds: Vec<RoundSummary>,
    pub config: GamiConfig,
    pub effects: Option<EffectStore>,
}

/// Training-split range and slice quantiles of one feature, kept for plot
/// grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub min: f64,
    pub max: f64,
    /// Values at [`SLICE_QUANTILES`].
    pub quantiles: Vec<f64>,
}

pub const SLICE_QUANTILES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

impl FeatureSummary {
    fn from_values(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            quantiles: SLICE_QUANTILES.iter().map(|&p| quantile_sorted(&sorted, p)).collect(),
        }
    }
}

/// Fits a model on the train/validation splits of `data`.
pub fn fit(data: &Dataset, bins: &BinMap, config: &GamiConfig) -> Result<GamiModel> {
    config.validate()?;
    if config.loss.kind == LossKind::Logloss {
        data.check_binary()?;
    }
    let ctx = FitContext::new(data, bins, config.n_knots)?;
    if ctx.valid_rows().is_empty() {
        return Err(Error::data("validation split is empty"));
    }
    let loss = config.loss;
    let y_train: Vec<f64> = ctx.train_rows().iter().map(|&i| data.response()[i]).collect();
    let intercept = loss.initial_score(&y_train)?;
    let mut scores = vec![intercept; data.n_rows()];

    // constant training columns carry no signal and cannot be split
    let features: Vec<usize> = (0..data.n_features()).filter(|&j| bins.is_splittable(j)).collect();
    let n_candidate_pairs = features.len() * features.len().saturating_sub(1) / 2;
    let q = config.n_pairs;
    if q > n_candidate_pairs {
        return Err(Error::config(format!(
            "asked for {q} interaction pairs but only {n_candidate_pairs} exist"
        )));
    }

    let mut trees = Vec::new();
    let mut rounds = Vec::new();
    for round in 1..=config.rounds {
        let main = boost::fit_main(&ctx, data, &loss, &mut scores, &config.main, &features, &config.tree)?;
        let screening = if q > 0 {
            let options = FilterOptions {
                params: config.tree,
                subsample_cap: config.filter_subsample,
                seed: config.seed.wrapping_add(round as u64),
            };
            Some(filter::filter_int(&ctx, data, &loss, &scores, q, &features, &options)?)
        } else {
            None
        };
        let selected = screening.as_ref().map(|s| s.selected.clone()).unwrap_or_default();
        let inter = boost::fit_int(&ctx, data, &loss, &mut scores, &config.interaction, &selected, &config.tree)?;

        for t in main.trees.iter() {
            trees.push(TaggedTree {
                round,
                stage: StageKind::Main,
                term: Term::Main(t.tree.spec.model_var),
                tree: t.clone(),
            });
        }
        for t in inter.trees.iter() {
            trees.push(TaggedTree {
                round,
                stage: StageKind::Interaction,
                term: Term::pair(t.tree.spec.model_var, t.tree.spec.split_var),
                tree: t.clone(),
            });
        }
        let done = main.stop == 0 && inter.stop == 0;
        rounds.push(RoundSummary {
            round,
            main_stop: main.stop,
            main_iterations: main.iterations,
            int_stop: inter.stop,
            int_iterations: inter.iterations,
            main_trace: main.trace,
            int_trace: inter.trace,
            ranking: screening.map(|s| s.ranked).unwrap_or_default(),
            selected,
        });
        if done {
            break;
        }
    }

    Ok(GamiModel {
        loss,
        intercept,
        feature_names: data.feature_names().to_vec(),
        bin_edges: bins.all_edges().to_vec(),
        splines: ctx.splines().to_vec(),
        train_summary: (0..data.n_features())
            .map(|j| FeatureSummary::from_values(ctx.train_column(j)))
            .collect(),
        trees,
        rounds,
        config: config.clone(),
        effects: None,
    })
}

impl GamiModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_columns(&self, columns: &[Vec<f64>]) -> Result<usize> {
        if columns.len() != self.n_features() {
            return Err(Error::data(format!(
                "model expects {} feature columns, got {}",
                self.n_features(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::data("feature columns differ in length"));
        }
        Ok(n)
    }

    /// Raw scores: intercept plus every scaled tree, added in fit order.
    pub fn predict(&self, columns: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.check_columns(columns)?;
        let mut out = vec![self.intercept; n];
        for t in &self.trees {
            let xm = &columns[t.tree.tree.spec.model_var];
            let xs = &columns[t.tree.tree.spec.split_var];
            crate::exec::for_each_mut(&mut out, |i, g| *g += t.tree.contribution(xm[i], xs[i]));
        }
        Ok(out)
    }

    /// Probabilities under log-loss, raw scores otherwise.
    pub fn predict_response(&self, columns: &[Vec<f64>]) -> Result<Vec<f64>> {
        let scores = self.predict(columns)?;
        Ok(match self.loss.kind {
            LossKind::Logloss => scores.into_iter().map(sigmoid).collect(),
            LossKind::Squared => scores,
        })
    }

    /// Runs purification on `rows` and stores the result in the model.
    pub fn purify(&mut self, data: &Dataset, rows: &[usize]) -> Result<&EffectStore> {
        let store = purify::purify(self, data.columns(), rows)?;
        Ok(self.effects.insert(store))
    }

    /// Importance of every purified term over `rows`, largest first.
    pub fn term_importance(&self, columns: &[Vec<f64>], rows: &[usize]) -> Result<Vec<TermImportance>> {
        let store = self
            .effects
            .as_ref()
            .ok_or_else(|| Error::config("model has not been purified"))?;
        self.check_columns(columns)?;
        store.importance(&self.trees, columns, rows)
    }

    /// Distinct unordered pairs that received at least one tree.
    pub fn fitted_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .trees
            .iter()
            .filter_map(|t| match t.term {
                Term::Pair(j, k) => Some((j, k)),
                Term::Main(_) => None,
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// Union over rounds of the pairs passed to the interaction stage.
    pub fn selected_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self
            .rounds
            .iter()
            .flat_map(|r| r.selected.iter().map(|&(a, b)| (a.min(b), a.max(b))))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}
