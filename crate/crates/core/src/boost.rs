//! One boosting stage: at every iteration, fit a candidate tree for each
//! entry of the candidate set to the current Newton pseudo-response, keep only
//! the one with the smallest weighted SSE, and track validation loss for
//! early stopping with rollback.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::loss::LossSpec;
use crate::modeltree::{self, DesignGram, FitContext, FittedTree, RowSet, TreeSpec};

pub const DEFAULT_LEARNING_RATE: f64 = 0.2;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;
pub const DEFAULT_PATIENCE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub patience: usize,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            patience: DEFAULT_PATIENCE,
        }
    }
}

impl StageConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config(format!(
                "learning rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::config("patience must be at least 1"));
        }
        Ok(())
    }
}

/// A tree together with the learning rate it was added with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledTree {
    pub scale: f64,
    pub tree: FittedTree,
}

impl ScaledTree {
    #[inline]
    pub fn contribution(&self, x_model: f64, x_split: f64) -> f64 {
        self.scale * self.tree.predict_one(x_model, x_split)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    /// Retained trees, in the order they were added.
    pub trees: Vec<ScaledTree>,
    /// Number of retained trees (0 when rollback discarded everything).
    pub stop: usize,
    /// Validation loss before the stage (`trace[0]`) and after each iteration.
    pub trace: Vec<f64>,
    /// Iterations actually run, including those rolled back.
    pub iterations: usize,
    /// Winning SSE at each iteration run.
    pub selected_sse: Vec<f64>,
}

/// Early-stopping rule on a validation trace `L_0..L_m`: stop once
/// `L_{m−d} < min(L_{m−d+1..=m})`, keeping the first `m − d` iterations.
pub fn rollback_point(trace: &[f64], patience: usize) -> Option<usize> {
    let m = trace.len().checked_sub(1)?;
    if m < patience {
        return None;
    }
    let anchor = trace[m - patience];
    let later = trace[m - patience + 1..=m].iter().copied().fold(f64::INFINITY, f64::min);
    (anchor < later).then_some(m - patience)
}

/// Runs one stage over `candidates`, extending `scores` (one entry per
/// dataset row) in place. On return `scores` reflects exactly the retained
/// trees.
pub fn fit_stage(
    ctx: &FitContext,
    data: &Dataset,
    loss: &LossSpec,
    scores: &mut [f64],
    config: &StageConfig,
    candidates: &[TreeSpec],
) -> Result<StageResult> {
    config.validate()?;
    loss.validate()?;
    if ctx.valid_rows().is_empty() {
        return Err(Error::data("validation split is empty; early stopping needs it"));
    }
    if scores.len() != data.n_rows() {
        return Err(Error::data("score vector does not match dataset"));
    }
    let y = data.response();
    let y_valid: Vec<f64> = ctx.valid_rows().iter().map(|&i| y[i]).collect();
    let valid_loss = |scores: &[f64]| -> Result<f64> {
        let g: Vec<f64> = ctx.valid_rows().iter().map(|&i| scores[i]).collect();
        loss.mean_loss(&y_valid, &g)
    };

    let mut trace = vec![valid_loss(scores)?];
    if candidates.is_empty() {
        return Ok(StageResult {
            trees: Vec::new(),
            stop: 0,
            trace,
            iterations: 0,
            selected_sse: Vec::new(),
        });
    }

    let mut specs = candidates.to_vec();
    specs.sort_by_key(|s| (s.model_var, s.split_var));
    for s in &specs {
        s.validate()?;
    }

    let y_train: Vec<f64> = ctx.train_rows().iter().map(|&i| y[i]).collect();
    let unit = vec![1.0; ctx.n_train()];
    // Under unit hessians the design cross-products never change.
    let cached: Option<Vec<Arc<DesignGram>>> = loss
        .unit_hessian()
        .then(|| exec::map_slice(&specs, |s| modeltree::accumulate_design(ctx, s, &unit, RowSet::All)));

    let columns = data.columns();
    let mut trees: Vec<ScaledTree> = Vec::new();
    let mut selected_sse = Vec::new();
    let mut history: VecDeque<Vec<f64>> = VecDeque::with_capacity(config.patience + 1);
    history.push_back(scores.to_vec());

    let mut iterations = 0;
    let mut retained = None;
    for m in 1..=config.max_iterations {
        let g_train: Vec<f64> = ctx.train_rows().iter().map(|&i| scores[i]).collect();
        let state = loss.derivatives(&y_train, &g_train)?;
        let z = &state.pseudo_response;
        let h = &state.hessian;

        let fits: Vec<Result<FittedTree>> = exec::map_range(specs.len(), |k| {
            let gram = match &cached {
                Some(designs) => {
                    modeltree::accumulate_with_design(ctx, &specs[k], designs[k].clone(), z, h, RowSet::All)
                }
                None => modeltree::accumulate_gram(ctx, &specs[k], z, h),
            };
            modeltree::fit_tree(&gram, &specs[k])
        });
        let mut best: Option<FittedTree> = None;
        for fit in fits {
            let tree = fit?;
            if best.as_ref().is_none_or(|b| tree.sse < b.sse) {
                best = Some(tree);
            }
        }
        let best = best.expect("candidate set is non-empty");
        selected_sse.push(best.sse);

        let step = ScaledTree {
            scale: config.learning_rate,
            tree: best,
        };
        let xm = &columns[step.tree.spec.model_var];
        let xs = &columns[step.tree.spec.split_var];
        exec::for_each_mut(scores, |i, g| *g += step.contribution(xm[i], xs[i]));
        trees.push(step);
        iterations = m;

        trace.push(valid_loss(scores)?);
        if history.len() == config.patience + 1 {
            history.pop_front();
        }
        history.push_back(scores.to_vec());

        if let Some(keep) = rollback_point(&trace, config.patience) {
            retained = Some(keep);
            break;
        }
    }

    if let Some(keep) = retained {
        let snapshot = history.front().expect("history holds patience + 1 snapshots");
        scores.copy_from_slice(snapshot);
        trees.truncate(keep);
    }

    Ok(StageResult {
        stop: trees.len(),
        trees,
        trace,
        iterations,
        selected_sse,
    })
}

/// Main-effect stage: one raw-linear tree per feature, split on itself.
pub fn fit_main(
    ctx: &FitContext,
    data: &Dataset,
    loss: &LossSpec,
    scores: &mut [f64],
    config: &StageConfig,
    features: &[usize],
    params: &crate::modeltree::TreeParams,
) -> Result<StageResult> {
    let specs: Vec<TreeSpec> = features.iter().map(|&j| ctx.main_spec(j, params)).collect();
    fit_stage(ctx, data, loss, scores, config, &specs)
}

/// Interaction stage over oriented `(model_var, split_var)` pairs.
pub fn fit_int(
    ctx: &FitContext,
    data: &Dataset,
    loss: &LossSpec,
    scores: &mut [f64],
    config: &StageConfig,
    oriented: &[(usize, usize)],
    params: &crate::modeltree::TreeParams,
) -> Result<StageResult> {
    if let Some(&(j, k)) = oriented.iter().find(|(j, k)| j == k) {
        return Err(Error::config(format!("interaction pair ({j}, {k}) repeats a feature")));
    }
    let specs: Vec<TreeSpec> = oriented
        .iter()
        .map(|&(m, s)| ctx.interaction_spec(m, s, params))
        .collect();
    fit_stage(ctx, data, loss, scores, config, &specs)
}
