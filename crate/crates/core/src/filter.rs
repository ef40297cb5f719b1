//! Pairwise interaction screening against the current pseudo-response.
//!
//! [`filter_int`] scores a pair by the better of its two oriented
//! interaction trees. [`fast_filter`] is the four-quadrant baseline: the best
//! weighted SSE of four quadrant constants over a grid of cut points.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binning::quantile_sorted;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::loss::{LossSpec, NewtonState};
use crate::modeltree::{self, FitContext, RowSet, TreeParams};

pub const DEFAULT_FAST_GRID: usize = 16;
pub const DEFAULT_SUBSAMPLE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    /// Feature indices with `j < k`.
    pub pair: (usize, usize),
    /// SSE of the tree modeling `j` and splitting on `k`.
    pub sse_jk: f64,
    /// SSE of the tree modeling `k` and splitting on `j`.
    pub sse_kj: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    /// All scored pairs, best (smallest score) first.
    pub ranked: Vec<PairScore>,
    /// Both orientations of the top `q` pairs, as `(model_var, split_var)`.
    pub selected: Vec<(usize, usize)>,
}

impl FilterResult {
    fn from_scores(mut ranked: Vec<PairScore>, q: usize) -> Self {
        ranked.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.pair.cmp(&b.pair)));
        let mut selected = Vec::with_capacity(2 * q);
        for p in ranked.iter().take(q) {
            selected.push((p.pair.0, p.pair.1));
            selected.push((p.pair.1, p.pair.0));
        }
        Self { ranked, selected }
    }

    /// Unordered pairs of the top `n` entries.
    pub fn top_pairs(&self, n: usize) -> Vec<(usize, usize)> {
        self.ranked.iter().take(n).map(|p| p.pair).collect()
    }

    /// 1-based rank of an unordered pair, if it was scored.
    pub fn rank_of(&self, a: usize, b: usize) -> Option<usize> {
        let pair = (a.min(b), a.max(b));
        self.ranked.iter().position(|p| p.pair == pair).map(|r| r + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterOptions {
    pub params: TreeParams,
    /// Score on a random subset of at most this many training rows.
    pub subsample_cap: Option<usize>,
    pub seed: u64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            params: TreeParams::default(),
            subsample_cap: Some(DEFAULT_SUBSAMPLE_CAP),
            seed: 0,
        }
    }
}

fn all_pairs(features: &[usize]) -> Vec<(usize, usize)> {
    let mut f = features.to_vec();
    f.sort_unstable();
    f.dedup();
    let mut pairs = Vec::new();
    for (a, &j) in f.iter().enumerate() {
        for &k in &f[a + 1..] {
            pairs.push((j, k));
        }
    }
    pairs
}

fn newton_on_train(ctx: &FitContext, data: &Dataset, loss: &LossSpec, scores: &[f64]) -> Result<NewtonState> {
    if scores.len() != data.n_rows() {
        return Err(Error::data("score vector does not match dataset"));
    }
    let y: Vec<f64> = ctx.train_rows().iter().map(|&i| data.response()[i]).collect();
    let g: Vec<f64> = ctx.train_rows().iter().map(|&i| scores[i]).collect();
    loss.derivatives(&y, &g)
}

fn check_q(q: usize, n_pairs: usize) -> Result<()> {
    if q > n_pairs {
        return Err(Error::config(format!(
            "asked for {q} interaction pairs but only {n_pairs} exist"
        )));
    }
    Ok(())
}

fn subsample(n_train: usize, cap: Option<usize>, seed: u64) -> Option<Vec<u32>> {
    let cap = cap?;
    if n_train <= cap {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<u32> = index::sample(&mut rng, n_train, cap)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    rows.sort_unstable();
    Some(rows)
}

/// Tree-based screening: for every pair among `features`, fit both oriented
/// interaction trees to the pseudo-response and rank pairs by the smaller
/// SSE. Returns both orientations of the top `q` pairs.
pub fn filter_int(
    ctx: &FitContext,
    data: &Dataset,
    loss: &LossSpec,
    scores: &[f64],
    q: usize,
    features: &[usize],
    options: &FilterOptions,
) -> Result<FilterResult> {
    let pairs = all_pairs(features);
    check_q(q, pairs.len())?;
    let state = newton_on_train(ctx, data, loss, scores)?;
    let sub = subsample(ctx.n_train(), options.subsample_cap, options.seed);
    let rows = match &sub {
        Some(r) => RowSet::Subset(r),
        None => RowSet::All,
    };
    let z = &state.pseudo_response;
    let h = &state.hessian;
    let oriented_sse = |m: usize, s: usize| -> Result<f64> {
        let spec = ctx.interaction_spec(m, s, &options.params);
        let gram = modeltree::accumulate_gram_rows(ctx, &spec, z, h, rows);
        Ok(modeltree::fit_tree(&gram, &spec)?.sse)
    };
    let scored: Vec<Result<PairScore>> = exec::map_slice(&pairs, |&(j, k)| {
        let sse_jk = oriented_sse(j, k)?;
        let sse_kj = oriented_sse(k, j)?;
        Ok(PairScore {
            pair: (j, k),
            sse_jk,
            sse_kj,
            score: sse_jk.min(sse_kj),
        })
    });
    let ranked = scored.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(FilterResult::from_scores(ranked, q))
}

/// Quantile cut grid over training rows: up to `grid_size` distinct cuts at
/// levels `k / (grid_size + 1)`.
pub fn fast_cuts(values: &[f64], grid_size: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..=grid_size)
        .map(|k| quantile_sorted(&sorted, k as f64 / (grid_size + 1) as f64))
        .collect();
    cuts.dedup();
    if cuts.first() == sorted.first() {
        cuts.remove(0);
    }
    cuts
}

/// Cell index of `x` in a cut grid: the number of cuts `<= x`.
#[inline]
fn cell_of(cuts: &[f64], x: f64) -> usize {
    cuts.partition_point(|&c| c <= x)
}

/// Best four-quadrant weighted SSE for one pair, via 2-D cumulative sums over
/// the cell grid. `cells_j`/`cells_k` hold each row's cell index (in
/// `0..=ncuts`), `h`/`z` the Newton weights and pseudo-response.
pub fn quadrant_score(
    cells_j: &[u8],
    n_cuts_j: usize,
    cells_k: &[u8],
    n_cuts_k: usize,
    h: &[f64],
    z: &[f64],
) -> f64 {
    let (rj, rk) = (n_cuts_j + 1, n_cuts_k + 1);
    // cumulative tables with a zero border: (rj+1) × (rk+1)
    let w = rk + 1;
    let mut sw = vec![0.0; (rj + 1) * w];
    let mut s1 = vec![0.0; (rj + 1) * w];
    let mut s2 = vec![0.0; (rj + 1) * w];
    for r in 0..h.len() {
        let at = (cells_j[r] as usize + 1) * w + cells_k[r] as usize + 1;
        let hz = h[r] * z[r];
        sw[at] += h[r];
        s1[at] += hz;
        s2[at] += hz * z[r];
    }
    for t in [&mut sw, &mut s1, &mut s2] {
        for a in 1..=rj {
            for b in 1..=rk {
                t[a * w + b] += t[(a - 1) * w + b] + t[a * w + b - 1] - t[(a - 1) * w + b - 1];
            }
        }
    }
    // sum over cells [a0, a1) × [b0, b1)
    let rect = |t: &[f64], a0: usize, a1: usize, b0: usize, b1: usize| {
        t[a1 * w + b1] - t[a0 * w + b1] - t[a1 * w + b0] + t[a0 * w + b0]
    };
    let region_sse = |a0, a1, b0, b1| {
        let wt = rect(&sw, a0, a1, b0, b1);
        let m1 = rect(&s1, a0, a1, b0, b1);
        let m2 = rect(&s2, a0, a1, b0, b1);
        if wt > 0.0 {
            m2 - m1 * m1 / wt
        } else {
            m2
        }
    };
    if n_cuts_j == 0 || n_cuts_k == 0 {
        return region_sse(0, rj, 0, rk);
    }
    let mut best = f64::INFINITY;
    for a in 1..=n_cuts_j {
        for b in 1..=n_cuts_k {
            let sse = region_sse(0, a, 0, b) + region_sse(0, a, b, rk) + region_sse(a, rj, 0, b) + region_sse(a, rj, b, rk);
            best = best.min(sse);
        }
    }
    best
}

/// Four-quadrant screening on the same pseudo-response as [`filter_int`].
pub fn fast_filter(
    ctx: &FitContext,
    data: &Dataset,
    loss: &LossSpec,
    scores: &[f64],
    q: usize,
    grid_size: usize,
    features: &[usize],
) -> Result<FilterResult> {
    if grid_size == 0 || grid_size > 254 {
        return Err(Error::config(format!("grid size must be in 1..=254, got {grid_size}")));
    }
    let pairs = all_pairs(features);
    check_q(q, pairs.len())?;
    let state = newton_on_train(ctx, data, loss, scores)?;
    let p = ctx.n_features();
    let cuts: Vec<Vec<f64>> = (0..p).map(|j| fast_cuts(ctx.train_column(j), grid_size)).collect();
    let cells: Vec<Vec<u8>> = (0..p)
        .map(|j| ctx.train_column(j).iter().map(|&x| cell_of(&cuts[j], x) as u8).collect())
        .collect();
    let ranked = exec::map_slice(&pairs, |&(j, k)| {
        let score = quadrant_score(
            &cells[j],
            cuts[j].len(),
            &cells[k],
            cuts[k].len(),
            &state.hessian,
            &state.pseudo_response,
        );
        PairScore {
            pair: (j, k),
            sse_jk: score,
            sse_kj: score,
            score,
        }
    });
    Ok(FilterResult::from_scores(ranked, q))
}
