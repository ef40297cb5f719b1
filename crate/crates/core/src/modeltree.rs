//! Model-based trees: axis-aligned splits on one feature, ridge-penalized
//! linear or hat-spline leaf models in another.
//!
//! Fitting never touches rows after the sufficient statistics are built. For
//! every bin of the splitting feature we accumulate
//!
//! ```text
//! A_b = Σ_{i∈b} H_i d_i d_iᵀ,   c_b = Σ_{i∈b} H_i z_i d_i,   s_b = Σ_{i∈b} H_i z_i²
//! ```
//!
//! where `d_i` is the design row of the modeling feature. A node covering a
//! contiguous bin range sums its bins; each candidate split reads prefix and
//! suffix sums. Both design kinds have at most two nonzeros per design row
//! (`[1, x]`, or two adjacent hat functions), which keeps accumulation cheap.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::binning::BinMap;
use crate::dataset::{Dataset, SplitTag};
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg;
use crate::spline::{SplineBasis, DEFAULT_KNOTS};

pub const DEFAULT_MAX_DEPTH: usize = 2;
pub const DEFAULT_RIDGE: f64 = 1.0;

/// Leaf-model basis in the modeling feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// `[1, x]`; the intercept is not penalized.
    RawLinear,
    /// Hat functions on the given knots; all coefficients are penalized.
    Spline { basis: SplineBasis },
}

impl Design {
    pub fn dim(&self) -> usize {
        match self {
            Design::RawLinear => 2,
            Design::Spline { basis } => basis.dim(),
        }
    }

    /// Sparse design row: `(idx, w0, w1)` puts `w0` at `idx` and `w1` at `idx + 1`.
    #[inline]
    fn code(&self, x: f64) -> (usize, f64, f64) {
        match self {
            Design::RawLinear => (0, 1.0, x),
            Design::Spline { basis } => {
                let (i, w) = basis.locate(x);
                (i, w, 1.0 - w)
            }
        }
    }

    #[inline]
    pub fn evaluate(&self, coef: &[f64], x: f64) -> f64 {
        match self {
            Design::RawLinear => coef[0] + coef[1] * x,
            Design::Spline { basis } => basis.combine(coef, x),
        }
    }

    /// Dense design row.
    pub fn row(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let (i, w0, w1) = self.code(x);
        out[i] = w0;
        out[i + 1] = w1;
        out
    }
}

/// User-facing tree hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// `None` selects `max(20, ⌈0.5% of training rows⌉)`.
    pub min_leaf: Option<usize>,
    pub ridge: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
            min_leaf: None,
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl TreeParams {
    pub fn resolved_min_leaf(&self, n_train: usize) -> usize {
        self.min_leaf
            .unwrap_or_else(|| 20.max((n_train as f64 * 0.005).ceil() as usize))
            .max(1)
    }
}

/// Everything needed to fit one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub model_var: usize,
    pub split_var: usize,
    pub design: Design,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub ridge: f64,
}

impl TreeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::config(format!("ridge must be nonnegative, got {}", self.ridge)));
        }
        if matches!(self.design, Design::Spline { .. }) && self.ridge == 0.0 {
            return Err(Error::config(
                "spline leaf models need a positive ridge (the hat basis is collinear in narrow nodes)",
            ));
        }
        if self.min_leaf == 0 {
            return Err(Error::config("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

/// Training-split view of a dataset prepared for repeated tree fitting:
/// per-feature bin indices, spline encodings and penalty scales, laid out
/// contiguously over training rows.
#[derive(Debug, Clone)]
pub struct FitContext {
    n_features: usize,
    train: Vec<usize>,
    valid: Vec<usize>,
    edges: Vec<Vec<f64>>,
    splines: Vec<Option<SplineBasis>>,
    x_train: Vec<Vec<f64>>,
    bin_train: Vec<Vec<u16>>,
    spline_idx: Vec<Vec<u8>>,
    spline_w: Vec<Vec<f64>>,
    linear_penalty: Vec<[f64; 2]>,
    spline_penalty: Vec<Vec<f64>>,
}

impl FitContext {
    /// Prepares `data` (already split) and its bin map. Spline knots are fit
    /// per feature on the training rows; features with too few distinct
    /// values get no spline and fall back to the raw linear design.
    pub fn new(data: &Dataset, bins: &BinMap, n_knots: usize) -> Result<Self> {
        let train = data.rows(SplitTag::Train);
        let valid = data.rows(SplitTag::Validation);
        if train.is_empty() {
            return Err(Error::data("training split is empty"));
        }
        if bins.n_features() != data.n_features() {
            return Err(Error::data("bin map does not match dataset"));
        }
        let p = data.n_features();
        let n_knots = if n_knots == 0 { DEFAULT_KNOTS } else { n_knots };

        let x_train: Vec<Vec<f64>> = (0..p)
            .map(|j| train.iter().map(|&i| data.column(j)[i]).collect())
            .collect();
        let bin_train: Vec<Vec<u16>> = (0..p)
            .map(|j| train.iter().map(|&i| bins.indices(j)[i]).collect())
            .collect();
        let splines: Vec<Option<SplineBasis>> = x_train
            .iter()
            .map(|xs| SplineBasis::fit_knots(xs, n_knots).ok())
            .collect();

        let mut spline_idx = Vec::with_capacity(p);
        let mut spline_w = Vec::with_capacity(p);
        let mut spline_penalty = Vec::with_capacity(p);
        let mut linear_penalty = Vec::with_capacity(p);
        for j in 0..p {
            let xs = &x_train[j];
            linear_penalty.push([0.0, nonzero_or_one(variance(xs.iter().copied()))]);
            match &splines[j] {
                Some(basis) => {
                    let mut idx = Vec::with_capacity(xs.len());
                    let mut w = Vec::with_capacity(xs.len());
                    for &x in xs {
                        let (i, wi) = basis.locate(x);
                        idx.push(i as u8);
                        w.push(wi);
                    }
                    let pen = (0..basis.dim())
                        .map(|k| {
                            let col = idx.iter().zip(&w).map(|(&i, &wi)| {
                                let i = i as usize;
                                if i == k {
                                    wi
                                } else if i + 1 == k {
                                    1.0 - wi
                                } else {
                                    0.0
                                }
                            });
                            nonzero_or_one(variance(col))
                        })
                        .collect();
                    spline_idx.push(idx);
                    spline_w.push(w);
                    spline_penalty.push(pen);
                }
                None => {
                    spline_idx.push(Vec::new());
                    spline_w.push(Vec::new());
                    spline_penalty.push(Vec::new());
                }
            }
        }

        Ok(Self {
            n_features: p,
            train,
            valid,
            edges: bins.all_edges().to_vec(),
            splines,
            x_train,
            bin_train,
            spline_idx,
            spline_w,
            linear_penalty,
            spline_penalty,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    /// Dataset row indices of the training split.
    pub fn train_rows(&self) -> &[usize] {
        &self.train
    }

    pub fn valid_rows(&self) -> &[usize] {
        &self.valid
    }

    pub fn edges(&self, feature: usize) -> &[f64] {
        &self.edges[feature]
    }

    pub fn all_edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    pub fn spline(&self, feature: usize) -> Option<&SplineBasis> {
        self.splines[feature].as_ref()
    }

    pub fn splines(&self) -> &[Option<SplineBasis>] {
        &self.splines
    }

    /// Training values of one feature, in training-row order.
    pub fn train_column(&self, feature: usize) -> &[f64] {
        &self.x_train[feature]
    }

    /// Spec for a main-effect tree on `feature`.
    pub fn main_spec(&self, feature: usize, params: &TreeParams) -> TreeSpec {
        TreeSpec {
            model_var: feature,
            split_var: feature,
            design: Design::RawLinear,
            max_depth: params.max_depth,
            min_leaf: params.resolved_min_leaf(self.n_train()),
            ridge: params.ridge,
        }
    }

    /// Spec for an interaction tree modeling `model_var` with a spline and
    /// splitting on `split_var`.
    pub fn interaction_spec(&self, model_var: usize, split_var: usize, params: &TreeParams) -> TreeSpec {
        let design = match &self.splines[model_var] {
            Some(basis) => Design::Spline {
                basis: basis.clone(),
            },
            None => Design::RawLinear,
        };
        TreeSpec {
            model_var,
            split_var,
            design,
            max_depth: params.max_depth,
            min_leaf: params.resolved_min_leaf(self.n_train()),
            ridge: params.ridge,
        }
    }

    fn penalty(&self, spec: &TreeSpec) -> Vec<f64> {
        match spec.design {
            Design::RawLinear => self.linear_penalty[spec.model_var].to_vec(),
            Design::Spline { .. } => self.spline_penalty[spec.model_var].clone(),
        }
    }

    /// Whether the cached spline encoding of `model_var` matches `design`.
    fn cached_spline(&self, spec: &TreeSpec) -> bool {
        match (&spec.design, &self.splines[spec.model_var]) {
            (Design::Spline { basis }, Some(own)) => basis == own,
            _ => false,
        }
    }
}

fn variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = xs.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n < 2 {
        return 0.0;
    }
    let mean = sum / n as f64;
    xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64
}

fn nonzero_or_one(v: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        v
    } else {
        1.0
    }
}

/// Weight-dependent design cross-products per bin plus row counts. Depends on
/// the hessians but not on the pseudo-response, so it can be reused while the
/// weights stay fixed (always, under squared loss).
#[derive(Debug, Clone)]
pub struct DesignGram {
    dim: usize,
    n_bins: usize,
    a: Vec<f64>,
    count: Vec<u64>,
}

/// Pseudo-response moments per bin.
#[derive(Debug, Clone)]
pub struct MomentGram {
    c: Vec<f64>,
    szz: Vec<f64>,
}

/// Per-bin sufficient statistics for one tree spec.
#[derive(Debug, Clone)]
pub struct BinnedGram {
    design: Arc<DesignGram>,
    moments: MomentGram,
    penalty: Vec<f64>,
    edges: Vec<f64>,
}

impl BinnedGram {
    pub fn dim(&self) -> usize {
        self.design.dim
    }

    pub fn n_bins(&self) -> usize {
        self.design.n_bins
    }

    /// `A_b` as a row-major `dim × dim` slice.
    pub fn a(&self, bin: usize) -> &[f64] {
        let dd = self.dim() * self.dim();
        &self.design.a[bin * dd..(bin + 1) * dd]
    }

    pub fn c(&self, bin: usize) -> &[f64] {
        let d = self.dim();
        &self.moments.c[bin * d..(bin + 1) * d]
    }

    pub fn szz(&self, bin: usize) -> f64 {
        self.moments.szz[bin]
    }

    pub fn count(&self, bin: usize) -> u64 {
        self.design.count[bin]
    }

    pub fn penalty(&self) -> &[f64] {
        &self.penalty
    }

    pub fn design_gram(&self) -> &Arc<DesignGram> {
        &self.design
    }

    /// Sum of all bins' `A_b`.
    pub fn total_a(&self) -> Vec<f64> {
        let dd = self.dim() * self.dim();
        let mut out = vec![0.0; dd];
        for b in 0..self.n_bins() {
            for (o, v) in out.iter_mut().zip(self.a(b)) {
                *o += v;
            }
        }
        out
    }
}

/// Training rows to accumulate over: all of them, or a subset given as
/// positions in training order.
#[derive(Debug, Clone, Copy)]
pub enum RowSet<'a> {
    All,
    Subset(&'a [u32]),
}

impl RowSet<'_> {
    fn len(&self, n_train: usize) -> usize {
        match self {
            RowSet::All => n_train,
            RowSet::Subset(r) => r.len(),
        }
    }

    #[inline]
    fn at(&self, k: usize) -> usize {
        match self {
            RowSet::All => k,
            RowSet::Subset(r) => r[k] as usize,
        }
    }
}

/// Per-bin sufficient statistics for `spec` over the training rows.
/// `z` and `h` are indexed by training position.
pub fn accumulate_gram(ctx: &FitContext, spec: &TreeSpec, z: &[f64], h: &[f64]) -> BinnedGram {
    accumulate_gram_rows(ctx, spec, z, h, RowSet::All)
}

pub fn accumulate_gram_rows(
    ctx: &FitContext,
    spec: &TreeSpec,
    z: &[f64],
    h: &[f64],
    rows: RowSet<'_>,
) -> BinnedGram {
    let (design, moments) = accumulate(ctx, spec, Some(h), z, rows, true);
    BinnedGram {
        design: Arc::new(design.expect("requested")),
        moments,
        penalty: ctx.penalty(spec),
        edges: ctx.edges[spec.split_var].clone(),
    }
}

/// Weight-only part of the statistics, for reuse across iterations.
pub fn accumulate_design(ctx: &FitContext, spec: &TreeSpec, h: &[f64], rows: RowSet<'_>) -> Arc<DesignGram> {
    let (design, _) = accumulate(ctx, spec, Some(h), &[], rows, true);
    Arc::new(design.expect("requested"))
}

/// Combines a cached design gram with fresh moments of `z`.
pub fn accumulate_with_design(
    ctx: &FitContext,
    spec: &TreeSpec,
    design: Arc<DesignGram>,
    z: &[f64],
    h: &[f64],
    rows: RowSet<'_>,
) -> BinnedGram {
    let (_, moments) = accumulate(ctx, spec, Some(h), z, rows, false);
    BinnedGram {
        design,
        moments,
        penalty: ctx.penalty(spec),
        edges: ctx.edges[spec.split_var].clone(),
    }
}

struct Partial {
    a: Vec<f64>,
    count: Vec<u64>,
    c: Vec<f64>,
    szz: Vec<f64>,
}

fn accumulate(
    ctx: &FitContext,
    spec: &TreeSpec,
    h: Option<&[f64]>,
    z: &[f64],
    rows: RowSet<'_>,
    want_design: bool,
) -> (Option<DesignGram>, MomentGram) {
    let dim = spec.design.dim();
    let n_bins = ctx.edges[spec.split_var].len() + 1;
    let bins = &ctx.bin_train[spec.split_var];
    let want_moments = !z.is_empty();
    let n = rows.len(ctx.n_train());

    let init = || Partial {
        a: if want_design { vec![0.0; n_bins * dim * dim] } else { Vec::new() },
        count: if want_design { vec![0; n_bins] } else { Vec::new() },
        c: if want_moments { vec![0.0; n_bins * dim] } else { Vec::new() },
        szz: if want_moments { vec![0.0; n_bins] } else { Vec::new() },
    };

    let merge = |acc: &mut Partial, other: Partial| {
        add_into(&mut acc.a, &other.a);
        acc.count.iter_mut().zip(&other.count).for_each(|(a, b)| *a += b);
        add_into(&mut acc.c, &other.c);
        add_into(&mut acc.szz, &other.szz);
    };

    // Monomorphize the hot loop per design encoding.
    let part = if ctx.cached_spline(spec) {
        let idx = &ctx.spline_idx[spec.model_var];
        let w = &ctx.spline_w[spec.model_var];
        exec::fold_blocks(
            n,
            init,
            |acc, range| {
                fold_rows(acc, range, rows, bins, h, z, dim, want_design, want_moments, |r| {
                    let wi = w[r];
                    (idx[r] as usize, wi, 1.0 - wi)
                })
            },
            merge,
        )
    } else {
        let xs = &ctx.x_train[spec.model_var];
        let design = &spec.design;
        exec::fold_blocks(
            n,
            init,
            |acc, range| {
                fold_rows(acc, range, rows, bins, h, z, dim, want_design, want_moments, |r| {
                    design.code(xs[r])
                })
            },
            merge,
        )
    };

    let design = want_design.then(|| {
        let mut a = part.a;
        let dd = dim * dim;
        for b in 0..n_bins {
            let m = &mut a[b * dd..(b + 1) * dd];
            for i in 0..dim {
                for j in 0..i {
                    m[i * dim + j] = m[j * dim + i];
                }
            }
        }
        DesignGram {
            dim,
            n_bins,
            a,
            count: part.count,
        }
    });
    (
        design,
        MomentGram {
            c: part.c,
            szz: part.szz,
        },
    )
}

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn fold_rows<F: Fn(usize) -> (usize, f64, f64)>(
    acc: &mut Partial,
    range: std::ops::Range<usize>,
    rows: RowSet<'_>,
    bins: &[u16],
    h: Option<&[f64]>,
    z: &[f64],
    dim: usize,
    want_design: bool,
    want_moments: bool,
    code: F,
) {
    let dd = dim * dim;
    for k in range {
        let r = rows.at(k);
        let b = bins[r] as usize;
        let (i, w0, w1) = code(r);
        let hr = h.map_or(1.0, |h| h[r]);
        if want_design {
            // upper triangle only; mirrored once at the end
            let m = &mut acc.a[b * dd..(b + 1) * dd];
            let hw0 = hr * w0;
            let hw1 = hr * w1;
            m[i * dim + i] += hw0 * w0;
            m[i * dim + i + 1] += hw0 * w1;
            m[(i + 1) * dim + i + 1] += hw1 * w1;
            acc.count[b] += 1;
        }
        if want_moments {
            let hz = hr * z[r];
            let c = &mut acc.c[b * dim..(b + 1) * dim];
            c[i] += hz * w0;
            c[i + 1] += hz * w1;
            acc.szz[b] += hz * z[r];
        }
    }
}

fn add_into(acc: &mut [f64], other: &[f64]) {
    acc.iter_mut().zip(other).for_each(|(a, b)| *a += b);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x_split >= threshold` go right.
    Split {
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { coef: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTree {
    pub spec: TreeSpec,
    /// `nodes[0]` is the root.
    pub nodes: Vec<Node>,
    /// Weighted training SSE, computed from sufficient statistics.
    pub sse: f64,
}

impl FittedTree {
    #[inline]
    pub fn predict_one(&self, x_model: f64, x_split: f64) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    threshold,
                    left,
                    right,
                } => at = if x_split >= *threshold { *right } else { *left },
                Node::Leaf { coef } => return self.spec.design.evaluate(coef, x_model),
            }
        }
    }

    /// Predictions for the given rows of column-major `columns`.
    pub fn predict_rows(&self, columns: &[Vec<f64>], rows: &[usize]) -> Vec<f64> {
        let xm = &columns[self.spec.model_var];
        let xs = &columns[self.spec.split_var];
        rows.iter().map(|&i| self.predict_one(xm[i], xs[i])).collect()
    }

    /// Predictions for every row of `columns`.
    pub fn predict_all(&self, columns: &[Vec<f64>]) -> Vec<f64> {
        let xm = &columns[self.spec.model_var];
        let xs = &columns[self.spec.split_var];
        xm.iter().zip(xs).map(|(&a, &b)| self.predict_one(a, b)).collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Split thresholds in node order.
    pub fn thresholds(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { threshold, .. } => Some(*threshold),
                Node::Leaf { .. } => None,
            })
            .collect()
    }
}

/// Summed statistics of a bin range.
#[derive(Debug, Clone)]
struct NodeStats {
    a: Vec<f64>,
    c: Vec<f64>,
    szz: f64,
    count: u64,
}

impl NodeStats {
    fn zeros(dim: usize) -> Self {
        Self {
            a: vec![0.0; dim * dim],
            c: vec![0.0; dim],
            szz: 0.0,
            count: 0,
        }
    }

    fn add_bin(&mut self, g: &BinnedGram, b: usize) {
        add_into(&mut self.a, g.a(b));
        add_into(&mut self.c, g.c(b));
        self.szz += g.szz(b);
        self.count += g.count(b);
    }
}

/// Ridge solve and SSE for one node: `(A + ridge·P) β = c`,
/// `SSE = s − 2βᵀc + βᵀAβ`.
fn solve_node(stats: &NodeStats, penalty: &[f64], ridge: f64, scratch: &mut [f64]) -> Option<(Vec<f64>, f64)> {
    let dim = stats.c.len();
    let m = &mut scratch[..dim * dim];
    m.copy_from_slice(&stats.a);
    for k in 0..dim {
        m[k * dim + k] += ridge * penalty[k];
    }
    let beta = linalg::solve_spd(m, &stats.c, dim)?;
    let sse = stats.szz - 2.0 * linalg::dot(&beta, &stats.c) + linalg::quad_form(&stats.a, &beta, dim);
    Some((beta, sse))
}

struct Candidate {
    bin: usize,
    sse: f64,
}

/// Greedy depth-limited tree from binned statistics.
pub fn fit_tree(gram: &BinnedGram, spec: &TreeSpec) -> Result<FittedTree> {
    spec.validate()?;
    if gram.dim() != spec.design.dim() {
        return Err(Error::config("gram dimension does not match tree design"));
    }
    let mut nodes = Vec::new();
    let mut root = NodeStats::zeros(gram.dim());
    for b in 0..gram.n_bins() {
        root.add_bin(gram, b);
    }
    if root.count == 0 {
        return Err(Error::data("no training rows for tree"));
    }
    let mut scratch = vec![0.0; gram.dim() * gram.dim()];
    let (beta, sse) = solve_node(&root, gram.penalty(), spec.ridge, &mut scratch).ok_or_else(|| {
        Error::Singular(format!(
            "root model for feature {} (split on {}) with ridge {}",
            spec.model_var, spec.split_var, spec.ridge
        ))
    })?;
    let sse = grow(gram, spec, 0, gram.n_bins(), 0, root, beta, sse, &mut nodes);
    Ok(FittedTree {
        spec: spec.clone(),
        nodes,
        sse,
    })
}

/// Appends the subtree for bins `[lo, hi)` and returns its total SSE.
#[allow(clippy::too_many_arguments)]
fn grow(
    gram: &BinnedGram,
    spec: &TreeSpec,
    lo: usize,
    hi: usize,
    depth: usize,
    stats: NodeStats,
    beta: Vec<f64>,
    sse: f64,
    nodes: &mut Vec<Node>,
) -> f64 {
    let at = nodes.len();
    nodes.push(Node::Leaf { coef: beta });
    if depth >= spec.max_depth || hi - lo < 2 || stats.count < 2 * spec.min_leaf as u64 {
        return sse;
    }
    let Some(best) = best_split(gram, spec, lo, hi, &stats) else {
        return sse;
    };
    if !(best.sse < sse) {
        return sse;
    }

    let mut left = NodeStats::zeros(gram.dim());
    (lo..best.bin).for_each(|b| left.add_bin(gram, b));
    let mut right = NodeStats::zeros(gram.dim());
    (best.bin..hi).for_each(|b| right.add_bin(gram, b));
    let mut scratch = vec![0.0; gram.dim() * gram.dim()];
    let (Some((bl, sl)), Some((br, sr))) = (
        solve_node(&left, gram.penalty(), spec.ridge, &mut scratch),
        solve_node(&right, gram.penalty(), spec.ridge, &mut scratch),
    ) else {
        return sse;
    };

    let threshold = gram.edges[best.bin - 1];
    let li = nodes.len();
    let left_sse = grow(gram, spec, lo, best.bin, depth + 1, left, bl, sl, nodes);
    let ri = nodes.len();
    let right_sse = grow(gram, spec, best.bin, hi, depth + 1, right, br, sr, nodes);
    nodes[at] = Node::Split {
        threshold,
        left: li,
        right: ri,
    };
    left_sse + right_sse
}

/// Best boundary `t` in `(lo, hi)` (left = bins `[lo, t)`), by summed child
/// SSE; ties go to the smaller boundary.
fn best_split(gram: &BinnedGram, spec: &TreeSpec, lo: usize, hi: usize, total: &NodeStats) -> Option<Candidate> {
    let dim = gram.dim();
    let width = hi - lo;
    // prefix[k] = bins [lo, lo+k); suffix[k] = bins [lo+k, hi)
    let mut prefix = Vec::with_capacity(width + 1);
    let mut acc = NodeStats::zeros(dim);
    prefix.push(acc.clone());
    for b in lo..hi {
        acc.add_bin(gram, b);
        prefix.push(acc.clone());
    }
    let mut suffix = vec![NodeStats::zeros(dim); width + 1];
    for k in (0..width).rev() {
        let mut s = suffix[k + 1].clone();
        s.add_bin(gram, lo + k);
        suffix[k] = s;
    }
    debug_assert_eq!(prefix[width].count, total.count);

    let min_leaf = spec.min_leaf as u64;
    let candidates: Vec<usize> = (1..width)
        .filter(|&k| {
            // an empty bin just left of the boundary repeats the previous partition
            gram.count(lo + k - 1) > 0 && prefix[k].count >= min_leaf && suffix[k].count >= min_leaf
        })
        .collect();

    let scores = exec::map_slice(&candidates, |&k| {
        let mut scratch = vec![0.0; dim * dim];
        let l = solve_node(&prefix[k], gram.penalty(), spec.ridge, &mut scratch)?;
        let r = solve_node(&suffix[k], gram.penalty(), spec.ridge, &mut scratch)?;
        Some(l.1 + r.1)
    });

    let mut best: Option<Candidate> = None;
    for (&k, score) in candidates.iter().zip(scores) {
        let Some(sse) = score else { continue };
        if best.as_ref().is_none_or(|b| sse < b.sse) {
            best = Some(Candidate { bin: lo + k, sse });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn context(columns: Vec<Vec<f64>>, max_bins: usize) -> (Dataset, FitContext) {
        let n = columns[0].len();
        let names = (0..columns.len()).map(|j| format!("x{j}")).collect();
        let data = Dataset::new(names, columns, vec![0.0; n]).unwrap();
        let bins = BinMap::build(&data, max_bins).unwrap();
        let ctx = FitContext::new(&data, &bins, 5).unwrap();
        (data, ctx)
    }

    #[test]
    fn single_bin_gram_is_plain_cross_product() {
        let x = vec![1.0, 2.0, 4.0];
        let z = vec![0.5, -1.0, 2.0];
        let (_, ctx) = context(vec![x.clone(), vec![0.0; 3]], 256);
        let spec = TreeSpec {
            model_var: 0,
            split_var: 1,
            design: Design::RawLinear,
            max_depth: 0,
            min_leaf: 1,
            ridge: 0.0,
        };
        let g = accumulate_gram(&ctx, &spec, &z, &[1.0; 3]);
        assert_eq!(g.n_bins(), 1);
        let sx: f64 = x.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        assert_eq!(g.a(0), [3.0, sx, sx, sxx]);
        let sxz: f64 = x.iter().zip(&z).map(|(a, b)| a * b).sum();
        assert_eq!(g.c(0), [z.iter().sum::<f64>(), sxz]);
    }

    #[test]
    fn bins_sum_to_full_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..60).map(|_| rng.random_range(0.1..1.0)).collect();
        let (_, ctx) = context(vec![x, s], 2);
        let spec = ctx.interaction_spec(0, 1, &TreeParams::default());
        let binned = accumulate_gram(&ctx, &spec, &z, &h);
        assert_eq!(binned.n_bins(), 2);
        let (_, ctx1) = context(vec![ctx.train_column(0).to_vec(), vec![0.0; 60]], 2);
        let spec1 = TreeSpec { split_var: 1, ..spec.clone() };
        let whole = accumulate_gram(&ctx1, &spec1, &z, &h);
        for (a, b) in binned.total_a().iter().zip(whole.a(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn depth_zero_is_least_squares_line() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let z: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v + (v * 7.0).sin() * 0.1).collect();
        let (_, ctx) = context(vec![x.clone()], 256);
        let spec = TreeSpec {
            max_depth: 0,
            ridge: 0.0,
            ..ctx.main_spec(0, &TreeParams::default())
        };
        let tree = fit_tree(&accumulate_gram(&ctx, &spec, &z, &[1.0; 50]), &spec).unwrap();
        let Node::Leaf { coef } = &tree.nodes[0] else { panic!() };
        // closed-form simple regression
        let mx = x.iter().sum::<f64>() / 50.0;
        let mz = z.iter().sum::<f64>() / 50.0;
        let sxy: f64 = x.iter().zip(&z).map(|(a, b)| (a - mx) * (b - mz)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        assert!((coef[1] - slope).abs() < 1e-10);
        assert!((coef[0] - (mz - slope * mx)).abs() < 1e-10);
    }

    #[test]
    fn predict_depth_zero_and_tie_rule() {
        let spec = TreeSpec {
            model_var: 0,
            split_var: 1,
            design: Design::RawLinear,
            max_depth: 1,
            min_leaf: 1,
            ridge: 1.0,
        };
        let flat = FittedTree {
            spec: spec.clone(),
            nodes: vec![Node::Leaf { coef: vec![1.0, 2.0] }],
            sse: 0.0,
        };
        assert_eq!(flat.predict_one(3.0, 99.0), 7.0);
        let split = FittedTree {
            spec,
            nodes: vec![
                Node::Split { threshold: 0.5, left: 1, right: 2 },
                Node::Leaf { coef: vec![-1.0, 0.0] },
                Node::Leaf { coef: vec![1.0, 0.0] },
            ],
            sse: 0.0,
        };
        assert_eq!(split.predict_one(0.0, 0.5), 1.0);
        assert_eq!(split.predict_one(0.0, 0.4999), -1.0);
    }

    #[test]
    fn spline_requires_positive_ridge() {
        let (_, ctx) = context(vec![(0..100).map(f64::from).collect(), (0..100).map(f64::from).collect()], 16);
        let spec = TreeSpec {
            ridge: 0.0,
            ..ctx.interaction_spec(0, 1, &TreeParams::default())
        };
        let g = accumulate_gram(&ctx, &spec, &[0.0; 100], &[1.0; 100]);
        assert!(fit_tree(&g, &spec).is_err());
    }

    #[test]
    fn collinear_root_without_ridge_is_singular() {
        let (_, ctx) = context(vec![vec![2.0; 40]], 16);
        let spec = TreeSpec {
            ridge: 0.0,
            ..ctx.main_spec(0, &TreeParams::default())
        };
        let g = accumulate_gram(&ctx, &spec, &[1.0; 40], &[1.0; 40]);
        assert!(matches!(fit_tree(&g, &spec), Err(Error::Singular(_))));
    }

    #[test]
    fn absolute_value_splits_near_zero() {
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect();
        let z: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let (_, ctx) = context(vec![x], 256);
        let spec = TreeSpec {
            max_depth: 1,
            ..ctx.main_spec(0, &TreeParams::default())
        };
        let tree = fit_tree(&accumulate_gram(&ctx, &spec, &z, &vec![1.0; n]), &spec).unwrap();
        let Node::Split { threshold, left, right } = tree.nodes[0] else { panic!("no split") };
        assert!(threshold.abs() < 0.02, "threshold {threshold}");
        let slope = |i: usize| match &tree.nodes[i] {
            Node::Leaf { coef } => coef[1],
            _ => panic!(),
        };
        assert!((slope(left) + 1.0).abs() < 0.05);
        assert!((slope(right) - 1.0).abs() < 0.05);
    }

    #[test]
    fn interaction_sign_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4000;
        let xj: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xk: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = xj.iter().zip(&xk).map(|(a, b)| a * b.signum()).collect();
        let (_, ctx) = context(vec![xj, xk], 64);
        let spec = TreeSpec {
            max_depth: 1,
            ..ctx.interaction_spec(0, 1, &TreeParams::default())
        };
        let tree = fit_tree(&accumulate_gram(&ctx, &spec, &z, &vec![1.0; n]), &spec).unwrap();
        let Node::Split { threshold, left, right } = tree.nodes[0] else { panic!("no split") };
        assert!(threshold.abs() < 0.1);
        // slope of the leaf spline across the knot range
        let slope = |i: usize| match &tree.nodes[i] {
            Node::Leaf { coef } => coef[coef.len() - 1] - coef[0],
            _ => panic!(),
        };
        assert!(slope(left) < 0.0);
        assert!(slope(right) > 0.0);
    }
}
