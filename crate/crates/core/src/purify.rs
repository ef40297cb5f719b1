//! Post-fit purification into hierarchically orthogonal effects.
//!
//! For each interaction surface `g_jk` we least-squares fit an additive
//! `h_j(x_j) + h_k(x_k)` (constant included) on the per-feature bases over the
//! reference rows, move `h_j` and `h_k` into the main effects, and keep the
//! residual `g_jk − h_j − h_k` as the interaction. The normal equations of
//! that fit make the residual orthogonal, under the empirical distribution of
//! the reference rows, to every function in the span of both bases. Main
//! effects are finally centered into the intercept.
//!
//! Effects are stored as tree references plus basis corrections, so they
//! evaluate exactly; predictions are unchanged up to rounding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::gami::{GamiModel, TaggedTree, Term};
use crate::linalg;
use crate::spline::SplineBasis;

/// Basis used for corrections on one feature: the feature's hat splines, or
/// `[1, x]` when the feature has too few distinct values for a spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureBasis {
    Spline { basis: SplineBasis },
    Linear,
}

impl FeatureBasis {
    pub fn dim(&self) -> usize {
        match self {
            FeatureBasis::Spline { basis } => basis.dim(),
            FeatureBasis::Linear => 2,
        }
    }

    pub fn evaluate_into(&self, x: f64, out: &mut [f64]) {
        match self {
            FeatureBasis::Spline { basis } => basis.evaluate_into(x, out),
            FeatureBasis::Linear => {
                out[0] = 1.0;
                out[1] = x;
            }
        }
    }

    #[inline]
    pub fn combine(&self, coef: &[f64], x: f64) -> f64 {
        match self {
            FeatureBasis::Spline { basis } => basis.combine(coef, x),
            FeatureBasis::Linear => coef[0] + coef[1] * x,
        }
    }

    /// Adds a constant to the function represented by `coef`.
    fn add_constant(&self, coef: &mut [f64], c: f64) {
        match self {
            // hat functions sum to one
            FeatureBasis::Spline { .. } => coef.iter_mut().for_each(|v| *v += c),
            FeatureBasis::Linear => coef[0] += c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainEffect {
    pub feature: usize,
    /// Indices into the model's tree list.
    pub trees: Vec<usize>,
    /// Coefficients over the feature basis absorbed from interactions.
    pub correction: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEffect {
    /// `(j, k)` with `j < k`.
    pub pair: (usize, usize),
    pub trees: Vec<usize>,
    /// Subtracted additive parts, over the bases of `j` and `k`.
    pub h_j: Vec<f64>,
    pub h_k: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermImportance {
    pub term: Term,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectStore {
    pub intercept: f64,
    pub bases: Vec<FeatureBasis>,
    pub mains: Vec<MainEffect>,
    pub interactions: Vec<InteractionEffect>,
    /// Importance over the rows purification ran on, largest first.
    pub importance: Vec<TermImportance>,
}

impl EffectStore {
    /// Groups the model's trees by term with no corrections applied.
    pub fn unpurified(model: &GamiModel) -> Self {
        let bases: Vec<FeatureBasis> = model
            .splines
            .iter()
            .map(|s| match s {
                Some(basis) => FeatureBasis::Spline { basis: basis.clone() },
                None => FeatureBasis::Linear,
            })
            .collect();
        let mut mains: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut pairs: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (id, t) in model.trees.iter().enumerate() {
            match t.term {
                Term::Main(j) => mains.entry(j).or_default().push(id),
                Term::Pair(j, k) => pairs.entry((j, k)).or_default().push(id),
            }
        }
        let mut store = EffectStore {
            intercept: model.intercept,
            mains: Vec::new(),
            interactions: pairs
                .into_iter()
                .map(|(pair, trees)| InteractionEffect {
                    pair,
                    trees,
                    h_j: vec![0.0; bases[pair.0].dim()],
                    h_k: vec![0.0; bases[pair.1].dim()],
                })
                .collect(),
            bases,
            importance: Vec::new(),
        };
        for (feature, trees) in mains {
            let dim = store.bases[feature].dim();
            store.mains.push(MainEffect {
                feature,
                trees,
                correction: vec![0.0; dim],
                offset: 0.0,
            });
        }
        store
    }

    fn main_index(&mut self, feature: usize) -> usize {
        match self.mains.binary_search_by_key(&feature, |m| m.feature) {
            Ok(i) => i,
            Err(i) => {
                let dim = self.bases[feature].dim();
                self.mains.insert(
                    i,
                    MainEffect {
                        feature,
                        trees: Vec::new(),
                        correction: vec![0.0; dim],
                        offset: 0.0,
                    },
                );
                i
            }
        }
    }

    pub fn main_value(&self, effect: &MainEffect, trees: &[TaggedTree], x: f64) -> f64 {
        let raw: f64 = effect.trees.iter().map(|&id| trees[id].tree.contribution(x, x)).sum();
        raw + self.bases[effect.feature].combine(&effect.correction, x) + effect.offset
    }

    /// Sum of the pair's trees, before corrections.
    pub fn raw_interaction_value(effect: &InteractionEffect, trees: &[TaggedTree], xj: f64, xk: f64) -> f64 {
        effect
            .trees
            .iter()
            .map(|&id| {
                let t = &trees[id].tree;
                if t.tree.spec.model_var == effect.pair.0 {
                    t.contribution(xj, xk)
                } else {
                    t.contribution(xk, xj)
                }
            })
            .sum()
    }

    pub fn interaction_value(&self, effect: &InteractionEffect, trees: &[TaggedTree], xj: f64, xk: f64) -> f64 {
        let (j, k) = effect.pair;
        Self::raw_interaction_value(effect, trees, xj, xk)
            - self.bases[j].combine(&effect.h_j, xj)
            - self.bases[k].combine(&effect.h_k, xk)
    }

    /// Contribution of one term at the given rows.
    pub fn term_values(&self, term: Term, trees: &[TaggedTree], columns: &[Vec<f64>], rows: &[usize]) -> Option<Vec<f64>> {
        match term {
            Term::Main(j) => {
                let e = self.mains.iter().find(|m| m.feature == j)?;
                Some(rows.iter().map(|&i| self.main_value(e, trees, columns[j][i])).collect())
            }
            Term::Pair(j, k) => {
                let e = self.interactions.iter().find(|m| m.pair == (j, k))?;
                Some(
                    rows.iter()
                        .map(|&i| self.interaction_value(e, trees, columns[j][i], columns[k][i]))
                        .collect(),
                )
            }
        }
    }

    pub fn terms(&self) -> Vec<Term> {
        self.mains
            .iter()
            .map(|m| Term::Main(m.feature))
            .chain(self.interactions.iter().map(|e| Term::Pair(e.pair.0, e.pair.1)))
            .collect()
    }

    /// `intercept + Σ main effects + Σ interactions` for every row of `columns`.
    pub fn predict(&self, trees: &[TaggedTree], columns: &[Vec<f64>]) -> Vec<f64> {
        let n = columns.first().map_or(0, Vec::len);
        let rows: Vec<usize> = (0..n).collect();
        let mut out = vec![self.intercept; n];
        for term in self.terms() {
            let v = self.term_values(term, trees, columns, &rows).expect("term from store");
            out.iter_mut().zip(v).for_each(|(o, t)| *o += t);
        }
        out
    }

    /// Standard deviation of each term's contribution over `rows`, largest first.
    pub fn importance(&self, trees: &[TaggedTree], columns: &[Vec<f64>], rows: &[usize]) -> Result<Vec<TermImportance>> {
        if rows.is_empty() {
            return Err(Error::data("importance needs at least one reference row"));
        }
        let terms = self.terms();
        let mut out: Vec<TermImportance> = exec::map_slice(&terms, |&term| {
            let v = self.term_values(term, trees, columns, rows).expect("term from store");
            TermImportance {
                term,
                importance: std_dev(&v),
            }
        });
        out.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.term.cmp(&b.term)));
        Ok(out)
    }

    /// Ranked main-effect features by importance.
    pub fn ranked_mains(&self) -> Vec<usize> {
        self.importance
            .iter()
            .filter_map(|t| match t.term {
                Term::Main(j) => Some(j),
                Term::Pair(..) => None,
            })
            .collect()
    }

    /// Ranked interaction pairs by importance.
    pub fn ranked_pairs(&self) -> Vec<(usize, usize)> {
        self.importance
            .iter()
            .filter_map(|t| match t.term {
                Term::Pair(j, k) => Some((j, k)),
                Term::Main(_) => None,
            })
            .collect()
    }

    /// One purification pass over `rows`. Applying it to an already purified
    /// store leaves effects unchanged up to solver rounding.
    pub fn purify_pass(&mut self, trees: &[TaggedTree], columns: &[Vec<f64>], rows: &[usize]) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::data("purification needs at least one reference row"));
        }
        let fits: Vec<Result<(Vec<f64>, Vec<f64>)>> = exec::map_slice(&self.interactions, |e| {
            let (j, k) = e.pair;
            let target: Vec<f64> = rows
                .iter()
                .map(|&i| self.interaction_value(e, trees, columns[j][i], columns[k][i]))
                .collect();
            let xj: Vec<f64> = rows.iter().map(|&i| columns[j][i]).collect();
            let xk: Vec<f64> = rows.iter().map(|&i| columns[k][i]).collect();
            fit_additive(&self.bases[j], &xj, &self.bases[k], &xk, &target)
        });
        for (idx, fit) in fits.into_iter().enumerate() {
            let (cj, ck) = fit?;
            let (j, k) = self.interactions[idx].pair;
            {
                let e = &mut self.interactions[idx];
                e.h_j.iter_mut().zip(&cj).for_each(|(a, b)| *a += b);
                e.h_k.iter_mut().zip(&ck).for_each(|(a, b)| *a += b);
            }
            let mj = self.main_index(j);
            self.mains[mj].correction.iter_mut().zip(&cj).for_each(|(a, b)| *a += b);
            let mk = self.main_index(k);
            self.mains[mk].correction.iter_mut().zip(&ck).for_each(|(a, b)| *a += b);
        }
        for m in 0..self.mains.len() {
            let e = &self.mains[m];
            let x = &columns[e.feature];
            let mean = rows.iter().map(|&i| self.main_value(e, trees, x[i])).sum::<f64>() / rows.len() as f64;
            self.mains[m].offset -= mean;
            self.intercept += mean;
        }
        Ok(())
    }

    /// Per-pair inner products of the interaction residual with every basis
    /// function of its two features, under uniform weights on `rows`.
    pub fn verify_orthogonality(&self, trees: &[TaggedTree], columns: &[Vec<f64>], rows: &[usize]) -> OrthogonalityReport {
        let pairs = exec::map_slice(&self.interactions, |e| {
            let (j, k) = e.pair;
            let n = rows.len() as f64;
            let mut resid = Vec::with_capacity(rows.len());
            let mut raw = Vec::with_capacity(rows.len());
            for &i in rows {
                let (xj, xk) = (columns[j][i], columns[k][i]);
                raw.push(Self::raw_interaction_value(e, trees, xj, xk));
                resid.push(self.interaction_value(e, trees, xj, xk));
            }
            let scale = std_dev(&raw);
            let mut max_abs = 0.0f64;
            let mut max_rel = 0.0f64;
            for (feature, x) in [(j, &columns[j]), (k, &columns[k])] {
                let basis = &self.bases[feature];
                let dim = basis.dim();
                let mut row = vec![0.0; dim];
                let mut ip = vec![0.0; dim];
                let mut s1 = vec![0.0; dim];
                let mut s2 = vec![0.0; dim];
                for (r, &i) in rows.iter().enumerate() {
                    basis.evaluate_into(x[i], &mut row);
                    for m in 0..dim {
                        ip[m] += resid[r] * row[m];
                        s1[m] += row[m];
                        s2[m] += row[m] * row[m];
                    }
                }
                for m in 0..dim {
                    let inner = ip[m] / n;
                    let mean = s1[m] / n;
                    let var = (s2[m] / n - mean * mean).max(0.0);
                    let spread = if var > 0.0 { var.sqrt() } else { (s2[m] / n).sqrt() };
                    let denom = scale * spread;
                    let rel = if denom > 0.0 {
                        inner.abs() / denom
                    } else if inner == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    max_abs = max_abs.max(inner.abs());
                    max_rel = max_rel.max(rel);
                }
            }
            PairOrthogonality {
                pair: e.pair,
                max_abs_inner: max_abs,
                max_relative: max_rel,
                scale,
            }
        });
        let max_relative = pairs.iter().map(|p| p.max_relative).fold(0.0, f64::max);
        OrthogonalityReport { pairs, max_relative }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOrthogonality {
    pub pair: (usize, usize),
    /// `max_b |(1/n) Σ_i g̃(x_i) b(x_i)|` over both features' basis functions.
    pub max_abs_inner: f64,
    /// The same, divided by `std(raw g_jk) · std(b)`.
    pub max_relative: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub pairs: Vec<PairOrthogonality>,
    pub max_relative: f64,
}

impl OrthogonalityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_relative <= tol
    }
}

/// Builds and purifies the effect store of `model` on `rows`, and records
/// term importance over the same rows.
pub fn purify(model: &GamiModel, columns: &[Vec<f64>], rows: &[usize]) -> Result<EffectStore> {
    if columns.len() != model.n_features() {
        return Err(Error::data("column count does not match model"));
    }
    let mut store = EffectStore::unpurified(model);
    store.purify_pass(&model.trees, columns, rows)?;
    store.importance = store.importance(&model.trees, columns, rows)?;
    Ok(store)
}

pub fn std_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Least-squares fit of `c + f_j(x_j) + f_k(x_k)` to `target`.
///
/// Design: an intercept plus the centered basis columns of each feature with
/// the first column dropped (the full bases each contain the constant).
/// Returns coefficient vectors over the full bases of `j` and `k`; the fitted
/// constant is carried by `h_j`.
fn fit_additive(
    basis_j: &FeatureBasis,
    xj: &[f64],
    basis_k: &FeatureBasis,
    xk: &[f64],
    target: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = target.len();
    let (dj, dk) = (basis_j.dim(), basis_k.dim());
    let d = 1 + (dj - 1) + (dk - 1);
    let mut bj = vec![0.0; dj];
    let mut bk = vec![0.0; dk];

    // column means of the dropped-first bases
    let mut mean = vec![0.0; d];
    mean[0] = 0.0;
    for r in 0..n {
        basis_j.evaluate_into(xj[r], &mut bj);
        basis_k.evaluate_into(xk[r], &mut bk);
        for m in 1..dj {
            mean[m] += bj[m];
        }
        for m in 1..dk {
            mean[dj - 1 + m] += bk[m];
        }
    }
    mean.iter_mut().skip(1).for_each(|v| *v /= n as f64);

    let design_row = |r: usize, bj: &mut [f64], bk: &mut [f64], row: &mut [f64]| {
        basis_j.evaluate_into(xj[r], bj);
        basis_k.evaluate_into(xk[r], bk);
        row[0] = 1.0;
        for m in 1..dj {
            row[m] = bj[m] - mean[m];
        }
        for m in 1..dk {
            row[dj - 1 + m] = bk[m] - mean[dj - 1 + m];
        }
    };

    let mut gram = vec![0.0; d * d];
    let mut row = vec![0.0; d];
    for r in 0..n {
        design_row(r, &mut bj, &mut bk, &mut row);
        for a in 0..d {
            let ra = row[a];
            for b in a..d {
                gram[a * d + b] += ra * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[a * d + b] = gram[b * d + a];
        }
    }
    // tiny ridge for rank safety; refinement below removes its bias
    let avg_diag = (0..d).map(|a| gram[a * d + a]).sum::<f64>() / d as f64;
    for a in 1..d {
        gram[a * d + a] += 1e-12 * avg_diag;
    }
    let mut l = vec![0.0; d * d];
    linalg::cholesky_into(&gram, d, &mut l)
        .ok_or_else(|| Error::Numerical("purification design is singular".into()))?;

    let mut beta = vec![0.0; d];
    let mut resid = target.to_vec();
    for _ in 0..3 {
        let mut rhs = vec![0.0; d];
        for (r, &e) in resid.iter().enumerate() {
            design_row(r, &mut bj, &mut bk, &mut row);
            rhs.iter_mut().zip(&row).for_each(|(s, v)| *s += v * e);
        }
        linalg::cholesky_solve_in_place(&l, d, &mut rhs);
        beta.iter_mut().zip(&rhs).for_each(|(b, s)| *b += s);
        for r in 0..n {
            design_row(r, &mut bj, &mut bk, &mut row);
            resid[r] = target[r] - linalg::dot(&row, &beta);
        }
    }

    let mut cj = vec![0.0; dj];
    let mut ck = vec![0.0; dk];
    let mut const_j = beta[0];
    for m in 1..dj {
        cj[m] = beta[m];
        const_j -= beta[m] * mean[m];
    }
    let mut const_k = 0.0;
    for m in 1..dk {
        ck[m] = beta[dj - 1 + m];
        const_k -= beta[dj - 1 + m] * mean[dj - 1 + m];
    }
    basis_j.add_constant(&mut cj, const_j);
    basis_k.add_constant(&mut ck, const_k);
    Ok((cj, ck))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn spline(xs: &[f64]) -> FeatureBasis {
        FeatureBasis::Spline {
            basis: SplineBasis::fit_knots(xs, 5).unwrap(),
        }
    }

    #[test]
    fn additive_fit_recovers_additive_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xj: Vec<f64> = (0..2000).map(|_| rng.random_range(-2.0..2.0)).collect();
        let xk: Vec<f64> = (0..2000).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (bj, bk) = (spline(&xj), spline(&xk));
        // exactly representable: a linear function of each variable plus a constant
        let target: Vec<f64> = xj.iter().zip(&xk).map(|(a, b)| 1.0 + 2.0 * a - 0.5 * b).collect();
        let (cj, ck) = fit_additive(&bj, &xj, &bk, &xk, &target).unwrap();
        for r in 0..xj.len() {
            let fit = bj.combine(&cj, xj[r]) + bk.combine(&ck, xk[r]);
            assert!((fit - target[r]).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_fallback_basis() {
        let xj: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let xk: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let target: Vec<f64> = xj.iter().map(|a| 3.0 * a - 1.0).collect();
        let bk = spline(&xk);
        let (cj, ck) = fit_additive(&FeatureBasis::Linear, &xj, &bk, &xk, &target).unwrap();
        for r in 0..100 {
            let fit = FeatureBasis::Linear.combine(&cj, xj[r]) + bk.combine(&ck, xk[r]);
            assert!((fit - target[r]).abs() < 1e-9);
        }
    }

    #[test]
    fn std_dev_is_homogeneous() {
        let v = [1.0, 4.0, -2.0, 0.5];
        let scaled: Vec<f64> = v.iter().map(|x| -3.0 * x).collect();
        assert!((std_dev(&scaled) - 3.0 * std_dev(&v)).abs() < 1e-12);
        assert_eq!(std_dev(&[2.0; 5]), 0.0);
    }
}
