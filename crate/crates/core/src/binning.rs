//! Per-feature quantile binning on the training split.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitTag};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_BINS: usize = 256;

/// Bin edges per feature and the bin index of every row.
///
/// A value `x` falls in bin `#{e in edges : e <= x}`, so a value equal to an
/// edge belongs to the bin on its right, and values outside the training range
/// land in the first or last bin.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BinMap {
    edges: Vec<Vec<f64>>,
    #[serde(skip)]
    index: Vec<Vec<u16>>,
}

impl BinMap {
    /// Quantile bins from the training rows of `data`.
    ///
    /// When a feature has at most `max_bins` distinct training values, edges
    /// are the midpoints between consecutive distinct values (every distinct
    /// value gets its own bin). Otherwise edges are the training quantiles at
    /// levels `k / max_bins`, with duplicates collapsed.
    pub fn build(data: &Dataset, max_bins: usize) -> Result<Self> {
        if !(2..=u16::MAX as usize + 1).contains(&max_bins) {
            return Err(Error::config(format!(
                "max_bins must be in 2..=65536, got {max_bins}"
            )));
        }
        let train = data.rows(SplitTag::Train);
        if train.is_empty() {
            return Err(Error::data("training split is empty"));
        }
        let edges: Vec<Vec<f64>> = data
            .columns()
            .iter()
            .map(|col| {
                let mut vals: Vec<f64> = train.iter().map(|&i| col[i]).collect();
                vals.sort_by(f64::total_cmp);
                feature_edges(&vals, max_bins)
            })
            .collect();
        let mut map = BinMap {
            edges,
            index: Vec::new(),
        };
        map.index = data.columns().iter().enumerate().map(|(j, col)| map.bin_column(j, col)).collect();
        Ok(map)
    }

    /// Rebuilds a bin map from stored edges, indexing `data` with them.
    pub fn from_edges(edges: Vec<Vec<f64>>, data: &Dataset) -> Result<Self> {
        if edges.len() != data.n_features() {
            return Err(Error::data(format!(
                "{} edge lists for {} features",
                edges.len(),
                data.n_features()
            )));
        }
        for e in &edges {
            if e.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::data("bin edges must be strictly increasing"));
            }
        }
        let mut map = BinMap {
            edges,
            index: Vec::new(),
        };
        map.index = data.columns().iter().enumerate().map(|(j, col)| map.bin_column(j, col)).collect();
        Ok(map)
    }

    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self, feature: usize) -> &[f64] {
        &self.edges[feature]
    }

    pub fn all_edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }

    /// Features with a single bin cannot be split on.
    pub fn is_splittable(&self, feature: usize) -> bool {
        !self.edges[feature].is_empty()
    }

    /// Bin indices of every row of the dataset this map was built against.
    pub fn indices(&self, feature: usize) -> &[u16] {
        &self.index[feature]
    }

    pub fn bin_of(&self, feature: usize, x: f64) -> u16 {
        self.edges[feature].partition_point(|&e| e <= x) as u16
    }

    fn bin_column(&self, feature: usize, col: &[f64]) -> Vec<u16> {
        col.iter().map(|&x| self.bin_of(feature, x)).collect()
    }
}

fn feature_edges(sorted: &[f64], max_bins: usize) -> Vec<f64> {
    let mut distinct: Vec<f64> = sorted.to_vec();
    distinct.dedup();
    if distinct.len() <= 1 {
        return Vec::new();
    }
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let mut edges: Vec<f64> = (1..max_bins)
        .map(|k| quantile_sorted(sorted, k as f64 / max_bins as f64))
        .collect();
    edges.dedup();
    // an edge at the minimum would leave the first bin empty
    if edges.first() == sorted.first() {
        edges.remove(0);
    }
    edges
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // guard against rounding landing on the left value for adjacent floats
    if m > a {
        m
    } else {
        b
    }
}

/// Linear-interpolation quantile of sorted data (`p` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}
