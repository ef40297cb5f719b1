//! Model files and plot-ready effect exports.
//!
//! Model files are JSON. Struct fields serialize in declaration order and
//! floats use the shortest representation that parses back to the same bits,
//! so save → load → save is byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gami::{GamiModel, Term, SLICE_QUANTILES};
use crate::purify::EffectStore;

pub const FORMAT_VERSION: u32 = 1;
pub const MAIN_GRID: usize = 256;
pub const PAIR_GRID: usize = 64;

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format_version: u32,
    model: &'a GamiModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

#[derive(Deserialize)]
struct ModelFile {
    #[allow(dead_code)]
    format_version: u32,
    model: GamiModel,
}

pub fn model_to_string(model: &GamiModel) -> Result<String> {
    let doc = ModelFileRef {
        format_version: FORMAT_VERSION,
        model,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::ModelFormat(e.to_string()))
}

pub fn model_from_str(text: &str) -> Result<GamiModel> {
    let probe: VersionProbe =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(format!("not a model file: {e}")))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: probe.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(file.model)
}

pub fn save_model(model: &GamiModel, path: &Path) -> Result<()> {
    let mut text = model_to_string(model)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<GamiModel> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    model_from_str(&text)
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 || hi <= lo {
        return vec![lo; n.max(1)];
    }
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes one CSV per retained term plus `importance.csv` into `dir`.
///
/// Main effects: `x,effect` on a 256-point grid spanning the training range.
/// Interactions: long-format rows `kind,quantile,x_j,x_k,effect`; `grid` rows
/// cover a 64×64 grid over both training ranges, `slice` rows fix the pair's
/// split feature at its training quantiles and sweep the other.
pub fn export_effects(model: &GamiModel, dir: &Path) -> Result<Vec<PathBuf>> {
    let store = model
        .effects
        .as_ref()
        .ok_or_else(|| Error::config("model has not been purified"))?;
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let names = &model.feature_names;
    let mut written = Vec::new();

    for m in &store.mains {
        let s = &model.train_summary[m.feature];
        let path = dir.join(format!("main_{}.csv", sanitize(&names[m.feature])));
        let rows = grid(s.min, s.max, MAIN_GRID)
            .into_iter()
            .map(|x| vec![x.to_string(), store.main_value(m, &model.trees, x).to_string()]);
        write_csv(&path, &["x", "effect"], rows)?;
        written.push(path);
    }

    for e in &store.interactions {
        let (j, k) = e.pair;
        let (sj, sk) = (&model.train_summary[j], &model.train_summary[k]);
        let (gj, gk) = (grid(sj.min, sj.max, PAIR_GRID), grid(sk.min, sk.max, PAIR_GRID));
        let value = |xj: f64, xk: f64| store.interaction_value(e, &model.trees, xj, xk);
        let mut rows = Vec::with_capacity(PAIR_GRID * PAIR_GRID + SLICE_QUANTILES.len() * PAIR_GRID);
        for &xj in &gj {
            for &xk in &gk {
                rows.push(vec!["grid".into(), String::new(), xj.to_string(), xk.to_string(), value(xj, xk).to_string()]);
            }
        }
        let split_on_k = e
            .trees
            .first()
            .is_none_or(|&id| model.trees[id].tree.tree.spec.split_var == k);
        for (qi, &q) in SLICE_QUANTILES.iter().enumerate() {
            if split_on_k {
                let xk = sk.quantiles[qi];
                for &xj in &gj {
                    rows.push(vec!["slice".into(), q.to_string(), xj.to_string(), xk.to_string(), value(xj, xk).to_string()]);
                }
            } else {
                let xj = sj.quantiles[qi];
                for &xk in &gk {
                    rows.push(vec!["slice".into(), q.to_string(), xj.to_string(), xk.to_string(), value(xj, xk).to_string()]);
                }
            }
        }
        let path = dir.join(format!("pair_{}_{}.csv", sanitize(&names[j]), sanitize(&names[k])));
        write_csv(&path, &["kind", "quantile", &names[j], &names[k], "effect"], rows)?;
        written.push(path);
    }

    let path = dir.join("importance.csv");
    write_importance(store, names, &path)?;
    written.push(path);
    Ok(written)
}

pub fn write_importance(store: &EffectStore, names: &[String], path: &Path) -> Result<()> {
    let rows = store.importance.iter().enumerate().map(|(r, t)| {
        let kind = match t.term {
            Term::Main(_) => "main",
            Term::Pair(..) => "interaction",
        };
        vec![
            (r + 1).to_string(),
            kind.to_string(),
            t.term.label(names),
            t.importance.to_string(),
        ]
    });
    write_csv(path, &["rank", "kind", "term", "importance"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_hits_both_ends() {
        let g = grid(-1.3, 2.7, 256);
        assert_eq!(g.len(), 256);
        assert_eq!(g[0], -1.3);
        assert_eq!(g[255], 2.7);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(grid(1.0, 1.0, 4), vec![1.0; 4]);
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let text = r#"{"format_version": 7, "model": {}}"#;
        assert!(matches!(
            model_from_str(text),
            Err(Error::UnsupportedVersion { found: 7, expected: 1 })
        ));
        assert!(matches!(model_from_str("{\"format_vers"), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn sanitized_names() {
        assert_eq!(sanitize("a b/c"), "a_b_c");
    }
}
