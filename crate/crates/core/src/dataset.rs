//! Column-major numeric tables with a response column and per-row split tags.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// When false, columns are named `c1`, `c2`, ... in file order.
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: true,
        }
    }
}

/// Numeric feature table plus response. Features are stored column-major.
#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    response: Vec<f64>,
    tags: Vec<SplitTag>,
}

impl Dataset {
    /// Builds a dataset from columns; every row starts tagged `Train`.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::data(format!(
                "{} feature names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let n = response.len();
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::data(format!(
                    "column {name:?} has {} rows, response has {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row,
                    column: name.clone(),
                });
            }
        }
        if let Some(row) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row,
                column: "<response>".into(),
            });
        }
        Ok(Self {
            columns,
            names,
            response,
            tags: vec![SplitTag::Train; n],
        })
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn tags(&self) -> &[SplitTag] {
        &self.tags
    }

    /// Row `i` as a dense feature vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Indices of rows carrying `tag`, ascending.
    pub fn rows(&self, tag: SplitTag) -> Vec<usize> {
        self.tags
            .iter()
            .enumerate()
            .filter_map(|(i, t)| (*t == tag).then_some(i))
            .collect()
    }

    pub fn with_tags(mut self, tags: Vec<SplitTag>) -> Result<Self> {
        if tags.len() != self.n_rows() {
            return Err(Error::data(format!(
                "{} split tags for {} rows",
                tags.len(),
                self.n_rows()
            )));
        }
        self.tags = tags;
        Ok(self)
    }

    /// Fails unless every response value is exactly 0 or 1.
    pub fn check_binary(&self) -> Result<()> {
        match self.response.iter().position(|&y| y != 0.0 && y != 1.0) {
            Some(row) => Err(Error::data(format!(
                "binary response must be 0 or 1, found {} at row {row}",
                self.response[row]
            ))),
            None => Ok(()),
        }
    }

    /// Reads a CSV whose cells are all numeric; `response_column` names the
    /// target and every other column becomes a feature.
    pub fn load_csv(path: &Path, response_column: &str, options: &CsvOptions) -> Result<Self> {
        let (names, mut columns) = read_numeric_csv(path, options)?;
        let pos = names
            .iter()
            .position(|n| n == response_column)
            .ok_or_else(|| Error::MissingColumn(response_column.to_string()))?;
        let mut names = names;
        names.remove(pos);
        let response = columns.remove(pos);
        Dataset::new(names, columns, response)
    }

    /// Splits rows into train/validation/test. Rows are shuffled with a
    /// seeded ChaCha8 stream and cut at `floor(n * cumulative fraction)`.
    pub fn split(self, fractions: (f64, f64, f64), seed: u64) -> Result<Self> {
        let tags = split_tags(self.n_rows(), fractions, seed)?;
        self.with_tags(tags)
    }
}

/// Reads every column as a feature (for scoring new data).
pub fn read_feature_csv(
    path: &Path,
    options: &CsvOptions,
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    read_numeric_csv(path, options)
}

fn read_numeric_csv(path: &Path, options: &CsvOptions) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .from_reader(file);

    let mut names: Vec<String> = if options.has_header {
        reader
            .headers()
            .map_err(|e| Error::Parse {
                row: 0,
                column: String::new(),
                message: e.to_string(),
            })?
            .iter()
            .map(|s| s.trim().to_string())
            .collect()
    } else {
        Vec::new()
    };
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];

    for (r, record) in reader.records().enumerate() {
        // 1-based data row numbers, matching what a spreadsheet shows below the header
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if names.is_empty() && !options.has_header {
            names = (1..=record.len()).map(|i| format!("c{i}")).collect();
            columns = vec![Vec::new(); names.len()];
        }
        if record.len() != names.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", names.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: names[c].clone(),
                message: format!("{cell:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: names[c].clone(),
                });
            }
            columns[c].push(value);
        }
    }
    Ok((names, columns))
}

/// Split assignment used by [`Dataset::split`].
pub fn split_tags(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Vec<SplitTag>> {
    let (a, b, c) = fractions;
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::config("split fractions must all be positive"));
    }
    if ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split fractions sum to {}, not 1",
            a + b + c
        )));
    }
    let cut1 = (n as f64 * a).floor() as usize;
    let cut2 = ((n as f64 * (a + b)).floor() as usize).min(n);
    if cut1 == 0 || cut2 == cut1 || cut2 == n {
        return Err(Error::config(format!(
            "split {a}/{b}/{c} of {n} rows leaves a split empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut tags = vec![SplitTag::Train; n];
    for (pos, &row) in order.iter().enumerate() {
        tags[row] = if pos < cut1 {
            SplitTag::Train
        } else if pos < cut2 {
            SplitTag::Validation
        } else {
            SplitTag::Test
        };
    }
    Ok(tags)
}
