//! Exploration diagnostics: k-NN state-marginal entropy and the trajectory
//! entropy rate of a policy.

mod knn;
mod rate;

pub use knn::{kth_neighbor_distances, kth_neighbor_distances_brute, knn_entropy, unit_ball_log_volume};
pub use rate::{trajectory_entropy_rate, RateMode, MC_SAMPLES};

use crate::error::{Error, Result};

/// Neighbour index used by the reported state-entropy column.
pub const DEFAULT_K: usize = 3;

/// A set of visited states of a common dimension, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSample {
    dim: usize,
    data: Vec<f64>,
}

impl StateSample {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Dim {
                    what: "state sample row",
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(dim, data)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 && !data.is_empty() {
            return Err(Error::Structure("zero-dimensional states".into()));
        }
        if dim > 0 && data.len() % dim != 0 {
            return Err(Error::Structure(format!(
                "{} values do not split into rows of {dim}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("state sample".into()));
        }
        Ok(StateSample { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_flat(self.dim, self.data.iter().map(|&x| f(x)).collect())
    }
}

impl StateSample {
    /// One state per line, values separated by spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Reads [`StateSample::to_text`] output; blank lines and lines starting
    /// with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("line {}: bad number `{t}`", n + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}
