//! Feature/label datasets for logistic regression and their CSV format.
//!
//! CSV layout (bit-exact): header `y,x1,...,xd`, one row per observation,
//! labels `0`/`1`, features with 17 significant digits, UTF-8, LF newlines.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::format::{float17, parse_float};
use crate::mc::stream_rng;
use crate::sigmoid::sigma;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n × d` feature matrix; row `i` is `Xᵢ`.
    pub features: DMatrix<f64>,
    /// Binary labels `Yᵢ ∈ {0, 1}`.
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<u8>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::Argument("dataset must have n ≥ 1 and d ≥ 1".into()));
        }
        if labels.len() != features.nrows() {
            return Err(Error::Argument(format!(
                "dataset has {} rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("dataset features must be finite".into()));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::Argument("labels must be 0 or 1".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    /// Draws `Xᵢ ~ N(0, I_d)` i.i.d. and `Yᵢ | Xᵢ ~ Bernoulli(σ(βᵀXᵢ))`;
    /// deterministic for a given seed.
    pub fn generate(d: usize, n: usize, beta: &DVector<f64>, seed: u64) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::Argument("generate: need n ≥ 1 and d ≥ 1".into()));
        }
        if beta.len() != d {
            return Err(Error::Argument(format!(
                "generate: beta has length {}, d = {d}",
                beta.len()
            )));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Argument("generate: beta must be finite".into()));
        }
        let mut rng = stream_rng(seed, 0);
        let mut features = DMatrix::zeros(n, d);
        let mut labels = vec![0u8; n];
        for i in 0..n {
            let mut t = 0.0;
            for j in 0..d {
                let x: f64 = rng.sample(StandardNormal);
                features[(i, j)] = x;
                t += beta[j] * x;
            }
            labels[i] = u8::from(rng.random_bool(sigma(t)));
        }
        Ok(Self { features, labels })
    }

    pub fn to_csv(&self) -> String {
        let (n, d) = (self.n(), self.d());
        let mut out = String::with_capacity(n * (d * 24 + 2) + 16);
        out.push('y');
        for j in 1..=d {
            out.push_str(&format!(",x{j}"));
        }
        out.push('\n');
        for i in 0..n {
            out.push(if self.labels[i] == 1 { '1' } else { '0' });
            for j in 0..d {
                out.push(',');
                out.push_str(&float17(self.features[(i, j)]));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset CSV".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.is_empty() || cols[0] != "y" {
            return Err(Error::Parse("dataset CSV header must start with 'y'".into()));
        }
        let d = cols.len() - 1;
        if d == 0 {
            return Err(Error::Parse("dataset CSV has no feature columns".into()));
        }
        for (j, col) in cols.iter().enumerate().skip(1) {
            if *col != format!("x{j}") {
                return Err(Error::Parse(format!(
                    "dataset CSV header column {j} is '{col}', expected 'x{j}'"
                )));
            }
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::Parse(format!(
                    "dataset CSV row {}: expected {} fields, got {}",
                    lineno + 2,
                    d + 1,
                    fields.len()
                )));
            }
            let y = match fields[0] {
                "0" => 0u8,
                "1" => 1u8,
                other => {
                    return Err(Error::Parse(format!(
                        "dataset CSV row {}: label '{other}' is not 0/1",
                        lineno + 2
                    )))
                }
            };
            let mut row = Vec::with_capacity(d);
            for f in &fields[1..] {
                let x = parse_float(f).ok_or_else(|| {
                    Error::Parse(format!("dataset CSV row {}: bad float '{f}'", lineno + 2))
                })?;
                row.push(x);
            }
            labels.push(y);
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("dataset CSV has no data rows".into()));
        }
        let n = rows.len();
        let features = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        Dataset::new(features, labels)
    }
}
