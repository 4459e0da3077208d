//! Observation matrices, CSV ingestion and the pairwise-distance sums shared by
//! every estimator.
//!
//! A [`Sample`] holds `n` observations of dimension `p` in row-major order. Row
//! order carries no meaning; every statistic in this crate is invariant under
//! row permutation.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sum::{pairwise_sum, pairwise_sum_by, Compensated};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Vec<f64>,
    n: usize,
    p: usize,
}

impl Sample {
    /// Builds a sample from row-major data. Fails on empty input, a length that
    /// is not a multiple of `p`, or non-finite entries.
    pub fn from_row_major(data: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Dimension("p must be at least 1".into()));
        }
        if data.is_empty() {
            return Err(Error::Empty("sample has no observations".into()));
        }
        if !data.len().is_multiple_of(p) {
            return Err(Error::Dimension(format!(
                "{} values cannot be split into rows of length {p}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / p,
                column: pos % p,
            });
        }
        let n = data.len() / p;
        Ok(Sample { data, n, p })
    }

    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::from_row_major(values, 1)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {p}",
                rows[bad].len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Empty("sample has no observations".into()));
        }
        Self::from_row_major(rows.concat(), p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.p)
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    /// The single column of a univariate sample.
    pub fn values(&self) -> Result<&[f64]> {
        self.require_univariate()?;
        Ok(&self.data)
    }

    pub(crate) fn require_univariate(&self) -> Result<()> {
        if self.p != 1 {
            return Err(Error::Dimension(format!(
                "operation needs univariate data, sample has p = {}",
                self.p
            )));
        }
        Ok(())
    }

    /// Applies `x -> a + b x` entrywise.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        Self::from_row_major(self.data.iter().map(|x| a + b * x).collect(), self.p)
    }
}

/// Euclidean distance between two observations.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Order statistics of a univariate sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
}

impl SortedSample {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Median, taking the midpoint of the central pair when `n` is even.
    pub fn median(&self) -> f64 {
        let n = self.values.len();
        if n % 2 == 1 {
            self.values[n / 2]
        } else {
            0.5 * (self.values[n / 2 - 1] + self.values[n / 2])
        }
    }
}

pub fn sort_univariate(s: &Sample) -> Result<SortedSample> {
    let mut values = s.values()?.to_vec();
    values.sort_unstable_by(f64::total_cmp);
    Ok(SortedSample { values })
}

/// CSV reader options.
#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { delimiter: b',' }
    }
}

fn parse_cell(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Reads a numeric matrix from delimited text. A first row whose fields are
/// not all numeric is treated as a header; any later non-numeric cell is an
/// error.
pub fn load_csv(path: impl AsRef<Path>, delimiter: u8) -> Result<Sample> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, CsvOptions { delimiter })
}

pub fn read_csv(reader: impl std::io::Read, opts: CsvOptions) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(opts.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut data = Vec::new();
    let mut width: Option<usize> = None;
    let mut first = true;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(parse_cell).collect();
        if first {
            first = false;
            if parsed.iter().any(Option::is_none) {
                width = Some(record.len());
                continue;
            }
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::RaggedRow {
                    line,
                    expected: w,
                    found: record.len(),
                })
            }
            Some(_) => {}
        }
        for (column, (value, raw)) in parsed.iter().zip(record.iter()).enumerate() {
            match value {
                Some(v) => data.push(*v),
                None => {
                    return Err(Error::BadCell {
                        line,
                        column: column + 1,
                        value: raw.to_string(),
                    })
                }
            }
        }
    }
    let p = width.unwrap_or(0);
    if data.is_empty() {
        return Err(Error::Empty("no numeric rows in input".into()));
    }
    Sample::from_row_major(data, p)
}

/// Inner sums of the pairwise distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSums {
    /// `row_sums[i] = Σ_j ‖X_i − X_j‖`, in the sample's row order.
    pub row_sums: Vec<f64>,
    /// `Σ_i row_sums[i]`.
    pub total: f64,
    /// `Σ_{i,j} ‖X_i − X_j‖²`.
    pub total_squared: f64,
}

/// Pairwise distance row sums. Univariate samples take the `O(n log n)`
/// sorted prefix-sum path; otherwise rows are summed directly in parallel.
pub fn pairwise_distance_row_sums(s: &Sample) -> RowSums {
    let row_sums = if s.p() == 1 {
        univariate_row_sums(&s.data)
    } else {
        (0..s.n())
            .into_par_iter()
            .map(|i| {
                let xi = s.row(i);
                pairwise_sum_by(0, s.n(), &|j| distance(xi, s.row(j)))
            })
            .collect()
    };
    let total = pairwise_sum(&row_sums);
    RowSums {
        row_sums,
        total,
        total_squared: centered_total_squared(s),
    }
}

/// Literal `O(n² p)` evaluation of the same sums; the reference for the fast path.
pub fn pairwise_distance_row_sums_direct(s: &Sample) -> RowSums {
    let n = s.n();
    let row_sums: Vec<f64> = (0..n)
        .map(|i| pairwise_sum_by(0, n, &|j| distance(s.row(i), s.row(j))))
        .collect();
    let sq_rows: Vec<f64> = (0..n)
        .map(|i| {
            pairwise_sum_by(0, n, &|j| {
                let d = distance(s.row(i), s.row(j));
                d * d
            })
        })
        .collect();
    RowSums {
        total: pairwise_sum(&row_sums),
        total_squared: pairwise_sum(&sq_rows),
        row_sums,
    }
}

/// `Σ_{i,j} ‖X_i − X_j‖² = 2n Σ_i ‖X_i − X̄‖²`.
fn centered_total_squared(s: &Sample) -> f64 {
    let n = s.n();
    let p = s.p();
    let mut acc = 0.0;
    for c in 0..p {
        let mean = pairwise_sum_by(0, n, &|i| s.data[i * p + c]) / n as f64;
        acc += pairwise_sum_by(0, n, &|i| {
            let d = s.data[i * p + c] - mean;
            d * d
        });
    }
    2.0 * n as f64 * acc
}

fn univariate_row_sums(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let shift = pairwise_sum(xs) / n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| xs[i] - shift).collect();

    // prefix[k] = sum of the k smallest centred values
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = Compensated::default();
    prefix.push(0.0);
    for &x in &sorted {
        acc.add(x);
        prefix.push(acc.value());
    }
    let total = prefix[n];

    let mut out = vec![0.0; n];
    for (k, (&x, &orig)) in sorted.iter().zip(&order).enumerate() {
        let below = k as f64 * x - prefix[k];
        let above = (total - prefix[k + 1]) - (n - 1 - k) as f64 * x;
        out[orig] = below + above;
    }
    out
}
