//! Order-statistic spacings and the statistics that are quadratic forms in them.
//!
//! With `D_k = X_{k+1:n} − X_{k:n}` (1-based `k = 1..n−1`), the spacings U-statistic is
//! `U_n² = C(n,2)^{-2} Σ_{k,l} min(k,l)² (n − max(k,l))² D_k D_l`. Every weight used here
//! factors as `a(min(k,l)) · b(max(k,l))`, so the forms are evaluated in `O(n)` by a
//! prefix sum instead of materializing the `(n−1)×(n−1)` matrix.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::samples::{sort_univariate, Sample, SortedSample};
use crate::sum::Compensated;

#[derive(Debug, Clone, PartialEq)]
pub struct SpacingsView {
    pub sorted: SortedSample,
    /// `d[k] = sorted[k+1] − sorted[k]`, 0-based.
    pub d: Vec<f64>,
}

impl SpacingsView {
    pub fn n(&self) -> usize {
        self.sorted.n()
    }
}

pub fn spacings(s: &Sample) -> Result<SpacingsView> {
    let sorted = sort_univariate(s)?;
    require_n(sorted.n(), 2, "spacings")?;
    let d = sorted.values().windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SpacingsView { sorted, d })
}

fn require_n(n: usize, min: usize, what: &'static str) -> Result<()> {
    if n < min {
        return Err(Error::TooSmall { what, min, n });
    }
    Ok(())
}

/// `Σ_{k,l} a(min(k,l)) b(max(k,l)) d_k d_l` over 1-based indices `k,l ∈ 1..=d.len()`.
fn separable_form(d: &[f64], a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64) -> f64 {
    let mut diag = Compensated::default();
    let mut cross = Compensated::default();
    // running Σ_{k<l} a(k) d_k
    let mut lower = Compensated::default();
    for (idx, &dl) in d.iter().enumerate() {
        let l = (idx + 1) as f64;
        let (al, bl) = (a(l), b(l));
        diag.add(al * bl * dl * dl);
        cross.add(bl * dl * lower.value());
        lower.add(al * dl);
    }
    diag.value() + 2.0 * cross.value()
}

fn binom2(n: f64) -> f64 {
    n * (n - 1.0) / 2.0
}

/// `U_n²` from the spacings view, `O(n)`.
pub fn u_stat_quadform_sorted(view: &SpacingsView) -> f64 {
    let n = view.n() as f64;
    let c = binom2(n);
    separable_form(&view.d, |k| k * k, |k| (n - k) * (n - k)) / (c * c)
}

/// Spacings U-statistic `U_n²`, a strongly consistent estimator of the
/// distance variance.
pub fn u_stat_quadform(s: &Sample) -> Result<f64> {
    Ok(u_stat_quadform_sorted(&spacings(s)?))
}

/// The exact 4-subset U-statistic `Û_n²`: the average over all 4-subsets of
/// `(2/3)(x_{3:4} − x_{2:4})²`. Computed in `O(n)` from the spacings.
pub fn u_stat_exact(s: &Sample) -> Result<f64> {
    let view = spacings(s)?;
    require_n(view.n(), 4, "exact spacings U-statistic")?;
    Ok(u_stat_exact_sorted(&view))
}

pub fn u_stat_exact_sorted(view: &SpacingsView) -> f64 {
    let n = view.n() as f64;
    let form = separable_form(&view.d, |k| k * (k - 1.0), |k| (n - k) * (n - k - 1.0));
    // (1/6) C(n,4)^{-1} = 4 / (n(n−1)(n−2)(n−3))
    4.0 * form / (n * (n - 1.0) * (n - 2.0) * (n - 3.0))
}

/// `Û_n²` by the `O(n²)` order-statistic double sum
/// `(2/3) C(n,4)^{-1} Σ_{i<j} (i−1)(n−j)(X_{j:n} − X_{i:n})²`.
pub fn u_stat_exact_direct(s: &Sample) -> Result<f64> {
    let sorted = sort_univariate(s)?;
    let n = sorted.n();
    require_n(n, 4, "exact spacings U-statistic")?;
    let x = sorted.values();
    let mut acc = Compensated::default();
    for i in 1..=n {
        for j in (i + 1)..=n {
            let w = ((i - 1) * (n - j)) as f64;
            let diff = x[j - 1] - x[i - 1];
            acc.add(w * diff * diff);
        }
    }
    let nf = n as f64;
    let c4 = nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0) / 24.0;
    Ok(2.0 / 3.0 * acc.value() / c4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum QuadFormKind {
    /// Spacings distance variance `U_n²`.
    V,
    /// Squared unbiased Gini mean difference.
    G,
    /// Sample variance.
    S,
}

impl QuadFormKind {
    pub fn name(self) -> &'static str {
        match self {
            QuadFormKind::V => "V",
            QuadFormKind::G => "G",
            QuadFormKind::S => "S",
        }
    }

    /// Entry `(i, j)`, 1-based, of the `n`-sample matrix.
    pub fn entry(self, n: usize, i: usize, j: usize) -> f64 {
        let nf = n as f64;
        let c = binom2(nf);
        let (lo, hi) = (i.min(j) as f64, i.max(j) as f64);
        match self {
            QuadFormKind::V => lo * lo * (nf - hi) * (nf - hi) / (c * c),
            QuadFormKind::G => {
                let (i, j) = (i as f64, j as f64);
                i * j * (nf - i) * (nf - j) / (c * c)
            }
            QuadFormKind::S => 0.5 * lo * (nf - hi) / c,
        }
    }
}

impl std::str::FromStr for QuadFormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "V" | "v" => Ok(QuadFormKind::V),
            "G" | "g" => Ok(QuadFormKind::G),
            "S" | "s" => Ok(QuadFormKind::S),
            other => Err(Error::InvalidParameter(format!(
                "unknown matrix kind {other:?}, expected V, G or S"
            ))),
        }
    }
}

pub const QUADFORM_MAX_N: usize = 5000;

/// A materialized `(n−1)×(n−1)` quadratic-form matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadFormMatrix {
    pub kind: QuadFormKind,
    pub n: usize,
    pub entries: Vec<f64>,
}

impl QuadFormMatrix {
    pub fn dim(&self) -> usize {
        self.n - 1
    }

    /// 1-based access.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i - 1) * self.dim() + (j - 1)]
    }

    /// `dᵗ M d`.
    pub fn quadratic_form(&self, d: &[f64]) -> Result<f64> {
        if d.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "vector of length {} against a {}x{} matrix",
                d.len(),
                self.dim(),
                self.dim()
            )));
        }
        let m = self.dim();
        let mut acc = Compensated::default();
        for i in 0..m {
            let row = &self.entries[i * m..(i + 1) * m];
            let inner: f64 = row.iter().zip(d).map(|(a, b)| a * b).sum();
            acc.add(d[i] * inner);
        }
        Ok(acc.value())
    }
}

pub fn quadform_matrix(kind: QuadFormKind, n: usize) -> Result<QuadFormMatrix> {
    require_n(n, 2, "quadratic-form matrix")?;
    if n > QUADFORM_MAX_N {
        return Err(Error::TooLarge {
            what: "quadratic-form matrix",
            max: QUADFORM_MAX_N,
            n,
        });
    }
    let m = n - 1;
    let mut entries = Vec::with_capacity(m * m);
    for i in 1..=m {
        for j in 1..=m {
            entries.push(kind.entry(n, i, j));
        }
    }
    Ok(QuadFormMatrix { kind, n, entries })
}

/// Writes the full symmetric matrix as `i,j,value` rows with 1-based indices.
pub fn export_matrix_heatmap(m: &QuadFormMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.as_os_str().is_empty() {
        return Err(Error::InvalidParameter("empty output path".into()));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let write = |w: &mut std::io::BufWriter<std::fs::File>| -> std::io::Result<()> {
        writeln!(w, "i,j,value")?;
        let dim = m.dim();
        for i in 1..=dim {
            for j in 1..=dim {
                writeln!(w, "{},{},{:e}", i, j, m.get(i, j))?;
            }
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}
