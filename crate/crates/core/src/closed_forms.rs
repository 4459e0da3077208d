//! Population values of the distance variance, Gini mean difference and
//! the quantities built from them.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_vec_any, QuadOptions};
use crate::special::{
    hurwitz_zeta, hyp1f1, hyp2f1, hyp2f1_terminating_exact, ln_pochhammer, Negligible, SeriesControl,
};

/// Shared numerical settings for the population computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormContext {
    /// Stopping rule for the one-dimensional series (hypergeometric and inner sums).
    pub series: SeriesControl,
    /// Relative size below which a whole row of a double series is negligible.
    pub row_tolerance: f64,
    /// Cap on the number of rows of a double series.
    pub max_rows: usize,
    /// Rows summed explicitly in the Gamma series before the tail is extrapolated.
    pub gamma_rows: usize,
    pub quad: QuadOptions,
}

impl Default for ClosedFormContext {
    fn default() -> Self {
        ClosedFormContext {
            series: SeriesControl {
                tolerance: 1e-16,
                max_terms: 20_000,
            },
            row_tolerance: 1e-14,
            max_rows: 500,
            gamma_rows: 200,
            quad: QuadOptions {
                abs_tol: 1e-12,
                rel_tol: 1e-12,
                max_intervals: 4000,
            },
        }
    }
}

impl ClosedFormContext {
    /// `c_p = π^{(p+1)/2} / Γ((p+1)/2)`.
    pub fn cp(p: usize) -> f64 {
        Self::ln_cp(p).exp()
    }

    fn ln_cp(p: usize) -> f64 {
        let h = 0.5 * (p as f64 + 1.0);
        h * PI.ln() - ln_gamma(h)
    }
}

/// How a population distance variance was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DvarMethod {
    ClosedForm,
    Series,
    /// Double integral of the distribution function (or its lattice sum).
    Numeric,
}

pub fn dvar_method(d: &DistributionSpec) -> DvarMethod {
    match d {
        DistributionSpec::Gamma { .. }
        | DistributionSpec::Poisson { .. }
        | DistributionSpec::NegBinomial { .. } => DvarMethod::Series,
        DistributionSpec::StudentT { .. } => DvarMethod::Numeric,
        _ => DvarMethod::ClosedForm,
    }
}

/// Population distance variance `V²(X)`.
pub fn population_dvar(d: &DistributionSpec, ctx: &ClosedFormContext) -> Result<f64> {
    d.validate()?;
    use DistributionSpec as D;
    Ok(match *d {
        D::Bernoulli { prob } => {
            let pq = prob * (1.0 - prob);
            4.0 * pq * pq
        }
        D::Normal { sd, .. } => 4.0 * ((1.0 - 3f64.sqrt()) / PI + 1.0 / 3.0) * sd * sd,
        D::Uniform { lo, hi } => 2.0 * (hi - lo).powi(2) / 45.0,
        D::Laplace { alpha, .. } => 7.0 * alpha * alpha / 12.0,
        D::Pareto { alpha, xm } => {
            4.0 * alpha * alpha * xm * xm
                / ((alpha - 1.0) * (2.0 * alpha - 1.0).powi(2) * (3.0 * alpha - 2.0))
        }
        D::Exponential { rate } => 1.0 / (3.0 * rate * rate),
        D::Gamma { shape } => gamma_series(shape, ctx)?.value,
        D::Poisson { rate } => poisson_series(rate, ctx)?.value,
        D::NegBinomial { c, beta } => negbin_series(c, beta, ctx)?.value,
        D::MultiNormalIdentity { ref mean } => mvn_dvar(mean.len(), ctx)?,
        D::StudentT { .. } => population_dvar_numeric(d, ctx)?,
    })
}

/// Identity-covariance multivariate normal in dimension `p`.
pub fn mvn_dvar(p: usize, ctx: &ClosedFormContext) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let pf = p as f64;
    let ratio = (ClosedFormContext::ln_cp(p - 1) - ClosedFormContext::ln_cp(p)).exp();
    let gammas = (ln_gamma(0.5 * pf) + ln_gamma(0.5 * pf + 1.0) - 2.0 * ln_gamma(0.5 * (pf + 1.0))).exp();
    let f = hyp2f1(-0.5, -0.5, 0.5 * pf, 0.25, ctx.series)?;
    Ok(4.0 * PI * ratio * ratio * (gammas - 2.0 * f + 1.0))
}

/// A double-series value with its bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Rows summed explicitly.
    pub rows: usize,
    /// Extrapolated remainder beyond the last row (zero when the rows
    /// themselves met the stopping rule).
    pub tail: f64,
    /// Disagreement between two independent tail extrapolations.
    pub tail_uncertainty: f64,
}

/// `ln |A_{jk}(α)|` and its sign for the Gamma series.
fn gamma_ln_a(alpha: f64, j: usize, k: usize) -> Result<(f64, f64)> {
    let (jf, kf) = (j as f64, k as f64);
    let n = j + k - 2;
    let f = hyp2f1_terminating_exact(n, 1.0 - alpha - jf, 2.0 - 2.0 * alpha - jf - kf, 2.0)?;
    let ln = -(jf + kf) * LN_2
        + 0.5 * (ln_pochhammer(alpha, jf) + ln_pochhammer(alpha, kf) - ln_gamma(jf + 1.0) - ln_gamma(kf + 1.0))
        + ln_gamma(2.0 * alpha + jf + kf - 1.0)
        - ln_gamma(alpha + jf)
        - ln_gamma(alpha + kf)
        + f.ln_abs;
    Ok((ln, f.sign))
}

/// Gamma(α, 1): `V² = 2^{2(2−2α)} Σ_{j,k≥1} A_{jk}(α)²`.
///
/// Row sums `r(j) = A_{jj}² + 2Σ_{k<j} A_{jk}²` decay only algebraically
/// (like `j^{−5/2}` with half-integer corrections), so after
/// `ctx.gamma_rows` explicit rows the remainder is extrapolated: `r(j)` is
/// fitted by least squares on `j^{−e}`, `e ∈ {2.5, 3, …, 5}`, and the fit
/// is summed to infinity with Hurwitz zeta values. The hypergeometric factor
/// is evaluated exactly; in double precision it would be destroyed by
/// cancellation long before the tail is reached.
pub fn gamma_series(alpha: f64, ctx: &ClosedFormContext) -> Result<SeriesValue> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma shape must be positive, got {alpha}")));
    }
    let rows = ctx.gamma_rows.max(16);
    let ln_pref = 2.0 * (2.0 - 2.0 * alpha) * LN_2;
    let r: Vec<f64> = (1..=rows)
        .into_par_iter()
        .map(|j| -> Result<f64> {
            let mut acc = 0.0;
            for k in 1..=j {
                let (ln, _) = gamma_ln_a(alpha, j, k)?;
                let t = (2.0 * ln + ln_pref).exp();
                acc += if k == j { t } else { 2.0 * t };
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let head: f64 = r.iter().rev().sum();

    // Early exit when the rows already die out (not expected, but cheap to honour).
    let mut stop = Negligible::default();
    let mut partial = 0.0;
    for (i, &rj) in r.iter().enumerate() {
        partial += rj;
        if stop.push(rj, partial, ctx.row_tolerance) {
            return Ok(SeriesValue {
                value: partial,
                rows: i + 1,
                tail: 0.0,
                tail_uncertainty: 0.0,
            });
        }
    }

    const EXPONENTS: [f64; 6] = [2.5, 3.0, 3.5, 4.0, 4.5, 5.0];
    let tail_a = algebraic_tail(&r, rows / 4, &EXPONENTS)?;
    let tail_b = algebraic_tail(&r, rows / 2, &EXPONENTS[..4])?;
    let value = head + tail_a;
    if !value.is_finite() || value < 0.0 {
        return Err(Error::SeriesDivergence {
            terms: rows,
            partial: head,
            last_term: r[rows - 1],
        });
    }
    Ok(SeriesValue {
        value,
        rows,
        tail: tail_a,
        tail_uncertainty: (tail_a - tail_b).abs(),
    })
}

/// Least-squares fit of `r(j) ≈ Σ_e a_e j^{−e}` over `j ∈ [from, N]`
/// (1-based) and the implied remainder `Σ_{j>N} r(j)`.
fn algebraic_tail(r: &[f64], from: usize, exponents: &[f64]) -> Result<f64> {
    let n = r.len();
    let from = from.max(1);
    let nf = n as f64;
    let m = n - from + 1;
    let design = DMatrix::from_fn(m, exponents.len(), |i, c| ((from + i) as f64 / nf).powf(-exponents[c]));
    let rhs = DVector::from_fn(m, |i, _| r[from + i - 1]);
    let coef = design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Unsupported(format!("tail fit failed: {e}")))?;
    let mut tail = 0.0;
    for (c, &e) in exponents.iter().enumerate() {
        // a_e = coef_e · N^e, and Σ_{j>N} j^{−e} = ζ(e, N+1).
        tail += coef[c] * nf.powf(e) * hurwitz_zeta(e, nf + 1.0)?;
    }
    Ok(tail)
}

/// Runs a double series with nonnegative terms row by row; `row(j)` returns
/// the whole contribution of row `j`. Stops once three consecutive rows are
/// negligible. Since `V² ≤ σ²`, a partial sum beyond `bound` proves the
/// series cannot converge to a distance variance and is reported as
/// divergence, as is reaching the row cap.
fn nonnegative_rows(
    ctx: &ClosedFormContext,
    bound: f64,
    mut row: impl FnMut(usize) -> Result<f64>,
) -> Result<SeriesValue> {
    let mut sum = 0.0;
    let mut stop = Negligible::default();
    let mut last = 0.0f64;
    for j in 1..=ctx.max_rows {
        let rj = row(j)?;
        sum += rj;
        if !sum.is_finite() || sum > bound * (1.0 + 1e-9) {
            return Err(Error::SeriesDivergence {
                terms: j,
                partial: sum,
                last_term: rj,
            });
        }
        if stop.push(rj, sum, ctx.row_tolerance) {
            return Ok(SeriesValue {
                value: sum,
                rows: j,
                tail: 0.0,
                tail_uncertainty: 0.0,
            });
        }
        last = rj;
    }
    Err(Error::SeriesDivergence {
        terms: ctx.max_rows,
        partial: sum,
        last_term: last,
    })
}

/// Poisson(λ): `V² = Σ_{j,k≥1} 4^{j+k−1} λ^{j+k} A_{jk}² / (j! k!)`.
///
/// The coefficient `A_{jk}` is written for `j ≥ k`; the series is summed
/// with `A_{jk} = A_{kj}` for `k > j`, which is the reading that reproduces
/// the lattice value of the double integral.
pub fn poisson_series(lambda: f64, ctx: &ClosedFormContext) -> Result<SeriesValue> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("poisson rate must be positive, got {lambda}")));
    }
    let ln4l = (4.0 * lambda).ln();
    nonnegative_rows(ctx, lambda, |j| {
        let jf = j as f64;
        // h_l = ₁F₁(j−l−½; j; −4λ), independent of k.
        let h: Vec<f64> = (0..=j / 2)
            .map(|l| hyp1f1(jf - l as f64 - 0.5, jf, -4.0 * lambda, ctx.series))
            .collect::<Result<_>>()?;
        let mut acc = 0.0;
        for k in 1..=j {
            let kf = k as f64;
            let d = j - k;
            let mut a = 0.0;
            for l in 0..=d / 2 {
                let lf = l as f64;
                let ln_mag = ln_binom(d as f64, 2.0 * lf) + ln_pochhammer(0.5, lf)
                    + ln_pochhammer(0.5, jf - lf - 1.0)
                    - ln_gamma(jf);
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                a += sign * ln_mag.exp() * h[l];
            }
            if a == 0.0 {
                continue;
            }
            let ln_t = (jf + kf) * ln4l - LN_2 * 2.0 - ln_gamma(jf + 1.0) - ln_gamma(kf + 1.0)
                + 2.0 * a.abs().ln();
            let t = ln_t.exp();
            acc += if k == j { t } else { 2.0 * t };
        }
        Ok(acc)
    })
}

fn ln_binom(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Negative binomial `(c, β)`:
/// `V² = (1−c)^{4β} Σ_{j,k≥1} (β)_j (β)_k / (j! k!) (1+c²)^{−2β−2j} 2^{2k} c^{j+k} A_{jk}²`
/// with the triple-sum coefficient `A_{jk}` taken literally: the factor
/// multiplying `x^l / l!`, `x = 2c/(1+c²)`, is the rising factorial
/// `(β+j)_l`, the `m`-sum weight is `(m)_{|l₁−l₂|}`, and `A_{jk} = 0`
/// whenever `k > j` (empty outer sums).
pub fn negbin_series(c: f64, beta: f64, ctx: &ClosedFormContext) -> Result<SeriesValue> {
    if !(c > 0.0 && c < 1.0) || !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "negbinomial requires 0 < c < 1 and beta > 0, got c={c}, beta={beta}"
        )));
    }
    let ln_pref = 4.0 * beta * (-c).ln_1p();
    let mut tables = NegBinTables::new(c, beta, ctx);
    let sigma2 = beta * c / (1.0 - c).powi(2);
    nonnegative_rows(ctx, sigma2, |j| {
        let jf = j as f64;
        let mut acc = 0.0;
        for k in 1..=j {
            let kf = k as f64;
            let a = tables.a(j, k)?;
            if a == 0.0 {
                continue;
            }
            let ln_t = ln_pref + ln_pochhammer(beta, jf) + ln_pochhammer(beta, kf)
                - ln_gamma(jf + 1.0)
                - ln_gamma(kf + 1.0)
                - (2.0 * beta + 2.0 * jf) * (c * c).ln_1p()
                + 2.0 * kf * LN_2
                + (jf + kf) * c.ln()
                + 2.0 * a.abs().ln();
            // Only j ≥ k contributes, so each term is counted once.
            acc += ln_t.exp();
        }
        Ok(acc)
    })
}

/// Cached pieces of the negative-binomial coefficient.
struct NegBinTables<'a> {
    c: f64,
    beta: f64,
    ln_x: f64,
    ctx: &'a ClosedFormContext,
    /// `h[K][l] = ₂F₁(−l, K−½; K; 2)`, grown on demand.
    h: Vec<Vec<f64>>,
    /// `inner[(j, K)] = Σ_l (β+j)_l x^l / l! · h[K][l]`.
    inner: std::collections::HashMap<(usize, usize), f64>,
}

impl<'a> NegBinTables<'a> {
    const MAX_L: usize = 4000;

    fn new(c: f64, beta: f64, ctx: &'a ClosedFormContext) -> Self {
        NegBinTables {
            c,
            beta,
            ln_x: (2.0 * c / (1.0 + c * c)).ln(),
            ctx,
            h: Vec::new(),
            inner: std::collections::HashMap::new(),
        }
    }

    fn h(&mut self, big_k: usize, l: usize) -> Result<f64> {
        if self.h.len() <= big_k {
            self.h.resize(big_k + 1, Vec::new());
        }
        let row = &mut self.h[big_k];
        while row.len() <= l {
            let kf = big_k as f64;
            row.push(hyp2f1_terminating_exact(row.len(), kf - 0.5, kf, 2.0)?.value());
        }
        Ok(row[l])
    }

    fn inner(&mut self, j: usize, big_k: usize) -> Result<f64> {
        if let Some(&v) = self.inner.get(&(j, big_k)) {
            return Ok(v);
        }
        let bj = self.beta + j as f64;
        let mut sum = 0.0;
        let mut stop = Negligible::default();
        let mut last = f64::NAN;
        // Terms rise until l ≈ (β+j)x/(1−x); only stop after the peak.
        let x = self.ln_x.exp();
        let peak = (bj * x / (1.0 - x)).ceil() as usize;
        for l in 0..Self::MAX_L {
            let lf = l as f64;
            let term = (ln_pochhammer(bj, lf) - ln_gamma(lf + 1.0) + lf * self.ln_x).exp() * self.h(big_k, l)?;
            sum += term;
            last = term;
            if !sum.is_finite() {
                break;
            }
            if l > peak && stop.push(term, sum, self.ctx.series.tolerance.max(1e-15)) {
                self.inner.insert((j, big_k), sum);
                return Ok(sum);
            }
        }
        Err(Error::SeriesDivergence {
            terms: Self::MAX_L,
            partial: sum,
            last_term: last,
        })
    }

    fn a(&mut self, j: usize, k: usize) -> Result<f64> {
        let d = j - k;
        let kf = k as f64;
        // Σ over l₁, l₂ depends on the inner sums only through e = |l₁ − l₂|.
        let mut by_e = vec![0.0; d + 1];
        for (e, slot) in by_e.iter_mut().enumerate() {
            let mut total = 0.0;
            for m in 0..=e {
                let mf = m as f64;
                let poch = crate::special::pochhammer(mf, e);
                if poch == 0.0 {
                    continue;
                }
                let w = (-2f64).powi(m as i32) * poch / (factorial(e - m) * factorial(2 * m))
                    * ((kf + mf - 1.0) * LN_2 + ln_pochhammer(0.5, kf + mf - 1.0) - ln_gamma(kf + mf)).exp();
                total += w * self.inner(j, k + m)?;
            }
            *slot = total;
        }
        let mut a = 0.0;
        for l1 in 0..=d {
            for l2 in 0..=d {
                let e = l1.abs_diff(l2);
                let coef = (ln_binom(d as f64, l1 as f64) + ln_binom(d as f64, l2 as f64)).exp()
                    * (-self.c).powi(l1 as i32)
                    * (-1f64).powi(l2 as i32)
                    * factorial(e);
                a += coef * by_e[e];
            }
        }
        Ok(a)
    }
}

/// `8 Σ_{m<m'} F_m² S_{m'}² + 4 Σ_m F_m² S_m²` for an integer-valued law,
/// the double integral evaluated exactly on the lattice.
fn lattice_dvar(d: &DistributionSpec) -> Result<f64> {
    let (f, s) = lattice_cdf(d)?;
    let mut suffix = 0.0;
    let mut total = 0.0;
    for m in (0..f.len()).rev() {
        let f2 = f[m] * f[m];
        total += f2 * suffix + 0.5 * f2 * s[m] * s[m];
        suffix += s[m] * s[m];
    }
    Ok(8.0 * total)
}

/// Distance variance `T1 + T2 − 2 T3` of a law with finitely many atoms
/// `(value, probability)`, by direct summation.
pub fn finite_support_dvar(atoms: &[(f64, f64)]) -> Result<f64> {
    if atoms.is_empty() {
        return Err(Error::Empty("no atoms".into()));
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if atoms.iter().any(|&(x, p)| !x.is_finite() || !(p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(
            "atoms need finite values and probabilities summing to 1".into(),
        ));
    }
    let (mut t1, mut delta, mut t3) = (0.0, 0.0, 0.0);
    for &(x, p) in atoms {
        let mut psi = 0.0;
        for &(y, q) in atoms {
            let d = (x - y).abs();
            t1 += p * q * d * d;
            psi += q * d;
        }
        delta += p * psi;
        t3 += p * psi * psi;
    }
    Ok(t1 + delta * delta - 2.0 * t3)
}

/// `F(m)` and `1 − F(m)` on `m = 0, 1, …` until the survival mass vanishes.
fn lattice_cdf(d: &DistributionSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    const CAP: usize = 10_000_000;
    let mut f = Vec::new();
    let mut s = Vec::new();
    for m in 0..CAP {
        let sm = d.sf(m as f64);
        f.push(d.cdf(m as f64));
        s.push(sm);
        if sm < 1e-300 || (sm < 1e-20 && m as f64 > d.mean()?) {
            return Ok((f, s));
        }
    }
    Err(Error::SeriesDivergence {
        terms: CAP,
        partial: f64::NAN,
        last_term: s[CAP - 1],
    })
}

/// `V²` from the double integral `8∬_{x<y} F(x)² (1 − F(y))² dx dy`:
/// nested adaptive quadrature for continuous families, an exact lattice
/// sum for integer-valued ones.
pub fn population_dvar_numeric(d: &DistributionSpec, ctx: &ClosedFormContext) -> Result<f64> {
    d.validate()?;
    d.require_univariate()?;
    if d.is_discrete() {
        return lattice_dvar(d);
    }
    let (lo, hi) = d.support();
    let inner_opts = QuadOptions {
        abs_tol: ctx.quad.abs_tol * 1e-2,
        rel_tol: ctx.quad.rel_tol,
        max_intervals: ctx.quad.max_intervals,
    };
    // G(x) = ∫_x^hi S(y)² dy, outer ∫ F(x)² G(x) dx.
    let err = std::cell::Cell::new(None);
    let outer = integrate(
        |x| {
            let f = d.cdf(x);
            if f == 0.0 {
                return 0.0;
            }
            match integrate(|y| d.sf(y).powi(2), x, hi, inner_opts) {
                Ok(g) => f * f * g,
                Err(e) => {
                    err.set(Some(e.to_string()));
                    f64::NAN
                }
            }
        },
        lo,
        hi,
        ctx.quad,
    );
    if let Some(msg) = err.take() {
        return Err(Error::Unsupported(format!("inner quadrature failed: {msg}")));
    }
    Ok(8.0 * outer?)
}

/// Gini mean difference `Δ = E|X − X'|`.
pub fn population_gini(d: &DistributionSpec, ctx: &ClosedFormContext) -> Result<f64> {
    d.validate()?;
    use DistributionSpec as D;
    Ok(match *d {
        D::Bernoulli { prob } => 2.0 * prob * (1.0 - prob),
        D::Normal { sd, .. } => 2.0 * sd / PI.sqrt(),
        D::Uniform { lo, hi } => (hi - lo) / 3.0,
        D::Laplace { alpha, .. } => 1.5 * alpha,
        D::Exponential { rate } => 1.0 / rate,
        D::Pareto { alpha, xm } => 2.0 * alpha * xm / ((alpha - 1.0) * (2.0 * alpha - 1.0)),
        D::Gamma { shape } => 2.0 * (ln_gamma(shape + 0.5) - ln_gamma(shape)).exp() / PI.sqrt(),
        D::MultiNormalIdentity { ref mean } => {
            let p = mean.len() as f64;
            2.0 * (ln_gamma(0.5 * (p + 1.0)) - ln_gamma(0.5 * p)).exp()
        }
        D::Poisson { .. } | D::NegBinomial { .. } => {
            let (f, s) = lattice_cdf(d)?;
            2.0 * f.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>()
        }
        D::StudentT { .. } => gini_quadrature(d, ctx)?,
    })
}

/// `Δ = 2∫ F(x)(1 − F(x)) dx`.
pub fn gini_quadrature(d: &DistributionSpec, ctx: &ClosedFormContext) -> Result<f64> {
    d.require_univariate()?;
    let (lo, hi) = d.support();
    let kinks = d.kinks();
    let mut total = 0.0;
    for (a, b) in split(lo, hi, &kinks) {
        total += integrate(|x| d.cdf(x) * d.sf(x), a, b, ctx.quad)?;
    }
    Ok(2.0 * total)
}

pub(crate) fn split(lo: f64, hi: f64, kinks: &[f64]) -> Vec<(f64, f64)> {
    let mut pts = vec![lo];
    pts.extend(kinks.iter().copied().filter(|&k| k > lo && k < hi));
    pts.push(hi);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

pub fn population_variance(d: &DistributionSpec) -> Result<f64> {
    d.validate()?;
    d.variance()
}

/// `E g(X)` for a univariate family, by quadrature against the density or a
/// lattice sum.
pub fn expect<const N: usize>(
    d: &DistributionSpec,
    g: impl Fn(f64) -> [f64; N],
    opts: QuadOptions,
) -> Result<[f64; N]> {
    d.require_univariate()?;
    if d.is_discrete() {
        let mut out = [0.0; N];
        let mut m = 0u64;
        loop {
            let p = d.pmf(m);
            if p > 0.0 {
                let v = g(m as f64);
                for i in 0..N {
                    out[i] += p * v[i];
                }
            }
            m += 1;
            if d.sf(m as f64) < 1e-18 && m as f64 > d.mean()? {
                return Ok(out);
            }
            if m > 10_000_000 {
                return Err(Error::SeriesDivergence {
                    terms: m as usize,
                    partial: out[0],
                    last_term: p,
                });
            }
        }
    }
    let (lo, hi) = d.support();
    let mut out = [0.0; N];
    for (a, b) in split(lo, hi, &d.kinks()) {
        let est = integrate_vec_any(
            |x| {
                let w = d.pdf(x);
                let mut v = [0.0; N];
                if w == 0.0 || !w.is_finite() {
                    return v;
                }
                let gx = g(x);
                for i in 0..N {
                    v[i] = gx[i] * w;
                }
                v
            },
            a,
            b,
            opts,
        )?;
        for i in 0..N {
            out[i] += est.value[i];
        }
    }
    Ok(out)
}

/// `T3 = E|X − X'|·|X − X''| = E ψ(X)²` with `ψ(x) = E|x − X|`.
pub fn population_t3(d: &DistributionSpec, ctx: &ClosedFormContext) -> Result<f64> {
    d.validate()?;
    Ok(expect(d, |x| [d.mean_abs_from(x).powi(2)], ctx.quad)?[0])
}

/// `J = ∭ (x − y)(z − x) f(z) f(y) f(x)` over `y < x < z`, evaluated as
/// `(E ψ(X)² − σ²) / 4` with `ψ(x) = E|x − X|`.
pub fn j_integral(d: &DistributionSpec, ctx: &ClosedFormContext) -> Result<f64> {
    let sigma2 = population_variance(d)?;
    Ok((population_t3(d, ctx)? - sigma2) / 4.0)
}

/// Finite-sample variance of the unbiased Gini mean difference:
/// `(4(n−1)σ² + 16(n−2)J − 2(2n−3)Δ²) / (n(n−1))`.
pub fn gini_variance_finite_n(d: &DistributionSpec, n: usize, ctx: &ClosedFormContext) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooSmall {
            what: "Gini variance",
            min: 2,
            n,
        });
    }
    d.require_univariate()?;
    let sigma2 = population_variance(d)?;
    let j = j_integral(d, ctx)?;
    let delta = population_gini(d, ctx)?;
    let nf = n as f64;
    Ok((4.0 * (nf - 1.0) * sigma2 + 16.0 * (nf - 2.0) * j - 2.0 * (2.0 * nf - 3.0) * delta * delta)
        / (nf * (nf - 1.0)))
}

/// Asymptotic variance of the unbiased Gini mean difference,
/// `4σ² − 2V² − 2Δ²`.
pub fn asv_gini(d: &DistributionSpec, ctx: &ClosedFormContext) -> Result<f64> {
    d.require_univariate()?;
    let sigma2 = population_variance(d)?;
    let v2 = population_dvar(d, ctx)?;
    let delta = population_gini(d, ctx)?;
    Ok(4.0 * sigma2 - 2.0 * v2 - 2.0 * delta * delta)
}

/// Everything the command-line front end reports for a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationSummary {
    pub distribution: String,
    pub method: DvarMethod,
    pub v_sq: f64,
    pub v: f64,
    pub delta: f64,
    pub sigma_sq: Option<f64>,
    pub asv_gini: Option<f64>,
}

pub fn population_summary(d: &DistributionSpec, numeric: bool, ctx: &ClosedFormContext) -> Result<PopulationSummary> {
    let (v_sq, method) = if numeric {
        (population_dvar_numeric(d, ctx)?, DvarMethod::Numeric)
    } else {
        (population_dvar(d, ctx)?, dvar_method(d))
    };
    let delta = population_gini(d, ctx)?;
    let sigma_sq = match d.variance() {
        Ok(v) => Some(v),
        Err(Error::Infinite(_)) => None,
        Err(e) => return Err(e),
    };
    let asv_gini = match sigma_sq {
        Some(s2) if d.dim() == 1 => Some(4.0 * s2 - 2.0 * v_sq - 2.0 * delta * delta),
        _ => None,
    };
    Ok(PopulationSummary {
        distribution: d.to_string(),
        method,
        v_sq,
        v: v_sq.sqrt(),
        delta,
        sigma_sq,
        asv_gini,
    })
}
