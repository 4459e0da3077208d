//! Large-sample theory of the sample distance variance: the ψ functions, the
//! covariance matrix `M` of the limiting normal law, `γ`, asymptotic variances
//! and asymptotic relative efficiencies against the maximum likelihood scale
//! estimator.
//!
//! With `ψ1(x) = E(x−Y)²`, `ψ4(x) = E|x−Y|`, `ψ2 = ψ4²`, `ψ3(x) = E|x−Y|ψ4(Y)`
//! and `φ = ψ1 − ψ2 − 2ψ3`, the pair `(V_n² − V², Δ_n − Δ)` is asymptotically
//! normal with covariance `M/n`, where `m11 = 4 Var φ(X)`,
//! `m12 = 4 Cov(φ(X), ψ4(X))`, `m22 = 4 Var ψ4(X)`, and
//! `γ = m11 + 4Δ m12 + 4Δ² m22 = 4 Var(φ(X) + 2Δψ4(X))`.

use std::collections::HashMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::closed_forms::{expect, population_dvar, population_gini, split, ClosedFormContext};
use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::quad::{integrate_vec, integrate_vec_any, QuadOptions};
use crate::simulate::{substream, Sampler};

pub const MOMENT_CONDITION_NOTE: &str = "moment condition not satisfied: the fourth moment is infinite";

/// The ψ functions of one univariate family.
#[derive(Debug, Clone)]
pub struct PsiProfile {
    d: DistributionSpec,
    mean: f64,
    sigma_sq: f64,
    delta: f64,
    /// `E ψ4(X)²`
    t3: f64,
    inner: QuadOptions,
}

pub fn psi_profile(d: &DistributionSpec) -> Result<PsiProfile> {
    PsiProfile::new(d, &ClosedFormContext::default())
}

impl PsiProfile {
    pub fn new(d: &DistributionSpec, ctx: &ClosedFormContext) -> Result<Self> {
        d.validate()?;
        d.require_univariate()?;
        let sigma_sq = d.variance()?;
        let mean = d.mean()?;
        let delta = population_gini(d, ctx)?;
        let t3 = expect(d, |x| [d.mean_abs_from(x).powi(2)], ctx.quad)?[0];
        Ok(PsiProfile {
            d: d.clone(),
            mean,
            sigma_sq,
            delta,
            t3,
            inner: QuadOptions {
                abs_tol: 1e-12,
                rel_tol: 1e-11,
                max_intervals: 2000,
            },
        })
    }

    pub fn distribution(&self) -> &DistributionSpec {
        &self.d
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    /// `E|X−X'|·|X−X''| = E ψ4(X)²`.
    pub fn t3(&self) -> f64 {
        self.t3
    }

    /// `E(x−Y)² = (x − μ)² + σ²`.
    pub fn psi1(&self, x: f64) -> f64 {
        (x - self.mean).powi(2) + self.sigma_sq
    }

    /// `E|x−Y||x−Z| = ψ4(x)²` for independent `Y`, `Z`.
    pub fn psi2(&self, x: f64) -> f64 {
        self.psi4(x).powi(2)
    }

    /// `E|x−Y|·ψ4(Y)`, by quadrature split at `x`.
    pub fn psi3(&self, x: f64) -> Result<f64> {
        let d = &self.d;
        let g = |y: f64| (x - y).abs() * d.mean_abs_from(y);
        if d.is_discrete() {
            return Ok(expect(d, |y| [g(y)], self.inner)?[0]);
        }
        let (lo, hi) = d.support();
        let mut cuts = d.kinks();
        cuts.push(x);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for (a, b) in split(lo, hi, &cuts) {
            total += integrate_vec_any(
                |y| {
                    let w = d.pdf(y);
                    if w == 0.0 {
                        [0.0]
                    } else {
                        [g(y) * w]
                    }
                },
                a,
                b,
                self.inner,
            )?
            .value[0];
        }
        Ok(total)
    }

    /// `E|x−Y|`.
    pub fn psi4(&self, x: f64) -> f64 {
        self.d.mean_abs_from(x)
    }

    /// `φ(x) = ψ1(x) − ψ2(x) − 2ψ3(x)`.
    pub fn phi(&self, x: f64) -> Result<f64> {
        Ok(self.psi1(x) - self.psi2(x) - 2.0 * self.psi3(x)?)
    }

    /// `E φ(X) = 2σ² − 3 T3`, since `E ψ3(X) = E ψ2(X) = T3`.
    pub fn phi_mean(&self) -> f64 {
        2.0 * self.sigma_sq - 3.0 * self.t3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticMethod {
    Quadrature,
    MonteCarlo,
}

impl AsymptoticMethod {
    pub fn name(self) -> &'static str {
        match self {
            AsymptoticMethod::Quadrature => "quadrature",
            AsymptoticMethod::MonteCarlo => "monte-carlo",
        }
    }
}

impl FromStr for AsymptoticMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(AsymptoticMethod::Quadrature),
            "monte-carlo" | "mc" => Ok(AsymptoticMethod::MonteCarlo),
            _ => Err(Error::InvalidParameter(format!(
                "unknown method '{s}' (expected quadrature or monte-carlo)"
            ))),
        }
    }
}

/// Monte-Carlo settings: seed and total number of draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloOptions {
    pub seed: u64,
    pub draws: usize,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions {
            seed: 20_240_601,
            draws: 10_000_000,
        }
    }
}

/// `γ` estimated from the first `draws` Monte-Carlo draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityPoint {
    pub draws: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub distribution: String,
    pub method: AsymptoticMethod,
    pub v_sq: f64,
    pub delta: f64,
    pub sigma_sq: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
    pub gamma: f64,
    /// Asymptotic variance of `√n (V_n² − V²)`; equals `gamma`.
    pub asv_v_sq: f64,
    /// Asymptotic variance of `√n (V_n − V)`, `γ / (4V²)`.
    pub asv_v_sd: f64,
    /// Monte-Carlo standard error of `gamma`.
    pub standard_error: Option<f64>,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    pub moment_condition: bool,
    pub note: Option<String>,
    /// `γ` on growing prefixes of the draws (Monte Carlo only).
    pub stability: Vec<StabilityPoint>,
}

impl AsymptoticReport {
    /// Standard error of `asv_v_sd`.
    pub fn asv_v_sd_standard_error(&self) -> Option<f64> {
        self.standard_error.map(|se| se / (4.0 * self.v_sq))
    }

    /// Flat key/value form; stability points become `gamma_at_<draws>` keys.
    pub fn to_flat_json(&self) -> Value {
        let mut map = match serde_json::to_value(self) {
            Ok(Value::Object(m)) => m,
            _ => Map::new(),
        };
        map.remove("stability");
        for p in &self.stability {
            map.insert(format!("gamma_at_{}", p.draws), Value::from(p.gamma));
        }
        Value::Object(map)
    }
}

/// Full asymptotic report for a univariate family.
///
/// Quadrature requires a finite fourth moment; otherwise only the Monte-Carlo
/// method runs and the report carries [`MOMENT_CONDITION_NOTE`].
pub fn asymptotic_report(
    d: &DistributionSpec,
    method: AsymptoticMethod,
    mc: MonteCarloOptions,
    ctx: &ClosedFormContext,
) -> Result<AsymptoticReport> {
    d.validate()?;
    if d.dim() != 1 {
        return Err(Error::Unsupported("asymptotic variances for multivariate families".into()));
    }
    let moment_condition = d.has_finite_fourth_moment();
    if method == AsymptoticMethod::Quadrature && !moment_condition {
        return Err(Error::Unsupported(format!(
            "{MOMENT_CONDITION_NOTE}; use the monte-carlo method for {d}"
        )));
    }
    let profile = PsiProfile::new(d, ctx)?;
    let v_sq = population_dvar(d, ctx)?;
    let t1 = 2.0 * profile.sigma_sq;
    let t2 = profile.delta * profile.delta;
    let mut report = AsymptoticReport {
        distribution: d.to_string(),
        method,
        v_sq,
        delta: profile.delta,
        sigma_sq: profile.sigma_sq,
        t1,
        t2,
        t3: profile.t3,
        m11: f64::NAN,
        m12: f64::NAN,
        m22: f64::NAN,
        gamma: f64::NAN,
        asv_v_sq: f64::NAN,
        asv_v_sd: f64::NAN,
        standard_error: None,
        seed: None,
        draws: None,
        moment_condition,
        note: (!moment_condition).then(|| MOMENT_CONDITION_NOTE.to_string()),
        stability: Vec::new(),
    };
    match method {
        AsymptoticMethod::Quadrature => {
            let m = quadrature_moments(&profile, ctx)?;
            report.m11 = m[0];
            report.m12 = m[1];
            report.m22 = m[2];
            let delta = profile.delta;
            report.gamma = m[0] + 4.0 * delta * m[1] + 4.0 * delta * delta * m[2];
        }
        AsymptoticMethod::MonteCarlo => {
            let r = monte_carlo_moments(&profile, mc)?;
            report.m11 = r.m11;
            report.m12 = r.m12;
            report.m22 = r.m22;
            report.gamma = r.gamma;
            report.standard_error = Some(r.gamma_se);
            report.seed = Some(mc.seed);
            report.draws = Some(r.draws);
            report.stability = r.stability;
        }
    }
    report.asv_v_sq = report.gamma;
    report.asv_v_sd = report.gamma / (4.0 * v_sq);
    Ok(report)
}

/// `[m11, m12, m22]` by outer quadrature of centred ψ combinations.
fn quadrature_moments(p: &PsiProfile, ctx: &ClosedFormContext) -> Result<[f64; 3]> {
    let phi_mean = p.phi_mean();
    let failure = std::cell::Cell::new(None);
    let outer = QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-9,
        max_intervals: ctx.quad.max_intervals,
    };
    let r = expect(
        &p.d,
        |x| {
            let a = match p.phi(x) {
                Ok(v) => v - phi_mean,
                Err(e) => {
                    failure.set(Some(e.to_string()));
                    0.0
                }
            };
            let b = p.psi4(x) - p.delta;
            [a * a, a * b, b * b]
        },
        outer,
    )?;
    if let Some(msg) = failure.take() {
        return Err(Error::Unsupported(format!("inner ψ3 quadrature failed: {msg}")));
    }
    Ok([4.0 * r[0], 4.0 * r[1], 4.0 * r[2]])
}

/// `ψ3` for a continuous family from tabulated running integrals
/// `G0(x) = ∫_{−∞}^x ψ4 f` and `G1(x) = ∫_{−∞}^x y ψ4 f`:
/// `ψ3(x) = x(2G0(x) − Δ) − (2G1(x) − G1(∞))`.
///
/// Nodes sit at quantiles spaced uniformly on a `tanh` scale, so the tails are
/// covered down to probability ~1e-12; between nodes the integrals are cubic
/// Hermite interpolants using their exact derivatives `ψ4 f` and `x ψ4 f`.
struct Psi3Table {
    x: Vec<f64>,
    g0: Vec<f64>,
    g1: Vec<f64>,
    d0: Vec<f64>,
    d1: Vec<f64>,
    g1_total: f64,
}

const TABLE_NODES: usize = 4001;
const TABLE_SPAN: f64 = 13.5;

/// Solves `F(x) = u` (`upper == false`) or `S(x) = u` (`upper == true`) by
/// bisection, for `u ≤ ½`.
fn quantile_bisect(d: &DistributionSpec, u: f64, upper: bool, centre: f64) -> f64 {
    let (lo, hi) = d.support();
    // g(x) is increasing in x and crosses zero at the quantile.
    let g = |x: f64| if upper { u - d.sf(x) } else { d.cdf(x) - u };
    let mut a = if lo.is_finite() { lo } else { centre - 1.0 };
    let mut b = if hi.is_finite() { hi } else { centre + 1.0 };
    let mut w = 1.0;
    while !lo.is_finite() && g(a) > 0.0 {
        w *= 2.0;
        a = centre - w;
    }
    w = 1.0;
    while !hi.is_finite() && g(b) < 0.0 {
        w *= 2.0;
        b = centre + w;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

impl Psi3Table {
    fn build(p: &PsiProfile) -> Result<Self> {
        let d = &p.d;
        let centre = p.mean;
        let mut x: Vec<f64> = (0..TABLE_NODES)
            .into_par_iter()
            .map(|j| {
                let s = -TABLE_SPAN + 2.0 * TABLE_SPAN * j as f64 / (TABLE_NODES - 1) as f64;
                // ½(1 + tanh s) and its complement, each without cancellation
                let tail = 1.0 / (1.0 + (2.0 * s.abs()).exp());
                quantile_bisect(d, tail, s > 0.0, centre)
            })
            .collect();
        let (lo, hi) = d.support();
        let (first, last) = (x[0], x[x.len() - 1]);
        x.extend(d.kinks().into_iter().filter(|&k| k > first && k < last));
        x.sort_by(f64::total_cmp);
        x.dedup();
        x.retain(|&v| v > lo && v < hi);

        let integrand = |y: f64| {
            let w = d.pdf(y);
            if w == 0.0 {
                return [0.0, 0.0];
            }
            let v = d.mean_abs_from(y) * w;
            [v, y * v]
        };
        let opts = QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_intervals: 200,
        };
        let cells: Vec<[f64; 2]> = x
            .par_windows(2)
            .map(|w| integrate_vec(integrand, w[0], w[1], opts).map(|e| e.value))
            .collect::<Result<_>>()?;
        let left = integrate_vec_any(integrand, lo, x[0], p.inner)?.value;
        let right = integrate_vec_any(integrand, x[x.len() - 1], hi, p.inner)?.value;
        let mut g0 = Vec::with_capacity(x.len());
        let mut g1 = Vec::with_capacity(x.len());
        let (mut s0, mut s1) = (left[0], left[1]);
        g0.push(s0);
        g1.push(s1);
        for c in &cells {
            s0 += c[0];
            s1 += c[1];
            g0.push(s0);
            g1.push(s1);
        }
        let g1_total = s1 + right[1];
        let (d0, d1) = x.iter().map(|&v| integrand(v)).map(|r| (r[0], r[1])).unzip();
        Ok(Psi3Table {
            x,
            g0,
            g1,
            d0,
            d1,
            g1_total,
        })
    }

    /// `ψ3(x)` inside the tabulated range, `None` outside it.
    fn psi3(&self, x: f64, delta: f64) -> Option<f64> {
        let n = self.x.len();
        if !(x >= self.x[0] && x <= self.x[n - 1]) {
            return None;
        }
        let i = self.x.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let t = (x - self.x[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let herm = |y: &[f64], m: &[f64]| h00 * y[i] + h10 * h * m[i] + h01 * y[i + 1] + h11 * h * m[i + 1];
        let g0 = herm(&self.g0, &self.d0);
        let g1 = herm(&self.g1, &self.d1);
        Some(x * (2.0 * g0 - delta) - (2.0 * g1 - self.g1_total))
    }
}

const MC_BLOCK: usize = 100_000;

/// Shifted power sums for one block of draws, with `a = φ − Eφ`,
/// `b = ψ4 − Δ` and `c = a + 2Δb`.
#[derive(Debug, Clone, Copy, Default)]
struct BlockSums {
    n: f64,
    a: f64,
    b: f64,
    aa: f64,
    ab: f64,
    bb: f64,
    c: f64,
    cc: f64,
    ccc: f64,
    cccc: f64,
}

impl BlockSums {
    fn merge(&mut self, o: &BlockSums) {
        self.n += o.n;
        self.a += o.a;
        self.b += o.b;
        self.aa += o.aa;
        self.ab += o.ab;
        self.bb += o.bb;
        self.c += o.c;
        self.cc += o.cc;
        self.ccc += o.ccc;
        self.cccc += o.cccc;
    }

    fn gamma(&self) -> f64 {
        let mc = self.c / self.n;
        4.0 * (self.cc - self.n * mc * mc) / (self.n - 1.0)
    }
}

struct McMoments {
    m11: f64,
    m12: f64,
    m22: f64,
    gamma: f64,
    gamma_se: f64,
    draws: usize,
    stability: Vec<StabilityPoint>,
}

fn monte_carlo_moments(p: &PsiProfile, mc: MonteCarloOptions) -> Result<McMoments> {
    if mc.draws < 2 * MC_BLOCK {
        return Err(Error::TooSmall {
            what: "Monte-Carlo draws",
            min: 2 * MC_BLOCK,
            n: mc.draws,
        });
    }
    let sampler = Sampler::new(&p.d)?;
    let table = if p.d.is_discrete() {
        None
    } else {
        Some(Psi3Table::build(p)?)
    };
    let phi_mean = p.phi_mean();
    let delta = p.delta;
    let blocks = mc.draws / MC_BLOCK;
    let sums: Vec<BlockSums> = (0..blocks)
        .into_par_iter()
        .map(|block| -> Result<BlockSums> {
            let mut rng = substream(mc.seed, block as u64);
            let mut cache: HashMap<u64, f64> = HashMap::new();
            let mut s = BlockSums::default();
            for _ in 0..MC_BLOCK {
                let x = sampler.draw(&mut rng);
                let psi3 = match &table {
                    Some(t) => match t.psi3(x, delta) {
                        Some(v) => v,
                        None => p.psi3(x)?,
                    },
                    None => match cache.get(&x.to_bits()) {
                        Some(&v) => v,
                        None => {
                            let v = p.psi3(x)?;
                            cache.insert(x.to_bits(), v);
                            v
                        }
                    },
                };
                let psi4 = p.psi4(x);
                let a = p.psi1(x) - psi4 * psi4 - 2.0 * psi3 - phi_mean;
                let b = psi4 - delta;
                let c = a + 2.0 * delta * b;
                s.n += 1.0;
                s.a += a;
                s.b += b;
                s.aa += a * a;
                s.ab += a * b;
                s.bb += b * b;
                s.c += c;
                let c2 = c * c;
                s.cc += c2;
                s.ccc += c2 * c;
                s.cccc += c2 * c2;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;

    let mut total = BlockSums::default();
    let mut stability = Vec::new();
    let checkpoints: Vec<usize> = [8, 4, 2, 1]
        .iter()
        .map(|k| (blocks / k).max(1))
        .collect();
    for (i, s) in sums.iter().enumerate() {
        total.merge(s);
        if checkpoints.contains(&(i + 1)) && stability.last().map(|p: &StabilityPoint| p.draws) != Some((i + 1) * MC_BLOCK) {
            stability.push(StabilityPoint {
                draws: (i + 1) * MC_BLOCK,
                gamma: total.gamma(),
            });
        }
    }
    let n = total.n;
    let (ma, mb) = (total.a / n, total.b / n);
    let var = |xx: f64, x: f64, y: f64| (xx - n * x * y) / (n - 1.0);
    let m11 = 4.0 * var(total.aa, ma, ma);
    let m12 = 4.0 * var(total.ab, ma, mb);
    let m22 = 4.0 * var(total.bb, mb, mb);
    let gamma = total.gamma();
    // Central moments of c for the standard error of its sample variance.
    let mc_ = total.c / n;
    let (r2, r3, r4) = (total.cc / n, total.ccc / n, total.cccc / n);
    let mu2 = r2 - mc_ * mc_;
    let mu4 = r4 - 4.0 * mc_ * r3 + 6.0 * mc_ * mc_ * r2 - 3.0 * mc_.powi(4);
    let gamma_se = 4.0 * ((mu4 - mu2 * mu2).max(0.0) / n).sqrt();
    Ok(McMoments {
        m11,
        m12,
        m22,
        gamma,
        gamma_se,
        draws: blocks * MC_BLOCK,
        stability,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AreEstimator {
    /// The distance standard deviation `V_n`.
    DvarSd,
    /// The sample standard deviation.
    Sd,
    /// Mean absolute deviation about the median.
    MeanDev,
    /// The Gini mean difference.
    Gini,
}

impl AreEstimator {
    pub const ALL: [AreEstimator; 4] = [AreEstimator::DvarSd, AreEstimator::Sd, AreEstimator::MeanDev, AreEstimator::Gini];

    pub fn name(self) -> &'static str {
        match self {
            AreEstimator::DvarSd => "dvar-sd",
            AreEstimator::Sd => "sd",
            AreEstimator::MeanDev => "mean-dev",
            AreEstimator::Gini => "gini",
        }
    }
}

impl FromStr for AreEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AreEstimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown estimator '{s}' (expected dvar-sd, sd, mean-dev or gini)"
                ))
            })
    }
}

/// Standardized asymptotic variance `ASV/θ²` of the maximum likelihood scale
/// estimator for the location-scale families with a known value.
pub fn mle_standardized_asv(d: &DistributionSpec) -> Result<f64> {
    match *d {
        DistributionSpec::Normal { .. } => Ok(0.5),
        DistributionSpec::Laplace { .. } => Ok(1.0),
        DistributionSpec::StudentT { nu } => Ok((nu + 3.0) / (2.0 * nu)),
        _ => Err(Error::Unsupported(format!(
            "no maximum likelihood reference for {d}; use normal, laplace or t"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreValue {
    pub estimator: AreEstimator,
    pub distribution: String,
    /// `r_MLE / r_estimator`; 0 when the estimator's variance is infinite.
    pub value: f64,
    /// `ASV/θ²` of the estimator, `None` when infinite.
    pub standardized_asv: Option<f64>,
    pub mle_standardized_asv: f64,
    pub method: Option<AsymptoticMethod>,
    pub standard_error: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AreOptions {
    pub monte_carlo: MonteCarloOptions,
    pub ctx: ClosedFormContext,
}

/// Asymptotic relative efficiency of `estimator` with respect to the maximum
/// likelihood scale estimator, `ARE = (ASV_MLE/θ²) / (ASV/s²)`.
///
/// The distance standard deviation uses quadrature when the fourth moment is
/// finite and Monte Carlo otherwise.
pub fn are(estimator: AreEstimator, d: &DistributionSpec, opts: &AreOptions) -> Result<AreValue> {
    d.validate()?;
    let r_mle = mle_standardized_asv(d)?;
    let ctx = &opts.ctx;
    let mut out = AreValue {
        estimator,
        distribution: d.to_string(),
        value: f64::NAN,
        standardized_asv: None,
        mle_standardized_asv: r_mle,
        method: None,
        standard_error: None,
        note: None,
    };
    match estimator {
        AreEstimator::DvarSd => {
            let method = if d.has_finite_fourth_moment() {
                AsymptoticMethod::Quadrature
            } else {
                AsymptoticMethod::MonteCarlo
            };
            let rep = asymptotic_report(d, method, opts.monte_carlo, ctx)?;
            let r = rep.asv_v_sd / rep.v_sq;
            out.standardized_asv = Some(r);
            out.value = r_mle / r;
            out.method = Some(method);
            out.standard_error = rep.standard_error.map(|se| out.value * se / rep.gamma);
            out.note = rep.note;
        }
        AreEstimator::Sd => match d.central_fourth_moment() {
            Ok(Some(mu4)) => {
                let s2 = d.variance()?;
                let r = (mu4 / (s2 * s2) - 1.0) / 4.0;
                out.standardized_asv = Some(r);
                out.value = r_mle / r;
            }
            Ok(None) => {
                return Err(Error::Unsupported(format!("no closed-form fourth moment for {d}")));
            }
            Err(Error::Infinite(_)) => {
                out.value = 0.0;
                out.note = Some("infinite asymptotic variance of the sample standard deviation".into());
            }
            Err(e) => return Err(e),
        },
        AreEstimator::MeanDev => {
            if !d.is_symmetric() {
                return Err(Error::Unsupported(format!(
                    "mean deviation efficiency needs a symmetric family, got {d}"
                )));
            }
            let s2 = d.variance()?;
            let md = d.mean_abs_from(d.mean()?);
            let r = (s2 - md * md) / (md * md);
            out.standardized_asv = Some(r);
            out.value = r_mle / r;
        }
        AreEstimator::Gini => {
            let s2 = d.variance()?;
            let v2 = population_dvar(d, ctx)?;
            let delta = population_gini(d, ctx)?;
            let r = (4.0 * s2 - 2.0 * v2 - 2.0 * delta * delta) / (delta * delta);
            out.standardized_asv = Some(r);
            out.value = r_mle / r;
        }
    }
    Ok(out)
}

/// One row of efficiencies: the four estimators for one family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreRow {
    pub distribution: String,
    pub values: Vec<AreValue>,
}

pub fn are_row(d: &DistributionSpec, opts: &AreOptions) -> Result<AreRow> {
    Ok(AreRow {
        distribution: d.to_string(),
        values: AreEstimator::ALL
            .into_iter()
            .map(|e| are(e, d, opts))
            .collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal() -> DistributionSpec {
        DistributionSpec::Normal { mean: 0.0, sd: 1.0 }
    }

    #[test]
    fn psi_values() {
        let u = psi_profile(&DistributionSpec::Uniform { lo: 0.0, hi: 1.0 }).unwrap();
        assert!((u.psi4(0.0) - 0.5).abs() < 1e-14);
        let n = psi_profile(&normal()).unwrap();
        assert!((n.psi4(0.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        for x in [-3.0, -0.5, 0.0, 1.2, 4.0] {
            assert!(n.psi1(x) >= n.psi2(x));
            assert_eq!(n.psi2(x), n.psi4(x).powi(2));
        }
    }

    #[test]
    fn psi3_uniform_closed_form() {
        // U[0,1]: ψ4(y) = y² − y + ½, so ψ3(x) = ∫|x−y|(y² − y + ½)dy.
        let p = psi_profile(&DistributionSpec::Uniform { lo: 0.0, hi: 1.0 }).unwrap();
        for x in [0.0, 0.3, 0.5, 0.9] {
            let exact = {
                let f = |a: f64, b: f64, s: f64| {
                    // ∫_a^b s(x−y)(y² − y + ½) dy
                    let prim = |y: f64| x * (y.powi(3) / 3.0 - y * y / 2.0 + y / 2.0) - (y.powi(4) / 4.0 - y.powi(3) / 3.0 + y * y / 4.0);
                    s * (prim(b) - prim(a))
                };
                f(0.0, x, 1.0) + f(x, 1.0, -1.0)
            };
            assert!((p.psi3(x).unwrap() - exact).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn table_matches_direct_psi3() {
        for d in [normal(), DistributionSpec::Laplace { mu: 0.0, alpha: 1.0 }, DistributionSpec::StudentT { nu: 3.0 }] {
            let p = psi_profile(&d).unwrap();
            let t = Psi3Table::build(&p).unwrap();
            for x in [-7.3, -1.0, -0.01, 0.0, 0.4, 2.2, 15.0] {
                let Some(got) = t.psi3(x, p.delta) else {
                    assert!(x.abs() > 7.0, "{d}: {x} should be tabulated");
                    continue;
                };
                let want = p.psi3(x).unwrap();
                assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "{d} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn gini_block_matches_closed_form() {
        let ctx = ClosedFormContext::default();
        for d in [normal(), DistributionSpec::Uniform { lo: 0.0, hi: 1.0 }] {
            let r = asymptotic_report(&d, AsymptoticMethod::Quadrature, MonteCarloOptions::default(), &ctx).unwrap();
            let asv = 4.0 * r.sigma_sq - 2.0 * r.v_sq - 2.0 * r.delta * r.delta;
            assert!((r.m22 - asv).abs() < 1e-8, "{d}: {} vs {asv}", r.m22);
            assert!((r.t1 + r.t2 - 2.0 * r.t3 - r.v_sq).abs() < 1e-9);
            assert!(r.m11 * r.m22 >= r.m12 * r.m12 - 1e-10);
        }
    }

    #[test]
    fn quadrature_refused_without_fourth_moment() {
        let e = asymptotic_report(
            &DistributionSpec::StudentT { nu: 3.0 },
            AsymptoticMethod::Quadrature,
            MonteCarloOptions::default(),
            &ClosedFormContext::default(),
        );
        assert!(matches!(e, Err(Error::Unsupported(_))));
    }

    #[test]
    fn normal_efficiencies() {
        let opts = AreOptions::default();
        let d = normal();
        let sd = are(AreEstimator::Sd, &d, &opts).unwrap();
        assert!((sd.value - 1.0).abs() < 1e-12);
        let dv = are(AreEstimator::DvarSd, &d, &opts).unwrap();
        assert!((dv.value - 0.784).abs() < 5e-4, "{}", dv.value);
        let g = are(AreEstimator::Gini, &d, &opts).unwrap();
        assert!((g.value - 0.978).abs() < 5e-4);
        let md = are(AreEstimator::MeanDev, &d, &opts).unwrap();
        assert!((md.value - 0.876).abs() < 5e-4);
    }
}
