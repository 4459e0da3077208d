//! Seeded samplers, the finite-sample simulation harness and Monte-Carlo
//! estimates of the population distance variance.
//!
//! Every random quantity is drawn from a ChaCha8 keystream identified by
//! `(seed, stream)`. Work is split into fixed blocks, each with its own stream,
//! and block results are reduced in block order, so output depends only on the
//! seed and the requested sizes, never on the number of worker threads.

use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Open01, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::closed_forms::{finite_support_dvar, population_gini, population_t3, ClosedFormContext};
use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::estimators::{
    breakdown, gini_mean_difference, mean_deviation, sample_variance_standard, GiniVariant, SdVariant,
};
use crate::samples::Sample;
use crate::spacings::{u_stat_exact, u_stat_quadform};
use crate::sum::Compensated;

pub type SimRng = ChaCha8Rng;

/// Stream `stream` of the generator keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

enum Kind {
    Bernoulli(f64),
    Normal { mean: f64, sd: f64 },
    /// Uniform, Exponential, Laplace and Pareto: inversion of the CDF.
    Inverse(DistributionSpec),
    Gamma(Gamma<f64>),
    Poisson(Poisson<f64>),
    NegBinomial(Gamma<f64>),
    MultiNormal(Vec<f64>),
    StudentT { nu: f64, half_chi: Gamma<f64> },
}

/// A validated sampler for one family.
///
/// Normal draws use the ziggurat method of `rand_distr::StandardNormal`;
/// Student t is `Z / sqrt(χ²_ν / ν)`; the negative binomial is drawn as a
/// Poisson with a gamma-distributed rate.
pub struct Sampler {
    kind: Kind,
}

fn distr_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(e.to_string())
}

impl Sampler {
    pub fn new(d: &DistributionSpec) -> Result<Self> {
        d.validate()?;
        use DistributionSpec as D;
        let kind = match *d {
            D::Bernoulli { prob } => Kind::Bernoulli(prob),
            D::Normal { mean, sd } => Kind::Normal { mean, sd },
            D::Uniform { .. } | D::Exponential { .. } | D::Laplace { .. } | D::Pareto { .. } => {
                Kind::Inverse(d.clone())
            }
            D::Gamma { shape } => Kind::Gamma(Gamma::new(shape, 1.0).map_err(distr_err)?),
            D::Poisson { rate } => Kind::Poisson(Poisson::new(rate).map_err(distr_err)?),
            D::NegBinomial { c, beta } => {
                Kind::NegBinomial(Gamma::new(beta, c / (1.0 - c)).map_err(distr_err)?)
            }
            D::MultiNormalIdentity { ref mean } => Kind::MultiNormal(mean.clone()),
            D::StudentT { nu } => Kind::StudentT {
                nu,
                half_chi: Gamma::new(nu / 2.0, 2.0).map_err(distr_err)?,
            },
        };
        Ok(Sampler { kind })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::MultiNormal(m) => m.len(),
            _ => 1,
        }
    }

    /// One univariate draw.
    ///
    /// # Panics
    /// For the multivariate normal; use [`Sampler::draw_into`].
    pub fn draw(&self, rng: &mut SimRng) -> f64 {
        match &self.kind {
            Kind::Bernoulli(p) => {
                let u: f64 = rng.random();
                if u < *p {
                    1.0
                } else {
                    0.0
                }
            }
            Kind::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Kind::Inverse(d) => {
                let u: f64 = rng.sample(Open01);
                d.quantile(u).expect("validated family with an inverse CDF")
            }
            Kind::Gamma(g) => g.sample(rng),
            Kind::Poisson(p) => p.sample(rng),
            Kind::NegBinomial(g) => {
                let rate = g.sample(rng);
                if rate > 0.0 {
                    Poisson::new(rate).map(|p| p.sample(rng)).unwrap_or(0.0)
                } else {
                    0.0
                }
            }
            Kind::MultiNormal(_) => panic!("draw() on a multivariate sampler"),
            Kind::StudentT { nu, half_chi } => {
                let z: f64 = rng.sample(StandardNormal);
                let chi2 = half_chi.sample(rng);
                z / (chi2 / nu).sqrt()
            }
        }
    }

    /// Appends one observation (`dim()` coordinates) to `out`.
    pub fn draw_into(&self, rng: &mut SimRng, out: &mut Vec<f64>) {
        match &self.kind {
            Kind::MultiNormal(mean) => {
                for m in mean {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(m + z);
                }
            }
            _ => out.push(self.draw(rng)),
        }
    }

    pub fn sample(&self, n: usize, rng: &mut SimRng) -> Result<Sample> {
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            self.draw_into(rng, &mut data);
        }
        Sample::from_row_major(data, self.dim())
    }
}

/// `n` i.i.d. draws from `d`.
pub fn sample(d: &DistributionSpec, n: usize, rng: &mut SimRng) -> Result<Sample> {
    Sampler::new(d)?.sample(n, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimEstimator {
    /// `V_n`, the root of the V-statistic.
    Vstat,
    /// `V̂_n`, the root of `Ŵ_n + Δ̂_n²` (clamped at zero).
    UnbiasedComponents,
    /// Root of the spacings U-statistic `U_n²`.
    Ustat,
    /// Unbiased Gini mean difference.
    Gini,
    /// Sample standard deviation with the `1/(n−1)` variance.
    Sd,
    /// Mean absolute deviation about the median.
    MeanDev,
}

impl SimEstimator {
    pub const ALL: [SimEstimator; 6] = [
        SimEstimator::Vstat,
        SimEstimator::UnbiasedComponents,
        SimEstimator::Ustat,
        SimEstimator::Gini,
        SimEstimator::Sd,
        SimEstimator::MeanDev,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimEstimator::Vstat => "vstat",
            SimEstimator::UnbiasedComponents => "unbiased-components",
            SimEstimator::Ustat => "ustat",
            SimEstimator::Gini => "gini",
            SimEstimator::Sd => "sd",
            SimEstimator::MeanDev => "mean-dev",
        }
    }

    fn min_n(self) -> usize {
        match self {
            SimEstimator::UnbiasedComponents => 3,
            _ => 2,
        }
    }

    fn univariate_only(self) -> bool {
        matches!(self, SimEstimator::Ustat | SimEstimator::Sd | SimEstimator::MeanDev)
    }
}

impl FromStr for SimEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimEstimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown estimator '{s}' (expected one of vstat, unbiased-components, ustat, gini, sd, mean-dev)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationPlan {
    pub distribution: DistributionSpec,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<SimEstimator>,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if self.sample_sizes.is_empty() || self.estimators.is_empty() {
            return Err(Error::InvalidParameter(
                "a plan needs at least one sample size and one estimator".into(),
            ));
        }
        if self.sample_sizes.len() > u32::MAX as usize {
            return Err(Error::TooLarge {
                what: "number of sample sizes",
                max: u32::MAX as usize,
                n: self.sample_sizes.len(),
            });
        }
        let dim = self.distribution.dim();
        for &e in &self.estimators {
            if e.univariate_only() && dim > 1 {
                return Err(Error::Dimension(format!(
                    "estimator {} needs univariate data, the distribution has dimension {dim}",
                    e.name()
                )));
            }
            for &n in &self.sample_sizes {
                if n < e.min_n() {
                    return Err(Error::TooSmall {
                        what: e.name(),
                        min: e.min_n(),
                        n,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Summary of one estimator at one sample size over all replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationCell {
    pub n: usize,
    pub estimator: SimEstimator,
    pub mean: f64,
    pub se_mean: f64,
    /// Replication variance with the `1/(R−1)` normalization; `None` for `R = 1`.
    pub variance: Option<f64>,
    pub se_variance: Option<f64>,
    pub n_variance: Option<f64>,
    pub se_n_variance: Option<f64>,
    /// Replications where the squared value was negative and clamped to zero.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub distribution: String,
    pub seed: u64,
    pub replications: usize,
    pub cells: Vec<SimulationCell>,
}

impl SimulationResult {
    pub fn cell(&self, n: usize, estimator: SimEstimator) -> Option<&SimulationCell> {
        self.cells.iter().find(|c| c.n == n && c.estimator == estimator)
    }

    /// One row per (distribution, n, estimator, metric).
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["distribution", "n", "estimator", "metric", "value", "standard_error"])?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for c in &self.cells {
            let rows = [
                ("mean", Some(c.mean), Some(c.se_mean)),
                ("variance", c.variance, c.se_variance),
                ("n_variance", c.n_variance, c.se_n_variance),
                ("clamped", Some(c.clamped as f64), None),
            ];
            for (metric, value, se) in rows {
                wtr.write_record([
                    self.distribution.as_str(),
                    &c.n.to_string(),
                    c.estimator.name(),
                    metric,
                    &fmt(value),
                    &fmt(se),
                ])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

const PLAN_BLOCK: usize = 64;

fn evaluate(estimators: &[SimEstimator], s: &Sample, out: &mut Vec<f64>, clamped: &mut [usize]) -> Result<()> {
    let needs_breakdown = estimators
        .iter()
        .any(|e| matches!(e, SimEstimator::Vstat | SimEstimator::UnbiasedComponents));
    let b = needs_breakdown.then(|| breakdown(s));
    for (i, e) in estimators.iter().enumerate() {
        let v = match e {
            SimEstimator::Vstat => b.as_ref().expect("computed above").distance_sd(SdVariant::Vstat)?.value,
            SimEstimator::UnbiasedComponents => {
                let sd = b
                    .as_ref()
                    .expect("computed above")
                    .distance_sd(SdVariant::UnbiasedComponents)?;
                if sd.clamped {
                    clamped[i] += 1;
                }
                sd.value
            }
            SimEstimator::Ustat => u_stat_quadform(s)?.max(0.0).sqrt(),
            SimEstimator::Gini => gini_mean_difference(s, GiniVariant::Unbiased)?,
            SimEstimator::Sd => sample_variance_standard(s)?.sqrt(),
            SimEstimator::MeanDev => mean_deviation(s)?,
        };
        out.push(v);
    }
    Ok(())
}

struct Moments {
    mean: f64,
    se_mean: f64,
    variance: Option<f64>,
    se_variance: Option<f64>,
}

/// Mean, variance and their Monte-Carlo standard errors from replication values.
fn moments(values: impl Iterator<Item = f64> + Clone, count: usize) -> Moments {
    let r = count as f64;
    let mut s = Compensated::default();
    for v in values.clone() {
        s.add(v);
    }
    let mean = s.value() / r;
    if count < 2 {
        return Moments {
            mean,
            se_mean: f64::NAN,
            variance: None,
            se_variance: None,
        };
    }
    let (mut m2, mut m4) = (Compensated::default(), Compensated::default());
    for v in values {
        let d2 = (v - mean) * (v - mean);
        m2.add(d2);
        m4.add(d2 * d2);
    }
    let var = m2.value() / (r - 1.0);
    let m4 = m4.value() / r;
    // Var(s²) ≈ (μ4 − σ⁴(R−3)/(R−1)) / R
    let var_of_var = ((m4 - var * var * (r - 3.0) / (r - 1.0)) / r).max(0.0);
    Moments {
        mean,
        se_mean: (var / r).sqrt(),
        variance: Some(var),
        se_variance: Some(var_of_var.sqrt()),
    }
}

pub fn run_plan(plan: &SimulationPlan) -> Result<SimulationResult> {
    plan.validate()?;
    let sampler = Sampler::new(&plan.distribution)?;
    let k = plan.estimators.len();
    let reps = plan.replications;
    let blocks = reps.div_ceil(PLAN_BLOCK);
    let mut cells = Vec::with_capacity(plan.sample_sizes.len() * k);
    for (size_index, &n) in plan.sample_sizes.iter().enumerate() {
        let per_block: Vec<(Vec<f64>, Vec<usize>)> = (0..blocks)
            .into_par_iter()
            .map(|block| -> Result<(Vec<f64>, Vec<usize>)> {
                let mut rng = substream(plan.seed, ((size_index as u64) << 32) | block as u64);
                let count = PLAN_BLOCK.min(reps - block * PLAN_BLOCK);
                let mut values = Vec::with_capacity(count * k);
                let mut clamped = vec![0usize; k];
                for _ in 0..count {
                    let s = sampler.sample(n, &mut rng)?;
                    evaluate(&plan.estimators, &s, &mut values, &mut clamped)?;
                }
                Ok((values, clamped))
            })
            .collect::<Result<_>>()?;
        for (j, &estimator) in plan.estimators.iter().enumerate() {
            let column = per_block
                .iter()
                .flat_map(|(v, _)| v.iter().skip(j).step_by(k).copied());
            let m = moments(column, reps);
            let nf = n as f64;
            cells.push(SimulationCell {
                n,
                estimator,
                mean: m.mean,
                se_mean: m.se_mean,
                variance: m.variance,
                se_variance: m.se_variance,
                n_variance: m.variance.map(|v| nf * v),
                se_n_variance: m.se_variance.map(|v| nf * v),
                clamped: per_block.iter().map(|(_, c)| c[j]).sum(),
            });
        }
    }
    Ok(SimulationResult {
        distribution: plan.distribution.to_string(),
        seed: plan.seed,
        replications: reps,
        cells,
    })
}

/// A Monte-Carlo estimate with its standard error and, where one is known,
/// the value it is meant to reproduce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub label: String,
    pub value: f64,
    pub standard_error: f64,
    pub target: Option<f64>,
    pub draws: usize,
    pub batches: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `(value − target) / standard_error`.
    pub fn z_score(&self) -> Option<f64> {
        self.target.map(|t| (self.value - t) / self.standard_error)
    }

    pub fn within(&self, sigmas: f64) -> bool {
        match self.target {
            Some(t) => (self.value - t).abs() <= sigmas * self.standard_error,
            None => false,
        }
    }
}

pub const MC_BATCH: usize = 10_000;
const MIN_BATCHES: usize = 20;

/// For each batch of `MC_BATCH` draws, fills `K` univariate samples with
/// `gen` and returns the exact spacings U-statistic of each. Each batch
/// value is an unbiased estimate of the distance variance of its variable.
fn batch_ustats<const K: usize>(
    draws: usize,
    seed: u64,
    stream_base: u64,
    gen: impl Fn(&mut SimRng, &mut [Vec<f64>; K]) + Sync,
) -> Result<Vec<[f64; K]>> {
    let batches = draws / MC_BATCH;
    if batches < MIN_BATCHES {
        return Err(Error::TooSmall {
            what: "Monte-Carlo draws",
            min: MIN_BATCHES * MC_BATCH,
            n: draws,
        });
    }
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, stream_base + b as u64);
            let mut cols: [Vec<f64>; K] = std::array::from_fn(|_| Vec::with_capacity(MC_BATCH));
            for _ in 0..MC_BATCH {
                gen(&mut rng, &mut cols);
            }
            let mut out = [0.0; K];
            for (o, c) in out.iter_mut().zip(cols) {
                *o = u_stat_exact(&Sample::univariate(c)?)?;
            }
            Ok(out)
        })
        .collect()
}

fn batch_summary(label: &str, values: impl Iterator<Item = f64> + Clone, batches: usize, seed: u64) -> McEstimate {
    let m = moments(values, batches);
    McEstimate {
        label: label.to_string(),
        value: m.mean,
        standard_error: m.se_mean,
        target: None,
        draws: batches * MC_BATCH,
        batches,
        seed,
    }
}

/// Monte-Carlo estimate of the distance variance `V²` of a univariate family
/// by batch means of the exact spacings U-statistic. Valid with ties, so it
/// serves discrete families too.
pub fn monte_carlo_dvar(d: &DistributionSpec, draws: usize, seed: u64) -> Result<McEstimate> {
    d.require_univariate()?;
    let sampler = Sampler::new(d)?;
    let b = batch_ustats::<1>(draws, seed, 0, |rng, cols| cols[0].push(sampler.draw(rng)))?;
    Ok(batch_summary(&d.to_string(), b.iter().map(|v| v[0]), b.len(), seed))
}

/// Exact components of `Bernoulli(½) + Uniform[0,1]`, which is `Uniform[0,2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumComponents {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t1_exact: f64,
    pub t2_exact: f64,
    pub t3_exact: f64,
    pub max_abs_error: f64,
}

/// A Monte-Carlo gap `V²(X+Y) − V²(X−Y)` next to its formula and an exact
/// finite-support evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapCheck {
    pub p: f64,
    pub estimate: McEstimate,
    /// Exact value from the finite supports of `X+Y` and `X−Y`.
    pub exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumExamplesReport {
    pub seed: u64,
    pub draws: usize,
    /// `V²(B + U)` for `B ~ Bernoulli(½)`, `U ~ Uniform[0,1]`; target 8/45.
    pub bernoulli_uniform: McEstimate,
    pub components: SumComponents,
    /// Bernoulli(p) pairs, target `8(p − p²)²(1 − 2p)²`.
    pub bernoulli_gaps: Vec<GapCheck>,
    /// `V²(X+Y) − V²(X−Y)` for `X ~ N(0,1)` and `Y ~ Exponential(1)`; target 0.
    pub symmetric_summand: McEstimate,
}

pub const SUM_EXAMPLE_MIN_DRAWS: usize = 1_000_000;

pub fn bernoulli_gap_formula(p: f64) -> f64 {
    let pq = p - p * p;
    8.0 * pq * pq * (1.0 - 2.0 * p).powi(2)
}

fn bernoulli_pair_atoms(p: f64) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let q = 1.0 - p;
    let sum = vec![(0.0, q * q), (1.0, 2.0 * p * q), (2.0, p * p)];
    let diff = vec![(-1.0, q * p), (0.0, p * p + q * q), (1.0, p * q)];
    (sum, diff)
}

fn gap_estimate(
    label: String,
    draws: usize,
    seed: u64,
    stream_base: u64,
    pair: impl Fn(&mut SimRng) -> (f64, f64) + Sync,
) -> Result<McEstimate> {
    let b = batch_ustats::<2>(draws, seed, stream_base, |rng, cols| {
        let (x, y) = pair(rng);
        cols[0].push(x + y);
        cols[1].push(x - y);
    })?;
    Ok(batch_summary(&label, b.iter().map(|v| v[0] - v[1]), b.len(), seed))
}

pub fn check_sum_examples(seed: u64, draws: usize) -> Result<SumExamplesReport> {
    if draws < SUM_EXAMPLE_MIN_DRAWS {
        return Err(Error::TooSmall {
            what: "sum-example draws",
            min: SUM_EXAMPLE_MIN_DRAWS,
            n: draws,
        });
    }
    // Disjoint stream ranges per check.
    const SPAN: u64 = 1 << 40;

    let b = batch_ustats::<1>(draws, seed, 0, |rng, cols| {
        let bit: f64 = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        let u: f64 = rng.random();
        cols[0].push(bit + u);
    })?;
    let mut bernoulli_uniform = batch_summary("bernoulli(0.5)+uniform(0,1)", b.iter().map(|v| v[0]), b.len(), seed);
    bernoulli_uniform.target = Some(8.0 / 45.0);

    let u02 = DistributionSpec::Uniform { lo: 0.0, hi: 2.0 };
    let ctx = ClosedFormContext::default();
    let t1 = 2.0 * u02.variance()?;
    let t2 = population_gini(&u02, &ctx)?.powi(2);
    let t3 = population_t3(&u02, &ctx)?;
    let (t1_exact, t2_exact, t3_exact) = (2.0 / 3.0, 4.0 / 9.0, 7.0 / 15.0);
    let components = SumComponents {
        t1,
        t2,
        t3,
        t1_exact,
        t2_exact,
        t3_exact,
        max_abs_error: [t1 - t1_exact, t2 - t2_exact, t3 - t3_exact]
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs())),
    };

    let mut bernoulli_gaps = Vec::new();
    for (i, p) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let mut est = gap_estimate(
            format!("bernoulli({p}) pair gap"),
            draws,
            seed,
            (i as u64 + 1) * SPAN,
            |rng| {
                let x = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                let y = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                (x, y)
            },
        )?;
        est.target = Some(bernoulli_gap_formula(p));
        let (sum, diff) = bernoulli_pair_atoms(p);
        bernoulli_gaps.push(GapCheck {
            p,
            estimate: est,
            exact: finite_support_dvar(&sum)? - finite_support_dvar(&diff)?,
        });
    }

    let mut symmetric_summand = gap_estimate(
        "normal(0,1) with exponential(1) gap".into(),
        draws,
        seed,
        10 * SPAN,
        |rng| {
            let x: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.sample(Open01);
            (x, -u.ln())
        },
    )?;
    symmetric_summand.target = Some(0.0);

    Ok(SumExamplesReport {
        seed,
        draws,
        bernoulli_uniform,
        components,
        bernoulli_gaps,
        symmetric_summand,
    })
}
