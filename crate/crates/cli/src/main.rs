//! `dsd`: distance standard deviation and related dispersion measures from
//! the command line.
//!
//! Results go to stdout, diagnostics to stderr. Exit codes: 0 success,
//! 2 usage or validation error, 3 I/O error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use dsd::asymptotics::{are_row, asymptotic_report, AreOptions, AsymptoticMethod, MonteCarloOptions};
use dsd::closed_forms::{population_summary, ClosedFormContext};
use dsd::dist::DistributionSpec;
use dsd::estimators::{breakdown, mean_deviation, sample_variance, sample_variance_standard, SdVariant};
use dsd::samples::load_csv;
use dsd::simulate::{check_sum_examples, run_plan, SimEstimator, SimulationPlan};
use dsd::spacings::{export_matrix_heatmap, quadform_matrix, u_stat_exact, u_stat_quadform, QuadFormKind};
use dsd::Error;

#[derive(Parser, Debug)]
#[command(name = "dsd", version, about = "Distance standard deviation, Gini mean difference and related measures of spread")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format for reports on stdout.
    #[arg(long, value_enum, default_value_t = Format::Plain, global = true)]
    format: Format,

    /// Print timing and progress diagnostics to stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimateKind {
    Vstat,
    Unbiased,
    Ustat,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dispersion statistics of the sample in a delimited text file.
    Estimate {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = EstimateKind::All)]
        estimator: EstimateKind,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
    },
    /// Population distance variance, Gini mean difference and variance of a family.
    ClosedForm {
        #[arg(long)]
        dist: String,
        /// Parameters as `k=v,k=v`.
        #[arg(long, default_value = "")]
        params: String,
        /// Evaluate by numerical integration instead of the closed form or series.
        #[arg(long)]
        numeric: bool,
    },
    /// Asymptotic relative efficiencies of four scale estimators against the
    /// maximum likelihood estimator.
    Are {
        #[arg(long)]
        dist: String,
        #[arg(long, default_value = "")]
        params: String,
        /// Degrees of freedom, shorthand for `--params nu=<v>` with `--dist t`.
        #[arg(long)]
        nu: Option<f64>,
        #[arg(long, default_value_t = MonteCarloOptions::default().draws)]
        draws: usize,
        #[arg(long, default_value_t = MonteCarloOptions::default().seed)]
        seed: u64,
    },
    /// Limiting covariance of the distance variance and Gini mean difference.
    Asymptotics {
        #[arg(long)]
        dist: String,
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long, default_value = "quadrature")]
        method: String,
        #[arg(long, default_value_t = MonteCarloOptions::default().draws)]
        draws: usize,
        #[arg(long, default_value_t = MonteCarloOptions::default().seed)]
        seed: u64,
    },
    /// Finite-sample simulation of the estimators.
    Simulate {
        #[arg(long)]
        dist: String,
        #[arg(long, default_value = "")]
        params: String,
        /// Sample sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "vstat,unbiased-components")]
        estimators: Vec<String>,
        /// Write the result here (JSON when the format is json, CSV otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo checks of distance variances of sums and differences.
    SumExamples {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
    },
    /// Export the quadratic-form matrices in the spacings as `i,j,value` CSV.
    Matrices {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "V,G,S")]
        kinds: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flat key/value report in insertion order.
#[derive(Default)]
struct Record(Map<String, Value>);

impl Record {
    fn put(&mut self, key: &str, value: impl Into<Value>) {
        self.0.insert(key.to_string(), value.into());
    }

    fn put_opt<T: Into<Value>>(&mut self, key: &str, value: Option<T>) {
        self.0.insert(key.to_string(), value.map_or(Value::Null, Into::into));
    }

    /// Copies the scalar fields of a serializable struct.
    fn from_serialize(v: &impl serde::Serialize) -> Result<Self, Error> {
        match serde_json::to_value(v).map_err(|e| Error::InvalidParameter(e.to_string()))? {
            Value::Object(m) => Ok(Record(m)),
            _ => Err(Error::InvalidParameter("report is not an object".into())),
        }
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.0).unwrap_or_default();
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut wtr = csv::Writer::from_writer(Vec::new());
                let _ = wtr.write_record(self.0.keys());
                let _ = wtr.write_record(self.0.values().map(scalar_text));
                String::from_utf8(wtr.into_inner().unwrap_or_default()).unwrap_or_default()
            }
            Format::Plain => {
                let width = self.0.keys().map(String::len).max().unwrap_or(0);
                self.0
                    .iter()
                    .map(|(k, v)| format!("{k:<width$}  {}\n", scalar_text(v)))
                    .collect()
            }
        }
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_dist(name: &str, params: &str) -> Result<DistributionSpec, Error> {
    let d = DistributionSpec::parse(name, params)?;
    d.validate()?;
    Ok(d)
}

fn io_err(path: &Path, e: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn cmd_estimate(input: &Path, kind: EstimateKind, delimiter: char) -> Result<Record, Error> {
    if !delimiter.is_ascii() {
        return Err(Error::InvalidParameter(format!("delimiter {delimiter:?} is not ASCII")));
    }
    let s = load_csv(input, delimiter as u8)?;
    let univariate = s.p() == 1;
    if kind == EstimateKind::Ustat && !univariate {
        return Err(Error::Dimension(format!(
            "the spacings statistic needs one column, the input has {}",
            s.p()
        )));
    }
    let b = breakdown(&s);
    let mut r = Record::default();
    r.put("n", b.n);
    r.put("p", b.p);
    if matches!(kind, EstimateKind::Vstat | EstimateKind::All) {
        r.put("v", b.distance_sd(SdVariant::Vstat)?.value);
        r.put("v_sq", b.v_sq);
        r.put("t1n", b.t1n);
        r.put("t2n", b.t2n);
        r.put("t3n", b.t3n);
        r.put("wn", b.wn);
        r.put("delta_n", b.delta_n);
    }
    if matches!(kind, EstimateKind::Unbiased | EstimateKind::All) {
        let sd = b.distance_sd(SdVariant::UnbiasedComponents).ok();
        r.put_opt("v_hat", sd.map(|s| s.value));
        r.put_opt("v_hat_clamped", sd.map(|s| s.clamped));
        r.put_opt("v_sq_hat", b.v_sq_hat);
        r.put_opt("w_hat_n", b.w_hat_n);
        r.put_opt("delta_hat_n", b.delta_hat_n);
    }
    if matches!(kind, EstimateKind::Ustat) || (kind == EstimateKind::All && univariate) {
        let u = u_stat_quadform(&s).ok();
        r.put_opt("u_stat", u);
        r.put_opt("u_stat_sd", u.map(|u| u.max(0.0).sqrt()));
        r.put_opt("u_stat_exact", u_stat_exact(&s).ok());
    }
    if kind == EstimateKind::All && univariate {
        r.put_opt("sample_variance", sample_variance(&s).ok());
        r.put_opt("sample_variance_standard", sample_variance_standard(&s).ok());
        r.put("mean_deviation", mean_deviation(&s)?);
    }
    Ok(r)
}

fn cmd_are(dist: &str, params: &str, nu: Option<f64>, mc: MonteCarloOptions) -> Result<Record, Error> {
    let params = match nu {
        Some(v) if params.is_empty() => format!("nu={v}"),
        Some(_) => return Err(Error::InvalidParameter("give either --nu or --params, not both".into())),
        None => params.to_string(),
    };
    let d = parse_dist(dist, &params)?;
    let opts = AreOptions {
        monte_carlo: mc,
        ..Default::default()
    };
    let row = are_row(&d, &opts)?;
    let mut r = Record::default();
    r.put("distribution", row.distribution);
    for a in &row.values {
        let key = a.estimator.name().replace('-', "_");
        r.put(&key, a.value);
        r.put_opt(&format!("{key}_method"), a.method.map(|m| m.name()));
        r.put_opt(&format!("{key}_standard_error"), a.standard_error);
        r.put_opt(&format!("{key}_note"), a.note.clone());
    }
    Ok(r)
}

fn cmd_simulate(
    dist: &str,
    params: &str,
    n: Vec<usize>,
    reps: usize,
    seed: u64,
    estimators: &[String],
    out: Option<&Path>,
    format: Format,
) -> Result<Option<String>, Error> {
    let plan = SimulationPlan {
        distribution: parse_dist(dist, params)?,
        sample_sizes: n,
        replications: reps,
        seed,
        estimators: estimators
            .iter()
            .map(|e| e.trim().parse::<SimEstimator>())
            .collect::<Result<_, _>>()?,
    };
    let result = run_plan(&plan)?;
    eprintln!("seed: {seed}");
    let text = match format {
        Format::Json => result.to_json()? + "\n",
        Format::Csv | Format::Plain => {
            let mut buf = Vec::new();
            result.write_csv(&mut buf)?;
            String::from_utf8(buf).map_err(|e| Error::InvalidParameter(e.to_string()))?
        }
    };
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| io_err(path, e))?;
            eprintln!("wrote {}", path.display());
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

fn cmd_matrices(n: usize, kinds: &[String], out: &Path) -> Result<Record, Error> {
    let kinds: Vec<QuadFormKind> = kinds.iter().map(|k| k.trim().parse()).collect::<Result<_, _>>()?;
    // Validate before touching the file system.
    let matrices = kinds
        .iter()
        .map(|&k| quadform_matrix(k, n))
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut r = Record::default();
    r.put("n", n);
    r.put("dimension", n - 1);
    for m in &matrices {
        let path = out.join(format!("{}_n{n}.csv", m.kind.name()));
        export_matrix_heatmap(m, &path)?;
        r.put(m.kind.name(), path.display().to_string());
    }
    Ok(r)
}

fn run(cli: Cli) -> Result<Option<String>, Error> {
    let format = cli.format;
    let started = Instant::now();
    let record = match cli.command {
        Command::Estimate {
            input,
            estimator,
            delimiter,
        } => cmd_estimate(&input, estimator, delimiter)?,
        Command::ClosedForm { dist, params, numeric } => {
            let d = parse_dist(&dist, &params)?;
            Record::from_serialize(&population_summary(&d, numeric, &ClosedFormContext::default())?)?
        }
        Command::Are {
            dist,
            params,
            nu,
            draws,
            seed,
        } => cmd_are(&dist, &params, nu, MonteCarloOptions { seed, draws })?,
        Command::Asymptotics {
            dist,
            params,
            method,
            draws,
            seed,
        } => {
            let d = parse_dist(&dist, &params)?;
            let method: AsymptoticMethod = method.parse()?;
            let rep = asymptotic_report(&d, method, MonteCarloOptions { seed, draws }, &ClosedFormContext::default())?;
            match rep.to_flat_json() {
                Value::Object(m) => Record(m),
                _ => Record::default(),
            }
        }
        Command::Simulate {
            dist,
            params,
            n,
            reps,
            seed,
            estimators,
            out,
        } => {
            let text = cmd_simulate(&dist, &params, n, reps, seed, &estimators, out.as_deref(), format)?;
            if cli.verbose > 0 {
                eprintln!("elapsed: {:.3}s", started.elapsed().as_secs_f64());
            }
            return Ok(text);
        }
        Command::SumExamples { seed, draws } => {
            let rep = check_sum_examples(seed, draws)?;
            let mut r = Record::default();
            r.put("seed", rep.seed);
            r.put("draws", rep.draws);
            let mut put_est = |prefix: &str, e: &dsd::simulate::McEstimate| {
                r.put(&format!("{prefix}_estimate"), e.value);
                r.put(&format!("{prefix}_standard_error"), e.standard_error);
                r.put_opt(&format!("{prefix}_target"), e.target);
                r.put_opt(&format!("{prefix}_z"), e.z_score());
            };
            put_est("bernoulli_uniform", &rep.bernoulli_uniform);
            for g in &rep.bernoulli_gaps {
                put_est(&format!("gap_p{}", g.p), &g.estimate);
            }
            put_est("symmetric_summand", &rep.symmetric_summand);
            for g in &rep.bernoulli_gaps {
                r.put(&format!("gap_p{}_exact", g.p), g.exact);
            }
            r.put("t1", rep.components.t1);
            r.put("t2", rep.components.t2);
            r.put("t3", rep.components.t3);
            r.put("components_max_abs_error", rep.components.max_abs_error);
            r
        }
        Command::Matrices { n, kinds, out } => cmd_matrices(n, &kinds, &out)?,
    };
    if cli.verbose > 0 {
        eprintln!("elapsed: {:.3}s", started.elapsed().as_secs_f64());
    }
    Ok(Some(record.render(format)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Some(text)) => {
            let mut out = io::stdout().lock();
            if out.write_all(text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 3 } else { 2 })
        }
    }
}
