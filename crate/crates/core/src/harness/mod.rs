//! Monte-Carlo estimates of the invariant drift
//! `ε = E|M(t0, x0) − M(T, Y_N)|` and convergence-order studies.

pub mod catalog;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulate::{prepare, run_prepared, Integrator, SimConfig, SimError};
use crate::synthesis::SdeSystem;

pub use catalog::{catalog, find, CatalogEntry, Reference, UnknownEntry};

/// Largest tolerated share of aborted trajectories.
pub const MAX_ABORT_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("system has no first integral to measure")]
    NoFirstIntegral,
    #[error("{aborts} of {total} trajectories aborted (more than 1%); first: {first}")]
    TooManyAborts {
        aborts: usize,
        total: usize,
        first: String,
        report: Box<ErrorReport>,
    },
    #[error("invalid study: {0}")]
    Study(String),
}

/// What was run; embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub integrator: Integrator,
    pub x0: Vec<f64>,
    pub t0: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub h: f64,
    #[serde(rename = "R")]
    pub trajectories: usize,
    pub epsilon: f64,
    pub std_dev: f64,
    pub stderr: f64,
    pub aborts: usize,
    pub seed: u64,
    pub config: RunConfig,
}

/// One Monte-Carlo run over trajectories `0 … R−1` of `seed`.
///
/// Trajectories run in parallel; the sum is taken in index order so the
/// estimate does not depend on scheduling.
pub fn invariant_error(
    system: &SdeSystem,
    config: &RunConfig,
    h: f64,
    trajectories: usize,
    seed: u64,
) -> Result<ErrorReport, HarnessError> {
    if trajectories == 0 {
        return Err(HarnessError::Study("R must be at least 1".into()));
    }
    let m = system.first_integral().ok_or(HarnessError::NoFirstIntegral)?;
    let prepared = prepare(system, config.integrator)?;
    let base = SimConfig {
        t0: config.t0,
        t_end: config.t_end,
        h,
        x0: config.x0.clone(),
        integrator: config.integrator,
        seed,
        trajectory_index: 0,
    };
    base.steps()?;
    if base.x0.len() != system.n() {
        return Err(SimError::Config(format!(
            "x0 has {} components, system has n = {}",
            base.x0.len(),
            system.n()
        ))
        .into());
    }
    let m0 = m
        .eval(config.t0, &config.x0)
        .map_err(|e| SimError::Invariant(e.to_string()))?;

    let outcomes: Vec<Result<f64, String>> = (0..trajectories as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = SimConfig {
                trajectory_index: r,
                ..base.clone()
            };
            let mut last = (0.0, Vec::new());
            run_prepared(&prepared, &cfg, |_, t, y| {
                last.0 = t;
                last.1.clear();
                last.1.extend_from_slice(y);
            })
            .map_err(|e| e.to_string())?;
            let mt = m.eval(last.0, &last.1).map_err(|e| e.to_string())?;
            if mt.is_finite() {
                Ok((m0 - mt).abs())
            } else {
                Err("non-finite invariant at T".into())
            }
        })
        .collect();

    let errors: Vec<f64> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
    let aborts = trajectories - errors.len();
    let k = errors.len() as f64;
    let mut sum = 0.0;
    for e in &errors {
        sum += e;
    }
    let epsilon = if errors.is_empty() { f64::NAN } else { sum / k };
    let mut ss = 0.0;
    for e in &errors {
        ss += (e - epsilon).powi(2);
    }
    let std_dev = if errors.len() > 1 { (ss / (k - 1.0)).sqrt() } else { 0.0 };
    let report = ErrorReport {
        h,
        trajectories,
        epsilon,
        std_dev,
        stderr: if k > 0.0 { std_dev / k.sqrt() } else { f64::NAN },
        aborts,
        seed,
        config: config.clone(),
    };
    if aborts as f64 > MAX_ABORT_FRACTION * trajectories as f64 {
        let first = outcomes
            .into_iter()
            .find_map(Result::err)
            .unwrap_or_default();
        return Err(HarnessError::TooManyAborts {
            aborts,
            total: trajectories,
            first,
            report: Box::new(report),
        });
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ErrorReport>,
    /// `p̂_i = log(ε_i/ε_{i+1}) / log(h_i/h_{i+1})`.
    pub orders: Vec<f64>,
}

pub fn observed_order(a: &ErrorReport, b: &ErrorReport) -> f64 {
    (a.epsilon / b.epsilon).ln() / (a.h / b.h).ln()
}

pub fn convergence_study(
    system: &SdeSystem,
    config: &RunConfig,
    ladder: &[f64],
    trajectories: usize,
    seed: u64,
) -> Result<ConvergenceTable, HarnessError> {
    if ladder.len() < 2 {
        return Err(HarnessError::Study("the h ladder needs at least two rungs".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(HarnessError::Study("the h ladder must be strictly decreasing".into()));
    }
    let rows = ladder
        .iter()
        .map(|&h| invariant_error(system, config, h, trajectories, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let orders = rows.windows(2).map(|w| observed_order(&w[0], &w[1])).collect();
    Ok(ConvergenceTable { rows, orders })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: &str = "h,R,epsilon,stderr,aborts";

/// Meta line carrying what the fixed CSV columns cannot.
#[derive(Serialize, Deserialize)]
struct CsvMeta {
    seed: u64,
    config: RunConfig,
    std_dev: Vec<f64>,
    orders: Vec<f64>,
}

const META_PREFIX: &str = "# ";

/// Full-precision export; CSV keeps the fixed header and appends a
/// single `# {json}` line with seeds and configuration.
pub fn export_report(table: &ConvergenceTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(table).expect("report serializes"),
        ReportFormat::Csv => {
            let mut out = format!("{CSV_HEADER}\n");
            for r in &table.rows {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.h, r.trajectories, r.epsilon, r.stderr, r.aborts
                ));
            }
            if let Some(first) = table.rows.first() {
                let meta = CsvMeta {
                    seed: first.seed,
                    config: first.config.clone(),
                    std_dev: table.rows.iter().map(|r| r.std_dev).collect(),
                    orders: table.orders.clone(),
                };
                out.push_str(META_PREFIX);
                out.push_str(&serde_json::to_string(&meta).expect("meta serializes"));
                out.push('\n');
            }
            out
        }
    }
}

pub fn parse_report(text: &str, format: ReportFormat) -> Result<ConvergenceTable, String> {
    match format {
        ReportFormat::Json => serde_json::from_str(text).map_err(|e| e.to_string()),
        ReportFormat::Csv => {
            let mut lines = text.lines();
            if lines.next() != Some(CSV_HEADER) {
                return Err(format!("expected header `{CSV_HEADER}`"));
            }
            let mut partial = Vec::new();
            let mut meta: Option<CsvMeta> = None;
            for line in lines {
                if let Some(json) = line.strip_prefix(META_PREFIX) {
                    meta = Some(serde_json::from_str(json).map_err(|e| e.to_string())?);
                    continue;
                }
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(format!("bad row `{line}`"));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
                let int = |s: &str| s.parse::<usize>().map_err(|e| format!("{s}: {e}"));
                partial.push((num(f[0])?, int(f[1])?, num(f[2])?, num(f[3])?, int(f[4])?));
            }
            let meta = meta.ok_or("missing `# {...}` metadata line")?;
            if meta.std_dev.len() != partial.len() {
                return Err("metadata does not match the rows".into());
            }
            let rows = partial
                .into_iter()
                .zip(&meta.std_dev)
                .map(|((h, r, eps, se, ab), &sd)| ErrorReport {
                    h,
                    trajectories: r,
                    epsilon: eps,
                    std_dev: sd,
                    stderr: se,
                    aborts: ab,
                    seed: meta.seed,
                    config: meta.config.clone(),
                })
                .collect();
            Ok(ConvergenceTable {
                rows,
                orders: meta.orders,
            })
        }
    }
}
