//! Comparison metrics and a small experiment runner.
//!
//! Per instance, the best objective among the solvers that returned one is
//! the reference. Each solver's relative gap is measured against its *own*
//! objective, `|TWCT_m - TWCT*| / TWCT_m`, and percentage improvements are
//! `100 (TWCT_m2 - TWCT_m1) / TWCT_m2`. Solvers without an objective on an
//! instance are left out of that instance's metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristic::{self, LocalSearchParams};
use crate::model::{twct, Instance};
use crate::oracle::{self, OracleLimits};
use crate::solver::{self, Propagation, SolverParams, Status};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("objective must be positive, got {0}")]
    Domain(i64),
    #[error("no values to summarize")]
    EmptyInput,
}

pub fn relative_gap(twct_m: i64, twct_best: i64) -> Result<f64, MetricError> {
    if twct_m <= 0 {
        return Err(MetricError::Domain(twct_m));
    }
    Ok((twct_m - twct_best).abs() as f64 / twct_m as f64)
}

/// Improvement of `m1` over `m2` in percent; positive when `m1` is lower.
pub fn percent_improvement(twct_m1: i64, twct_m2: i64) -> Result<f64, MetricError> {
    if twct_m2 <= 0 {
        return Err(MetricError::Domain(twct_m2));
    }
    Ok(100.0 * (twct_m2 - twct_m1) as f64 / twct_m2 as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum CiMethod {
    /// `mean ± 1.96 s / √n` with the sample standard deviation.
    #[default]
    Normal,
    /// 2.5 / 97.5 percentiles of resampled means.
    Bootstrap { resamples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn mean_ci95(values: &[f64]) -> Result<Interval, MetricError> {
    mean_ci(values, CiMethod::Normal)
}

pub fn mean_ci(values: &[f64], method: CiMethod) -> Result<Interval, MetricError> {
    if values.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok(Interval {
            mean,
            lo: mean,
            hi: mean,
        });
    }
    match method {
        CiMethod::Normal => {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let half = 1.96 * var.sqrt() / n.sqrt();
            Ok(Interval {
                mean,
                lo: mean - half,
                hi: mean + half,
            })
        }
        CiMethod::Bootstrap { resamples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut means: Vec<f64> = (0..resamples.max(1))
                .map(|_| {
                    (0..values.len())
                        .map(|_| values[rng.gen_range(0..values.len())])
                        .sum::<f64>()
                        / n
                })
                .collect();
            means.sort_by(f64::total_cmp);
            let at = |q: f64| means[((means.len() - 1) as f64 * q).round() as usize];
            Ok(Interval {
                mean,
                lo: at(0.025).min(mean),
                hi: at(0.975).max(mean),
            })
        }
    }
}

/// Solvers the runner knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverId {
    Oracle,
    Exact,
    /// Relaxation without windows; never used as a reference value.
    Core,
    Heuristic,
}

impl SolverId {
    pub fn name(self) -> &'static str {
        match self {
            SolverId::Oracle => "oracle",
            SolverId::Exact => "exact",
            SolverId::Core => "core",
            SolverId::Heuristic => "heuristic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "oracle" => Some(SolverId::Oracle),
            "exact" => Some(SolverId::Exact),
            "core" => Some(SolverId::Core),
            "heuristic" => Some(SolverId::Heuristic),
            _ => None,
        }
    }

    fn is_relaxation(self) -> bool {
        self == SolverId::Core
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRecord {
    pub instance_id: String,
    pub solver_id: SolverId,
    pub status: Status,
    pub objective: Option<i64>,
    /// Wall time in seconds.
    pub elapsed: f64,
    pub nodes: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub id: String,
    /// Class key, e.g. `J15-F2-M2-S20`.
    pub class_label: String,
    pub instance: Instance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Gap,
    Pi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryRow {
    pub class_label: String,
    pub metric: MetricKind,
    /// `gap` rows name one solver, `pi` rows name `m1` over `m2`.
    pub solver: SolverId,
    pub baseline: Option<SolverId>,
    pub mean: f64,
    pub ci95: (f64, f64),
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct SuiteParams {
    pub budget: Duration,
    pub seed: u64,
    pub workers: usize,
    pub propagation: Propagation,
    pub oracle: OracleLimits,
    pub ci: CiMethod,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            budget: Duration::from_secs(60),
            seed: 0,
            workers: 1,
            propagation: Propagation::Strong,
            oracle: OracleLimits::default(),
            ci: CiMethod::Normal,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteResult {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Runs one solver on one instance, turning failures into `Unknown`.
pub fn run_one(bi: &BenchInstance, solver_id: SolverId, params: &SuiteParams) -> RunRecord {
    let unknown = |elapsed: f64| RunRecord {
        instance_id: bi.id.clone(),
        solver_id,
        status: Status::Unknown,
        objective: None,
        elapsed,
        nodes: None,
    };
    let clock = std::time::Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| solve_with(bi, solver_id, params)));
    match outcome {
        Ok(Some((status, objective, nodes))) => RunRecord {
            instance_id: bi.id.clone(),
            solver_id,
            status,
            objective: if matches!(status, Status::Optimal | Status::Feasible) {
                objective
            } else {
                None
            },
            elapsed: clock.elapsed().as_secs_f64(),
            nodes,
        },
        _ => unknown(clock.elapsed().as_secs_f64()),
    }
}

fn solve_with(
    bi: &BenchInstance,
    solver_id: SolverId,
    params: &SuiteParams,
) -> Option<(Status, Option<i64>, Option<u64>)> {
    let inst = &bi.instance;
    let sp = SolverParams {
        time_budget: params.budget,
        propagation: params.propagation,
        seed: params.seed,
        ..SolverParams::default()
    };
    match solver_id {
        SolverId::Oracle => {
            let r = oracle::brute_force(inst, &params.oracle).ok()?;
            Some((r.status, r.objective, Some(r.nodes)))
        }
        SolverId::Exact => {
            let r = solver::solve(inst, &sp);
            Some((r.status, r.objective, Some(r.nodes)))
        }
        SolverId::Core => {
            let r = solver::solve_core(inst, &sp);
            Some((r.status, r.objective, Some(r.nodes)))
        }
        SolverId::Heuristic => {
            let start = heuristic::construct(inst, params.seed).ok()?;
            let ls = LocalSearchParams {
                time_budget: params.budget,
                seed: params.seed,
                ..LocalSearchParams::default()
            };
            let s = heuristic::improve(inst, &start, &ls);
            Some((Status::Feasible, Some(twct(inst, &s)), None))
        }
    }
}

/// Runs every (instance, solver) cell and summarizes per class.
pub fn run_suite(
    instances: &[BenchInstance],
    solvers: &[SolverId],
    params: &SuiteParams,
) -> SuiteResult {
    resume_suite(instances, solvers, params, &[])
}

/// Like [`run_suite`] but keeps `existing` records and only runs the
/// missing (instance, solver) cells. Records are keyed and ordered by
/// `(instance_id, solver_id)`.
pub fn resume_suite(
    instances: &[BenchInstance],
    solvers: &[SolverId],
    params: &SuiteParams,
    existing: &[RunRecord],
) -> SuiteResult {
    let mut records: BTreeMap<(String, SolverId), RunRecord> = existing
        .iter()
        .map(|r| ((r.instance_id.clone(), r.solver_id), r.clone()))
        .collect();
    let todo: Vec<(&BenchInstance, SolverId)> = instances
        .iter()
        .flat_map(|bi| solvers.iter().map(move |&s| (bi, s)))
        .filter(|(bi, s)| !records.contains_key(&(bi.id.clone(), *s)))
        .collect();

    let run = || -> Vec<RunRecord> {
        todo.par_iter()
            .map(|(bi, s)| run_one(bi, *s, params))
            .collect()
    };
    let fresh = match rayon::ThreadPoolBuilder::new()
        .num_threads(params.workers.max(1))
        .build()
    {
        Ok(pool) => pool.install(run),
        Err(_) => todo.iter().map(|(bi, s)| run_one(bi, *s, params)).collect(),
    };
    for r in fresh {
        records.insert((r.instance_id.clone(), r.solver_id), r);
    }
    let records: Vec<RunRecord> = records.into_values().collect();
    let summary = summarize(instances, solvers, &records, params.ci);
    SuiteResult { records, summary }
}

/// Best objective among non-relaxation solvers that produced one.
pub fn instance_best(records: &[RunRecord], instance_id: &str) -> Option<i64> {
    records
        .iter()
        .filter(|r| r.instance_id == instance_id && !r.solver_id.is_relaxation())
        .filter_map(|r| r.objective)
        .min()
}

pub fn summarize(
    instances: &[BenchInstance],
    solvers: &[SolverId],
    records: &[RunRecord],
    ci: CiMethod,
) -> Vec<SummaryRow> {
    let lookup: BTreeMap<(&str, SolverId), &RunRecord> = records
        .iter()
        .map(|r| ((r.instance_id.as_str(), r.solver_id), r))
        .collect();
    let classes: BTreeSet<&str> = instances.iter().map(|bi| bi.class_label.as_str()).collect();
    let ranked: Vec<SolverId> = solvers
        .iter()
        .copied()
        .filter(|s| !s.is_relaxation())
        .collect();

    let mut rows = Vec::new();
    for class in classes {
        let members: Vec<&BenchInstance> = instances
            .iter()
            .filter(|bi| bi.class_label == class)
            .collect();
        let objective = |bi: &BenchInstance, s: SolverId| {
            lookup
                .get(&(bi.id.as_str(), s))
                .and_then(|r| r.objective)
        };

        for &s in &ranked {
            let gaps: Vec<f64> = members
                .iter()
                .filter_map(|bi| {
                    let own = objective(bi, s)?;
                    let best = instance_best(records, &bi.id)?;
                    relative_gap(own, best).ok()
                })
                .collect();
            if let Ok(iv) = mean_ci(&gaps, ci) {
                rows.push(SummaryRow {
                    class_label: class.to_string(),
                    metric: MetricKind::Gap,
                    solver: s,
                    baseline: None,
                    mean: iv.mean,
                    ci95: (iv.lo, iv.hi),
                    count: gaps.len(),
                });
            }
        }

        for &m1 in &ranked {
            for &m2 in &ranked {
                if m1 == m2 {
                    continue;
                }
                let pis: Vec<f64> = members
                    .iter()
                    .filter_map(|bi| percent_improvement(objective(bi, m1)?, objective(bi, m2)?).ok())
                    .collect();
                if let Ok(iv) = mean_ci(&pis, ci) {
                    rows.push(SummaryRow {
                        class_label: class.to_string(),
                        metric: MetricKind::Pi,
                        solver: m1,
                        baseline: Some(m2),
                        mean: iv.mean,
                        ci95: (iv.lo, iv.hi),
                        count: pis.len(),
                    });
                }
            }
        }
    }
    rows
}
