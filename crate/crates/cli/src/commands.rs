//! Subcommand implementations. Each returns an [`Outcome`] instead of
//! printing, so the binary and the tests share one code path.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context, Result};

use sbatch_core::bench::{self, BenchInstance, MetricKind, RunRecord, SolverId, SuiteParams, SummaryRow};
use sbatch_core::heuristic::{self, HeuristicError, LocalSearchParams};
use sbatch_core::instgen;
use sbatch_core::model::{check_feasible, validate_instance, Instance, Schedule, Severity};
use sbatch_core::oracle::{self, OracleLimits};
use sbatch_core::solver::{self, Propagation, SolveReport, SolverParams, Status};

use crate::config::{class_label, GenFile};
use crate::files::{read_json, to_json, write_text, InstanceFile, SolutionFile, SolverMeta};
use crate::gantt;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Invalid = 1,
    Input = 2,
    Infeasible = 3,
    Unknown = 4,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub exit: Exit,
    pub stdout: Vec<String>,
    pub stderr: Vec<String>,
}

impl Outcome {
    fn new(exit: Exit) -> Self {
        Self {
            exit,
            stdout: Vec::new(),
            stderr: Vec::new(),
        }
    }

    fn input_error(err: anyhow::Error) -> Self {
        let mut o = Self::new(Exit::Input);
        o.stderr.push(format!("error: {err:#}"));
        o
    }

    pub fn code(&self) -> i32 {
        self.exit as i32
    }
}

/// Runs `body`, mapping any error to exit code 2 with a diagnostic.
fn guarded(body: impl FnOnce() -> Result<Outcome>) -> Outcome {
    body().unwrap_or_else(Outcome::input_error)
}

pub fn parse_propagation(s: &str) -> Result<Propagation, String> {
    match s {
        "basic" => Ok(Propagation::Basic),
        "strong" => Ok(Propagation::Strong),
        other => Err(format!("unknown propagation level `{other}` (basic|strong)")),
    }
}

pub fn parse_solver(s: &str) -> Result<SolverId, String> {
    SolverId::parse(s).ok_or_else(|| format!("unknown solver `{s}` (exact|core|heuristic|oracle)"))
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let file: InstanceFile = read_json(path)?;
    file.to_instance()
        .with_context(|| format!("invalid instance {}", path.display()))
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

pub fn cmd_gen(config: &Path, out_dir: &Path) -> Outcome {
    guarded(|| {
        let text = std::fs::read_to_string(config)
            .with_context(|| format!("cannot read {}", config.display()))?;
        let file = GenFile::parse(&text).with_context(|| format!("bad config {}", config.display()))?;
        let cells = file.cells()?;
        let core_params = SolverParams {
            time_budget: Duration::from_secs(24 * 3600),
            node_budget: Some(file.core_node_budget),
            ..SolverParams::default()
        };
        let mut out = Outcome::new(Exit::Ok);
        for cell in cells {
            let inst = instgen::generate(&cell.config, &core_params)
                .with_context(|| format!("generating {}", cell.file_name))?;
            let path = out_dir.join(&cell.file_name);
            write_text(&path, &to_json(&InstanceFile::from_instance(&inst)))?;
            out.stdout.push(path.display().to_string());
        }
        Ok(out)
    })
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SolveArgs {
    pub instance: PathBuf,
    pub solver: SolverId,
    pub budget: Duration,
    pub seed: u64,
    pub propagation: Propagation,
    pub threads: usize,
    /// Leave wall-clock time out of the solution file.
    pub reproducible: bool,
    /// `None` prints the solution to standard output.
    pub out: Option<PathBuf>,
}

impl SolveArgs {
    pub fn new(instance: impl Into<PathBuf>, solver: SolverId) -> Self {
        Self {
            instance: instance.into(),
            solver,
            budget: Duration::from_secs(60),
            seed: 0,
            propagation: Propagation::Strong,
            threads: 1,
            reproducible: false,
            out: None,
        }
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Outcome {
    guarded(|| {
        let inst = load_instance(&args.instance)?;
        let issues = validate_instance(&inst);
        let malformed: Vec<String> = issues
            .iter()
            .filter(|v| v.severity == Severity::Error && !v.is_infeasibility())
            .map(ToString::to_string)
            .collect();
        if !malformed.is_empty() {
            let mut o = Outcome::new(Exit::Input);
            o.stderr = malformed;
            return Ok(o);
        }

        let report = match run_solver(&inst, args)? {
            Ok(report) => report,
            Err(infeasible) => {
                let mut o = Outcome::new(Exit::Infeasible);
                o.stderr.push(format!("infeasible: {infeasible}"));
                return Ok(o);
            }
        };

        let mut out = Outcome::new(match report.status {
            Status::Optimal | Status::Feasible => Exit::Ok,
            Status::Infeasible => Exit::Infeasible,
            Status::Unknown => Exit::Unknown,
        });
        let Some(sched) = &report.incumbent else {
            out.stderr.push(format!(
                "status {}: no schedule after {} nodes",
                report.status, report.nodes
            ));
            return Ok(out);
        };
        let meta = SolverMeta {
            id: args.solver.name().to_string(),
            budget: args.budget.as_secs_f64(),
            seed: args.seed,
            elapsed: (!args.reproducible).then_some(report.elapsed.as_secs_f64()),
            nodes: (args.solver != SolverId::Heuristic).then_some(report.nodes),
            dual_bound: report.dual_bound,
        };
        let instance_ref = args
            .instance
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let file = SolutionFile::new(&inst, instance_ref, sched, report.status, meta)?;
        let text = to_json(&file);
        match &args.out {
            Some(path) => {
                write_text(path, &text)?;
                out.stderr.push(format!(
                    "{} objective {} -> {}",
                    report.status,
                    file.objective,
                    path.display()
                ));
            }
            None => out.stdout.push(text.trim_end().to_string()),
        }
        Ok(out)
    })
}

/// Outer error: input problem. Inner error: proven infeasibility.
fn run_solver(inst: &Instance, args: &SolveArgs) -> Result<Result<SolveReport, String>> {
    let params = SolverParams {
        time_budget: args.budget,
        propagation: args.propagation,
        seed: args.seed,
        threads: args.threads.max(1),
        ..SolverParams::default()
    };
    let clock = std::time::Instant::now();
    Ok(Ok(match args.solver {
        SolverId::Exact => solver::solve(inst, &params),
        SolverId::Core => solver::solve_core(inst, &params),
        SolverId::Oracle => oracle::brute_force(inst, &OracleLimits::default())
            .map_err(|e| anyhow!("oracle: {e}"))?,
        SolverId::Heuristic => {
            let start = match heuristic::construct(inst, args.seed) {
                Ok(s) => s,
                Err(e @ HeuristicError::NoRunPartition { .. }) => return Ok(Err(e.to_string())),
                Err(HeuristicError::ConstructionFailed) => {
                    return Ok(Ok(SolveReport {
                        status: Status::Unknown,
                        incumbent: None,
                        objective: None,
                        dual_bound: None,
                        nodes: 0,
                        elapsed: clock.elapsed(),
                    }))
                }
            };
            let ls = LocalSearchParams {
                time_budget: args.budget,
                seed: args.seed,
                ..LocalSearchParams::default()
            };
            let sched = heuristic::improve(inst, &start, &ls);
            SolveReport {
                status: Status::Feasible,
                objective: Some(sbatch_core::model::twct(inst, &sched)),
                incumbent: Some(sched),
                dual_bound: None,
                nodes: 0,
                elapsed: clock.elapsed(),
            }
        }
    }))
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

pub fn cmd_validate(instance: &Path, solution: Option<&Path>) -> Outcome {
    guarded(|| {
        let inst = load_instance(instance)?;
        let mut out = Outcome::new(Exit::Ok);
        let mut failures = 0;
        for v in validate_instance(&inst) {
            if v.severity == Severity::Error {
                failures += 1;
            }
            out.stdout.push(v.to_string());
        }
        if failures == 0 {
            if let Some(path) = solution {
                let file: SolutionFile = read_json(path)?;
                let sched = file.to_schedule(inst.n_machines)?;
                for v in check_feasible(&inst, &sched).violations {
                    failures += 1;
                    out.stdout.push(v.to_string());
                }
                for issue in file.consistency_issues(&inst, &sched) {
                    failures += 1;
                    out.stdout.push(issue);
                }
            }
        }
        if failures > 0 {
            out.exit = Exit::Invalid;
        }
        Ok(out)
    })
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub pattern: String,
    pub solvers: Vec<SolverId>,
    pub budget: Duration,
    pub seed: u64,
    pub workers: usize,
    /// Line-delimited records; the summary goes next to it as
    /// `<stem>.summary.csv`.
    pub out: PathBuf,
}

pub fn summary_path(records: &Path) -> PathBuf {
    records.with_extension("summary.csv")
}

pub fn cmd_bench(args: &BenchArgs) -> Outcome {
    guarded(|| {
        let mut paths: Vec<PathBuf> = glob::glob(&args.pattern)
            .with_context(|| format!("bad pattern {}", args.pattern))?
            .collect::<Result<_, _>>()?;
        paths.sort();
        if paths.is_empty() {
            return Err(anyhow!("no instance files match {}", args.pattern));
        }
        let solvers: Vec<SolverId> = {
            let mut seen = BTreeSet::new();
            args.solvers.iter().copied().filter(|s| seen.insert(*s)).collect()
        };
        if solvers.is_empty() {
            return Err(anyhow!("no solvers given"));
        }

        let mut instances = Vec::new();
        for path in &paths {
            let inst = load_instance(path)?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            instances.push(BenchInstance {
                class_label: class_label(&stem, inst.jobs.len(), inst.n_families, inst.n_machines),
                id: stem,
                instance: inst,
            });
        }

        let existing = read_records(&args.out)?;
        let params = SuiteParams {
            budget: args.budget,
            seed: args.seed,
            workers: args.workers.max(1),
            ..SuiteParams::default()
        };
        let result = bench::resume_suite(&instances, &solvers, &params, &existing);

        let mut lines = String::new();
        for r in &result.records {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
        }
        write_text(&args.out, &lines)?;
        let table = summary_table(&solvers, &result.summary);
        write_text(&summary_path(&args.out), &table)?;

        let mut out = Outcome::new(Exit::Ok);
        out.stdout.extend(table.lines().map(str::to_string));
        let unknown = result
            .records
            .iter()
            .filter(|r| r.status == Status::Unknown)
            .count();
        out.stderr.push(format!(
            "{} records ({} unknown) -> {}",
            result.records.len(),
            unknown,
            args.out.display()
        ));
        Ok(out)
    })
}

fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(k, l)| {
            serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), k + 1))
        })
        .collect()
}

/// One row per class. Every ranked solver gets `gap_<s>_{mean,lo,hi,n}`
/// columns and every ordered pair `pi_<a>_<b>_{mean,lo,hi,n}`; cells without
/// data are empty.
pub fn summary_table(solvers: &[SolverId], rows: &[SummaryRow]) -> String {
    let ranked: Vec<SolverId> = solvers.iter().copied().filter(|s| *s != SolverId::Core).collect();
    let mut columns: Vec<(MetricKind, SolverId, Option<SolverId>)> =
        ranked.iter().map(|&s| (MetricKind::Gap, s, None)).collect();
    for &a in &ranked {
        for &b in &ranked {
            if a != b {
                columns.push((MetricKind::Pi, a, Some(b)));
            }
        }
    }
    let classes: BTreeSet<&str> = rows.iter().map(|r| r.class_label.as_str()).collect();

    let mut s = String::from("class");
    for (kind, a, b) in &columns {
        let name = match (kind, b) {
            (MetricKind::Gap, _) => format!("gap_{}", a.name()),
            (MetricKind::Pi, Some(b)) => format!("pi_{}_{}", a.name(), b.name()),
            (MetricKind::Pi, None) => unreachable!(),
        };
        let _ = write!(s, ",{name}_mean,{name}_lo,{name}_hi,{name}_n");
    }
    s.push('\n');
    for class in classes {
        s.push_str(class);
        for (kind, a, b) in &columns {
            match rows.iter().find(|r| {
                r.class_label == class && r.metric == *kind && r.solver == *a && r.baseline == *b
            }) {
                Some(r) => {
                    let _ = write!(s, ",{:.6},{:.6},{:.6},{}", r.mean, r.ci95.0, r.ci95.1, r.count);
                }
                None => s.push_str(",,,,"),
            }
        }
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------------
// gantt
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GanttFormat {
    Json,
    Svg,
}

pub fn parse_gantt_format(s: &str) -> Result<GanttFormat, String> {
    match s {
        "json" => Ok(GanttFormat::Json),
        "svg" => Ok(GanttFormat::Svg),
        other => Err(format!("unknown format `{other}` (json|svg)")),
    }
}

pub fn cmd_gantt(
    instance: &Path,
    solution: &Path,
    format: GanttFormat,
    out_path: Option<&Path>,
    force: bool,
) -> Outcome {
    guarded(|| {
        let inst = load_instance(instance)?;
        let file: SolutionFile = read_json(solution)?;
        let sched: Schedule = file.to_schedule(inst.n_machines)?;
        let report = check_feasible(&inst, &sched);
        let mut out = Outcome::new(Exit::Ok);
        if !report.feasible() {
            let partition = report
                .violations
                .iter()
                .any(|v| v.kind == sbatch_core::model::ViolationKind::NotPartition);
            out.stderr
                .extend(report.violations.iter().map(ToString::to_string));
            if !force || partition {
                out.exit = Exit::Invalid;
                out.stderr.push("refusing to render an infeasible schedule".into());
                return Ok(out);
            }
        }
        let chart = gantt::build(&inst, &sched);
        let text = match format {
            GanttFormat::Json => to_json(&chart),
            GanttFormat::Svg => gantt::render_svg(&chart),
        };
        match out_path {
            Some(p) => write_text(p, &text)?,
            None => out.stdout.push(text.trim_end().to_string()),
        }
        Ok(out)
    })
}
