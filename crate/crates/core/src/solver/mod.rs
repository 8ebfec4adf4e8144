//! Exact anytime branch-and-bound.
//!
//! The tree appends jobs chronologically: each node takes the open machine
//! with the smallest current completion time (ties by index) and branches
//! on which unscheduled job it processes next, in increasing id order, or
//! on closing the machine. Leaves are therefore visited in lexicographic
//! order of [`crate::model::decision_key`], and since a leaf is accepted
//! only when strictly better than the incumbent, the first optimum reached
//! is the canonical one.
//!
//! Pruning:
//! * bound: a child is dropped when its lower bound reaches the incumbent;
//! * windows: [`PartialState::block_extension_feasible`];
//! * twins: among released jobs identical in family, ptime and weight only
//!   the lowest id is branched on;
//! * interchange: appending `k` after `j` is dropped when `k, j` is strictly
//!   cheaper and ends no later in an equivalent state.

mod state;

use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::heuristic::{self, LocalSearchParams};
use crate::model::{earliest_timing, twct, Assignment, Instance, Schedule};

pub use state::{PartialState, Propagation, SearchModel};
use state::INFEASIBLE;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverParams {
    pub time_budget: Duration,
    pub node_budget: Option<u64>,
    /// `false` solves the relaxation without size windows.
    pub enforce_sizes: bool,
    pub propagation: Propagation,
    pub seed: u64,
    /// Search threads. `1` is deterministic; more threads keep the optimal
    /// objective but may return a different optimal schedule.
    pub threads: usize,
    /// Seed the search with a construct + local-search incumbent.
    pub warm_start: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            time_budget: Duration::from_secs(60),
            node_budget: None,
            enforce_sizes: true,
            propagation: Propagation::Strong,
            seed: 0,
            threads: 1,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    Unknown,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveReport {
    pub status: Status,
    pub incumbent: Option<Schedule>,
    pub objective: Option<i64>,
    /// Proven lower bound on the optimum; `None` once infeasibility is proven.
    pub dual_bound: Option<i64>,
    pub nodes: u64,
    pub elapsed: Duration,
}

impl SolveReport {
    pub(crate) fn infeasible(nodes: u64, elapsed: Duration) -> Self {
        Self {
            status: Status::Infeasible,
            incumbent: None,
            objective: None,
            dual_bound: None,
            nodes,
            elapsed,
        }
    }
}

/// Progress notification emitted when the incumbent or the bound changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub objective: Option<i64>,
    pub dual_bound: i64,
    pub nodes: u64,
    pub elapsed: Duration,
}

/// Solves the relaxation that ignores the size windows.
pub fn solve_core(inst: &Instance, params: &SolverParams) -> SolveReport {
    solve(
        inst,
        &SolverParams {
            enforce_sizes: false,
            ..params.clone()
        },
    )
}

pub fn solve(inst: &Instance, params: &SolverParams) -> SolveReport {
    solve_with_observer(inst, params, |_| {})
}

pub fn solve_with_observer(
    inst: &Instance,
    params: &SolverParams,
    mut observer: impl FnMut(&Progress),
) -> SolveReport {
    let clock = Instant::now();
    let model = SearchModel::new(inst, params.enforce_sizes, params.propagation);
    if !model.oversized_minimums().is_empty() {
        return SolveReport::infeasible(0, clock.elapsed());
    }
    let root = PartialState::root(&model);
    let root_bound = root.lower_bound();

    let mut incumbent: Option<(i64, Schedule)> = None;
    if params.warm_start {
        let target = if params.enforce_sizes {
            inst.clone()
        } else {
            inst.relaxed()
        };
        if let Ok(start) = heuristic::construct(&target, params.seed) {
            let ls = LocalSearchParams {
                time_budget: (params.time_budget / 10).min(Duration::from_secs(2)),
                seed: params.seed,
                max_iterations: 40 * inst.jobs.len().max(1),
                max_no_improve: 25,
                ..LocalSearchParams::default()
            };
            let improved = heuristic::improve(&target, &start, &ls);
            incumbent = Some((twct(inst, &improved), improved));
        }
    }
    if let Some((value, _)) = &incumbent {
        observer(&Progress {
            objective: Some(*value),
            dual_bound: root_bound.min(*value),
            nodes: 0,
            elapsed: clock.elapsed(),
        });
    }

    let limits = Limits {
        deadline: clock + params.time_budget,
        node_budget: params.node_budget,
        nodes: AtomicU64::new(0),
        aborted: AtomicBool::new(false),
    };
    // leaves must be strictly below this value to be accepted
    let threshold = incumbent.as_ref().map(|(v, _)| v + 1).unwrap_or(INFEASIBLE);
    let best = AtomicI64::new(threshold);

    let (found, unexplored) = if params.threads > 1 {
        run_parallel(&model, &limits, &best, params.threads, &mut observer, clock)
    } else {
        let mut search = Search {
            limits: &limits,
            best: &best,
            found: None,
            observer: Some(&mut observer),
            clock,
            root_bound,
        };
        let mut state = root.clone();
        let unexplored = search.dfs(&mut state);
        (search.found, unexplored)
    };

    let nodes = limits.nodes.load(Ordering::Relaxed);
    if let Some((value, sequences)) = found {
        let schedule = earliest_timing(inst, &Assignment::new(sequences))
            .expect("search produces a partition");
        debug_assert_eq!(twct(inst, &schedule), value);
        incumbent = Some((value, schedule));
    }
    let elapsed = clock.elapsed();
    match (incumbent, unexplored) {
        (Some((value, schedule)), None) => SolveReport {
            status: Status::Optimal,
            incumbent: Some(schedule),
            objective: Some(value),
            dual_bound: Some(value),
            nodes,
            elapsed,
        },
        (Some((value, schedule)), Some(open)) => {
            let dual = open.min(value).max(root_bound.min(value));
            SolveReport {
                status: if dual >= value {
                    Status::Optimal
                } else {
                    Status::Feasible
                },
                incumbent: Some(schedule),
                objective: Some(value),
                dual_bound: Some(dual.min(value)),
                nodes,
                elapsed,
            }
        }
        (None, None) => SolveReport::infeasible(nodes, elapsed),
        (None, Some(open)) => SolveReport {
            status: Status::Unknown,
            incumbent: None,
            objective: None,
            dual_bound: Some(open.max(root_bound)),
            nodes,
            elapsed,
        },
    }
}

struct Limits {
    deadline: Instant,
    node_budget: Option<u64>,
    nodes: AtomicU64,
    aborted: AtomicBool,
}

impl Limits {
    /// Counts a node and reports whether the search must stop.
    #[inline]
    fn tick(&self) -> bool {
        if self.aborted.load(Ordering::Relaxed) {
            return true;
        }
        let n = self.nodes.fetch_add(1, Ordering::Relaxed) + 1;
        let out = self.node_budget.is_some_and(|b| n > b)
            || (n.is_multiple_of(512) && Instant::now() >= self.deadline);
        if out {
            self.aborted.store(true, Ordering::Relaxed);
        }
        out
    }
}

type Found = Option<(i64, Vec<Vec<crate::model::JobId>>)>;

struct Search<'a, 'o> {
    limits: &'a Limits,
    best: &'a AtomicI64,
    found: Found,
    observer: Option<&'o mut dyn FnMut(&Progress)>,
    clock: Instant,
    root_bound: i64,
}

#[derive(Clone, Copy)]
enum Branch {
    Job(usize),
    Close,
}

/// Children of `state` in canonical order, excluding those removed by
/// window propagation or dominance.
fn branches(state: &PartialState, machine: usize, out: &mut Vec<Branch>) {
    out.clear();
    let model = state.model();
    for job in 0..model.n_jobs() {
        if state.is_scheduled(job)
            || !state.block_extension_feasible(machine, job)
            || state.dominated_by_twin(machine, job)
            || state.dominated_by_swap(machine, job)
        {
            continue;
        }
        out.push(Branch::Job(job));
    }
    if state.can_close(machine) {
        out.push(Branch::Close);
    }
}

fn apply(state: &mut PartialState, machine: usize, branch: Branch) -> i64 {
    match branch {
        Branch::Job(job) => state.append(machine, job),
        Branch::Close => state.close(machine),
    }
}

impl Search<'_, '_> {
    /// Explores the subtree of `state`. Returns `None` when it was fully
    /// explored, or the smallest bound over its unexplored part if the
    /// search was interrupted.
    fn dfs(&mut self, state: &mut PartialState) -> Option<i64> {
        if self.limits.tick() {
            return Some(state.lower_bound());
        }
        if state.is_complete() {
            let value = state.accumulated();
            if state.closing_blocks_valid() && value < self.best.load(Ordering::Relaxed) {
                self.best.fetch_min(value, Ordering::Relaxed);
                self.found = Some((value, state.id_sequences()));
                if let Some(obs) = self.observer.as_mut() {
                    obs(&Progress {
                        objective: Some(value),
                        dual_bound: self.root_bound.min(value),
                        nodes: self.limits.nodes.load(Ordering::Relaxed),
                        elapsed: self.clock.elapsed(),
                    });
                }
            }
            return None;
        }
        let machine = state.next_machine()?;
        let mut children = Vec::new();
        branches(state, machine, &mut children);

        let mut interrupted: Option<i64> = None;
        for &branch in &children {
            let bound = apply(state, machine, branch);
            if bound < self.best.load(Ordering::Relaxed) {
                match interrupted {
                    Some(open) => interrupted = Some(open.min(bound)),
                    None => {
                        if let Some(open) = self.dfs(state) {
                            interrupted = Some(open);
                        }
                    }
                }
            }
            state.undo();
        }
        interrupted
    }
}

/// Splits the tree at a shallow frontier and searches the pieces on a
/// thread pool with a shared incumbent value.
fn run_parallel(
    model: &SearchModel,
    limits: &Limits,
    best: &AtomicI64,
    threads: usize,
    observer: &mut dyn FnMut(&Progress),
    clock: Instant,
) -> (Found, Option<i64>) {
    let root = PartialState::root(model);
    let root_bound = root.lower_bound();
    // frontier of decision prefixes, expanded breadth-first
    let mut frontier: Vec<Vec<(usize, Branch)>> = vec![Vec::new()];
    let mut finished: Found = None;
    let mut children = Vec::new();
    while frontier.len() < 8 * threads {
        let mut next = Vec::new();
        let mut expanded = false;
        for prefix in &frontier {
            let mut st = root.clone();
            for &(m, b) in prefix {
                apply(&mut st, m, b);
            }
            let Some(machine) = st.next_machine().filter(|_| !st.is_complete()) else {
                if st.is_complete() && st.closing_blocks_valid() {
                    let value = st.accumulated();
                    if finished.as_ref().is_none_or(|(v, _)| value < *v) {
                        finished = Some((value, st.id_sequences()));
                    }
                }
                continue;
            };
            branches(&st, machine, &mut children);
            for &b in &children {
                let mut p = prefix.clone();
                p.push((machine, b));
                next.push(p);
            }
            expanded = true;
        }
        frontier = next;
        if !expanded || frontier.is_empty() {
            break;
        }
    }
    if let Some((v, _)) = &finished {
        best.fetch_min(*v, Ordering::Relaxed);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    let results: Vec<(Found, Option<i64>)> = pool.install(|| {
        frontier
            .par_iter()
            .map(|prefix| {
                let mut st = root.clone();
                let mut bound = st.lower_bound();
                for &(m, b) in prefix {
                    bound = apply(&mut st, m, b);
                }
                if bound >= best.load(Ordering::Relaxed) {
                    return (None, None);
                }
                let mut search = Search {
                    limits,
                    best,
                    found: None,
                    observer: None,
                    clock,
                    root_bound,
                };
                let open = search.dfs(&mut st);
                (search.found, open)
            })
            .collect()
    });

    let mut found = finished;
    let mut unexplored: Option<i64> = None;
    for (f, open) in results {
        if let Some((v, seqs)) = f {
            if found.as_ref().is_none_or(|(b, _)| v < *b) {
                found = Some((v, seqs));
            }
        }
        if let Some(o) = open {
            unexplored = Some(unexplored.map_or(o, |u| u.min(o)));
        }
    }
    if let Some((v, _)) = &found {
        observer(&Progress {
            objective: Some(*v),
            dual_bound: root_bound.min(*v),
            nodes: limits.nodes.load(Ordering::Relaxed),
            elapsed: clock.elapsed(),
        });
    }
    (found, unexplored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasible, decode_blocks, tests::reference_instance, Job, SetupMatrix};

    fn quick() -> SolverParams {
        SolverParams {
            time_budget: Duration::from_secs(10),
            ..SolverParams::default()
        }
    }

    fn completions(inst: &Instance, s: &Schedule) -> Vec<i64> {
        (1..=5).map(|id| s.completion(inst, id).unwrap()).collect()
    }

    #[test]
    fn core_relaxation_of_reference_instance() {
        let inst = reference_instance([3, 2], [3, 2]);
        let r = solve_core(&inst, &quick());
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.objective, Some(55));
        assert_eq!(r.dual_bound, Some(55));
        assert_eq!(completions(&inst, r.incumbent.as_ref().unwrap()), vec![3, 7, 12, 14, 19]);
    }

    #[test]
    fn sized_reference_instance() {
        let inst = reference_instance([3, 2], [3, 2]);
        for propagation in [Propagation::Basic, Propagation::Strong] {
            for warm_start in [false, true] {
                let r = solve(
                    &inst,
                    &SolverParams {
                        propagation,
                        warm_start,
                        ..quick()
                    },
                );
                assert_eq!(r.status, Status::Optimal);
                assert_eq!(r.objective, Some(61));
                let s = r.incumbent.unwrap();
                assert!(check_feasible(&inst, &s).feasible());
                let blocks = decode_blocks(&inst, &s.assignment).unwrap();
                let jobs: Vec<_> = blocks.iter().map(|b| b.jobs.clone()).collect();
                assert_eq!(jobs, vec![vec![1, 2, 5], vec![3, 4]]);
            }
        }
    }

    #[test]
    fn single_job() {
        let inst = Instance {
            jobs: vec![Job {
                id: 0,
                family: 1,
                weight: 1,
                release: 1,
                ptime: 2,
            }],
            n_families: 1,
            n_machines: 1,
            setups: SetupMatrix::new(vec![vec![1], vec![0]]).unwrap(),
            min_size: vec![1],
            max_size: vec![1],
        };
        let r = solve_core(&inst, &quick());
        assert_eq!((r.status, r.objective), (Status::Optimal, Some(3)));
    }

    #[test]
    fn oversized_minimum_is_infeasible_without_search() {
        let inst = reference_instance([4, 2], [4, 2]);
        let r = solve(&inst, &quick());
        assert_eq!(r.status, Status::Infeasible);
        assert_eq!(r.nodes, 0);
        assert!(r.incumbent.is_none());
    }

    #[test]
    fn window_infeasible_instance_exhausts_tree() {
        // one machine, family 1 has 3 jobs with u1 = 2: the f1 jobs must be
        // split by f2 blocks of size exactly 2, but there are only 2 f2 jobs
        // and l2 = 2 forbids splitting them.
        let inst = reference_instance([2, 2], [2, 2]);
        let r = solve(&inst, &quick());
        assert_eq!(r.status, Status::Infeasible);
        assert_eq!(r.dual_bound, None);
    }

    #[test]
    fn node_budget_yields_anytime_result() {
        let inst = reference_instance([3, 2], [3, 2]);
        let r = solve(
            &inst,
            &SolverParams {
                node_budget: Some(1),
                warm_start: false,
                ..quick()
            },
        );
        assert_eq!(r.status, Status::Unknown);
        assert!(r.dual_bound.unwrap() <= 61);

        let r = solve(
            &inst,
            &SolverParams {
                node_budget: Some(1),
                ..quick()
            },
        );
        assert!(matches!(r.status, Status::Feasible | Status::Optimal));
        assert!(r.dual_bound.unwrap() <= r.objective.unwrap());
    }

    #[test]
    fn observer_sees_monotone_progress() {
        let inst = reference_instance([1, 1], [3, 2]);
        let mut seen = Vec::new();
        let r = solve_with_observer(&inst, &quick(), |p| seen.push(*p));
        assert!(!seen.is_empty());
        for w in seen.windows(2) {
            assert!(w[1].objective <= w[0].objective);
            assert!(w[1].dual_bound >= w[0].dual_bound);
        }
        assert_eq!(seen.last().unwrap().objective, r.objective);
    }

    #[test]
    fn parallel_matches_objective() {
        let mut inst = reference_instance([1, 1], [3, 2]);
        inst.n_machines = 2;
        let seq = solve(&inst, &quick());
        let par = solve(
            &inst,
            &SolverParams {
                threads: 3,
                ..quick()
            },
        );
        assert_eq!(seq.objective, par.objective);
        assert_eq!(par.status, Status::Optimal);
    }
}
