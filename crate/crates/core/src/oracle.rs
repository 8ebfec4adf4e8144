//! Exhaustive reference solver for tiny instances.
//!
//! Enumerates every assignment of jobs to machines and every permutation of
//! each machine's jobs, filters by the run-length windows, times the
//! survivors with [`earliest_timing`] and keeps the best. Ties are broken by
//! the smallest [`decision_key`], the same rule the exact search follows.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    decision_key, earliest_timing, twct, windows_respected, Assignment, Instance, JobId, Schedule,
};
use crate::solver::{SolveReport, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_jobs: usize,
    /// Cap on the number of complete (assignment, permutation) candidates.
    pub max_states: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_jobs: 8,
            max_states: 20_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance has {jobs} jobs, oracle limit is {limit}")]
    TooLarge { jobs: usize, limit: usize },
    #[error("enumeration needs {needed} candidates, limit is {limit}")]
    TooManyStates { needed: u128, limit: u64 },
}

/// Number of (assignment, permutation) pairs: `n! * C(n + m - 1, m - 1)`.
pub fn candidate_count(n_jobs: usize, n_machines: usize) -> u128 {
    let n = n_jobs as u128;
    let m = n_machines as u128;
    let fact: u128 = (1..=n).product();
    // C(n + m - 1, m - 1)
    let mut binom: u128 = 1;
    for k in 1..m {
        binom = binom * (n + k) / k;
    }
    fact * binom
}

/// Next lexicographic permutation in place; false after the last one.
fn next_permutation(v: &mut [JobId]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).unwrap();
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

struct Best {
    value: i64,
    key: Vec<u64>,
    schedule: Schedule,
}

pub fn brute_force(inst: &Instance, lim: &OracleLimits) -> Result<SolveReport, OracleError> {
    let clock = Instant::now();
    let n = inst.jobs.len();
    if n > lim.max_jobs {
        return Err(OracleError::TooLarge {
            jobs: n,
            limit: lim.max_jobs,
        });
    }
    let needed = candidate_count(n, inst.n_machines);
    if needed > lim.max_states as u128 {
        return Err(OracleError::TooManyStates {
            needed,
            limit: lim.max_states,
        });
    }

    let mut ids: Vec<JobId> = inst.jobs.iter().map(|j| j.id).collect();
    ids.sort_unstable();
    let m = inst.n_machines;
    let mut machine_of = vec![0usize; n];
    let mut best: Option<Best> = None;
    let mut visited = 0u64;

    loop {
        // every per-machine permutation of this assignment
        let mut seqs: Vec<Vec<JobId>> = vec![Vec::new(); m];
        for (k, &id) in ids.iter().enumerate() {
            seqs[machine_of[k]].push(id);
        }
        loop {
            visited += 1;
            let asg = Assignment::new(seqs.clone());
            if windows_respected(inst, &asg) {
                let sched = earliest_timing(inst, &asg).expect("enumeration is a partition");
                let value = twct(inst, &sched);
                let better = match &best {
                    None => true,
                    Some(b) if value < b.value => true,
                    Some(b) if value == b.value => {
                        let key = decision_key(inst, &asg);
                        key < b.key
                    }
                    _ => false,
                };
                if better {
                    best = Some(Best {
                        value,
                        key: decision_key(inst, &asg),
                        schedule: sched,
                    });
                }
            }
            // odometer over machines, last machine fastest
            let mut advanced = false;
            for seq in seqs.iter_mut().rev() {
                if next_permutation(seq) {
                    advanced = true;
                    break;
                }
                seq.sort_unstable();
            }
            if !advanced {
                break;
            }
        }

        // next assignment vector, last job fastest
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(report(best, visited, clock.elapsed()));
            }
            k -= 1;
            machine_of[k] += 1;
            if machine_of[k] < m {
                break;
            }
            machine_of[k] = 0;
        }
    }
}

fn report(best: Option<Best>, nodes: u64, elapsed: std::time::Duration) -> SolveReport {
    match best {
        Some(b) => SolveReport {
            status: Status::Optimal,
            objective: Some(b.value),
            dual_bound: Some(b.value),
            incumbent: Some(b.schedule),
            nodes,
            elapsed,
        },
        None => SolveReport::infeasible(nodes, elapsed),
    }
}
