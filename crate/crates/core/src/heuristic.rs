//! Feasible schedules for instances too large for exact search.
//!
//! [`construct`] partitions every family into runs whose sizes fit the
//! window and places whole runs greedily; [`improve`] runs a tabu search
//! over block-aware moves that are checked against the windows before
//! being evaluated.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{earliest_timing, Assignment, FamilyId, Instance, JobId, Schedule, Time};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSearchParams {
    pub time_budget: Duration,
    pub seed: u64,
    pub tabu_tenure: usize,
    pub max_no_improve: usize,
    pub max_iterations: usize,
}

impl Default for LocalSearchParams {
    fn default() -> Self {
        Self {
            time_budget: Duration::from_secs(10),
            seed: 0,
            tabu_tenure: 10,
            max_no_improve: 200,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeuristicError {
    #[error("family {family}: {count} jobs cannot be split into runs of size {min}..={max}")]
    NoRunPartition {
        family: FamilyId,
        count: usize,
        min: usize,
        max: usize,
    },
    #[error("runs could not be placed without merging beyond a maximum block size")]
    ConstructionFailed,
}

/// Dense per-job data indexed like `inst.jobs`.
struct Dense<'a> {
    inst: &'a Instance,
    index: HashMap<JobId, usize>,
}

impl<'a> Dense<'a> {
    fn new(inst: &'a Instance) -> Self {
        Self {
            inst,
            index: inst.id_index(),
        }
    }

    #[inline]
    fn fam(&self, j: usize) -> FamilyId {
        self.inst.jobs[j].family
    }

    fn objective(&self, seqs: &[Vec<usize>]) -> i64 {
        let mut total = 0;
        for seq in seqs {
            let (mut clock, mut state): (Time, usize) = (0, 0);
            for &j in seq {
                let job = &self.inst.jobs[j];
                let start = job.release.max(clock + self.inst.setups.transition(state, job.family));
                clock = start + job.ptime;
                state = job.family;
                total += job.weight * clock;
            }
        }
        total
    }

    fn windows_ok(&self, seqs: &[Vec<usize>]) -> bool {
        seqs.iter().all(|seq| {
            let mut k = 0;
            while k < seq.len() {
                let f = self.fam(seq[k]);
                let mut e = k;
                while e < seq.len() && self.fam(seq[e]) == f {
                    e += 1;
                }
                let size = e - k;
                if size < self.inst.min_size(f) || size > self.inst.max_size(f) {
                    return false;
                }
                k = e;
            }
            true
        })
    }

    fn to_schedule(&self, seqs: &[Vec<usize>]) -> Schedule {
        let asg = Assignment::new(
            seqs.iter()
                .map(|s| s.iter().map(|&j| self.inst.jobs[j].id).collect())
                .collect(),
        );
        earliest_timing(self.inst, &asg).expect("heuristic keeps a partition")
    }

    fn dense_sequences(&self, sched: &Schedule) -> Vec<Vec<usize>> {
        sched
            .assignment
            .sequences
            .iter()
            .map(|s| s.iter().map(|id| self.index[id]).collect())
            .collect()
    }
}

/// Sizes of the runs a family is split into: `⌊n / l⌋` runs of size `l`,
/// grown round-robin toward `u` until they cover all `n` jobs.
pub fn run_sizes(count: usize, min: usize, max: usize) -> Option<Vec<usize>> {
    if count == 0 {
        return Some(Vec::new());
    }
    let runs = count / min;
    if runs == 0 || runs * max < count {
        return None;
    }
    let mut sizes = vec![min; runs];
    let mut left = count - runs * min;
    let mut k = 0;
    while left > 0 {
        if sizes[k] < max {
            sizes[k] += 1;
            left -= 1;
        }
        k = (k + 1) % runs;
    }
    Some(sizes)
}

/// Builds a feasible schedule from whole runs, or reports why it cannot.
pub fn construct(inst: &Instance, seed: u64) -> Result<Schedule, HeuristicError> {
    let dense = Dense::new(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = inst.family_counts();

    let mut runs: Vec<(FamilyId, Vec<usize>)> = Vec::new();
    for f in 1..=inst.n_families {
        let (min, max) = (inst.min_size(f), inst.max_size(f));
        let sizes = run_sizes(counts[f - 1], min, max).ok_or(HeuristicError::NoRunPartition {
            family: f,
            count: counts[f - 1],
            min,
            max,
        })?;
        let mut members: Vec<usize> = (0..inst.jobs.len()).filter(|&j| dense.fam(j) == f).collect();
        members.shuffle(&mut rng);
        members.sort_by_key(|&j| inst.jobs[j].release);
        let mut it = members.into_iter();
        for size in sizes {
            runs.push((f, it.by_ref().take(size).collect()));
        }
    }

    struct Tail {
        clock: Time,
        family: FamilyId,
        len: usize,
    }
    let mut tails: Vec<Tail> = (0..inst.n_machines)
        .map(|_| Tail {
            clock: 0,
            family: 0,
            len: 0,
        })
        .collect();
    let mut seqs: Vec<Vec<usize>> = vec![Vec::new(); inst.n_machines];
    let mut placed = vec![false; runs.len()];

    for _ in 0..runs.len() {
        let mut pick: Option<(Time, usize, usize)> = None;
        for (r, (f, jobs)) in runs.iter().enumerate() {
            if placed[r] {
                continue;
            }
            for (m, tail) in tails.iter().enumerate() {
                if tail.family == *f && tail.len + jobs.len() > inst.max_size(*f) {
                    continue;
                }
                let mut clock = tail.clock;
                let mut state = tail.family;
                for &j in jobs {
                    let job = &inst.jobs[j];
                    clock = job.release.max(clock + inst.setups.transition(state, job.family))
                        + job.ptime;
                    state = job.family;
                }
                if pick.is_none_or(|(c, _, _)| clock < c) {
                    pick = Some((clock, r, m));
                }
            }
        }
        let (clock, r, m) = pick.ok_or(HeuristicError::ConstructionFailed)?;
        placed[r] = true;
        let (f, jobs) = &runs[r];
        let tail = &mut tails[m];
        tail.len = if tail.family == *f { tail.len + jobs.len() } else { jobs.len() };
        tail.family = *f;
        tail.clock = clock;
        seqs[m].extend(jobs);
    }
    debug_assert!(dense.windows_ok(&seqs));
    Ok(dense.to_schedule(&seqs))
}

/// Maximal same-family runs of one sequence as `(start, end)` ranges.
fn blocks_of(dense: &Dense, seq: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut k = 0;
    while k < seq.len() {
        let f = dense.fam(seq[k]);
        let mut e = k;
        while e < seq.len() && dense.fam(seq[e]) == f {
            e += 1;
        }
        out.push((k, e));
        k = e;
    }
    out
}

struct Candidate {
    seqs: Vec<Vec<usize>>,
    /// `(job, machine)` pairs the move places; checked against the tabu list.
    attrs: Vec<(usize, usize)>,
    /// `(job, machine)` pairs made tabu once the move is taken.
    reverse: Vec<(usize, usize)>,
}

fn neighbours(dense: &Dense, seqs: &[Vec<usize>], out: &mut Vec<Candidate>) {
    out.clear();
    let blocks: Vec<Vec<(usize, usize)>> = seqs.iter().map(|s| blocks_of(dense, s)).collect();
    let inst = dense.inst;

    // (a) swap two jobs inside a block
    for (m, bl) in blocks.iter().enumerate() {
        for &(s, e) in bl {
            for i in s..e {
                for k in i + 1..e {
                    let mut next = seqs.to_vec();
                    next[m].swap(i, k);
                    out.push(Candidate {
                        attrs: vec![(seqs[m][i], m), (seqs[m][k], m)],
                        reverse: vec![(seqs[m][i], m), (seqs[m][k], m)],
                        seqs: next,
                    });
                }
            }
        }
    }

    // (b) move a job into another block of its family
    for (ma, bla) in blocks.iter().enumerate() {
        for &(sa, ea) in bla {
            let f = dense.fam(seqs[ma][sa]);
            if ea - sa <= inst.min_size(f) {
                continue;
            }
            for (mb, blb) in blocks.iter().enumerate() {
                for &(sb, eb) in blb {
                    if (ma, sa) == (mb, sb)
                        || dense.fam(seqs[mb][sb]) != f
                        || eb - sb + 1 > inst.max_size(f)
                    {
                        continue;
                    }
                    for i in sa..ea {
                        let job = seqs[ma][i];
                        for slot in sb..=eb {
                            let mut next = seqs.to_vec();
                            next[ma].remove(i);
                            let mut at = slot;
                            if ma == mb && i < sb {
                                at -= 1;
                            }
                            next[mb].insert(at, job);
                            out.push(Candidate {
                                seqs: next,
                                attrs: vec![(job, mb)],
                                reverse: vec![(job, ma)],
                            });
                        }
                    }
                }
            }
        }
    }

    // (c) relocate a whole block to a block boundary elsewhere
    for (ma, bla) in blocks.iter().enumerate() {
        for &(sa, ea) in bla {
            let moved: Vec<usize> = seqs[ma][sa..ea].to_vec();
            for mb in 0..seqs.len() {
                let mut rest = seqs[mb].clone();
                if ma == mb {
                    rest.drain(sa..ea);
                }
                let bounds: Vec<usize> = std::iter::once(0)
                    .chain(blocks_of(dense, &rest).into_iter().map(|(_, e)| e))
                    .collect();
                for &at in &bounds {
                    if ma == mb && at == sa {
                        continue;
                    }
                    let mut next = seqs.to_vec();
                    if ma != mb {
                        next[ma].drain(sa..ea);
                    }
                    let mut line = rest.clone();
                    line.splice(at..at, moved.iter().copied());
                    next[mb] = line;
                    out.push(Candidate {
                        seqs: next,
                        attrs: vec![(moved[0], mb)],
                        reverse: vec![(moved[0], ma)],
                    });
                }
            }
        }
    }

    // (d) swap two blocks
    let flat: Vec<(usize, usize, usize)> = blocks
        .iter()
        .enumerate()
        .flat_map(|(m, bl)| bl.iter().map(move |&(s, e)| (m, s, e)))
        .collect();
    for x in 0..flat.len() {
        for y in x + 1..flat.len() {
            let (ma, sa, ea) = flat[x];
            let (mb, sb, eb) = flat[y];
            let a: Vec<usize> = seqs[ma][sa..ea].to_vec();
            let b: Vec<usize> = seqs[mb][sb..eb].to_vec();
            let mut next = seqs.to_vec();
            if ma == mb {
                // sa < sb on the same machine
                let line = &seqs[ma];
                let mut swapped = line[..sa].to_vec();
                swapped.extend(&b);
                swapped.extend(&line[ea..sb]);
                swapped.extend(&a);
                swapped.extend(&line[eb..]);
                next[ma] = swapped;
            } else {
                next[ma].splice(sa..ea, b.iter().copied());
                next[mb].splice(sb..eb, a.iter().copied());
            }
            out.push(Candidate {
                seqs: next,
                attrs: vec![(a[0], mb), (b[0], ma)],
                reverse: vec![(a[0], ma), (b[0], mb)],
            });
        }
    }

    // (e) merge two blocks of the same family
    for x in 0..flat.len() {
        for y in 0..flat.len() {
            if x == y {
                continue;
            }
            let (ma, sa, ea) = flat[x];
            let (mb, sb, eb) = flat[y];
            let f = dense.fam(seqs[ma][sa]);
            if dense.fam(seqs[mb][sb]) != f || (ea - sa) + (eb - sb) > inst.max_size(f) {
                continue;
            }
            // append block y to the end of block x
            let moved: Vec<usize> = seqs[mb][sb..eb].to_vec();
            let mut next = seqs.to_vec();
            if ma == mb {
                let line = &seqs[ma];
                let mut merged = Vec::with_capacity(line.len());
                for (k, &j) in line.iter().enumerate() {
                    if (sb..eb).contains(&k) {
                        continue;
                    }
                    merged.push(j);
                    if k + 1 == ea {
                        merged.extend(&moved);
                    }
                }
                next[ma] = merged;
            } else {
                next[mb].drain(sb..eb);
                next[ma].splice(ea..ea, moved.iter().copied());
            }
            out.push(Candidate {
                seqs: next,
                attrs: vec![(moved[0], ma)],
                reverse: vec![(moved[0], mb)],
            });
        }
    }
}

/// Tabu search from a feasible `start`. Never returns anything worse.
pub fn improve(inst: &Instance, start: &Schedule, params: &LocalSearchParams) -> Schedule {
    let clock = Instant::now();
    let dense = Dense::new(inst);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut current = dense.dense_sequences(start);
    let start_value = dense.objective(&current);
    let mut best = current.clone();
    let mut best_value = start_value;
    let mut tabu: HashMap<(usize, usize), usize> = HashMap::new();
    let mut no_improve = 0;
    let mut pool = Vec::new();

    for iter in 0..params.max_iterations {
        if no_improve >= params.max_no_improve || clock.elapsed() >= params.time_budget {
            break;
        }
        neighbours(&dense, &current, &mut pool);
        let mut chosen: Option<(i64, usize)> = None;
        let mut ties = 0u32;
        for (k, cand) in pool.iter().enumerate() {
            if !dense.windows_ok(&cand.seqs) {
                continue;
            }
            let value = dense.objective(&cand.seqs);
            let is_tabu = cand
                .attrs
                .iter()
                .any(|a| tabu.get(a).is_some_and(|&until| until > iter));
            if is_tabu && value >= best_value {
                continue;
            }
            match chosen {
                Some((v, _)) if value > v => {}
                Some((v, _)) if value == v => {
                    ties += 1;
                    if rng.gen_range(0..=ties) == 0 {
                        chosen = Some((value, k));
                    }
                }
                _ => {
                    chosen = Some((value, k));
                    ties = 0;
                }
            }
        }
        let Some((value, k)) = chosen else { break };
        let cand = pool.swap_remove(k);
        for &attr in &cand.reverse {
            tabu.insert(attr, iter + 1 + params.tabu_tenure);
        }
        current = cand.seqs;
        debug_assert!(crate::model::check_feasible(inst, &dense.to_schedule(&current)).feasible());
        if value < best_value {
            best_value = value;
            best = current.clone();
            no_improve = 0;
        } else {
            no_improve += 1;
        }
    }

    if best_value < start_value {
        dense.to_schedule(&best)
    } else {
        start.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_feasible, tests::reference_instance, twct};

    #[test]
    fn run_partitions() {
        assert_eq!(run_sizes(7, 2, 3), Some(vec![3, 2, 2]));
        assert_eq!(run_sizes(5, 3, 3), None);
        assert_eq!(run_sizes(5, 5, 5), Some(vec![5]));
        assert_eq!(run_sizes(9, 2, 9), Some(vec![3, 2, 2, 2]));
        assert_eq!(run_sizes(0, 2, 3), Some(vec![]));
    }

    #[test]
    fn construct_reference_instance_is_feasible() {
        let inst = reference_instance([3, 2], [3, 2]);
        let s = construct(&inst, 0).unwrap();
        assert!(check_feasible(&inst, &s).feasible());
        assert!(twct(&inst, &s) >= 61);
    }

    #[test]
    fn one_run_per_family_when_windows_are_full() {
        let inst = reference_instance([3, 2], [3, 2]);
        let s = construct(&inst, 9).unwrap();
        let blocks = crate::model::decode_blocks(&inst, &s.assignment).unwrap();
        assert_eq!(blocks.len(), 2);
    }

    #[test]
    fn unsplittable_family_fails() {
        let mut inst = reference_instance([3, 2], [3, 2]);
        for (k, j) in inst.jobs.iter_mut().enumerate() {
            j.family = 1;
            j.id = k as JobId + 1;
        }
        inst.min_size = vec![3, 1];
        inst.max_size = vec![3, 1];
        assert_eq!(
            construct(&inst, 0),
            Err(HeuristicError::NoRunPartition {
                family: 1,
                count: 5,
                min: 3,
                max: 3
            })
        );
    }

    #[test]
    fn improve_reaches_reference_instance_optimum() {
        let inst = reference_instance([3, 2], [3, 2]);
        let start = construct(&inst, 0).unwrap();
        let s = improve(&inst, &start, &LocalSearchParams::default());
        assert!(check_feasible(&inst, &s).feasible());
        assert_eq!(twct(&inst, &s), 61);
    }

    #[test]
    fn improve_keeps_an_optimal_start() {
        let inst = reference_instance([3, 2], [3, 2]);
        let opt = earliest_timing(&inst, &Assignment::new(vec![vec![1, 2, 5, 3, 4]])).unwrap();
        let s = improve(&inst, &opt, &LocalSearchParams::default());
        assert_eq!(twct(&inst, &s), 61);
    }

    #[test]
    fn relaxed_reference_instance_improves_to_core_optimum() {
        let inst = reference_instance([3, 2], [3, 2]).relaxed();
        let start = construct(&inst, 0).unwrap();
        let s = improve(&inst, &start, &LocalSearchParams::default());
        assert!(twct(&inst, &s) >= 55);
        assert!(twct(&inst, &s) <= twct(&inst, &start));
    }
}
