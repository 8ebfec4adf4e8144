//! Search-time view of a partially built schedule.
//!
//! Jobs are appended to machine sequences one at a time under earliest
//! timing, so the accumulated weighted completion of the prefix is exact.
//! The open block of a machine is its trailing same-family run; its family
//! is the machine state and its length is the current block size.

use crate::model::{FamilyId, Instance, JobId, Time};

/// Bound value used for dead states.
pub(crate) const INFEASIBLE: i64 = i64::MAX / 4;

/// How much block-size reasoning runs on each extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    /// Local window checks on the extended machine only.
    Basic,
    /// Adds remaining-job counting across all open blocks.
    #[default]
    Strong,
}

/// Instance data laid out for the search. Jobs are re-indexed in increasing
/// id order so that index order equals id order.
#[derive(Debug, Clone)]
pub struct SearchModel {
    pub(crate) ids: Vec<JobId>,
    pub(crate) fam: Vec<FamilyId>,
    pub(crate) weight: Vec<i64>,
    pub(crate) release: Vec<Time>,
    pub(crate) ptime: Vec<Time>,
    pub(crate) n_machines: usize,
    pub(crate) n_families: usize,
    /// `tau[s][f]`, state `s` in `0..=F`, family `f` in `1..=F`; zero when `s == f`.
    pub(crate) tau: Vec<Vec<Time>>,
    /// Shortest-path closure of `tau`, used only for bounds.
    pub(crate) dist: Vec<Vec<Time>>,
    /// `max(0, max_h tau[a][h] - tau[b][h])`: worst extra setup of ending in
    /// family `a` instead of `b`.
    pub(crate) end_penalty: Vec<Vec<Time>>,
    pub(crate) min_size: Vec<usize>,
    pub(crate) max_size: Vec<usize>,
    pub(crate) family_count: Vec<usize>,
    pub(crate) enforce_sizes: bool,
    pub(crate) propagation: Propagation,
    /// Jobs in WSPT order (p/w ascending).
    pub(crate) wspt: Vec<usize>,
    /// Equivalence class of jobs identical in (family, ptime, weight).
    pub(crate) class: Vec<usize>,
}

impl SearchModel {
    pub fn new(inst: &Instance, enforce_sizes: bool, propagation: Propagation) -> Self {
        let mut order: Vec<usize> = (0..inst.jobs.len()).collect();
        order.sort_by_key(|&i| inst.jobs[i].id);
        let jobs: Vec<_> = order.iter().map(|&i| inst.jobs[i]).collect();
        let nf = inst.n_families;

        let mut tau = vec![vec![0; nf + 1]; nf + 1];
        for (s, row) in tau.iter_mut().enumerate() {
            for (f, cell) in row.iter_mut().enumerate().skip(1) {
                *cell = inst.setups.transition(s, f);
            }
        }
        let mut dist = tau.clone();
        for via in 1..=nf {
            for s in 0..=nf {
                for f in 1..=nf {
                    let through = dist[s][via] + dist[via][f];
                    if through < dist[s][f] {
                        dist[s][f] = through;
                    }
                }
            }
        }
        let mut end_penalty = vec![vec![0; nf + 1]; nf + 1];
        for a in 1..=nf {
            for b in 1..=nf {
                end_penalty[a][b] = (1..=nf)
                    .map(|h| tau[a][h] - tau[b][h])
                    .max()
                    .unwrap_or(0)
                    .max(0);
            }
        }

        let mut min_size = vec![0; nf + 1];
        let mut max_size = vec![usize::MAX; nf + 1];
        let mut family_count = vec![0; nf + 1];
        for job in &jobs {
            family_count[job.family] += 1;
        }
        for f in 1..=nf {
            if enforce_sizes {
                min_size[f] = inst.min_size(f);
                max_size[f] = inst.max_size(f);
            } else {
                min_size[f] = 1;
            }
        }

        let mut wspt: Vec<usize> = (0..jobs.len()).collect();
        // p_a / w_a < p_b / w_b  <=>  p_a * w_b < p_b * w_a
        wspt.sort_by(|&a, &b| {
            (jobs[a].ptime * jobs[b].weight)
                .cmp(&(jobs[b].ptime * jobs[a].weight))
                .then(a.cmp(&b))
        });

        let mut class = Vec::with_capacity(jobs.len());
        for (i, job) in jobs.iter().enumerate() {
            let rep = (0..i)
                .find(|&k| {
                    jobs[k].family == job.family
                        && jobs[k].ptime == job.ptime
                        && jobs[k].weight == job.weight
                })
                .map(|k| class[k])
                .unwrap_or(i);
            class.push(rep);
        }

        Self {
            ids: jobs.iter().map(|j| j.id).collect(),
            fam: jobs.iter().map(|j| j.family).collect(),
            weight: jobs.iter().map(|j| j.weight).collect(),
            release: jobs.iter().map(|j| j.release).collect(),
            ptime: jobs.iter().map(|j| j.ptime).collect(),
            n_machines: inst.n_machines,
            n_families: nf,
            tau,
            dist,
            end_penalty,
            min_size,
            max_size,
            family_count,
            enforce_sizes,
            propagation,
            wspt,
            class,
        }
    }

    pub fn n_jobs(&self) -> usize {
        self.ids.len()
    }

    /// Search index of the job with the given id.
    pub fn index_of(&self, id: JobId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Families whose minimum block size exceeds their job count.
    pub(crate) fn oversized_minimums(&self) -> Vec<FamilyId> {
        if !self.enforce_sizes {
            return Vec::new();
        }
        (1..=self.n_families)
            .filter(|&f| self.family_count[f] > 0 && self.min_size[f] > self.family_count[f])
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct MachineState {
    pub(crate) seq: Vec<usize>,
    ends: Vec<Time>,
    run_lens: Vec<usize>,
    pub(crate) closed: bool,
}

impl MachineState {
    #[inline]
    pub(crate) fn clock(&self) -> Time {
        self.ends.last().copied().unwrap_or(0)
    }

    #[inline]
    fn open_len(&self) -> usize {
        self.run_lens.last().copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Append { machine: usize, floor: i64 },
    Close { machine: usize, floor: i64 },
}

/// A node of the search tree.
#[derive(Debug, Clone)]
pub struct PartialState<'m> {
    pub(crate) model: &'m SearchModel,
    pub(crate) machines: Vec<MachineState>,
    scheduled: Vec<bool>,
    remaining: Vec<usize>,
    pub(crate) n_unscheduled: usize,
    acc: i64,
    floor: i64,
    trail: Vec<Step>,
}

impl<'m> PartialState<'m> {
    pub fn root(model: &'m SearchModel) -> Self {
        let mut state = Self {
            model,
            machines: vec![MachineState::default(); model.n_machines],
            scheduled: vec![false; model.n_jobs()],
            remaining: model.family_count.clone(),
            n_unscheduled: model.n_jobs(),
            acc: 0,
            floor: 0,
            trail: Vec::new(),
        };
        state.floor = state.raw_bound();
        state
    }

    pub fn model(&self) -> &'m SearchModel {
        self.model
    }

    /// Weighted completion of the jobs placed so far.
    pub fn accumulated(&self) -> i64 {
        self.acc
    }

    pub fn is_complete(&self) -> bool {
        self.n_unscheduled == 0
    }

    pub fn is_scheduled(&self, job: usize) -> bool {
        self.scheduled[job]
    }

    pub fn is_closed(&self, machine: usize) -> bool {
        self.machines[machine].closed
    }

    pub fn clock(&self, machine: usize) -> Time {
        self.machines[machine].clock()
    }

    /// Family of the open block on `machine` (0 when empty) and its length.
    pub fn open_block(&self, machine: usize) -> (FamilyId, usize) {
        let ms = &self.machines[machine];
        (self.state_of(ms), ms.open_len())
    }

    pub fn remaining(&self, family: FamilyId) -> usize {
        self.remaining[family]
    }

    pub fn sequence(&self, machine: usize) -> &[usize] {
        &self.machines[machine].seq
    }

    #[inline]
    fn state_of(&self, ms: &MachineState) -> usize {
        ms.seq.last().map(|&j| self.model.fam[j]).unwrap_or(0)
    }

    pub fn open_machines(&self) -> usize {
        self.machines.iter().filter(|m| !m.closed).count()
    }

    /// Open machine with the smallest current completion, ties by index.
    pub fn next_machine(&self) -> Option<usize> {
        self.machines
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.closed)
            .min_by_key(|(k, m)| (m.clock(), *k))
            .map(|(k, _)| k)
    }

    /// Start time `job` would get if appended to `machine` now.
    #[inline]
    pub fn start_if_appended(&self, machine: usize, job: usize) -> Time {
        let ms = &self.machines[machine];
        let model = self.model;
        model.release[job].max(ms.clock() + model.tau[self.state_of(ms)][model.fam[job]])
    }

    /// Returns false when appending `job` to `machine` provably cannot be
    /// completed into a schedule that respects every size window. A `true`
    /// answer is not a feasibility guarantee.
    pub fn block_extension_feasible(&self, machine: usize, job: usize) -> bool {
        let model = self.model;
        if !model.enforce_sizes {
            return true;
        }
        let ms = &self.machines[machine];
        let f = model.fam[job];
        let (open_family, open_len) = (self.state_of(ms), ms.open_len());
        let new_len = if open_family == f {
            if open_len + 1 > model.max_size[f] {
                return false;
            }
            open_len + 1
        } else {
            if open_family != 0 && open_len < model.min_size[open_family] {
                return false;
            }
            1
        };
        if model.propagation == Propagation::Basic {
            return true;
        }

        let remaining_f = self.remaining[f] - 1;
        if new_len + remaining_f < model.min_size[f] {
            return false;
        }
        // every open block short of its minimum must still be fillable
        let mut deficit = vec![0usize; model.n_families + 1];
        for (k, other) in self.machines.iter().enumerate() {
            if other.closed {
                continue;
            }
            let (g, len) = if k == machine {
                (f, new_len)
            } else {
                (self.state_of(other), other.open_len())
            };
            if g != 0 && len < model.min_size[g] {
                deficit[g] += model.min_size[g] - len;
            }
        }
        (1..=model.n_families).all(|g| {
            let left = if g == f { remaining_f } else { self.remaining[g] };
            deficit[g] <= left
        })
    }

    /// Whether `machine` may receive no further jobs.
    pub fn can_close(&self, machine: usize) -> bool {
        let ms = &self.machines[machine];
        if ms.closed || (self.n_unscheduled > 0 && self.open_machines() <= 1) {
            return false;
        }
        if !self.model.enforce_sizes {
            return true;
        }
        let g = self.state_of(ms);
        g == 0 || ms.open_len() >= self.model.min_size[g]
    }

    /// Every nonempty machine ends in a block meeting its minimum size.
    pub fn closing_blocks_valid(&self) -> bool {
        if !self.model.enforce_sizes {
            return true;
        }
        self.machines.iter().all(|ms| {
            let g = self.state_of(ms);
            g == 0 || ms.open_len() >= self.model.min_size[g]
        })
    }

    /// Admissible lower bound on the objective of any completion of this
    /// state. Never decreases along a branch.
    pub fn lower_bound(&self) -> i64 {
        self.floor
    }

    /// Places `job` at the end of `machine` and returns the child's bound.
    pub fn append(&mut self, machine: usize, job: usize) -> i64 {
        debug_assert!(!self.scheduled[job] && !self.machines[machine].closed);
        let start = self.start_if_appended(machine, job);
        let model = self.model;
        let f = model.fam[job];
        let ms = &self.machines[machine];
        let run = if self.state_of(ms) == f {
            ms.open_len() + 1
        } else {
            1
        };
        let end = start + model.ptime[job];
        let ms = &mut self.machines[machine];
        ms.seq.push(job);
        ms.ends.push(end);
        ms.run_lens.push(run);
        self.scheduled[job] = true;
        self.remaining[f] -= 1;
        self.n_unscheduled -= 1;
        self.acc += model.weight[job] * end;
        self.trail.push(Step::Append {
            machine,
            floor: self.floor,
        });
        self.floor = self.floor.max(self.raw_bound());
        self.floor
    }

    pub fn close(&mut self, machine: usize) -> i64 {
        self.machines[machine].closed = true;
        self.trail.push(Step::Close {
            machine,
            floor: self.floor,
        });
        self.floor = self.floor.max(self.raw_bound());
        self.floor
    }

    /// Reverts the most recent `append` or `close`.
    pub fn undo(&mut self) {
        match self.trail.pop() {
            Some(Step::Append { machine, floor }) => {
                let ms = &mut self.machines[machine];
                let job = ms.seq.pop().expect("append on trail");
                let end = ms.ends.pop().expect("append on trail");
                ms.run_lens.pop();
                self.scheduled[job] = false;
                self.remaining[self.model.fam[job]] += 1;
                self.n_unscheduled += 1;
                self.acc -= self.model.weight[job] * end;
                self.floor = floor;
            }
            Some(Step::Close { machine, floor }) => {
                self.machines[machine].closed = false;
                self.floor = floor;
            }
            None => {}
        }
    }

    /// Pairwise-interchange test: true when `job` appended to `machine`
    /// right after the machine's last job is strictly beaten by the same two
    /// jobs in swapped order, which ends no later in an equivalent state.
    pub(crate) fn dominated_by_swap(&self, machine: usize, job: usize) -> bool {
        let model = self.model;
        let ms = &self.machines[machine];
        let Some(&last) = ms.seq.last() else {
            return false;
        };
        let n = ms.seq.len();
        let (pre_clock, pre_state) = if n >= 2 {
            (ms.ends[n - 2], model.fam[ms.seq[n - 2]])
        } else {
            (0, 0)
        };
        let (fl, fj) = (model.fam[last], model.fam[job]);
        if fl != fj && model.enforce_sizes {
            return false;
        }
        let end_last = ms.clock();
        let end_job = model.release[job].max(end_last + model.tau[fl][fj]) + model.ptime[job];

        let swapped_job = model.release[job].max(pre_clock + model.tau[pre_state][fj]) + model.ptime[job];
        let swapped_last = model.release[last].max(swapped_job + model.tau[fj][fl]) + model.ptime[last];

        let penalty = if fl == fj { 0 } else { model.end_penalty[fl][fj] };
        if swapped_last + penalty > end_job {
            return false;
        }
        let original = model.weight[last] * end_last + model.weight[job] * end_job;
        let swapped = model.weight[job] * swapped_job + model.weight[last] * swapped_last;
        swapped < original
    }

    /// True when `job` is interchangeable with a lower-indexed unscheduled
    /// job that is already released at the machine's current completion.
    pub(crate) fn dominated_by_twin(&self, machine: usize, job: usize) -> bool {
        let model = self.model;
        let clock = self.machines[machine].clock();
        if model.release[job] > clock {
            return false;
        }
        let class = model.class[job];
        (class..job).any(|k| {
            model.class[k] == class && !self.scheduled[k] && model.release[k] <= clock
        })
    }

    /// Bound of this exact state, without the inherited floor.
    fn raw_bound(&self) -> i64 {
        if self.n_unscheduled == 0 {
            return self.acc;
        }
        let model = self.model;
        let open: Vec<(Time, usize)> = self
            .machines
            .iter()
            .filter(|m| !m.closed)
            .map(|m| (m.clock(), self.state_of(m)))
            .collect();
        if open.is_empty() {
            return INFEASIBLE;
        }

        // each job individually, on its best machine
        let mut per_job = 0i64;
        for j in 0..model.n_jobs() {
            if self.scheduled[j] {
                continue;
            }
            let f = model.fam[j];
            let est = open
                .iter()
                .map(|&(clock, s)| model.release[j].max(clock + model.dist[s][f]))
                .min()
                .unwrap();
            per_job += model.weight[j] * (est + model.ptime[j]);
        }

        // parallel-machine WSPT relaxation from the earliest machine time
        let m = open.len() as i64;
        let a_min = open.iter().map(|&(c, _)| c).min().unwrap();
        let (mut total_w, mut wspt_sum, mut wp, mut prefix) = (0i64, 0i64, 0i64, 0i64);
        for &j in &model.wspt {
            if self.scheduled[j] {
                continue;
            }
            prefix += model.ptime[j];
            total_w += model.weight[j];
            wspt_sum += model.weight[j] * prefix;
            wp += model.weight[j] * model.ptime[j];
        }
        let numer = 2 * wspt_sum + (m - 1) * wp;
        let capacity = a_min * total_w + (numer + 2 * m - 1) / (2 * m);

        self.acc + per_job.max(capacity)
    }

    /// Sequences of job ids per machine.
    pub fn id_sequences(&self) -> Vec<Vec<JobId>> {
        self.machines
            .iter()
            .map(|m| m.seq.iter().map(|&j| self.model.ids[j]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::reference_instance;

    fn idx(model: &SearchModel, id: JobId) -> usize {
        model.index_of(id).unwrap()
    }

    #[test]
    fn append_tracks_earliest_timing() {
        let inst = reference_instance([3, 2], [3, 2]);
        let model = SearchModel::new(&inst, true, Propagation::Strong);
        let mut st = PartialState::root(&model);
        for id in [1, 2, 5, 3, 4] {
            st.append(0, idx(&model, id));
        }
        assert_eq!(st.accumulated(), 61);
        assert_eq!(st.lower_bound(), 61);
        assert!(st.is_complete());
        assert!(st.closing_blocks_valid());
        for _ in 0..5 {
            st.undo();
        }
        assert_eq!(st.accumulated(), 0);
        assert_eq!(st.n_unscheduled, 5);
    }

    #[test]
    fn root_bound_is_below_optimum() {
        let inst = reference_instance([3, 2], [3, 2]);
        let model = SearchModel::new(&inst, true, Propagation::Strong);
        let root = PartialState::root(&model);
        assert!(root.lower_bound() <= 61);
        assert!(root.lower_bound() > 0);
    }

    #[test]
    fn open_block_cannot_close_without_enough_jobs() {
        let inst = reference_instance([3, 2], [3, 2]);
        let model = SearchModel::new(&inst, true, Propagation::Strong);
        let mut st = PartialState::root(&model);
        for id in [1, 2, 5, 3] {
            assert!(st.block_extension_feasible(0, idx(&model, id)));
            st.append(0, idx(&model, id));
        }
        // open block is family 2 of length 1 and job 4 is the last f2 job
        assert_eq!(st.open_block(0), (2, 1));
        assert!(st.block_extension_feasible(0, idx(&model, 4)));
    }

    #[test]
    fn switching_family_below_minimum_is_rejected() {
        // one machine: 3 (f2), then 1 (f1) while l2 = 2
        let inst = reference_instance([1, 2], [3, 2]);
        let model = SearchModel::new(&inst, true, Propagation::Basic);
        let mut st = PartialState::root(&model);
        st.append(0, idx(&model, 3));
        assert!(!st.block_extension_feasible(0, idx(&model, 1)));
        assert!(st.block_extension_feasible(0, idx(&model, 4)));
    }

    #[test]
    fn deficit_check_needs_strong_level() {
        // two machines; machine 0 holds [3] (f2, len 1 < l2 = 2); job 4 is
        // the only f2 job left. Placing job 4 on machine 1 leaves the open
        // block on machine 0 unfillable.
        let mut inst = reference_instance([1, 2], [3, 2]);
        inst.n_machines = 2;
        for level in [Propagation::Basic, Propagation::Strong] {
            let model = SearchModel::new(&inst, true, level);
            let mut st = PartialState::root(&model);
            st.append(0, idx(&model, 3));
            let ok = st.block_extension_feasible(1, idx(&model, 4));
            assert_eq!(ok, level == Propagation::Basic);
            // appending the last f1 job anywhere else is fine for f1 itself
            assert!(st.block_extension_feasible(0, idx(&model, 4)));
        }
    }

    #[test]
    fn last_job_of_other_family_with_unclosable_block() {
        // machine 0 has open f2 block of length 1, no f2 jobs left elsewhere
        // except on this machine: appending an f1 job here is rejected.
        let inst = reference_instance([1, 2], [3, 2]);
        let model = SearchModel::new(&inst, true, Propagation::Strong);
        let mut st = PartialState::root(&model);
        for id in [1, 2, 3] {
            st.append(0, idx(&model, id));
        }
        assert!(!st.block_extension_feasible(0, idx(&model, 5)));
    }

    #[test]
    fn upper_window_rejects_same_family() {
        let inst = reference_instance([1, 1], [2, 2]);
        let model = SearchModel::new(&inst, true, Propagation::Basic);
        let mut st = PartialState::root(&model);
        st.append(0, idx(&model, 1));
        st.append(0, idx(&model, 2));
        assert!(!st.block_extension_feasible(0, idx(&model, 5)));
        assert!(st.block_extension_feasible(0, idx(&model, 3)));
    }

    #[test]
    fn relaxation_ignores_windows() {
        let inst = reference_instance([3, 2], [1, 1]);
        let model = SearchModel::new(&inst, false, Propagation::Strong);
        let mut st = PartialState::root(&model);
        st.append(0, idx(&model, 1));
        assert!(st.block_extension_feasible(0, idx(&model, 3)));
        assert!(st.block_extension_feasible(0, idx(&model, 2)));
    }

    #[test]
    fn closing_last_open_machine_is_refused() {
        let mut inst = reference_instance([1, 1], [3, 2]);
        inst.n_machines = 2;
        let model = SearchModel::new(&inst, true, Propagation::Strong);
        let mut st = PartialState::root(&model);
        assert!(st.can_close(0));
        st.close(0);
        assert!(!st.can_close(1));
        assert_eq!(st.next_machine(), Some(1));
    }
}
