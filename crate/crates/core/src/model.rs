//! Domain model for serial-batch scheduling with family setups.
//!
//! Jobs belong to families. Consecutive jobs of the same family on a machine
//! form a *family block*; switching from family `f` to family `g` costs a
//! setup of `τ[f][g]` time units, and the first job on a machine pays the
//! initial setup `τ[0][g]`. Every block of family `f` must hold between
//! `l_f` and `u_f` jobs. The objective is the total weighted completion time.
//!
//! Blocks are never stored: they are decoded from the machine sequences as
//! maximal same-family runs, so two adjacent runs of the same family are one
//! block. Idle time inside a block does not split it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer time on the discrete horizon.
pub type Time = i64;
/// External job identifier.
pub type JobId = u32;
/// 1-based family identifier. State `0` is reserved for the empty machine.
pub type FamilyId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    pub family: FamilyId,
    pub weight: i64,
    pub release: Time,
    pub ptime: Time,
}

/// Setup times between machine states.
///
/// Row `0` is the virtual initial state of an empty machine, rows `1..=F`
/// are families. Columns are families `1..=F`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetupMatrix {
    rows: Vec<Vec<Time>>,
}

impl SetupMatrix {
    /// Builds a matrix from `F + 1` rows of `F` entries each.
    pub fn new(rows: Vec<Vec<Time>>) -> Result<Self, ModelError> {
        let n_families = rows.len().saturating_sub(1);
        if rows.is_empty() || rows.iter().any(|r| r.len() != n_families) {
            return Err(ModelError::SetupShape {
                rows: rows.len(),
                expected_cols: n_families,
            });
        }
        Ok(Self { rows })
    }

    pub fn from_fn(n_families: usize, mut f: impl FnMut(usize, FamilyId) -> Time) -> Self {
        let rows = (0..=n_families)
            .map(|from| (1..=n_families).map(|to| f(from, to)).collect())
            .collect();
        Self { rows }
    }

    pub fn n_families(&self) -> usize {
        self.rows.len() - 1
    }

    /// Raw matrix entry for state `from` (0 = initial) to family `to`.
    #[inline]
    pub fn get(&self, from: usize, to: FamilyId) -> Time {
        self.rows[from][to - 1]
    }

    /// Setup actually paid when a job of family `to` follows state `from`.
    /// Zero inside a family regardless of the stored diagonal.
    #[inline]
    pub fn transition(&self, from: usize, to: FamilyId) -> Time {
        if from == to {
            0
        } else {
            self.get(from, to)
        }
    }

    pub fn set(&mut self, from: usize, to: FamilyId, value: Time) {
        self.rows[from][to - 1] = value;
    }

    pub fn rows(&self) -> &[Vec<Time>] {
        &self.rows
    }

    /// Largest setup between two families (row 0 excluded).
    pub fn max_family_setup(&self) -> Time {
        self.rows.iter().skip(1).flatten().copied().max().unwrap_or(0)
    }

    pub fn max_initial_setup(&self) -> Time {
        self.rows[0].iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub jobs: Vec<Job>,
    pub n_families: usize,
    pub n_machines: usize,
    pub setups: SetupMatrix,
    /// `l_f`, indexed by `f - 1`.
    pub min_size: Vec<usize>,
    /// `u_f`, indexed by `f - 1`.
    pub max_size: Vec<usize>,
}

impl Instance {
    #[inline]
    pub fn min_size(&self, family: FamilyId) -> usize {
        self.min_size[family - 1]
    }

    #[inline]
    pub fn max_size(&self, family: FamilyId) -> usize {
        self.max_size[family - 1]
    }

    /// Number of jobs of each family, indexed by `f - 1`.
    pub fn family_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_families];
        for job in &self.jobs {
            if (1..=self.n_families).contains(&job.family) {
                counts[job.family - 1] += 1;
            }
        }
        counts
    }

    /// Map from job id to its position in `jobs`. First occurrence wins.
    pub fn id_index(&self) -> HashMap<JobId, usize> {
        let mut map = HashMap::with_capacity(self.jobs.len());
        for (i, job) in self.jobs.iter().enumerate() {
            map.entry(job.id).or_insert(i);
        }
        map
    }

    pub fn job(&self, id: JobId) -> Option<&Job> {
        self.jobs.iter().find(|j| j.id == id)
    }

    /// Copy of the instance with the size windows relaxed to `[1, |J_f|]`.
    pub fn relaxed(&self) -> Instance {
        let counts = self.family_counts();
        Instance {
            min_size: vec![1; self.n_families],
            max_size: counts.iter().map(|&c| c.max(1)).collect(),
            ..self.clone()
        }
    }
}

/// Per-machine job sequences. Machines are indexed from 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Assignment {
    pub sequences: Vec<Vec<JobId>>,
}

impl Assignment {
    pub fn new(sequences: Vec<Vec<JobId>>) -> Self {
        Self { sequences }
    }

    pub fn n_jobs(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }
}

/// An assignment plus start times. Completion times are derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub assignment: Assignment,
    pub start: BTreeMap<JobId, Time>,
}

impl Schedule {
    pub fn completion(&self, inst: &Instance, id: JobId) -> Option<Time> {
        let start = *self.start.get(&id)?;
        inst.job(id).map(|j| start + j.ptime)
    }

    /// Blocks of this schedule with their time spans.
    pub fn timed_blocks(&self, inst: &Instance) -> Result<Vec<TimedBlock>, ModelError> {
        let index = inst.id_index();
        let blocks = decode_blocks(inst, &self.assignment)?;
        Ok(blocks
            .into_iter()
            .map(|block| {
                let first = block.jobs[0];
                let last = *block.jobs.last().unwrap();
                let start = self.start.get(&first).copied().unwrap_or_default();
                let end = self.start.get(&last).copied().unwrap_or_default()
                    + inst.jobs[index[&last]].ptime;
                TimedBlock { block, start, end }
            })
            .collect())
    }
}

/// A maximal run of consecutive same-family jobs on one machine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FamilyBlock {
    pub machine: usize,
    pub family: FamilyId,
    pub jobs: Vec<JobId>,
}

impl FamilyBlock {
    pub fn size(&self) -> usize {
        self.jobs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimedBlock {
    pub block: FamilyBlock,
    /// Start of the first job.
    pub start: Time,
    /// Completion of the last job.
    pub end: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("setup matrix has {rows} rows; every row needs {expected_cols} entries and F + 1 rows are required")]
    SetupShape { rows: usize, expected_cols: usize },
    #[error("assignment is not a partition of the jobs: {0}")]
    NotPartition(PartitionDefect),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartitionDefect {
    pub missing: Vec<JobId>,
    pub duplicated: Vec<JobId>,
    pub unknown: Vec<JobId>,
    pub wrong_machine_count: Option<(usize, usize)>,
}

impl PartitionDefect {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
            && self.duplicated.is_empty()
            && self.unknown.is_empty()
            && self.wrong_machine_count.is_none()
    }
}

impl fmt::Display for PartitionDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some((expected, found)) = self.wrong_machine_count {
            parts.push(format!("{found} sequences for {expected} machines"));
        }
        if !self.missing.is_empty() {
            parts.push(format!("missing jobs {:?}", self.missing));
        }
        if !self.duplicated.is_empty() {
            parts.push(format!("duplicated jobs {:?}", self.duplicated));
        }
        if !self.unknown.is_empty() {
            parts.push(format!("unknown jobs {:?}", self.unknown));
        }
        f.write_str(&parts.join("; "))
    }
}

fn partition_defect(inst: &Instance, asg: &Assignment) -> PartitionDefect {
    let mut defect = PartitionDefect::default();
    if asg.sequences.len() != inst.n_machines {
        defect.wrong_machine_count = Some((inst.n_machines, asg.sequences.len()));
    }
    let known: BTreeSet<JobId> = inst.jobs.iter().map(|j| j.id).collect();
    let mut seen = BTreeSet::new();
    for &id in asg.sequences.iter().flatten() {
        if !known.contains(&id) {
            defect.unknown.push(id);
        } else if !seen.insert(id) {
            defect.duplicated.push(id);
        }
    }
    defect.missing = known.difference(&seen).copied().collect();
    defect
}

fn ensure_partition(inst: &Instance, asg: &Assignment) -> Result<(), ModelError> {
    let defect = partition_defect(inst, asg);
    if defect.is_empty() {
        Ok(())
    } else {
        Err(ModelError::NotPartition(defect))
    }
}

// ---------------------------------------------------------------------------
// Instance validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum InstanceIssue {
    NoFamilies,
    NoMachines,
    SetupShape,
    DuplicateJobId(JobId),
    UnknownFamily { job: JobId, family: FamilyId },
    NonPositiveWeight(JobId),
    NegativeRelease(JobId),
    NonPositivePtime(JobId),
    NegativeSetup { from: usize, to: FamilyId },
    NonZeroDiagonal(FamilyId),
    /// `τ[from][to] > τ[from][via] + τ[via][to]` over families.
    Triangle { from: FamilyId, via: FamilyId, to: FamilyId },
    /// `τ[0][to] > τ[0][via] + τ[via][to]`.
    InitialTriangle { via: FamilyId, to: FamilyId },
    SizeWindowLength { expected: usize, min_len: usize, max_len: usize },
    BadSizeWindow { family: FamilyId, min: usize, max: usize },
    MinSizeExceedsFamily { family: FamilyId, min: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstanceViolation {
    pub severity: Severity,
    pub issue: InstanceIssue,
}

impl InstanceViolation {
    fn error(issue: InstanceIssue) -> Self {
        Self {
            severity: Severity::Error,
            issue,
        }
    }

    fn warning(issue: InstanceIssue) -> Self {
        Self {
            severity: Severity::Warning,
            issue,
        }
    }

    /// True for violations that make the instance infeasible rather than
    /// malformed.
    pub fn is_infeasibility(&self) -> bool {
        matches!(self.issue, InstanceIssue::MinSizeExceedsFamily { .. })
    }
}

impl fmt::Display for InstanceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: ")?;
        match &self.issue {
            InstanceIssue::NoFamilies => write!(f, "instance has no families"),
            InstanceIssue::NoMachines => write!(f, "instance has no machines"),
            InstanceIssue::SetupShape => write!(f, "setup matrix must be (F+1)xF"),
            InstanceIssue::DuplicateJobId(id) => write!(f, "job id {id} appears more than once"),
            InstanceIssue::UnknownFamily { job, family } => {
                write!(f, "job {job} references unknown family {family}")
            }
            InstanceIssue::NonPositiveWeight(id) => write!(f, "job {id} has weight < 1"),
            InstanceIssue::NegativeRelease(id) => write!(f, "job {id} has negative release"),
            InstanceIssue::NonPositivePtime(id) => write!(f, "job {id} has processing time < 1"),
            InstanceIssue::NegativeSetup { from, to } => {
                write!(f, "setup {from}->{to} is negative")
            }
            InstanceIssue::NonZeroDiagonal(fam) => {
                write!(f, "setup {fam}->{fam} must be zero")
            }
            InstanceIssue::Triangle { from, via, to } => write!(
                f,
                "triangle inequality violated: setup {from}->{to} exceeds {from}->{via}->{to}"
            ),
            InstanceIssue::InitialTriangle { via, to } => write!(
                f,
                "initial setup 0->{to} exceeds 0->{via}->{to}"
            ),
            InstanceIssue::SizeWindowLength {
                expected,
                min_len,
                max_len,
            } => write!(
                f,
                "size windows given for {min_len}/{max_len} families, expected {expected}"
            ),
            InstanceIssue::BadSizeWindow { family, min, max } => write!(
                f,
                "family {family} has invalid size window [{min}, {max}]"
            ),
            InstanceIssue::MinSizeExceedsFamily { family, min, count } => write!(
                f,
                "family {family} requires blocks of at least {min} jobs but has only {count}"
            ),
        }
    }
}

/// Lists every structural problem of `inst`. An instance is well formed when
/// no entry has [`Severity::Error`].
pub fn validate_instance(inst: &Instance) -> Vec<InstanceViolation> {
    let mut out = Vec::new();
    let nf = inst.n_families;
    if nf == 0 {
        out.push(InstanceViolation::error(InstanceIssue::NoFamilies));
    }
    if inst.n_machines == 0 {
        out.push(InstanceViolation::error(InstanceIssue::NoMachines));
    }

    let mut ids = BTreeSet::new();
    for job in &inst.jobs {
        if !ids.insert(job.id) {
            out.push(InstanceViolation::error(InstanceIssue::DuplicateJobId(job.id)));
        }
        if !(1..=nf).contains(&job.family) {
            out.push(InstanceViolation::error(InstanceIssue::UnknownFamily {
                job: job.id,
                family: job.family,
            }));
        }
        if job.weight < 1 {
            out.push(InstanceViolation::error(InstanceIssue::NonPositiveWeight(job.id)));
        }
        if job.release < 0 {
            out.push(InstanceViolation::error(InstanceIssue::NegativeRelease(job.id)));
        }
        if job.ptime < 1 {
            out.push(InstanceViolation::error(InstanceIssue::NonPositivePtime(job.id)));
        }
    }

    if inst.setups.n_families() != nf {
        out.push(InstanceViolation::error(InstanceIssue::SetupShape));
    } else {
        let s = &inst.setups;
        for from in 0..=nf {
            for to in 1..=nf {
                if s.get(from, to) < 0 {
                    out.push(InstanceViolation::error(InstanceIssue::NegativeSetup { from, to }));
                }
            }
        }
        for f in 1..=nf {
            if s.get(f, f) != 0 {
                out.push(InstanceViolation::error(InstanceIssue::NonZeroDiagonal(f)));
            }
        }
        for from in 1..=nf {
            for via in 1..=nf {
                for to in 1..=nf {
                    if s.get(from, to) > s.get(from, via) + s.get(via, to) {
                        out.push(InstanceViolation::error(InstanceIssue::Triangle {
                            from,
                            via,
                            to,
                        }));
                    }
                }
            }
        }
        for via in 1..=nf {
            for to in 1..=nf {
                if s.get(0, to) > s.get(0, via) + s.get(via, to) {
                    out.push(InstanceViolation::warning(InstanceIssue::InitialTriangle {
                        via,
                        to,
                    }));
                }
            }
        }
    }

    if inst.min_size.len() != nf || inst.max_size.len() != nf {
        out.push(InstanceViolation::error(InstanceIssue::SizeWindowLength {
            expected: nf,
            min_len: inst.min_size.len(),
            max_len: inst.max_size.len(),
        }));
    } else {
        let counts = inst.family_counts();
        for f in 1..=nf {
            let (min, max) = (inst.min_size(f), inst.max_size(f));
            if min < 1 || min > max {
                out.push(InstanceViolation::error(InstanceIssue::BadSizeWindow {
                    family: f,
                    min,
                    max,
                }));
            }
            let count = counts[f - 1];
            if count > 0 && min > count {
                out.push(InstanceViolation::error(InstanceIssue::MinSizeExceedsFamily {
                    family: f,
                    min,
                    count,
                }));
            }
        }
    }
    out
}

/// True when `validate_instance` reports no errors (warnings allowed).
pub fn is_well_formed(inst: &Instance) -> bool {
    validate_instance(inst)
        .iter()
        .all(|v| v.severity != Severity::Error)
}

/// Upper bound on every completion time: all jobs in family order on a
/// single machine after the latest release and initial setup.
pub fn horizon(inst: &Instance) -> Time {
    let max_release = inst.jobs.iter().map(|j| j.release).max().unwrap_or(0);
    let total_ptime: Time = inst.jobs.iter().map(|j| j.ptime).sum();
    let switches = inst.n_families.saturating_sub(1) as Time;
    max_release.max(inst.setups.max_initial_setup())
        + total_ptime
        + switches * inst.setups.max_family_setup()
}

// ---------------------------------------------------------------------------
// Sequences, blocks and timing
// ---------------------------------------------------------------------------

/// Splits every machine sequence into maximal same-family runs.
pub fn decode_blocks(inst: &Instance, asg: &Assignment) -> Result<Vec<FamilyBlock>, ModelError> {
    ensure_partition(inst, asg)?;
    let index = inst.id_index();
    Ok(runs(inst, &index, asg))
}

fn runs(inst: &Instance, index: &HashMap<JobId, usize>, asg: &Assignment) -> Vec<FamilyBlock> {
    let mut blocks: Vec<FamilyBlock> = Vec::new();
    for (machine, seq) in asg.sequences.iter().enumerate() {
        let mut current: Option<FamilyBlock> = None;
        for &id in seq {
            let Some(&i) = index.get(&id) else { continue };
            let family = inst.jobs[i].family;
            match current.as_mut() {
                Some(block) if block.family == family => block.jobs.push(id),
                _ => {
                    blocks.extend(current.take());
                    current = Some(FamilyBlock {
                        machine,
                        family,
                        jobs: vec![id],
                    });
                }
            }
        }
        blocks.extend(current);
    }
    blocks
}

/// Left-shifted timing of an assignment: every job starts as soon as its
/// release, the previous completion and the family setup allow.
pub fn earliest_timing(inst: &Instance, asg: &Assignment) -> Result<Schedule, ModelError> {
    ensure_partition(inst, asg)?;
    let index = inst.id_index();
    let mut start = BTreeMap::new();
    for seq in &asg.sequences {
        let mut state = 0usize;
        let mut clock: Time = 0;
        for &id in seq {
            let job = &inst.jobs[index[&id]];
            let s = job
                .release
                .max(clock + inst.setups.transition(state, job.family));
            start.insert(id, s);
            clock = s + job.ptime;
            state = job.family;
        }
    }
    Ok(Schedule {
        assignment: asg.clone(),
        start,
    })
}

/// Total weighted completion time over the jobs that have a start time.
pub fn twct(inst: &Instance, sched: &Schedule) -> i64 {
    inst.jobs
        .iter()
        .filter_map(|j| sched.start.get(&j.id).map(|&s| j.weight * (s + j.ptime)))
        .sum()
}

// ---------------------------------------------------------------------------
// Feasibility
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViolationKind {
    Overlap,
    Release,
    Setup,
    InitialSetup,
    BlockTooSmall,
    BlockTooLarge,
    NotPartition,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub machine: Option<usize>,
    pub jobs: Vec<JobId>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(m) = self.machine {
            write!(f, " machine={}", m + 1)?;
        }
        write!(f, " jobs={:?}: {}", self.jobs, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn kinds(&self) -> BTreeSet<ViolationKind> {
        self.violations.iter().map(|v| v.kind).collect()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Window violations of the maximal runs in `asg`. Depends only on the
/// sequences, never on start times.
pub fn window_violations(inst: &Instance, asg: &Assignment) -> Vec<Violation> {
    let index = inst.id_index();
    runs(inst, &index, asg)
        .into_iter()
        .filter_map(|block| {
            let (min, max) = (inst.min_size(block.family), inst.max_size(block.family));
            let size = block.size();
            let kind = if size < min {
                ViolationKind::BlockTooSmall
            } else if size > max {
                ViolationKind::BlockTooLarge
            } else {
                return None;
            };
            Some(Violation {
                kind,
                machine: Some(block.machine),
                detail: format!(
                    "family {} block of size {size} outside [{min}, {max}]",
                    block.family
                ),
                jobs: block.jobs,
            })
        })
        .collect()
}

/// True when every maximal run of `asg` lies inside its family window.
pub fn windows_respected(inst: &Instance, asg: &Assignment) -> bool {
    window_violations(inst, asg).is_empty()
}

/// Checks every constraint and reports all violations found.
pub fn check_feasible(inst: &Instance, sched: &Schedule) -> FeasibilityReport {
    let mut violations = Vec::new();
    let asg = &sched.assignment;
    let index = inst.id_index();

    let defect = partition_defect(inst, asg);
    if !defect.is_empty() {
        let mut jobs = defect.missing.clone();
        jobs.extend(&defect.duplicated);
        jobs.extend(&defect.unknown);
        violations.push(Violation {
            kind: ViolationKind::NotPartition,
            machine: None,
            jobs,
            detail: defect.to_string(),
        });
    }

    for (machine, seq) in asg.sequences.iter().enumerate() {
        // (family, completion) of the previous timed job
        let mut prev: Option<(JobId, FamilyId, Time)> = None;
        for &id in seq {
            let Some(&i) = index.get(&id) else { continue };
            let job = &inst.jobs[i];
            let Some(&start) = sched.start.get(&id) else {
                violations.push(Violation {
                    kind: ViolationKind::NotPartition,
                    machine: Some(machine),
                    jobs: vec![id],
                    detail: "job has no start time".into(),
                });
                continue;
            };
            if start < job.release {
                violations.push(Violation {
                    kind: ViolationKind::Release,
                    machine: Some(machine),
                    jobs: vec![id],
                    detail: format!("starts at {start} before release {}", job.release),
                });
            }
            match prev {
                None => {
                    let setup = inst.setups.get(0, job.family);
                    if start < setup {
                        violations.push(Violation {
                            kind: ViolationKind::InitialSetup,
                            machine: Some(machine),
                            jobs: vec![id],
                            detail: format!("first job starts at {start} before initial setup {setup}"),
                        });
                    }
                }
                Some((prev_id, prev_family, prev_end)) => {
                    let setup = inst.setups.transition(prev_family, job.family);
                    if start < prev_end {
                        violations.push(Violation {
                            kind: ViolationKind::Overlap,
                            machine: Some(machine),
                            jobs: vec![prev_id, id],
                            detail: format!("starts at {start} before predecessor ends at {prev_end}"),
                        });
                    } else if start - prev_end < setup {
                        violations.push(Violation {
                            kind: ViolationKind::Setup,
                            machine: Some(machine),
                            jobs: vec![prev_id, id],
                            detail: format!(
                                "gap {} shorter than setup {setup}",
                                start - prev_end
                            ),
                        });
                    }
                }
            }
            prev = Some((id, job.family, start + job.ptime));
        }
    }

    if inst.min_size.len() == inst.n_families && inst.max_size.len() == inst.n_families {
        violations.extend(window_violations(inst, asg));
    }
    FeasibilityReport { violations }
}

// ---------------------------------------------------------------------------
// Canonical tie-break key
// ---------------------------------------------------------------------------

/// Token used in [`decision_key`] for closing a machine. Orders after all jobs.
pub const CLOSE_TOKEN: u64 = u64::MAX;

/// Chronological decision string of a left-shifted schedule.
///
/// Replays the assignment by repeatedly taking the open machine with the
/// smallest current completion time (ties by machine index) and emitting its
/// next job id, or [`CLOSE_TOKEN`] when its sequence is exhausted, until all
/// jobs are emitted. Among schedules with equal objective the one with the
/// lexicographically smallest key is canonical; both the exact search and
/// the brute-force oracle return it.
pub fn decision_key(inst: &Instance, asg: &Assignment) -> Vec<u64> {
    let index = inst.id_index();
    let m = asg.sequences.len();
    let total = asg.n_jobs();
    let mut pos = vec![0usize; m];
    let mut clock = vec![0 as Time; m];
    let mut state = vec![0usize; m];
    let mut open = vec![true; m];
    let mut emitted = 0;
    let mut key = Vec::with_capacity(total + m);
    while emitted < total {
        let Some(machine) = (0..m)
            .filter(|&k| open[k])
            .min_by_key(|&k| (clock[k], k))
        else {
            break;
        };
        match asg.sequences[machine].get(pos[machine]) {
            Some(&id) => {
                let job = &inst.jobs[index[&id]];
                let s = job
                    .release
                    .max(clock[machine] + inst.setups.transition(state[machine], job.family));
                clock[machine] = s + job.ptime;
                state[machine] = job.family;
                pos[machine] += 1;
                emitted += 1;
                key.push(id as u64);
            }
            None => {
                open[machine] = false;
                key.push(CLOSE_TOKEN);
            }
        }
    }
    key
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// The five-job, two-family, one-machine illustrative instance.
    pub fn reference_instance(min: [usize; 2], max: [usize; 2]) -> Instance {
        let job = |id, release, family| Job {
            id,
            family,
            weight: 1,
            release,
            ptime: 2,
        };
        Instance {
            jobs: vec![job(1, 1, 1), job(2, 5, 1), job(3, 6, 2), job(4, 12, 2), job(5, 11, 1)],
            n_families: 2,
            n_machines: 1,
            setups: SetupMatrix::new(vec![vec![1, 1], vec![0, 3], vec![3, 0]]).unwrap(),
            min_size: min.to_vec(),
            max_size: max.to_vec(),
        }
    }

    fn seq(ids: &[JobId]) -> Assignment {
        Assignment::new(vec![ids.to_vec()])
    }

    fn completions(inst: &Instance, s: &Schedule) -> Vec<Time> {
        (1..=5).map(|id| s.completion(inst, id).unwrap()).collect()
    }

    #[test]
    fn reference_instance_is_well_formed() {
        assert!(validate_instance(&reference_instance([3, 2], [3, 2])).is_empty());
    }

    #[test]
    fn min_size_above_family_count_is_reported() {
        let v = validate_instance(&reference_instance([4, 2], [4, 2]));
        assert_eq!(v.len(), 1);
        assert_eq!(
            v[0].issue,
            InstanceIssue::MinSizeExceedsFamily {
                family: 1,
                min: 4,
                count: 3
            }
        );
        assert!(v[0].is_infeasibility());
    }

    #[test]
    fn triangle_violation_is_reported() {
        let mut inst = reference_instance([1, 1], [3, 2]);
        inst.n_families = 3;
        inst.min_size = vec![1; 3];
        inst.max_size = vec![3; 3];
        // τ13 = 9 > τ12 + τ23 = 2 + 3
        inst.setups = SetupMatrix::new(vec![
            vec![1, 1, 1],
            vec![0, 2, 9],
            vec![2, 0, 3],
            vec![4, 4, 0],
        ])
        .unwrap();
        let v = validate_instance(&inst);
        assert!(v.contains(&InstanceViolation::error(InstanceIssue::Triangle {
            from: 1,
            via: 2,
            to: 3
        })));
        assert!(v
            .iter()
            .all(|x| matches!(x.issue, InstanceIssue::Triangle { .. })));
    }

    #[test]
    fn initial_triangle_is_only_a_warning() {
        let mut inst = reference_instance([1, 1], [3, 2]);
        inst.setups = SetupMatrix::new(vec![vec![1, 9], vec![0, 3], vec![3, 0]]).unwrap();
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].severity, Severity::Warning);
        assert!(is_well_formed(&inst));
    }

    #[test]
    fn structural_errors() {
        let mut inst = reference_instance([0, 3], [2, 2]);
        inst.jobs[1].id = 1;
        inst.jobs[2].family = 7;
        inst.jobs[3].weight = 0;
        inst.jobs[4].ptime = 0;
        let issues: Vec<_> = validate_instance(&inst).into_iter().map(|v| v.issue).collect();
        assert!(issues.contains(&InstanceIssue::DuplicateJobId(1)));
        assert!(issues.contains(&InstanceIssue::UnknownFamily { job: 3, family: 7 }));
        assert!(issues.contains(&InstanceIssue::NonPositiveWeight(4)));
        assert!(issues.contains(&InstanceIssue::NonPositivePtime(5)));
        assert!(issues.contains(&InstanceIssue::BadSizeWindow {
            family: 1,
            min: 0,
            max: 2
        }));
        assert!(issues.contains(&InstanceIssue::BadSizeWindow {
            family: 2,
            min: 3,
            max: 2
        }));
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(horizon(&reference_instance([3, 2], [3, 2])), 25);
        let single = Instance {
            jobs: vec![Job {
                id: 0,
                family: 1,
                weight: 1,
                release: 0,
                ptime: 4,
            }],
            n_families: 1,
            n_machines: 1,
            setups: SetupMatrix::new(vec![vec![2], vec![0]]).unwrap(),
            min_size: vec![1],
            max_size: vec![1],
        };
        assert_eq!(horizon(&single), 6);
        let s = earliest_timing(&single, &Assignment::new(vec![vec![0]])).unwrap();
        assert_eq!(s.start[&0], 2);
        assert_eq!(s.completion(&single, 0), Some(6));
    }

    #[test]
    fn decode_examples() {
        let inst = reference_instance([3, 2], [3, 2]);
        let b = decode_blocks(&inst, &seq(&[1, 2, 3, 4, 5])).unwrap();
        let jobs: Vec<_> = b.iter().map(|b| (b.family, b.jobs.clone())).collect();
        assert_eq!(jobs, vec![(1, vec![1, 2]), (2, vec![3, 4]), (1, vec![5])]);
        let b = decode_blocks(&inst, &seq(&[1, 2, 5, 3, 4])).unwrap();
        let jobs: Vec<_> = b.iter().map(|b| (b.family, b.jobs.clone())).collect();
        assert_eq!(jobs, vec![(1, vec![1, 2, 5]), (2, vec![3, 4])]);

        let mut two = inst.clone();
        two.n_machines = 2;
        let b = decode_blocks(&two, &Assignment::new(vec![vec![], vec![1, 2, 5, 3, 4]])).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|b| b.machine == 1));
    }

    #[test]
    fn decode_rejects_non_partition() {
        let inst = reference_instance([3, 2], [3, 2]);
        let err = decode_blocks(&inst, &seq(&[1, 2, 2, 4, 9])).unwrap_err();
        let ModelError::NotPartition(d) = err else { panic!() };
        assert_eq!(d.missing, vec![3, 5]);
        assert_eq!(d.duplicated, vec![2]);
        assert_eq!(d.unknown, vec![9]);
        assert!(earliest_timing(&inst, &seq(&[1, 2, 3])).is_err());
    }

    #[test]
    fn timing_of_core_and_sized_examples() {
        let inst = reference_instance([3, 2], [3, 2]);
        let core = earliest_timing(&inst, &seq(&[1, 2, 3, 4, 5])).unwrap();
        assert_eq!(
            core.start.values().copied().collect::<Vec<_>>(),
            vec![1, 5, 10, 12, 17]
        );
        assert_eq!(completions(&inst, &core), vec![3, 7, 12, 14, 19]);
        assert_eq!(twct(&inst, &core), 55);

        let sized = earliest_timing(&inst, &seq(&[1, 2, 5, 3, 4])).unwrap();
        assert_eq!(completions(&inst, &sized), vec![3, 7, 18, 20, 13]);
        assert_eq!(twct(&inst, &sized), 61);
    }

    #[test]
    fn twct_with_zero_weights() {
        let mut inst = reference_instance([3, 2], [3, 2]);
        for j in &mut inst.jobs {
            j.weight = 0;
        }
        let s = earliest_timing(&inst, &seq(&[1, 2, 5, 3, 4])).unwrap();
        assert_eq!(twct(&inst, &s), 0);
    }

    #[test]
    fn feasibility_of_figures() {
        let inst = reference_instance([3, 2], [3, 2]);
        let sized = earliest_timing(&inst, &seq(&[1, 2, 5, 3, 4])).unwrap();
        assert!(check_feasible(&inst, &sized).feasible());

        let core = earliest_timing(&inst, &seq(&[1, 2, 3, 4, 5])).unwrap();
        let report = check_feasible(&inst, &core);
        assert_eq!(report.violations.len(), 2);
        assert_eq!(report.count(ViolationKind::BlockTooSmall), 2);
        assert_eq!(report.violations[0].jobs, vec![1, 2]);
        assert_eq!(report.violations[1].jobs, vec![5]);
    }

    #[test]
    fn setup_gap_violation() {
        let inst = reference_instance([3, 2], [3, 2]);
        let mut s = earliest_timing(&inst, &seq(&[1, 2, 5, 3, 4])).unwrap();
        // job 5 ends at 13, τ12 = 3, so job 3 may not start at 15
        s.start.insert(3, 15);
        let r = check_feasible(&inst, &s);
        assert_eq!(r.kinds(), BTreeSet::from([ViolationKind::Setup]));
        assert_eq!(r.violations[0].jobs, vec![5, 3]);
    }

    #[test]
    fn overlap_release_and_initial_setup() {
        let inst = reference_instance([3, 2], [3, 2]);
        let mut s = earliest_timing(&inst, &seq(&[1, 2, 5, 3, 4])).unwrap();
        s.start.insert(1, 0);
        s.start.insert(2, 1);
        let kinds = check_feasible(&inst, &s).kinds();
        assert!(kinds.contains(&ViolationKind::Release));
        assert!(kinds.contains(&ViolationKind::InitialSetup));
        assert!(kinds.contains(&ViolationKind::Overlap));
    }

    #[test]
    fn empty_machine_is_feasible() {
        let mut inst = reference_instance([3, 2], [3, 2]);
        inst.n_machines = 2;
        let asg = Assignment::new(vec![vec![1, 2, 5, 3, 4], vec![]]);
        let s = earliest_timing(&inst, &asg).unwrap();
        assert!(check_feasible(&inst, &s).feasible());
    }

    #[test]
    fn long_runs_are_too_large() {
        let inst = reference_instance([1, 1], [2, 2]);
        let s = earliest_timing(&inst, &seq(&[1, 2, 5, 3, 4])).unwrap();
        let r = check_feasible(&inst, &s);
        assert_eq!(r.kinds(), BTreeSet::from([ViolationKind::BlockTooLarge]));
    }

    #[test]
    fn decision_key_replays_chronologically() {
        let mut inst = reference_instance([1, 1], [3, 2]);
        inst.n_machines = 2;
        // machine 0: [1, 2] ends at 7; machine 1: [3, 4, 5]
        let asg = Assignment::new(vec![vec![1, 2], vec![3, 4, 5]]);
        // m0 (0) -> 1 [c=3]; m1 (0) -> 3 [c=8]; m0 (3) -> 2 [c=7];
        // m0 (7) -> close; m1 (8) -> 4; m1 -> 5
        assert_eq!(decision_key(&inst, &asg), vec![1, 3, 2, CLOSE_TOKEN, 4, 5]);
    }
}
