//! JSON file formats for instances and solutions.
//!
//! Machines and families are 1-based in files. Output is pretty-printed with
//! a trailing newline, and `to_json(from_json(s)) == s` for anything this
//! module wrote.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sbatch_core::model::{
    decode_blocks, twct, Assignment, FamilyBlock, FamilyId, Instance, Job, JobId, Schedule,
    SetupMatrix, Time,
};
use sbatch_core::solver::Status;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FamilyWindow {
    pub min_size: usize,
    pub max_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub n_families: usize,
    pub n_machines: usize,
    /// `F + 1` rows of `F` entries, the initial-state row first.
    pub setups: Vec<Vec<Time>>,
    pub families: Vec<FamilyWindow>,
    pub jobs: Vec<Job>,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n_families: inst.n_families,
            n_machines: inst.n_machines,
            setups: inst.setups.rows().to_vec(),
            families: inst
                .min_size
                .iter()
                .zip(&inst.max_size)
                .map(|(&min_size, &max_size)| FamilyWindow { min_size, max_size })
                .collect(),
            jobs: inst.jobs.clone(),
        }
    }

    /// Structural conversion only; semantic checks are left to
    /// `validate_instance`.
    pub fn to_instance(&self) -> Result<Instance> {
        check_schema(self.schema_version)?;
        if self.setups.len() != self.n_families + 1 {
            bail!(
                "setups has {} rows, expected nFamilies + 1 = {}",
                self.setups.len(),
                self.n_families + 1
            );
        }
        if self.families.len() != self.n_families {
            bail!(
                "families has {} entries, expected nFamilies = {}",
                self.families.len(),
                self.n_families
            );
        }
        let setups = SetupMatrix::new(self.setups.clone())?;
        Ok(Instance {
            jobs: self.jobs.clone(),
            n_families: self.n_families,
            n_machines: self.n_machines,
            setups,
            min_size: self.families.iter().map(|w| w.min_size).collect(),
            max_size: self.families.iter().map(|w| w.max_size).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PlacedJob {
    pub id: JobId,
    pub start: Time,
    pub end: Time,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MachineRow {
    /// 1-based.
    pub machine: usize,
    pub jobs: Vec<PlacedJob>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BlockRow {
    /// 1-based.
    pub machine: usize,
    pub family: FamilyId,
    pub jobs: Vec<JobId>,
}

impl BlockRow {
    fn from_block(b: &FamilyBlock) -> Self {
        Self {
            machine: b.machine + 1,
            family: b.family,
            jobs: b.jobs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SolverMeta {
    pub id: String,
    /// Seconds.
    pub budget: f64,
    pub seed: u64,
    /// Seconds; omitted in reproducible mode.
    pub elapsed: Option<f64>,
    pub nodes: Option<u64>,
    pub dual_bound: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SolutionFile {
    pub schema_version: u32,
    pub instance_ref: String,
    pub objective: i64,
    pub status: Status,
    pub machines: Vec<MachineRow>,
    pub blocks: Vec<BlockRow>,
    pub solver: SolverMeta,
}

impl SolutionFile {
    pub fn new(
        inst: &Instance,
        instance_ref: String,
        sched: &Schedule,
        status: Status,
        solver: SolverMeta,
    ) -> Result<Self> {
        let machines = sched
            .assignment
            .sequences
            .iter()
            .enumerate()
            .map(|(m, seq)| -> Result<MachineRow> {
                let jobs = seq
                    .iter()
                    .map(|&id| {
                        let start = *sched.start.get(&id).context("job without start")?;
                        let job = inst.job(id).context("job not in instance")?;
                        Ok(PlacedJob {
                            id,
                            start,
                            end: start + job.ptime,
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(MachineRow {
                    machine: m + 1,
                    jobs,
                })
            })
            .collect::<Result<_>>()?;
        let blocks = decode_blocks(inst, &sched.assignment)?
            .iter()
            .map(BlockRow::from_block)
            .collect();
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            instance_ref,
            objective: twct(inst, sched),
            status,
            machines,
            blocks,
            solver,
        })
    }

    /// Rebuilds the schedule for `n_machines` machines. Machines missing
    /// from the file are empty; job order within a row is the sequence.
    pub fn to_schedule(&self, n_machines: usize) -> Result<Schedule> {
        check_schema(self.schema_version)?;
        let mut sequences = vec![Vec::new(); n_machines];
        let mut start = BTreeMap::new();
        for row in &self.machines {
            if row.machine == 0 || row.machine > n_machines {
                bail!(
                    "machine {} out of range 1..={}",
                    row.machine,
                    n_machines
                );
            }
            if !sequences[row.machine - 1].is_empty() {
                bail!("machine {} listed twice", row.machine);
            }
            for job in &row.jobs {
                sequences[row.machine - 1].push(job.id);
                if start.insert(job.id, job.start).is_some() {
                    bail!("job {} listed twice", job.id);
                }
            }
        }
        Ok(Schedule {
            assignment: Assignment::new(sequences),
            start,
        })
    }

    /// Disagreements between the embedded derived fields (ends, objective,
    /// blocks) and the values recomputed from the starts.
    pub fn consistency_issues(&self, inst: &Instance, sched: &Schedule) -> Vec<String> {
        let mut issues = Vec::new();
        for row in &self.machines {
            for job in &row.jobs {
                if let Some(j) = inst.job(job.id) {
                    if job.end != job.start + j.ptime {
                        issues.push(format!(
                            "Inconsistent job={}: end {} differs from start + ptime = {}",
                            job.id,
                            job.end,
                            job.start + j.ptime
                        ));
                    }
                }
            }
        }
        let objective = twct(inst, sched);
        if objective != self.objective {
            issues.push(format!(
                "Inconsistent objective: file says {}, starts give {objective}",
                self.objective
            ));
        }
        if let Ok(blocks) = decode_blocks(inst, &sched.assignment) {
            let expected: Vec<BlockRow> = blocks.iter().map(BlockRow::from_block).collect();
            if expected != self.blocks {
                issues.push("Inconsistent blocks: embedded blocks differ from the sequences".into());
            }
        }
        issues
    }
}

fn check_schema(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        bail!("unsupported schemaVersion {version}, expected {SCHEMA_VERSION}");
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("file types serialize");
    s.push('\n');
    s
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
