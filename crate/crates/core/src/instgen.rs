//! Random benchmark instances.
//!
//! Processing times and weights are discrete uniform, raw setups are uniform
//! in `[0, S]` and then closed under shortest paths so that they satisfy the
//! triangle inequality, and releases are uniform up to a fraction of a
//! makespan lower bound. Minimum block sizes come from a solution of the
//! relaxation without windows: for each family the shortest run `k_f` in
//! that solution is found and `l_f` is drawn from `min(k_f + 1, |J_f|)..=|J_f|`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    check_feasible, decode_blocks, Instance, Job, JobId, Schedule, SetupMatrix, Time,
};
use crate::solver::{self, SolverParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_jobs: usize,
    pub n_families: usize,
    pub n_machines: usize,
    pub setup_scale: Time,
    pub seed: u64,
    pub ptime_range: (Time, Time),
    pub weight_range: (i64, i64),
    pub release_factor: f64,
}

impl GenConfig {
    pub fn new(n_jobs: usize, n_families: usize, n_machines: usize, setup_scale: Time, seed: u64) -> Self {
        Self {
            n_jobs,
            n_families,
            n_machines,
            setup_scale,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |what: &str| Err(GenError::Config(what.to_string()));
        if self.n_jobs == 0 || self.n_families == 0 || self.n_machines == 0 {
            return bad("job, family and machine counts must be positive");
        }
        if self.n_families > self.n_jobs {
            return bad("more families than jobs");
        }
        if self.ptime_range.0 < 1 || self.ptime_range.0 > self.ptime_range.1 {
            return bad("processing-time range must be nonempty with a positive lower bound");
        }
        if self.weight_range.0 < 1 || self.weight_range.0 > self.weight_range.1 {
            return bad("weight range must be nonempty with a positive lower bound");
        }
        if self.setup_scale < 0 {
            return bad("setup scale must be nonnegative");
        }
        if !(self.release_factor >= 0.0 && self.release_factor.is_finite()) {
            return bad("release factor must be a nonnegative number");
        }
        Ok(())
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_jobs: 15,
            n_families: 2,
            n_machines: 2,
            setup_scale: 20,
            seed: 0,
            ptime_range: (1, 20),
            weight_range: (1, 10),
            release_factor: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error("relaxation schedule is not feasible: {0}")]
    InfeasibleInput(String),
    #[error("relaxation solve returned no schedule")]
    NoCoreSchedule,
}

/// Min-plus closure over the states `0..=F`: every entry becomes the cheapest
/// chain of setups through intermediate families.
pub fn enforce_triangle(raw: &SetupMatrix) -> SetupMatrix {
    let nf = raw.n_families();
    let mut out = raw.clone();
    for via in 1..=nf {
        for from in 0..=nf {
            for to in 1..=nf {
                if from == to {
                    continue;
                }
                let through = out.get(from, via) + out.get(via, to);
                if through < out.get(from, to) {
                    out.set(from, to, through);
                }
            }
        }
    }
    out
}

/// Instance with all size windows at `[1, |J_f|]`.
pub fn generate_base(cfg: &GenConfig) -> Result<Instance, GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, nf) = (cfg.n_jobs, cfg.n_families);

    // one job per family first, the rest uniform, then shuffled over ids
    let mut families: Vec<usize> = (1..=nf)
        .chain((nf..n).map(|_| rng.gen_range(1..=nf)))
        .collect();
    families.shuffle(&mut rng);

    let mut jobs: Vec<Job> = families
        .iter()
        .enumerate()
        .map(|(k, &family)| Job {
            id: k as JobId + 1,
            family,
            weight: rng.gen_range(cfg.weight_range.0..=cfg.weight_range.1),
            release: 0,
            ptime: rng.gen_range(cfg.ptime_range.0..=cfg.ptime_range.1),
        })
        .collect();

    let raw = SetupMatrix::from_fn(nf, |from, to| {
        if from == to {
            0
        } else {
            rng.gen_range(0..=cfg.setup_scale)
        }
    });
    let setups = enforce_triangle(&raw);

    let total: Time = jobs.iter().map(|j| j.ptime).sum();
    let machines = cfg.n_machines as Time;
    let makespan_lb = (total + machines - 1) / machines;
    let latest = (cfg.release_factor * makespan_lb as f64).floor() as Time;
    for job in &mut jobs {
        job.release = rng.gen_range(0..=latest);
    }

    let mut counts = vec![0usize; nf];
    for job in &jobs {
        counts[job.family - 1] += 1;
    }
    Ok(Instance {
        jobs,
        n_families: nf,
        n_machines: cfg.n_machines,
        setups,
        min_size: vec![1; nf],
        max_size: counts,
    })
}

/// Draws `l_f` so that the relaxation schedule `core` violates it wherever
/// the family size allows.
pub fn derive_min_batch_sizes(
    inst: &Instance,
    core: &Schedule,
    seed: u64,
) -> Result<Vec<usize>, GenError> {
    let relaxed = Instance {
        min_size: vec![1; inst.n_families],
        ..inst.clone()
    };
    let report = check_feasible(&relaxed, core);
    if !report.feasible() {
        let first = report.violations[0].to_string();
        return Err(GenError::InfeasibleInput(first));
    }
    let blocks = decode_blocks(inst, &core.assignment)
        .map_err(|e| GenError::InfeasibleInput(e.to_string()))?;
    let counts = inst.family_counts();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((1..=inst.n_families)
        .map(|f| {
            let count = counts[f - 1];
            if count == 0 {
                return 1;
            }
            let shortest = blocks
                .iter()
                .filter(|b| b.family == f)
                .map(|b| b.size())
                .min()
                .unwrap_or(0);
            let low = (shortest + 1).min(count);
            rng.gen_range(low..=count)
        })
        .collect())
}

/// Full pipeline: base instance, relaxation solve, derived minimum sizes.
pub fn generate(cfg: &GenConfig, core_params: &SolverParams) -> Result<Instance, GenError> {
    let mut inst = generate_base(cfg)?;
    let report = solver::solve_core(&inst, core_params);
    let core = report.incumbent.ok_or(GenError::NoCoreSchedule)?;
    // separate stream from the base draw
    let seed = cfg.seed ^ 0x9E37_79B9_7F4A_7C15;
    inst.min_size = derive_min_batch_sizes(&inst, &core, seed)?;
    Ok(inst)
}
