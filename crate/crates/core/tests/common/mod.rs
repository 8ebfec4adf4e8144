#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbatch_core::instgen::{generate, generate_base, GenConfig};
use sbatch_core::model::{Assignment, Instance, JobId};
use sbatch_core::solver::SolverParams;

/// Small random instance: `n ≤ max_jobs`, `F ≤ 3`, `M ≤ 2`. Even seeds take
/// their minimum sizes from the generator pipeline, odd seeds get random
/// windows (so some are infeasible).
pub fn tiny(seed: u64, max_jobs: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_jobs);
    let f = rng.gen_range(1..=3.min(n));
    let m = rng.gen_range(1..=2);
    let s = [20, 50, 100][rng.gen_range(0..3)];
    let cfg = GenConfig {
        ptime_range: (1, 9),
        ..GenConfig::new(n, f, m, s, seed)
    };
    if seed.is_multiple_of(2) {
        generate(&cfg, &SolverParams::default()).expect("tiny generation")
    } else {
        let mut inst = generate_base(&cfg).unwrap();
        for (k, &count) in inst.family_counts().iter().enumerate() {
            let lo = rng.gen_range(1..=count);
            inst.min_size[k] = lo;
            inst.max_size[k] = rng.gen_range(lo..=count);
        }
        inst
    }
}

/// Uniformly random machine assignment and order.
pub fn random_assignment(inst: &Instance, rng: &mut impl Rng) -> Assignment {
    let mut ids: Vec<JobId> = inst.jobs.iter().map(|j| j.id).collect();
    for k in (1..ids.len()).rev() {
        ids.swap(k, rng.gen_range(0..=k));
    }
    let mut seqs = vec![Vec::new(); inst.n_machines];
    for id in ids {
        seqs[rng.gen_range(0..inst.n_machines)].push(id);
    }
    Assignment::new(seqs)
}
