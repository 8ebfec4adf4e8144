//! The five-job, two-family, single-machine example instance used across
//! tests and the acceptance suite.

use sbatch_core::model::{earliest_timing, Assignment, Instance, Job, JobId, Schedule, SetupMatrix};

/// Jobs `(id, release, family)`: (1,1,1) (2,5,1) (3,6,2) (4,12,2) (5,11,1),
/// all with weight 1 and ptime 2; initial setups 1, family switches 3.
/// Maximum block sizes are the family sizes.
pub fn reference_instance(min_size: [usize; 2]) -> Instance {
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
        min_size: min_size.to_vec(),
        max_size: vec![3, 2],
    }
}

/// Earliest-start schedule of `sequence` on the single machine.
pub fn timed(inst: &Instance, sequence: &[JobId]) -> Schedule {
    earliest_timing(inst, &Assignment::new(vec![sequence.to_vec()])).expect("sequence is a partition")
}
