//! Lower bounds along decision paths never exceed the value of the schedule
//! at the end of the path.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sbatch_core::model::{earliest_timing, twct, windows_respected, Assignment, Instance};
use sbatch_core::oracle::{brute_force, OracleLimits};
use sbatch_core::solver::{PartialState, Propagation, SearchModel};

/// Bounds of every prefix when `asg` is replayed chronologically, plus the
/// accumulated value at the leaf.
fn replay(inst: &Instance, asg: &Assignment, enforce: bool) -> (Vec<i64>, i64) {
    let model = SearchModel::new(inst, enforce, Propagation::Strong);
    let mut state = PartialState::root(&model);
    let mut bounds = vec![state.lower_bound()];
    let mut pos = vec![0; inst.n_machines];
    while !state.is_complete() {
        let k = state.next_machine().expect("an open machine");
        let seq = &asg.sequences[k];
        if pos[k] < seq.len() {
            let job = model.index_of(seq[pos[k]]).unwrap();
            bounds.push(state.append(k, job));
            pos[k] += 1;
        } else {
            bounds.push(state.close(k));
        }
    }
    (bounds, state.accumulated())
}

#[test]
fn bounds_are_admissible_for_random_schedules() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..150 {
        let inst = common::tiny(seed, 8);
        for _ in 0..20 {
            let asg = common::random_assignment(&inst, &mut rng);
            let value = twct(&inst, &earliest_timing(&inst, &asg).unwrap());
            let (bounds, leaf) = replay(&inst, &asg, false);
            assert_eq!(leaf, value);
            assert!(bounds.windows(2).all(|w| w[0] <= w[1]), "bounds must not decrease");
            assert!(bounds.iter().all(|&b| b <= value), "seed {seed}: {bounds:?} > {value}");
            if windows_respected(&inst, &asg) {
                let (bounds, _) = replay(&inst, &asg, true);
                assert!(bounds.iter().all(|&b| b <= value), "seed {seed} with windows");
            }
        }
    }
}

#[test]
fn root_bound_never_exceeds_the_optimum() {
    for seed in 0..150 {
        let inst = common::tiny(seed, 7);
        let Some(opt) = brute_force(&inst, &OracleLimits::default()).unwrap().objective else {
            continue;
        };
        let model = SearchModel::new(&inst, true, Propagation::Strong);
        assert!(PartialState::root(&model).lower_bound() <= opt, "seed {seed}");
    }
}
