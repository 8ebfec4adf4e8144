//! The exact search against exhaustive enumeration on small instances.

mod common;

use sbatch_core::model::{check_feasible, decision_key, twct, windows_respected};
use sbatch_core::oracle::{brute_force, OracleLimits};
use sbatch_core::solver::{solve, solve_core, Propagation, SolverParams, Status};

#[test]
fn exact_matches_enumeration() {
    let mut infeasible = 0;
    for seed in 0..240 {
        let inst = common::tiny(seed, 7);
        let oracle = brute_force(&inst, &OracleLimits::default()).unwrap();
        let exact = solve(&inst, &SolverParams::default());
        assert_eq!(exact.status, oracle.status, "seed {seed}");
        assert_eq!(exact.objective, oracle.objective, "seed {seed}");
        match (&exact.incumbent, &oracle.incumbent) {
            (Some(a), Some(b)) => {
                assert_eq!(a.assignment, b.assignment, "seed {seed}: canonical arg-min differs");
                assert!(check_feasible(&inst, a).feasible());
                assert_eq!(Some(twct(&inst, a)), exact.objective);
                assert_eq!(exact.dual_bound, exact.objective);
            }
            (None, None) => {
                infeasible += 1;
                assert_eq!(exact.dual_bound, None);
            }
            _ => panic!("seed {seed}: incumbent presence differs"),
        }
    }
    assert!(infeasible > 0, "sweep should include infeasible instances");
}

#[test]
fn warm_start_and_seed_do_not_change_the_answer() {
    for seed in 0..60 {
        let inst = common::tiny(seed, 6);
        let cold = solve(
            &inst,
            &SolverParams {
                warm_start: false,
                ..SolverParams::default()
            },
        );
        let warm = solve(
            &inst,
            &SolverParams {
                seed: seed * 31 + 7,
                ..SolverParams::default()
            },
        );
        assert_eq!(cold.objective, warm.objective);
        assert_eq!(
            cold.incumbent.map(|s| s.assignment),
            warm.incumbent.map(|s| s.assignment),
            "seed {seed}"
        );
    }
}

#[test]
fn basic_propagation_agrees_with_strong() {
    for seed in 0..120 {
        let inst = common::tiny(seed, 7);
        let strong = solve(&inst, &SolverParams::default());
        let basic = solve(
            &inst,
            &SolverParams {
                propagation: Propagation::Basic,
                ..SolverParams::default()
            },
        );
        assert_eq!(strong.status, basic.status, "seed {seed}");
        assert_eq!(strong.objective, basic.objective, "seed {seed}");
    }
}

#[test]
fn relaxation_is_a_lower_bound() {
    for seed in 0..120 {
        let inst = common::tiny(seed, 7);
        let core = solve_core(&inst, &SolverParams::default());
        let exact = solve(&inst, &SolverParams::default());
        assert_eq!(core.status, Status::Optimal);
        let core_value = core.objective.unwrap();
        let core_sched = core.incumbent.unwrap();
        let Some(value) = exact.objective else {
            continue;
        };
        assert!(core_value <= value, "seed {seed}");
        if windows_respected(&inst, &core_sched.assignment) {
            assert_eq!(core_value, value, "seed {seed}");
        }
        if core_value == value {
            // the constrained optimum is itself a relaxation optimum
            let exact_sched = exact.incumbent.unwrap();
            assert!(windows_respected(&inst, &exact_sched.assignment));
            assert_eq!(twct(&inst.relaxed(), &exact_sched), core_value);
        }
    }
}

#[test]
fn relaxation_matches_enumeration_of_the_relaxation() {
    for seed in 0..80 {
        let inst = common::tiny(seed, 6).relaxed();
        let oracle = brute_force(&inst, &OracleLimits::default()).unwrap();
        let core = solve_core(&inst, &SolverParams::default());
        assert_eq!(core.objective, oracle.objective);
        let (a, b) = (core.incumbent.unwrap(), oracle.incumbent.unwrap());
        assert_eq!(decision_key(&inst, &a.assignment), decision_key(&inst, &b.assignment));
    }
}

#[test]
fn parallel_search_finds_the_same_objective() {
    for seed in 0..40 {
        let inst = common::tiny(seed, 7);
        let serial = solve(&inst, &SolverParams::default());
        let parallel = solve(
            &inst,
            &SolverParams {
                threads: 4,
                ..SolverParams::default()
            },
        );
        assert_eq!(serial.status, parallel.status);
        assert_eq!(serial.objective, parallel.objective);
    }
}
