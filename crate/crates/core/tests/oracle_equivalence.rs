//! The optimization models against exhaustive enumeration on random toys.

mod common;

use co2net::engine::Planner;
use co2net::milp::adapter::SolveOptions;
use co2net::milp::bnb::BranchBoundSolver;
use common::{assert_close_rel, oracle_m1, oracle_m2_step1, oracle_regret, random_instance};
use std::time::Instant;

fn planner(
    instance: &co2net::engine::PlanningInstance,
) -> Planner<'_, BranchBoundSolver> {
    Planner::new(instance, BranchBoundSolver::native(), SolveOptions::default())
}

#[test]
fn models_match_enumeration_on_small_toys() {
    // (seed, edges, scenarios): directed arcs = 2 * edges.
    let profiles = [
        (11u64, 2usize, 2usize),
        (12, 2, 3),
        (13, 3, 2),
        (14, 3, 1),
        (15, 4, 1),
        (16, 3, 3),
        (17, 4, 2),
        (18, 4, 3),
    ];
    for (seed, edges, scenarios) in profiles {
        let t = Instant::now();
        let instance = random_instance(seed, edges, scenarios);
        let p = planner(&instance);

        let m2 = p.solve_m2("S1").expect("m2 solvable");
        let step1 = m2.scenarios["S1"].breakdown.i0;
        let oracle_step1 = oracle_m2_step1(&instance).expect("oracle m2 step 1");
        assert_close_rel(step1, oracle_step1, 1e-6, &format!("seed {seed} m2 step1"));

        let best = p.best_costs().expect("m1 solvable for every scenario");
        for id in instance.scenarios.ids() {
            let oracle = oracle_m1(&instance, id).expect("oracle m1");
            assert_close_rel(
                best.totals_eur[id],
                oracle,
                1e-6,
                &format!("seed {seed} m1 {id}"),
            );
        }

        let regret = p.solve_min_max_regret(&best).expect("regret solvable");
        let oracle_x = oracle_regret(&instance, &best.totals_eur).expect("oracle regret");
        assert_close_rel(
            regret.regret_eur.unwrap(),
            oracle_x,
            1e-6,
            &format!("seed {seed} regret"),
        );
        println!(
            "seed {seed}: edges {edges} scenarios {scenarios} checked in {:?} (x = {:.3} Mio)",
            t.elapsed(),
            oracle_x / 1.0e6
        );
    }
}
