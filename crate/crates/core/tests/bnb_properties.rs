//! Branch-and-bound invariants over the random GDP suite and the thermostat.

use gdp_core::lp::check_point;
use gdp_core::milp::{solve, SolveOptions, SolveResult, SolveStatus};
use gdp_core::reformulate::{to_bigm, to_hull, BigMStrategy};
use gdp_core::suite::{random_suite, SuiteLimits};
use gdp_core::thermostat::{
    build_thermostat_mpc, BuildingModel, RelayState, ThermostatParams, ThermostatVariant,
    DEFAULT_BIG_M,
};

fn check_result(problem: &gdp_core::problem::MilpProblem, res: &SolveResult, int_tol: f64) {
    for w in res.bound_history.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "bound decreased: {} -> {}", w[0], w[1]);
    }
    if let (Some(x), Some(z)) = (&res.incumbent, res.objective) {
        assert!(check_point(problem, x) <= 1e-6, "incumbent violates rows or bounds");
        for j in problem.integer_columns() {
            assert!((x[j] - x[j].round()).abs() <= int_tol);
        }
        assert!((problem.objective_value(x) - z).abs() <= 1e-6 * z.abs().max(1.0));
        let gap = res.gap_percent.unwrap();
        assert!(gap >= -1e-9, "negative gap {gap}");
        if res.status == SolveStatus::Optimal {
            assert!(gap <= 100.0 * 1e-6 + 1e-9);
        }
    }
}

#[test]
fn incumbents_are_feasible_and_bounds_monotone() {
    let opts = SolveOptions::default();
    for m in random_suite(99, 60, &SuiteLimits::default()) {
        for problem in [
            to_bigm(&m, BigMStrategy::Fixed(DEFAULT_BIG_M)).unwrap().problem,
            to_hull(&m).unwrap().problem,
        ] {
            let res = solve(&problem, &opts);
            check_result(&problem, &res, opts.int_tol);
            let limited = solve(&problem, &SolveOptions::default().with_node_limit(3));
            check_result(&problem, &limited, opts.int_tol);
            assert!(limited.nodes_explored <= 3);
        }
    }
}

/// Gap of a node-limited solve; no incumbent counts as 100 %.
fn limited_gap(res: &SolveResult) -> f64 {
    match res.status {
        SolveStatus::Infeasible => 0.0,
        _ => res.gap_percent.map_or(100.0, |g| g.min(100.0)),
    }
}

#[test]
fn node_limited_hull_gap_is_no_worse_on_average() {
    let models = random_suite(5, 60, &SuiteLimits::default());
    let opts = SolveOptions::default().with_node_limit(2);
    let (mut hull, mut bigm) = (0.0, 0.0);
    for m in &models {
        hull += limited_gap(&solve(&to_hull(m).unwrap().problem, &opts));
        bigm += limited_gap(&solve(
            &to_bigm(m, BigMStrategy::Fixed(DEFAULT_BIG_M)).unwrap().problem,
            &opts,
        ));
    }
    let n = models.len() as f64;
    assert!(hull / n <= bigm / n, "hull {} vs big-M {}", hull / n, bigm / n);
}

#[test]
fn thermostat_thirty_periods_under_node_limit() {
    let mpc = build_thermostat_mpc(
        &BuildingModel::reference(),
        &[21.0; 4],
        RelayState::Off,
        30,
        &ThermostatParams::default(),
        ThermostatVariant::GdpHull,
    )
    .unwrap();
    let res = solve(mpc.problem(), &SolveOptions::default().with_node_limit(30));
    // Without primal heuristics this instance does not reach an incumbent in
    // 30 nodes, so the limit status is the incumbent-free one.
    assert!(matches!(
        res.status,
        SolveStatus::FeasibleLimit | SolveStatus::NoSolutionLimit
    ));
    assert_eq!(res.nodes_explored, 30);
    assert!(res.best_bound >= res.root_bound - 1e-9);
    check_result(mpc.problem(), &res, 1e-6);
}
