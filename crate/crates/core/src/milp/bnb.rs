//! Best-bound branch-and-bound over the simplex relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::lp::{Basis, LpOptions, LpStatus, SimplexSolver};
use crate::problem::MilpProblem;

/// Branching-variable rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Branching {
    /// Largest distance to the nearest integer; lowest column index on ties.
    #[default]
    MostFractional,
}

/// Open-node selection rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NodeOrder {
    /// Lowest parent relaxation bound first; creation order on ties.
    #[default]
    BestBound,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub rel_gap_tol: f64,
    /// Absolute slack on the pruning test, guarding objectives near zero.
    pub abs_gap_tol: f64,
    pub int_tol: f64,
    /// Maximum number of node relaxations solved.
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    pub branching: Branching,
    pub node_order: NodeOrder,
    pub lp: LpOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rel_gap_tol: 1e-6,
            abs_gap_tol: 1e-9,
            int_tol: 1e-6,
            node_limit: None,
            time_limit: None,
            branching: Branching::MostFractional,
            node_order: NodeOrder::BestBound,
            lp: LpOptions::default(),
        }
    }
}

impl SolveOptions {
    pub fn with_node_limit(mut self, limit: usize) -> Self {
        self.node_limit = Some(limit);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    /// Search completed; the incumbent is optimal within the gap tolerance.
    Optimal,
    /// A node or time limit stopped the search with an incumbent in hand.
    FeasibleLimit,
    /// A limit stopped the search before any integer-feasible point was found.
    NoSolutionLimit,
    Infeasible,
    /// The root relaxation is unbounded.
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Objective of the incumbent (z̃).
    pub objective: Option<f64>,
    /// Proven lower bound on the optimum (`-inf` when unbounded, `+inf` when
    /// infeasible).
    pub best_bound: f64,
    pub root_bound: f64,
    pub nodes_explored: usize,
    pub lp_iterations: usize,
    /// `100 (z̃ - best_bound) / max(|z̃|, 1e-12)`; `None` without an incumbent.
    pub gap_percent: Option<f64>,
    /// Global lower bound recorded after each explored node.
    pub bound_history: Vec<f64>,
}

impl SolveResult {
    pub fn has_incumbent(&self) -> bool {
        self.incumbent.is_some()
    }
}

pub fn gap_percent(objective: f64, bound: f64) -> f64 {
    100.0 * (objective - bound) / objective.abs().max(1e-12)
}

struct Node {
    key: f64,
    id: usize,
    changes: Vec<(usize, f64, f64)>,
    warm: Option<Rc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: invert so the lowest key, then the oldest
    // node, comes out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn most_fractional(problem: &MilpProblem, point: &[f64], int_tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in problem.integer_columns() {
        let f = point[j] - point[j].floor();
        let dist = f.min(1.0 - f);
        if dist > int_tol && best.is_none_or(|(_, b)| dist > b) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

fn is_exactly_integral(problem: &MilpProblem, point: &[f64]) -> bool {
    problem.integer_columns().all(|j| point[j] == point[j].round())
}

/// Minimizes `problem` by LP-based branch-and-bound.
pub fn solve(problem: &MilpProblem, options: &SolveOptions) -> SolveResult {
    let start = Instant::now();
    let solver = SimplexSolver::new(problem);
    let root_lower = &problem.lower;
    let root_upper = &problem.upper;

    let mut lower = root_lower.clone();
    let mut upper = root_upper.clone();
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    heap.push(Node {
        key: f64::NEG_INFINITY,
        id: next_id,
        changes: Vec::new(),
        warm: None,
    });
    next_id += 1;

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut nodes = 0usize;
    let mut lp_iterations = 0usize;
    let mut root_bound = f64::NEG_INFINITY;
    let mut history = Vec::new();
    // Bound of nodes dropped without a conclusive relaxation.
    let mut abandoned = f64::INFINITY;
    let mut limit_hit = false;

    let prune_level = |z: f64| z - (options.rel_gap_tol * z.abs()).max(options.abs_gap_tol);

    while let Some(top) = heap.peek() {
        if let Some((_, z)) = &incumbent {
            if top.key >= prune_level(*z) {
                // every open node is within tolerance of the incumbent
                break;
            }
        }
        if options.node_limit.is_some_and(|l| nodes >= l)
            || options.time_limit.is_some_and(|t| start.elapsed() >= t)
        {
            limit_hit = true;
            break;
        }
        let node = heap.pop().expect("peeked");
        nodes += 1;

        lower.copy_from_slice(root_lower);
        upper.copy_from_slice(root_upper);
        for &(j, lo, hi) in &node.changes {
            lower[j] = lo;
            upper[j] = hi;
        }
        let mut lp_opts = options.lp.clone();
        lp_opts.objective_cutoff = incumbent.as_ref().map(|(_, z)| prune_level(*z));
        let res = solver.solve(&lower, &upper, node.warm.as_deref(), &lp_opts);
        lp_iterations += res.iterations;

        if node.id == 0 {
            match res.status {
                LpStatus::Infeasible => {
                    return finish(
                        SolveStatus::Infeasible,
                        None,
                        f64::INFINITY,
                        f64::INFINITY,
                        nodes,
                        lp_iterations,
                        history,
                    )
                }
                LpStatus::Unbounded => {
                    return finish(
                        SolveStatus::Unbounded,
                        None,
                        f64::NEG_INFINITY,
                        f64::NEG_INFINITY,
                        nodes,
                        lp_iterations,
                        history,
                    )
                }
                LpStatus::Optimal => root_bound = res.objective,
                _ => {}
            }
        }

        match res.status {
            LpStatus::Optimal => {
                let bound = res.objective.max(node.key);
                let prunable = incumbent
                    .as_ref()
                    .is_some_and(|(_, z)| bound >= prune_level(*z));
                if !prunable {
                    let mut branch_on = most_fractional(problem, &res.point, options.int_tol);
                    if branch_on.is_none() {
                        // Integral within tolerance. Tiny fractions can still
                        // buy large relaxations through big coefficients, so
                        // the incumbent comes from the LP with the integers
                        // fixed at their rounded values.
                        let (point, z) = if is_exactly_integral(problem, &res.point) {
                            (Some(res.point.clone()), res.objective)
                        } else {
                            let mut fixed_lo = lower.clone();
                            let mut fixed_hi = upper.clone();
                            for j in problem.integer_columns() {
                                let r = res.point[j].round();
                                fixed_lo[j] = r;
                                fixed_hi[j] = r;
                            }
                            let polished =
                                solver.solve(&fixed_lo, &fixed_hi, Some(&res.basis), &lp_opts);
                            lp_iterations += polished.iterations;
                            match polished.status {
                                LpStatus::Optimal => (Some(polished.point), polished.objective),
                                _ => (None, f64::INFINITY),
                            }
                        };
                        if let Some(point) = point {
                            if incumbent.as_ref().is_none_or(|(_, best)| z < *best) {
                                incumbent = Some((point, z));
                            }
                        }
                        // Keep the subtree open unless the rounded assignment
                        // matched the node bound.
                        let close =
                            z - bound <= (options.rel_gap_tol * z.abs()).max(options.abs_gap_tol);
                        if !close {
                            let settled = incumbent
                                .as_ref()
                                .is_some_and(|(_, best)| bound >= prune_level(*best));
                            if !settled {
                                branch_on = most_fractional(problem, &res.point, 0.0);
                            }
                        }
                    }
                    if let Some(j) = branch_on {
                        let v = res.point[j];
                        let basis = Rc::new(res.basis);
                        let mut down = node.changes.clone();
                        down.push((j, lower[j], v.floor()));
                        let mut up = node.changes;
                        up.push((j, v.ceil(), upper[j]));
                        for changes in [down, up] {
                            heap.push(Node {
                                key: bound,
                                id: next_id,
                                changes,
                                warm: Some(Rc::clone(&basis)),
                            });
                            next_id += 1;
                        }
                    }
                }
            }
            LpStatus::Infeasible | LpStatus::CutOff => {}
            LpStatus::Unbounded => {
                // a bounded root makes child relaxations bounded; treat as
                // numerical failure and keep the node's bound
                abandoned = abandoned.min(node.key);
            }
            LpStatus::IterationLimit => {
                abandoned = abandoned.min(node.key);
            }
        }
        history.push(global_bound(&heap, &incumbent, abandoned));
    }

    let bound = global_bound(&heap, &incumbent, abandoned);
    let status = match (&incumbent, limit_hit || abandoned.is_finite()) {
        (Some(_), false) => SolveStatus::Optimal,
        (Some((_, z)), true) if bound >= prune_level(*z) => SolveStatus::Optimal,
        (Some(_), true) => SolveStatus::FeasibleLimit,
        (None, true) => SolveStatus::NoSolutionLimit,
        (None, false) => SolveStatus::Infeasible,
    };
    let bound = if status == SolveStatus::Infeasible {
        f64::INFINITY
    } else {
        bound
    };
    finish(status, incumbent, bound, root_bound, nodes, lp_iterations, history)
}

fn global_bound(heap: &BinaryHeap<Node>, incumbent: &Option<(Vec<f64>, f64)>, abandoned: f64) -> f64 {
    let open = heap.peek().map_or(f64::INFINITY, |n| n.key);
    let z = incumbent.as_ref().map_or(f64::INFINITY, |(_, z)| *z);
    open.min(z).min(abandoned)
}

fn finish(
    status: SolveStatus,
    incumbent: Option<(Vec<f64>, f64)>,
    best_bound: f64,
    root_bound: f64,
    nodes_explored: usize,
    lp_iterations: usize,
    bound_history: Vec<f64>,
) -> SolveResult {
    let (incumbent, objective) = match incumbent {
        Some((x, z)) => (Some(x), Some(z)),
        None => (None, None),
    };
    SolveResult {
        status,
        gap_percent: objective.map(|z| gap_percent(z, best_bound)),
        incumbent,
        objective,
        best_bound,
        root_bound,
        nodes_explored,
        lp_iterations,
        bound_history,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxationError {
    #[error("LP relaxation is infeasible")]
    Infeasible,
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("LP relaxation hit the iteration limit after {0} iterations")]
    IterationLimit(usize),
}

/// Optimal value of the continuous relaxation.
pub fn relaxation_bound(problem: &MilpProblem) -> Result<f64, RelaxationError> {
    let res = SimplexSolver::new(problem).solve(
        &problem.lower,
        &problem.upper,
        None,
        &LpOptions::default(),
    );
    match res.status {
        LpStatus::Optimal => Ok(res.objective),
        LpStatus::Infeasible => Err(RelaxationError::Infeasible),
        LpStatus::Unbounded => Err(RelaxationError::Unbounded),
        LpStatus::IterationLimit | LpStatus::CutOff => {
            Err(RelaxationError::IterationLimit(res.iterations))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ColumnLabel, MilpRow, RowRelation};

    fn toy() -> MilpProblem {
        let mut p = MilpProblem::new();
        let x = p.add_binary(ColumnLabel::Plain("x".into()), -1.0);
        let y = p.add_binary(ColumnLabel::Plain("y".into()), -1.0);
        p.add_row(MilpRow::new([(x, 1.0), (y, 1.0)], RowRelation::Le, 1.5));
        p
    }

    #[test]
    fn binary_toy_optimum() {
        let r = solve(&toy(), &SolveOptions::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() + 1.0).abs() < 1e-9);
        assert!((r.root_bound + 1.5).abs() < 1e-9);
        // root, then y = 0 (integral, -1) and y = 1 (x = 0.5, still -1.5),
        // whose children x = 0 (pruned by bound) and x = 1 (infeasible)
        assert_eq!(r.nodes_explored, 5);
        assert!(r.bound_history.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.gap_percent.unwrap().abs() < 1e-9);
    }

    #[test]
    fn node_limit_reports_missing_incumbent() {
        let r = solve(&toy(), &SolveOptions::default().with_node_limit(1));
        assert_eq!(r.status, SolveStatus::NoSolutionLimit);
        assert!(r.gap_percent.is_none());
        assert!((r.best_bound + 1.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_integer_problem() {
        // 2x = 1 with x integer in [0, 3]
        let mut p = MilpProblem::new();
        let x = p.add_column(ColumnLabel::Plain("x".into()), 0.0, 3.0, 1.0, true);
        p.add_row(MilpRow::new([(x, 2.0)], RowRelation::Eq, 1.0));
        let r = solve(&p, &SolveOptions::default());
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.incumbent.is_none());
    }

    #[test]
    fn pure_lp_bound_equals_solve() {
        let mut p = toy();
        p.integer = vec![false, false];
        let r = solve(&p, &SolveOptions::default());
        assert_eq!(relaxation_bound(&p).unwrap(), r.objective.unwrap());
        assert_eq!(r.nodes_explored, 1);
    }
}
