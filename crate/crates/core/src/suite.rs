//! Seeded random GDP instances for equivalence and tightness checks.
//!
//! Every instance has at most four disjunctions of two or three disjuncts
//! over at most six bounded continuous variables, so brute-force enumeration
//! stays cheap (at most 81 selections).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lp::LpOptions;
use crate::milp::{relaxation_bound, solve, RelaxationError, SolveOptions, SolveStatus};
use crate::model::{
    brute_force_solve, AffineExpr, BruteForceStatus, CnfClause, Disjunct, Disjunction, GdpModel, IndicatorRef, LinConstraint, Literal,
    ModelError, VarRef, DEFAULT_SELECTION_CAP,
};
use crate::reformulate::{to_bigm, to_hull, BigMStrategy, ReformulateError};

/// Size limits of generated instances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuiteLimits {
    pub max_vars: usize,
    pub max_disjunctions: usize,
    pub max_disjuncts: usize,
    pub max_rows_per_disjunct: usize,
}

impl Default for SuiteLimits {
    fn default() -> Self {
        SuiteLimits {
            max_vars: 6,
            max_disjunctions: 4,
            max_disjuncts: 3,
            max_rows_per_disjunct: 3,
        }
    }
}

fn random_row(rng: &mut ChaCha8Rng, vars: &[(f64, f64)], anchor: &[f64]) -> AffineExpr {
    let n = vars.len();
    let support = rng.gen_range(1..=n.min(3));
    let mut expr = AffineExpr::new();
    let mut picked = Vec::new();
    while picked.len() < support {
        let j = rng.gen_range(0..n);
        if !picked.contains(&j) {
            picked.push(j);
        }
    }
    picked.sort_unstable();
    for j in picked {
        let mut c: f64 = rng.gen_range(-4..=4) as f64;
        if c == 0.0 {
            c = 1.0;
        }
        expr.add_term(VarRef(j), c);
    }
    // `expr(anchor) + slack <= 0` keeps the anchor strictly inside the row.
    let slack = rng.gen_range(0..=3) as f64;
    let at_anchor = expr.eval(anchor);
    expr.add_constant(-(at_anchor + slack));
    expr
}

/// Instance number `index` of the suite seeded with `seed`. The same pair
/// always yields the same model.
pub fn random_instance(seed: u64, index: u64, limits: &SuiteLimits) -> GdpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut model = GdpModel::new();

    let n = rng.gen_range(2..=limits.max_vars.max(2));
    let mut boxes = Vec::with_capacity(n);
    for j in 0..n {
        let lo = -(rng.gen_range(0..=10) as f64);
        let hi = rng.gen_range(1..=10) as f64;
        model.add_var(format!("y{j}"), lo, hi);
        boxes.push((lo, hi));
    }

    let mut objective = AffineExpr::new();
    for j in 0..n {
        let c = rng.gen_range(-3..=3) as f64;
        if c != 0.0 {
            objective.add_term(VarRef(j), c);
        }
    }
    model.set_objective(objective);

    let global_anchor: Vec<f64> = boxes.iter().map(|&(l, u)| rng.gen_range(l..=u)).collect();
    for _ in 0..rng.gen_range(0..=2) {
        let row = random_row(&mut rng, &boxes, &global_anchor);
        model.add_constraint(LinConstraint::le(row));
    }

    let nd = rng.gen_range(1..=limits.max_disjunctions.max(1));
    for d in 0..nd {
        let nk = rng.gen_range(2..=limits.max_disjuncts.max(2));
        let mut disjuncts = Vec::with_capacity(nk);
        for k in 0..nk {
            let anchor: Vec<f64> = boxes.iter().map(|&(l, u)| rng.gen_range(l..=u)).collect();
            let mut dj = Disjunct::new(format!("d{d}_{k}"))
                .with_cost(rng.gen_range(0..=5) as f64);
            for _ in 0..rng.gen_range(1..=limits.max_rows_per_disjunct.max(1)) {
                let row = random_row(&mut rng, &boxes, &anchor);
                let c = if rng.gen_bool(0.15) {
                    // An equality through the anchor.
                    let shift = -row.eval(&anchor);
                    LinConstraint::eq(row.with_constant(shift))
                } else {
                    LinConstraint::le(row)
                };
                dj = dj.with_constraint(c);
            }
            disjuncts.push(dj);
        }
        model.add_disjunction(Disjunction::new(disjuncts));
    }

    if nd >= 2 && rng.gen_bool(0.4) {
        let mut lits: Vec<Literal> = Vec::new();
        let first = rng.gen_range(0..nd);
        for d in [first, (first + rng.gen_range(1..nd)) % nd] {
            let k = rng.gen_range(0..model.disjunctions[d].len());
            let ind = IndicatorRef::new(d, k);
            lits.push(if rng.gen_bool(0.5) {
                Literal::pos(ind)
            } else {
                Literal::neg(ind)
            });
        }
        model.add_clause(CnfClause::new(lits));
    }
    model
}

/// `count` consecutive instances of the suite seeded with `seed`.
pub fn random_suite(seed: u64, count: usize, limits: &SuiteLimits) -> Vec<GdpModel> {
    (0..count as u64)
        .map(|i| random_instance(seed, i, limits))
        .collect()
}

/// Absolute tolerance for agreeing optima.
pub const EQUIVALENCE_TOL: f64 = 1e-6;
/// Slack allowed when comparing relaxation bounds.
pub const TIGHTNESS_TOL: f64 = 1e-9;
/// Bound improvement that counts as strictly tighter.
pub const STRICT_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Reformulate(#[from] ReformulateError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Thermostat(#[from] crate::thermostat::ThermostatError),
}

/// Optima of one model by the three routes, plus both relaxation bounds.
/// `None` means infeasible; relaxation bounds use `+inf` for an infeasible
/// relaxation and `-inf` for an unbounded one.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceCheck {
    pub bigm: Option<f64>,
    pub hull: Option<f64>,
    pub brute: Option<f64>,
    pub bigm_bound: f64,
    pub hull_bound: f64,
}

fn agree(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= EQUIVALENCE_TOL,
        _ => false,
    }
}

impl InstanceCheck {
    pub fn equivalent(&self) -> bool {
        agree(self.bigm, self.brute) && agree(self.hull, self.brute)
    }

    pub fn hull_at_least_as_tight(&self) -> bool {
        self.hull_bound >= self.bigm_bound - TIGHTNESS_TOL
    }

    pub fn hull_strictly_tighter(&self) -> bool {
        self.hull_bound > self.bigm_bound + STRICT_TOL
    }
}

fn milp_optimum(status: SolveStatus, objective: Option<f64>) -> Option<f64> {
    match status {
        SolveStatus::Optimal => objective,
        SolveStatus::Infeasible => None,
        other => panic!("unlimited solve ended with {other:?}"),
    }
}

fn bound_value(bound: Result<f64, RelaxationError>) -> f64 {
    match bound {
        Ok(v) => v,
        Err(RelaxationError::Infeasible) => f64::INFINITY,
        Err(RelaxationError::Unbounded) => f64::NEG_INFINITY,
        Err(e @ RelaxationError::IterationLimit(_)) => panic!("relaxation failed: {e}"),
    }
}

/// Solves `model` through the big-M reformulation (fixed `big_m`), the hull
/// reformulation and brute-force enumeration.
pub fn check_instance(model: &GdpModel, big_m: f64) -> Result<InstanceCheck, CheckError> {
    let bigm = to_bigm(model, BigMStrategy::Fixed(big_m))?;
    let hull = to_hull(model)?;
    let opts = SolveOptions::default();
    let rb = solve(&bigm.problem, &opts);
    let rh = solve(&hull.problem, &opts);
    let brute = brute_force_solve(model, DEFAULT_SELECTION_CAP, &LpOptions::default())?;
    let brute = match brute.status {
        BruteForceStatus::Optimal => brute.objective,
        BruteForceStatus::Infeasible => None,
        BruteForceStatus::Unbounded => Some(f64::NEG_INFINITY),
    };
    Ok(InstanceCheck {
        bigm: milp_optimum(rb.status, rb.objective),
        hull: milp_optimum(rh.status, rh.objective),
        brute,
        bigm_bound: bound_value(relaxation_bound(&bigm.problem)),
        hull_bound: bound_value(relaxation_bound(&hull.problem)),
    })
}

/// Aggregate outcome of [`check_instance`] over a list of models.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteReport {
    pub instances: usize,
    pub feasible: usize,
    /// Indices whose three optima disagree.
    pub equivalence_failures: Vec<usize>,
    /// Indices where the hull bound is below the big-M bound.
    pub tightness_failures: Vec<usize>,
    pub strictly_tighter: usize,
}

impl SuiteReport {
    pub fn strict_fraction(&self) -> f64 {
        if self.instances == 0 {
            0.0
        } else {
            self.strictly_tighter as f64 / self.instances as f64
        }
    }
}

pub fn check_models(models: &[GdpModel], big_m: f64) -> Result<SuiteReport, CheckError> {
    let mut report = SuiteReport {
        instances: models.len(),
        ..SuiteReport::default()
    };
    for (i, m) in models.iter().enumerate() {
        let c = check_instance(m, big_m)?;
        if c.brute.is_some() {
            report.feasible += 1;
        }
        if !c.equivalent() {
            report.equivalence_failures.push(i);
        }
        if !c.hull_at_least_as_tight() {
            report.tightness_failures.push(i);
        }
        if c.hull_strictly_tighter() {
            report.strictly_tighter += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_reproducible_and_within_limits() {
        let limits = SuiteLimits::default();
        let a = random_suite(3, 20, &limits);
        let b = random_suite(3, 20, &limits);
        assert_eq!(a, b);
        for m in &a {
            assert!(m.num_vars() <= 6);
            assert!(!m.disjunctions.is_empty() && m.disjunctions.len() <= 4);
            assert!(m.disjunctions.iter().all(|d| (2..=3).contains(&d.len())));
            assert!(m.selection_count() <= 81);
            assert!(m.validate().is_empty(), "{:?}", m.validate());
        }
        assert_ne!(random_instance(3, 0, &limits), random_instance(4, 0, &limits));
    }

    #[test]
    fn checks_agree_on_a_small_suite() {
        let models = random_suite(11, 25, &SuiteLimits::default());
        let report = check_models(&models, 1e4).unwrap();
        assert!(report.equivalence_failures.is_empty(), "{report:?}");
        assert!(report.tightness_failures.is_empty(), "{report:?}");
        assert!(report.feasible > 0);
    }
}
