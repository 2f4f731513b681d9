//! GDP models: continuous variables, global affine constraints, disjunctions of
//! indicator-gated constraint sets with fixed costs, and CNF propositions over
//! the indicators.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::lp::{LpOptions, LpStatus, SimplexSolver};
use crate::reformulate::induced_lp;

/// Absolute tolerance on constraint residuals.
pub const FEAS_TOL: f64 = 1e-7;

/// Default cap on the number of selections `brute_force_solve` will enumerate.
pub const DEFAULT_SELECTION_CAP: usize = 4096;

/// Index of a continuous variable in its model's variable table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarRef(pub usize);

impl VarRef {
    pub fn index(self) -> usize {
        self.0
    }
}

/// `sum(coef * var) + constant`, with each variable appearing at most once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineExpr {
    terms: Vec<(VarRef, f64)>,
    constant: f64,
}

impl AffineExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        AffineExpr {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(var: VarRef) -> Self {
        Self::new().with_term(var, 1.0)
    }

    /// Builds an expression, merging repeated variables.
    pub fn from_terms<I>(terms: I, constant: f64) -> Self
    where
        I: IntoIterator<Item = (VarRef, f64)>,
    {
        let mut expr = Self::constant(constant);
        for (v, c) in terms {
            expr.add_term(v, c);
        }
        expr
    }

    pub fn with_term(mut self, var: VarRef, coef: f64) -> Self {
        self.add_term(var, coef);
        self
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant += constant;
        self
    }

    pub fn add_term(&mut self, var: VarRef, coef: f64) {
        match self.terms.iter_mut().find(|(v, _)| *v == var) {
            Some((_, c)) => *c += coef,
            None => self.terms.push((var, coef)),
        }
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }

    pub fn terms(&self) -> &[(VarRef, f64)] {
        &self.terms
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn scaled(&self, factor: f64) -> Self {
        AffineExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * factor)).collect(),
            constant: self.constant * factor,
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// `self - other`.
    pub fn minus(&self, other: &AffineExpr) -> Self {
        let mut out = self.clone();
        for &(v, c) in &other.terms {
            out.add_term(v, -c);
        }
        out.constant -= other.constant;
        out
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * point[v.0])
    }

    /// Supremum over the box `lower <= y <= upper`; infinite if an unbounded
    /// direction has a nonzero coefficient.
    pub fn sup_over_box(&self, lower: &[f64], upper: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(v, c)| {
            if c > 0.0 {
                acc + c * upper[v.0]
            } else if c < 0.0 {
                acc + c * lower[v.0]
            } else {
                acc
            }
        })
    }

    pub fn inf_over_box(&self, lower: &[f64], upper: &[f64]) -> f64 {
        -self.negated().sup_over_box(lower, upper)
    }

    pub fn max_var_index(&self) -> Option<usize> {
        self.terms.iter().map(|(v, _)| v.0).max()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    /// `expr <= 0`
    Le,
    /// `expr >= 0`
    Ge,
    /// `expr = 0`
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinConstraint {
    pub expr: AffineExpr,
    pub relation: Relation,
}

impl LinConstraint {
    pub fn new(expr: AffineExpr, relation: Relation) -> Self {
        LinConstraint { expr, relation }
    }

    pub fn le(expr: AffineExpr) -> Self {
        Self::new(expr, Relation::Le)
    }

    pub fn ge(expr: AffineExpr) -> Self {
        Self::new(expr, Relation::Ge)
    }

    pub fn eq(expr: AffineExpr) -> Self {
        Self::new(expr, Relation::Eq)
    }

    /// `lhs <= rhs`
    pub fn le_between(lhs: &AffineExpr, rhs: &AffineExpr) -> Self {
        Self::le(lhs.minus(rhs))
    }

    /// `lhs >= rhs`
    pub fn ge_between(lhs: &AffineExpr, rhs: &AffineExpr) -> Self {
        Self::ge(lhs.minus(rhs))
    }

    /// `lhs = rhs`
    pub fn eq_between(lhs: &AffineExpr, rhs: &AffineExpr) -> Self {
        Self::eq(lhs.minus(rhs))
    }

    /// Amount by which `point` violates the constraint (0 when satisfied).
    pub fn violation(&self, point: &[f64]) -> f64 {
        let v = self.expr.eval(point);
        match self.relation {
            Relation::Le => v.max(0.0),
            Relation::Ge => (-v).max(0.0),
            Relation::Eq => v.abs(),
        }
    }

    /// The constraint as a list of `expr <= 0` forms (two for equalities).
    pub fn as_le_forms(&self) -> Vec<AffineExpr> {
        match self.relation {
            Relation::Le => vec![self.expr.clone()],
            Relation::Ge => vec![self.expr.negated()],
            Relation::Eq => vec![self.expr.clone(), self.expr.negated()],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Disjunct {
    pub indicator: String,
    pub constraints: Vec<LinConstraint>,
    pub fixed_cost: f64,
}

impl Disjunct {
    pub fn new(indicator: impl Into<String>) -> Self {
        Disjunct {
            indicator: indicator.into(),
            constraints: Vec::new(),
            fixed_cost: 0.0,
        }
    }

    pub fn with_constraint(mut self, c: LinConstraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.fixed_cost = cost;
        self
    }
}

/// Exactly one of the disjuncts is selected.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Disjunction {
    pub disjuncts: Vec<Disjunct>,
}

impl Disjunction {
    pub fn new(disjuncts: Vec<Disjunct>) -> Self {
        Disjunction { disjuncts }
    }

    pub fn len(&self) -> usize {
        self.disjuncts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disjuncts.is_empty()
    }

    /// Variables referenced by any local constraint of any disjunct, sorted.
    pub fn scoped_vars(&self) -> Vec<VarRef> {
        let mut vars: Vec<VarRef> = self
            .disjuncts
            .iter()
            .flat_map(|d| d.constraints.iter())
            .flat_map(|c| c.expr.terms().iter().map(|(v, _)| *v))
            .collect();
        vars.sort();
        vars.dedup();
        vars
    }
}

/// Identifies the indicator of disjunct `disjunct` in disjunction `disjunction`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndicatorRef {
    pub disjunction: usize,
    pub disjunct: usize,
}

impl IndicatorRef {
    pub fn new(disjunction: usize, disjunct: usize) -> Self {
        IndicatorRef {
            disjunction,
            disjunct,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub indicator: IndicatorRef,
    pub positive: bool,
}

impl Literal {
    pub fn pos(indicator: IndicatorRef) -> Self {
        Literal {
            indicator,
            positive: true,
        }
    }

    pub fn neg(indicator: IndicatorRef) -> Self {
        Literal {
            indicator,
            positive: false,
        }
    }
}

/// A disjunction of literals.
#[derive(Clone, Debug, PartialEq)]
pub struct CnfClause {
    pub literals: Vec<Literal>,
}

impl CnfClause {
    pub fn new(literals: Vec<Literal>) -> Self {
        CnfClause { literals }
    }

    pub fn unit(lit: Literal) -> Self {
        CnfClause {
            literals: vec![lit],
        }
    }

    /// Evaluates the clause under the assignment induced by `selection`
    /// (an indicator is true iff its disjunct is the selected one).
    pub fn satisfied_by(&self, selection: &[usize]) -> bool {
        self.literals.iter().any(|lit| {
            let chosen = selection[lit.indicator.disjunction] == lit.indicator.disjunct;
            chosen == lit.positive
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GdpModel {
    pub variables: Vec<Variable>,
    /// Affine variable cost; disjunct fixed costs are added on top.
    pub objective: AffineExpr,
    pub constraints: Vec<LinConstraint>,
    pub disjunctions: Vec<Disjunction>,
    pub propositions: Vec<CnfClause>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    UndeclaredVariable {
        location: String,
        index: usize,
        declared: usize,
    },
    UnboundedVariable {
        index: usize,
        name: String,
    },
    InvertedBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },
    NonFiniteCoefficient {
        location: String,
    },
    EmptyDisjunction {
        disjunction: usize,
    },
    DuplicateIndicator {
        disjunction: usize,
        name: String,
    },
    NonFiniteFixedCost {
        indicator: IndicatorRef,
    },
    EmptyClause {
        clause: usize,
    },
    DuplicateLiteral {
        clause: usize,
        indicator: IndicatorRef,
    },
    UnknownIndicator {
        clause: usize,
        indicator: IndicatorRef,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UndeclaredVariable {
                location,
                index,
                declared,
            } => write!(
                f,
                "undeclared variable {index} in {location} ({declared} declared)"
            ),
            Diagnostic::UnboundedVariable { index, name } => write!(
                f,
                "variable {index} ({name}) has an infinite bound; unbounded variable forbids hull reformulation"
            ),
            Diagnostic::InvertedBounds {
                index,
                lower,
                upper,
            } => write!(f, "variable {index} has lower bound {lower} > upper bound {upper}"),
            Diagnostic::NonFiniteCoefficient { location } => {
                write!(f, "non-finite coefficient in {location}")
            }
            Diagnostic::EmptyDisjunction { disjunction } => {
                write!(f, "disjunction {disjunction} has no disjuncts")
            }
            Diagnostic::DuplicateIndicator { disjunction, name } => write!(
                f,
                "indicator name {name:?} repeated in disjunction {disjunction}"
            ),
            Diagnostic::NonFiniteFixedCost { indicator } => write!(
                f,
                "non-finite fixed cost on disjunct {} of disjunction {}",
                indicator.disjunct, indicator.disjunction
            ),
            Diagnostic::EmptyClause { clause } => write!(f, "clause {clause} is empty"),
            Diagnostic::DuplicateLiteral { clause, indicator } => write!(
                f,
                "clause {clause} mentions indicator ({}, {}) twice",
                indicator.disjunction, indicator.disjunct
            ),
            Diagnostic::UnknownIndicator { clause, indicator } => write!(
                f,
                "clause {clause} references unknown indicator ({}, {})",
                indicator.disjunction, indicator.disjunct
            ),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("point has {got} values but the model declares {expected} variables")]
    PointDimension { expected: usize, got: usize },
    #[error("selection has {got} entries but the model has {expected} disjunctions")]
    SelectionDimension { expected: usize, got: usize },
    #[error("selection picks disjunct {disjunct} of disjunction {disjunction}, which has {len}")]
    SelectionOutOfRange {
        disjunction: usize,
        disjunct: usize,
        len: usize,
    },
    #[error("{combinations} selection combinations exceed the cap of {cap}")]
    CapExceeded { combinations: u128, cap: usize },
    #[error("model is invalid: {0}")]
    Invalid(String),
}

/// Outcome of checking one (selection, point) pair against a model.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub feasible: bool,
    pub objective: Option<f64>,
    pub max_violation: f64,
}

impl GdpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarRef {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        VarRef(self.variables.len() - 1)
    }

    pub fn add_constraint(&mut self, c: LinConstraint) {
        self.constraints.push(c);
    }

    pub fn add_disjunction(&mut self, d: Disjunction) -> usize {
        self.disjunctions.push(d);
        self.disjunctions.len() - 1
    }

    pub fn add_clause(&mut self, clause: CnfClause) {
        self.propositions.push(clause);
    }

    pub fn set_objective(&mut self, objective: AffineExpr) {
        self.objective = objective;
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.lower).collect()
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.upper).collect()
    }

    pub fn num_indicators(&self) -> usize {
        self.disjunctions.iter().map(Disjunction::len).sum()
    }

    /// Number of selections (one disjunct per disjunction), ignoring logic.
    pub fn selection_count(&self) -> u128 {
        self.disjunctions
            .iter()
            .fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128))
    }

    pub fn indicator_name(&self, ind: IndicatorRef) -> &str {
        &self.disjunctions[ind.disjunction].disjuncts[ind.disjunct].indicator
    }

    /// True iff every CNF clause holds under the selection.
    pub fn selection_satisfies_logic(&self, selection: &[usize]) -> bool {
        self.propositions.iter().all(|c| c.satisfied_by(selection))
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        validate(self)
    }
}

fn check_expr(
    expr: &AffineExpr,
    location: &str,
    declared: usize,
    out: &mut Vec<Diagnostic>,
) {
    for &(v, c) in expr.terms() {
        if v.0 >= declared {
            out.push(Diagnostic::UndeclaredVariable {
                location: location.to_string(),
                index: v.0,
                declared,
            });
        }
        if !c.is_finite() {
            out.push(Diagnostic::NonFiniteCoefficient {
                location: location.to_string(),
            });
        }
    }
    if !expr.constant_term().is_finite() {
        out.push(Diagnostic::NonFiniteCoefficient {
            location: location.to_string(),
        });
    }
}

/// One diagnostic per violated model invariant; empty iff the model is valid.
pub fn validate(model: &GdpModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = model.variables.len();
    for (i, v) in model.variables.iter().enumerate() {
        if !v.lower.is_finite() || !v.upper.is_finite() {
            out.push(Diagnostic::UnboundedVariable {
                index: i,
                name: v.name.clone(),
            });
        }
        if v.lower > v.upper {
            out.push(Diagnostic::InvertedBounds {
                index: i,
                lower: v.lower,
                upper: v.upper,
            });
        }
    }
    check_expr(&model.objective, "objective", n, &mut out);
    for (k, c) in model.constraints.iter().enumerate() {
        check_expr(&c.expr, &format!("global constraint {k}"), n, &mut out);
    }
    for (d, disj) in model.disjunctions.iter().enumerate() {
        if disj.is_empty() {
            out.push(Diagnostic::EmptyDisjunction { disjunction: d });
        }
        let mut names = HashSet::new();
        for (i, dj) in disj.disjuncts.iter().enumerate() {
            if !names.insert(dj.indicator.as_str()) {
                out.push(Diagnostic::DuplicateIndicator {
                    disjunction: d,
                    name: dj.indicator.clone(),
                });
            }
            if !dj.fixed_cost.is_finite() {
                out.push(Diagnostic::NonFiniteFixedCost {
                    indicator: IndicatorRef::new(d, i),
                });
            }
            for (k, c) in dj.constraints.iter().enumerate() {
                check_expr(
                    &c.expr,
                    &format!("constraint {k} of disjunct {i} in disjunction {d}"),
                    n,
                    &mut out,
                );
            }
        }
    }
    for (k, clause) in model.propositions.iter().enumerate() {
        if clause.literals.is_empty() {
            out.push(Diagnostic::EmptyClause { clause: k });
        }
        let mut seen = HashSet::new();
        for lit in &clause.literals {
            let ind = lit.indicator;
            let known = model
                .disjunctions
                .get(ind.disjunction)
                .is_some_and(|d| ind.disjunct < d.len());
            if !known {
                out.push(Diagnostic::UnknownIndicator {
                    clause: k,
                    indicator: ind,
                });
            }
            if !seen.insert(ind) {
                out.push(Diagnostic::DuplicateLiteral {
                    clause: k,
                    indicator: ind,
                });
            }
        }
    }
    out
}

fn check_selection(model: &GdpModel, selection: &[usize]) -> Result<(), ModelError> {
    if selection.len() != model.disjunctions.len() {
        return Err(ModelError::SelectionDimension {
            expected: model.disjunctions.len(),
            got: selection.len(),
        });
    }
    for (d, (&i, disj)) in selection.iter().zip(&model.disjunctions).enumerate() {
        if i >= disj.len() {
            return Err(ModelError::SelectionOutOfRange {
                disjunction: d,
                disjunct: i,
                len: disj.len(),
            });
        }
    }
    Ok(())
}

/// Checks a selection and point against the model: bounds, global rows, the
/// selected disjuncts' local rows and every clause. The objective is reported
/// only for feasible pairs.
pub fn evaluate_assignment(
    model: &GdpModel,
    selection: &[usize],
    point: &[f64],
) -> Result<Evaluation, ModelError> {
    if point.len() != model.variables.len() {
        return Err(ModelError::PointDimension {
            expected: model.variables.len(),
            got: point.len(),
        });
    }
    check_selection(model, selection)?;

    let mut worst: f64 = 0.0;
    for (v, &y) in model.variables.iter().zip(point) {
        worst = worst.max(v.lower - y).max(y - v.upper);
    }
    for c in &model.constraints {
        worst = worst.max(c.violation(point));
    }
    for (disj, &i) in model.disjunctions.iter().zip(selection) {
        for c in &disj.disjuncts[i].constraints {
            worst = worst.max(c.violation(point));
        }
    }
    let feasible = worst <= FEAS_TOL && model.selection_satisfies_logic(selection);
    let objective = feasible.then(|| {
        model.objective.eval(point)
            + model
                .disjunctions
                .iter()
                .zip(selection)
                .map(|(d, &i)| d.disjuncts[i].fixed_cost)
                .sum::<f64>()
    });
    Ok(Evaluation {
        feasible,
        objective,
        max_violation: worst,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BruteForceStatus {
    Optimal,
    Infeasible,
    /// Some induced LP was unbounded.
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForceResult {
    pub status: BruteForceStatus,
    pub objective: Option<f64>,
    pub point: Vec<f64>,
    pub selection: Vec<usize>,
    /// Selections passing the logic filter (each costs one LP solve).
    pub lps_solved: usize,
}

/// Enumerates every selection, discards those falsifying a clause, solves the
/// induced LP of each survivor and keeps the best. Ties keep the first
/// selection in lexicographic order.
pub fn brute_force_solve(
    model: &GdpModel,
    cap: usize,
    lp_options: &LpOptions,
) -> Result<BruteForceResult, ModelError> {
    let combinations = model.selection_count();
    if combinations > cap as u128 {
        return Err(ModelError::CapExceeded { combinations, cap });
    }
    let diags = validate(model);
    if let Some(d) = diags.iter().find(|d| {
        !matches!(d, Diagnostic::UnboundedVariable { .. })
    }) {
        return Err(ModelError::Invalid(d.to_string()));
    }

    let mut best = BruteForceResult {
        status: BruteForceStatus::Infeasible,
        objective: None,
        point: Vec::new(),
        selection: Vec::new(),
        lps_solved: 0,
    };
    let sizes: Vec<usize> = model.disjunctions.iter().map(Disjunction::len).collect();
    if sizes.contains(&0) {
        return Ok(best);
    }
    let mut selection = vec![0usize; sizes.len()];
    loop {
        if model.selection_satisfies_logic(&selection) {
            let lp = induced_lp(model, &selection);
            let solver = SimplexSolver::new(&lp);
            let res = solver.solve(&lp.lower, &lp.upper, None, lp_options);
            best.lps_solved += 1;
            match res.status {
                LpStatus::Optimal => {
                    if best.objective.is_none_or(|b| res.objective < b) {
                        best.objective = Some(res.objective);
                        best.point = res.point;
                        best.selection = selection.clone();
                        best.status = BruteForceStatus::Optimal;
                    }
                }
                LpStatus::Unbounded => {
                    best.status = BruteForceStatus::Unbounded;
                    best.objective = None;
                    best.selection = selection.clone();
                    return Ok(best);
                }
                LpStatus::Infeasible | LpStatus::IterationLimit | LpStatus::CutOff => {}
            }
        }
        // odometer increment, last disjunction fastest
        let mut k = sizes.len();
        loop {
            if k == 0 {
                return Ok(best);
            }
            k -= 1;
            selection[k] += 1;
            if selection[k] < sizes[k] {
                break;
            }
            selection[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_way() -> GdpModel {
        let mut m = GdpModel::new();
        let y = m.add_var("y", 0.0, 10.0);
        m.add_disjunction(Disjunction::new(vec![
            Disjunct::new("a1").with_constraint(LinConstraint::ge(
                AffineExpr::var(y).with_constant(-1.0),
            )),
            Disjunct::new("a2").with_constraint(LinConstraint::ge(
                AffineExpr::var(y).with_constant(-2.0),
            )),
        ]));
        m.set_objective(AffineExpr::var(y));
        m
    }

    #[test]
    fn single_bounded_variable_is_valid() {
        let mut m = GdpModel::new();
        m.add_var("y", 0.0, 1.0);
        assert!(validate(&m).is_empty());
    }

    #[test]
    fn undeclared_variable_is_reported_once() {
        let mut m = GdpModel::new();
        m.add_var("a", 0.0, 1.0);
        m.add_var("b", 0.0, 1.0);
        m.add_constraint(LinConstraint::le(AffineExpr::var(VarRef(5))));
        let d = validate(&m);
        assert_eq!(d.len(), 1);
        assert!(matches!(
            d[0],
            Diagnostic::UndeclaredVariable {
                index: 5,
                declared: 2,
                ..
            }
        ));
    }

    #[test]
    fn infinite_bound_is_reported() {
        let mut m = GdpModel::new();
        m.add_var("y", f64::NEG_INFINITY, 1.0);
        let d = validate(&m);
        assert_eq!(d.len(), 1);
        assert!(matches!(d[0], Diagnostic::UnboundedVariable { index: 0, .. }));
        assert!(d[0].to_string().contains("hull"));
    }

    #[test]
    fn logic_diagnostics() {
        let mut m = two_way();
        m.disjunctions[0].disjuncts[1].indicator = "a1".into();
        m.disjunctions[0].disjuncts[0].fixed_cost = f64::NAN;
        let a = IndicatorRef::new(0, 0);
        m.add_clause(CnfClause::new(vec![]));
        m.add_clause(CnfClause::new(vec![Literal::pos(a), Literal::neg(a)]));
        m.add_clause(CnfClause::unit(Literal::pos(IndicatorRef::new(3, 0))));
        m.add_disjunction(Disjunction::default());
        let d = validate(&m);
        assert_eq!(d.len(), 6, "{d:?}");
    }

    #[test]
    fn expression_merges_terms() {
        let e = AffineExpr::from_terms([(VarRef(0), 1.0), (VarRef(1), 2.0), (VarRef(0), 3.0)], 1.0);
        assert_eq!(e.terms(), &[(VarRef(0), 4.0), (VarRef(1), 2.0)]);
        assert_eq!(e.eval(&[1.0, 1.0]), 7.0);
        assert_eq!(e.sup_over_box(&[0.0, -1.0], &[2.0, 1.0]), 11.0);
        assert_eq!(e.inf_over_box(&[0.0, -1.0], &[2.0, 1.0]), -1.0);
    }

    #[test]
    fn evaluate_selected_disjunct() {
        let m = two_way();
        let ev = evaluate_assignment(&m, &[0], &[1.5]).unwrap();
        assert!(ev.feasible);
        assert_eq!(ev.objective, Some(1.5));

        let ev = evaluate_assignment(&m, &[1], &[1.5]).unwrap();
        assert!(!ev.feasible);
        assert_eq!(ev.objective, None);
        assert!((ev.max_violation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn evaluate_respects_logic() {
        let mut m = two_way();
        m.add_clause(CnfClause::unit(Literal::neg(IndicatorRef::new(0, 0))));
        let ev = evaluate_assignment(&m, &[0], &[1.5]).unwrap();
        assert!(!ev.feasible);
    }

    #[test]
    fn evaluate_dimension_errors() {
        let m = two_way();
        assert_eq!(
            evaluate_assignment(&m, &[0], &[1.0, 2.0]),
            Err(ModelError::PointDimension {
                expected: 1,
                got: 2
            })
        );
        assert!(matches!(
            evaluate_assignment(&m, &[2], &[1.0]),
            Err(ModelError::SelectionOutOfRange { .. })
        ));
        assert!(matches!(
            evaluate_assignment(&m, &[], &[1.0]),
            Err(ModelError::SelectionDimension { .. })
        ));
    }

    #[test]
    fn evaluate_adds_fixed_costs() {
        let mut m = two_way();
        m.disjunctions[0].disjuncts[1].fixed_cost = 0.25;
        let ev = evaluate_assignment(&m, &[1], &[3.0]).unwrap();
        assert_eq!(ev.objective, Some(3.25));
    }

    #[test]
    fn brute_force_picks_cheaper_disjunct() {
        let m = two_way();
        let r = brute_force_solve(&m, DEFAULT_SELECTION_CAP, &LpOptions::default()).unwrap();
        assert_eq!(r.status, BruteForceStatus::Optimal);
        assert!((r.objective.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(r.selection, vec![0]);
        assert_eq!(r.lps_solved, 2);
    }

    #[test]
    fn brute_force_reports_infeasible() {
        let mut m = two_way();
        // only a2 allowed by logic, and a2 contradicts y <= 1.5
        m.add_clause(CnfClause::unit(Literal::pos(IndicatorRef::new(0, 1))));
        m.add_constraint(LinConstraint::le(AffineExpr::var(VarRef(0)).with_constant(-1.5)));
        let r = brute_force_solve(&m, DEFAULT_SELECTION_CAP, &LpOptions::default()).unwrap();
        assert_eq!(r.status, BruteForceStatus::Infeasible);
        assert_eq!(r.lps_solved, 1);
    }

    #[test]
    fn brute_force_cap() {
        let mut m = GdpModel::new();
        m.add_var("y", 0.0, 1.0);
        for _ in 0..13 {
            m.add_disjunction(Disjunction::new(vec![Disjunct::new("a"), Disjunct::new("b")]));
        }
        assert!(matches!(
            brute_force_solve(&m, DEFAULT_SELECTION_CAP, &LpOptions::default()),
            Err(ModelError::CapExceeded {
                combinations: 8192,
                cap: 4096
            })
        ));
    }
}
