//! GDP to MILP: big-M and convex-hull reformulations, and the linear form of
//! CNF propositions.
//!
//! Column layout shared by both reformulations: the model's continuous
//! variables first (same order), then one binary per indicator in disjunction
//! order. The hull reformulation appends its disaggregated copies after that.

use thiserror::Error;

use crate::model::{
    validate, AffineExpr, CnfClause, Diagnostic, GdpModel, IndicatorRef, LinConstraint, Relation,
};
pub use crate::problem::{ColumnLabel, MilpProblem, MilpRow, RowRelation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BigMStrategy {
    /// Same M on every gated row.
    Fixed(f64),
    /// Per-row M equal to the supremum of the row over the variable box.
    FromBounds,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReformulateError {
    #[error("model failed validation: {0}")]
    InvalidModel(String),
    #[error("clause {clause} references indicator ({}, {}) with no binary column", .indicator.disjunction, .indicator.disjunct)]
    UnmappedIndicator {
        clause: usize,
        indicator: IndicatorRef,
    },
    #[error("big-M must be positive and finite, got {0}")]
    InvalidBigM(f64),
    #[error("row {row} of disjunct {} in disjunction {} involves an unbounded variable", .indicator.disjunct, .indicator.disjunction)]
    UnboundedRow { indicator: IndicatorRef, row: usize },
    #[error("variable {index} ({name}) needs finite bounds for the hull reformulation")]
    InfiniteBound { index: usize, name: String },
}

/// Column indices of the indicator binaries, `[disjunction][disjunct]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorColumns(pub Vec<Vec<usize>>);

impl IndicatorColumns {
    pub fn get(&self, ind: IndicatorRef) -> Option<usize> {
        self.0.get(ind.disjunction)?.get(ind.disjunct).copied()
    }
}

/// A reformulated model plus the bookkeeping needed to read solutions back in
/// GDP terms.
#[derive(Clone, Debug)]
pub struct Reformulation {
    pub problem: MilpProblem,
    pub indicators: IndicatorColumns,
    /// Number of leading columns that are the model's own variables.
    pub num_original: usize,
}

impl Reformulation {
    /// The model variables' values (auxiliary columns dropped).
    pub fn original_point<'a>(&self, point: &'a [f64]) -> &'a [f64] {
        &point[..self.num_original]
    }

    /// Selected disjunct per disjunction, read from the binaries (the largest
    /// indicator value wins, lowest index on ties).
    pub fn selection(&self, point: &[f64]) -> Vec<usize> {
        self.indicators
            .0
            .iter()
            .map(|cols| {
                let mut best = 0;
                for (i, &c) in cols.iter().enumerate() {
                    if point[c] > point[cols[best]] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    /// Binary vector a selection induces over the indicator columns.
    pub fn indicator_values(&self, selection: &[usize]) -> Vec<(usize, f64)> {
        self.indicators
            .0
            .iter()
            .zip(selection)
            .flat_map(|(cols, &pick)| {
                cols.iter()
                    .enumerate()
                    .map(move |(i, &c)| (c, if i == pick { 1.0 } else { 0.0 }))
            })
            .collect()
    }
}

/// One `>= 1` row per clause, stored in `<=` form:
/// `-sum(pos s) + sum(neg s) <= #neg - 1`.
pub fn cnf_to_linear<F>(clauses: &[CnfClause], column_of: F) -> Result<Vec<MilpRow>, ReformulateError>
where
    F: Fn(IndicatorRef) -> Option<usize>,
{
    clauses
        .iter()
        .enumerate()
        .map(|(k, clause)| {
            let mut coeffs = Vec::with_capacity(clause.literals.len());
            let mut negatives = 0usize;
            for lit in &clause.literals {
                let col = column_of(lit.indicator).ok_or(ReformulateError::UnmappedIndicator {
                    clause: k,
                    indicator: lit.indicator,
                })?;
                if lit.positive {
                    coeffs.push((col, -1.0));
                } else {
                    coeffs.push((col, 1.0));
                    negatives += 1;
                }
            }
            Ok(MilpRow::new(coeffs, RowRelation::Le, negatives as f64 - 1.0))
        })
        .collect()
}

fn check_model(model: &GdpModel, allow_unbounded: bool) -> Result<(), ReformulateError> {
    let diags = validate(model);
    match diags
        .iter()
        .find(|d| !(allow_unbounded && matches!(d, Diagnostic::UnboundedVariable { .. })))
    {
        Some(d) => Err(ReformulateError::InvalidModel(d.to_string())),
        None => Ok(()),
    }
}

/// Terms of an affine expression mapped through `col`, plus its constant.
fn mapped_terms(expr: &AffineExpr, col: impl Fn(usize) -> usize) -> Vec<(usize, f64)> {
    expr.terms().iter().map(|&(v, c)| (col(v.0), c)).collect()
}

fn global_row(c: &LinConstraint) -> MilpRow {
    let (expr, relation) = match c.relation {
        Relation::Le => (c.expr.clone(), RowRelation::Le),
        Relation::Ge => (c.expr.negated(), RowRelation::Le),
        Relation::Eq => (c.expr.clone(), RowRelation::Eq),
    };
    MilpRow::new(mapped_terms(&expr, |j| j), relation, -expr.constant_term())
}

/// Original columns, globals and the objective: the part both
/// reformulations (and the induced LPs) share.
fn base_problem(model: &GdpModel) -> MilpProblem {
    let mut p = MilpProblem::new();
    for (i, v) in model.variables.iter().enumerate() {
        p.add_column(
            ColumnLabel::Original {
                var: crate::model::VarRef(i),
                name: v.name.clone(),
            },
            v.lower,
            v.upper,
            0.0,
            false,
        );
    }
    for &(v, c) in model.objective.terms() {
        p.objective[v.0] += c;
    }
    p.objective_constant = model.objective.constant_term();
    for c in &model.constraints {
        p.add_row(global_row(c));
    }
    p
}

fn add_indicator_columns(model: &GdpModel, p: &mut MilpProblem) -> IndicatorColumns {
    let cols = model
        .disjunctions
        .iter()
        .enumerate()
        .map(|(d, disj)| {
            disj.disjuncts
                .iter()
                .enumerate()
                .map(|(i, dj)| {
                    p.add_binary(
                        ColumnLabel::Indicator {
                            indicator: IndicatorRef::new(d, i),
                            name: dj.indicator.clone(),
                        },
                        dj.fixed_cost,
                    )
                })
                .collect()
        })
        .collect();
    IndicatorColumns(cols)
}

fn add_exactly_one_and_logic(
    model: &GdpModel,
    p: &mut MilpProblem,
    ind: &IndicatorColumns,
) -> Result<(), ReformulateError> {
    for cols in &ind.0 {
        p.add_row(MilpRow::new(
            cols.iter().map(|&c| (c, 1.0)),
            RowRelation::Eq,
            1.0,
        ));
    }
    for row in cnf_to_linear(&model.propositions, |r| ind.get(r))? {
        p.add_row(row);
    }
    Ok(())
}

/// Big-M reformulation: each gated row `r(y) <= 0` becomes
/// `r(y) <= M (1 - s)`; equalities become two such rows.
pub fn to_bigm(model: &GdpModel, strategy: BigMStrategy) -> Result<Reformulation, ReformulateError> {
    if let BigMStrategy::Fixed(m) = strategy {
        if !(m > 0.0 && m.is_finite()) {
            return Err(ReformulateError::InvalidBigM(m));
        }
    }
    check_model(model, true)?;
    let lower = model.lower_bounds();
    let upper = model.upper_bounds();

    let mut p = base_problem(model);
    let ind = add_indicator_columns(model, &mut p);
    for (d, disj) in model.disjunctions.iter().enumerate() {
        for (i, dj) in disj.disjuncts.iter().enumerate() {
            let s = ind.0[d][i];
            for (k, c) in dj.constraints.iter().enumerate() {
                for expr in c.as_le_forms() {
                    let big_m = match strategy {
                        BigMStrategy::Fixed(m) => m,
                        BigMStrategy::FromBounds => {
                            let sup = expr.sup_over_box(&lower, &upper);
                            if !sup.is_finite() {
                                return Err(ReformulateError::UnboundedRow {
                                    indicator: IndicatorRef::new(d, i),
                                    row: k,
                                });
                            }
                            sup.max(0.0)
                        }
                    };
                    // a.y + const <= M - M s
                    let mut coeffs = mapped_terms(&expr, |j| j);
                    coeffs.push((s, big_m));
                    p.add_row(MilpRow::new(
                        coeffs,
                        RowRelation::Le,
                        big_m - expr.constant_term(),
                    ));
                }
            }
        }
    }
    add_exactly_one_and_logic(model, &mut p, &ind)?;
    Ok(Reformulation {
        problem: p,
        indicators: ind,
        num_original: model.num_vars(),
    })
}

/// Convex-hull reformulation for affine disjuncts. Only variables that some
/// local row of a disjunction mentions are disaggregated for it; the
/// perspective of `a.y + b <= 0` is the linear row `a.y_i + b s_i <= 0`.
pub fn to_hull(model: &GdpModel) -> Result<Reformulation, ReformulateError> {
    check_model(model, true)?;

    let mut p = base_problem(model);
    let ind = add_indicator_columns(model, &mut p);
    for (d, disj) in model.disjunctions.iter().enumerate() {
        let scope = disj.scoped_vars();
        for v in &scope {
            let var = &model.variables[v.0];
            if !var.lower.is_finite() || !var.upper.is_finite() {
                return Err(ReformulateError::InfiniteBound {
                    index: v.0,
                    name: var.name.clone(),
                });
            }
        }
        // copies[i][k] is the copy of scope[k] for disjunct i
        let mut copies: Vec<Vec<usize>> = Vec::with_capacity(disj.len());
        for i in 0..disj.len() {
            let s = ind.0[d][i];
            let mut row_copies = Vec::with_capacity(scope.len());
            for v in &scope {
                let var = &model.variables[v.0];
                let col = p.add_column(
                    ColumnLabel::Disaggregated {
                        var: *v,
                        indicator: IndicatorRef::new(d, i),
                    },
                    var.lower.min(0.0),
                    var.upper.max(0.0),
                    0.0,
                    false,
                );
                // l s <= y_i <= u s; a zero bound is already the column bound
                if var.lower != 0.0 {
                    p.add_row(MilpRow::new(
                        [(s, var.lower), (col, -1.0)],
                        RowRelation::Le,
                        0.0,
                    ));
                }
                if var.upper != 0.0 {
                    p.add_row(MilpRow::new(
                        [(col, 1.0), (s, -var.upper)],
                        RowRelation::Le,
                        0.0,
                    ));
                }
                row_copies.push(col);
            }
            copies.push(row_copies);
        }
        for (k, v) in scope.iter().enumerate() {
            let mut coeffs = vec![(v.0, 1.0)];
            coeffs.extend(copies.iter().map(|c| (c[k], -1.0)));
            p.add_row(MilpRow::new(coeffs, RowRelation::Eq, 0.0));
        }
        for (i, dj) in disj.disjuncts.iter().enumerate() {
            let s = ind.0[d][i];
            let copy_of = |j: usize| {
                let k = scope
                    .binary_search(&crate::model::VarRef(j))
                    .expect("scoped variable");
                copies[i][k]
            };
            for c in &dj.constraints {
                let (expr, relation) = match c.relation {
                    Relation::Le => (c.expr.clone(), RowRelation::Le),
                    Relation::Ge => (c.expr.negated(), RowRelation::Le),
                    Relation::Eq => (c.expr.clone(), RowRelation::Eq),
                };
                let mut coeffs = mapped_terms(&expr, copy_of);
                coeffs.push((s, expr.constant_term()));
                p.add_row(MilpRow::new(coeffs, relation, 0.0));
            }
        }
    }
    add_exactly_one_and_logic(model, &mut p, &ind)?;
    Ok(Reformulation {
        problem: p,
        indicators: ind,
        num_original: model.num_vars(),
    })
}

/// The LP left once every disjunction's choice is fixed: globals plus the
/// selected disjuncts' rows, objective plus their fixed costs.
pub fn induced_lp(model: &GdpModel, selection: &[usize]) -> MilpProblem {
    let mut p = base_problem(model);
    for (disj, &i) in model.disjunctions.iter().zip(selection) {
        let dj = &disj.disjuncts[i];
        p.objective_constant += dj.fixed_cost;
        for c in &dj.constraints {
            p.add_row(global_row(c));
        }
    }
    p
}

/// Lifts a GDP point and selection into a reformulation's column space:
/// binaries from the selection, hull copies equal to the point on the
/// selected disjunct and zero elsewhere.
pub fn lift_point(reform: &Reformulation, point: &[f64], selection: &[usize]) -> Vec<f64> {
    let p = &reform.problem;
    let mut x = vec![0.0; p.num_cols()];
    x[..reform.num_original].copy_from_slice(point);
    for (c, v) in reform.indicator_values(selection) {
        x[c] = v;
    }
    for (j, label) in p.labels.iter().enumerate() {
        if let ColumnLabel::Disaggregated { var, indicator } = label {
            if selection[indicator.disjunction] == indicator.disjunct {
                x[j] = point[var.0];
            }
        }
    }
    x
}
