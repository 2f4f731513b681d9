//! Flat mixed-integer linear programs.

use std::fmt;

use crate::model::{IndicatorRef, VarRef};

/// Where a MILP column came from.
#[derive(Clone, Debug, PartialEq)]
pub enum ColumnLabel {
    /// A continuous variable of the source GDP model.
    Original { var: VarRef, name: String },
    /// Binary standing in for a disjunct's indicator.
    Indicator { indicator: IndicatorRef, name: String },
    /// Hull copy of `var` attached to one disjunct.
    Disaggregated { var: VarRef, indicator: IndicatorRef },
    /// Anything else (hand-built problems, MPS imports).
    Plain(String),
}

impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnLabel::Original { name, .. } => write!(f, "{name}"),
            ColumnLabel::Indicator { name, .. } => write!(f, "{name}"),
            ColumnLabel::Disaggregated { var, indicator } => write!(
                f,
                "y{}[{}.{}]",
                var.0, indicator.disjunction, indicator.disjunct
            ),
            ColumnLabel::Plain(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowRelation {
    Le,
    Eq,
}

/// `sum(coeffs) (<= | =) rhs`, sparse with strictly increasing column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct MilpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: RowRelation,
    pub rhs: f64,
}

impl MilpRow {
    /// Builds a row, merging duplicate columns and dropping exact zeros.
    pub fn new<I>(coeffs: I, relation: RowRelation, rhs: f64) -> Self
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut c: Vec<(usize, f64)> = coeffs.into_iter().collect();
        c.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(c.len());
        for (j, v) in c {
            match merged.last_mut() {
                Some((lj, lv)) if *lj == j => *lv += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|&(_, v)| v != 0.0);
        MilpRow {
            coeffs: merged,
            relation,
            rhs,
        }
    }

    pub fn activity(&self, point: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, v)| v * point[j]).sum()
    }

    /// Signed violation: positive when the row is violated.
    pub fn violation(&self, point: &[f64]) -> f64 {
        let a = self.activity(point);
        match self.relation {
            RowRelation::Le => a - self.rhs,
            RowRelation::Eq => (a - self.rhs).abs(),
        }
    }
}

/// `min objective . x + objective_constant` over rows, bounds and integrality.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpProblem {
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub rows: Vec<MilpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub labels: Vec<ColumnLabel>,
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_column(
        &mut self,
        label: ColumnLabel,
        lower: f64,
        upper: f64,
        cost: f64,
        integer: bool,
    ) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.integer.push(integer);
        self.labels.push(label);
        self.objective.len() - 1
    }

    pub fn add_binary(&mut self, label: ColumnLabel, cost: f64) -> usize {
        self.add_column(label, 0.0, 1.0, cost, true)
    }

    pub fn add_row(&mut self, row: MilpRow) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn integer_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.integer
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
    }

    pub fn num_integer(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn objective_value(&self, point: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(point)
            .map(|(c, x)| c * x)
            .sum::<f64>()
            + self.objective_constant
    }

    /// Copy with integrality dropped.
    pub fn relaxed(&self) -> MilpProblem {
        let mut p = self.clone();
        p.integer.iter_mut().for_each(|b| *b = false);
        p
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    /// Violated structural invariants; empty when well formed.
    pub fn check_well_formed(&self) -> Vec<String> {
        let n = self.num_cols();
        let mut out = Vec::new();
        if self.lower.len() != n
            || self.upper.len() != n
            || self.integer.len() != n
            || self.labels.len() != n
        {
            out.push("column arrays have different lengths".to_string());
            return out;
        }
        if !self.objective_constant.is_finite() {
            out.push("objective constant is not finite".to_string());
        }
        for j in 0..n {
            if !self.objective[j].is_finite() {
                out.push(format!("objective coefficient of column {j} is not finite"));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                out.push(format!("column {j} has a NaN bound"));
            }
            if self.lower[j] > self.upper[j] {
                out.push(format!("column {j} has lower bound above upper bound"));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                out.push(format!("row {i} has a non-finite right-hand side"));
            }
            for &(j, v) in &r.coeffs {
                if j >= n {
                    out.push(format!("row {i} references column {j} of {n}"));
                }
                if !v.is_finite() {
                    out.push(format!("row {i} has a non-finite coefficient"));
                }
            }
        }
        out
    }
}
