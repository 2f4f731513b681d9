//! Fixed-format MPS export (and a matching reader for round trips).
//!
//! Rows and columns get generated eight-character names (`R0000001`,
//! `C0000001`) so that the layout stays within the fixed-format name fields.
//! Numbers are written in Rust's shortest round-trip form, which keeps the
//! file bit-exact on re-import but may overflow the classic twelve-character
//! value field; such lines are still accepted by whitespace-tokenizing
//! readers, as the file contains no embedded blanks in names.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::problem::{ColumnLabel, MilpProblem, MilpRow, RowRelation};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("cannot write MPS file: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("problem is not well formed: {0}")]
    Malformed(String),
}

const OBJ_ROW: &str = "OBJ";

pub fn column_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

pub fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn num(v: f64) -> String {
    let s = format!("{v:?}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

fn entry(out: &mut String, code: &str, a: &str, b: &str, value: Option<f64>) {
    let _ = match value {
        Some(v) => writeln!(out, " {code:<2} {a:<8}  {b:<8}  {:>12}", num(v)),
        None => writeln!(out, " {code:<2} {a:<8}  {b}"),
    };
}

/// Renders `problem` as MPS text.
pub fn to_mps_string(problem: &MilpProblem, name: &str) -> Result<String, MpsError> {
    let issues = problem.check_well_formed();
    if let Some(first) = issues.into_iter().next() {
        return Err(MpsError::Malformed(first));
    }
    let n = problem.num_cols();
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n");
    entry(&mut out, "N", OBJ_ROW, "", None);
    for (i, row) in problem.rows.iter().enumerate() {
        let code = match row.relation {
            RowRelation::Le => "L",
            RowRelation::Eq => "E",
        };
        entry(&mut out, code, &row_name(i), "", None);
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in problem.rows.iter().enumerate() {
        for &(j, v) in &row.coeffs {
            by_col[j].push((i, v));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_marker = false;
    let mut markers = 0usize;
    for j in 0..n {
        if problem.integer[j] != in_marker {
            let tag = if in_marker { "'INTEND'" } else { "'INTORG'" };
            let _ = writeln!(
                out,
                "    {:<8}  {:<8}  {:<12}",
                format!("MARKER{:02}", markers % 100),
                "'MARKER'",
                tag
            );
            markers += 1;
            in_marker = problem.integer[j];
        }
        let cname = column_name(j);
        if problem.objective[j] != 0.0 || by_col[j].is_empty() {
            entry(&mut out, "", &cname, OBJ_ROW, Some(problem.objective[j]));
        }
        for &(i, v) in &by_col[j] {
            entry(&mut out, "", &cname, &row_name(i), Some(v));
        }
    }
    if in_marker {
        let _ = writeln!(
            out,
            "    {:<8}  {:<8}  {:<12}",
            format!("MARKER{:02}", markers % 100),
            "'MARKER'",
            "'INTEND'"
        );
    }

    out.push_str("RHS\n");
    if problem.objective_constant != 0.0 {
        entry(&mut out, "", "RHS", OBJ_ROW, Some(-problem.objective_constant));
    }
    for (i, row) in problem.rows.iter().enumerate() {
        if row.rhs != 0.0 {
            entry(&mut out, "", "RHS", &row_name(i), Some(row.rhs));
        }
    }
    out.push_str("RANGES\n");
    out.push_str("BOUNDS\n");
    for j in 0..n {
        let (lo, hi) = (problem.lower[j], problem.upper[j]);
        let c = column_name(j);
        if problem.integer[j] && lo == 0.0 && hi == 1.0 {
            entry(&mut out, "BV", "BND", &c, None);
        } else if lo == hi {
            entry(&mut out, "FX", "BND", &c, Some(lo));
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            entry(&mut out, "FR", "BND", &c, None);
        } else {
            if lo == f64::NEG_INFINITY {
                entry(&mut out, "MI", "BND", &c, None);
            } else if lo != 0.0 || hi < 0.0 {
                entry(&mut out, "LO", "BND", &c, Some(lo));
            }
            if hi == f64::INFINITY {
                if problem.integer[j] {
                    entry(&mut out, "PL", "BND", &c, None);
                }
            } else {
                entry(&mut out, "UP", "BND", &c, Some(hi));
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

pub fn write_mps<W: Write>(problem: &MilpProblem, name: &str, mut w: W) -> Result<(), MpsError> {
    w.write_all(to_mps_string(problem, name)?.as_bytes())?;
    Ok(())
}

pub fn export_mps(problem: &MilpProblem, path: impl AsRef<Path>) -> Result<(), MpsError> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("GDP")
        .chars()
        .filter(|c| !c.is_whitespace())
        .take(8)
        .collect::<String>();
    let file = std::fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    write_mps(problem, if name.is_empty() { "GDP" } else { &name }, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

/// Parses MPS text (fixed or free layout, names without blanks). Rows of type
/// `G` are negated into `<=` rows; only the first `N` row is the objective.
pub fn read_mps(text: &str) -> Result<MilpProblem, MpsError> {
    let mut p = MilpProblem::new();
    let mut section = Section::None;
    let mut obj_name: Option<String> = None;
    // row name -> (index, sign applied to coefficients and rhs)
    let mut rows: HashMap<String, (usize, f64)> = HashMap::new();
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut integer = false;
    let mut bounded: Vec<bool> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let err = |message: String| MpsError::Parse { line, message };
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match tokens[0] {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                other => return Err(err(format!("unknown section {other}"))),
            };
            continue;
        }
        let value = |s: &str| -> Result<f64, MpsError> {
            s.parse::<f64>()
                .map_err(|_| err(format!("invalid number {s}")))
        };
        match section {
            Section::Rows => {
                let [kind, name] = tokens[..] else {
                    return Err(err("expected row type and name".into()));
                };
                let (relation, sign) = match kind {
                    "N" => {
                        if obj_name.is_none() {
                            obj_name = Some(name.to_string());
                        }
                        continue;
                    }
                    "L" => (RowRelation::Le, 1.0),
                    "G" => (RowRelation::Le, -1.0),
                    "E" => (RowRelation::Eq, 1.0),
                    other => return Err(err(format!("unknown row type {other}"))),
                };
                rows.insert(name.to_string(), (p.rows.len(), sign));
                p.rows.push(MilpRow {
                    coeffs: Vec::new(),
                    relation,
                    rhs: 0.0,
                });
            }
            Section::Columns => {
                if tokens.len() >= 3 && tokens[1] == "'MARKER'" {
                    integer = match tokens[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        other => return Err(err(format!("unknown marker {other}"))),
                    };
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(err("expected column entries".into()));
                }
                let j = match cols.get(tokens[0]) {
                    Some(&j) => j,
                    None => {
                        let j = p.add_column(
                            ColumnLabel::Plain(tokens[0].to_string()),
                            0.0,
                            f64::INFINITY,
                            0.0,
                            integer,
                        );
                        cols.insert(tokens[0].to_string(), j);
                        bounded.push(false);
                        j
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let v = value(pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        p.objective[j] += v;
                    } else {
                        let &(i, sign) = rows
                            .get(pair[0])
                            .ok_or_else(|| err(format!("unknown row {}", pair[0])))?;
                        if v != 0.0 {
                            p.rows[i].coeffs.push((j, sign * v));
                        }
                    }
                }
            }
            Section::Rhs => {
                let pairs = if tokens.len() % 2 == 1 {
                    &tokens[1..]
                } else {
                    &tokens[..]
                };
                for pair in pairs.chunks(2) {
                    let v = value(pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        p.objective_constant = -v;
                    } else {
                        let &(i, sign) = rows
                            .get(pair[0])
                            .ok_or_else(|| err(format!("unknown row {}", pair[0])))?;
                        p.rows[i].rhs = sign * v;
                    }
                }
            }
            Section::Ranges => return Err(err("RANGES entries are not supported".into())),
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(err("expected bound type, set and column".into()));
                }
                let j = *cols
                    .get(tokens[2])
                    .ok_or_else(|| err(format!("unknown column {}", tokens[2])))?;
                let v = tokens.get(3).map(|s| value(s)).transpose()?;
                let need = || v.ok_or_else(|| err("bound value missing".into()));
                match tokens[0] {
                    "UP" => {
                        p.upper[j] = need()?;
                    }
                    "LO" => p.lower[j] = need()?,
                    "FX" => {
                        p.lower[j] = need()?;
                        p.upper[j] = need()?;
                    }
                    "FR" => {
                        p.lower[j] = f64::NEG_INFINITY;
                        p.upper[j] = f64::INFINITY;
                    }
                    "MI" => p.lower[j] = f64::NEG_INFINITY,
                    "PL" => p.upper[j] = f64::INFINITY,
                    "BV" => {
                        p.lower[j] = 0.0;
                        p.upper[j] = 1.0;
                        p.integer[j] = true;
                    }
                    "LI" => {
                        p.lower[j] = need()?;
                        p.integer[j] = true;
                    }
                    "UI" => {
                        p.upper[j] = need()?;
                        p.integer[j] = true;
                    }
                    other => return Err(err(format!("unknown bound type {other}"))),
                }
                bounded[j] = true;
            }
            Section::None => return Err(err("data outside of a section".into())),
        }
    }
    for row in &mut p.rows {
        *row = MilpRow::new(row.coeffs.drain(..), row.relation, row.rhs);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MilpProblem {
        let mut p = MilpProblem::new();
        let x = p.add_binary(ColumnLabel::Plain("x".into()), -1.0);
        let y = p.add_binary(ColumnLabel::Plain("y".into()), -1.0);
        p.add_row(MilpRow::new([(x, 1.0), (y, 1.0)], RowRelation::Le, 1.5));
        p
    }

    fn column_entries(text: &str) -> usize {
        let start = text.find("COLUMNS\n").unwrap() + 8;
        let end = text.find("RHS\n").unwrap();
        text[start..end]
            .lines()
            .filter(|l| !l.contains("'MARKER'"))
            .count()
    }

    #[test]
    fn toy_has_four_column_entries() {
        let text = to_mps_string(&toy(), "TOY").unwrap();
        assert_eq!(column_entries(&text), 4);
        assert!(text.contains(" BV BND       C0000001"));
    }

    #[test]
    fn empty_problem_is_parseable() {
        let text = to_mps_string(&MilpProblem::new(), "EMPTY").unwrap();
        for s in ["ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"] {
            assert!(text.contains(s));
        }
        let back = read_mps(&text).unwrap();
        assert_eq!(back.num_cols(), 0);
        assert_eq!(back.num_rows(), 0);
    }

    #[test]
    fn round_trip_preserves_values_bit_exactly() {
        let mut p = toy();
        p.add_column(ColumnLabel::Plain("z".into()), -2.5, 0.1 + 0.2, 1.0 / 3.0, false);
        p.add_column(ColumnLabel::Plain("w".into()), f64::NEG_INFINITY, -1e-300, 0.0, false);
        p.add_column(ColumnLabel::Plain("f".into()), f64::NEG_INFINITY, f64::INFINITY, 0.0, false);
        p.add_column(ColumnLabel::Plain("k".into()), 0.0, f64::INFINITY, 2.0, true);
        p.add_row(MilpRow::new([(2, 4000.0 * 1.77e-2), (3, 1.0)], RowRelation::Eq, -7.25));
        p.objective_constant = 12.5;
        let back = read_mps(&to_mps_string(&p, "RT").unwrap()).unwrap();
        assert_eq!(back.objective, p.objective);
        assert_eq!(back.objective_constant, p.objective_constant);
        assert_eq!(back.lower, p.lower);
        assert_eq!(back.upper, p.upper);
        assert_eq!(back.integer, p.integer);
        assert_eq!(back.rows, p.rows);
    }

    #[test]
    fn export_to_unwritable_destination_fails() {
        let err = export_mps(&toy(), "/nonexistent-dir/x.mps").unwrap_err();
        assert!(matches!(err, MpsError::Io(_)));
    }
}
