//! Regression design matrices from frames.
//!
//! The output layout is `(Intercept)`, the response, then each term in the
//! order given. Factors use treatment contrasts: the first listed level is
//! the baseline and every other level gets an indicator column named
//! `column` + `level`.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::frame::{Column, ColumnData, Frame, NullMask};
use crate::matrix::DenseMatrix;

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Numeric(String),
    Factor { column: String, levels: Vec<String> },
}

impl Term {
    pub fn numeric(column: impl Into<String>) -> Self {
        Term::Numeric(column.into())
    }

    pub fn factor<S: Into<String>>(column: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Term::Factor {
            column: column.into(),
            levels: levels.into_iter().map(Into::into).collect(),
        }
    }

    pub fn column(&self) -> &str {
        match self {
            Term::Numeric(c) | Term::Factor { column: c, .. } => c,
        }
    }

    fn width(&self) -> usize {
        match self {
            Term::Numeric(_) => 1,
            Term::Factor { levels, .. } => levels.len() - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermSpec {
    pub response: String,
    pub terms: Vec<Term>,
    pub intercept: bool,
}

impl TermSpec {
    pub fn new(response: impl Into<String>, terms: Vec<Term>) -> Self {
        Self {
            response: response.into(),
            terms,
            intercept: true,
        }
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    /// Output column names in matrix order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_cols());
        if self.intercept {
            names.push(INTERCEPT.to_owned());
        }
        names.push(self.response.clone());
        for t in &self.terms {
            match t {
                Term::Numeric(c) => names.push(c.clone()),
                Term::Factor { column, levels } => {
                    names.extend(levels[1..].iter().map(|l| format!("{column}{l}")));
                }
            }
        }
        names
    }

    pub fn n_cols(&self) -> usize {
        usize::from(self.intercept) + 1 + self.terms.iter().map(Term::width).sum::<usize>()
    }

    fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if let Term::Factor { column, levels } = t {
                if levels.is_empty() {
                    return Err(Error::Config(format!("factor {column:?} has no levels")));
                }
                let mut seen = HashSet::new();
                for l in levels {
                    if l.is_empty() {
                        return Err(Error::Config(format!("factor {column:?} has an empty level")));
                    }
                    if !seen.insert(l.as_str()) {
                        return Err(Error::Config(format!("factor {column:?} repeats level {l:?}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Converts an `HHMM` clock reading to minutes after midnight.
///
/// ```
/// assert_eq!(chunkio::normalize_hhmm(Some(130)).unwrap(), Some(90));
/// ```
pub fn normalize_hhmm(value: Option<i64>) -> Result<Option<i64>> {
    match value {
        None => Ok(None),
        Some(v) if !(0..=9999).contains(&v) => Err(Error::OutOfRange(v)),
        Some(v) => Ok(Some(v / 100 * 60 + v % 100)),
    }
}

/// Rewrites an Integer column in place with [`normalize_hhmm`].
pub fn normalize_hhmm_column(frame: &mut Frame, name: &str) -> Result<()> {
    let idx = frame.column_index(name).ok_or_else(|| Error::MissingColumn(name.to_owned()))?;
    let col = &frame.columns()[idx];
    let ColumnData::Integer(values) = &col.data else {
        return Err(Error::Schema(format!(
            "clock column {name:?} must be integer, found {}",
            col.column_type()
        )));
    };
    let mut out = Vec::with_capacity(values.len());
    for (r, &v) in values.iter().enumerate() {
        let cell = if col.is_null(r) { None } else { Some(v) };
        out.push(normalize_hhmm(cell)?.unwrap_or(0));
    }
    let replaced = Column::new(name, ColumnData::Integer(out), col.nulls.clone())?;
    frame.replace_column(idx, replaced)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expanded {
    pub matrix: DenseMatrix<f64>,
    /// Rows removed because a used column was null.
    pub dropped_rows: usize,
    /// Rows removed in lenient mode because a factor value was not a level.
    pub unknown_level_rows: usize,
}

enum Source<'a> {
    Numeric(&'a Column),
    /// Per-row indicator position; `None` marks the baseline, `Some(usize::MAX)` an unknown level.
    Factor { codes: Vec<Option<usize>>, width: usize },
}

const UNKNOWN: usize = usize::MAX;

fn numeric_column<'a>(frame: &'a Frame, name: &str) -> Result<&'a Column> {
    let col = frame.column(name).ok_or_else(|| Error::MissingColumn(name.to_owned()))?;
    match col.data {
        ColumnData::Logical(_) | ColumnData::Integer(_) | ColumnData::Real(_) | ColumnData::Timestamp(_) => Ok(col),
        _ => Err(Error::Schema(format!(
            "column {name:?} of type {} cannot enter a model matrix as a number",
            col.column_type()
        ))),
    }
}

fn factor_codes(col: &Column, levels: &[String]) -> Result<Vec<Option<usize>>> {
    let index: HashMap<&[u8], usize> = levels.iter().enumerate().map(|(i, l)| (l.as_bytes(), i)).collect();
    let code = |key: &[u8]| match index.get(key) {
        Some(0) => None,
        Some(&i) => Some(i - 1),
        None => Some(UNKNOWN),
    };
    let n = col.len();
    let mut buf = Vec::new();
    match &col.data {
        ColumnData::Character(s) => Ok((0..n).map(|r| code(s.get(r))).collect()),
        ColumnData::Integer(v) => Ok(v
            .iter()
            .map(|x| {
                buf.clear();
                buf.extend_from_slice(x.to_string().as_bytes());
                code(&buf)
            })
            .collect()),
        _ => Err(Error::Schema(format!(
            "factor column {:?} must be integer or character, found {}",
            col.name,
            col.column_type()
        ))),
    }
}

fn cell_text(col: &Column, row: usize) -> String {
    match &col.data {
        ColumnData::Character(s) => String::from_utf8_lossy(s.get(row)).into_owned(),
        ColumnData::Integer(v) => v[row].to_string(),
        _ => String::new(),
    }
}

/// Expands `frame` into a design matrix described by `spec`.
///
/// Rows with a null in any used column are dropped. A factor value outside
/// its levels fails with [`Error::UnknownLevel`] unless `lenient` is set,
/// in which case the row is dropped and counted separately.
pub fn expand(frame: &Frame, spec: &TermSpec, lenient: bool) -> Result<Expanded> {
    spec.validate()?;
    let response = numeric_column(frame, &spec.response)?;
    let mut sources = Vec::with_capacity(spec.terms.len());
    let mut used: Vec<&NullMask> = vec![&response.nulls];
    let mut factor_cols: Vec<&Column> = Vec::new();
    for t in &spec.terms {
        match t {
            Term::Numeric(c) => {
                let col = numeric_column(frame, c)?;
                used.push(&col.nulls);
                sources.push(Source::Numeric(col));
            }
            Term::Factor { column, levels } => {
                let col = frame.column(column).ok_or_else(|| Error::MissingColumn(column.clone()))?;
                used.push(&col.nulls);
                factor_cols.push(col);
                sources.push(Source::Factor {
                    codes: factor_codes(col, levels)?,
                    width: levels.len() - 1,
                });
            }
        }
    }

    let d = spec.n_cols();
    let mut data = Vec::with_capacity(frame.n_rows() * d);
    let mut dropped_rows = 0;
    let mut unknown_level_rows = 0;
    'rows: for r in 0..frame.n_rows() {
        if used.iter().any(|m| m.is_null(r)) {
            dropped_rows += 1;
            continue;
        }
        let mut fi = 0;
        for s in &sources {
            if let Source::Factor { codes, .. } = s {
                if codes[r] == Some(UNKNOWN) {
                    if lenient {
                        unknown_level_rows += 1;
                        continue 'rows;
                    }
                    let col = factor_cols[fi];
                    return Err(Error::UnknownLevel {
                        column: col.name.clone(),
                        value: cell_text(col, r),
                    });
                }
                fi += 1;
            }
        }
        if spec.intercept {
            data.push(1.0);
        }
        data.push(response.get_f64(r).unwrap());
        for s in &sources {
            match s {
                Source::Numeric(col) => data.push(col.get_f64(r).unwrap()),
                Source::Factor { codes, width } => {
                    let start = data.len();
                    data.resize(start + width, 0.0);
                    if let Some(k) = codes[r] {
                        data[start + k] = 1.0;
                    }
                }
            }
        }
    }
    let n = data.len() / d;
    let matrix = DenseMatrix::new(n, d, data)?.with_col_names(spec.column_names())?;
    Ok(Expanded {
        matrix,
        dropped_rows,
        unknown_level_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::ByteStrings;

    fn toy() -> Frame {
        Frame::new(vec![
            Column::dense("y", ColumnData::Integer(vec![1, 2])),
            Column::dense("g", ColumnData::Character(["a", "b"].iter().collect::<ByteStrings>())),
        ])
        .unwrap()
    }

    #[test]
    fn clock_values() {
        assert_eq!(normalize_hhmm(Some(130)).unwrap(), Some(90));
        assert_eq!(normalize_hhmm(Some(0)).unwrap(), Some(0));
        assert_eq!(normalize_hhmm(Some(2359)).unwrap(), Some(1439));
        assert_eq!(normalize_hhmm(Some(2400)).unwrap(), Some(1440));
        assert_eq!(normalize_hhmm(None).unwrap(), None);
        assert!(matches!(normalize_hhmm(Some(-1)), Err(Error::OutOfRange(-1))));
        assert!(matches!(normalize_hhmm(Some(10000)), Err(Error::OutOfRange(10000))));
    }

    #[test]
    fn treatment_contrast() {
        let spec = TermSpec::new("y", vec![Term::factor("g", ["a", "b"])]);
        let e = expand(&toy(), &spec, false).unwrap();
        assert_eq!(e.matrix.col_names().unwrap(), ["(Intercept)", "y", "gb"]);
        assert_eq!(e.matrix.data(), [1.0, 1.0, 0.0, 1.0, 2.0, 1.0]);
        assert_eq!(e.dropped_rows, 0);
    }

    #[test]
    fn integer_factor_names() {
        let f = Frame::new(vec![
            Column::dense("ArrDelay", ColumnData::Integer(vec![3, 4, 5])),
            Column::dense("DayOfWeek", ColumnData::Integer(vec![1, 7, 3])),
        ])
        .unwrap();
        let spec = TermSpec::new("ArrDelay", vec![Term::factor("DayOfWeek", (1..=7).map(|d| d.to_string()))]);
        let e = expand(&f, &spec, false).unwrap();
        let names = e.matrix.col_names().unwrap();
        assert_eq!(&names[2..], ["DayOfWeek2", "DayOfWeek3", "DayOfWeek4", "DayOfWeek5", "DayOfWeek6", "DayOfWeek7"]);
        assert_eq!(e.matrix.row(1)[2..], [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(e.matrix.row(2)[2..], [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn nulls_drop_rows() {
        let f = Frame::new(vec![
            Column::new("y", ColumnData::Real(vec![1.0, 0.0, 3.0]), NullMask::from_bools([false, true, false])).unwrap(),
            Column::dense("x", ColumnData::Real(vec![1.0, 2.0, 3.0])),
        ])
        .unwrap();
        let e = expand(&f, &TermSpec::new("y", vec![Term::numeric("x")]), false).unwrap();
        assert_eq!(e.matrix.n_rows(), 2);
        assert_eq!(e.dropped_rows, 1);
    }

    #[test]
    fn unknown_levels() {
        let spec = TermSpec::new("y", vec![Term::factor("g", ["a", "c"])]);
        assert!(matches!(expand(&toy(), &spec, false), Err(Error::UnknownLevel { .. })));
        let e = expand(&toy(), &spec, true).unwrap();
        assert_eq!(e.matrix.n_rows(), 1);
        assert_eq!(e.unknown_level_rows, 1);
    }

    #[test]
    fn missing_column_and_bad_levels() {
        let spec = TermSpec::new("y", vec![Term::numeric("nope")]);
        assert!(matches!(expand(&toy(), &spec, false), Err(Error::MissingColumn(_))));
        let spec = TermSpec::new("y", vec![Term::factor("g", ["a", "a"])]);
        assert!(expand(&toy(), &spec, false).is_err());
    }

    #[test]
    fn no_intercept() {
        let spec = TermSpec::new("y", vec![Term::factor("g", ["a", "b"])]).without_intercept();
        let e = expand(&toy(), &spec, false).unwrap();
        assert_eq!(e.matrix.col_names().unwrap(), ["y", "gb"]);
    }

    #[test]
    fn clock_column_rewrite() {
        let mut f = Frame::new(vec![Column::new(
            "DepTime",
            ColumnData::Integer(vec![130, 0, 2359]),
            NullMask::from_bools([false, true, false]),
        )
        .unwrap()])
        .unwrap();
        normalize_hhmm_column(&mut f, "DepTime").unwrap();
        let c = f.column("DepTime").unwrap();
        assert_eq!(c.get_f64(0), Some(90.0));
        assert!(c.is_null(1));
        assert_eq!(c.get_f64(2), Some(1439.0));
    }
}
