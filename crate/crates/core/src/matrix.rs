//! Single-typed dense matrices parsed straight from delimited text.

use memchr::memchr2_iter;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frame::field::{parse_complex, parse_int, parse_logical, parse_real, NA};
use crate::frame::parser::{trim_cr, Records};
use crate::frame::{same_f64, ColumnType, Frame};

/// Row-major matrix with optional row and column names.
#[derive(Debug, Clone)]
pub struct DenseMatrix<T = f64> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
    col_names: Option<Vec<String>>,
    row_names: Option<Vec<String>>,
}

impl<T> DenseMatrix<T> {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                found: data.len(),
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
            col_names: None,
            row_names: None,
        })
    }

    pub fn empty() -> Self {
        Self {
            n_rows: 0,
            n_cols: 0,
            data: Vec::new(),
            col_names: None,
            row_names: None,
        }
    }

    pub fn with_col_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: names.len(),
            });
        }
        self.col_names = Some(names);
        Ok(self)
    }

    pub fn with_row_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                found: names.len(),
            });
        }
        self.row_names = Some(names);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn col_names(&self) -> Option<&[String]> {
        self.col_names.as_deref()
    }

    pub fn row_names(&self) -> Option<&[String]> {
        self.row_names.as_deref()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        assert!(col < self.n_cols);
        &self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        (0..self.n_rows).map(move |r| self.row(r))
    }
}

impl<T: Clone> DenseMatrix<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_cols {
                return Err(Error::RaggedInput {
                    record: i,
                    expected: n_cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), n_cols, data)
    }

    pub fn column(&self, col: usize) -> Vec<T> {
        (0..self.n_rows).map(|r| self.get(r, col).clone()).collect()
    }

    /// Row-binds `other` below `self`. An empty 0×0 matrix adopts the shape
    /// of whatever is appended to it.
    pub fn append_rows(&mut self, other: &DenseMatrix<T>) -> Result<()> {
        if self.n_rows == 0 && self.n_cols == 0 {
            *self = other.clone();
            return Ok(());
        }
        if other.n_rows == 0 {
            return Ok(());
        }
        if other.n_cols != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: other.n_cols,
            });
        }
        self.data.extend_from_slice(&other.data);
        self.n_rows += other.n_rows;
        match (&mut self.row_names, &other.row_names) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            _ => self.row_names = None,
        }
        Ok(())
    }
}

impl<T: MatrixElement> PartialEq for DenseMatrix<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.col_names == other.col_names
            && self.row_names == other.row_names
            && self.data.iter().zip(&other.data).all(|(a, b)| a.same(b))
    }
}

/// An element type a [`DenseMatrix`] can be parsed into.
pub trait MatrixElement: Clone + Send + Sync + 'static {
    const TYPE: ColumnType;

    /// Parses a field; the `bool` is true for a coercion failure, which
    /// yields the type's missing value. `NA` yields missing without failure.
    fn parse(field: &[u8]) -> (Self, bool);

    /// Appends the text form, `NA` for missing.
    fn render(&self, out: &mut Vec<u8>);

    /// Equality that treats missing values (and NaN) as equal.
    fn same(&self, other: &Self) -> bool;
}

#[inline]
fn missing_or_failed(field: &[u8]) -> bool {
    field != NA
}

impl MatrixElement for f64 {
    const TYPE: ColumnType = ColumnType::Real;

    #[inline]
    fn parse(field: &[u8]) -> (Self, bool) {
        match parse_real(field) {
            Some(x) => (x, false),
            None => (f64::NAN, missing_or_failed(field)),
        }
    }

    fn render(&self, out: &mut Vec<u8>) {
        crate::writer::render_real(*self, out);
    }

    fn same(&self, other: &Self) -> bool {
        same_f64(*self, *other)
    }
}

impl MatrixElement for Option<i64> {
    const TYPE: ColumnType = ColumnType::Integer;

    fn parse(field: &[u8]) -> (Self, bool) {
        match parse_int(field) {
            Some(i) => (Some(i), false),
            None => (None, missing_or_failed(field)),
        }
    }

    fn render(&self, out: &mut Vec<u8>) {
        match self {
            Some(i) => out.extend_from_slice(i.to_string().as_bytes()),
            None => out.extend_from_slice(NA),
        }
    }

    fn same(&self, other: &Self) -> bool {
        self == other
    }
}

impl MatrixElement for Option<bool> {
    const TYPE: ColumnType = ColumnType::Logical;

    fn parse(field: &[u8]) -> (Self, bool) {
        match parse_logical(field) {
            Some(b) => (Some(b), false),
            None => (None, missing_or_failed(field)),
        }
    }

    fn render(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(match self {
            Some(true) => b"TRUE",
            Some(false) => b"FALSE",
            None => NA,
        });
    }

    fn same(&self, other: &Self) -> bool {
        self == other
    }
}

impl MatrixElement for Option<Vec<u8>> {
    const TYPE: ColumnType = ColumnType::Character;

    fn parse(field: &[u8]) -> (Self, bool) {
        if field == NA {
            (None, false)
        } else if field.is_empty() {
            (None, true)
        } else {
            (Some(field.to_vec()), false)
        }
    }

    fn render(&self, out: &mut Vec<u8>) {
        match self {
            Some(s) => out.extend_from_slice(s),
            None => out.extend_from_slice(NA),
        }
    }

    fn same(&self, other: &Self) -> bool {
        self == other
    }
}

impl MatrixElement for Complex64 {
    const TYPE: ColumnType = ColumnType::Complex;

    fn parse(field: &[u8]) -> (Self, bool) {
        match parse_complex(field) {
            Some(z) => (z, false),
            None => (Complex64::new(f64::NAN, f64::NAN), missing_or_failed(field)),
        }
    }

    fn render(&self, out: &mut Vec<u8>) {
        if self.re.is_nan() && self.im.is_nan() {
            out.extend_from_slice(NA);
        } else {
            crate::writer::render_complex(*self, out);
        }
    }

    fn same(&self, other: &Self) -> bool {
        same_f64(self.re, other.re) && same_f64(self.im, other.im)
    }
}

/// Text conventions for [`parse_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixOptions {
    pub field_sep: u8,
    /// Use each record's first field as its row name.
    pub row_names_col: bool,
    pub skip_lines: usize,
    pub strip_cr: bool,
    /// Turn any coercion failure into [`Error::Strict`].
    pub strict: bool,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        Self {
            field_sep: b',',
            row_names_col: false,
            skip_lines: 0,
            strip_cr: true,
            strict: false,
        }
    }
}

impl MatrixOptions {
    pub fn with_sep(mut self, sep: u8) -> Self {
        self.field_sep = sep;
        self
    }
}

/// A parsed matrix and its coercion-failure count.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixParsed<M> {
    pub matrix: M,
    pub failures: u64,
}

/// Matrix of any supported element type.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyMatrix {
    Logical(DenseMatrix<Option<bool>>),
    Integer(DenseMatrix<Option<i64>>),
    Real(DenseMatrix<f64>),
    Character(DenseMatrix<Option<Vec<u8>>>),
    Complex(DenseMatrix<Complex64>),
}

impl AnyMatrix {
    pub fn n_rows(&self) -> usize {
        match self {
            AnyMatrix::Logical(m) => m.n_rows(),
            AnyMatrix::Integer(m) => m.n_rows(),
            AnyMatrix::Real(m) => m.n_rows(),
            AnyMatrix::Character(m) => m.n_rows(),
            AnyMatrix::Complex(m) => m.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            AnyMatrix::Logical(m) => m.n_cols(),
            AnyMatrix::Integer(m) => m.n_cols(),
            AnyMatrix::Real(m) => m.n_cols(),
            AnyMatrix::Character(m) => m.n_cols(),
            AnyMatrix::Complex(m) => m.n_cols(),
        }
    }
}

/// Parses records into a matrix of `elem_type`.
///
/// Accepts logical, integer, real, character and complex element types.
pub fn parse_matrix(chunk: &[u8], elem_type: ColumnType, opts: &MatrixOptions) -> Result<MatrixParsed<AnyMatrix>> {
    fn wrap<T: MatrixElement>(
        p: MatrixParsed<DenseMatrix<T>>,
        f: impl FnOnce(DenseMatrix<T>) -> AnyMatrix,
    ) -> MatrixParsed<AnyMatrix> {
        MatrixParsed {
            matrix: f(p.matrix),
            failures: p.failures,
        }
    }
    Ok(match elem_type {
        ColumnType::Logical => wrap(parse_matrix_as(chunk, opts)?, AnyMatrix::Logical),
        ColumnType::Integer => wrap(parse_matrix_as(chunk, opts)?, AnyMatrix::Integer),
        ColumnType::Real => wrap(parse_matrix_as(chunk, opts)?, AnyMatrix::Real),
        ColumnType::Character => wrap(parse_matrix_as(chunk, opts)?, AnyMatrix::Character),
        ColumnType::Complex => wrap(parse_matrix_as(chunk, opts)?, AnyMatrix::Complex),
        other => {
            return Err(Error::Schema(format!("{other} is not a matrix element type")));
        }
    })
}

/// Typed form of [`parse_matrix`].
///
/// Every record must have the same number of fields; a mismatch is
/// [`Error::RaggedInput`]. Input with no records gives a 0×0 matrix.
pub fn parse_matrix_as<T: MatrixElement>(chunk: &[u8], opts: &MatrixOptions) -> Result<MatrixParsed<DenseMatrix<T>>> {
    let body = skip_records(chunk, opts.skip_lines);
    let mut data: Vec<T> = Vec::new();
    let mut row_names = Vec::new();
    let mut failures = 0u64;
    let mut width: Option<usize> = None;
    let mut n_rows = 0usize;
    let mut fields_in_record = 0usize;
    let mut start = 0usize;

    let mut take_field = |field: &[u8], index: usize, data: &mut Vec<T>, row_names: &mut Vec<String>| {
        if opts.row_names_col && index == 0 {
            row_names.push(String::from_utf8_lossy(field).into_owned());
        } else {
            let (v, failed) = T::parse(field);
            failures += u64::from(failed);
            data.push(v);
        }
    };
    let mut end_record = |found: usize, n_rows: &mut usize| -> Result<()> {
        let cols = found - usize::from(opts.row_names_col);
        let expected = *width.get_or_insert(cols);
        if cols != expected {
            return Err(Error::RaggedInput {
                record: *n_rows,
                expected: expected + usize::from(opts.row_names_col),
                found,
            });
        }
        *n_rows += 1;
        Ok(())
    };

    for p in memchr2_iter(opts.field_sep, b'\n', body) {
        if body[p] == b'\n' {
            let field = trim_cr(&body[start..p], opts.strip_cr);
            take_field(field, fields_in_record, &mut data, &mut row_names);
            end_record(fields_in_record + 1, &mut n_rows)?;
            fields_in_record = 0;
        } else {
            take_field(&body[start..p], fields_in_record, &mut data, &mut row_names);
            fields_in_record += 1;
        }
        start = p + 1;
    }
    if start < body.len() || fields_in_record > 0 {
        let field = trim_cr(&body[start..], opts.strip_cr);
        take_field(field, fields_in_record, &mut data, &mut row_names);
        end_record(fields_in_record + 1, &mut n_rows)?;
    }

    if opts.strict && failures > 0 {
        return Err(Error::Strict(format!("{failures} matrix fields failed to parse")));
    }
    let mut matrix = DenseMatrix::new(n_rows, width.unwrap_or(0), data)?;
    if opts.row_names_col && n_rows > 0 {
        matrix = matrix.with_row_names(row_names)?;
    }
    Ok(MatrixParsed { matrix, failures })
}

fn skip_records(chunk: &[u8], n: usize) -> &[u8] {
    if n == 0 {
        return chunk;
    }
    let mut records = Records::new(chunk);
    let mut consumed = 0;
    for line in records.by_ref().take(n) {
        consumed += line.len() + 1;
    }
    &chunk[consumed.min(chunk.len())..]
}

/// Column-binds the numeric columns of a frame into a real matrix. Nulls
/// become NaN; non-numeric columns are rejected.
pub fn frame_to_matrix(frame: &Frame) -> Result<DenseMatrix<f64>> {
    let cols = frame.columns();
    for c in cols {
        if !matches!(
            c.column_type(),
            ColumnType::Real | ColumnType::Integer | ColumnType::Logical | ColumnType::Timestamp
        ) {
            return Err(Error::Schema(format!("column {:?} is not numeric", c.name)));
        }
    }
    let mut data = Vec::with_capacity(frame.n_rows() * cols.len());
    for r in 0..frame.n_rows() {
        data.extend(cols.iter().map(|c| c.get_f64(r).unwrap_or(f64::NAN)));
    }
    DenseMatrix::new(frame.n_rows(), cols.len(), data)?.with_col_names(frame.names())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(chunk: &[u8], opts: &MatrixOptions) -> Result<MatrixParsed<DenseMatrix<f64>>> {
        parse_matrix_as::<f64>(chunk, opts)
    }

    #[test]
    fn two_by_two() {
        let p = real(b"1,2\n3,4\n", &MatrixOptions::default()).unwrap();
        assert_eq!(p.matrix, DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        assert_eq!(p.failures, 0);
    }

    #[test]
    fn row_names_column() {
        let opts = MatrixOptions {
            row_names_col: true,
            ..MatrixOptions::default()
        };
        let p = real(b"r1,5\n", &opts).unwrap();
        assert_eq!((p.matrix.n_rows(), p.matrix.n_cols()), (1, 1));
        assert_eq!(p.matrix.data(), &[5.0]);
        assert_eq!(p.matrix.row_names().unwrap(), &["r1".to_string()]);
    }

    #[test]
    fn ragged_is_error() {
        let err = real(b"1,2\n3\n", &MatrixOptions::default()).unwrap_err();
        assert!(matches!(err, Error::RaggedInput { record: 1, expected: 2, found: 1 }));
    }

    #[test]
    fn empty_input() {
        let p = real(b"", &MatrixOptions::default()).unwrap();
        assert_eq!((p.matrix.n_rows(), p.matrix.n_cols()), (0, 0));
    }

    #[test]
    fn failures_become_nan() {
        let p = real(b"1,x\nNA,\r\n", &MatrixOptions::default()).unwrap();
        let d = p.matrix.data();
        assert_eq!(d[0], 1.0);
        assert!(d[1].is_nan() && d[2].is_nan() && d[3].is_nan());
        assert_eq!(p.failures, 2);
        let strict = MatrixOptions {
            strict: true,
            ..MatrixOptions::default()
        };
        assert!(matches!(real(b"1,x\n", &strict), Err(Error::Strict(_))));
    }

    #[test]
    fn skip_and_no_final_newline() {
        let opts = MatrixOptions {
            skip_lines: 1,
            ..MatrixOptions::default()
        };
        let p = real(b"a,b\n1,2\n3,4", &opts).unwrap();
        assert_eq!(p.matrix.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn other_element_types() {
        let o = MatrixOptions::default();
        let p = parse_matrix(b"1,NA\n", ColumnType::Integer, &o).unwrap();
        assert_eq!(p.matrix, AnyMatrix::Integer(DenseMatrix::from_rows(&[vec![Some(1), None]]).unwrap()));
        let p = parse_matrix(b"T,FALSE\n", ColumnType::Logical, &o).unwrap();
        assert_eq!(p.matrix, AnyMatrix::Logical(DenseMatrix::from_rows(&[vec![Some(true), Some(false)]]).unwrap()));
        let p = parse_matrix(b"1+1i\n", ColumnType::Complex, &o).unwrap();
        assert_eq!(p.matrix, AnyMatrix::Complex(DenseMatrix::from_rows(&[vec![Complex64::new(1.0, 1.0)]]).unwrap()));
        let p = parse_matrix(b"ab,cd\n", ColumnType::Character, &o).unwrap();
        assert_eq!(p.matrix.n_cols(), 2);
        assert!(parse_matrix(b"1\n", ColumnType::Timestamp, &o).is_err());
    }

    #[test]
    fn append_rows_and_names() {
        let mut a = DenseMatrix::<f64>::empty();
        a.append_rows(&DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        a.append_rows(&DenseMatrix::from_rows(&[vec![3.0, 4.0]]).unwrap()).unwrap();
        assert_eq!(a.n_rows(), 2);
        assert!(a.append_rows(&DenseMatrix::from_rows(&[vec![1.0]]).unwrap()).is_err());
        assert!(a.clone().with_col_names(["x"]).is_err());
        assert_eq!(a.with_col_names(["x", "y"]).unwrap().col_names().unwrap().len(), 2);
    }
}
