//! Typed columnar frames and the delimited-text parser that builds them.

pub(crate) mod field;
pub(crate) mod parser;

use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use field::{parse_field, Value};
pub use field::{civil_to_epoch, epoch_to_civil};
pub use parser::{
    infer_schema, parse_frame, parse_frame_with_header, split_record, FieldSplitter, Parsed,
    ParseStats,
};

/// Element type of one input column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnType {
    Logical,
    Integer,
    Real,
    Character,
    /// Hex-encoded byte strings.
    Bytes,
    Complex,
    /// Epoch seconds, UTC.
    Timestamp,
    /// Consumes a field, produces no column.
    Skip,
}

impl ColumnType {
    /// Single-letter code used on the command line.
    pub fn code(self) -> char {
        match self {
            ColumnType::Logical => 'l',
            ColumnType::Integer => 'i',
            ColumnType::Real => 'r',
            ColumnType::Character => 'c',
            ColumnType::Bytes => 'b',
            ColumnType::Complex => 'x',
            ColumnType::Timestamp => 't',
            ColumnType::Skip => 's',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Some(match code.trim() {
            "l" => ColumnType::Logical,
            "i" => ColumnType::Integer,
            "r" => ColumnType::Real,
            "c" => ColumnType::Character,
            "b" => ColumnType::Bytes,
            "x" => ColumnType::Complex,
            "t" => ColumnType::Timestamp,
            "s" => ColumnType::Skip,
            _ => return None,
        })
    }

    /// Parses a comma-separated list of codes such as `i,r,c`.
    pub fn parse_list(codes: &str) -> Result<Vec<Self>> {
        codes
            .split(',')
            .map(|c| {
                Self::from_code(c)
                    .ok_or_else(|| Error::Schema(format!("unknown column type code {c:?}")))
            })
            .collect()
    }

    pub fn format_list(types: &[Self]) -> String {
        let codes: Vec<String> = types.iter().map(|t| t.code().to_string()).collect();
        codes.join(",")
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ColumnType::Logical => "logical",
            ColumnType::Integer => "integer",
            ColumnType::Real => "real",
            ColumnType::Character => "character",
            ColumnType::Bytes => "bytes",
            ColumnType::Complex => "complex",
            ColumnType::Timestamp => "timestamp",
            ColumnType::Skip => "skip",
        };
        f.write_str(name)
    }
}

/// Column types plus the text conventions needed to parse them.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    types: Vec<ColumnType>,
    names: Option<Vec<String>>,
    pub field_sep: u8,
    /// Drop a trailing `\r` from every record.
    pub strip_cr: bool,
    /// Quote byte, off by default.
    pub quote: Option<u8>,
}

impl Schema {
    pub fn new(types: Vec<ColumnType>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::Schema("schema declares no columns".into()));
        }
        Ok(Self {
            types,
            names: None,
            field_sep: b',',
            strip_cr: true,
            quote: None,
        })
    }

    pub fn with_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let outputs = self.output_count();
        if names.len() != outputs {
            return Err(Error::Schema(format!(
                "{} names for {} non-skip columns",
                names.len(),
                outputs
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Schema(format!("duplicate column name {dup:?}")));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn with_sep(mut self, sep: u8) -> Self {
        self.field_sep = sep;
        self
    }

    pub fn with_quote(mut self, quote: Option<u8>) -> Self {
        self.quote = quote;
        self
    }

    pub fn with_strip_cr(mut self, strip: bool) -> Self {
        self.strip_cr = strip;
        self
    }

    pub fn types(&self) -> &[ColumnType] {
        &self.types
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Number of columns a parse produces (non-skip entries).
    pub fn output_count(&self) -> usize {
        self.types.iter().filter(|t| **t != ColumnType::Skip).count()
    }

    /// Output column names, defaulting to `V1`, `V2`, ... by input position.
    pub fn output_names(&self) -> Vec<String> {
        match &self.names {
            Some(names) => names.clone(),
            None => self
                .types
                .iter()
                .enumerate()
                .filter(|(_, t)| **t != ColumnType::Skip)
                .map(|(i, _)| format!("V{}", i + 1))
                .collect(),
        }
    }
}

/// Growable bitmap marking null rows.
#[derive(Debug, Clone, Default)]
pub struct NullMask {
    words: Vec<u64>,
    len: usize,
    nulls: usize,
}

impl NullMask {
    pub fn with_capacity(rows: usize) -> Self {
        Self {
            words: Vec::with_capacity(rows.div_ceil(64)),
            len: 0,
            nulls: 0,
        }
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut mask = Self::default();
        for b in bits {
            mask.push(b);
        }
        mask
    }

    #[inline]
    pub fn push(&mut self, is_null: bool) {
        let bit = self.len % 64;
        if bit == 0 {
            self.words.push(0);
        }
        if is_null {
            *self.words.last_mut().unwrap() |= 1 << bit;
            self.nulls += 1;
        }
        self.len += 1;
    }

    #[inline]
    pub fn is_null(&self, row: usize) -> bool {
        assert!(row < self.len, "row {row} out of bounds ({})", self.len);
        self.words[row / 64] >> (row % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn null_count(&self) -> usize {
        self.nulls
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.is_null(i))
    }

    pub fn extend_from(&mut self, other: &NullMask) {
        for b in other.iter() {
            self.push(b);
        }
    }
}

impl PartialEq for NullMask {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.words == other.words
    }
}

/// Variable-length byte strings packed into one buffer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ByteStrings {
    offsets: Vec<usize>,
    bytes: Vec<u8>,
}

impl ByteStrings {
    pub fn with_capacity(rows: usize, bytes: usize) -> Self {
        let mut offsets = Vec::with_capacity(rows + 1);
        offsets.push(0);
        Self {
            offsets,
            bytes: Vec::with_capacity(bytes),
        }
    }

    #[inline]
    pub fn push(&mut self, value: &[u8]) {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.bytes.extend_from_slice(value);
        self.offsets.push(self.bytes.len());
    }

    /// Appends a value produced by `fill`, which writes into the shared buffer.
    #[inline]
    pub(crate) fn push_with(&mut self, fill: impl FnOnce(&mut Vec<u8>) -> bool) -> bool {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        let start = self.bytes.len();
        let ok = fill(&mut self.bytes);
        if !ok {
            self.bytes.truncate(start);
        }
        self.offsets.push(self.bytes.len());
        ok
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[u8] {
        &self.bytes[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn extend_from(&mut self, other: &ByteStrings) {
        for v in other.iter() {
            self.push(v);
        }
    }
}

impl<A: AsRef<[u8]>> FromIterator<A> for ByteStrings {
    fn from_iter<T: IntoIterator<Item = A>>(iter: T) -> Self {
        let mut out = ByteStrings::default();
        for v in iter {
            out.push(v.as_ref());
        }
        out
    }
}

/// Storage for one column. Slots under a null keep a placeholder value.
#[derive(Debug, Clone)]
pub enum ColumnData {
    Logical(Vec<bool>),
    Integer(Vec<i64>),
    Real(Vec<f64>),
    Character(ByteStrings),
    Bytes(ByteStrings),
    Complex(Vec<Complex64>),
    Timestamp(Vec<f64>),
}

impl ColumnData {
    pub fn empty(ty: ColumnType, capacity: usize) -> Option<Self> {
        Some(match ty {
            ColumnType::Logical => ColumnData::Logical(Vec::with_capacity(capacity)),
            ColumnType::Integer => ColumnData::Integer(Vec::with_capacity(capacity)),
            ColumnType::Real => ColumnData::Real(Vec::with_capacity(capacity)),
            ColumnType::Character => ColumnData::Character(ByteStrings::with_capacity(capacity, capacity * 8)),
            ColumnType::Bytes => ColumnData::Bytes(ByteStrings::with_capacity(capacity, capacity * 4)),
            ColumnType::Complex => ColumnData::Complex(Vec::with_capacity(capacity)),
            ColumnType::Timestamp => ColumnData::Timestamp(Vec::with_capacity(capacity)),
            ColumnType::Skip => return None,
        })
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            ColumnData::Logical(_) => ColumnType::Logical,
            ColumnData::Integer(_) => ColumnType::Integer,
            ColumnData::Real(_) => ColumnType::Real,
            ColumnData::Character(_) => ColumnType::Character,
            ColumnData::Bytes(_) => ColumnType::Bytes,
            ColumnData::Complex(_) => ColumnType::Complex,
            ColumnData::Timestamp(_) => ColumnType::Timestamp,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Logical(v) => v.len(),
            ColumnData::Integer(v) => v.len(),
            ColumnData::Real(v) | ColumnData::Timestamp(v) => v.len(),
            ColumnData::Character(v) | ColumnData::Bytes(v) => v.len(),
            ColumnData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends the placeholder stored under a null.
    pub(crate) fn push_null(&mut self) {
        match self {
            ColumnData::Logical(v) => v.push(false),
            ColumnData::Integer(v) => v.push(0),
            ColumnData::Real(v) | ColumnData::Timestamp(v) => v.push(f64::NAN),
            ColumnData::Character(v) | ColumnData::Bytes(v) => v.push(b""),
            ColumnData::Complex(v) => v.push(Complex64::new(f64::NAN, f64::NAN)),
        }
    }

    fn extend_from(&mut self, other: &ColumnData) -> bool {
        match (self, other) {
            (ColumnData::Logical(a), ColumnData::Logical(b)) => a.extend_from_slice(b),
            (ColumnData::Integer(a), ColumnData::Integer(b)) => a.extend_from_slice(b),
            (ColumnData::Real(a), ColumnData::Real(b)) => a.extend_from_slice(b),
            (ColumnData::Timestamp(a), ColumnData::Timestamp(b)) => a.extend_from_slice(b),
            (ColumnData::Character(a), ColumnData::Character(b)) => a.extend_from(b),
            (ColumnData::Bytes(a), ColumnData::Bytes(b)) => a.extend_from(b),
            (ColumnData::Complex(a), ColumnData::Complex(b)) => a.extend_from_slice(b),
            _ => return false,
        }
        true
    }
}

/// Bitwise float equality, treating every NaN as equal to every other NaN.
#[inline]
pub fn same_f64(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
    pub nulls: NullMask,
}

impl Column {
    pub fn new(name: impl Into<String>, data: ColumnData, nulls: NullMask) -> Result<Self> {
        if data.len() != nulls.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                found: nulls.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            data,
            nulls,
        })
    }

    /// Column without nulls.
    pub fn dense(name: impl Into<String>, data: ColumnData) -> Self {
        let nulls = NullMask::from_bools(std::iter::repeat_n(false, data.len()));
        Self {
            name: name.into(),
            data,
            nulls,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn column_type(&self) -> ColumnType {
        self.data.column_type()
    }

    pub fn is_null(&self, row: usize) -> bool {
        self.nulls.is_null(row)
    }

    /// Numeric view of a row, `None` for null or non-numeric columns.
    pub fn get_f64(&self, row: usize) -> Option<f64> {
        if self.is_null(row) {
            return None;
        }
        match &self.data {
            ColumnData::Logical(v) => Some(if v[row] { 1.0 } else { 0.0 }),
            ColumnData::Integer(v) => Some(v[row] as f64),
            ColumnData::Real(v) | ColumnData::Timestamp(v) => Some(v[row]),
            _ => None,
        }
    }
}

impl PartialEq for Column {
    /// Names, types and null masks must match; values are compared only
    /// where not null.
    fn eq(&self, other: &Self) -> bool {
        if self.name != other.name || self.nulls != other.nulls || self.len() != other.len() {
            return false;
        }
        let live = |i: &usize| !self.nulls.is_null(*i);
        let rows = 0..self.len();
        match (&self.data, &other.data) {
            (ColumnData::Logical(a), ColumnData::Logical(b)) => rows.filter(live).all(|i| a[i] == b[i]),
            (ColumnData::Integer(a), ColumnData::Integer(b)) => rows.filter(live).all(|i| a[i] == b[i]),
            (ColumnData::Real(a), ColumnData::Real(b))
            | (ColumnData::Timestamp(a), ColumnData::Timestamp(b)) => {
                rows.filter(live).all(|i| same_f64(a[i], b[i]))
            }
            (ColumnData::Character(a), ColumnData::Character(b))
            | (ColumnData::Bytes(a), ColumnData::Bytes(b)) => rows.filter(live).all(|i| a.get(i) == b.get(i)),
            (ColumnData::Complex(a), ColumnData::Complex(b)) => rows
                .filter(live)
                .all(|i| same_f64(a[i].re, b[i].re) && same_f64(a[i].im, b[i].im)),
            _ => false,
        }
    }
}

/// Columnar table: every column has `n_rows` entries and a null mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    n_rows: usize,
    columns: Vec<Column>,
}

impl Frame {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        for c in &columns {
            if c.len() != n_rows || c.nulls.len() != n_rows {
                return Err(Error::DimensionMismatch {
                    expected: n_rows,
                    found: c.len(),
                });
            }
        }
        Ok(Self { n_rows, columns })
    }

    /// Zero-row frame with the schema's output columns.
    pub fn empty(schema: &Schema) -> Self {
        let columns = schema
            .types()
            .iter()
            .filter_map(|t| ColumnData::empty(*t, 0))
            .zip(schema.output_names())
            .map(|(data, name)| Column::dense(name, data))
            .collect();
        Self { n_rows: 0, columns }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn columns_mut(&mut self) -> &mut [Column] {
        &mut self.columns
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn types(&self) -> Vec<ColumnType> {
        self.columns.iter().map(Column::column_type).collect()
    }

    /// Replaces a column in place; the replacement must have the same length.
    pub fn replace_column(&mut self, index: usize, column: Column) -> Result<()> {
        if column.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                found: column.len(),
            });
        }
        self.columns[index] = column;
        Ok(())
    }

    /// Appends the rows of `other`, which must have the same names and types.
    pub fn append(&mut self, other: &Frame) -> Result<()> {
        if self.names() != other.names() || self.types() != other.types() {
            return Err(Error::Schema("cannot append frames with different columns".into()));
        }
        for (a, b) in self.columns.iter_mut().zip(&other.columns) {
            a.data.extend_from(&b.data);
            a.nulls.extend_from(&b.nulls);
        }
        self.n_rows += other.n_rows;
        Ok(())
    }

    /// Row-binds frames in order.
    pub fn concat<'a>(frames: impl IntoIterator<Item = &'a Frame>) -> Result<Option<Frame>> {
        let mut iter = frames.into_iter();
        let Some(first) = iter.next() else {
            return Ok(None);
        };
        let mut out = first.clone();
        for f in iter {
            out.append(f)?;
        }
        Ok(Some(out))
    }
}
