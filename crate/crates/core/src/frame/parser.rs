use std::collections::HashSet;

use memchr::{memchr, memchr2, memchr_iter};

use super::field::{coerce, decode_hex_into, parse_int, parse_logical, parse_real, Coerced};
use super::{Column, ColumnData, ColumnType, Frame, NullMask, Schema};
use crate::error::{Error, Result};

/// Iterates newline-terminated records. A trailing newline does not start
/// an extra record.
pub(crate) struct Records<'a> {
    rest: &'a [u8],
}

impl<'a> Records<'a> {
    pub(crate) fn new(chunk: &'a [u8]) -> Self {
        Self { rest: chunk }
    }
}

impl<'a> Iterator for Records<'a> {
    type Item = &'a [u8];

    #[inline]
    fn next(&mut self) -> Option<&'a [u8]> {
        if self.rest.is_empty() {
            return None;
        }
        match memchr(b'\n', self.rest) {
            Some(p) => {
                let line = &self.rest[..p];
                self.rest = &self.rest[p + 1..];
                Some(line)
            }
            None => Some(std::mem::take(&mut self.rest)),
        }
    }
}

#[inline]
pub(crate) fn trim_cr(line: &[u8], strip_cr: bool) -> &[u8] {
    match line.split_last() {
        Some((b'\r', head)) if strip_cr => head,
        _ => line,
    }
}

/// Splits records into fields with bulk separator scans.
///
/// With a quote byte configured, a quote toggles a region in which the field
/// separator is literal, and a doubled quote inside that region is a literal
/// quote. Lines without any quote byte take the plain scan.
#[derive(Debug, Clone)]
pub struct FieldSplitter {
    sep: u8,
    quote: Option<u8>,
    scratch: Vec<u8>,
}

impl FieldSplitter {
    pub fn new(sep: u8, quote: Option<u8>) -> Self {
        Self {
            sep,
            quote,
            scratch: Vec::new(),
        }
    }

    /// Calls `f(index, field, quoted)` for every field of `line` and returns
    /// the field count.
    #[inline]
    pub fn for_each<F>(&mut self, line: &[u8], mut f: F) -> usize
    where
        F: FnMut(usize, &[u8], bool),
    {
        match self.quote {
            Some(q) if memchr(q, line).is_some() => self.split_quoted(line, q, f),
            _ => {
                let mut start = 0;
                let mut idx = 0;
                for p in memchr_iter(self.sep, line) {
                    f(idx, &line[start..p], false);
                    idx += 1;
                    start = p + 1;
                }
                f(idx, &line[start..], false);
                idx + 1
            }
        }
    }

    fn split_quoted<F>(&mut self, line: &[u8], q: u8, mut f: F) -> usize
    where
        F: FnMut(usize, &[u8], bool),
    {
        let sep = self.sep;
        let mut pos = 0;
        let mut idx = 0;
        loop {
            self.scratch.clear();
            let mut quoted = false;
            let mut inside = false;
            let last = loop {
                if inside {
                    match memchr(q, &line[pos..]) {
                        Some(o) => {
                            let at = pos + o;
                            self.scratch.extend_from_slice(&line[pos..at]);
                            if line.get(at + 1) == Some(&q) {
                                self.scratch.push(q);
                                pos = at + 2;
                            } else {
                                inside = false;
                                pos = at + 1;
                            }
                        }
                        None => {
                            self.scratch.extend_from_slice(&line[pos..]);
                            pos = line.len();
                            break true;
                        }
                    }
                } else {
                    match memchr2(sep, q, &line[pos..]) {
                        Some(o) => {
                            let at = pos + o;
                            self.scratch.extend_from_slice(&line[pos..at]);
                            pos = at + 1;
                            if line[at] == sep {
                                break false;
                            }
                            quoted = true;
                            inside = true;
                        }
                        None => {
                            self.scratch.extend_from_slice(&line[pos..]);
                            pos = line.len();
                            break true;
                        }
                    }
                }
            };
            f(idx, &self.scratch, quoted);
            idx += 1;
            if last {
                return idx;
            }
        }
    }
}

/// Collects the fields of one record as owned byte strings.
pub fn split_record(line: &[u8], sep: u8, quote: Option<u8>) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    FieldSplitter::new(sep, quote).for_each(line, |_, f, _| out.push(f.to_vec()));
    out
}

/// Per-parse counters. Failures are per output column.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub rows: usize,
    pub failures: Vec<u64>,
    /// Records with fewer fields than the schema (null-padded).
    pub short_rows: u64,
    /// Records with more fields than the schema (truncated).
    pub long_rows: u64,
}

impl ParseStats {
    pub fn total_failures(&self) -> u64 {
        self.failures.iter().sum()
    }

    pub fn is_clean(&self) -> bool {
        self.total_failures() == 0 && self.short_rows == 0 && self.long_rows == 0
    }

    /// Folds another chunk's counters into these.
    pub fn merge(&mut self, other: &ParseStats) {
        self.rows += other.rows;
        if self.failures.len() < other.failures.len() {
            self.failures.resize(other.failures.len(), 0);
        }
        for (a, b) in self.failures.iter_mut().zip(&other.failures) {
            *a += b;
        }
        self.short_rows += other.short_rows;
        self.long_rows += other.long_rows;
    }

    /// Turns any nonzero counter into [`Error::Strict`].
    pub fn check_strict(&self) -> Result<()> {
        if self.is_clean() {
            return Ok(());
        }
        Err(Error::Strict(format!(
            "{} coercion failures, {} short rows, {} long rows",
            self.total_failures(),
            self.short_rows,
            self.long_rows
        )))
    }
}

/// A parsed frame together with its counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub frame: Frame,
    pub stats: ParseStats,
}

pub(crate) struct ColumnBuilder {
    data: ColumnData,
    nulls: NullMask,
    failures: u64,
}

impl ColumnBuilder {
    pub(crate) fn new(ty: ColumnType, capacity: usize) -> Option<Self> {
        Some(Self {
            data: ColumnData::empty(ty, capacity)?,
            nulls: NullMask::with_capacity(capacity),
            failures: 0,
        })
    }

    #[inline]
    pub(crate) fn push(&mut self, field: &[u8], quoted: bool) {
        let ok = match &mut self.data {
            // Hot types skip the generic dispatch.
            ColumnData::Integer(v) if !quoted => match parse_int(field) {
                Some(i) => {
                    v.push(i);
                    true
                }
                None => return self.push_failed(field == super::field::NA),
            },
            ColumnData::Real(v) if !quoted => match parse_real(field) {
                Some(x) => {
                    v.push(x);
                    true
                }
                None => return self.push_failed(field == super::field::NA),
            },
            ColumnData::Logical(v) if !quoted => match parse_logical(field) {
                Some(b) => {
                    v.push(b);
                    true
                }
                None => return self.push_failed(field == super::field::NA),
            },
            ColumnData::Character(v) => match coerce(field, ColumnType::Character, quoted) {
                Coerced::Text(t) => {
                    v.push(t);
                    true
                }
                c => return self.push_failed(c == Coerced::Na),
            },
            ColumnData::Bytes(v) => match coerce(field, ColumnType::Bytes, quoted) {
                Coerced::Text(t) => {
                    if v.push_with(|buf| decode_hex_into(t, buf)) {
                        true
                    } else {
                        self.failures += 1;
                        self.nulls.push(true);
                        return;
                    }
                }
                c => return self.push_failed(c == Coerced::Na),
            },
            data => {
                let ty = data.column_type();
                match (data, coerce(field, ty, quoted)) {
                    (ColumnData::Logical(v), Coerced::Logical(b)) => v.push(b),
                    (ColumnData::Integer(v), Coerced::Integer(i)) => v.push(i),
                    (ColumnData::Real(v), Coerced::Real(x)) => v.push(x),
                    (ColumnData::Complex(v), Coerced::Complex(z)) => v.push(z),
                    (ColumnData::Timestamp(v), Coerced::Timestamp(t)) => v.push(t),
                    (_, c) => return self.push_failed(c == Coerced::Na),
                }
                true
            }
        };
        self.nulls.push(!ok);
    }

    #[inline]
    fn push_failed(&mut self, is_na: bool) {
        if !is_na {
            self.failures += 1;
        }
        self.data.push_null();
        self.nulls.push(true);
    }

    /// Null for a field the record did not have.
    #[inline]
    pub(crate) fn push_missing(&mut self) {
        self.data.push_null();
        self.nulls.push(true);
    }

    pub(crate) fn finish(self, name: String) -> (Column, u64) {
        (
            Column {
                name,
                data: self.data,
                nulls: self.nulls,
            },
            self.failures,
        )
    }
}

/// Parses newline-separated records into a typed frame, skipping the first
/// `skip_lines` records.
///
/// Empty and unparseable fields become null and are counted per column in
/// the returned [`ParseStats`]; `NA` becomes null without being counted.
/// Short records are null-padded and long records truncated, both counted.
pub fn parse_frame(chunk: &[u8], schema: &Schema, skip_lines: usize) -> Result<Parsed> {
    let types = schema.types();
    let capacity = memchr_iter(b'\n', chunk).count() + 1;
    let mut slots: Vec<Option<usize>> = Vec::with_capacity(types.len());
    let mut builders = Vec::with_capacity(types.len());
    for ty in types {
        match ColumnBuilder::new(*ty, capacity) {
            Some(b) => {
                slots.push(Some(builders.len()));
                builders.push(b);
            }
            None => slots.push(None),
        }
    }

    let width = types.len();
    let mut splitter = FieldSplitter::new(schema.field_sep, schema.quote);
    let mut stats = ParseStats::default();
    for line in Records::new(chunk).skip(skip_lines) {
        let line = trim_cr(line, schema.strip_cr);
        let found = splitter.for_each(line, |i, field, quoted| {
            if let Some(Some(b)) = slots.get(i) {
                builders[*b].push(field, quoted);
            }
        });
        if found < width {
            for slot in slots[found..].iter().flatten() {
                builders[*slot].push_missing();
            }
            stats.short_rows += 1;
        } else if found > width {
            stats.long_rows += 1;
        }
        stats.rows += 1;
    }

    let mut columns = Vec::with_capacity(builders.len());
    for (b, name) in builders.into_iter().zip(schema.output_names()) {
        let (col, failures) = b.finish(name);
        stats.failures.push(failures);
        columns.push(col);
    }
    let frame = Frame::new(columns)?;
    Ok(Parsed { frame, stats })
}

/// Like [`parse_frame`], taking column names from the first record.
///
/// Header fields at skip positions are dropped; repeated names get `.1`,
/// `.2`, ... suffixes. Any names already on `schema` are replaced.
pub fn parse_frame_with_header(chunk: &[u8], schema: &Schema) -> Result<Parsed> {
    let mut records = Records::new(chunk);
    let header = records
        .next()
        .ok_or_else(|| Error::Schema("input has no header record".into()))?;
    let header = trim_cr(header, schema.strip_cr);
    let fields = split_record(header, schema.field_sep, schema.quote);
    if fields.len() != schema.types().len() {
        return Err(Error::HeaderArityMismatch {
            expected: schema.types().len(),
            found: fields.len(),
        });
    }
    let names = fields
        .into_iter()
        .zip(schema.types())
        .filter(|(_, t)| **t != ColumnType::Skip)
        .map(|(f, _)| String::from_utf8_lossy(&f).into_owned());
    let named = schema.clone().with_names(make_unique(names))?;
    let body = &chunk[chunk.len() - records.rest.len()..];
    parse_frame(body, &named, 0)
}

fn make_unique(names: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    names
        .map(|name| {
            if seen.insert(name.clone()) {
                return name;
            }
            let unique = (1..)
                .map(|k| format!("{name}.{k}"))
                .find(|n| !seen.contains(n))
                .unwrap();
            seen.insert(unique.clone());
            unique
        })
        .collect()
}

/// Infers column types from up to `max_records` records.
///
/// Each column gets the narrowest of logical, integer, real, character that
/// parses all of its non-null sampled fields. Columns with no non-null
/// field are character.
pub fn infer_schema(sample: &[u8], max_records: usize, field_sep: u8) -> Result<Schema> {
    #[derive(Clone, Copy)]
    struct Candidates {
        logical: bool,
        integer: bool,
        real: bool,
        seen: bool,
    }

    let mut width = None;
    let mut cols: Vec<Candidates> = Vec::new();
    let mut splitter = FieldSplitter::new(field_sep, None);
    for (record, line) in Records::new(sample).take(max_records.max(1)).enumerate() {
        let line = trim_cr(line, true);
        if cols.is_empty() {
            let n = splitter.for_each(line, |_, _, _| {});
            cols = vec![
                Candidates {
                    logical: true,
                    integer: true,
                    real: true,
                    seen: false,
                };
                n
            ];
            width = Some(n);
        }
        let found = splitter.for_each(line, |i, field, _| {
            let Some(c) = cols.get_mut(i) else { return };
            if field.is_empty() || field == super::field::NA {
                return;
            }
            c.seen = true;
            c.logical &= parse_logical(field).is_some();
            c.integer &= parse_int(field).is_some();
            c.real &= c.integer || parse_real(field).is_some();
        });
        let expected = width.unwrap_or(found);
        if found != expected {
            return Err(Error::RaggedSample {
                record,
                expected,
                found,
            });
        }
    }
    if cols.is_empty() {
        return Err(Error::Schema("cannot infer a schema from an empty sample".into()));
    }
    let types = cols
        .iter()
        .map(|c| match c {
            Candidates { seen: false, .. } => ColumnType::Character,
            Candidates { logical: true, .. } => ColumnType::Logical,
            Candidates { integer: true, .. } => ColumnType::Integer,
            Candidates { real: true, .. } => ColumnType::Real,
            _ => ColumnType::Character,
        })
        .collect();
    Ok(Schema::new(types)?.with_sep(field_sep))
}
