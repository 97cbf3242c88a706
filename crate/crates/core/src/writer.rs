//! Delimited-text output for frames and matrices.
//!
//! Real numbers are written with the shortest decimal string that parses
//! back to the same `f64`. Nulls are written as `NA`. Every record ends with
//! exactly one newline, so appended outputs concatenate into a valid file.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use memchr::memchr3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frame::{epoch_to_civil, ColumnData, Frame};
use crate::matrix::{DenseMatrix, MatrixElement};

const NA: &[u8] = b"NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormatOptions {
    pub field_sep: u8,
    pub include_header: bool,
    /// When set, character cells that would not survive a re-parse are quoted.
    pub quote: Option<u8>,
}

impl Default for FormatOptions {
    fn default() -> Self {
        Self {
            field_sep: b',',
            include_header: false,
            quote: None,
        }
    }
}

impl FormatOptions {
    pub fn with_header(mut self, include: bool) -> Self {
        self.include_header = include;
        self
    }

    pub fn with_sep(mut self, sep: u8) -> Self {
        self.field_sep = sep;
        self
    }

    pub fn with_quote(mut self, quote: Option<u8>) -> Self {
        self.quote = quote;
        self
    }
}

/// Appends the shortest round-tripping decimal form of `x`.
pub fn render_real(x: f64, out: &mut Vec<u8>) {
    if x.is_nan() {
        out.extend_from_slice(b"NaN");
    } else if x.is_infinite() {
        out.extend_from_slice(if x > 0.0 { b"Inf" } else { b"-Inf" });
    } else {
        let a = x.abs();
        // Both forms print the shortest digits; the exponent form keeps very
        // large and very small values compact.
        if a == 0.0 || (1e-5..1e16).contains(&a) {
            write!(out, "{x}").unwrap();
        } else {
            write!(out, "{x:e}").unwrap();
        }
    }
}

pub fn render_complex(z: Complex64, out: &mut Vec<u8>) {
    render_real(z.re, out);
    if z.im.is_sign_negative() && !z.im.is_nan() {
        out.push(b'-');
    } else {
        out.push(b'+');
    }
    render_real(if z.im.is_nan() { z.im } else { z.im.abs() }, out);
    out.push(b'i');
}

/// `YYYY-MM-DD HH:MM:SS` for whole seconds in years 0..=9999, otherwise
/// plain epoch seconds.
pub fn render_timestamp(t: f64, out: &mut Vec<u8>) {
    const MIN: f64 = -62_167_219_200.0; // 0000-01-01 00:00:00
    const MAX: f64 = 253_402_300_799.0; // 9999-12-31 23:59:59
    if t.fract() == 0.0 && (MIN..=MAX).contains(&t) && !(t == 0.0 && t.is_sign_negative()) {
        let secs = t as i64;
        let (y, m, d) = epoch_to_civil(secs.div_euclid(86_400));
        let s = secs.rem_euclid(86_400);
        write!(out, "{y:04}-{m:02}-{d:02} {:02}:{:02}:{:02}", s / 3600, s / 60 % 60, s % 60).unwrap();
    } else {
        render_real(t, out);
    }
}

fn needs_quotes(cell: &[u8], sep: u8, quote: u8) -> bool {
    cell.is_empty()
        || cell == NA
        || memchr3(sep, quote, b'\r', cell).is_some()
}

fn push_quoted(cell: &[u8], quote: u8, out: &mut Vec<u8>) {
    out.push(quote);
    for &b in cell {
        if b == quote {
            out.push(quote);
        }
        out.push(b);
    }
    out.push(quote);
}

/// Writes a character cell, quoting on demand when a quote byte is set.
fn push_text(cell: &[u8], opts: &FormatOptions, out: &mut Vec<u8>) -> std::result::Result<(), ()> {
    if memchr::memchr(b'\n', cell).is_some() {
        return Err(());
    }
    match opts.quote {
        Some(q) if needs_quotes(cell, opts.field_sep, q) => push_quoted(cell, q, out),
        Some(_) => out.extend_from_slice(cell),
        None if memchr::memchr(opts.field_sep, cell).is_some() => return Err(()),
        None => out.extend_from_slice(cell),
    }
    Ok(())
}

/// Serializes a frame, one record per row.
///
/// Fails with [`Error::SeparatorCollision`] when a character cell or header
/// name contains a newline, or contains the field separator while quoting
/// is off.
pub fn format_frame(frame: &Frame, opts: &FormatOptions) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(frame.n_rows() * frame.n_cols() * 8);
    let cols = frame.columns();
    if opts.include_header {
        for (j, c) in cols.iter().enumerate() {
            if j > 0 {
                out.push(opts.field_sep);
            }
            push_text(c.name.as_bytes(), opts, &mut out).map_err(|()| Error::SeparatorCollision {
                row: 0,
                column: c.name.clone(),
            })?;
        }
        out.push(b'\n');
    }
    let mut hex_buf = Vec::new();
    for r in 0..frame.n_rows() {
        for (j, c) in cols.iter().enumerate() {
            if j > 0 {
                out.push(opts.field_sep);
            }
            if c.is_null(r) {
                out.extend_from_slice(NA);
                continue;
            }
            match &c.data {
                ColumnData::Logical(v) => out.extend_from_slice(if v[r] { b"TRUE" } else { b"FALSE" }),
                ColumnData::Integer(v) => write!(out, "{}", v[r]).unwrap(),
                ColumnData::Real(v) => render_real(v[r], &mut out),
                ColumnData::Complex(v) => render_complex(v[r], &mut out),
                ColumnData::Timestamp(v) => render_timestamp(v[r], &mut out),
                ColumnData::Character(v) => {
                    push_text(v.get(r), opts, &mut out).map_err(|()| Error::SeparatorCollision {
                        row: r,
                        column: c.name.clone(),
                    })?;
                }
                ColumnData::Bytes(v) => {
                    hex_buf.clear();
                    hex_buf.resize(v.get(r).len() * 2, 0);
                    hex::encode_to_slice(v.get(r), &mut hex_buf).unwrap();
                    match opts.quote {
                        Some(q) if hex_buf.is_empty() => push_quoted(&hex_buf, q, &mut out),
                        _ => out.extend_from_slice(&hex_buf),
                    }
                }
            }
        }
        out.push(b'\n');
    }
    Ok(out)
}

/// Serializes a matrix without header or row names.
pub fn format_matrix<T: MatrixElement>(m: &DenseMatrix<T>, field_sep: u8) -> Vec<u8> {
    let mut out = Vec::with_capacity(m.n_rows() * m.n_cols() * 8);
    for row in m.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(field_sep);
            }
            v.render(&mut out);
        }
        out.push(b'\n');
    }
    out
}

/// Appends already-formatted records to a sink.
pub fn append_to_checkpoint<W: Write>(sink: &mut W, bytes: &[u8]) -> Result<()> {
    sink.write_all(bytes).map_err(Error::Write)
}

/// Path of the column-name sidecar for a checkpoint file.
pub fn names_path(checkpoint: &Path) -> PathBuf {
    suffixed(checkpoint, ".names")
}

/// Path of the marker left behind by an unfinished checkpoint.
pub fn partial_marker_path(checkpoint: &Path) -> PathBuf {
    suffixed(checkpoint, ".partial")
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// A headerless checkpoint file being written, with its `.names` sidecar.
///
/// A `.partial` marker exists from [`Checkpoint::create`] until
/// [`Checkpoint::finish`] succeeds.
pub struct Checkpoint {
    path: PathBuf,
    file: File,
    names: Option<Vec<String>>,
    records: u64,
}

impl Checkpoint {
    pub fn create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        fs::write(partial_marker_path(&path), b"").map_err(Error::Write)?;
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)
            .map_err(Error::Write)?;
        Ok(Self {
            path,
            file,
            names: None,
            records: 0,
        })
    }

    /// Appends a matrix; every appended matrix must carry the same column names.
    pub fn append<T: MatrixElement>(&mut self, m: &DenseMatrix<T>) -> Result<()> {
        if let Some(names) = m.col_names() {
            match &self.names {
                Some(prev) if prev.as_slice() != names => {
                    return Err(Error::Schema("checkpoint column names changed between appends".into()));
                }
                Some(_) => {}
                None => self.names = Some(names.to_vec()),
            }
        }
        append_to_checkpoint(&mut self.file, &format_matrix(m, b','))?;
        self.records += m.n_rows() as u64;
        Ok(())
    }

    pub fn set_names(&mut self, names: Vec<String>) {
        self.names = Some(names);
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    /// Flushes, writes the sidecar and removes the partial marker.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.file.flush().map_err(Error::Write)?;
        self.file.sync_all().map_err(Error::Write)?;
        let mut sidecar = Vec::new();
        for n in self.names.iter().flatten() {
            sidecar.extend_from_slice(n.as_bytes());
            sidecar.push(b'\n');
        }
        fs::write(names_path(&self.path), sidecar).map_err(Error::Write)?;
        fs::remove_file(partial_marker_path(&self.path)).map_err(Error::Write)?;
        Ok(self.path)
    }
}

/// Reads a checkpoint's `.names` sidecar.
pub fn read_names(checkpoint: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(names_path(checkpoint))?;
    Ok(text.lines().map(str::to_owned).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{ByteStrings, Column, NullMask};

    fn real_str(x: f64) -> String {
        let mut out = Vec::new();
        render_real(x, &mut out);
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn real_rendering() {
        assert_eq!(real_str(1.0), "1");
        assert_eq!(real_str(-0.0), "-0");
        assert_eq!(real_str(0.1), "0.1");
        assert_eq!(real_str(1e300), "1e300");
        assert_eq!(real_str(1.5e-300), "1.5e-300");
        assert_eq!(real_str(f64::NEG_INFINITY), "-Inf");
        assert_eq!(real_str(f64::NAN), "NaN");
        assert_eq!(real_str(123456.789), "123456.789");
    }

    #[test]
    fn timestamp_rendering() {
        let mut out = Vec::new();
        render_timestamp(1_199_359_800.0, &mut out);
        assert_eq!(out, b"2008-01-03 11:30:00");
        out.clear();
        render_timestamp(-1.0, &mut out);
        assert_eq!(out, b"1969-12-31 23:59:59");
        out.clear();
        render_timestamp(0.5, &mut out);
        assert_eq!(out, b"0.5");
    }

    #[test]
    fn integer_with_null_and_header() {
        let col = Column::new(
            "x",
            ColumnData::Integer(vec![1, 0]),
            NullMask::from_bools([false, true]),
        )
        .unwrap();
        let f = Frame::new(vec![col]).unwrap();
        let out = format_frame(&f, &FormatOptions::default().with_header(true)).unwrap();
        assert_eq!(out, b"x\n1\nNA\n");
    }

    #[test]
    fn collision_forces_quoting() {
        let col = Column::dense("s", ColumnData::Character(["a,b"].iter().collect::<ByteStrings>()));
        let f = Frame::new(vec![col]).unwrap();
        let quoted = format_frame(&f, &FormatOptions::default().with_quote(Some(b'"'))).unwrap();
        assert_eq!(quoted, b"\"a,b\"\n");
        let err = format_frame(&f, &FormatOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SeparatorCollision { row: 0, .. }));
    }

    #[test]
    fn newline_in_cell_always_collides() {
        let col = Column::dense("s", ColumnData::Character(["a\nb"].iter().collect::<ByteStrings>()));
        let f = Frame::new(vec![col]).unwrap();
        assert!(format_frame(&f, &FormatOptions::default().with_quote(Some(b'"'))).is_err());
    }

    #[test]
    fn matrix_output() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(format_matrix(&m, b','), b"1,2\n3,4\n");
        assert_eq!(format_matrix(&DenseMatrix::<f64>::empty(), b','), b"");
    }

    #[test]
    fn appends_concatenate() {
        let mut sink = Vec::new();
        append_to_checkpoint(&mut sink, b"1\n").unwrap();
        append_to_checkpoint(&mut sink, b"2\n").unwrap();
        assert_eq!(sink, b"1\n2\n");
    }

    #[test]
    fn checkpoint_lifecycle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mm.io");
        let mut ck = Checkpoint::create(&path).unwrap();
        assert!(partial_marker_path(&path).exists());
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap().with_col_names(["a", "b"]).unwrap();
        ck.append(&m).unwrap();
        ck.append(&m).unwrap();
        assert_eq!(ck.records(), 2);
        let other = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap().with_col_names(["a", "c"]).unwrap();
        assert!(ck.append(&other).is_err());
        ck.finish().unwrap();
        assert!(!partial_marker_path(&path).exists());
        assert_eq!(fs::read(&path).unwrap(), b"1,2\n1,2\n");
        assert_eq!(read_names(&path).unwrap(), vec!["a", "b"]);
    }
}
