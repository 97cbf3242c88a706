//! Parser throughput benchmark and the naive reference parser it compares
//! against.

use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame::{
    parse_field, parse_frame, ByteStrings, Column, ColumnData, ColumnType, Frame, NullMask, Schema, Value,
};

/// Schema of the rows produced by [`synthetic_csv`].
pub const SYNTHETIC_SCHEMA: &str = "i,i,i,c,i,r,r,c,l,i";

/// Deterministic airline-like CSV of roughly `target_bytes` bytes.
///
/// Columns are year, month, a clock time, a carrier code, a delay with
/// occasional `NA`, two reals, an airport code, a flag and a distance.
pub fn synthetic_csv(target_bytes: usize, seed: u64) -> Vec<u8> {
    use std::io::Write;
    const CARRIERS: [&str; 8] = ["AA", "DL", "UA", "WN", "US", "NW", "CO", "HP"];
    const AIRPORTS: [&str; 10] = ["ORD", "ATL", "DFW", "LAX", "SFO", "JFK", "DEN", "PHX", "SEA", "BOS"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(target_bytes + 128);
    while out.len() < target_bytes {
        let year = rng.gen_range(1987..=2008);
        let month = rng.gen_range(1..=12);
        let clock = rng.gen_range(0..24) * 100 + rng.gen_range(0..60);
        let carrier = CARRIERS[rng.gen_range(0..CARRIERS.len())];
        let airport = AIRPORTS[rng.gen_range(0..AIRPORTS.len())];
        let flag = if rng.gen_bool(0.5) { "TRUE" } else { "FALSE" };
        let distance = rng.gen_range(50..3000);
        let a: f64 = rng.gen_range(-100.0..100.0);
        let b: f64 = rng.gen::<f64>() * 1e3;
        write!(out, "{year},{month},{clock},{carrier},").unwrap();
        if rng.gen_ratio(1, 50) {
            out.extend_from_slice(b"NA");
        } else {
            write!(out, "{}", rng.gen_range(-60..300)).unwrap();
        }
        writeln!(out, ",{a},{b},{airport},{flag},{distance}").unwrap();
    }
    out
}

/// Reference parser with no bulk scanning: a per-byte state machine that
/// builds an owned string for every field and processes one line at a time.
///
/// Produces the same frame as [`parse_frame`] for the same input and schema.
pub fn naive_parse(input: &[u8], schema: &Schema, skip_lines: usize) -> Result<Frame> {
    let types = schema.types();
    let quote = schema.quote;
    let mut cells: Vec<Vec<Option<Value>>> = vec![Vec::new(); types.len()];

    let mut lines: Vec<Vec<u8>> = Vec::new();
    let mut current = Vec::new();
    for &b in input {
        if b == b'\n' {
            lines.push(std::mem::take(&mut current));
        } else {
            current.push(b);
        }
    }
    if !current.is_empty() {
        lines.push(current);
    }

    for mut line in lines.into_iter().skip(skip_lines) {
        if schema.strip_cr && line.last() == Some(&b'\r') {
            line.pop();
        }
        let fields = naive_split(&line, schema.field_sep, quote);
        for (i, ty) in types.iter().enumerate() {
            if *ty == ColumnType::Skip {
                continue;
            }
            let value = match fields.get(i) {
                None => None,
                Some((text, quoted)) => naive_value(text, *ty, *quoted),
            };
            cells[i].push(value);
        }
    }

    let names = schema.output_names();
    let columns = types
        .iter()
        .zip(cells)
        .filter(|(ty, _)| **ty != ColumnType::Skip)
        .zip(names)
        .map(|((ty, values), name)| build_column(name, *ty, values))
        .collect::<Result<Vec<_>>>()?;
    if columns.is_empty() {
        return Ok(Frame::empty(schema));
    }
    Frame::new(columns)
}

#[derive(PartialEq)]
enum State {
    FieldStart,
    Unquoted,
    Quoted,
    QuoteInQuoted,
}

fn naive_split(line: &[u8], sep: u8, quote: Option<u8>) -> Vec<(String, bool)> {
    let mut fields = Vec::new();
    let mut field: Vec<u8> = Vec::new();
    let mut quoted = false;
    let mut state = State::FieldStart;
    for &c in line {
        let is_quote = Some(c) == quote;
        state = match state {
            State::FieldStart | State::Unquoted => {
                if c == sep {
                    fields.push((String::from_utf8_lossy(&field).into_owned(), quoted));
                    field = Vec::new();
                    quoted = false;
                    State::FieldStart
                } else if is_quote {
                    quoted = true;
                    State::Quoted
                } else {
                    field.push(c);
                    State::Unquoted
                }
            }
            State::Quoted => {
                if is_quote {
                    State::QuoteInQuoted
                } else {
                    field.push(c);
                    State::Quoted
                }
            }
            State::QuoteInQuoted => {
                if is_quote {
                    field.push(c);
                    State::Quoted
                } else if c == sep {
                    fields.push((String::from_utf8_lossy(&field).into_owned(), quoted));
                    field = Vec::new();
                    quoted = false;
                    State::FieldStart
                } else {
                    field.push(c);
                    State::Unquoted
                }
            }
        };
    }
    fields.push((String::from_utf8_lossy(&field).into_owned(), quoted));
    fields
}

fn naive_value(text: &str, ty: ColumnType, quoted: bool) -> Option<Value> {
    match ty {
        ColumnType::Character if quoted => Some(Value::Character(text.as_bytes().to_vec())),
        ColumnType::Bytes if quoted || (text != "NA" && !text.is_empty()) => {
            hex::decode(text).ok().map(Value::Bytes)
        }
        ColumnType::Bytes => None,
        _ if quoted && text == "NA" => None,
        _ => parse_field(text.as_bytes(), ty),
    }
}

fn build_column(name: String, ty: ColumnType, values: Vec<Option<Value>>) -> Result<Column> {
    let nulls = NullMask::from_bools(values.iter().map(Option::is_none));
    let mismatch = || Error::Schema(format!("naive parser produced a value of the wrong type in {name:?}"));
    macro_rules! collect {
        ($variant:ident, $default:expr) => {
            values
                .iter()
                .map(|v| match v {
                    None => Ok($default),
                    Some(Value::$variant(x)) => Ok(x.clone()),
                    Some(_) => Err(mismatch()),
                })
                .collect::<Result<Vec<_>>>()?
        };
    }
    let data = match ty {
        ColumnType::Logical => ColumnData::Logical(collect!(Logical, false)),
        ColumnType::Integer => ColumnData::Integer(collect!(Integer, 0)),
        ColumnType::Real => ColumnData::Real(collect!(Real, 0.0)),
        ColumnType::Complex => ColumnData::Complex(collect!(Complex, Default::default())),
        ColumnType::Timestamp => ColumnData::Timestamp(collect!(Timestamp, 0.0)),
        ColumnType::Character => ColumnData::Character(collect!(Character, Vec::new()).iter().collect::<ByteStrings>()),
        ColumnType::Bytes => ColumnData::Bytes(collect!(Bytes, Vec::new()).iter().collect::<ByteStrings>()),
        ColumnType::Skip => unreachable!("skip columns are filtered out"),
    };
    Column::new(name, data, nulls)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub bytes: usize,
    pub rows: usize,
    pub trials: usize,
    pub bulk: Duration,
    pub naive: Duration,
    pub raw_read: Duration,
    /// Whether the bulk and naive parsers produced identical frames.
    pub identical: bool,
}

fn mb_per_s(bytes: usize, d: Duration) -> f64 {
    bytes as f64 / 1e6 / d.as_secs_f64().max(1e-9)
}

impl BenchReport {
    pub fn bulk_mb_s(&self) -> f64 {
        mb_per_s(self.bytes, self.bulk)
    }

    pub fn naive_mb_s(&self) -> f64 {
        mb_per_s(self.bytes, self.naive)
    }

    pub fn raw_mb_s(&self) -> f64 {
        mb_per_s(self.bytes, self.raw_read)
    }

    /// Naive time over bulk time; above 1 means the bulk parser is faster.
    pub fn naive_over_bulk(&self) -> f64 {
        self.naive.as_secs_f64() / self.bulk.as_secs_f64().max(1e-12)
    }

    /// Bulk parse time over raw read time.
    pub fn parse_over_read(&self) -> f64 {
        self.bulk.as_secs_f64() / self.raw_read.as_secs_f64().max(1e-12)
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input      {:.1} MB, {} rows, median of {} trials", self.bytes as f64 / 1e6, self.rows, self.trials)?;
        writeln!(f, "raw read   {:>9.1} MB/s", self.raw_mb_s())?;
        writeln!(f, "bulk       {:>9.1} MB/s", self.bulk_mb_s())?;
        writeln!(f, "naive      {:>9.1} MB/s", self.naive_mb_s())?;
        writeln!(f, "naive/bulk {:>9.2}x", self.naive_over_bulk())?;
        writeln!(f, "bulk/read  {:>9.2}x", self.parse_over_read())?;
        write!(f, "frames     {}", if self.identical { "identical" } else { "DIFFER" })
    }
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn time<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

/// Times raw reading, bulk parsing and naive parsing of the file at `path`.
pub fn run_bench(path: &Path, schema: &Schema, skip_lines: usize, trials: usize) -> Result<BenchReport> {
    let trials = trials.max(1);
    let mut raw = Vec::with_capacity(trials);
    let mut bulk = Vec::with_capacity(trials);
    let mut naive = Vec::with_capacity(trials);
    let mut identical = true;
    let mut rows = 0;
    let mut bytes = 0;
    for _ in 0..trials {
        let (data, d) = time(|| std::fs::read(path));
        let data = data?;
        raw.push(d);
        bytes = data.len();
        let (a, d) = time(|| parse_frame(&data, schema, skip_lines));
        let a = a?.frame;
        bulk.push(d);
        let (b, d) = time(|| naive_parse(&data, schema, skip_lines));
        let b = b?;
        naive.push(d);
        identical &= a == b;
        rows = a.n_rows();
    }
    Ok(BenchReport {
        bytes,
        rows,
        trials,
        bulk: median(bulk),
        naive: median(naive),
        raw_read: median(raw),
        identical,
    })
}
