//! The `chunkio` command line: `parse`, `mm`, `fit` and `bench`.
//!
//! [`run`] takes the argument list and output streams explicitly and returns
//! the process exit code, so the commands can be driven from tests.
//! Exit codes are 0 on success, 1 for input or format errors and 2 for
//! verification failures (strict-mode violations, benchmark disagreement).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use crate::bench::{run_bench, synthetic_csv, SYNTHETIC_SCHEMA};
use crate::chunk_apply::{chunk_apply, iter_chunks, ApplyConfig, Mode, Source};
use crate::chunker::{ChunkerConfig, DEFAULT_TARGET_BYTES};
use crate::error::{BoxError, Error, Result};
use crate::frame::{infer_schema, Frame, parse_frame, parse_frame_with_header, ColumnType, ParseStats, Schema};
use crate::matrix::{parse_matrix_as, MatrixOptions};
use crate::model_matrix::{expand, normalize_hhmm_column, Term, TermSpec};
use crate::ols::{solve_ne, NormalEqAccumulator, DEFAULT_RANK_TOL};
use crate::writer::{format_frame, read_names, Checkpoint, FormatOptions};

/// Environment variable overriding the chunk target size in bytes.
pub const CHUNK_TARGET_ENV: &str = "CHUNK_TARGET_BYTES";

const INFER_RECORDS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "chunkio", version, about = "Chunked parsing, model matrices and out-of-core regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a delimited file and write it back out in canonical form.
    Parse(ParseArgs),
    /// Build a model-matrix checkpoint from one or more files.
    Mm(MmArgs),
    /// Fit a linear model from a checkpoint.
    Fit(FitArgs),
    /// Compare bulk and naive parser throughput.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct InputFormat {
    /// Field separator (a single byte).
    #[arg(long, default_value = ",", value_parser = parse_byte)]
    sep: u8,
    /// Column types as letters l,i,r,c,b,x,t,s (logical, integer, real,
    /// character, bytes, complex, timestamp, skip), or "infer".
    #[arg(long, default_value = "infer")]
    schema: String,
    /// The first record (after any skipped lines) names the columns.
    #[arg(long)]
    header: bool,
    /// Lines to skip at the start of each input.
    #[arg(long, default_value_t = 0)]
    skip: usize,
    /// Quote byte; fields wrapped in it may contain the separator.
    #[arg(long, value_parser = parse_byte)]
    quote: Option<u8>,
    /// Chunk target size in bytes; overrides CHUNK_TARGET_BYTES.
    #[arg(long)]
    chunk_bytes: Option<usize>,
}

#[derive(Debug, Args)]
struct ParseArgs {
    input: PathBuf,
    #[command(flatten)]
    format: InputFormat,
    /// Output path, "-" for standard output.
    #[arg(long, default_value = "-")]
    out: String,
    /// Exit with status 2 if any field fails to coerce or a record is ragged.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct MmArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    format: InputFormat,
    /// Response column.
    #[arg(long)]
    response: String,
    /// Numeric columns (repeatable, comma-separated).
    #[arg(long, action = clap::ArgAction::Append)]
    numeric: Vec<String>,
    /// Factor as COLUMN=L1,L2,... or COLUMN=A..B; the first level is the baseline.
    #[arg(long, action = clap::ArgAction::Append)]
    factor: Vec<String>,
    /// HHMM clock columns converted to minutes after midnight.
    #[arg(long, action = clap::ArgAction::Append)]
    hhmm: Vec<String>,
    /// Omit the intercept column.
    #[arg(long)]
    no_intercept: bool,
    /// Drop rows with undeclared factor levels instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Checkpoint path; column names go to "<out>.names".
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMode {
    Seq,
    Pipeline,
    Split,
}

#[derive(Debug, Args)]
struct FitArgs {
    checkpoint: PathBuf,
    #[arg(long)]
    response: String,
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    #[arg(long, value_enum, default_value_t = FitMode::Pipeline)]
    mode: FitMode,
    /// Relative pivot threshold for rank detection.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// Chunk target size in bytes; overrides CHUNK_TARGET_BYTES.
    #[arg(long)]
    chunk_bytes: Option<usize>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Benchmark this file instead of synthetic data.
    #[arg(long, conflicts_with = "size_mb")]
    input: Option<PathBuf>,
    /// Size of the synthetic file in megabytes.
    #[arg(long, default_value_t = 100)]
    size_mb: usize,
    /// Column types of the input; defaults to the synthetic schema.
    #[arg(long)]
    schema: Option<String>,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_byte(s: &str) -> std::result::Result<u8, String> {
    match s.as_bytes() {
        [b] => Ok(*b),
        _ if s == "\\t" || s == "tab" => Ok(b'\t'),
        _ => Err(format!("expected a single byte, got {s:?}")),
    }
}

/// Parses arguments (including the program name) and runs the command.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(rendered.as_bytes())
            } else {
                stderr.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            return 1;
        }
    };
    let result = match cli.command {
        Command::Parse(a) => cmd_parse(&a, stdout, stderr),
        Command::Mm(a) => {
            let sub = matches.subcommand_matches("mm").expect("mm matches");
            term_order(sub, &a).and_then(|terms| cmd_mm(&a, terms, stderr))
        }
        Command::Fit(a) => cmd_fit(&a, stdout, stderr),
        Command::Bench(a) => cmd_bench(&a, stdout, stderr),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Strict(_) => 2,
        _ => 1,
    }
}

fn chunker_config(flag: Option<usize>) -> Result<ChunkerConfig> {
    let target = match (flag, std::env::var(CHUNK_TARGET_ENV)) {
        (Some(t), _) => t,
        (None, Ok(v)) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{CHUNK_TARGET_ENV}={v:?} is not a byte count")))?,
        (None, Err(_)) => DEFAULT_TARGET_BYTES,
    };
    let cfg = ChunkerConfig::with_target(target);
    cfg.validate()?;
    Ok(cfg)
}

/// Splits off up to `n` leading records; returns the remainder and how
/// many records were skipped.
fn skip_records(chunk: &[u8], n: usize) -> (&[u8], usize) {
    let mut rest = chunk;
    let mut skipped = 0;
    while skipped < n && !rest.is_empty() {
        rest = match memchr::memchr(b'\n', rest) {
            Some(p) => &rest[p + 1..],
            None => &[],
        };
        skipped += 1;
    }
    (rest, skipped)
}

impl InputFormat {
    fn declared_schema(&self) -> Result<Option<Schema>> {
        if self.schema == "infer" {
            return Ok(None);
        }
        let types = ColumnType::parse_list(&self.schema)?;
        Ok(Some(self.configure(Schema::new(types)?)))
    }

    fn configure(&self, schema: Schema) -> Schema {
        schema.with_sep(self.sep).with_quote(self.quote)
    }

    fn infer(&self, body: &[u8]) -> Result<Schema> {
        let inferred = infer_schema(body, INFER_RECORDS, self.sep)?;
        Ok(self.configure(Schema::new(inferred.types().to_vec())?))
    }
}

/// Streams files as parsed frames, one per chunk, with column names attached.
struct FrameStream<'a> {
    format: &'a InputFormat,
    schema: Option<Schema>,
}

impl<'a> FrameStream<'a> {
    fn new(format: &'a InputFormat) -> Result<Self> {
        Ok(Self {
            format,
            schema: format.declared_schema()?,
        })
    }

    fn run(
        &mut self,
        path: &Path,
        cfg: &ChunkerConfig,
        mut on_frame: impl FnMut(Frame) -> Result<()>,
    ) -> Result<(ParseStats, u64)> {
        let mut stats = ParseStats::default();
        let mut bytes = 0u64;
        let mut to_skip = self.format.skip;
        let mut need_header = self.format.header;
        for chunk in iter_chunks(Source::path(path), cfg)? {
            let chunk = chunk?;
            bytes += chunk.len() as u64;
            let (mut body, skipped) = skip_records(&chunk.data, to_skip);
            to_skip -= skipped;
            if body.is_empty() {
                continue;
            }
            let mut header_line: &[u8] = &[];
            if need_header {
                let end = memchr::memchr(b'\n', body).map_or(body.len(), |p| p + 1);
                header_line = &body[..end];
                body = &body[end..];
            }
            if self.schema.is_none() {
                self.schema = Some(self.format.infer(body)?);
            }
            let schema = self.schema.as_mut().expect("schema set above");
            let parsed = if need_header {
                need_header = false;
                let mut with_header = header_line.to_vec();
                if !with_header.ends_with(b"\n") {
                    with_header.push(b'\n');
                }
                with_header.extend_from_slice(body);
                let parsed = parse_frame_with_header(&with_header, schema)?;
                let names: Vec<String> = parsed.frame.names().iter().map(|s| (*s).to_owned()).collect();
                *schema = schema.clone().with_names(names)?;
                parsed
            } else {
                parse_frame(body, schema, 0)?
            };
            stats.merge(&parsed.stats);
            on_frame(parsed.frame)?;
        }
        Ok((stats, bytes))
    }
}

fn open_out<'a>(out: &str, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(if out == "-" {
        Box::new(stdout)
    } else {
        Box::new(BufWriter::new(File::create(out).map_err(Error::Write)?))
    })
}

fn cmd_parse(a: &ParseArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let cfg = chunker_config(a.format.chunk_bytes)?;
    let started = Instant::now();
    let mut out = open_out(&a.out, stdout)?;
    let mut stream = FrameStream::new(&a.format)?;
    let mut first = true;
    let (stats, bytes) = stream.run(&a.input, &cfg, |frame| {
        let opts = FormatOptions::default()
            .with_sep(a.format.sep)
            .with_quote(a.format.quote)
            .with_header(first && a.format.header);
        first = false;
        out.write_all(&format_frame(&frame, &opts)?).map_err(Error::Write)
    })?;
    out.flush().map_err(Error::Write)?;
    drop(out);

    let secs = started.elapsed().as_secs_f64().max(1e-9);
    let _ = writeln!(stderr, "rows: {}", stats.rows);
    if let Some(schema) = &stream.schema {
        let _ = writeln!(stderr, "schema: {}", ColumnType::format_list(schema.types()));
        for (name, fails) in schema.output_names().iter().zip(&stats.failures) {
            let _ = writeln!(stderr, "failures {name}: {fails}");
        }
    }
    if stats.short_rows + stats.long_rows > 0 {
        let _ = writeln!(stderr, "ragged rows: {} short, {} long", stats.short_rows, stats.long_rows);
    }
    let _ = writeln!(stderr, "throughput: {:.1} MB/s", bytes as f64 / 1e6 / secs);
    if a.strict {
        stats.check_strict()?;
    }
    Ok(0)
}

fn parse_levels(spec: &str) -> Result<(String, Vec<String>)> {
    let (col, levels) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("factor {spec:?} should look like COLUMN=L1,L2,...")))?;
    let levels: Vec<String> = match levels.split_once("..") {
        Some((lo, hi)) if !levels.contains(',') => {
            let bad = || Error::Config(format!("factor range {levels:?} needs integer bounds"));
            let lo: i64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: i64 = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            (lo..=hi).map(|v| v.to_string()).collect()
        }
        _ => levels.split(',').map(|l| l.trim().to_owned()).collect(),
    };
    Ok((col.trim().to_owned(), levels))
}

/// Terms in the order their flags appeared on the command line.
fn term_order(m: &ArgMatches, a: &MmArgs) -> Result<Vec<Term>> {
    let mut placed: Vec<(usize, Term)> = Vec::new();
    let indices = |id: &str| m.indices_of(id).map(Iterator::collect::<Vec<_>>).unwrap_or_default();
    for (i, spec) in indices("numeric").into_iter().zip(&a.numeric) {
        for c in spec.split(',').filter(|c| !c.is_empty()) {
            placed.push((i, Term::numeric(c.trim())));
        }
    }
    for (i, spec) in indices("hhmm").into_iter().zip(&a.hhmm) {
        for c in spec.split(',').filter(|c| !c.is_empty()) {
            placed.push((i, Term::numeric(c.trim())));
        }
    }
    for (i, spec) in indices("factor").into_iter().zip(&a.factor) {
        let (column, levels) = parse_levels(spec)?;
        placed.push((i, Term::Factor { column, levels }));
    }
    placed.sort_by_key(|(i, _)| *i);
    Ok(placed.into_iter().map(|(_, t)| t).collect())
}

fn cmd_mm(a: &MmArgs, terms: Vec<Term>, stderr: &mut dyn Write) -> Result<i32> {
    let cfg = chunker_config(a.format.chunk_bytes)?;
    let mut spec = TermSpec::new(a.response.clone(), terms);
    spec.intercept = !a.no_intercept;
    let clocks: Vec<&str> = a.hhmm.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|c| !c.is_empty()).collect();

    let mut checkpoint = Checkpoint::create(&a.out)?;
    checkpoint.set_names(spec.column_names());
    let mut stream = FrameStream::new(&a.format)?;
    for input in &a.inputs {
        let (mut rows, mut dropped, mut unknown) = (0usize, 0usize, 0usize);
        let result = stream.run(input, &cfg, |mut frame| {
            for c in &clocks {
                normalize_hhmm_column(&mut frame, c)?;
            }
            let e = expand(&frame, &spec, a.lenient)?;
            rows += e.matrix.n_rows();
            dropped += e.dropped_rows;
            unknown += e.unknown_level_rows;
            checkpoint.append(&e.matrix)
        });
        if let Err(e) = result {
            return Err(Error::Config(format!("{}: {e}", input.display())));
        }
        let _ = write!(stderr, "{}: {rows} rows written, {dropped} dropped for nulls", input.display());
        if a.lenient {
            let _ = write!(stderr, ", {unknown} dropped for unknown levels");
        }
        let _ = writeln!(stderr);
    }
    let records = checkpoint.records();
    let path = checkpoint.finish()?;
    let _ = writeln!(stderr, "{}: {records} records, {} columns", path.display(), spec.n_cols());
    Ok(0)
}

fn cmd_fit(a: &FitArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let names = read_names(&a.checkpoint)?;
    let response = names
        .iter()
        .position(|n| *n == a.response)
        .ok_or_else(|| Error::MissingColumn(a.response.clone()))?;
    let design: Vec<usize> = (0..names.len()).filter(|&i| i != response).collect();
    let design_names: Vec<String> = design.iter().map(|&i| names[i].clone()).collect();
    let width = names.len();
    let mode = match a.mode {
        FitMode::Seq => Mode::Sequential,
        FitMode::Pipeline => Mode::Pipeline(a.parallel),
        FitMode::Split => Mode::WorkersRead(a.parallel),
    };
    let cfg = ApplyConfig::new(mode, chunker_config(a.chunk_bytes)?);
    let opts = MatrixOptions::default();
    let started = Instant::now();
    let per_chunk = chunk_apply(
        Source::path(&a.checkpoint),
        |chunk| -> std::result::Result<NormalEqAccumulator, BoxError> {
            let m = parse_matrix_as::<f64>(chunk, &opts)?.matrix;
            let mut acc = NormalEqAccumulator::new(design.len());
            if m.n_rows() == 0 {
                return Ok(acc);
            }
            if m.n_cols() != width {
                return Err(Box::new(Error::DimensionMismatch {
                    expected: width,
                    found: m.n_cols(),
                }));
            }
            acc.accumulate_design(&m, &design, response)?;
            Ok(acc)
        },
        &cfg,
    )?;
    let mut total = NormalEqAccumulator::new(design.len());
    for acc in &per_chunk {
        total.merge(acc)?;
    }
    let fit = solve_ne(&total, &design_names, a.rank_tol)?;
    let _ = writeln!(
        stderr,
        "fit: {} rows in {} chunks, rank {} of {}, {:.2}s",
        total.n(),
        per_chunk.len(),
        fit.rank,
        design.len(),
        started.elapsed().as_secs_f64()
    );
    stdout.write_all(fit.table().as_bytes()).map_err(Error::Write)?;
    Ok(0)
}

fn cmd_bench(a: &BenchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let (path, generated) = match &a.input {
        Some(p) => (p.clone(), false),
        None => {
            let p = std::env::temp_dir().join(format!("chunkio-bench-{}-{}.csv", std::process::id(), a.seed));
            let _ = writeln!(stderr, "generating {} MB of synthetic data", a.size_mb);
            std::fs::write(&p, synthetic_csv(a.size_mb << 20, a.seed)).map_err(Error::Write)?;
            (p, true)
        }
    };
    let codes = match (&a.schema, &a.input) {
        (Some(s), _) => s.clone(),
        (None, None) => SYNTHETIC_SCHEMA.to_owned(),
        (None, Some(_)) => "infer".to_owned(),
    };
    let result = (|| {
        let schema = if codes == "infer" {
            let sample = iter_chunks(Source::path(&path), &ChunkerConfig::with_target(1 << 20))?
                .next()
                .transpose()?
                .map(|c| c.data)
                .unwrap_or_default();
            infer_schema(&sample, INFER_RECORDS, b',')?
        } else {
            Schema::new(ColumnType::parse_list(&codes)?)?
        };
        run_bench(&path, &schema, 0, a.trials)
    })();
    if generated {
        let _ = std::fs::remove_file(&path);
    }
    let report = result?;
    writeln!(stdout, "{report}").map_err(Error::Write)?;
    if !report.identical {
        let _ = writeln!(stderr, "error: bulk and naive parsers disagree");
        return Ok(2);
    }
    Ok(0)
}

/// Entry point for the binary: real process arguments and streams.
pub fn main_with_env() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    run(std::env::args_os(), &mut out, &mut err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_specs() {
        assert_eq!(parse_levels("DayOfWeek=1..3").unwrap(), ("DayOfWeek".into(), vec!["1".into(), "2".into(), "3".into()]));
        assert_eq!(parse_levels("g=a,b").unwrap().1, ["a", "b"]);
        assert!(parse_levels("g").is_err());
        assert!(parse_levels("g=3..1").is_err());
    }

    #[test]
    fn byte_flags() {
        assert_eq!(parse_byte(";"), Ok(b';'));
        assert_eq!(parse_byte("\\t"), Ok(b'\t'));
        assert!(parse_byte("ab").is_err());
    }

    #[test]
    fn skipping_records() {
        assert_eq!(skip_records(b"a\nb\nc", 2), (&b"c"[..], 2));
        assert_eq!(skip_records(b"a\n", 5), (&b""[..], 1));
    }

    #[test]
    fn terms_follow_argument_order() {
        let m = Cli::command()
            .try_get_matches_from([
                "chunkio", "mm", "in.csv", "--response", "y", "--factor", "d=1..3", "--hhmm", "t", "--numeric", "x",
                "--factor", "m=1,2", "--out", "o",
            ])
            .unwrap();
        let cli = Cli::from_arg_matches(&m).unwrap();
        let Command::Mm(a) = cli.command else { panic!() };
        let terms = term_order(m.subcommand_matches("mm").unwrap(), &a).unwrap();
        let cols: Vec<&str> = terms.iter().map(Term::column).collect();
        assert_eq!(cols, ["d", "t", "x", "m"]);
    }

    #[test]
    fn help_exits_zero() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["chunkio", "--help"], &mut out, &mut err), 0);
        assert!(String::from_utf8(out).unwrap().contains("parse"));
        assert_eq!(run(["chunkio", "nope"], &mut Vec::new(), &mut err), 1);
    }
}
