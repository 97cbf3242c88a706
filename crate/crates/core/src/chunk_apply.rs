//! Runs a function over every chunk of a source and collects the results in
//! chunk order.
//!
//! Three strategies are available:
//!
//! * [`Mode::Sequential`] reads and computes on the calling thread.
//! * [`Mode::Pipeline`] has the calling thread do all reading while a pool of
//!   workers computes. Once every worker is busy the reader fetches exactly
//!   one chunk ahead, then blocks on the oldest outstanding result.
//! * [`Mode::WorkersRead`] splits a file into byte ranges and lets each
//!   worker read and compute its own range.
//!
//! Chunk boundaries are the same in every mode, so a pure function yields
//! the same ordered results whichever strategy runs it.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, SyncSender};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use crate::chunker::{byte_range_splits, record_start_at_or_after, Chunk, Chunker, ChunkerConfig};
use crate::error::{BoxError, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Pipeline(usize),
    WorkersRead(usize),
}

impl Mode {
    pub fn parallelism(self) -> usize {
        match self {
            Mode::Sequential => 1,
            Mode::Pipeline(p) | Mode::WorkersRead(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplyConfig {
    pub mode: Mode,
    pub chunker: ChunkerConfig,
}

impl ApplyConfig {
    pub fn new(mode: Mode, chunker: ChunkerConfig) -> Self {
        Self { mode, chunker }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode.parallelism() == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        self.chunker.validate()
    }
}

pub enum Source<'a> {
    Path(PathBuf),
    Reader(Box<dyn Read + Send + 'a>),
}

impl<'a> Source<'a> {
    pub fn path(p: impl Into<PathBuf>) -> Self {
        Source::Path(p.into())
    }

    pub fn reader(r: impl Read + Send + 'a) -> Self {
        Source::Reader(Box::new(r))
    }

    fn open(self) -> Result<Box<dyn Read + Send + 'a>> {
        Ok(match self {
            Source::Path(p) => Box::new(File::open(p)?),
            Source::Reader(r) => r,
        })
    }
}

/// Pull-based chunk iterator over a source.
pub fn iter_chunks<'a>(source: Source<'a>, cfg: &ChunkerConfig) -> Result<Chunker<Box<dyn Read + Send + 'a>>> {
    Chunker::new(source.open()?, *cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ReadStart,
    /// End of a read; `seq` is `None` when the read hit the end of input.
    ReadEnd,
    Dispatch,
    ComputeStart,
    ComputeEnd,
    Collect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub at: Duration,
    pub kind: EventKind,
    pub seq: Option<u64>,
    /// Counters as they stand after this event.
    pub reads_in_flight: usize,
    pub computes_in_flight: usize,
}

/// Timestamped record of reads, dispatches, computations and collections.
#[derive(Debug)]
pub struct EventLog {
    start: Instant,
    inner: Mutex<LogState>,
}

#[derive(Debug, Default)]
struct LogState {
    events: Vec<Event>,
    reads: usize,
    computes: usize,
}

impl Default for EventLog {
    fn default() -> Self {
        Self::new()
    }
}

impl EventLog {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            inner: Mutex::new(LogState::default()),
        }
    }

    fn record(&self, kind: EventKind, seq: Option<u64>) {
        let mut s = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        match kind {
            EventKind::ReadStart => s.reads += 1,
            EventKind::ReadEnd => s.reads -= 1,
            EventKind::ComputeStart => s.computes += 1,
            EventKind::ComputeEnd => s.computes -= 1,
            EventKind::Dispatch | EventKind::Collect => {}
        }
        let ev = Event {
            at: self.start.elapsed(),
            kind,
            seq,
            reads_in_flight: s.reads,
            computes_in_flight: s.computes,
        };
        s.events.push(ev);
    }

    pub fn events(&self) -> Vec<Event> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).events.clone()
    }

    pub fn max_reads_in_flight(&self) -> usize {
        self.events().iter().map(|e| e.reads_in_flight).max().unwrap_or(0)
    }

    pub fn max_computes_in_flight(&self) -> usize {
        self.events().iter().map(|e| e.computes_in_flight).max().unwrap_or(0)
    }
}

fn note(log: Option<&EventLog>, kind: EventKind, seq: Option<u64>) {
    if let Some(log) = log {
        log.record(kind, seq);
    }
}

/// Applies `f` to every chunk of `source` and returns the results in chunk
/// order.
///
/// The first failing chunk aborts the run with [`Error::WorkerFailure`]
/// carrying its sequence number; a panic inside `f` is reported the same
/// way.
pub fn chunk_apply<T, E, F>(source: Source<'_>, f: F, cfg: &ApplyConfig) -> Result<Vec<T>>
where
    T: Send,
    E: Into<BoxError>,
    F: Fn(&[u8]) -> std::result::Result<T, E> + Sync,
{
    run(source, &f, cfg, None)
}

/// [`chunk_apply`] that also records every scheduling event into `log`.
pub fn chunk_apply_logged<T, E, F>(source: Source<'_>, f: F, cfg: &ApplyConfig, log: &EventLog) -> Result<Vec<T>>
where
    T: Send,
    E: Into<BoxError>,
    F: Fn(&[u8]) -> std::result::Result<T, E> + Sync,
{
    run(source, &f, cfg, Some(log))
}

fn run<T, E, F>(source: Source<'_>, f: &F, cfg: &ApplyConfig, log: Option<&EventLog>) -> Result<Vec<T>>
where
    T: Send,
    E: Into<BoxError>,
    F: Fn(&[u8]) -> std::result::Result<T, E> + Sync,
{
    cfg.validate()?;
    match cfg.mode {
        Mode::Sequential => sequential(source, f, &cfg.chunker, log),
        Mode::Pipeline(p) => pipeline(source, f, &cfg.chunker, p, log),
        Mode::WorkersRead(p) => match source {
            Source::Path(path) => workers_read(&path, f, &cfg.chunker, p, log),
            Source::Reader(_) => Err(Error::NotSeekable),
        },
    }
}

/// Calls `f`, turning an error or a panic into a boxed cause.
fn call<T, E, F>(f: &F, data: &[u8]) -> std::result::Result<T, BoxError>
where
    E: Into<BoxError>,
    F: Fn(&[u8]) -> std::result::Result<T, E>,
{
    match catch_unwind(AssertUnwindSafe(|| f(data))) {
        Ok(r) => r.map_err(Into::into),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| (*s).to_owned())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_owned());
            Err(format!("chunk function panicked: {msg}").into())
        }
    }
}

fn read_chunk<R: Read>(chunker: &mut Chunker<R>, log: Option<&EventLog>) -> Result<Option<Chunk>> {
    note(log, EventKind::ReadStart, None);
    let next = chunker.next_chunk();
    let seq = next.as_ref().ok().and_then(|c| c.as_ref().map(|c| c.seq));
    note(log, EventKind::ReadEnd, seq);
    next
}

fn sequential<T, E, F>(source: Source<'_>, f: &F, cfg: &ChunkerConfig, log: Option<&EventLog>) -> Result<Vec<T>>
where
    E: Into<BoxError>,
    F: Fn(&[u8]) -> std::result::Result<T, E>,
{
    let mut chunker = iter_chunks(source, cfg)?;
    let mut out = Vec::new();
    while let Some(chunk) = read_chunk(&mut chunker, log)? {
        let seq = Some(chunk.seq);
        note(log, EventKind::Dispatch, seq);
        note(log, EventKind::ComputeStart, seq);
        let r = call(f, &chunk.data);
        note(log, EventKind::ComputeEnd, seq);
        note(log, EventKind::Collect, seq);
        out.push(r.map_err(|cause| Error::WorkerFailure { seq: chunk.seq, cause })?);
    }
    Ok(out)
}

type Reply<T> = std::result::Result<T, BoxError>;

struct Job<T> {
    chunk: Chunk,
    reply: SyncSender<Reply<T>>,
}

fn pipeline<T, E, F>(source: Source<'_>, f: &F, cfg: &ChunkerConfig, p: usize, log: Option<&EventLog>) -> Result<Vec<T>>
where
    T: Send,
    E: Into<BoxError>,
    F: Fn(&[u8]) -> std::result::Result<T, E> + Sync,
{
    let mut chunker = iter_chunks(source, cfg)?;
    let (job_tx, job_rx) = mpsc::channel::<Job<T>>();
    let job_rx = Mutex::new(job_rx);

    thread::scope(|scope| {
        for _ in 0..p {
            let job_rx = &job_rx;
            scope.spawn(move || loop {
                let job = match job_rx.lock().unwrap_or_else(|e| e.into_inner()).recv() {
                    Ok(job) => job,
                    Err(_) => break,
                };
                let seq = Some(job.chunk.seq);
                note(log, EventKind::ComputeStart, seq);
                let r = call(f, &job.chunk.data);
                note(log, EventKind::ComputeEnd, seq);
                // The master may have given up after an earlier failure.
                let _ = job.reply.send(r);
            });
        }

        let result = master(&mut chunker, &job_tx, p, log);
        drop(job_tx);
        result
    })
}

fn master<R: Read, T>(
    chunker: &mut Chunker<R>,
    jobs: &mpsc::Sender<Job<T>>,
    p: usize,
    log: Option<&EventLog>,
) -> Result<Vec<T>> {
    let mut in_flight: VecDeque<(u64, Receiver<Reply<T>>)> = VecDeque::with_capacity(p);
    let mut out = Vec::new();
    let collect = |in_flight: &mut VecDeque<(u64, Receiver<Reply<T>>)>, out: &mut Vec<T>| -> Result<()> {
        let (seq, rx) = in_flight.pop_front().expect("collect with nothing in flight");
        let reply = rx.recv().unwrap_or_else(|_| Err("worker exited without replying".into()));
        note(log, EventKind::Collect, Some(seq));
        out.push(reply.map_err(|cause| Error::WorkerFailure { seq, cause })?);
        Ok(())
    };
    let dispatch = |chunk: Chunk, in_flight: &mut VecDeque<(u64, Receiver<Reply<T>>)>| {
        let (tx, rx) = mpsc::sync_channel(1);
        let seq = chunk.seq;
        note(log, EventKind::Dispatch, Some(seq));
        jobs.send(Job { chunk, reply: tx }).expect("worker pool is alive");
        in_flight.push_back((seq, rx));
    };

    while let Some(chunk) = read_chunk(chunker, log)? {
        if in_flight.len() == p {
            // `chunk` is the one-ahead prefetch; make room for it.
            collect(&mut in_flight, &mut out)?;
        }
        dispatch(chunk, &mut in_flight);
    }
    while !in_flight.is_empty() {
        collect(&mut in_flight, &mut out)?;
    }
    Ok(out)
}

enum SplitOutcome<T> {
    Done(Vec<T>),
    Failed { local_seq: u64, cause: Error },
    Abandoned,
}

fn workers_read<T, E, F>(path: &Path, f: &F, cfg: &ChunkerConfig, p: usize, log: Option<&EventLog>) -> Result<Vec<T>>
where
    T: Send,
    E: Into<BoxError>,
    F: Fn(&[u8]) -> std::result::Result<T, E> + Sync,
{
    let size = std::fs::metadata(path)?.len();
    let target = cfg.target_bytes as u64;
    // Split on multiples of the chunk target so each split produces exactly
    // the chunks a sequential pass would.
    let blocks = size.div_ceil(target);
    let splits: Vec<(u64, u64)> = byte_range_splits(blocks, p)
        .into_iter()
        .map(|(o, l)| ((o * target).min(size), (l * target).min(size - (o * target).min(size))))
        .collect();
    let first_failure = AtomicUsize::new(usize::MAX);

    let outcomes: Vec<SplitOutcome<T>> = thread::scope(|scope| {
        let handles: Vec<_> = splits
            .iter()
            .enumerate()
            .map(|(i, &(offset, len))| {
                let first_failure = &first_failure;
                scope.spawn(move || {
                    let outcome = read_split(path, size, offset, len, cfg, f, log, || {
                        first_failure.load(Ordering::Relaxed) < i
                    });
                    if matches!(outcome, SplitOutcome::Failed { .. }) {
                        first_failure.fetch_min(i, Ordering::Relaxed);
                    }
                    outcome
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| SplitOutcome::Failed {
                    local_seq: 0,
                    cause: Error::Config("split reader panicked".into()),
                })
            })
            .collect()
    });

    let mut out = Vec::new();
    for outcome in outcomes {
        match outcome {
            SplitOutcome::Done(v) => out.extend(v),
            SplitOutcome::Failed { local_seq, cause } => {
                let seq = out.len() as u64 + local_seq;
                return Err(match cause {
                    Error::WorkerFailure { cause, .. } => Error::WorkerFailure { seq, cause },
                    other => other,
                });
            }
            SplitOutcome::Abandoned => unreachable!("only splits after a failure are abandoned"),
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn read_split<T, E, F>(
    path: &Path,
    size: u64,
    offset: u64,
    len: u64,
    cfg: &ChunkerConfig,
    f: &F,
    log: Option<&EventLog>,
    abandon: impl Fn() -> bool,
) -> SplitOutcome<T>
where
    E: Into<BoxError>,
    F: Fn(&[u8]) -> std::result::Result<T, E>,
{
    let opened = (|| -> Result<_> {
        let mut file = File::open(path)?;
        let start = record_start_at_or_after(&mut file, offset, size, cfg.record_sep)?;
        let end = record_start_at_or_after(&mut file, offset + len, size, cfg.record_sep)?;
        file.seek(SeekFrom::Start(start))?;
        Chunker::starting_at(file.take(end.saturating_sub(start)), *cfg, start)
    })();
    let mut chunker = match opened {
        Ok(c) => c,
        Err(cause) => return SplitOutcome::Failed { local_seq: 0, cause },
    };
    let mut out = Vec::new();
    loop {
        if abandon() {
            return SplitOutcome::Abandoned;
        }
        let chunk = match read_chunk(&mut chunker, log) {
            Ok(Some(c)) => c,
            Ok(None) => return SplitOutcome::Done(out),
            Err(cause) => {
                return SplitOutcome::Failed {
                    local_seq: out.len() as u64,
                    cause,
                }
            }
        };
        let seq = Some(chunk.seq);
        note(log, EventKind::ComputeStart, seq);
        let r = call(f, &chunk.data);
        note(log, EventKind::ComputeEnd, seq);
        match r {
            Ok(v) => out.push(v),
            Err(cause) => {
                return SplitOutcome::Failed {
                    local_seq: chunk.seq,
                    cause: Error::WorkerFailure { seq: chunk.seq, cause },
                }
            }
        }
    }
}
