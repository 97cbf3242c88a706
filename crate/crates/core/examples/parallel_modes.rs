//! Runs the same per-chunk function sequentially, as a prefetching pipeline,
//! and with workers reading their own byte ranges, and prints the pipeline's
//! event log.

use std::io::Write;
use std::time::{Duration, Instant};

use chunkio::chunk_apply::{chunk_apply_logged, EventLog};
use chunkio::{chunk_apply, ApplyConfig, ChunkerConfig, Mode, Source};

fn count_lines(chunk: &[u8]) -> Result<usize, chunkio::Error> {
    std::thread::sleep(Duration::from_millis(5));
    Ok(chunk.iter().filter(|&&b| b == b'\n').count())
}

fn main() -> chunkio::Result<()> {
    let mut file = tempfile::NamedTempFile::new()?;
    for i in 0..50_000 {
        writeln!(file, "{i},{}", i * 7)?;
    }
    file.flush()?;
    let chunker = ChunkerConfig::with_target(32 << 10);

    for mode in [Mode::Sequential, Mode::Pipeline(4), Mode::WorkersRead(4)] {
        let t = Instant::now();
        let counts = chunk_apply(Source::path(file.path()), count_lines, &ApplyConfig::new(mode, chunker))?;
        println!(
            "{mode:?}: {} chunks, {} lines, {:.0} ms",
            counts.len(),
            counts.iter().sum::<usize>(),
            t.elapsed().as_secs_f64() * 1e3
        );
    }

    let log = EventLog::new();
    let cfg = ApplyConfig::new(Mode::Pipeline(2), ChunkerConfig::with_target(200 << 10));
    chunk_apply_logged(Source::path(file.path()), count_lines, &cfg, &log)?;
    for ev in log.events().iter().take(16) {
        println!(
            "{:>8.2} ms {:<12} seq={:<4} reads={} computes={}",
            ev.at.as_secs_f64() * 1e3,
            format!("{:?}", ev.kind),
            ev.seq.map_or("-".into(), |s| s.to_string()),
            ev.reads_in_flight,
            ev.computes_in_flight
        );
    }
    println!("max reads in flight {}, max computes in flight {}", log.max_reads_in_flight(), log.max_computes_in_flight());
    Ok(())
}
