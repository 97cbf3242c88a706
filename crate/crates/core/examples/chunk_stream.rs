//! Streams a file as record-aligned chunks and splits it into byte ranges
//! that each own a disjoint set of records.

use std::io::Write;

use chunkio::chunker::record_start_at_or_after;
use chunkio::{byte_range_splits, iter_chunks, ChunkerConfig, Source};

fn main() -> chunkio::Result<()> {
    let mut file = tempfile::NamedTempFile::new()?;
    for i in 0..10_000 {
        writeln!(file, "{i},row number {i}")?;
    }
    file.flush()?;
    let size = file.as_file().metadata()?.len();

    let cfg = ChunkerConfig::with_target(16 << 10);
    let mut total = 0;
    for (k, chunk) in iter_chunks(Source::path(file.path()), &cfg)?.enumerate() {
        let chunk = chunk?;
        let records = chunk.data.iter().filter(|&&b| b == b'\n').count();
        if k < 3 {
            println!("chunk {k}: {} bytes, {records} records", chunk.len());
        }
        total += records;
    }
    println!("{total} records in {size} bytes");

    // where each of four workers would start reading
    let mut f = std::fs::File::open(file.path())?;
    for (off, len) in byte_range_splits(size, 4) {
        let start = record_start_at_or_after(&mut f, off, size, b'\n')?;
        println!("split [{off}, {}) starts its first record at {start}", off + len);
    }
    Ok(())
}
