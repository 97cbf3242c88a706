//! Compares the bulk parser with a byte-at-a-time reference parser on
//! synthetic flight-like records.

use chunkio::bench::{run_bench, synthetic_csv, SYNTHETIC_SCHEMA};
use chunkio::{ColumnType, Schema};

fn main() -> chunkio::Result<()> {
    let mb: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let file = tempfile::NamedTempFile::new()?;
    std::fs::write(file.path(), synthetic_csv(mb << 20, 42))?;
    let schema = Schema::new(ColumnType::parse_list(SYNTHETIC_SCHEMA)?)?;
    let report = run_bench(file.path(), &schema, 0, 3)?;
    println!("{report}");
    Ok(())
}
