//! Parses delimited text into a typed frame, with a declared schema and with
//! an inferred one, and writes it back out.

use chunkio::{format_frame, infer_schema, parse_frame, parse_frame_with_header, ColumnType, FormatOptions, Schema};

const TEXT: &[u8] = b"\
id,when,score,ok,label,blob,z
1,2008-01-03 11:30:00,2.5,TRUE,\"a,b\",ff00,1+2i
2,NA,-0.125,F,plain,,0-1i
3,1987-10-14 06:05:00,NA,NA,NA,0a,NA
";

fn main() -> chunkio::Result<()> {
    let types = ColumnType::parse_list("i,t,r,l,c,b,x")?;
    let schema = Schema::new(types)?.with_quote(Some(b'"'));
    let parsed = parse_frame_with_header(TEXT, &schema)?;
    let frame = &parsed.frame;
    println!("{} rows x {} columns: {:?}", frame.n_rows(), frame.n_cols(), frame.names());
    for col in frame.columns() {
        println!("  {:<6} {:?} nulls={}", col.name, col.column_type(), col.nulls.null_count());
    }

    let out = format_frame(frame, &FormatOptions::default().with_header(true).with_quote(Some(b'"')))?;
    print!("{}", String::from_utf8_lossy(&out));

    // inference looks at a sample of data records
    let inferred = infer_schema(b"1,2.5,x\n2,NA,y\n", 100, b',')?;
    println!("inferred: {}", ColumnType::format_list(inferred.types()));

    // skipped columns never make it into the frame
    let skip = Schema::new(ColumnType::parse_list("s,i")?)?;
    let parsed = parse_frame(b"junk,1\nmore junk,2\n", &skip, 0)?;
    println!("after skip: {:?}, failures: {}", parsed.frame.names(), parsed.stats.total_failures());
    Ok(())
}
