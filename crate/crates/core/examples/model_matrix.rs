//! Turns a frame into a regression design: clock times become minutes after
//! midnight and factors become treatment-coded indicator columns.

use chunkio::model_matrix::normalize_hhmm_column;
use chunkio::{expand, parse_frame_with_header, ColumnType, Schema, Term, TermSpec};

fn main() -> chunkio::Result<()> {
    let text = b"ArrDelay,DayOfWeek,DepTime,DepDelay\n\
                 12,1,130,8\n\
                 -3,2,2359,0\n\
                 NA,3,745,4\n\
                 40,7,1200,35\n";
    let schema = Schema::new(ColumnType::parse_list("i,i,i,i")?)?;
    let mut frame = parse_frame_with_header(text, &schema)?.frame;
    normalize_hhmm_column(&mut frame, "DepTime")?;

    let spec = TermSpec::new(
        "ArrDelay",
        vec![
            Term::factor("DayOfWeek", (1..=7).map(|d| d.to_string())),
            Term::numeric("DepTime"),
            Term::numeric("DepDelay"),
        ],
    );
    let e = expand(&frame, &spec, false)?;
    println!("{}", spec.column_names().join(" "));
    for row in e.matrix.rows() {
        println!("{row:?}");
    }
    println!("{} row(s) dropped for missing values", e.dropped_rows);
    Ok(())
}
