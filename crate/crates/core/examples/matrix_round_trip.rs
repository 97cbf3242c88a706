//! Reads delimited numbers straight into a dense row-major matrix and
//! writes it back with shortest round-trip formatting.

use chunkio::matrix::{parse_matrix_as, AnyMatrix};
use chunkio::{format_matrix, parse_matrix, ColumnType, DenseMatrix, MatrixOptions};

fn main() -> chunkio::Result<()> {
    let m = DenseMatrix::new(2, 3, vec![0.1, 1e-300, f64::NAN, -0.0, 1.0 / 3.0, f64::INFINITY])?;
    let text = format_matrix(&m, b',');
    print!("{}", String::from_utf8_lossy(&text));

    let back = parse_matrix_as::<f64>(&text, &MatrixOptions::default())?;
    let same = back.matrix.data().iter().zip(m.data()).all(|(a, b)| a.to_bits() == b.to_bits() || a.is_nan() && b.is_nan());
    println!("bit-identical after round trip: {same}");

    let tabbed = b"1\t2\tNA\n4\tx\t6\n";
    let parsed = parse_matrix(tabbed, ColumnType::Integer, &MatrixOptions::default().with_sep(b'\t'))?;
    if let AnyMatrix::Integer(m) = &parsed.matrix {
        println!("integer rows: {:?}, coercion failures: {}", m.rows().collect::<Vec<_>>(), parsed.failures);
    }
    Ok(())
}
