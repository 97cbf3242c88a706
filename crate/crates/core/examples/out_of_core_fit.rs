//! Writes a design-matrix checkpoint in pieces, then fits least squares by
//! summing per-chunk cross products.

use chunkio::matrix::parse_matrix_as;
use chunkio::ols::DEFAULT_RANK_TOL;
use chunkio::writer::{read_names, Checkpoint};
use chunkio::{chunk_apply, solve_ne, ApplyConfig, ChunkerConfig, DenseMatrix, MatrixOptions, Mode, NormalEqAccumulator, Source};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("design.io");
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    // y = 1 + 2a - 0.5b + noise; column "b2" duplicates b and will be aliased
    let mut ck = Checkpoint::create(&path)?;
    ck.set_names(["(Intercept)", "y", "a", "b", "b2"].map(String::from).to_vec());
    for _ in 0..20 {
        let mut rows = Vec::new();
        for _ in 0..5_000 {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..10.0));
            let y = 1.0 + 2.0 * a - 0.5 * b + rng.gen_range(-0.1..0.1);
            rows.push(vec![1.0, y, a, b, b]);
        }
        ck.append(&DenseMatrix::from_rows(&rows)?)?;
    }
    ck.finish()?;

    let names = read_names(&path)?;
    let design: Vec<usize> = vec![0, 2, 3, 4];
    let design_names: Vec<String> = design.iter().map(|&i| names[i].clone()).collect();
    let cfg = ApplyConfig::new(Mode::Pipeline(2), ChunkerConfig::with_target(256 << 10));
    let parts = chunk_apply(
        Source::path(&path),
        |chunk| -> chunkio::Result<NormalEqAccumulator> {
            let m = parse_matrix_as::<f64>(chunk, &MatrixOptions::default())?.matrix;
            let mut acc = NormalEqAccumulator::new(design.len());
            acc.accumulate_design(&m, &design, 1)?;
            Ok(acc)
        },
        &cfg,
    )?;
    let mut total = NormalEqAccumulator::new(design.len());
    for p in &parts {
        total.merge(p)?;
    }
    let fit = solve_ne(&total, &design_names, DEFAULT_RANK_TOL)?;
    println!("{} chunks, {} rows", parts.len(), total.n());
    print!("{}", fit.table());
    Ok(())
}
