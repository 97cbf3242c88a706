mod common;

use std::fs;
use std::path::Path;

use chunkio::cli::run;
use chunkio::writer::{partial_marker_path, read_names};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn chunkio(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("chunkio").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn parse_writes_canonical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    fs::write(&input, "1,a\n").unwrap();
    let (code, out, err) = chunkio(&["parse", p(&input), "--schema", "i,c", "--out", "-"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out, "1,a\n");
    assert!(err.contains("rows: 1"), "{err}");
    assert!(err.contains("MB/s"));
}

#[test]
fn parse_reports_inferred_schema() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    fs::write(&input, "n,x,s\n1,2.5,a\n2,NA,b\n").unwrap();
    let (code, out, err) = chunkio(&["parse", p(&input), "--schema", "infer", "--header"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("schema: i,r,c"), "{err}");
    assert_eq!(out, "n,x,s\n1,2.5,a\n2,NA,b\n");
}

#[test]
fn airline_rows_match_line_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("2008.csv");
    let data = airline_csv(&mut ChaCha8Rng::seed_from_u64(1), 3000, 2008);
    fs::write(&input, &data).unwrap();
    let lines = data.iter().filter(|&&b| b == b'\n').count();
    let (code, _, err) = chunkio(&[
        "parse", p(&input), "--schema", AIRLINE_TYPES, "--header", "--out", p(&dir.path().join("out.csv")),
        "--chunk-bytes", "20000",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains(&format!("rows: {}", lines - 1)), "{err}");

    let (code, _, err) = chunkio(&["parse", p(&input), "--header", "--out", p(&dir.path().join("o2.csv"))]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains(&format!("schema: {AIRLINE_TYPES}\n")), "{err}");
}

#[test]
fn parse_output_is_a_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    fs::write(&input, "id,v,name\n1,+2.50,\"x,y\"\n02,1e3,NA\n3,,z\n").unwrap();
    let once = dir.path().join("once.csv");
    let twice = dir.path().join("twice.csv");
    let args = |i: &Path, o: &Path| {
        let (code, _, err) =
            chunkio(&["parse", p(i), "--schema", "i,r,c", "--header", "--quote", "\"", "--out", p(o)]);
        assert_eq!(code, 0, "{err}");
    };
    args(&input, &once);
    args(&once, &twice);
    assert_eq!(fs::read(&once).unwrap(), fs::read(&twice).unwrap());
    assert_eq!(fs::read_to_string(&once).unwrap(), "id,v,name\n1,2.5,\"x,y\"\n2,1000,NA\n3,NA,z\n");
}

#[test]
fn strict_violations_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    fs::write(&input, "1\nx\n").unwrap();
    let (code, _, err) = chunkio(&["parse", p(&input), "--schema", "i", "--strict"]);
    assert_eq!(code, 2, "{err}");
    let (code, _, _) = chunkio(&["parse", p(&input), "--schema", "i"]);
    assert_eq!(code, 0);
}

#[test]
fn input_errors_exit_one() {
    let (code, _, err) = chunkio(&["parse", "/nonexistent/file.csv", "--schema", "i"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error:"));
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    fs::write(&input, "1\n").unwrap();
    assert_eq!(chunkio(&["parse", p(&input), "--schema", "q"]).0, 1);
}

fn airline_mm_args<'a>(inputs: &[&'a str], out: &'a str) -> Vec<&'a str> {
    let mut args = vec!["mm"];
    args.extend_from_slice(inputs);
    args.extend_from_slice(&[
        "--header", "--schema", AIRLINE_TYPES, "--response", "ArrDelay", "--factor", "DayOfWeek=1..7", "--hhmm",
        "DepTime", "--numeric", "DepDelay", "--factor", "Month=1..12", "--out", out, "--chunk-bytes", "50000",
    ]);
    args
}

#[test]
fn model_matrix_checkpoint_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("1990.csv");
    fs::write(&input, airline_csv(&mut ChaCha8Rng::seed_from_u64(2), 2000, 1990)).unwrap();
    let out = dir.path().join("airline_mm.io");
    let (code, _, err) = chunkio(&airline_mm_args(&[p(&input)], p(&out)));
    assert_eq!(code, 0, "{err}");
    let mut expected = vec!["(Intercept)".to_string(), "ArrDelay".into()];
    expected.extend((2..=7).map(|d| format!("DayOfWeek{d}")));
    expected.push("DepTime".into());
    expected.push("DepDelay".into());
    expected.extend((2..=12).map(|m| format!("Month{m}")));
    assert_eq!(read_names(&out).unwrap(), expected);
    assert!(!partial_marker_path(&out).exists());
    assert!(err.contains("dropped for nulls"), "{err}");
}

#[test]
fn toy_checkpoint_and_exact_fit() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("toy.csv");
    fs::write(&input, "y,x\n2,1\n4,2\n").unwrap();
    let ck = dir.path().join("toy.io");
    let (code, _, err) =
        chunkio(&["mm", p(&input), "--header", "--response", "y", "--numeric", "x", "--out", p(&ck)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(fs::read_to_string(&ck).unwrap(), "1,2,1\n1,4,2\n");
    assert_eq!(read_names(&ck).unwrap(), ["(Intercept)", "y", "x"]);

    let (code, out, err) = chunkio(&["fit", p(&ck), "--response", "y", "--mode", "seq"]);
    assert_eq!(code, 0, "{err}");
    let coef = |name: &str| -> f64 {
        out.lines()
            .find_map(|l| {
                let mut parts = l.split_whitespace();
                (parts.next() == Some(name)).then(|| parts.next().unwrap().parse().unwrap())
            })
            .unwrap()
    };
    assert!((coef("x") - 2.0).abs() < 1e-10, "{out}");
    assert!(coef("(Intercept)").abs() < 1e-10, "{out}");
}

#[test]
fn checkpoint_of_two_files_is_the_concatenation() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, airline_csv(&mut ChaCha8Rng::seed_from_u64(3), 700, 2001)).unwrap();
    fs::write(&b, airline_csv(&mut ChaCha8Rng::seed_from_u64(4), 500, 2002)).unwrap();
    let both = dir.path().join("both.io");
    let only_a = dir.path().join("a.io");
    let only_b = dir.path().join("b.io");
    for (inputs, out) in [(vec![p(&a), p(&b)], &both), (vec![p(&a)], &only_a), (vec![p(&b)], &only_b)] {
        let (code, _, err) = chunkio(&airline_mm_args(&inputs, p(out)));
        assert_eq!(code, 0, "{err}");
    }
    let mut appended = fs::read(&only_a).unwrap();
    appended.extend(fs::read(&only_b).unwrap());
    assert_eq!(fs::read(&both).unwrap(), appended);
}

#[test]
fn failed_mm_leaves_partial_marker() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("a.csv");
    fs::write(&input, "y,g\n1,a\n2,zzz\n").unwrap();
    let out = dir.path().join("bad.io");
    let (code, _, err) =
        chunkio(&["mm", p(&input), "--header", "--response", "y", "--factor", "g=a,b", "--out", p(&out)]);
    assert_eq!(code, 1);
    assert!(err.contains("zzz"), "{err}");
    assert!(partial_marker_path(&out).exists());

    let (code, _, err) = chunkio(&[
        "mm", p(&input), "--header", "--response", "y", "--factor", "g=a,b", "--lenient", "--out", p(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("1 dropped for unknown levels"), "{err}");
    assert!(!partial_marker_path(&out).exists());
}

#[test]
fn fit_output_is_identical_across_modes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("2005.csv");
    fs::write(&input, airline_csv(&mut ChaCha8Rng::seed_from_u64(5), 20_000, 2005)).unwrap();
    let ck = dir.path().join("mm.io");
    let (code, _, err) = chunkio(&airline_mm_args(&[p(&input)], p(&ck)));
    assert_eq!(code, 0, "{err}");
    let mut outputs = Vec::new();
    for (mode, par) in [("seq", "1"), ("pipeline", "1"), ("pipeline", "8"), ("split", "8"), ("split", "3")] {
        let (code, out, err) =
            chunkio(&["fit", p(&ck), "--response", "ArrDelay", "--mode", mode, "--parallel", par, "--chunk-bytes", "40000"]);
        assert_eq!(code, 0, "{err}");
        outputs.push(out);
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    assert!(outputs[0].contains("DayOfWeek2"));
    assert!(!outputs[0].contains("aliased"));
}

#[test]
fn fit_rejects_unknown_response_and_bad_width() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("x.io");
    fs::write(&ck, "1,2\n1,3,4\n").unwrap();
    fs::write(dir.path().join("x.io.names"), "a\nb\n").unwrap();
    assert_eq!(chunkio(&["fit", p(&ck), "--response", "zz"]).0, 1);
    let (code, _, err) = chunkio(&["fit", p(&ck), "--response", "b"]);
    assert_eq!(code, 1);
    assert!(err.contains("error"), "{err}");
}

#[test]
fn bench_smoke() {
    let (code, out, err) = chunkio(&["bench", "--size-mb", "1", "--trials", "1"]);
    assert_eq!(code, 0, "{err}");
    for label in ["raw read", "bulk", "naive", "naive/bulk", "identical"] {
        assert!(out.contains(label), "{out}");
    }
}
