#![allow(dead_code)]

use chunkio::frame::{ByteStrings, NullMask};
use chunkio::model_matrix::Term;
use chunkio::{Column, ColumnData, ColumnType, Frame, TermSpec};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub const VALUE_TYPES: [ColumnType; 7] = [
    ColumnType::Logical,
    ColumnType::Integer,
    ColumnType::Real,
    ColumnType::Character,
    ColumnType::Bytes,
    ColumnType::Complex,
    ColumnType::Timestamp,
];

/// Any finite or non-finite double, biased toward awkward values.
pub fn awkward_f64(rng: &mut impl Rng) -> f64 {
    match rng.gen_range(0..10) {
        0 => [0.0, -0.0, f64::NAN, f64::INFINITY, f64::NEG_INFINITY, f64::MIN_POSITIVE, 5e-324, f64::MAX][rng.gen_range(0..8)],
        1 => f64::from_bits(rng.gen()),
        2 => rng.gen_range(-1e6..1e6_f64).round(),
        _ => rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-20..20)),
    }
}

fn finite(rng: &mut impl Rng) -> f64 {
    loop {
        let x = awkward_f64(rng);
        if x.is_finite() {
            return x;
        }
    }
}

fn text(rng: &mut impl Rng) -> Vec<u8> {
    const ALPHABET: &[u8] = b"ab ,\"\rNA\t;xyz019.-";
    if rng.gen_ratio(1, 10) {
        return [&b""[..], b"NA", b"\"", b",", b"TRUE"][rng.gen_range(0..5)].to_vec();
    }
    let len = rng.gen_range(0..8);
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect()
}

/// Random column of type `ty` with roughly 10% nulls.
pub fn random_column(rng: &mut impl Rng, name: &str, ty: ColumnType, rows: usize) -> Column {
    let nulls: Vec<bool> = (0..rows).map(|_| rng.gen_ratio(1, 10)).collect();
    let data = match ty {
        ColumnType::Logical => ColumnData::Logical((0..rows).map(|_| rng.gen()).collect()),
        ColumnType::Integer => ColumnData::Integer(
            (0..rows)
                .map(|_| match rng.gen_range(0..8) {
                    0 => [i64::MIN, i64::MAX, 0, -1][rng.gen_range(0..4)],
                    1 => rng.gen(),
                    _ => rng.gen_range(-10_000..10_000),
                })
                .collect(),
        ),
        ColumnType::Real => ColumnData::Real((0..rows).map(|_| awkward_f64(rng)).collect()),
        ColumnType::Character => ColumnData::Character((0..rows).map(|_| text(rng)).collect::<ByteStrings>()),
        ColumnType::Bytes => ColumnData::Bytes(
            (0..rows)
                .map(|_| (0..rng.gen_range(0..6)).map(|_| rng.gen::<u8>()).collect::<Vec<u8>>())
                .collect::<ByteStrings>(),
        ),
        ColumnType::Complex => {
            ColumnData::Complex((0..rows).map(|_| Complex64::new(awkward_f64(rng), awkward_f64(rng))).collect())
        }
        ColumnType::Timestamp => ColumnData::Timestamp(
            (0..rows)
                .map(|_| match rng.gen_range(0..3) {
                    0 => rng.gen_range(-62_167_219_200i64..253_402_300_800) as f64,
                    1 => rng.gen_range(0..2_000_000_000i64) as f64 + rng.gen_range(0..1000) as f64 / 1000.0,
                    _ => finite(rng),
                })
                .collect(),
        ),
        ColumnType::Skip => unreachable!(),
    };
    Column::new(name, data, NullMask::from_bools(nulls)).unwrap()
}

/// Random frame over the given types, columns named `c0`, `c1`, ...
pub fn random_frame(rng: &mut impl Rng, types: &[ColumnType], rows: usize) -> Frame {
    let cols = types
        .iter()
        .enumerate()
        .map(|(i, ty)| random_column(rng, &format!("c{i}"), *ty, rows))
        .collect();
    Frame::new(cols).unwrap()
}

pub fn random_types(rng: &mut impl Rng) -> Vec<ColumnType> {
    let n = rng.gen_range(1..=9);
    let mut types: Vec<ColumnType> = (0..n).map(|_| VALUE_TYPES[rng.gen_range(0..VALUE_TYPES.len())]).collect();
    // make sure every type shows up regularly
    let k = rng.gen_range(0..VALUE_TYPES.len());
    types.push(VALUE_TYPES[k]);
    types
}

/// Standard normal via Box-Muller.
pub fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Row-major `n × d` Gaussian matrix with a leading column of ones.
pub fn random_design(rng: &mut impl Rng, n: usize, d: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n {
        x.push(1.0);
        x.extend((1..d).map(|_| normal(rng)));
    }
    x
}

/// Least squares by Householder QR on the full design.
pub fn qr_least_squares(x: &[f64], n: usize, d: usize, y: &[f64]) -> Vec<f64> {
    let xm = DMatrix::from_row_slice(n, d, x);
    let qr = xm.qr();
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let r = qr.r();
    let beta = r.solve_upper_triangular(&qty).expect("full rank");
    beta.iter().copied().collect()
}

/// `XᵀX` computed densely in one pass.
pub fn dense_xtx(x: &[f64], n: usize, d: usize) -> DMatrix<f64> {
    let xm = DMatrix::from_row_slice(n, d, x);
    xm.transpose() * xm
}

pub fn rel_frobenius(a: &[f64], b: &DMatrix<f64>) -> f64 {
    let d = b.nrows();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..d {
        for j in 0..d {
            let diff = a[i * d + j] - b[(i, j)];
            num += diff * diff;
            den += b[(i, j)] * b[(i, j)];
        }
    }
    (num / den).sqrt()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

/// Reference design matrix built cell by cell: full one-hot per factor,
/// then the baseline column removed.
pub fn one_hot_oracle(frame: &Frame, spec: &TermSpec) -> (Vec<String>, Vec<Vec<f64>>) {
    let cell = |col: &Column, r: usize| -> String {
        match &col.data {
            ColumnData::Character(s) => String::from_utf8(s.get(r).to_vec()).unwrap(),
            ColumnData::Integer(v) => v[r].to_string(),
            _ => panic!("not a factor column"),
        }
    };
    let mut names = Vec::new();
    if spec.intercept {
        names.push("(Intercept)".to_string());
    }
    names.push(spec.response.clone());
    for t in &spec.terms {
        match t {
            Term::Numeric(c) => names.push(c.clone()),
            Term::Factor { column, levels } => {
                for l in levels.iter().skip(1) {
                    names.push(format!("{column}{l}"));
                }
            }
        }
    }
    let mut rows = Vec::new();
    'rows: for r in 0..frame.n_rows() {
        let mut row = Vec::new();
        if spec.intercept {
            row.push(1.0);
        }
        let y = frame.column(&spec.response).unwrap();
        if y.is_null(r) {
            continue;
        }
        row.push(y.get_f64(r).unwrap());
        for t in &spec.terms {
            let col = frame.column(t.column()).unwrap();
            if col.is_null(r) {
                continue 'rows;
            }
            match t {
                Term::Numeric(_) => row.push(col.get_f64(r).unwrap()),
                Term::Factor { levels, .. } => {
                    let v = cell(col, r);
                    let full: Vec<f64> = levels.iter().map(|l| if *l == v { 1.0 } else { 0.0 }).collect();
                    assert_eq!(full.iter().sum::<f64>(), 1.0, "value {v} not a level");
                    row.extend_from_slice(&full[1..]);
                }
            }
        }
        rows.push(row);
    }
    (names, rows)
}

pub const AIRLINE_HEADER: &str = "Year,Month,DayofMonth,DayOfWeek,DepTime,CRSDepTime,ArrTime,CRSArrTime,UniqueCarrier,FlightNum,TailNum,ActualElapsedTime,CRSElapsedTime,AirTime,ArrDelay,DepDelay,Origin,Dest,Distance,TaxiIn,TaxiOut,Cancelled,CancellationCode,Diverted,CarrierDelay,WeatherDelay,NASDelay,SecurityDelay,LateAircraftDelay";

/// Column types of the airline files, in letter form.
pub const AIRLINE_TYPES: &str = "i,i,i,i,i,i,i,i,c,i,c,i,i,i,i,i,c,c,i,i,i,i,c,i,i,i,i,i,i";

/// Airline-style CSV with header. About 3% of flights are cancelled, which
/// leaves their times and delays `NA` and fills the cancellation code.
pub fn airline_csv(rng: &mut impl Rng, rows: usize, year: i64) -> Vec<u8> {
    use std::fmt::Write;
    const CARRIERS: [&str; 5] = ["WN", "AA", "DL", "UA", "US"];
    const AIRPORTS: [&str; 6] = ["ORD", "ATL", "DFW", "LAX", "IAD", "SFO"];
    let mut s = String::new();
    s.push_str(AIRLINE_HEADER);
    s.push('\n');
    for _ in 0..rows {
        let month = rng.gen_range(1..=12);
        let dom = rng.gen_range(1..=28);
        let dow = rng.gen_range(1..=7);
        let crs_dep = rng.gen_range(5..23) * 100 + rng.gen_range(0..60);
        let carrier = CARRIERS[rng.gen_range(0..CARRIERS.len())];
        let origin = AIRPORTS[rng.gen_range(0..AIRPORTS.len())];
        let dest = AIRPORTS[rng.gen_range(0..AIRPORTS.len())];
        let distance = rng.gen_range(100..2500);
        let flight = rng.gen_range(1..7000);
        let tail = format!("N{}{}", rng.gen_range(100..999), ["AA", "SW", "DL"][rng.gen_range(0..3)]);
        let crs_elapsed = distance / 8 + 30;
        let crs_arr = (crs_dep / 100 * 60 + crs_dep % 100 + crs_elapsed) % 1440;
        let crs_arr = crs_arr / 60 * 100 + crs_arr % 60;
        if rng.gen_ratio(3, 100) {
            let code = ["A", "B", "C"][rng.gen_range(0..3)];
            let _ = writeln!(
                s,
                "{year},{month},{dom},{dow},NA,{crs_dep},NA,{crs_arr},{carrier},{flight},{tail},NA,{crs_elapsed},NA,NA,NA,{origin},{dest},{distance},NA,NA,1,{code},0,NA,NA,NA,NA,NA"
            );
            continue;
        }
        let dep_delay: i64 = rng.gen_range(-10..90);
        let dep_min = (crs_dep / 100 * 60 + crs_dep % 100 + dep_delay).rem_euclid(1440);
        let dep_time = dep_min / 60 * 100 + dep_min % 60;
        let arr_delay = (0.5 + if dow == 2 { 0.57 } else { 0.0 } + 0.93 * dep_delay as f64 + 0.0003 * dep_min as f64
            + rng.gen_range(-8.0..8.0f64))
        .round() as i64;
        let elapsed = crs_elapsed + arr_delay - dep_delay;
        let arr_min = (dep_min + elapsed).rem_euclid(1440);
        let arr_time = arr_min / 60 * 100 + arr_min % 60;
        let (taxi_in, taxi_out) = (rng.gen_range(2..15), rng.gen_range(5..30));
        let air = elapsed - taxi_in - taxi_out;
        let causes = if arr_delay >= 15 {
            format!("{},0,{},0,{}", arr_delay / 3, arr_delay / 3, arr_delay - 2 * (arr_delay / 3))
        } else {
            "NA,NA,NA,NA,NA".to_string()
        };
        let _ = writeln!(
            s,
            "{year},{month},{dom},{dow},{dep_time},{crs_dep},{arr_time},{crs_arr},{carrier},{flight},{tail},{elapsed},{crs_elapsed},{air},{arr_delay},{dep_delay},{origin},{dest},{distance},{taxi_in},{taxi_out},0,,0,{causes}"
        );
    }
    s.into_bytes()
}
