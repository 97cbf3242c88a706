//! Out-of-core least squares through summed normal equations.
//!
//! Each chunk of a design matrix contributes `XᵀX` and `Xᵀy` to a
//! [`NormalEqAccumulator`]; accumulators from different chunks are merged
//! and the final system is solved by [`solve_ne`].

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const DEFAULT_RANK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalEqAccumulator {
    d: usize,
    /// Row-major `d × d`.
    xtx: Vec<f64>,
    xty: Vec<f64>,
    n: u64,
}

impl NormalEqAccumulator {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            xtx: vec![0.0; d * d],
            xty: vec![0.0; d],
            n: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn xtx(&self) -> &[f64] {
        &self.xtx
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Adds `XᵀX` and `Xᵀy` for one block.
    pub fn accumulate(&mut self, x: &DenseMatrix<f64>, y: &[f64]) -> Result<()> {
        if x.n_cols() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.n_cols(),
            });
        }
        if y.len() != x.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: x.n_rows(),
                found: y.len(),
            });
        }
        let all: Vec<usize> = (0..self.d).collect();
        self.add_block(x.data(), x.n_cols(), &all, y.iter().copied());
        Ok(())
    }

    /// Adds one block of a matrix that holds the response as one of its
    /// columns; `design` lists the regressor columns in order.
    pub fn accumulate_design(&mut self, m: &DenseMatrix<f64>, design: &[usize], response: usize) -> Result<()> {
        if design.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: design.len(),
            });
        }
        let w = m.n_cols();
        if let Some(&bad) = design.iter().chain([&response]).find(|&&c| c >= w) {
            return Err(Error::DimensionMismatch {
                expected: w,
                found: bad + 1,
            });
        }
        self.add_block(m.data(), w, design, m.rows().map(|r| r[response]));
        Ok(())
    }

    fn add_block(&mut self, data: &[f64], width: usize, cols: &[usize], y: impl Iterator<Item = f64>) {
        let d = self.d;
        if width == 0 {
            return;
        }
        let mut block = NormalEqAccumulator::new(d);
        let mut row = vec![0.0; d];
        for (r, yi) in data.chunks_exact(width).zip(y) {
            for (dst, &c) in row.iter_mut().zip(cols) {
                *dst = r[c];
            }
            for i in 0..d {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                let out = &mut block.xtx[i * d + i..(i + 1) * d];
                for (o, &xj) in out.iter_mut().zip(&row[i..]) {
                    *o += xi * xj;
                }
                block.xty[i] += xi * yi;
            }
            block.n += 1;
        }
        for i in 0..d {
            for j in 0..i {
                block.xtx[i * d + j] = block.xtx[j * d + i];
            }
        }
        // dims agree by construction
        self.merge(&block).unwrap();
    }

    /// Elementwise sum with another accumulator of the same dimension.
    pub fn merge(&mut self, other: &NormalEqAccumulator) -> Result<()> {
        if other.d != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: other.d,
            });
        }
        for (a, b) in self.xtx.iter_mut().zip(&other.xtx) {
            *a += b;
        }
        for (a, b) in self.xty.iter_mut().zip(&other.xty) {
            *a += b;
        }
        self.n += other.n;
        Ok(())
    }

    pub fn merged(mut self, other: &NormalEqAccumulator) -> Result<Self> {
        self.merge(other)?;
        Ok(self)
    }
}

/// Square-root-free pivoted Cholesky factorization `PᵀAP = LDLᵀ`,
/// truncated at the detected rank.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    /// Column indices in pivot order; the first `rank` are kept.
    pub order: Vec<usize>,
    pub rank: usize,
    /// Pivots `D` as they were chosen, including the first rejected one.
    pub pivots: Vec<f64>,
    /// Row-major `rank × rank` unit lower factor over `order[..rank]`.
    l: Vec<f64>,
}

/// Pivoted factorization of a symmetric `d × d` row-major matrix.
///
/// At each step the largest remaining diagonal is chosen, ties going to the
/// lowest original index. The factorization stops when that diagonal falls
/// below `tol` times the largest diagonal of `a`.
pub fn pivoted_cholesky(a: &[f64], d: usize, tol: f64) -> PivotedCholesky {
    let mut w = a.to_vec();
    let mut order: Vec<usize> = (0..d).collect();
    let max_diag = (0..d).map(|i| a[i * d + i]).fold(0.0, f64::max);
    let threshold = tol * max_diag;
    let mut pivots = Vec::new();
    let mut rank = 0;
    let mut col = vec![0.0; d];
    for k in 0..d {
        let mut p = k;
        for i in k + 1..d {
            let (di, dp) = (w[i * d + i], w[p * d + p]);
            if di > dp || (di == dp && order[i] < order[p]) {
                p = i;
            }
        }
        if p != k {
            for c in 0..d {
                w.swap(k * d + c, p * d + c);
            }
            for r in 0..d {
                w.swap(r * d + k, r * d + p);
            }
            order.swap(k, p);
        }
        let pivot = w[k * d + k];
        pivots.push(pivot);
        if pivot.is_nan() || pivot < threshold || pivot <= 0.0 {
            break;
        }
        for i in k + 1..d {
            col[i] = w[i * d + k];
        }
        for i in k + 1..d {
            let lik = col[i] / pivot;
            for j in k + 1..=i {
                w[i * d + j] -= lik * col[j];
            }
            for j in k + 1..i {
                w[j * d + i] = w[i * d + j];
            }
            w[i * d + k] = lik;
            w[k * d + i] = lik;
        }
        rank += 1;
    }
    let mut l = vec![0.0; rank * rank];
    for r in 0..rank {
        for c in 0..r {
            l[r * rank + c] = w[r * d + c];
        }
        l[r * rank + r] = 1.0;
    }
    pivots.truncate(rank + 1);
    PivotedCholesky { order, rank, pivots, l }
}

impl PivotedCholesky {
    /// Solves `L D Lᵀ z = b` where `b` is given in pivot order.
    #[allow(clippy::needless_range_loop)]
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let r = self.rank;
        let mut z = b.to_vec();
        for i in 0..r {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[i * r + k] * z[k];
            }
            z[i] = s;
        }
        for i in 0..r {
            z[i] /= self.pivots[i];
        }
        for i in (0..r).rev() {
            let mut s = z[i];
            for k in i + 1..r {
                s -= self.l[k * r + i] * z[k];
            }
            z[i] = s;
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub names: Vec<String>,
    /// One entry per column; `None` for aliased columns.
    pub coefficients: Vec<Option<f64>>,
    /// Indices of the retained columns, ascending.
    pub kept: Vec<usize>,
    pub rank: usize,
    pub dropped: Vec<String>,
    pub tolerance: f64,
    pub n: u64,
}

impl RegressionFit {
    pub fn coef(&self, name: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == name)?;
        self.coefficients[i]
    }

    /// Name-aligned coefficient table with aliased columns marked `NA`.
    pub fn table(&self) -> String {
        let width = self.names.iter().map(String::len).max().unwrap_or(0);
        let mut out = String::new();
        for (name, c) in self.names.iter().zip(&self.coefficients) {
            match c {
                Some(v) => {
                    let mut text = Vec::new();
                    crate::writer::render_real(*v, &mut text);
                    let text = String::from_utf8_lossy(&text);
                    out.push_str(&format!("{name:<width$}  {text:>24}\n"));
                }
                None => out.push_str(&format!("{name:<width$}  {:>24}\n", "NA")),
            }
        }
        if !self.dropped.is_empty() {
            out.push_str(&format!("aliased: {}\n", self.dropped.join(", ")));
        }
        out
    }
}

/// Solves the accumulated normal equations with rank detection.
///
/// Each column is first scaled by the power of two that brings its diagonal
/// closest to 1, so the rank test compares columns on an equal footing
/// whatever their units, while the scaled system stays exactly representable.
/// All-zero columns are aliased outright. The pivoted factorization then
/// runs on the scaled system with relative threshold `rank_tol`.
pub fn solve_ne(acc: &NormalEqAccumulator, names: &[String], rank_tol: f64) -> Result<RegressionFit> {
    let d = acc.d;
    if names.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: names.len(),
        });
    }
    let scaled = Scaled::new(acc);
    let chol = pivoted_cholesky(&scaled.a, scaled.live.len(), rank_tol);
    if chol.rank == 0 {
        return Err(Error::DegenerateSystem);
    }
    let kept_scaled = &chol.order[..chol.rank];
    let b: Vec<f64> = kept_scaled.iter().map(|&r| acc.xty[scaled.live[r]] * scaled.scale[r]).collect();
    let z = chol.solve(&b);
    let mut coefficients = vec![None; d];
    for (&r, v) in kept_scaled.iter().zip(z) {
        coefficients[scaled.live[r]] = Some(v * scaled.scale[r]);
    }
    let kept: Vec<usize> = (0..d).filter(|&c| coefficients[c].is_some()).collect();
    let dropped = (0..d).filter(|&c| coefficients[c].is_none()).map(|c| names[c].clone()).collect();
    Ok(RegressionFit {
        names: names.to_vec(),
        coefficients,
        kept,
        rank: chol.rank,
        dropped,
        tolerance: rank_tol,
        n: acc.n,
    })
}

/// `xtx` restricted to columns with a positive diagonal and scaled by
/// powers of two.
struct Scaled {
    live: Vec<usize>,
    scale: Vec<f64>,
    a: Vec<f64>,
}

impl Scaled {
    fn new(acc: &NormalEqAccumulator) -> Self {
        let d = acc.d;
        let live: Vec<usize> = (0..d).filter(|&i| acc.xtx[i * d + i] > 0.0).collect();
        let scale: Vec<f64> = live
            .iter()
            .map(|&i| {
                let e = (acc.xtx[i * d + i].log2() / 2.0).round() as i32;
                2f64.powi(-e)
            })
            .collect();
        let m = live.len();
        let mut a = vec![0.0; m * m];
        for (r, &i) in live.iter().enumerate() {
            for (c, &j) in live.iter().enumerate() {
                a[r * m + c] = acc.xtx[i * d + j] * scale[r] * scale[c];
            }
        }
        Self { live, scale, a }
    }
}

/// Pivots of the scaled factorization, for checking positive semidefiniteness.
pub fn scaled_pivots(acc: &NormalEqAccumulator, rank_tol: f64) -> Vec<f64> {
    let s = Scaled::new(acc);
    pivoted_cholesky(&s.a, s.live.len(), rank_tol).pivots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn hand_computed_block() {
        let x = DenseMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        let mut acc = NormalEqAccumulator::new(1);
        acc.accumulate(&x, &[3.0, 5.0]).unwrap();
        assert_eq!(acc.xtx(), [2.0]);
        assert_eq!(acc.xty(), [8.0]);
        assert_eq!(acc.n(), 2);
        let fit = solve_ne(&acc, &names(1), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(fit.coefficients, [Some(4.0)]);
    }

    #[test]
    fn empty_block_is_identity() {
        let mut acc = NormalEqAccumulator::new(2);
        acc.accumulate(&DenseMatrix::new(1, 2, vec![1.0, 2.0]).unwrap(), &[1.0]).unwrap();
        let before = acc.clone();
        acc.accumulate(&DenseMatrix::new(0, 2, vec![]).unwrap(), &[]).unwrap();
        assert_eq!(acc, before);
        let zero = NormalEqAccumulator::new(2);
        assert_eq!(before.clone().merged(&zero).unwrap(), before);
    }

    #[test]
    fn dimension_checks() {
        let mut acc = NormalEqAccumulator::new(2);
        let x = DenseMatrix::new(1, 3, vec![1.0; 3]).unwrap();
        assert!(matches!(acc.accumulate(&x, &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(acc.merge(&NormalEqAccumulator::new(3)).is_err());
        assert!(solve_ne(&acc, &names(3), DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn zero_design_is_degenerate() {
        let mut acc = NormalEqAccumulator::new(2);
        acc.accumulate(&DenseMatrix::new(2, 2, vec![0.0; 4]).unwrap(), &[1.0, 2.0]).unwrap();
        assert!(matches!(solve_ne(&acc, &names(2), DEFAULT_RANK_TOL), Err(Error::DegenerateSystem)));
    }

    #[test]
    fn design_columns_skip_response() {
        let m = DenseMatrix::new(3, 3, vec![1.0, 2.0, 0.0, 1.0, 4.0, 1.0, 1.0, 6.0, 2.0]).unwrap();
        let mut acc = NormalEqAccumulator::new(2);
        acc.accumulate_design(&m, &[0, 2], 1).unwrap();
        let fit = solve_ne(&acc, &names(2), DEFAULT_RANK_TOL).unwrap();
        assert!((fit.coefficients[0].unwrap() - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1].unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_column_is_aliased() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64, i as f64, (i * i) as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| 1.0 + 2.0 * i as f64 + 0.5 * (i * i) as f64).collect();
        let x = DenseMatrix::from_rows(&rows).unwrap();
        let mut acc = NormalEqAccumulator::new(4);
        acc.accumulate(&x, &y).unwrap();
        let fit = solve_ne(&acc, &names(4), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(fit.rank, 3);
        assert_eq!(fit.dropped, ["x2"]);
        assert_eq!(fit.kept, [0, 1, 3]);
        assert!((fit.coef("x1").unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let chol = pivoted_cholesky(&[1.0, 0.0, 0.0, 1.0], 2, 1e-7);
        assert_eq!(chol.order, [0, 1]);
        let chol = pivoted_cholesky(&[1.0, 1.0, 1.0, 1.0], 2, 1e-7);
        assert_eq!(chol.rank, 1);
        assert_eq!(chol.order[0], 0);
    }

    #[test]
    fn table_marks_aliased() {
        let fit = RegressionFit {
            names: vec!["a".into(), "bb".into()],
            coefficients: vec![Some(1.5), None],
            kept: vec![0],
            rank: 1,
            dropped: vec!["bb".into()],
            tolerance: 1e-7,
            n: 3,
        };
        let t = fit.table();
        assert!(t.contains("NA"));
        assert!(t.ends_with("aliased: bb\n"));
    }
}
