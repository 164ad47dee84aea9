//! Dense row-major `f64` matrices and the handful of products backprop needs.
//!
//! Loops are written in `ikj` order with slice iterators so the compiler can
//! vectorize the inner accumulation without reassociating float sums across
//! runs; results are bitwise reproducible.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(alloc::format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn from_points(points: &[[f64; 3]]) -> Self {
        let mut data = Vec::with_capacity(points.len() * 3);
        for p in points {
            data.extend_from_slice(p);
        }
        Mat {
            rows: points.len(),
            cols: 3,
            data,
        }
    }

    pub fn to_points(&self) -> Vec<[f64; 3]> {
        assert_eq!(self.cols, 3, "matrix is not a point list");
        self.data
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Mat) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// Transposed copy. Only used on small weight matrices.
    pub fn transposed(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Per-column sums, as a `1 x cols` matrix.
    pub fn col_sums(&self) -> Mat {
        let mut out = Mat::zeros(1, self.cols);
        for row in self.data.chunks_exact(self.cols) {
            for (acc, &v) in out.data.iter_mut().zip(row) {
                *acc += v;
            }
        }
        out
    }
}

/// `out += a * b` with `a: m x p`, `b: p x q`, `out: m x q`.
pub fn matmul_acc(a: &Mat, b: &Mat, out: &mut Mat) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    assert_eq!(out.rows, a.rows, "output rows differ");
    assert_eq!(out.cols, b.cols, "output cols differ");
    let q = b.cols;
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = &mut out.data[i * q..(i + 1) * q];
        for (k, &aik) in arow.iter().enumerate() {
            let brow = &b.data[k * q..(k + 1) * q];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
}

/// `a * b` as a fresh matrix.
pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.rows, b.cols);
    matmul_acc(a, b, &mut out);
    out
}

/// `out += a^T * b` with `a: r x m`, `b: r x q`, `out: m x q`.
///
/// Accumulates rank-1 updates row by row, which keeps the inner loop a
/// vectorizable axpy over `q`.
pub fn matmul_tn_acc(a: &Mat, b: &Mat, out: &mut Mat) {
    assert_eq!(a.rows, b.rows, "row counts differ");
    assert_eq!(out.rows, a.cols, "output rows differ");
    assert_eq!(out.cols, b.cols, "output cols differ");
    let m = a.cols;
    let q = b.cols;
    for r in 0..a.rows {
        let arow = a.row(r);
        let brow = b.row(r);
        for im in 0..m {
            let aval = arow[im];
            let orow = &mut out.data[im * q..(im + 1) * q];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aval * bv;
            }
        }
    }
}

/// `a * b^T` as a fresh matrix, via a transposed copy of `b` (small weights).
pub fn matmul_nt(a: &Mat, b: &Mat) -> Mat {
    let bt = b.transposed();
    matmul(a, &bt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Mat {
        Mat::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn matmul_small_hand_case() {
        let a = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = m(3, 2, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = matmul(&a, &b);
        assert_eq!(c.as_slice(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn transpose_products_agree_with_naive() {
        let a = m(3, 2, &[1.0, -2.0, 0.5, 3.0, -1.0, 4.0]);
        let b = m(3, 2, &[2.0, 1.0, 0.0, -1.0, 3.0, 5.0]);
        let mut tn = Mat::zeros(2, 2);
        matmul_tn_acc(&a, &b, &mut tn);
        let naive = matmul(&a.transposed(), &b);
        assert_eq!(tn.as_slice(), naive.as_slice());

        let nt = matmul_nt(&a, &b);
        let naive_nt = matmul(&a, &b.transposed());
        assert_eq!(nt.as_slice(), naive_nt.as_slice());
    }

    #[test]
    fn col_sums_and_points_round_trip() {
        let pts = [[1.0, 2.0, 3.0], [-4.0, 0.0, 6.0]];
        let mat = Mat::from_points(&pts);
        assert_eq!(mat.to_points(), pts.to_vec());
        assert_eq!(mat.col_sums().as_slice(), &[-3.0, 2.0, 9.0]);
    }
}
