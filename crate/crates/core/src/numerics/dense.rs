use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major dense `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

// Below this many multiply-adds the rayon split costs more than it saves.
const PAR_THRESHOLD: usize = 1 << 16;

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Rows must all have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Rows selected in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks matrices with equal column counts.
    pub fn vstack<'a>(parts: impl IntoIterator<Item = &'a DenseMatrix>) -> Result<Self> {
        let mut rows = 0;
        let mut cols = None;
        let mut data = Vec::new();
        for p in parts {
            match cols {
                None => cols = Some(p.cols),
                Some(c) if c != p.cols => {
                    return Err(Error::ShapeMismatch(format!(
                        "cannot stack {} columns onto {c}",
                        p.cols
                    )))
                }
                _ => {}
            }
            rows += p.rows;
            data.extend_from_slice(&p.data);
        }
        Ok(Self {
            rows,
            cols: cols.unwrap_or(0),
            data,
        })
    }

    /// `self * other`. Left operands that are over three quarters zero (one-hot
    /// and degree inputs) take a kernel that skips their zero entries.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let n = other.cols;
        let mut out = Self::zeros(self.rows, n);
        if n == 0 || self.cols == 0 {
            return Ok(out);
        }
        if !self.mostly_zero() {
            gemm(
                Strided::row_major(&self.data, self.rows, self.cols),
                Strided::row_major(&other.data, other.rows, n),
                &mut out.data,
            );
            return Ok(out);
        }
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        if self.rows * self.cols * n >= PAR_THRESHOLD {
            out.data.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            out.data.chunks_mut(n).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `self^T * other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "({}x{})^T times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let n = other.cols;
        let mut out = Self::zeros(self.cols, n);
        if n == 0 || self.rows == 0 || self.cols == 0 {
            return Ok(out);
        }
        if !self.mostly_zero() {
            gemm(
                Strided::transposed(&self.data, self.rows, self.cols),
                Strided::row_major(&other.data, other.rows, n),
                &mut out.data,
            );
            return Ok(out);
        }
        for i in 0..self.rows {
            let b_row = other.row(i);
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o = &mut out.data[k * n..(k + 1) * n];
                for (o, &b) in o.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        if self.rows == 0 || other.rows == 0 || self.cols == 0 {
            return Ok(out);
        }
        gemm(
            Strided::row_major(&self.data, self.rows, self.cols),
            Strided::transposed(&other.data, other.rows, other.cols),
            &mut out.data,
        );
        Ok(out)
    }

    fn mostly_zero(&self) -> bool {
        4 * self.data.iter().filter(|&&x| x == 0.0).count() > 3 * self.data.len()
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|a| *a = value);
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Read-only view of a matrix with explicit strides.
#[derive(Clone, Copy)]
struct Strided<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    row_stride: usize,
    col_stride: usize,
}

impl<'a> Strided<'a> {
    fn row_major(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride: cols,
            col_stride: 1,
        }
    }

    /// The transpose of the row-major `rows x cols` matrix in `data`.
    fn transposed(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows: cols,
            cols: rows,
            row_stride: 1,
            col_stride: cols,
        }
    }
}

/// `c = a * b` with `c` row-major; bands of rows run in parallel.
fn gemm(a: Strided<'_>, b: Strided<'_>, c: &mut [f64]) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    debug_assert_eq!(k, b.rows);
    debug_assert_eq!(c.len(), m * n);
    let band = if m * k * n >= PAR_THRESHOLD {
        m.div_ceil(rayon::current_num_threads()).max(1)
    } else {
        m
    };
    c.par_chunks_mut(band * n)
        .enumerate()
        .for_each(|(i, c_band)| {
            let first = i * band;
            let rows = c_band.len() / n;
            // SAFETY: every index touched lies inside the borrowed slices: rows
            // first..first+rows of `a` and all of `b`, with the strides above.
            unsafe {
                matrixmultiply::dgemm(
                    rows,
                    k,
                    n,
                    1.0,
                    a.data.as_ptr().add(first * a.row_stride),
                    a.row_stride as isize,
                    a.col_stride as isize,
                    b.data.as_ptr(),
                    b.row_stride as isize,
                    b.col_stride as isize,
                    0.0,
                    c_band.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn products_agree() {
        let a = m(2, 3, &[1.0, 0.0, 2.0, -1.0, 3.0, 0.5]);
        let b = m(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab, m(2, 2, &[11.0, 14.0, 10.5, 13.0]));
        assert_eq!(a.transpose().t_matmul(&b).unwrap(), ab);
        assert_eq!(a.matmul_t(&b.transpose()).unwrap(), ab);
    }

    #[test]
    fn shape_errors() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(a.matmul(&DenseMatrix::zeros(2, 2)).is_err());
        assert!(DenseMatrix::from_vec(2, 2, vec![1.0]).is_err());
        assert!(DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn large_product_matches_serial_path() {
        let n = 70;
        let data: Vec<f64> = (0..n * n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let a = m(n, n, &data);
        let big = a.matmul(&a).unwrap();
        for i in [0, 13, 69] {
            for j in [0, 5, 69] {
                let expect: f64 = (0..n).map(|k| a.get(i, k) * a.get(k, j)).sum();
                assert_eq!(big.get(i, j), expect);
            }
        }
    }
    #[test]
    fn sparse_and_dense_kernels_agree() {
        let (r, k, c) = (37, 23, 19);
        let dense: Vec<f64> = (0..r * k)
            .map(|i| ((i * 29) % 13) as f64 / 7.0 - 0.9)
            .collect();
        let sparse: Vec<f64> = (0..r * k)
            .map(|i| if i % 5 == 0 { 1.0 + i as f64 } else { 0.0 })
            .collect();
        let b = m(
            k,
            c,
            &(0..k * c)
                .map(|i| ((i * 17) % 7) as f64 - 3.0)
                .collect::<Vec<_>>(),
        );
        for a in [m(r, k, &dense), m(r, k, &sparse)] {
            let naive = |i: usize, j: usize| (0..k).map(|t| a.get(i, t) * b.get(t, j)).sum::<f64>();
            let ab = a.matmul(&b).unwrap();
            let via_t = a.transpose().t_matmul(&b).unwrap();
            let via_mt = a.matmul_t(&b.transpose()).unwrap();
            for i in 0..r {
                for j in 0..c {
                    let e = naive(i, j);
                    let tol = 1e-12 * (1.0 + e.abs());
                    assert!((ab.get(i, j) - e).abs() <= tol);
                    assert!((via_t.get(i, j) - e).abs() <= tol);
                    assert!((via_mt.get(i, j) - e).abs() <= tol);
                }
            }
        }
    }
}
