//! Dense symmetric linear algebra: streaming covariance accumulation and
//! symmetric eigendecomposition.

use crate::error::{invalid, shape, Error, Result};

/// Row-major `rows`×`cols` matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape(format!("{rows}x{cols} entries"), data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(shape(self.cols, x.len()));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(shape(format!("{} rows", self.cols), other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm_f64(
            self.rows,
            self.cols,
            other.cols,
            1.0,
            &self.data,
            (self.cols as isize, 1),
            &other.data,
            (other.cols as isize, 1),
            0.0,
            &mut out.data,
            (other.cols as isize, 1),
        );
        Ok(out)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `C = α·A·B + β·C` with explicit (row, column) strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_f64(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
    c_strides: (isize, isize),
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.len() >= extent(m, k, a_strides));
    assert!(b.len() >= extent(k, n, b_strides));
    assert!(c.len() >= extent(m, n, c_strides));
    // SAFETY: the assertions above bound every index the strides reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            c_strides.0,
            c_strides.1,
        );
    }
}

fn extent(rows: usize, cols: usize, (rs, cs): (isize, isize)) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
}

const CHUNK_ROWS: usize = 256;

/// Streaming first and second moments of `n`-dimensional samples.
///
/// Samples are shifted by the first sample seen (or an explicit shift) before
/// the outer products are accumulated, which keeps the sums well scaled when
/// the data carry a large common offset.
#[derive(Clone, Debug)]
pub struct CovarianceAccumulator {
    n: usize,
    count: usize,
    shift: Option<Vec<f64>>,
    sum: Vec<f64>,
    outer: Vec<f64>,
    pending: Vec<f64>,
}

impl CovarianceAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            count: 0,
            shift: None,
            sum: vec![0.0; n],
            outer: vec![0.0; n * n],
            pending: Vec::with_capacity(CHUNK_ROWS * n),
        }
    }

    /// Accumulator whose sums are taken about `shift`; two accumulators with
    /// the same shift can be merged exactly.
    pub fn with_shift(shift: Vec<f64>) -> Self {
        let mut acc = Self::new(shift.len());
        acc.shift = Some(shift);
        acc
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.n {
            return Err(shape(self.n, sample.len()));
        }
        let shift = self.shift.get_or_insert_with(|| sample.to_vec());
        for (i, (&x, &s)) in sample.iter().zip(shift.iter()).enumerate() {
            let d = x - s;
            self.sum[i] += d;
            self.pending.push(d);
        }
        self.count += 1;
        if self.pending.len() == CHUNK_ROWS * self.n {
            self.flush();
        }
        Ok(())
    }

    pub fn push_f32(&mut self, sample: &[f32]) -> Result<()> {
        let v: Vec<f64> = sample.iter().map(|&x| x as f64).collect();
        self.push(&v)
    }

    fn flush(&mut self) {
        let rows = self.pending.len() / self.n.max(1);
        if rows == 0 {
            return;
        }
        let n = self.n as isize;
        // outer += Dᵀ D, D = pending (rows × n, row-major)
        gemm_f64(
            self.n,
            rows,
            self.n,
            1.0,
            &self.pending,
            (1, n),
            &self.pending,
            (n, 1),
            1.0,
            &mut self.outer,
            (n, 1),
        );
        self.pending.clear();
    }

    pub fn merge(&mut self, mut other: CovarianceAccumulator) -> Result<()> {
        if other.n != self.n {
            return Err(shape(self.n, other.n));
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 && self.shift.is_none() {
            *self = other;
            return Ok(());
        }
        if self.shift != other.shift {
            return Err(invalid("merged accumulators must share their shift"));
        }
        self.flush();
        other.flush();
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.outer.iter_mut().zip(&other.outer) {
            *a += b;
        }
        self.count += other.count;
        Ok(())
    }

    /// Sample mean and unbiased sample covariance.
    pub fn finish(mut self) -> Result<(Vec<f64>, Matrix)> {
        if self.count < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: self.count,
            });
        }
        self.flush();
        let c = self.count as f64;
        let d: Vec<f64> = self.sum.iter().map(|s| s / c).collect();
        let shift = self.shift.unwrap_or_else(|| vec![0.0; self.n]);
        let mean: Vec<f64> = shift.iter().zip(&d).map(|(s, d)| s + d).collect();
        let n = self.n;
        let mut cov = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                // symmetrize exactly from the lower triangle
                let v = (self.outer[i * n + j] - c * d[i] * d[j]) / (c - 1.0);
                cov.data[i * n + j] = v;
                cov.data[j * n + i] = v;
            }
        }
        Ok((mean, cov))
    }
}

/// Eigenpairs of a symmetric matrix, ordered by decreasing magnitude
/// (the singular values of the matrix).
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Eigenvalues, `|values[0]| ≥ |values[1]| ≥ …`.
    pub values: Vec<f64>,
    /// Eigenvectors as rows of an `n`×`n` matrix, `vectors.row(i)` pairs with
    /// `values[i]`.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn new(a: &Matrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(shape("square matrix", format!("{}x{}", a.rows, a.cols)));
        }
        if a.data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        let n = a.rows;
        let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a.get(i, j));
        let evd = m.selfadjoint_eigendecomposition(faer::Side::Lower);
        let s = evd.s().column_vector();
        let u = evd.u();
        let mut order: Vec<usize> = (0..n).collect();
        let raw: Vec<f64> = (0..n).map(|i| s.read(i)).collect();
        order.sort_by(|&i, &j| raw[j].abs().total_cmp(&raw[i].abs()).then(i.cmp(&j)));
        let values = order.iter().map(|&i| raw[i]).collect();
        let mut vectors = Matrix::zeros(n, n);
        for (r, &i) in order.iter().enumerate() {
            for k in 0..n {
                vectors.data[r * n + k] = u.read(k, i);
            }
        }
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Singular values `|λ_i|`, non-increasing.
    pub fn singular_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.abs()).collect()
    }

    /// Coordinates of `x` in the eigenbasis.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.vectors.matvec(x)
    }

    /// `Σ_{i<rank} coeffs[i]·u_i`.
    pub fn combine(&self, coeffs: &[f64], rank: usize) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (i, &c) in coeffs.iter().enumerate().take(rank) {
            if c == 0.0 {
                continue;
            }
            for (o, &u) in out.iter_mut().zip(self.vectors.row(i)) {
                *o += c * u;
            }
        }
        out
    }
}
