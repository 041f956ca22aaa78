use std::fmt;

use super::Real;

/// Shape mismatch between two operands.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("dimension mismatch in {op}: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
pub struct ShapeError {
    pub op: &'static str,
    pub left_rows: usize,
    pub left_cols: usize,
    pub right_rows: usize,
    pub right_cols: usize,
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Real>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{}) [", self.rows, self.cols)?;
        for r in 0..self.rows {
            if r > 0 {
                write!(f, "; ")?;
            }
            for (c, v) in self.row(r).iter().enumerate() {
                if c > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{v}")?;
            }
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps a row-major buffer. Panics if the length does not match the shape.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Real>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length does not match {rows}x{cols}");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<Real>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn column(values: &[Real]) -> Self {
        Self::from_vec(values.len(), 1, values.to_vec())
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[Real] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Real] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Real> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Real {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Real) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Real] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [Real] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: Real) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn sum_squares(&self) -> Real {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `y = self[rows] * x` for the row range `start..start + y.len()`.
    #[inline]
    pub fn matvec_rows_into(&self, start: usize, x: &[Real], y: &mut [Real]) {
        debug_assert_eq!(x.len(), self.cols);
        let mut pairs = y.chunks_exact_mut(2);
        let mut i = start;
        for out in &mut pairs {
            let (a, b) = dot2(self.row(i), self.row(i + 1), x);
            out[0] = a;
            out[1] = b;
            i += 2;
        }
        if let [last] = pairs.into_remainder() {
            *last = dot(self.row(i), x);
        }
    }

    /// `y = self * x`.
    #[inline]
    pub fn matvec_into(&self, x: &[Real], y: &mut [Real]) {
        debug_assert_eq!(y.len(), self.rows);
        self.matvec_rows_into(0, x, y);
    }

    pub fn matvec(&self, x: &[Real]) -> Vec<Real> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y += self[rows]^T * v` for the row range `start..start + v.len()`.
    #[inline]
    pub fn matvec_t_rows_acc(&self, start: usize, v: &[Real], y: &mut [Real]) {
        debug_assert_eq!(y.len(), self.cols);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                axpy(vi, self.row(start + i), y);
            }
        }
    }

    /// `y += self^T * v`.
    #[inline]
    pub fn matvec_t_acc(&self, v: &[Real], y: &mut [Real]) {
        debug_assert_eq!(v.len(), self.rows);
        self.matvec_t_rows_acc(0, v, y);
    }

    /// `self[rows] += u * x^T` for the row range `start..start + u.len()`.
    #[inline]
    pub fn add_outer_rows(&mut self, start: usize, u: &[Real], x: &[Real]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, &ui) in u.iter().enumerate() {
            if ui != 0.0 {
                axpy(ui, x, self.row_mut(start + i));
            }
        }
    }

    /// `self += u * x^T`.
    #[inline]
    pub fn add_outer(&mut self, u: &[Real], x: &[Real]) {
        debug_assert_eq!(u.len(), self.rows);
        self.add_outer_rows(0, u, x);
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.shape(), other.shape());
        axpy(1.0, &other.data, &mut self.data);
    }

    pub fn scale(&mut self, s: Real) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Matrix product `a * b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix, ShapeError> {
    if a.cols != b.rows {
        return Err(ShapeError {
            op: "matmul",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            axpy(aik, b.row(k), out_row);
        }
    }
    Ok(out)
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[Real], b: &[Real]) -> Real {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0 as Real; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: Real = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `(dot(a, x), dot(b, x))` in one pass over `x`, bit-identical to two calls.
#[inline]
fn dot2(a: &[Real], b: &[Real], x: &[Real]) -> (Real, Real) {
    let n = x.len();
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc_a = [0.0 as Real; 8];
    let mut acc_b = [0.0 as Real; 8];
    let (ca, cb, cx) = (a.chunks_exact(8), b.chunks_exact(8), x.chunks_exact(8));
    let tail_a: Real = ca.remainder().iter().zip(cx.remainder()).map(|(p, q)| p * q).sum();
    let tail_b: Real = cb.remainder().iter().zip(cx.remainder()).map(|(p, q)| p * q).sum();
    for ((ra, rb), rx) in ca.zip(cb).zip(cx) {
        for k in 0..8 {
            acc_a[k] += ra[k] * rx[k];
            acc_b[k] += rb[k] * rx[k];
        }
    }
    let fold = |c: [Real; 8], t: Real| ((c[0] + c[4]) + (c[1] + c[5])) + ((c[2] + c[6]) + (c[3] + c[7])) + t;
    (fold(acc_a, tail_a), fold(acc_b, tail_b))
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: Real, x: &[Real], y: &mut [Real]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
