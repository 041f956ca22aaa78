use super::{Matrix, Real};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("softmax of an empty vector")]
pub struct EmptyInput;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(v: &[Real]) -> Result<Vec<Real>, EmptyInput> {
    if v.is_empty() {
        return Err(EmptyInput);
    }
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// In-place softmax; a no-op on an empty slice.
pub fn softmax_in_place(v: &mut [Real]) {
    let max = v.iter().copied().fold(Real::NEG_INFINITY, Real::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

/// Backward of softmax: given weights `w` and upstream `dw`, returns the
/// gradient with respect to the scores.
pub fn softmax_backward(w: &[Real], dw: &[Real]) -> Vec<Real> {
    let inner: Real = w.iter().zip(dw).map(|(a, b)| a * b).sum();
    w.iter().zip(dw).map(|(wi, dwi)| wi * (dwi - inner)).collect()
}

#[inline]
pub fn sigmoid(x: Real) -> Real {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_matrix(m: &Matrix) -> Matrix {
    let data = m.as_slice().iter().map(|&x| sigmoid(x)).collect();
    Matrix::from_vec(m.rows(), m.cols(), data)
}

pub fn tanh_matrix(m: &Matrix) -> Matrix {
    let data = m.as_slice().iter().map(|&x| x.tanh()).collect();
    Matrix::from_vec(m.rows(), m.cols(), data)
}
