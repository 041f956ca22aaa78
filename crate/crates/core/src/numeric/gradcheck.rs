//! Central finite-difference gradients, used as the oracle for every
//! hand-written backward pass.

use super::{Matrix, ModelParams, Real};

pub const DEFAULT_EPS: Real = 1e-5;

/// Central-difference estimate `(f(x + eps) - f(x - eps)) / (2 eps)` for every
/// scalar entry of every parameter. Values are restored exactly afterwards.
pub fn finite_diff_grad<F>(mut loss_fn: F, params: &mut ModelParams, eps: Real) -> Vec<Matrix>
where
    F: FnMut(&ModelParams) -> Real,
{
    let mut out = Vec::with_capacity(params.len());
    for index in 0..params.len() {
        let id = super::ParamId(index);
        let (rows, cols) = params[id].shape();
        let mut grad = Matrix::zeros(rows, cols);
        for k in 0..rows * cols {
            let original = params[id].as_slice()[k];
            params.get_mut(id).value.as_mut_slice()[k] = original + eps;
            let plus = loss_fn(params);
            params.get_mut(id).value.as_mut_slice()[k] = original - eps;
            let minus = loss_fn(params);
            params.get_mut(id).value.as_mut_slice()[k] = original;
            grad.as_mut_slice()[k] = (plus - minus) / (2.0 * eps);
        }
        out.push(grad);
    }
    out
}

/// Worst mismatch between an analytic and a numeric gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    pub name: String,
    pub index: usize,
    pub analytic: Real,
    pub numeric: Real,
    pub rel_error: Real,
    pub abs_error: Real,
}

/// Per-parameter comparison summary.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_param: Vec<(String, Real)>,
    pub failures: Vec<GradMismatch>,
    pub max_rel_error: Real,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares analytic gradients (taken from `params`) against `numeric`.
///
/// An entry passes when its relative error is below `rel_tol`, or, where the
/// analytic magnitude is below `small`, when its absolute error is below
/// `abs_tol`.
pub fn compare_gradients(
    params: &ModelParams,
    numeric: &[Matrix],
    rel_tol: Real,
    abs_tol: Real,
    small: Real,
) -> GradCheckReport {
    let mut per_param = Vec::new();
    let mut failures = Vec::new();
    let mut max_rel_error: Real = 0.0;
    let mut checked = 0;
    for (p, num) in params.iter().zip(numeric) {
        let mut worst: Real = 0.0;
        for (k, (&a, &n)) in p.grad.as_slice().iter().zip(num.as_slice()).enumerate() {
            checked += 1;
            let abs_error = (a - n).abs();
            let scale = a.abs().max(n.abs());
            let rel_error = if scale > 0.0 { abs_error / scale } else { 0.0 };
            let ok = if a.abs() < small { abs_error < abs_tol } else { rel_error < rel_tol };
            if a.abs() >= small {
                worst = worst.max(rel_error);
            }
            if !ok {
                failures.push(GradMismatch {
                    name: p.name.clone(),
                    index: k,
                    analytic: a,
                    numeric: n,
                    rel_error,
                    abs_error,
                });
            }
        }
        max_rel_error = max_rel_error.max(worst);
        per_param.push((p.name.clone(), worst));
    }
    GradCheckReport { per_param, failures, max_rel_error, checked }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{sigmoid, Init};

    #[test]
    fn sum_of_squares() {
        let mut p = ModelParams::new(0);
        let id = p.register("x", 1, 2, Init::Zeros);
        p.get_mut(id).value = Matrix::from_vec(1, 2, vec![1.0, 2.0]);
        let g = finite_diff_grad(|p| p.iter().map(|q| q.value.sum_squares()).sum(), &mut p, DEFAULT_EPS);
        assert!((g[0].get(0, 0) - 2.0).abs() < 1e-8);
        assert!((g[0].get(0, 1) - 4.0).abs() < 1e-8);
        assert_eq!(p[id].as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn sigmoid_slope_at_origin() {
        let mut p = ModelParams::new(0);
        p.register("w", 1, 1, Init::Zeros);
        let g = finite_diff_grad(|p| sigmoid(p.iter().next().unwrap().value.get(0, 0) * 1.0), &mut p, DEFAULT_EPS);
        assert!((g[0].get(0, 0) - 0.25).abs() < 1e-8);
    }

    proptest::proptest! {
        #[test]
        fn cubic_polynomials_match_analytic_derivative(
            c in proptest::collection::vec(-3.0f64..3.0, 4),
            x in -2.0f64..2.0,
        ) {
            let mut p = ModelParams::new(0);
            p.register("x", 1, 1, Init::Constant(x));
            let f = |p: &ModelParams| {
                let x = p.iter().next().unwrap().value.get(0, 0);
                c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x
            };
            let g = finite_diff_grad(f, &mut p, DEFAULT_EPS);
            let exact = c[1] + 2.0 * c[2] * x + 3.0 * c[3] * x * x;
            // Truncation error is c3 * eps^2 plus cancellation noise ~ 1e-16/eps.
            proptest::prop_assert!((g[0].get(0, 0) - exact).abs() < 1e-8);
        }
    }
}
