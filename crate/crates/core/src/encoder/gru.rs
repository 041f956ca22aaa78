use crate::numeric::{sigmoid, Grads, Init, ModelParams, ParamId, Real, Values};

/// Gated recurrent unit. Gate blocks are stacked row-wise in the order
/// update (z), reset (r), candidate (h):
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h~ = tanh(W_h x + U_h (r ⊙ h) + b_h)
/// h' = (1 - z) ⊙ h + z ⊙ h~
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruCell {
    /// `3·hidden × input`
    pub w: ParamId,
    /// `3·hidden × hidden`
    pub u: ParamId,
    /// `3·hidden × 1`
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Vec<Real>,
    pub h_prev: Vec<Real>,
    pub z: Vec<Real>,
    pub r: Vec<Real>,
    pub cand: Vec<Real>,
    pub h: Vec<Real>,
}

impl GruCell {
    pub fn register(params: &mut ModelParams, prefix: &str, input: usize, hidden: usize) -> Self {
        let w = params.register(&format!("{prefix}.w"), 3 * hidden, input, Init::Xavier);
        let u = params.register(&format!("{prefix}.u"), 3 * hidden, hidden, Init::Xavier);
        let b = params.register(&format!("{prefix}.b"), 3 * hidden, 1, Init::Zeros);
        Self { w, u, b, input, hidden }
    }

    pub fn forward(&self, params: &ModelParams, x: &[Real], h_prev: &[Real]) -> GruCache {
        let d = self.hidden;
        assert_eq!(x.len(), self.input, "gru input dimension");
        assert_eq!(h_prev.len(), d, "gru state dimension");
        let (w, u, b) = (&params[self.w], &params[self.u], params[self.b].as_slice());

        let mut pre = vec![0.0; 3 * d];
        w.matvec_into(x, &mut pre);
        let mut rec = vec![0.0; 2 * d];
        u.matvec_rows_into(0, h_prev, &mut rec);

        let mut z = vec![0.0; d];
        let mut r = vec![0.0; d];
        for i in 0..d {
            z[i] = sigmoid(pre[i] + rec[i] + b[i]);
            r[i] = sigmoid(pre[d + i] + rec[d + i] + b[d + i]);
        }
        let gated: Vec<Real> = r.iter().zip(h_prev).map(|(ri, hi)| ri * hi).collect();
        let mut cand = vec![0.0; d];
        u.matvec_rows_into(2 * d, &gated, &mut cand);
        for i in 0..d {
            cand[i] = (cand[i] + pre[2 * d + i] + b[2 * d + i]).tanh();
        }
        let h = (0..d).map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * cand[i]).collect();
        GruCache { x: x.to_vec(), h_prev: h_prev.to_vec(), z, r, cand, h }
    }

    /// Accumulates parameter gradients and adds the input and previous-state
    /// gradients into `dx` and `dh_prev`.
    pub fn backward(
        &self,
        values: &Values,
        grads: &mut Grads,
        cache: &GruCache,
        dh: &[Real],
        dx: &mut [Real],
        dh_prev: &mut [Real],
    ) {
        let d = self.hidden;
        let mut dpre = vec![0.0; 3 * d];
        let mut gated = vec![0.0; d];
        for i in 0..d {
            let (z, cand, hp) = (cache.z[i], cache.cand[i], cache.h_prev[i]);
            dh_prev[i] += dh[i] * (1.0 - z);
            dpre[i] = dh[i] * (cand - hp) * z * (1.0 - z);
            dpre[2 * d + i] = dh[i] * z * (1.0 - cand * cand);
            gated[i] = cache.r[i] * hp;
        }

        let u = &values[self.u];
        let mut dgated = vec![0.0; d];
        u.matvec_t_rows_acc(2 * d, &dpre[2 * d..], &mut dgated);
        for i in 0..d {
            let r = cache.r[i];
            dh_prev[i] += dgated[i] * r;
            dpre[d + i] = dgated[i] * cache.h_prev[i] * r * (1.0 - r);
        }
        u.matvec_t_rows_acc(0, &dpre[..2 * d], dh_prev);
        values[self.w].matvec_t_acc(&dpre, dx);

        grads[self.w].add_outer(&dpre, &cache.x);
        let gu = &mut grads[self.u];
        gu.add_outer_rows(0, &dpre[..2 * d], &cache.h_prev);
        gu.add_outer_rows(2 * d, &dpre[2 * d..], &gated);
        crate::numeric::axpy(1.0, &dpre, grads[self.b].as_mut_slice());
    }
}

/// Single GRU update.
pub fn gru_cell(x: &[Real], h_prev: &[Real], cell: &GruCell, params: &ModelParams) -> Vec<Real> {
    cell.forward(params, x, h_prev).h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{finite_diff_grad, Matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randomize(params: &mut ModelParams, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in params.iter_mut() {
            for v in p.value.as_mut_slice() {
                *v = rng.gen_range(-0.8..0.8);
            }
        }
    }

    #[test]
    fn zero_cell_stays_at_zero() {
        let mut p = ModelParams::new(0);
        let cell = GruCell::register(&mut p, "c", 3, 4);
        for q in p.iter_mut() {
            q.value.fill(0.0);
        }
        assert_eq!(gru_cell(&[1.0, -2.0, 3.0], &[0.0; 4], &cell, &p), vec![0.0; 4]);
    }

    #[test]
    fn closed_update_gate_copies_state() {
        let mut p = ModelParams::new(2);
        let cell = GruCell::register(&mut p, "c", 2, 3);
        let bias = &mut p.get_mut(cell.b).value;
        for i in 0..3 {
            bias.set(i, 0, -60.0);
        }
        let h_prev = [0.3, -0.7, 0.1];
        let h = gru_cell(&[0.5, 0.5], &h_prev, &cell, &p);
        for (a, b) in h.iter().zip(&h_prev) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_scalar_reference() {
        let (input, hidden) = (3, 4);
        let mut p = ModelParams::new(0);
        let cell = GruCell::register(&mut p, "c", input, hidden);
        randomize(&mut p, 17);
        let x = [0.2, -0.4, 0.9];
        let hp = [0.1, 0.5, -0.3, 0.7];

        let w = |r: usize, c: usize| p[cell.w].get(r, c) as f64;
        let u = |r: usize, c: usize| p[cell.u].get(r, c) as f64;
        let b = |r: usize| p[cell.b].get(r, 0) as f64;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut expected = vec![0.0f64; hidden];
        let mut r_gate = vec![0.0f64; hidden];
        for i in 0..hidden {
            let mut s = b(hidden + i);
            for j in 0..input {
                s += w(hidden + i, j) * x[j];
            }
            for j in 0..hidden {
                s += u(hidden + i, j) * hp[j];
            }
            r_gate[i] = sig(s);
        }
        for i in 0..hidden {
            let mut sz = b(i);
            let mut sh = b(2 * hidden + i);
            for j in 0..input {
                sz += w(i, j) * x[j];
                sh += w(2 * hidden + i, j) * x[j];
            }
            for j in 0..hidden {
                sz += u(i, j) * hp[j];
                sh += u(2 * hidden + i, j) * r_gate[j] * hp[j];
            }
            let z = sig(sz);
            expected[i] = (1.0 - z) * hp[i] + z * sh.tanh();
        }
        let got = gru_cell(&x, &hp, &cell, &p);
        for (g, e) in got.iter().zip(&expected) {
            assert!((*g as f64 - e).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (input, hidden) = (3, 4);
        let mut p = ModelParams::new(0);
        let cell = GruCell::register(&mut p, "c", input, hidden);
        let xid = p.register("x", 1, input, Init::Zeros);
        let hid = p.register("h", 1, hidden, Init::Zeros);
        randomize(&mut p, 5);
        let weights: Vec<Real> = (0..hidden).map(|i| 0.3 * i as Real - 0.4).collect();
        let loss = |p: &ModelParams| -> Real {
            let h = gru_cell(p[xid].as_slice(), p[hid].as_slice(), &cell, p);
            h.iter().zip(&weights).map(|(a, b)| a * b).sum()
        };

        let cache = cell.forward(&p, p[xid].as_slice(), p[hid].as_slice());
        let mut dx = vec![0.0; input];
        let mut dh = vec![0.0; hidden];
        {
            let (values, mut grads) = p.split();
            cell.backward(&values, &mut grads, &cache, &weights, &mut dx, &mut dh);
        }
        p.get_mut(xid).grad = Matrix::from_vec(1, input, dx);
        p.get_mut(hid).grad = Matrix::from_vec(1, hidden, dh);
        let numeric = finite_diff_grad(loss, &mut p, 1e-6);
        for (q, n) in p.iter().zip(&numeric) {
            for (a, b) in q.grad.as_slice().iter().zip(n.as_slice()) {
                assert!((a - b).abs() < 1e-8, "{}: {a} vs {b}", q.name);
            }
        }
    }
}
