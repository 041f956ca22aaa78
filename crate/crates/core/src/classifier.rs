//! Attention pooling over the step states, heuristic matching with the
//! global vector, the two-layer MLP head and the regularised cross-entropy.

use serde::Serialize;

use crate::numeric::{
    axpy, dot, softmax_backward, softmax_in_place, Grads, Init, ModelParams, ParamId, Real, ShapeError, Values,
};

/// Probability floor applied before the log in the loss.
pub const PROB_FLOOR: Real = 1e-12;

/// Which blocks of the matching vector are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum MatchMode {
    /// `[h_g, h̄, h_g ⊙ h̄, h̄ - h_g]`
    #[default]
    Full,
    /// `[h̄]`
    NoGlobal,
    /// `[h_g]`
    NoDetail,
}

impl MatchMode {
    pub fn width(self, hidden: usize) -> usize {
        match self {
            MatchMode::Full => 4 * hidden,
            MatchMode::NoGlobal | MatchMode::NoDetail => hidden,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PoolParams {
    /// `a × d`
    pub w: ParamId,
    /// `a × 1`
    pub b: ParamId,
    /// `a × 1`
    pub omega: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct MlpParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub attention: usize,
    pub mlp_hidden: usize,
    pub classes: usize,
    pub mode: MatchMode,
}

#[derive(Debug, Clone)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub pool: PoolParams,
    pub mlp: MlpParams,
}

impl Classifier {
    pub fn register(params: &mut ModelParams, config: ClassifierConfig) -> Self {
        let (d, a, m, c) = (config.hidden, config.attention, config.mlp_hidden, config.classes);
        let pool = PoolParams {
            w: params.register("pool.w", a, d, Init::Xavier),
            b: params.register("pool.b", a, 1, Init::Zeros),
            omega: params.register("pool.omega", a, 1, Init::Xavier),
        };
        let mlp = MlpParams {
            w1: params.register("mlp.w1", m, config.mode.width(d), Init::Xavier),
            b1: params.register("mlp.b1", m, 1, Init::Zeros),
            w2: params.register("mlp.w2", c, m, Init::Xavier),
            b2: params.register("mlp.b2", c, 1, Init::Zeros),
        };
        Self { config, pool, mlp }
    }
}

#[derive(Debug, Clone)]
pub struct PoolOutput {
    /// `tanh(W h̄_t + b)` per step.
    pub activations: Vec<Vec<Real>>,
    pub scores: Vec<Real>,
    pub weights: Vec<Real>,
    pub pooled: Vec<Real>,
}

/// `h̄ = Σ_t softmax(ωᵀ tanh(W h̄_t + b))_t · h̄_t`.
pub fn attention_pool(states: &[Vec<Real>], pool: &PoolParams, params: &ModelParams) -> PoolOutput {
    assert!(!states.is_empty(), "attention pooling needs at least one state");
    let (w, b, omega) = (&params[pool.w], params[pool.b].as_slice(), params[pool.omega].as_slice());
    let mut activations = Vec::with_capacity(states.len());
    let mut scores = Vec::with_capacity(states.len());
    for s in states {
        let mut act = w.matvec(s);
        for (v, bi) in act.iter_mut().zip(b) {
            *v = (*v + bi).tanh();
        }
        scores.push(dot(omega, &act));
        activations.push(act);
    }
    let mut weights = scores.clone();
    softmax_in_place(&mut weights);
    let mut pooled = vec![0.0; states[0].len()];
    for (s, &wt) in states.iter().zip(&weights) {
        axpy(wt, s, &mut pooled);
    }
    PoolOutput { activations, scores, weights, pooled }
}

/// Returns the gradient on each step state.
pub fn attention_pool_backward(
    values: &Values,
    grads: &mut Grads,
    pool: &PoolParams,
    states: &[Vec<Real>],
    out: &PoolOutput,
    dpooled: &[Real],
) -> Vec<Vec<Real>> {
    let dw: Vec<Real> = states.iter().map(|s| dot(dpooled, s)).collect();
    let dscores = softmax_backward(&out.weights, &dw);
    let omega = values[pool.omega].as_slice();
    let w = &values[pool.w];
    let mut dstates = Vec::with_capacity(states.len());
    for (t, s) in states.iter().enumerate() {
        let mut ds: Vec<Real> = dpooled.iter().map(|g| g * out.weights[t]).collect();
        let act = &out.activations[t];
        axpy(dscores[t], act, grads[pool.omega].as_mut_slice());
        let dpre: Vec<Real> = act.iter().zip(omega).map(|(a, o)| dscores[t] * o * (1.0 - a * a)).collect();
        grads[pool.w].add_outer(&dpre, s);
        axpy(1.0, &dpre, grads[pool.b].as_mut_slice());
        w.matvec_t_acc(&dpre, &mut ds);
        dstates.push(ds);
    }
    dstates
}

/// The fusion vector `[h_g, h̄, h_g ⊙ h̄, h̄ - h_g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchVector(pub Vec<Real>);

pub fn heuristic_match(h_g: &[Real], h_bar: &[Real]) -> Result<MatchVector, ShapeError> {
    if h_g.len() != h_bar.len() {
        return Err(ShapeError {
            op: "heuristic_match",
            left_rows: h_g.len(),
            left_cols: 1,
            right_rows: h_bar.len(),
            right_cols: 1,
        });
    }
    Ok(MatchVector(match_vector(MatchMode::Full, h_g, h_bar)))
}

/// Matching vector with the blocks selected by `mode`.
pub fn match_vector(mode: MatchMode, h_g: &[Real], h_bar: &[Real]) -> Vec<Real> {
    match mode {
        MatchMode::Full => {
            let mut u = Vec::with_capacity(4 * h_g.len());
            u.extend_from_slice(h_g);
            u.extend_from_slice(h_bar);
            u.extend(h_g.iter().zip(h_bar).map(|(g, b)| g * b));
            u.extend(h_g.iter().zip(h_bar).map(|(g, b)| b - g));
            u
        }
        MatchMode::NoGlobal => h_bar.to_vec(),
        MatchMode::NoDetail => h_g.to_vec(),
    }
}

/// Gradients on `(h_g, h̄)` from the gradient on the matching vector.
pub fn match_backward(mode: MatchMode, h_g: &[Real], h_bar: &[Real], du: &[Real]) -> (Vec<Real>, Vec<Real>) {
    let d = h_g.len();
    match mode {
        MatchMode::Full => {
            let mut dg = vec![0.0; d];
            let mut db = vec![0.0; d];
            for i in 0..d {
                let (prod, diff) = (du[2 * d + i], du[3 * d + i]);
                dg[i] = du[i] + prod * h_bar[i] - diff;
                db[i] = du[d + i] + prod * h_g[i] + diff;
            }
            (dg, db)
        }
        MatchMode::NoGlobal => (vec![0.0; d], du.to_vec()),
        MatchMode::NoDetail => (du.to_vec(), vec![0.0; d]),
    }
}

#[derive(Debug, Clone)]
pub struct MlpOutput {
    pub hidden: Vec<Real>,
    pub probs: Vec<Real>,
}

/// `softmax(W2 tanh(W1 u + b1) + b2)`.
pub fn predict(u: &[Real], mlp: &MlpParams, params: &ModelParams) -> MlpOutput {
    let mut hidden = params[mlp.w1].matvec(u);
    for (h, b) in hidden.iter_mut().zip(params[mlp.b1].as_slice()) {
        *h = (*h + b).tanh();
    }
    let mut probs = params[mlp.w2].matvec(&hidden);
    axpy(1.0, params[mlp.b2].as_slice(), &mut probs);
    softmax_in_place(&mut probs);
    MlpOutput { hidden, probs }
}

/// Backward from the logits gradient; returns the gradient on `u`.
pub fn predict_backward(
    values: &Values,
    grads: &mut Grads,
    mlp: &MlpParams,
    u: &[Real],
    out: &MlpOutput,
    dlogits: &[Real],
) -> Vec<Real> {
    grads[mlp.w2].add_outer(dlogits, &out.hidden);
    axpy(1.0, dlogits, grads[mlp.b2].as_mut_slice());
    let mut dhidden = vec![0.0; out.hidden.len()];
    values[mlp.w2].matvec_t_acc(dlogits, &mut dhidden);
    for (dh, h) in dhidden.iter_mut().zip(&out.hidden) {
        *dh *= 1.0 - h * h;
    }
    grads[mlp.w1].add_outer(&dhidden, u);
    axpy(1.0, &dhidden, grads[mlp.b1].as_mut_slice());
    let mut du = vec![0.0; u.len()];
    values[mlp.w1].matvec_t_acc(&dhidden, &mut du);
    du
}

/// Negative log-likelihood of `label` with the probability floored at
/// [`PROB_FLOOR`]. The flag reports whether the floor was hit.
pub fn nll(probs: &[Real], label: usize) -> (Real, bool) {
    let p = probs[label];
    if p < PROB_FLOOR {
        (-PROB_FLOOR.ln(), true)
    } else {
        (-p.ln(), false)
    }
}

/// Gradient of [`nll`] with respect to the logits.
pub fn nll_logit_grad(probs: &[Real], label: usize) -> Vec<Real> {
    if probs[label] < PROB_FLOOR {
        // The floored loss is flat in the logits.
        return vec![0.0; probs.len()];
    }
    let mut g = probs.to_vec();
    g[label] -= 1.0;
    g
}

/// Weight-decay term of the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Regularizer {
    /// `ε · Σ_p ‖θ_p‖²`
    #[default]
    SquaredL2,
    /// `ε · ‖θ‖` over the concatenation of all parameters.
    ExactL2,
}

impl Regularizer {
    pub fn value(self, params: &ModelParams, eps: Real) -> Real {
        if eps == 0.0 {
            return 0.0;
        }
        let sq: Real = params.iter().map(|p| p.value.sum_squares()).sum();
        match self {
            Regularizer::SquaredL2 => eps * sq,
            Regularizer::ExactL2 => eps * sq.sqrt(),
        }
    }

    /// Adds the regulariser's gradient into every parameter's gradient.
    pub fn accumulate_grad(self, params: &mut ModelParams, eps: Real) {
        if eps == 0.0 {
            return;
        }
        let scale = match self {
            Regularizer::SquaredL2 => 2.0 * eps,
            Regularizer::ExactL2 => {
                let norm = params.iter().map(|p| p.value.sum_squares()).sum::<Real>().sqrt();
                if norm == 0.0 {
                    return;
                }
                eps / norm
            }
        };
        for p in params.iter_mut() {
            axpy(scale, p.value.as_slice(), p.grad.as_mut_slice());
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub total: Real,
    pub cross_entropy: Real,
    pub regularization: Real,
    /// Predictions whose true-class probability hit the floor.
    pub clamped: usize,
}

/// `-(1/N) Σ log P(y_i) + regulariser`.
pub fn loss(
    predictions: &[Vec<Real>],
    labels: &[usize],
    params: &ModelParams,
    eps: Real,
    reg: Regularizer,
) -> LossValue {
    assert_eq!(predictions.len(), labels.len());
    assert!(!predictions.is_empty(), "loss of an empty batch");
    let mut clamped = 0;
    let mut ce = 0.0;
    for (p, &y) in predictions.iter().zip(labels) {
        let (l, hit) = nll(p, y);
        ce += l;
        clamped += hit as usize;
    }
    ce /= predictions.len() as Real;
    if clamped > 0 {
        log::warn!("{clamped} predictions had true-class probability below {PROB_FLOOR}");
    }
    let regularization = reg.value(params, eps);
    LossValue { total: ce + regularization, cross_entropy: ce, regularization, clamped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Matrix;

    fn classifier(mode: MatchMode) -> (ModelParams, Classifier) {
        let mut p = ModelParams::new(5);
        let c =
            Classifier::register(&mut p, ClassifierConfig { hidden: 2, attention: 3, mlp_hidden: 4, classes: 3, mode });
        (p, c)
    }

    #[test]
    fn match_vector_blocks() {
        assert_eq!(heuristic_match(&[1.0, 2.0], &[3.0, 4.0]).unwrap().0, vec![1.0, 2.0, 3.0, 4.0, 3.0, 8.0, 2.0, 2.0]);
        assert_eq!(
            heuristic_match(&[1.5, -2.0], &[1.5, -2.0]).unwrap().0,
            vec![1.5, -2.0, 1.5, -2.0, 2.25, 4.0, 0.0, 0.0]
        );
        assert_eq!(
            heuristic_match(&[1.0, -3.0], &[0.0, 0.0]).unwrap().0,
            vec![1.0, -3.0, 0.0, 0.0, 0.0, -0.0, -1.0, 3.0]
        );
        assert!(heuristic_match(&[1.0], &[1.0, 2.0]).is_err());
        assert_eq!(match_vector(MatchMode::NoGlobal, &[1.0], &[2.0]), vec![2.0]);
        assert_eq!(match_vector(MatchMode::NoDetail, &[1.0], &[2.0]), vec![1.0]);
    }

    #[test]
    fn pooling_a_single_state_is_identity() {
        let (p, c) = classifier(MatchMode::Full);
        let s = vec![vec![0.4, -0.9]];
        assert_eq!(attention_pool(&s, &c.pool, &p).pooled, s[0]);
    }

    #[test]
    fn pooling_identical_states_returns_that_state() {
        let (p, c) = classifier(MatchMode::Full);
        let s = vec![vec![0.25, -0.5]; 3];
        let out = attention_pool(&s, &c.pool, &p);
        for (a, b) in out.pooled.iter().zip(&s[0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_mlp_is_uniform() {
        let (mut p, c) = classifier(MatchMode::Full);
        for q in p.iter_mut() {
            q.value.fill(0.0);
        }
        let out = predict(&[1.0; 8], &c.mlp, &p);
        for v in out.probs {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_examples() {
        let p = ModelParams::new(0);
        let l = loss(&[vec![0.5, 0.5]], &[0], &p, 0.0, Regularizer::SquaredL2);
        assert!((l.total - std::f64::consts::LN_2 as Real).abs() < 1e-15);
        let l = loss(&[vec![1.0, 0.0]], &[0], &p, 0.0, Regularizer::SquaredL2);
        assert_eq!(l.total, 0.0);
        let l = loss(&[vec![1.0, 0.0]], &[1], &p, 0.0, Regularizer::SquaredL2);
        assert_eq!(l.clamped, 1);
        assert!((l.total - 27.631021115928547).abs() < 1e-9);
    }

    #[test]
    fn regularizer_vanishes_at_zero_parameters() {
        let (mut p, _) = classifier(MatchMode::Full);
        for q in p.iter_mut() {
            q.value.fill(0.0);
        }
        for reg in [Regularizer::SquaredL2, Regularizer::ExactL2] {
            let l = loss(&[vec![0.25, 0.75]], &[1], &p, 0.1, reg);
            assert_eq!(l.total, l.cross_entropy);
        }
    }

    #[test]
    fn regularizer_gradients_match_finite_differences() {
        for reg in [Regularizer::SquaredL2, Regularizer::ExactL2] {
            let (mut p, _) = classifier(MatchMode::Full);
            reg.accumulate_grad(&mut p, 0.3);
            let numeric = crate::numeric::finite_diff_grad(|p| reg.value(p, 0.3), &mut p, 1e-6);
            for (q, n) in p.iter().zip(&numeric) {
                for (a, b) in q.grad.as_slice().iter().zip(n.as_slice()) {
                    assert!((a - b).abs() < 1e-8, "{reg:?} {}", q.name);
                }
            }
        }
    }

    #[test]
    fn head_backward_matches_finite_differences() {
        for mode in [MatchMode::Full, MatchMode::NoGlobal, MatchMode::NoDetail] {
            let (mut p, c) = classifier(mode);
            let sid = p.register("states", 3, 2, Init::Xavier);
            let gid = p.register("hg", 1, 2, Init::Xavier);
            let label = 2;
            let run = |p: &ModelParams| {
                let states: Vec<Vec<Real>> = (0..3).map(|t| p[sid].row(t).to_vec()).collect();
                let pooled = attention_pool(&states, &c.pool, p);
                let u = match_vector(mode, p[gid].as_slice(), &pooled.pooled);
                let out = predict(&u, &c.mlp, p);
                (states, pooled, u, out)
            };
            let loss_fn = |p: &ModelParams| nll(&run(p).3.probs, label).0;

            let (states, pooled, u, out) = run(&p);
            let hg = p[gid].as_slice().to_vec();
            let (dstates, dg) = {
                let (values, mut grads) = p.split();
                let du = predict_backward(&values, &mut grads, &c.mlp, &u, &out, &nll_logit_grad(&out.probs, label));
                let (dg, db) = match_backward(mode, &hg, &pooled.pooled, &du);
                (attention_pool_backward(&values, &mut grads, &c.pool, &states, &pooled, &db), dg)
            };
            p.get_mut(sid).grad = Matrix::from_rows(&dstates);
            p.get_mut(gid).grad = Matrix::from_vec(1, 2, dg);
            let numeric = crate::numeric::finite_diff_grad(loss_fn, &mut p, 1e-6);
            for (q, n) in p.iter().zip(&numeric) {
                for (a, b) in q.grad.as_slice().iter().zip(n.as_slice()) {
                    assert!((a - b).abs() < 1e-8, "{mode:?} {}: {a} vs {b}", q.name);
                }
            }
        }
    }
}
