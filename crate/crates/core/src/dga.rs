//! Dynamic Gaussian attention.
//!
//! Each of `T` steps predicts a continuous focus position `p_t ∈ (0, l_ab)`
//! from the token states, the previous step state and the global vector;
//! scales the raw attention scores by a Gaussian centred on `p_t`
//! (`σ = D / 2`); and feeds the attended context into a GRU whose state
//! sequence `h̄_1..h̄_T` is the unit's output.
//!
//! ```text
//! m_t = Σ_i W1 h_i + W2 h̄_{t-1} + W3 h_g
//! p_t = l_ab · σ(v_pᵀ tanh(U_p m_t))
//! g_t[i] = exp(-(i - p_t)² / 2σ²)                 i = 0..l_ab-1
//! α[i] = ω_dᵀ tanh(W_d h_i + U_d h̄_{t-1} + M_d h_g)
//! c_t = Σ_i softmax(α ⊙ g_t)[i] · h_i
//! h̄_t = GRU(c_t, h̄_{t-1})
//! ```

use serde::Serialize;

use crate::encoder::{GruCache, GruCell};
use crate::numeric::{
    axpy, dot, sigmoid, softmax_backward, softmax_in_place, Grads, Init, Matrix, ModelParams, ParamId, Real, Values,
};

/// How the Gaussian is applied to the raw scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Modulation {
    /// `α ⊙ g`
    #[default]
    Multiplicative,
    /// `α + ln g`, i.e. a log-domain mask.
    LogDomain,
    /// `g ≡ 1`: plain dynamic attention without local context.
    Disabled,
}

/// How token states are pooled into the position generator's input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum PositionPool {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DgaConfig {
    pub hidden: usize,
    pub attention: usize,
    /// Window size `D`, in tokens. `σ = D / 2`.
    pub window: usize,
    /// Number of attention steps `T`.
    pub steps: usize,
    pub modulation: Modulation,
    pub position_pool: PositionPool,
}

impl DgaConfig {
    pub fn sigma(&self) -> Real {
        self.window as Real / 2.0
    }
}

/// Handles to every trainable tensor of the unit.
#[derive(Debug, Clone)]
pub struct DgaParams {
    pub config: DgaConfig,
    pub w1p: ParamId,
    pub w2p: ParamId,
    pub w3p: ParamId,
    /// `a × d`
    pub up: ParamId,
    /// `a × 1`
    pub vp: ParamId,
    pub wd: ParamId,
    pub ud: ParamId,
    pub md: ParamId,
    /// `a × 1`
    pub omega: ParamId,
    pub cell: GruCell,
}

impl DgaParams {
    pub fn register(params: &mut ModelParams, config: DgaConfig) -> Self {
        assert!(config.window >= 1 && config.steps >= 1, "window and steps must be at least 1");
        let (d, a) = (config.hidden, config.attention);
        let mut reg = |name: &str, rows, cols| params.register(&format!("dga.{name}"), rows, cols, Init::Xavier);
        let w1p = reg("w1p", d, d);
        let w2p = reg("w2p", d, d);
        let w3p = reg("w3p", d, d);
        let up = reg("up", a, d);
        let vp = reg("vp", a, 1);
        let wd = reg("wd", a, d);
        let ud = reg("ud", a, d);
        let md = reg("md", a, d);
        let omega = reg("omega", a, 1);
        let cell = GruCell::register(params, "dga.cell", d, d);
        Self { config, w1p, w2p, w3p, up, vp, wd, ud, md, omega, cell }
    }
}

/// `g[i] = exp(-(i - p)² / (2σ²))` over positions `0..len`, `σ = window / 2`.
pub fn gaussian_vector(p: Real, len: usize, window: usize) -> Vec<Real> {
    let sigma = window as Real / 2.0;
    let denom = 2.0 * sigma * sigma;
    (0..len)
        .map(|i| {
            let dist = i as Real - p;
            (-(dist * dist) / denom).exp()
        })
        .collect()
}

/// Per-pair quantities that do not change across steps.
#[derive(Debug, Clone)]
struct Precomputed {
    pooled_h: Vec<Real>,
    /// `W1 · pooled_h`
    p1: Vec<Real>,
    /// `W3 · h_g`
    p3: Vec<Real>,
    /// Row `i` is `W_d h_i`.
    wd_h: Matrix,
    /// `M_d h_g`
    md_hg: Vec<Real>,
}

impl Precomputed {
    fn new(dga: &DgaParams, params: &ModelParams, h: &Matrix, h_g: &[Real]) -> Self {
        let (len, d) = h.shape();
        let a = dga.config.attention;
        let mut pooled_h = vec![0.0; d];
        for i in 0..len {
            axpy(1.0, h.row(i), &mut pooled_h);
        }
        if dga.config.position_pool == PositionPool::Mean {
            let inv = 1.0 / len as Real;
            pooled_h.iter_mut().for_each(|v| *v *= inv);
        }
        let p1 = params[dga.w1p].matvec(&pooled_h);
        let p3 = params[dga.w3p].matvec(h_g);
        let wd = &params[dga.wd];
        let mut wd_h = Matrix::zeros(len, a);
        for i in 0..len {
            wd.matvec_into(h.row(i), wd_h.row_mut(i));
        }
        let md_hg = params[dga.md].matvec(h_g);
        Self { pooled_h, p1, p3, wd_h, md_hg }
    }
}

#[derive(Debug, Clone)]
struct PositionCache {
    m: Vec<Real>,
    q: Vec<Real>,
    s: Real,
    p: Real,
}

fn position_step(dga: &DgaParams, params: &ModelParams, pre: &Precomputed, len: usize, prev: &[Real]) -> PositionCache {
    let mut m = params[dga.w2p].matvec(prev);
    axpy(1.0, &pre.p1, &mut m);
    axpy(1.0, &pre.p3, &mut m);
    let mut q = params[dga.up].matvec(&m);
    q.iter_mut().for_each(|v| *v = v.tanh());
    let e = dot(params[dga.vp].as_slice(), &q);
    // Keep p strictly inside (0, l_ab) even where the sigmoid saturates.
    let s = sigmoid(e).clamp(Real::EPSILON, 1.0 - Real::EPSILON);
    PositionCache { m, q, s, p: len as Real * s }
}

/// Attention quantities for one step.
#[derive(Debug, Clone, Serialize)]
pub struct StepAttention {
    pub gaussian: Vec<Real>,
    pub raw_scores: Vec<Real>,
    pub modulated_scores: Vec<Real>,
    pub weights: Vec<Real>,
}

#[derive(Debug, Clone)]
struct AttentionCache {
    /// Row `i` is `tanh(W_d h_i + k)`.
    tau: Matrix,
    attn: StepAttention,
    context: Vec<Real>,
}

fn attention_step(
    dga: &DgaParams,
    params: &ModelParams,
    pre: &Precomputed,
    h: &Matrix,
    prev: &[Real],
    p: Real,
) -> AttentionCache {
    let len = h.rows();
    let a = dga.config.attention;
    let mut k = params[dga.ud].matvec(prev);
    axpy(1.0, &pre.md_hg, &mut k);
    let omega = params[dga.omega].as_slice();
    let mut tau = Matrix::zeros(len, a);
    let mut raw = Vec::with_capacity(len);
    for i in 0..len {
        let row = tau.row_mut(i);
        for ((t, &w), &kk) in row.iter_mut().zip(pre.wd_h.row(i)).zip(&k) {
            *t = (w + kk).tanh();
        }
        raw.push(dot(omega, row));
    }
    let (gaussian, modulated) = match dga.config.modulation {
        Modulation::Multiplicative => {
            let g = gaussian_vector(p, len, dga.config.window);
            let m: Vec<Real> = raw.iter().zip(&g).map(|(r, g)| r * g).collect();
            (g, m)
        }
        Modulation::LogDomain => {
            let g = gaussian_vector(p, len, dga.config.window);
            let sigma = dga.config.sigma();
            let m: Vec<Real> = raw
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let dist = i as Real - p;
                    r - dist * dist / (2.0 * sigma * sigma)
                })
                .collect();
            (g, m)
        }
        Modulation::Disabled => (vec![1.0; len], raw.iter().map(|r| r * 1.0).collect()),
    };
    let mut weights: Vec<Real> = modulated.clone();
    softmax_in_place(&mut weights);
    let mut context = vec![0.0; h.cols()];
    for (i, &w) in weights.iter().enumerate() {
        axpy(w, h.row(i), &mut context);
    }
    AttentionCache {
        tau,
        attn: StepAttention { gaussian, raw_scores: raw, modulated_scores: modulated, weights },
        context,
    }
}

/// Focus position for one step.
pub fn generate_position(h: &Matrix, prev: &[Real], h_g: &[Real], dga: &DgaParams, params: &ModelParams) -> Real {
    assert!(h.rows() > 0, "empty token sequence");
    let pre = Precomputed::new(dga, params, h, h_g);
    position_step(dga, params, &pre, h.rows(), prev).p
}

/// Context vector and attention details for one step at focus position `p`.
pub fn gaussian_attention(
    h: &Matrix,
    prev: &[Real],
    h_g: &[Real],
    p: Real,
    dga: &DgaParams,
    params: &ModelParams,
) -> (Vec<Real>, StepAttention) {
    let pre = Precomputed::new(dga, params, h, h_g);
    let cache = attention_step(dga, params, &pre, h, prev, p);
    (cache.context, cache.attn)
}

/// One step of the trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub position: Real,
    #[serde(flatten)]
    pub attention: StepAttention,
    pub context: Vec<Real>,
    pub state: Vec<Real>,
}

#[derive(Debug, Clone)]
struct StepCache {
    pos: PositionCache,
    att: AttentionCache,
    gru: GruCache,
}

/// Output of the DGA unit with everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct DgaOutput {
    /// `h̄_1..h̄_T`.
    pub states: Vec<Vec<Real>>,
    pre: Precomputed,
    steps: Vec<StepCache>,
}

impl DgaOutput {
    pub fn final_state(&self) -> &[Real] {
        self.states.last().expect("at least one step")
    }

    pub fn positions(&self) -> Vec<Real> {
        self.steps.iter().map(|s| s.pos.p).collect()
    }

    pub fn trace(&self) -> Vec<TraceStep> {
        self.steps
            .iter()
            .enumerate()
            .map(|(t, s)| TraceStep {
                step: t + 1,
                position: s.pos.p,
                attention: s.att.attn.clone(),
                context: s.att.context.clone(),
                state: s.gru.h.clone(),
            })
            .collect()
    }
}

/// Runs `T` steps from `h̄_0 = 0`.
pub fn run_dga(h: &Matrix, h_g: &[Real], dga: &DgaParams, params: &ModelParams) -> DgaOutput {
    assert!(h.rows() > 0, "empty token sequence");
    let d = dga.config.hidden;
    let pre = Precomputed::new(dga, params, h, h_g);
    let mut prev = vec![0.0; d];
    let mut states = Vec::with_capacity(dga.config.steps);
    let mut steps = Vec::with_capacity(dga.config.steps);
    for _ in 0..dga.config.steps {
        let pos = position_step(dga, params, &pre, h.rows(), &prev);
        let att = attention_step(dga, params, &pre, h, &prev, pos.p);
        let gru = dga.cell.forward(params, &att.context, &prev);
        prev.clone_from(&gru.h);
        states.push(gru.h.clone());
        steps.push(StepCache { pos, att, gru });
    }
    DgaOutput { states, pre, steps }
}

/// Backward through all steps given the gradient on each step state.
/// Returns the gradients on `H` and `h_g`.
pub fn run_dga_backward(
    dga: &DgaParams,
    values: &Values,
    grads: &mut Grads,
    h: &Matrix,
    h_g: &[Real],
    out: &DgaOutput,
    dstates: &[Vec<Real>],
) -> (Matrix, Vec<Real>) {
    let (len, d) = h.shape();
    let a = dga.config.attention;
    let sigma = dga.config.sigma();
    let inv_var = 1.0 / (sigma * sigma);
    let omega = values[dga.omega].as_slice();
    let vp = values[dga.vp].as_slice();

    let mut dh = Matrix::zeros(len, d);
    let mut dh_g = vec![0.0; d];
    let mut dwd_h = Matrix::zeros(len, a);
    let mut dmd_hg = vec![0.0; a];
    let mut dp1 = vec![0.0; d];
    let mut dp3 = vec![0.0; d];
    let mut carry = vec![0.0; d];
    let zeros = vec![0.0; d];

    for t in (0..out.steps.len()).rev() {
        let st = &out.steps[t];
        let prev: &[Real] = if t == 0 { &zeros } else { &out.states[t - 1] };
        let mut dstate = dstates[t].clone();
        axpy(1.0, &carry, &mut dstate);

        let mut dc = vec![0.0; d];
        let mut dprev = vec![0.0; d];
        dga.cell.backward(values, grads, &st.gru, &dstate, &mut dc, &mut dprev);

        let attn = &st.att.attn;
        let mut dw = vec![0.0; len];
        for i in 0..len {
            dw[i] = dot(&dc, h.row(i));
            axpy(attn.weights[i], &dc, dh.row_mut(i));
        }
        let dmod = softmax_backward(&attn.weights, &dw);
        let p = st.pos.p;
        let mut dpos = 0.0;
        let draw: Vec<Real> = match dga.config.modulation {
            Modulation::Multiplicative => (0..len)
                .map(|i| {
                    let g = attn.gaussian[i];
                    dpos += dmod[i] * attn.raw_scores[i] * g * (i as Real - p) * inv_var;
                    dmod[i] * g
                })
                .collect(),
            Modulation::LogDomain => {
                for (i, dm) in dmod.iter().enumerate() {
                    dpos += dm * (i as Real - p) * inv_var;
                }
                dmod
            }
            Modulation::Disabled => dmod,
        };

        let mut dk = vec![0.0; a];
        let mut domega = vec![0.0; a];
        let mut dpre = vec![0.0; a];
        for i in 0..len {
            let tau = st.att.tau.row(i);
            let di = draw[i];
            if di == 0.0 {
                continue;
            }
            axpy(di, tau, &mut domega);
            for j in 0..a {
                dpre[j] = di * omega[j] * (1.0 - tau[j] * tau[j]);
            }
            axpy(1.0, &dpre, dwd_h.row_mut(i));
            axpy(1.0, &dpre, &mut dk);
        }
        axpy(1.0, &domega, grads[dga.omega].as_mut_slice());
        grads[dga.ud].add_outer(&dk, prev);
        values[dga.ud].matvec_t_acc(&dk, &mut dprev);
        axpy(1.0, &dk, &mut dmd_hg);

        if dpos != 0.0 {
            let s = st.pos.s;
            let de = dpos * len as Real * s * (1.0 - s);
            let q = &st.pos.q;
            axpy(de, q, grads[dga.vp].as_mut_slice());
            let dq: Vec<Real> = (0..a).map(|j| de * vp[j] * (1.0 - q[j] * q[j])).collect();
            grads[dga.up].add_outer(&dq, &st.pos.m);
            let mut dm = vec![0.0; d];
            values[dga.up].matvec_t_acc(&dq, &mut dm);
            grads[dga.w2p].add_outer(&dm, prev);
            values[dga.w2p].matvec_t_acc(&dm, &mut dprev);
            axpy(1.0, &dm, &mut dp1);
            axpy(1.0, &dm, &mut dp3);
        }
        carry = dprev;
    }

    let pre = &out.pre;
    grads[dga.w1p].add_outer(&dp1, &pre.pooled_h);
    let mut dpooled = vec![0.0; d];
    values[dga.w1p].matvec_t_acc(&dp1, &mut dpooled);
    if dga.config.position_pool == PositionPool::Mean {
        let inv = 1.0 / len as Real;
        dpooled.iter_mut().for_each(|v| *v *= inv);
    }
    grads[dga.w3p].add_outer(&dp3, h_g);
    values[dga.w3p].matvec_t_acc(&dp3, &mut dh_g);
    let wd = &values[dga.wd];
    let gwd = &mut grads[dga.wd];
    for i in 0..len {
        gwd.add_outer(dwd_h.row(i), h.row(i));
    }
    for i in 0..len {
        let row = dh.row_mut(i);
        axpy(1.0, &dpooled, row);
        wd.matvec_t_acc(dwd_h.row(i), row);
    }
    grads[dga.md].add_outer(&dmd_hg, h_g);
    values[dga.md].matvec_t_acc(&dmd_hg, &mut dh_g);
    (dh, dh_g)
}
