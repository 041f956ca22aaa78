//! The full network: encoder → DGA → pooling/matching/MLP, with the batch
//! loss and its hand-written gradient.

use serde::Serialize;

use crate::classifier::{
    attention_pool, attention_pool_backward, match_backward, match_vector, nll, nll_logit_grad, predict,
    predict_backward, Classifier, ClassifierConfig, LossValue, MatchMode, MlpOutput, PoolOutput, Regularizer,
};
use crate::dga::{run_dga, run_dga_backward, DgaConfig, DgaOutput, DgaParams, Modulation, PositionPool};
use crate::encoder::{EncodedPair, Encoder, EncoderConfig, EncoderInput};
use crate::error::{Error, Result};
use crate::numeric::{ModelParams, Real};

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub attention: usize,
    pub window: usize,
    pub steps: usize,
    pub classes: usize,
    pub mlp_hidden: usize,
    pub modulation: Modulation,
    pub position_pool: PositionPool,
    pub match_mode: MatchMode,
    pub external_dim: Option<usize>,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("vocab size", self.vocab_size),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("attention", self.attention),
            ("window", self.window),
            ("steps", self.steps),
            ("mlp hidden", self.mlp_hidden),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Input(format!("{name} must be at least 1")));
            }
        }
        if self.classes < 2 {
            return Err(Error::Input("need at least two classes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DgaNet {
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub dga: DgaParams,
    pub classifier: Classifier,
}

/// Every intermediate of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub encoded: EncodedPair,
    pub dga: DgaOutput,
    pub pooled: PoolOutput,
    pub matched: Vec<Real>,
    pub head: MlpOutput,
}

impl Forward {
    pub fn probs(&self) -> &[Real] {
        &self.head.probs
    }
}

/// Lowest-index argmax.
pub fn argmax(v: &[Real]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl DgaNet {
    /// Registers every parameter in a fresh registry seeded with `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<(Self, ModelParams)> {
        config.validate()?;
        let mut params = ModelParams::new(seed);
        let encoder = Encoder::register(
            &mut params,
            EncoderConfig {
                vocab_size: config.vocab_size,
                hidden: config.hidden,
                layers: config.layers,
                external_dim: config.external_dim,
            },
        );
        let dga = DgaParams::register(
            &mut params,
            DgaConfig {
                hidden: config.hidden,
                attention: config.attention,
                window: config.window,
                steps: config.steps,
                modulation: config.modulation,
                position_pool: config.position_pool,
            },
        );
        let classifier = Classifier::register(
            &mut params,
            ClassifierConfig {
                hidden: config.hidden,
                attention: config.attention,
                mlp_hidden: config.mlp_hidden,
                classes: config.classes,
                mode: config.match_mode,
            },
        );
        Ok((Self { config, encoder, dga, classifier }, params))
    }

    pub fn forward(&self, params: &ModelParams, input: EncoderInput<'_>) -> Result<Forward> {
        let encoded = self.encoder.encode(params, input)?;
        let dga = run_dga(&encoded.h, &encoded.h_g, &self.dga, params);
        let pooled = attention_pool(&dga.states, &self.classifier.pool, params);
        let matched = match_vector(self.config.match_mode, &encoded.h_g, &pooled.pooled);
        let head = predict(&matched, &self.classifier.mlp, params);
        Ok(Forward { encoded, dga, pooled, matched, head })
    }

    /// Accumulates `scale · ∂(-log P(label))/∂θ` into the registry's
    /// gradients and returns the unscaled negative log-likelihood.
    pub fn accumulate_example(
        &self,
        params: &mut ModelParams,
        input: EncoderInput<'_>,
        label: usize,
        scale: Real,
    ) -> Result<(Real, bool)> {
        let fwd = self.forward(params, input)?;
        let (value, clamped) = nll(fwd.probs(), label);
        let mut dlogits = nll_logit_grad(fwd.probs(), label);
        dlogits.iter_mut().for_each(|g| *g *= scale);

        let (values, mut grads) = params.split();
        let cls = &self.classifier;
        let du = predict_backward(&values, &mut grads, &cls.mlp, &fwd.matched, &fwd.head, &dlogits);
        let (mut dh_g, dh_bar) = match_backward(self.config.match_mode, &fwd.encoded.h_g, &fwd.pooled.pooled, &du);
        let dstates = attention_pool_backward(&values, &mut grads, &cls.pool, &fwd.dga.states, &fwd.pooled, &dh_bar);
        let (dh, dh_g_dga) =
            run_dga_backward(&self.dga, &values, &mut grads, &fwd.encoded.h, &fwd.encoded.h_g, &fwd.dga, &dstates);
        crate::numeric::axpy(1.0, &dh_g_dga, &mut dh_g);
        self.encoder.backward(&values, &mut grads, &fwd.encoded, &dh, &dh_g);
        Ok((value, clamped))
    }

    /// Batch loss without gradients.
    pub fn batch_loss(
        &self,
        params: &ModelParams,
        batch: &[(EncoderInput<'_>, usize)],
        weight_decay: Real,
        reg: Regularizer,
    ) -> Result<LossValue> {
        let mut predictions = Vec::with_capacity(batch.len());
        let mut labels = Vec::with_capacity(batch.len());
        for (input, label) in batch {
            predictions.push(self.forward(params, *input)?.head.probs);
            labels.push(*label);
        }
        Ok(crate::classifier::loss(&predictions, &labels, params, weight_decay, reg))
    }

    /// Batch loss, with its gradient added into the registry (mean over the
    /// batch plus the regulariser).
    pub fn batch_gradient(
        &self,
        params: &mut ModelParams,
        batch: &[(EncoderInput<'_>, usize)],
        weight_decay: Real,
        reg: Regularizer,
    ) -> Result<LossValue> {
        assert!(!batch.is_empty(), "empty batch");
        let scale = 1.0 / batch.len() as Real;
        let mut ce = 0.0;
        let mut clamped = 0;
        for (input, label) in batch {
            let (v, hit) = self.accumulate_example(params, *input, *label, scale)?;
            ce += v;
            clamped += hit as usize;
        }
        ce *= scale;
        let regularization = reg.value(params, weight_decay);
        reg.accumulate_grad(params, weight_decay);
        Ok(LossValue { total: ce + regularization, cross_entropy: ce, regularization, clamped })
    }
}
