//! Sentence-pair encoder: token embeddings, a stack of unidirectional GRU
//! layers, and a learned softmax mixture over the layers' outputs.

pub mod embeddings;
pub mod gru;
pub mod tokenize;
pub mod vocab;

pub use embeddings::{read_embeddings, write_embeddings};
pub use gru::{gru_cell, GruCache, GruCell};
pub use tokenize::{tokenize_pair, words, TokenizeOptions, TokenizedPair};
pub use vocab::Vocabulary;

use crate::error::{Error, Result};
use crate::numeric::{axpy, softmax, softmax_backward, Grads, Init, Matrix, ModelParams, ParamId, Real, Values};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden: usize,
    pub layers: usize,
    /// When set, the embedding table and lower layers are replaced by
    /// precomputed per-token vectors of this width feeding a single GRU layer.
    pub external_dim: Option<usize>,
}

/// What the encoder consumes for one pair.
#[derive(Debug, Clone, Copy)]
pub enum EncoderInput<'a> {
    Tokens(&'a [u32]),
    /// `l_ab × external_dim` precomputed vectors.
    External(&'a Matrix),
}

impl EncoderInput<'_> {
    pub fn len(&self) -> usize {
        match self {
            EncoderInput::Tokens(ids) => ids.len(),
            EncoderInput::External(m) => m.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub embedding: Option<ParamId>,
    pub layers: Vec<GruCell>,
    /// Raw layer-mix weights, `layers × 1`.
    pub mix: ParamId,
}

/// Encoder output plus what the backward pass needs.
#[derive(Debug, Clone)]
pub struct EncodedPair {
    /// `l_ab × d` contextual vectors.
    pub h: Matrix,
    /// Final-layer state at position 0.
    pub h_g: Vec<Real>,
    /// Per-layer state sequences, each `l_ab × d`.
    pub layer_states: Vec<Matrix>,
    /// Softmax-normalised layer mixture.
    pub mix: Vec<Real>,
    caches: Vec<Vec<GruCache>>,
    ids: Option<Vec<u32>>,
}

impl EncodedPair {
    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows() == 0
    }
}

impl Encoder {
    pub fn register(params: &mut ModelParams, config: EncoderConfig) -> Self {
        let d = config.hidden;
        let (embedding, layers) = match config.external_dim {
            Some(dim) => (None, vec![GruCell::register(params, "encoder.layer0", dim, d)]),
            None => {
                let emb = params.register("encoder.embedding", config.vocab_size, d, Init::Xavier);
                let layers =
                    (0..config.layers).map(|l| GruCell::register(params, &format!("encoder.layer{l}"), d, d)).collect();
                (Some(emb), layers)
            }
        };
        let mix = params.register("encoder.mix", layers.len(), 1, Init::Zeros);
        Self { config, embedding, layers, mix }
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    pub fn encode(&self, params: &ModelParams, input: EncoderInput<'_>) -> Result<EncodedPair> {
        let d = self.config.hidden;
        let len = input.len();
        if len == 0 {
            return Err(Error::Internal("cannot encode an empty sequence".into()));
        }
        let (first_inputs, ids): (Matrix, Option<Vec<u32>>) = match (input, self.embedding) {
            (EncoderInput::Tokens(ids), Some(emb)) => {
                let table = &params[emb];
                let mut x = Matrix::zeros(len, d);
                for (t, &id) in ids.iter().enumerate() {
                    if id as usize >= table.rows() {
                        return Err(Error::Internal(format!(
                            "token id {id} out of range for vocabulary of {}",
                            table.rows()
                        )));
                    }
                    x.row_mut(t).copy_from_slice(table.row(id as usize));
                }
                (x, Some(ids.to_vec()))
            }
            (EncoderInput::External(m), None) => {
                let want = self.layers[0].input;
                if m.cols() != want {
                    return Err(Error::Internal(format!("external vectors have width {}, expected {want}", m.cols())));
                }
                (m.clone(), None)
            }
            (EncoderInput::Tokens(_), None) => {
                return Err(Error::Internal("model expects external embeddings, got token ids".into()))
            }
            (EncoderInput::External(_), Some(_)) => {
                return Err(Error::Internal("model expects token ids, got external embeddings".into()))
            }
        };

        let mut layer_states = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        for (l, cell) in self.layers.iter().enumerate() {
            let inputs = if l == 0 { &first_inputs } else { &layer_states[l - 1] };
            let mut states = Matrix::zeros(len, d);
            let mut layer_cache = Vec::with_capacity(len);
            let mut h = vec![0.0; d];
            for t in 0..len {
                let cache = cell.forward(params, inputs.row(t), &h);
                states.row_mut(t).copy_from_slice(&cache.h);
                h.clone_from(&cache.h);
                layer_cache.push(cache);
            }
            layer_states.push(states);
            caches.push(layer_cache);
        }

        let mix = softmax(params[self.mix].as_slice()).expect("at least one layer");
        let mut h = Matrix::zeros(len, d);
        for (states, &weight) in layer_states.iter().zip(&mix) {
            axpy(weight, states.as_slice(), h.as_mut_slice());
        }
        let h_g = layer_states.last().expect("at least one layer").row(0).to_vec();
        Ok(EncodedPair { h, h_g, layer_states, mix, caches, ids })
    }

    /// Backward from `dh` (`l_ab × d`) and `dh_g` into every encoder parameter.
    pub fn backward(&self, values: &Values, grads: &mut Grads, enc: &EncodedPair, dh: &Matrix, dh_g: &[Real]) {
        let d = self.config.hidden;
        let len = enc.len();
        let layers = self.layers.len();

        let dmix: Vec<Real> =
            enc.layer_states.iter().map(|s| crate::numeric::dot(s.as_slice(), dh.as_slice())).collect();
        let draw = softmax_backward(&enc.mix, &dmix);
        axpy(1.0, &draw, grads[self.mix].as_mut_slice());

        // Upstream gradient on the current layer's state sequence.
        let mut dstates = Matrix::zeros(len, d);
        axpy(enc.mix[layers - 1], dh.as_slice(), dstates.as_mut_slice());
        axpy(1.0, dh_g, dstates.row_mut(0));

        for l in (0..layers).rev() {
            let cell = &self.layers[l];
            let mut dinputs = Matrix::zeros(len, cell.input);
            let mut carry = vec![0.0; d];
            for t in (0..len).rev() {
                let mut dout = dstates.row(t).to_vec();
                axpy(1.0, &carry, &mut dout);
                let mut dh_prev = vec![0.0; d];
                cell.backward(values, grads, &enc.caches[l][t], &dout, dinputs.row_mut(t), &mut dh_prev);
                carry = dh_prev;
            }
            if l > 0 {
                dstates = dinputs;
                axpy(enc.mix[l - 1], dh.as_slice(), dstates.as_mut_slice());
            } else if let (Some(emb), Some(ids)) = (self.embedding, &enc.ids) {
                let table = &mut grads[emb];
                for (t, &id) in ids.iter().enumerate() {
                    axpy(1.0, dinputs.row(t), table.row_mut(id as usize));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(layers: usize) -> EncoderConfig {
        EncoderConfig { vocab_size: 10, hidden: 4, layers, external_dim: None }
    }

    #[test]
    fn zero_weights_give_zero_outputs() {
        let mut p = ModelParams::new(0);
        let enc = Encoder::register(&mut p, config(2));
        for q in p.iter_mut() {
            q.value.fill(0.0);
        }
        let out = enc.encode(&p, EncoderInput::Tokens(&[2, 5, 3, 6, 2])).unwrap();
        assert!(out.h.as_slice().iter().all(|v| *v == 0.0));
        assert!(out.h_g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_layer_mix_is_identity() {
        let mut p = ModelParams::new(3);
        let enc = Encoder::register(&mut p, config(1));
        p.get_mut(enc.mix).value.set(0, 0, 2.7);
        let out = enc.encode(&p, EncoderInput::Tokens(&[2, 5, 3, 6, 2])).unwrap();
        assert_eq!(out.mix, vec![1.0]);
        assert_eq!(out.h, out.layer_states[0]);
    }

    #[test]
    fn two_layers_with_zero_mix_average() {
        let mut p = ModelParams::new(3);
        let enc = Encoder::register(&mut p, config(2));
        let out = enc.encode(&p, EncoderInput::Tokens(&[2, 7, 3, 8, 9, 2])).unwrap();
        for t in 0..out.len() {
            for j in 0..4 {
                let avg = 0.5 * out.layer_states[0].get(t, j) + 0.5 * out.layer_states[1].get(t, j);
                assert!((out.h.get(t, j) - avg).abs() < 1e-15);
            }
        }
        assert_eq!(out.h_g, out.layer_states[1].row(0));
    }

    #[test]
    fn encode_is_deterministic() {
        let mut p = ModelParams::new(9);
        let enc = Encoder::register(&mut p, config(2));
        let a = enc.encode(&p, EncoderInput::Tokens(&[2, 4, 3, 5, 2])).unwrap();
        let b = enc.encode(&p, EncoderInput::Tokens(&[2, 4, 3, 5, 2])).unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.h), bits(&b.h));
    }

    #[test]
    fn out_of_range_id_is_internal_error() {
        let mut p = ModelParams::new(0);
        let enc = Encoder::register(&mut p, config(1));
        assert!(matches!(enc.encode(&p, EncoderInput::Tokens(&[2, 10, 2])), Err(Error::Internal(_))));
    }

    #[test]
    fn external_mode_uses_one_layer_of_given_width() {
        let mut p = ModelParams::new(0);
        let enc = Encoder::register(&mut p, EncoderConfig { external_dim: Some(3), ..config(2) });
        assert!(enc.embedding.is_none());
        assert_eq!(enc.layers.len(), 1);
        let x = Matrix::from_vec(4, 3, (0..12).map(|i| i as Real * 0.1).collect());
        let out = enc.encode(&p, EncoderInput::External(&x)).unwrap();
        assert_eq!(out.h.shape(), (4, 4));
        assert!(enc.encode(&p, EncoderInput::Tokens(&[2, 3, 2])).is_err());
    }

    proptest::proptest! {
        #[test]
        fn normalized_mix_is_positive_and_sums_to_one(raw in proptest::collection::vec(-30.0f64..30.0, 1..6)) {
            let mix = softmax(&raw).unwrap();
            proptest::prop_assert!((mix.iter().sum::<Real>() - 1.0).abs() < 1e-12);
            proptest::prop_assert!(mix.iter().all(|&w| w > 0.0));
        }
    }
}
