use std::collections::HashMap;
use std::ops::{Index, IndexMut};

use rand::Rng;

use super::rng::{stream, PARAM_STREAMS};
use super::{Matrix, Real};

/// Handle to a parameter inside a [`ModelParams`] registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// How a freshly registered tensor is filled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / (rows + cols))`.
    Xavier,
    Zeros,
    Constant(Real),
}

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { name: name.into(), value, grad }
    }
}

/// Flat registry of every trainable tensor, each with its gradient buffer.
#[derive(Debug, Clone)]
pub struct ModelParams {
    seed: u64,
    params: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ModelParams {
    pub fn new(seed: u64) -> Self {
        Self { seed, params: Vec::new(), by_name: HashMap::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Registers a tensor. Each parameter draws from its own random stream
    /// keyed by registration order, so adding a parameter never perturbs the
    /// initial values of the ones registered before it.
    ///
    /// Panics on a duplicate name.
    pub fn register(&mut self, name: &str, rows: usize, cols: usize, init: Init) -> ParamId {
        assert!(!self.by_name.contains_key(name), "duplicate parameter name {name}");
        let index = self.params.len();
        let mut value = Matrix::zeros(rows, cols);
        match init {
            Init::Zeros => {}
            Init::Constant(c) => value.fill(c),
            Init::Xavier => {
                let bound = (6.0 / (rows + cols) as Real).sqrt();
                let mut rng = stream(self.seed, PARAM_STREAMS - 1 - index as u64);
                for v in value.as_mut_slice() {
                    *v = rng.gen_range(-bound..=bound);
                }
            }
        }
        self.by_name.insert(name.to_string(), index);
        self.params.push(Parameter::new(name, value));
        ParamId(index)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Read-only value view plus writable gradient view, for backward passes
    /// that read weights while accumulating into gradients.
    pub fn split(&mut self) -> (Values<'_>, Grads<'_>) {
        let mut values = Vec::with_capacity(self.params.len());
        let mut grads = Vec::with_capacity(self.params.len());
        for p in &mut self.params {
            values.push(&p.value);
            grads.push(&mut p.grad);
        }
        (Values(values), Grads(grads))
    }

    /// Copies every value out, for snapshots (early stopping).
    pub fn snapshot(&self) -> Vec<Matrix> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Matrix]) {
        assert_eq!(snapshot.len(), self.params.len());
        for (p, v) in self.params.iter_mut().zip(snapshot) {
            assert_eq!(p.value.shape(), v.shape());
            p.value.clone_from(v);
        }
    }
}

impl Index<ParamId> for ModelParams {
    type Output = Matrix;

    fn index(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }
}

pub struct Values<'a>(Vec<&'a Matrix>);

impl Index<ParamId> for Values<'_> {
    type Output = Matrix;

    fn index(&self, id: ParamId) -> &Matrix {
        self.0[id.0]
    }
}

pub struct Grads<'a>(Vec<&'a mut Matrix>);

impl Index<ParamId> for Grads<'_> {
    type Output = Matrix;

    fn index(&self, id: ParamId) -> &Matrix {
        self.0[id.0]
    }
}

impl IndexMut<ParamId> for Grads<'_> {
    fn index_mut(&mut self, id: ParamId) -> &mut Matrix {
        self.0[id.0]
    }
}
