use ndarray::Array2;

use super::tape::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Role of a tensor inside a layer; the L2 penalty only covers weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Scalar,
}

#[derive(Debug, Clone)]
pub struct ParamTensor {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub requires_grad: bool,
    pub kind: ParamKind,
}

impl ParamTensor {
    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }
}

/// Flat arena of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<ParamTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix, kind: ParamKind) -> ParamId {
        let grad = Array2::zeros(value.dim());
        self.params.push(ParamTensor {
            name: name.into(),
            value,
            grad,
            requires_grad: true,
            kind,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &ParamTensor {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamTensor {
        &mut self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamTensor)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total number of scalar entries across all tensors.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Overwrites every `grad` with the given gradients.
    pub fn set_grads(&mut self, grads: &Gradients) {
        for (p, g) in self.params.iter_mut().zip(&grads.by_param) {
            p.grad.assign(g);
        }
    }

    pub fn values(&self) -> Vec<Matrix> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Matrix]) {
        for (p, v) in self.params.iter_mut().zip(snapshot) {
            p.value.assign(v);
        }
    }
}

/// Gradient of a scalar with respect to every parameter in a store.
#[derive(Debug, Clone)]
pub struct Gradients {
    by_param: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            by_param: store
                .params
                .iter()
                .map(|p| Array2::zeros(p.value.dim()))
                .collect(),
        }
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: &Matrix) {
        self.by_param[id.0] += g;
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.by_param[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.by_param.iter().enumerate().map(|(i, g)| (ParamId(i), g))
    }
}
