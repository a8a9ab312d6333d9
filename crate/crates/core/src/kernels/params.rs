use rand::Rng;

use super::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// How a parameter is initialized and whether weight decay applies to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Fan-in scaled uniform, decayed.
    Weight { fan_in: usize },
    /// Zeros, not decayed.
    Bias,
    /// Ones, not decayed.
    Gain,
    /// Zeros, not decayed.
    Shift,
}

impl ParamKind {
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::Weight { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub value: FeatureMatrix,
    pub grad: FeatureMatrix,
    /// First and second moment estimates.
    pub moments: [FeatureMatrix; 2],
}

/// Named parameter tensors with their gradient and optimizer state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    /// Optimizer steps taken so far.
    pub step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, kind: ParamKind, rng: &mut impl Rng) -> ParamId {
        let mut value = FeatureMatrix::zeros(rows, cols);
        match kind {
            ParamKind::Weight { fan_in } => {
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                for v in value.data_mut() {
                    *v = rng.gen_range(-bound..bound);
                }
            }
            ParamKind::Gain => value.fill(1.0),
            ParamKind::Bias | ParamKind::Shift => {}
        }
        self.params.push(Param {
            name: name.into(),
            kind,
            grad: FeatureMatrix::zeros(rows, cols),
            moments: [FeatureMatrix::zeros(rows, cols), FeatureMatrix::zeros(rows, cols)],
            value,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &FeatureMatrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut FeatureMatrix {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &FeatureMatrix {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut FeatureMatrix {
        &mut self.params[id.0].grad
    }

    pub fn accumulate_grad(&mut self, id: ParamId, g: &FeatureMatrix) {
        self.params[id.0].grad.add_assign(g);
    }

    /// Adds a gradient given as a flat slice, for `1 × n` bias-like parameters.
    pub fn accumulate_grad_slice(&mut self, id: ParamId, g: &[f64]) {
        let grad = &mut self.params[id.0].grad;
        assert_eq!(grad.data().len(), g.len(), "gradient length for `{}`", self.params[id.0].name);
        for (a, b) in grad.data_mut().iter_mut().zip(g) {
            *a += b;
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn count_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.data().len()).sum()
    }
}
