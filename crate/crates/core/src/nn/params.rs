use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Matrix<T>,
    pub grad: Matrix<T>,
    /// Adam first and second moments.
    pub m: Matrix<T>,
    pub v: Matrix<T>,
}

/// Named dense arrays with gradient slots and optimizer state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterStore<T> {
    params: Vec<Parameter<T>>,
    /// Number of optimizer steps taken.
    pub step: u64,
}

impl<T: Scalar> ParameterStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix<T>) -> ParamId {
        let (r, c) = value.shape();
        self.params.push(Parameter {
            name: name.into(),
            grad: Matrix::zeros(r, c),
            m: Matrix::zeros(r, c),
            v: Matrix::zeros(r, c),
            value,
        });
        ParamId(self.params.len() - 1)
    }

    /// Adds a `rows × cols` array drawn from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| T::from_f64_lossy(rng.gen_range(-bound..=bound)))
            .collect();
        self.add(name, Matrix::from_vec(rows, cols, data).expect("sized"))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &Matrix<T> {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    /// Adds `scale · grads` into the gradient slots.
    pub fn accumulate(&mut self, grads: &Gradients<T>, scale: T) {
        for (id, g) in grads.iter() {
            self.params[id.0].grad.add_scaled(g, scale);
        }
    }

    pub fn grad_norm(&self) -> T {
        self.params
            .iter()
            .fold(T::zero(), |acc, p| acc + p.grad.sq_norm())
            .sqrt()
    }
}

/// Sparse per-parameter gradients produced by one backward pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gradients<T> {
    slots: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn new(num_params: usize) -> Self {
        Self {
            slots: vec![None; num_params],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix<T>> {
        self.slots.get(id.0).and_then(Option::as_ref)
    }

    pub fn add(&mut self, id: ParamId, grad: &Matrix<T>) {
        if self.slots.len() <= id.0 {
            self.slots.resize(id.0 + 1, None);
        }
        match &mut self.slots[id.0] {
            Some(acc) => acc.add_assign(grad),
            slot @ None => *slot = Some(grad.clone()),
        }
    }

    pub fn add_owned(&mut self, id: ParamId, grad: Matrix<T>) {
        if self.slots.len() <= id.0 {
            self.slots.resize(id.0 + 1, None);
        }
        match &mut self.slots[id.0] {
            Some(acc) => acc.add_assign(&grad),
            slot @ None => *slot = Some(grad),
        }
    }

    /// `self += scale · other`.
    pub fn merge(&mut self, other: &Gradients<T>, scale: T) {
        for (id, g) in other.iter() {
            if self.slots.len() <= id.0 {
                self.slots.resize(id.0 + 1, None);
            }
            match &mut self.slots[id.0] {
                Some(acc) => acc.add_scaled(g, scale),
                slot @ None => *slot = Some(g.map(|v| v * scale)),
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix<T>)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }
}
