use std::fmt::Debug;
use std::marker::PhantomData;

use num_traits::{Float, Num};

use super::{BoundaryModel, EdgeWeightModel, PathAlgebra};
use crate::error::Result;

/// Tropical semiring: `⊕ = min`, `⊗ = +`, zero `+∞`, one `0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinPlus<T>(PhantomData<T>);

impl<T> MinPlus<T> {
    pub fn new() -> Self {
        Self(PhantomData)
    }
}

impl<T: Float + Debug> PathAlgebra for MinPlus<T> {
    type Value = T;
    type Weight = T;
    const IS_SEMIRING: bool = true;

    fn zero(&self) -> T {
        T::infinity()
    }

    fn one(&self) -> T {
        T::zero()
    }

    fn multiply(&self, h: &T, w: &T) -> Result<T> {
        Ok(*h + *w)
    }

    fn add(&self, a: &T, b: &T) -> T {
        a.min(*b)
    }
}

/// Walk-counting semiring over the naturals: `⊕ = +`, `⊗ = ×`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Counting<T>(PhantomData<T>);

impl<T> Counting<T> {
    pub fn new() -> Self {
        Self(PhantomData)
    }
}

impl<T: Num + Clone + Debug> PathAlgebra for Counting<T> {
    type Value = T;
    type Weight = T;
    const IS_SEMIRING: bool = true;

    fn zero(&self) -> T {
        T::zero()
    }

    fn one(&self) -> T {
        T::one()
    }

    fn multiply(&self, h: &T, w: &T) -> Result<T> {
        Ok(h.clone() * w.clone())
    }

    fn add(&self, a: &T, b: &T) -> T {
        a.clone() + b.clone()
    }
}

/// Reachability semiring: `⊕ = ∨`, `⊗ = ∧`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Boolean;

impl PathAlgebra for Boolean {
    type Value = bool;
    type Weight = bool;
    const IS_SEMIRING: bool = true;

    fn zero(&self) -> bool {
        false
    }

    fn one(&self) -> bool {
        true
    }

    fn multiply(&self, h: &bool, w: &bool) -> Result<bool> {
        Ok(*h && *w)
    }

    fn add(&self, a: &bool, b: &bool) -> bool {
        *a || *b
    }
}

/// Edge weights for exact algebras: one constant, optionally overridden per relation.
#[derive(Debug, Clone)]
pub struct ConstantWeights<W> {
    pub default: W,
    pub per_relation: Vec<Option<W>>,
}

impl<W: Clone> ConstantWeights<W> {
    pub fn new(default: W) -> Self {
        Self {
            default,
            per_relation: Vec::new(),
        }
    }

    pub fn with_relation(mut self, relation: usize, weight: W) -> Self {
        if self.per_relation.len() <= relation {
            self.per_relation.resize(relation + 1, None);
        }
        self.per_relation[relation] = Some(weight);
        self
    }
}

impl<A: PathAlgebra> EdgeWeightModel<A> for ConstantWeights<A::Weight> {
    fn weight(&self, _step: usize, relation: usize, _query_relation: usize) -> A::Weight {
        self.per_relation
            .get(relation)
            .and_then(Clone::clone)
            .unwrap_or_else(|| self.default.clone())
    }
}

/// `one` on the diagonal, `zero` elsewhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitBoundary;

impl<A: PathAlgebra> BoundaryModel<A> for UnitBoundary {
    fn boundary(&self, algebra: &A, source: usize, _q: usize, node: usize) -> A::Value {
        if source == node {
            algebra.one()
        } else {
            algebra.zero()
        }
    }
}
