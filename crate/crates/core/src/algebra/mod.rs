//! Path algebras: the `(⊕, ⊗)` structure propagation is generic over.
//!
//! Exact semirings ([`MinPlus`], [`Counting`], [`Boolean`]) serve as verification
//! instances with closed-form oracles. [`NeuralAlgebra`] is the learnable vector
//! algebra; it is not a semiring and is never tested for distributivity.

mod exact;
pub(crate) mod neural;

pub use exact::{Boolean, ConstantWeights, Counting, MinPlus, UnitBoundary};
pub use neural::{
    NeuralAggregator, NeuralAlgebra, NeuralWeights, PnaLayer, QueryBoundary, RelationWeights,
};

use crate::error::Result;

/// Context an aggregation may depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateContext {
    /// Propagation step, starting at 1.
    pub step: usize,
    /// Precomputed full-graph degree of the receiving node.
    pub degree: usize,
}

pub trait PathAlgebra {
    type Value: Clone + std::fmt::Debug + PartialEq;
    type Weight: Clone + std::fmt::Debug;

    /// Whether `⊗` distributes over `⊕`.
    const IS_SEMIRING: bool;

    /// Identity of `⊕`.
    fn zero(&self) -> Self::Value;
    /// Identity of `⊗`.
    fn one(&self) -> Self::Value;
    fn multiply(&self, h: &Self::Value, w: &Self::Weight) -> Result<Self::Value>;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;

    /// n-ary `⊕`. The default folds [`PathAlgebra::add`] from the zero element.
    fn aggregate(&self, values: &[Self::Value], _ctx: AggregateContext) -> Self::Value {
        values.iter().fold(self.zero(), |acc, v| self.add(&acc, v))
    }

    /// Weights a message by a node priority. Exact algebras ignore the priority and
    /// use it for selection only.
    fn scale(&self, value: Self::Value, _priority: f64) -> Self::Value {
        value
    }
}

/// `w_q(x, r, y)`: the edge representation given the relation and the query relation.
pub trait EdgeWeightModel<A: PathAlgebra> {
    fn weight(&self, step: usize, relation: usize, query_relation: usize) -> A::Weight;
}

/// `h⁽⁰⁾(u, v)`: the boundary condition.
pub trait BoundaryModel<A: PathAlgebra> {
    fn boundary(&self, algebra: &A, source: usize, query_relation: usize, node: usize) -> A::Value;
}

/// `algebra.multiply` as a free function.
pub fn multiply<A: PathAlgebra>(algebra: &A, h: &A::Value, w: &A::Weight) -> Result<A::Value> {
    algebra.multiply(h, w)
}

/// `algebra.aggregate` as a free function.
pub fn aggregate<A: PathAlgebra>(algebra: &A, values: &[A::Value], degree: usize) -> A::Value {
    algebra.aggregate(values, AggregateContext { step: 1, degree })
}
