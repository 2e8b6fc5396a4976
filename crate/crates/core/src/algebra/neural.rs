use super::{AggregateContext, BoundaryModel, EdgeWeightModel, PathAlgebra};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::scalar::Scalar;

/// Learned degree-scaled projection for one propagation step.
#[derive(Debug, Clone)]
pub struct PnaLayer<T> {
    /// `12d × d`
    pub weight: Matrix<T>,
    /// `1 × d`
    pub bias: Matrix<T>,
}

#[derive(Debug, Clone)]
pub enum NeuralAggregator<T> {
    Sum,
    Pna {
        layers: Vec<PnaLayer<T>>,
        mean_log_degree: f64,
    },
}

/// DistMult vector algebra of width `dim`: `⊗` is the elementwise product.
#[derive(Debug, Clone)]
pub struct NeuralAlgebra<T> {
    pub dim: usize,
    pub aggregator: NeuralAggregator<T>,
}

/// Amplification and attenuation scalers for a node of the given degree.
pub(crate) fn pna_scalers(degree: usize, mean_log_degree: f64) -> (f64, f64) {
    let norm = if mean_log_degree > 0.0 { mean_log_degree } else { 1.0 };
    let amp = ((degree + 1) as f64).ln() / norm;
    (amp, 1.0 / amp.max(1e-2))
}

/// Floor applied to the variance before the square root.
pub(crate) const PNA_VAR_FLOOR: f64 = 1e-6;

impl<T: Scalar> NeuralAlgebra<T> {
    pub fn sum(dim: usize) -> Self {
        Self {
            dim,
            aggregator: NeuralAggregator::Sum,
        }
    }

    fn check(&self, op: &'static str, v: &[T]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Shape {
                op,
                detail: format!("expected width {}, got {}", self.dim, v.len()),
            });
        }
        Ok(())
    }

    fn pna(&self, layer: &PnaLayer<T>, values: &[Vec<T>], degree: usize, mean_log_degree: f64) -> Vec<T> {
        let d = self.dim;
        let inv_n = T::from_f64_lossy(1.0 / values.len() as f64);
        let mut sum = vec![T::zero(); d];
        let mut sq = vec![T::zero(); d];
        let mut max = values[0].clone();
        let mut neg_max: Vec<T> = values[0].iter().map(|&x| x * T::from_f64_lossy(-1.0)).collect();
        for v in values {
            for c in 0..d {
                sum[c] = sum[c] + v[c];
                sq[c] = sq[c] + v[c] * v[c];
                if v[c] > max[c] {
                    max[c] = v[c];
                }
                let n = v[c] * T::from_f64_lossy(-1.0);
                if n > neg_max[c] {
                    neg_max[c] = n;
                }
            }
        }
        let floor = T::from_f64_lossy(PNA_VAR_FLOOR);
        let mut feat = Vec::with_capacity(4 * d);
        let mean: Vec<T> = sum.iter().map(|&s| s * inv_n).collect();
        feat.extend_from_slice(&mean);
        feat.extend_from_slice(&max);
        feat.extend(neg_max.iter().map(|&x| x * T::from_f64_lossy(-1.0)));
        feat.extend((0..d).map(|c| {
            let var = sq[c] * inv_n - mean[c] * mean[c];
            (if var > floor { var } else { floor }).sqrt()
        }));
        let (amp, att) = pna_scalers(degree, mean_log_degree);
        let (amp, att) = (T::from_f64_lossy(amp), T::from_f64_lossy(att));
        let mut full = feat.clone();
        full.extend(feat.iter().map(|&x| x * amp));
        full.extend(feat.iter().map(|&x| x * att));
        let row = Matrix::from_vec(1, 12 * d, full).expect("12d features");
        let mut out = row.matmul(&layer.weight).expect("pna weight is 12d x d").into_data();
        for (o, &b) in out.iter_mut().zip(layer.bias.data()) {
            *o = *o + b;
        }
        out
    }
}

impl<T: Scalar> PathAlgebra for NeuralAlgebra<T> {
    type Value = Vec<T>;
    type Weight = Vec<T>;
    const IS_SEMIRING: bool = false;

    fn zero(&self) -> Vec<T> {
        vec![T::zero(); self.dim]
    }

    fn one(&self) -> Vec<T> {
        vec![T::one(); self.dim]
    }

    fn multiply(&self, h: &Vec<T>, w: &Vec<T>) -> Result<Vec<T>> {
        self.check("multiply", h)?;
        self.check("multiply", w)?;
        Ok(h.iter().zip(w).map(|(&a, &b)| a * b).collect())
    }

    fn add(&self, a: &Vec<T>, b: &Vec<T>) -> Vec<T> {
        a.iter().zip(b).map(|(&x, &y)| x + y).collect()
    }

    fn aggregate(&self, values: &[Vec<T>], ctx: AggregateContext) -> Vec<T> {
        match &self.aggregator {
            NeuralAggregator::Pna {
                layers,
                mean_log_degree,
            } if !values.is_empty() && !layers.is_empty() => {
                let layer = &layers[(ctx.step.max(1) - 1).min(layers.len() - 1)];
                self.pna(layer, values, ctx.degree, *mean_log_degree)
            }
            _ => values.iter().fold(self.zero(), |acc, v| self.add(&acc, v)),
        }
    }

    fn scale(&self, value: Vec<T>, priority: f64) -> Vec<T> {
        let k = T::from_f64_lossy(priority);
        value.into_iter().map(|x| x * k).collect()
    }
}

/// Per-step relation parameters. A single entry is shared by every step.
#[derive(Debug, Clone)]
pub enum RelationWeights<T> {
    /// One `2R × d` table per step.
    Table(Vec<Matrix<T>>),
    /// `w = q · W + b` with `W: d × 2R·d` and `b: 1 × 2R·d` per step.
    Linear { w: Vec<Matrix<T>>, b: Vec<Matrix<T>> },
}

impl<T: Scalar> RelationWeights<T> {
    fn layers(&self) -> usize {
        match self {
            Self::Table(t) => t.len(),
            Self::Linear { w, .. } => w.len(),
        }
    }

    /// Layer used at a 1-based step.
    pub fn layer_index(&self, step: usize) -> usize {
        (step.max(1) - 1).min(self.layers().saturating_sub(1))
    }
}

/// Edge weights and query embeddings of the neural model.
#[derive(Debug, Clone)]
pub struct NeuralWeights<T> {
    pub dim: usize,
    /// `2R × d`
    pub query: Matrix<T>,
    pub relations: RelationWeights<T>,
}

impl<T: Scalar> NeuralWeights<T> {
    /// All `2R` relation vectors for one step and query relation, as a `2R × d` matrix.
    pub fn relation_table(&self, step: usize, query_relation: usize) -> Matrix<T> {
        let l = self.relations.layer_index(step);
        match &self.relations {
            RelationWeights::Table(t) => t[l].clone(),
            RelationWeights::Linear { w, b } => {
                let q = Matrix::from_vec(1, self.dim, self.query.row(query_relation).to_vec())
                    .expect("query row");
                let mut flat = q.matmul(&w[l]).expect("linear relation weight is d x 2Rd");
                flat.add_assign(&b[l]);
                let rows = flat.cols() / self.dim;
                flat.reshaped(rows, self.dim).expect("2R x d")
            }
        }
    }
}

impl<T: Scalar> EdgeWeightModel<NeuralAlgebra<T>> for NeuralWeights<T> {
    fn weight(&self, step: usize, relation: usize, query_relation: usize) -> Vec<T> {
        match &self.relations {
            RelationWeights::Table(t) => t[self.relations.layer_index(step)].row(relation).to_vec(),
            RelationWeights::Linear { .. } => {
                self.relation_table(step, query_relation).row(relation).to_vec()
            }
        }
    }
}

/// Query embedding at the source, zero elsewhere.
#[derive(Debug, Clone)]
pub struct QueryBoundary<'a, T> {
    pub query: &'a Matrix<T>,
}

impl<T: Scalar> BoundaryModel<NeuralAlgebra<T>> for QueryBoundary<'_, T> {
    fn boundary(&self, algebra: &NeuralAlgebra<T>, source: usize, q: usize, node: usize) -> Vec<T> {
        if source == node {
            self.query.row(q).to_vec()
        } else {
            algebra.zero()
        }
    }
}
