//! Node priority functions: personalized PageRank, degree and the learned neural
//! priority.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::nn::{sigmoid, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorityKind {
    Neural,
    Ppr,
    Degree,
}

impl std::str::FromStr for PriorityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neural" => Ok(Self::Neural),
            "ppr" => Ok(Self::Ppr),
            "degree" => Ok(Self::Degree),
            other => Err(Error::Config(format!(
                "unknown priority `{other}` (expected neural, ppr or degree)"
            ))),
        }
    }
}

fn max_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let m = v.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
    v
}

/// Unnormalized personalized PageRank after `iters` power steps from `e_u`.
/// Mass at nodes without out-edges restarts at `u`.
pub fn ppr_distribution(graph: &KnowledgeGraph, u: usize, damping: f64, iters: usize) -> Result<Vec<f64>> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::Config(format!("damping must lie in (0, 1), got {damping}")));
    }
    if iters == 0 {
        return Err(Error::Config("ppr needs at least one iteration".into()));
    }
    let n = graph.num_entities();
    if u >= n {
        return Err(Error::OutOfRange {
            kind: "entity",
            id: u,
            limit: n,
        });
    }
    let mut p = vec![0.0; n];
    p[u] = 1.0;
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        next[u] = 1.0 - damping;
        for (x, &mass) in p.iter().enumerate() {
            let deg = graph.degree(x);
            if deg == 0 {
                next[u] += damping * mass;
                continue;
            }
            let share = damping * mass / deg as f64;
            for e in graph.out_edges(x) {
                next[graph.edge(e).tail] += share;
            }
        }
        p = next;
    }
    Ok(p)
}

/// Personalized PageRank scores normalized by their maximum.
pub fn ppr_scores(graph: &KnowledgeGraph, u: usize, damping: f64, iters: usize) -> Result<Vec<f64>> {
    ppr_distribution(graph, u, damping, iters).map(max_normalize)
}

/// Degrees normalized by the maximum degree.
pub fn degree_scores(graph: &KnowledgeGraph) -> Vec<f64> {
    max_normalize(graph.degrees().iter().map(|&d| d as f64).collect())
}

/// Per-source cache of PPR score vectors.
#[derive(Debug)]
pub struct PprCache {
    pub damping: f64,
    pub iters: usize,
    entries: RwLock<HashMap<usize, Arc<Vec<f64>>>>,
}

impl PprCache {
    pub const DEFAULT_DAMPING: f64 = 0.85;
    pub const DEFAULT_ITERS: usize = 20;

    pub fn new(damping: f64, iters: usize) -> Self {
        Self {
            damping,
            iters,
            entries: RwLock::new(HashMap::new()),
        }
    }

    pub fn scores(&self, graph: &KnowledgeGraph, u: usize) -> Result<Arc<Vec<f64>>> {
        if let Some(hit) = self.entries.read().expect("ppr cache lock").get(&u) {
            return Ok(hit.clone());
        }
        let fresh = Arc::new(ppr_scores(graph, u, self.damping, self.iters)?);
        let mut w = self.entries.write().expect("ppr cache lock");
        Ok(w.entry(u).or_insert(fresh).clone())
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("ppr cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for PprCache {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DAMPING, Self::DEFAULT_ITERS)
    }
}

/// Weights of `g: 2d → hidden → d` and `f: d → hidden → 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityNet<T> {
    pub g_w0: Matrix<T>,
    pub g_b0: Matrix<T>,
    pub g_w1: Matrix<T>,
    pub g_b1: Matrix<T>,
    pub f_w0: Matrix<T>,
    pub f_b0: Matrix<T>,
    pub f_w1: Matrix<T>,
    pub f_b1: Matrix<T>,
}

fn affine<T: Scalar>(x: &Matrix<T>, w: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    let mut y = x.matmul(w)?;
    y.add_assign(b);
    Ok(y)
}

fn relu<T: Scalar>(x: Matrix<T>) -> Matrix<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

impl<T: Scalar> PriorityNet<T> {
    pub fn dim(&self) -> usize {
        self.g_w1.cols()
    }

    /// `g([h, q])`.
    pub fn gate(&self, h: &[T], q: &[T]) -> Result<Vec<T>> {
        let d = self.dim();
        if h.len() != d || q.len() != d {
            return Err(Error::Shape {
                op: "neural_priority",
                detail: format!("h has {}, q has {}, expected {d}", h.len(), q.len()),
            });
        }
        let x = Matrix::from_vec(1, 2 * d, h.iter().chain(q).copied().collect())?;
        Ok(affine(&relu(affine(&x, &self.g_w0, &self.g_b0)?), &self.g_w1, &self.g_b1)?.into_data())
    }

    /// Pre-sigmoid output `f(s)`.
    pub fn logit(&self, s: &[T]) -> Result<T> {
        let x = Matrix::from_vec(1, s.len(), s.to_vec())?;
        Ok(affine(&relu(affine(&x, &self.f_w0, &self.f_b0)?), &self.f_w1, &self.f_b1)?.get(0, 0))
    }
}

/// `s = h ⊗ g([h, q])` and `sigmoid(f(s))`.
pub fn neural_priority<T: Scalar>(h: &[T], q: &[T], net: &PriorityNet<T>) -> Result<(f64, Vec<T>)> {
    let gate = net.gate(h, q)?;
    let s: Vec<T> = h.iter().zip(&gate).map(|(&a, &b)| a * b).collect();
    Ok((sigmoid(net.logit(&s)?).as_f64(), s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{family_example, Triplet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(n: usize, facts: &[(usize, usize)]) -> KnowledgeGraph {
        let t: Vec<Triplet> = facts.iter().map(|&(h, t)| Triplet::new(h, 0, t)).collect();
        KnowledgeGraph::from_facts(n, 1, &t).unwrap()
    }

    #[test]
    fn ppr_examples() {
        assert_eq!(ppr_scores(&graph(1, &[]), 0, 0.85, 20).unwrap(), vec![1.0]);
        assert_eq!(ppr_scores(&graph(2, &[(0, 1)]), 0, 0.5, 1).unwrap(), vec![1.0, 1.0]);
        let star = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let s = ppr_scores(&star, 0, 0.85, 20).unwrap();
        assert!(s[1..].iter().all(|&x| (x - s[1]).abs() < 1e-15));
        assert!(ppr_scores(&star, 0, 1.0, 20).is_err());
    }

    #[test]
    fn ppr_conserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(1..12);
            let e: Vec<(usize, usize)> = (0..rng.gen_range(0..30))
                .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
                .collect();
            let g = graph(n, &e);
            for iters in [1, 5, 20] {
                let p = ppr_distribution(&g, rng.gen_range(0..n), 0.85, iters).unwrap();
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ppr_cache_reuses_entries() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let cache = PprCache::default();
        let a = cache.scores(&g, 0).unwrap();
        let b = cache.scores(&g, 0).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn degree_examples() {
        let ring = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(degree_scores(&ring), vec![1.0; 4]);
        assert_eq!(degree_scores(&graph(3, &[(0, 1)]))[2], 0.0);
        let (_, _, facts) = family_example();
        let fam = KnowledgeGraph::from_facts(6, 5, &facts).unwrap();
        let mut count = [0usize; 6];
        for t in fam.edges() {
            count[t.head] += 1;
        }
        let max = *count.iter().max().unwrap() as f64;
        for (s, c) in degree_scores(&fam).iter().zip(count) {
            assert_eq!(*s, c as f64 / max);
        }
    }

    fn random_net(rng: &mut ChaCha8Rng, d: usize, hidden: usize) -> PriorityNet<f64> {
        let mut m = |r: usize, c: usize| {
            Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        PriorityNet {
            g_w0: m(2 * d, hidden),
            g_b0: m(1, hidden),
            g_w1: m(hidden, d),
            g_b1: m(1, d),
            f_w0: m(d, hidden),
            f_b0: m(1, hidden),
            f_w1: m(hidden, 1),
            f_b1: m(1, 1),
        }
    }

    #[test]
    fn zero_representation_gives_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = random_net(&mut rng, 4, 8);
        let q: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (score, s) = neural_priority(&[0.0; 4], &q, &net).unwrap();
        assert!(s.iter().all(|&x| x == 0.0));
        let baseline = net.logit(&[0.0; 4]).unwrap();
        assert!((score - 1.0 / (1.0 + (-baseline).exp())).abs() < 1e-15);
    }

    #[test]
    fn scalar_sanity() {
        // d = 1, g ≡ 1 through its bias, f = identity on non-negative inputs
        let one = |v: f64| Matrix::from_vec(1, 1, vec![v]).unwrap();
        let net = PriorityNet {
            g_w0: Matrix::zeros(2, 1),
            g_b0: one(0.0),
            g_w1: one(0.0),
            g_b1: one(1.0),
            f_w0: one(1.0),
            f_b0: one(0.0),
            f_w1: one(1.0),
            f_b1: one(0.0),
        };
        assert_eq!(neural_priority(&[0.0], &[0.3], &net).unwrap().0, 0.5);
    }

    #[test]
    fn matches_straight_line_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (d, hidden) = (5, 6);
        for _ in 0..20 {
            let net = random_net(&mut rng, d, hidden);
            let h: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x: Vec<f64> = h.iter().chain(&q).copied().collect();
            let a: Vec<f64> = (0..hidden)
                .map(|j| (net.g_b0.get(0, j) + (0..2 * d).map(|i| x[i] * net.g_w0.get(i, j)).sum::<f64>()).max(0.0))
                .collect();
            let g: Vec<f64> = (0..d)
                .map(|j| net.g_b1.get(0, j) + (0..hidden).map(|i| a[i] * net.g_w1.get(i, j)).sum::<f64>())
                .collect();
            let s: Vec<f64> = (0..d).map(|i| h[i] * g[i]).collect();
            let b: Vec<f64> = (0..hidden)
                .map(|j| (net.f_b0.get(0, j) + (0..d).map(|i| s[i] * net.f_w0.get(i, j)).sum::<f64>()).max(0.0))
                .collect();
            let logit = net.f_b1.get(0, 0) + (0..hidden).map(|i| b[i] * net.f_w1.get(i, 0)).sum::<f64>();
            let expected = 1.0 / (1.0 + (-logit).exp());
            let (score, svec) = neural_priority(&h, &q, &net).unwrap();
            assert!((score - expected).abs() < 1e-12, "{score} vs {expected}");
            assert!(svec.iter().zip(&s).all(|(a, b)| (a - b).abs() < 1e-12));
            assert!(score > 0.0 && score < 1.0);
        }
    }

    #[test]
    fn topk_invariant_under_monotone_transform() {
        use crate::propagation::select_nodes;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(1..30);
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..10) as f64) / 10.0).collect();
            let shifted: Vec<f64> = scores.iter().map(|s| 2.0 * s + 1.0).collect();
            let pool: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
            let k = rng.gen_range(1..=n);
            assert_eq!(
                select_nodes(&pool, &scores, k, n + 1),
                select_nodes(&pool, &shifted, k, n + 1)
            );
        }
    }
}
