//! Randomized self-check of propagation against direct path enumeration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{BoundaryModel, Boolean, ConstantWeights, Counting, EdgeWeightModel, MinPlus, PathAlgebra, UnitBoundary};
use crate::error::Result;
use crate::kg::{KnowledgeGraph, Triplet};
use crate::propagation::{
    astar_propagate, bellman_ford_full, evaluate_path, exhaustive_paths, BudgetConfig, Selection, Setting,
    DEFAULT_WALK_CAP,
};

/// Deliberate defects used to confirm that the check can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    /// The propagation boundary sits one node after the source.
    ShiftedBoundary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub failures: Vec<String>,
}

/// A random multigraph with at most `max_nodes` entities and `max_edges` edges after
/// inverse augmentation.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize, max_edges: usize, relations: usize) -> KnowledgeGraph {
    let n = rng.gen_range(1..=max_nodes);
    let m = rng.gen_range(0..=max_edges / 2);
    let facts: Vec<Triplet> = (0..m)
        .map(|_| Triplet::new(rng.gen_range(0..n), rng.gen_range(0..relations), rng.gen_range(0..n)))
        .collect();
    KnowledgeGraph::from_facts(n, relations, &facts).expect("valid random graph")
}

struct Shifted;

impl<A: PathAlgebra> BoundaryModel<A> for Shifted {
    fn boundary(&self, algebra: &A, source: usize, q: usize, node: usize) -> A::Value {
        UnitBoundary.boundary(algebra, source + 1, q, node)
    }
}

fn check<A, W>(
    g: &KnowledgeGraph,
    alg: &A,
    w: &W,
    source: usize,
    steps: usize,
    fault: Option<Fault>,
    same: impl Fn(&A::Value, &A::Value) -> bool,
) -> Result<Option<String>>
where
    A: PathAlgebra,
    W: EdgeWeightModel<A>,
{
    let full = match fault {
        Some(Fault::ShiftedBoundary) => bellman_ford_full(Setting::new(g, alg, w, &Shifted), source, 0, steps)?,
        None => bellman_ford_full(Setting::new(g, alg, w, &UnitBoundary), source, 0, steps)?,
    };
    let pruned = astar_propagate(
        Setting::new(g, alg, w, &UnitBoundary),
        source,
        0,
        Selection::Budget(BudgetConfig::full(steps)),
        |_, _| 1.0,
    )?;
    for v in 0..g.num_entities() {
        let mut expected = UnitBoundary.boundary(alg, source, 0, v);
        for p in exhaustive_paths(g, source, v, steps, None, DEFAULT_WALK_CAP)? {
            let val = evaluate_path(g, alg, w, &UnitBoundary, source, 0, &p, steps)?;
            expected = alg.add(&expected, &val);
        }
        if !same(&full.h[v], &expected) {
            return Ok(Some(format!("node {v}: propagation {:?}, enumeration {expected:?}", full.h[v])));
        }
        if pruned.h[v] != full.h[v] {
            return Ok(Some(format!("node {v}: pruned {:?}, full {:?}", pruned.h[v], full.h[v])));
        }
    }
    Ok(None)
}

/// Runs `trials` random instances through the counting, boolean and min-plus checks.
pub fn run_oracle_suite(seed: u64, trials: usize, fault: Option<Fault>) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        seed,
        trials,
        ..OracleReport::default()
    };
    for trial in 0..trials {
        let g = random_graph(&mut rng, 12, 40, 3);
        let steps = rng.gen_range(0..=4);
        let source = rng.gen_range(0..g.num_entities());
        let lengths = (0..g.num_relations()).fold(ConstantWeights::new(1.0), |w, r| {
            w.with_relation(r, rng.gen_range(1..=5) as f64)
        });
        let outcomes = [
            ("counting", check(&g, &Counting::<u64>::new(), &ConstantWeights::new(1u64), source, steps, fault, |a, b| a == b)?),
            ("boolean", check(&g, &Boolean, &ConstantWeights::new(true), source, steps, fault, |a, b| a == b)?),
            ("min-plus", check(&g, &MinPlus::<f64>::new(), &lengths, source, steps, fault, |a: &f64, b: &f64| {
                a == b || (a - b).abs() <= 1e-9
            })?),
        ];
        let failures: Vec<String> = outcomes
            .into_iter()
            .filter_map(|(name, o)| o.map(|msg| format!("trial {trial} ({name}, T={steps}): {msg}")))
            .collect();
        if failures.is_empty() {
            report.passed += 1;
        } else {
            report.failed += 1;
            report.failures.extend(failures);
        }
    }
    Ok(report)
}
