//! Full and priority-pruned Bellman-Ford propagation, plus path enumeration oracles.

mod engine;
mod paths;
pub(crate) mod select;

pub use engine::{astar_propagate, bellman_ford_full, AStarOutput, Propagation, Setting};
pub use paths::{evaluate_path, exhaustive_paths, path_nodes, DEFAULT_WALK_CAP};
pub use select::{reached_pool, select_edges, select_nodes, Selection};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node and edge budgets of pruned propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    /// Node ratio α in (0, 1].
    pub alpha: f64,
    /// Degree ratio β in (0, 1].
    pub beta: f64,
    /// Number of iterations T.
    pub steps: usize,
}

fn ceil_ratio(x: f64) -> usize {
    // guards against 0.07 * 100 = 7.000000000000001
    (x - 1e-9).ceil().max(0.0) as usize
}

impl BudgetConfig {
    pub fn new(alpha: f64, beta: f64, steps: usize) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(Self { alpha, beta, steps })
    }

    /// No pruning.
    pub fn full(steps: usize) -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            steps,
        }
    }

    /// `K = ceil(α|V|)`, at least 1.
    pub fn node_budget(&self, num_nodes: usize) -> usize {
        ceil_ratio(self.alpha * num_nodes as f64).max(1)
    }

    /// `L = ceil(β K |E| / |V|)`, at least 1 and at most `|E|`.
    pub fn edge_budget(&self, num_nodes: usize, num_edges: usize) -> usize {
        let k = self.node_budget(num_nodes) as f64;
        let l = ceil_ratio(self.beta * k * num_edges as f64 / num_nodes.max(1) as f64);
        l.clamp(1, num_edges.max(1))
    }
}

/// Work done by one propagation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationStats {
    pub nodes_per_step: Vec<usize>,
    pub messages_per_step: Vec<usize>,
    pub wall_seconds: f64,
}

impl PropagationStats {
    pub fn total_messages(&self) -> usize {
        self.messages_per_step.iter().sum()
    }

    pub fn mean_messages(&self) -> f64 {
        if self.messages_per_step.is_empty() {
            0.0
        } else {
            self.total_messages() as f64 / self.messages_per_step.len() as f64
        }
    }

    /// One `step=<t> nodes=<n> edges=<m>` line per iteration.
    pub fn log_lines(&self) -> String {
        let mut out = String::new();
        for (t, (n, m)) in self.nodes_per_step.iter().zip(&self.messages_per_step).enumerate() {
            let _ = writeln!(out, "step={} nodes={n} edges={m}", t + 1);
        }
        out
    }
}

/// Selected nodes `X⁽ᵗ⁾` and edges `E⁽ᵗ⁾` of one iteration, both sorted ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTrace {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

/// Everything selection decided during one run, with the dense priorities
/// `s⁽⁰⁾ … s⁽ᵀ⁾` it was based on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub source: usize,
    pub steps: Vec<StepTrace>,
    pub priorities: Vec<Vec<f64>>,
}

impl Trace {
    /// `max` of `s⁽ᵗ⁾` over the nodes selected at step `t + 1`, or over the final
    /// reached set for `t = T`.
    pub fn normalizer(&self, t: usize) -> f64 {
        let s = &self.priorities[t];
        let nodes: &[usize] = match self.steps.get(t) {
            Some(step) => &step.nodes,
            None => &[],
        };
        nodes.iter().map(|&x| s[x]).fold(0.0, f64::max)
    }
}
