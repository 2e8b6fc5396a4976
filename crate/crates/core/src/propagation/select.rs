use super::{BudgetConfig, StepTrace, Trace};
use crate::batching::{padding_free_topk, RankedBatch};
use crate::error::{Error, Result};
use crate::kg::{EdgeMask, KnowledgeGraph};

/// How `X⁽ᵗ⁾` and `E⁽ᵗ⁾` are chosen.
#[derive(Debug, Clone, Copy)]
pub enum Selection<'a> {
    /// Top-K nodes and top-L edges by priority.
    Budget(BudgetConfig),
    /// Given node sets per step; every visible out-edge is propagated.
    FixedNodes(&'a [Vec<usize>]),
    /// Exactly the node and edge sets of an earlier run.
    Replay(&'a Trace),
}

impl Selection<'_> {
    pub fn steps(&self) -> usize {
        match self {
            Self::Budget(b) => b.steps,
            Self::FixedNodes(n) => n.len(),
            Self::Replay(t) => t.steps.len(),
        }
    }
}

/// `{u} ∪ V⁽ᵗ⁻¹⁾`: the nodes holding a non-zero representation, sorted.
pub fn reached_pool(source: usize, tails: &[usize]) -> Vec<usize> {
    let mut pool = Vec::with_capacity(tails.len() + 1);
    pool.push(source);
    pool.extend_from_slice(tails);
    pool.sort_unstable();
    pool.dedup();
    pool
}

/// Top-`k` of `pool` by `scores`, ties to the smaller id, returned sorted. When `k`
/// covers the whole graph every node is selected.
pub fn select_nodes(pool: &[usize], scores: &[f64], k: usize, num_nodes: usize) -> Vec<usize> {
    if k >= num_nodes {
        return (0..num_nodes).collect();
    }
    let batch = RankedBatch {
        values: pool.iter().map(|&x| scores[x]).collect(),
        sizes: vec![pool.len()],
    };
    let top = padding_free_topk(&batch, k, false).expect("non-strict top-k");
    let mut nodes: Vec<usize> = top.indices.iter().map(|&i| pool[i]).collect();
    nodes.sort_unstable();
    nodes
}

/// Visible out-edges of `nodes`, the top-`l` of them by tail priority, sorted by index.
/// Candidates are ordered by `(tail, edge index)` so ties go to the smaller tail id.
pub fn select_edges(
    graph: &KnowledgeGraph,
    nodes: &[usize],
    scores: &[f64],
    l: usize,
    mask: Option<&EdgeMask>,
) -> Vec<usize> {
    let mut cand: Vec<usize> = nodes
        .iter()
        .flat_map(|&x| graph.out_edges(x))
        .filter(|&e| mask.is_none_or(|m| m.is_visible(e)))
        .collect();
    if cand.len() > l {
        let edges = graph.edges();
        cand.sort_unstable_by_key(|&e| (edges[e].tail, e));
        let batch = RankedBatch {
            values: cand.iter().map(|&e| scores[edges[e].tail]).collect(),
            sizes: vec![cand.len()],
        };
        let top = padding_free_topk(&batch, l, false).expect("non-strict top-k");
        cand = top.indices.iter().map(|&i| cand[i]).collect();
    }
    cand.sort_unstable();
    cand
}

/// Performs selection for 1-based step `t`.
pub(crate) fn select_step(
    graph: &KnowledgeGraph,
    selection: &Selection<'_>,
    t: usize,
    pool: &[usize],
    scores: &[f64],
    mask: Option<&EdgeMask>,
) -> Result<StepTrace> {
    let n = graph.num_entities();
    let out = match selection {
        Selection::Budget(b) => {
            let nodes = select_nodes(pool, scores, b.node_budget(n), n);
            let l = b.edge_budget(n, graph.num_edges());
            let edges = select_edges(graph, &nodes, scores, l, mask);
            StepTrace { nodes, edges }
        }
        Selection::FixedNodes(sets) => {
            let mut nodes = sets[t - 1].clone();
            nodes.sort_unstable();
            nodes.dedup();
            if let Some(&bad) = nodes.iter().find(|&&x| x >= n) {
                return Err(Error::OutOfRange {
                    kind: "selected node",
                    id: bad,
                    limit: n,
                });
            }
            let edges = select_edges(graph, &nodes, scores, usize::MAX, mask);
            StepTrace { nodes, edges }
        }
        Selection::Replay(trace) => trace.steps[t - 1].clone(),
    };
    Ok(out)
}
