use crate::algebra::{BoundaryModel, EdgeWeightModel, PathAlgebra};
use crate::error::{Error, Result};
use crate::kg::{EdgeMask, KnowledgeGraph};

/// Default upper bound on the number of enumerated walks.
pub const DEFAULT_WALK_CAP: usize = 1_000_000;

/// All walks from `u` to `v` with 1 to `max_len` edges, as edge-index sequences in
/// lexicographic order. Nodes may repeat.
pub fn exhaustive_paths(
    graph: &KnowledgeGraph,
    u: usize,
    v: usize,
    max_len: usize,
    mask: Option<&EdgeMask>,
    cap: usize,
) -> Result<Vec<Vec<usize>>> {
    #[allow(clippy::too_many_arguments)]
    fn walk(
        g: &KnowledgeGraph,
        at: usize,
        v: usize,
        left: usize,
        mask: Option<&EdgeMask>,
        cap: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        if left == 0 {
            return Ok(());
        }
        for e in g.out_edges(at) {
            if !mask.is_none_or(|m| m.is_visible(e)) {
                continue;
            }
            prefix.push(e);
            let tail = g.edge(e).tail;
            if tail == v {
                if out.len() == cap {
                    return Err(Error::BudgetExceeded { cap });
                }
                out.push(prefix.clone());
            }
            walk(g, tail, v, left - 1, mask, cap, prefix, out)?;
            prefix.pop();
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(graph, u, v, max_len, mask, cap, &mut Vec::new(), &mut out)?;
    Ok(out)
}

/// Node sequence `x₀ … x_k` of a contiguous walk starting at `source`.
pub fn path_nodes(graph: &KnowledgeGraph, source: usize, path: &[usize]) -> Result<Vec<usize>> {
    let mut nodes = Vec::with_capacity(path.len() + 1);
    nodes.push(source);
    for (i, &e) in path.iter().enumerate() {
        if e >= graph.num_edges() {
            return Err(Error::OutOfRange {
                kind: "edge",
                id: e,
                limit: graph.num_edges(),
            });
        }
        let tr = graph.edge(e);
        if tr.head != *nodes.last().expect("non-empty") {
            return Err(Error::NonContiguousPath { position: i });
        }
        nodes.push(tr.tail);
    }
    Ok(nodes)
}

/// `h⁽⁰⁾(u) ⊗ w(e₁) ⊗ … ⊗ w(e_k)`, multiplied left to right. When the path is
/// replayed inside a `steps`-iteration run, edge `i` of a `k`-edge path is
/// propagated at step `steps - k + i`, which determines its weight.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_path<A, W, B>(
    graph: &KnowledgeGraph,
    algebra: &A,
    weights: &W,
    boundary: &B,
    source: usize,
    query: usize,
    path: &[usize],
    steps: usize,
) -> Result<A::Value>
where
    A: PathAlgebra,
    W: EdgeWeightModel<A>,
    B: BoundaryModel<A>,
{
    path_nodes(graph, source, path)?;
    let offset = steps.saturating_sub(path.len());
    let mut value = boundary.boundary(algebra, source, query, source);
    for (i, &e) in path.iter().enumerate() {
        let tr = graph.edge(e);
        value = algebra.multiply(&value, &weights.weight(offset + i + 1, tr.relation, query))?;
    }
    Ok(value)
}
