use super::{KnowledgeGraph, Triplet};

/// Per-edge visibility used to hide training-query edges during propagation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    hidden: Vec<bool>,
    hidden_count: usize,
}

impl EdgeMask {
    pub fn all_visible(num_edges: usize) -> Self {
        Self {
            hidden: vec![false; num_edges],
            hidden_count: 0,
        }
    }

    #[inline]
    pub fn is_visible(&self, edge: usize) -> bool {
        !self.hidden[edge]
    }

    pub fn hide(&mut self, edge: usize) {
        if !self.hidden[edge] {
            self.hidden[edge] = true;
            self.hidden_count += 1;
        }
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden_count
    }

    pub fn len(&self) -> usize {
        self.hidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden.is_empty()
    }
}

/// Hides every copy of `(u, q, v)` and of its inverse `(v, q + R, u)` for each positive
/// triplet in `batch`. Triplets absent from the graph are ignored.
pub fn mask_query_edges(graph: &KnowledgeGraph, batch: &[Triplet]) -> EdgeMask {
    let mut mask = EdgeMask::all_visible(graph.num_edges());
    for t in batch {
        let inv = graph.inverse_relation(t.relation);
        for e in graph.find_edges(t.head, t.relation, t.tail) {
            mask.hide(e);
        }
        for e in graph.find_edges(t.tail, inv, t.head) {
            mask.hide(e);
        }
    }
    mask
}
