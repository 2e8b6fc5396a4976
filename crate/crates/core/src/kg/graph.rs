use std::ops::Range;

use super::Triplet;
use crate::error::{Error, Result};

/// Maps a relation id to its inverse in an augmented relation space of size `2R`.
#[inline]
pub fn inverse_relation(relation: usize, num_base_relations: usize) -> usize {
    if relation < num_base_relations {
        relation + num_base_relations
    } else {
        relation - num_base_relations
    }
}

/// Appends `(y, r + R, x)` for every `(x, r, y)`. The output keeps the input facts first,
/// followed by their inverses in the same order.
pub fn augment_inverse(triplets: &[Triplet], num_base_relations: usize) -> Vec<Triplet> {
    let mut out = Vec::with_capacity(triplets.len() * 2);
    out.extend_from_slice(triplets);
    out.extend(triplets.iter().map(|t| {
        debug_assert!(t.relation < num_base_relations);
        Triplet::new(t.tail, t.relation + num_base_relations, t.head)
    }));
    out
}

/// Directed multigraph in CSR layout, grouped by head entity.
///
/// Edges sharing a head keep their input order. Parallel edges and self-loops are
/// ordinary edges.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    num_entities: usize,
    num_base_relations: usize,
    edges: Vec<Triplet>,
    head_offsets: Vec<usize>,
    degrees: Vec<usize>,
}

/// Builds the CSR index over an (already augmented) triplet list.
pub fn build_csr(
    num_entities: usize,
    num_base_relations: usize,
    triplets: &[Triplet],
) -> Result<KnowledgeGraph> {
    let num_relations = 2 * num_base_relations;
    for t in triplets {
        for id in [t.head, t.tail] {
            if id >= num_entities {
                return Err(Error::OutOfRange {
                    kind: "entity",
                    id,
                    limit: num_entities,
                });
            }
        }
        if t.relation >= num_relations {
            return Err(Error::OutOfRange {
                kind: "relation",
                id: t.relation,
                limit: num_relations,
            });
        }
    }

    let mut degrees = vec![0usize; num_entities];
    for t in triplets {
        degrees[t.head] += 1;
    }
    let mut head_offsets = Vec::with_capacity(num_entities + 1);
    head_offsets.push(0);
    let mut acc = 0;
    for d in &degrees {
        acc += d;
        head_offsets.push(acc);
    }
    // counting sort keeps the within-head input order
    let mut cursor = head_offsets[..num_entities].to_vec();
    let mut edges = vec![Triplet::new(0, 0, 0); triplets.len()];
    for t in triplets {
        edges[cursor[t.head]] = *t;
        cursor[t.head] += 1;
    }
    Ok(KnowledgeGraph {
        num_entities,
        num_base_relations,
        edges,
        head_offsets,
        degrees,
    })
}

impl KnowledgeGraph {
    /// Augments `facts` with inverse edges and indexes the result.
    pub fn from_facts(
        num_entities: usize,
        num_base_relations: usize,
        facts: &[Triplet],
    ) -> Result<Self> {
        if let Some(bad) = facts.iter().find(|t| t.relation >= num_base_relations) {
            return Err(Error::OutOfRange {
                kind: "relation",
                id: bad.relation,
                limit: num_base_relations,
            });
        }
        build_csr(
            num_entities,
            num_base_relations,
            &augment_inverse(facts, num_base_relations),
        )
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_base_relations(&self) -> usize {
        self.num_base_relations
    }

    /// Size of the augmented relation space, `2R`.
    pub fn num_relations(&self) -> usize {
        2 * self.num_base_relations
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Triplet] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, index: usize) -> Triplet {
        self.edges[index]
    }

    pub fn head_offsets(&self) -> &[usize] {
        &self.head_offsets
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    #[inline]
    pub fn degree(&self, entity: usize) -> usize {
        self.degrees[entity]
    }

    /// Edge indices whose head is `entity`.
    #[inline]
    pub fn out_edges(&self, entity: usize) -> Range<usize> {
        self.head_offsets[entity]..self.head_offsets[entity + 1]
    }

    pub fn inverse_relation(&self, relation: usize) -> usize {
        inverse_relation(relation, self.num_base_relations)
    }

    /// Indices of every edge equal to `(head, relation, tail)`.
    pub fn find_edges(&self, head: usize, relation: usize, tail: usize) -> Vec<usize> {
        if head >= self.num_entities {
            return Vec::new();
        }
        self.out_edges(head)
            .filter(|&e| {
                let t = self.edges[e];
                t.relation == relation && t.tail == tail
            })
            .collect()
    }

    /// Mean of `ln(degree + 1)` over all entities, used by degree scalers.
    pub fn mean_log_degree(&self) -> f64 {
        if self.num_entities == 0 {
            return 1.0;
        }
        let total: f64 = self.degrees.iter().map(|&d| (d as f64 + 1.0).ln()).sum();
        total / self.num_entities as f64
    }
}
