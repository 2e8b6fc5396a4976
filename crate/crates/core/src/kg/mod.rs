//! Knowledge-graph storage: triplets, vocabularies, CSR indexing, query-edge masking
//! and dataset split handling.

mod graph;
mod load;
mod mask;
mod split;
mod vocab;

pub use graph::{augment_inverse, build_csr, inverse_relation, KnowledgeGraph};
pub use load::{load_tsv, parse_tsv};
pub use mask::{mask_query_edges, EdgeMask};
pub use split::{FilterSet, Provenance, Query, SplitBundle, SplitMode, TestSplit};
pub use vocab::Vocab;

use serde::{Deserialize, Serialize};

/// A single fact `(head, relation, tail)` with dense integer ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triplet {
    pub const fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// The kinship graph used as the running example in the docs and tests:
/// seven facts over six people `a..f`.
pub fn family_example() -> (Vocab, Vocab, Vec<Triplet>) {
    let facts = [
        ("a", "Father", "b"),
        ("b", "Wife", "f"),
        ("c", "Brother", "a"),
        ("c", "Mother", "f"),
        ("a", "Friend", "d"),
        ("d", "Mother", "e"),
        ("e", "Friend", "f"),
    ];
    let mut entities = Vocab::new();
    let mut relations = Vocab::new();
    for name in ["a", "b", "c", "d", "e", "f"] {
        entities.intern(name);
    }
    let triplets = facts
        .iter()
        .map(|(h, r, t)| {
            let h = entities.intern(h);
            let r = relations.intern(r);
            let t = entities.intern(t);
            Triplet::new(h, r, t)
        })
        .collect();
    (entities, relations, triplets)
}
