use rand::Rng;

use crate::kg::{FilterSet, Triplet};

/// Attempts per negative before a possibly-true corruption is accepted.
pub const MAX_RESAMPLES: usize = 100;

/// A training sample as a tail-prediction query: `(source, relation, ?)` with one
/// answer and `n` corrupted candidates. Head corruption is expressed through the
/// inverse relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSample {
    pub positive: Triplet,
    pub corrupt_head: bool,
    pub source: usize,
    pub relation: usize,
    pub answer: usize,
    pub negatives: Vec<usize>,
}

impl NegativeSample {
    /// The corrupted triplets in the orientation of the positive.
    pub fn triplets(&self) -> Vec<Triplet> {
        let p = self.positive;
        self.negatives
            .iter()
            .map(|&e| {
                if self.corrupt_head {
                    Triplet::new(e, p.relation, p.tail)
                } else {
                    Triplet::new(p.head, p.relation, e)
                }
            })
            .collect()
    }
}

/// Draws `n` corruptions of `positive`. One fair coin decides whether the head or the
/// tail is replaced; each replacement is uniform over entities and is redrawn while it
/// forms a known triplet, up to [`MAX_RESAMPLES`] times.
pub fn sample_negatives<R: Rng + ?Sized>(
    positive: Triplet,
    num_entities: usize,
    num_base_relations: usize,
    known: &FilterSet,
    n: usize,
    rng: &mut R,
) -> NegativeSample {
    let corrupt_head = rng.gen_bool(0.5);
    let (source, relation, answer) = if corrupt_head {
        (positive.tail, positive.relation + num_base_relations, positive.head)
    } else {
        (positive.head, positive.relation, positive.tail)
    };
    let negatives = (0..n)
        .map(|_| {
            let mut e = rng.gen_range(0..num_entities);
            for _ in 0..MAX_RESAMPLES {
                if !known.contains(source, relation, e) {
                    break;
                }
                e = rng.gen_range(0..num_entities);
            }
            e
        })
        .collect();
    NegativeSample {
        positive,
        corrupt_head,
        source,
        relation,
        answer,
        negatives,
    }
}
