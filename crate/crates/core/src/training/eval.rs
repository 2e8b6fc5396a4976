use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trainer::PriorityProvider;
use crate::error::Result;
use crate::kg::{FilterSet, KnowledgeGraph, Provenance, Query, Triplet};
use crate::model::{Model, PrioritySource};
use crate::propagation::{BudgetConfig, PropagationStats, Selection};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub count: usize,
    pub ranks: Vec<f64>,
}

impl RankingReport {
    pub fn from_ranks(ranks: Vec<f64>) -> Self {
        let n = ranks.len().max(1) as f64;
        let hits = |k: f64| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
        Self {
            mrr: ranks.iter().map(|r| 1.0 / r).sum::<f64>() / n,
            hits1: hits(1.0),
            hits3: hits(3.0),
            hits10: hits(10.0),
            count: ranks.len(),
            ranks,
        }
    }
}

/// Rank of `answer` among all entities. Entities in `excluded` (other known answers)
/// are skipped; ties count as the mean position of the tied block.
pub fn rank_of(scores: &[f64], answer: usize, excluded: &[usize]) -> f64 {
    let target = scores[answer];
    let (mut greater, mut ties) = (0usize, 0usize);
    for (e, &s) in scores.iter().enumerate() {
        if e == answer || excluded.binary_search(&e).is_ok() {
            continue;
        }
        if s > target {
            greater += 1;
        } else if s == target {
            ties += 1;
        }
    }
    1.0 + greater as f64 + ties as f64 / 2.0
}

/// Ranking metrics plus the propagation statistics of every query.
#[derive(Debug, Clone, Default)]
pub struct EvalOutput {
    pub report: RankingReport,
    pub stats: Vec<PropagationStats>,
    pub wall_seconds: f64,
}

/// Ranks every triplet in both directions with one propagation per distinct
/// `(source, relation)`. With `filter`, other known answers are removed from the
/// candidates.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    graph: &KnowledgeGraph,
    triplets: &[Triplet],
    filter: Option<&FilterSet>,
    budget: BudgetConfig,
    provider: &PriorityProvider,
) -> Result<EvalOutput> {
    let start = Instant::now();
    let queries = Query::group(triplets, graph.num_base_relations(), Provenance::Test);
    let per_query: Vec<Result<(Vec<f64>, PropagationStats)>> = queries
        .par_iter()
        .map(|q| {
            let fixed = provider.scores(graph, q.head)?;
            let priority = match &fixed {
                Some(s) => PrioritySource::Static(s),
                None => PrioritySource::Learned,
            };
            let pred = model.predict(graph, q.head, q.relation, Selection::Budget(budget), priority, None)?;
            let known = filter.map_or(&[][..], |f| f.answers(q.head, q.relation));
            let ranks = q
                .positive_tails
                .iter()
                .map(|&a| rank_of(&pred.scores, a, known))
                .collect();
            Ok((ranks, pred.stats))
        })
        .collect();
    let mut ranks = Vec::new();
    let mut stats = Vec::with_capacity(per_query.len());
    for r in per_query {
        let (rk, st) = r?;
        ranks.extend(rk);
        stats.push(st);
    }
    Ok(EvalOutput {
        report: RankingReport::from_ranks(ranks),
        stats,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Mean number of propagated edges over all runs and steps.
pub fn count_messages(stats: &[PropagationStats]) -> f64 {
    let (total, steps) = stats.iter().fold((0usize, 0usize), |(m, s), st| {
        (m + st.total_messages(), s + st.messages_per_step.len())
    });
    if steps == 0 {
        0.0
    } else {
        total as f64 / steps as f64
    }
}
