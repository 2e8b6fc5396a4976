//! Important-path extraction from recorded priorities.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EdgeMask, KnowledgeGraph, Triplet, Vocab};
use crate::model::{Model, PrioritySource};
use crate::propagation::{path_nodes, BudgetConfig, Selection, Trace};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPath {
    pub edges: Vec<usize>,
    pub triplets: Vec<Triplet>,
    pub importance: f64,
    /// `s⁽ᵗ⁻¹⁾(xₜ) / S⁽ᵗ⁻¹⁾` for every edge.
    pub step_priorities: Vec<f64>,
}

/// Normalized priority of `node` as the head of the `t`-th edge (1-based). Nodes
/// not selected at step `t` contribute 0.
fn step_ratio(trace: &Trace, t: usize, node: usize) -> f64 {
    let step = &trace.steps[t - 1];
    if step.nodes.binary_search(&node).is_err() {
        return 0.0;
    }
    let norm = trace.normalizer(t - 1);
    if norm > 0.0 {
        (trace.priorities[t - 1][node] / norm).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Mean over the path's edges of the head priority normalized by the step maximum.
pub fn path_importance(trace: &Trace, graph: &KnowledgeGraph, path: &[usize]) -> Result<f64> {
    Ok(score_path(trace, graph, path)?.importance)
}

fn score_path(trace: &Trace, graph: &KnowledgeGraph, path: &[usize]) -> Result<ScoredPath> {
    if path.len() > trace.steps.len() {
        return Err(Error::PathTooLong {
            length: path.len(),
            recorded: trace.steps.len(),
        });
    }
    let nodes = path_nodes(graph, trace.source, path)?;
    let step_priorities: Vec<f64> = (1..=path.len()).map(|t| step_ratio(trace, t, nodes[t - 1])).collect();
    let importance = if path.is_empty() {
        0.0
    } else {
        step_priorities.iter().sum::<f64>() / path.len() as f64
    };
    Ok(ScoredPath {
        edges: path.to_vec(),
        triplets: path.iter().map(|&e| graph.edge(e)).collect(),
        importance,
        step_priorities,
    })
}

fn rank(a: &ScoredPath, b: &ScoredPath) -> std::cmp::Ordering {
    b.importance
        .total_cmp(&a.importance)
        .then_with(|| a.edges.len().cmp(&b.edges.len()))
        .then_with(|| a.edges.cmp(&b.edges))
}

/// Beam search from the recorded source over at most `max_len` steps. At every depth
/// the `beam` partial walks with the highest running importance survive; walks
/// reaching `answer` are emitted. Returns the best `beam` emitted walks.
pub fn beam_search_paths(
    trace: &Trace,
    graph: &KnowledgeGraph,
    answer: usize,
    beam: usize,
    max_len: usize,
    mask: Option<&EdgeMask>,
) -> Result<Vec<ScoredPath>> {
    let depth = max_len.min(trace.steps.len());
    let mut frontier: Vec<(Vec<usize>, f64, usize)> = vec![(Vec::new(), 0.0, trace.source)];
    let mut found = Vec::new();
    for t in 1..=depth {
        let mut next = Vec::new();
        for (edges, sum, at) in &frontier {
            if trace.steps[t - 1].nodes.binary_search(at).is_err() {
                continue;
            }
            let r = step_ratio(trace, t, *at);
            for e in graph.out_edges(*at) {
                if !mask.is_none_or(|m| m.is_visible(e)) {
                    continue;
                }
                let mut path = edges.clone();
                path.push(e);
                let tail = graph.edge(e).tail;
                if tail == answer {
                    found.push(score_path(trace, graph, &path)?);
                }
                next.push((path, sum + r, tail));
            }
        }
        next.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        next.truncate(beam);
        frontier = next;
    }
    found.sort_by(rank);
    found.truncate(beam);
    Ok(found)
}

/// Runs the model on `(source, relation, ?)` and extracts paths to `answer`.
#[allow(clippy::too_many_arguments)]
pub fn explain_query<T: Scalar>(
    model: &Model<T>,
    graph: &KnowledgeGraph,
    source: usize,
    relation: usize,
    answer: usize,
    budget: BudgetConfig,
    priority: PrioritySource<'_>,
    beam: usize,
) -> Result<(f64, Vec<ScoredPath>)> {
    let pred = model.predict(graph, source, relation, Selection::Budget(budget), priority, None)?;
    let paths = beam_search_paths(&pred.trace, graph, answer, beam, budget.steps, None)?;
    Ok((pred.scores[answer], paths))
}

fn relation_label(relations: &Vocab, num_base: usize, r: usize) -> String {
    if r < num_base {
        relations.name(r).unwrap_or("?").to_string()
    } else {
        format!("{}^-1", relations.name(r - num_base).unwrap_or("?"))
    }
}

fn entity_label(entities: &Vocab, e: usize) -> String {
    entities.name(e).map_or_else(|| e.to_string(), str::to_string)
}

/// One `score<TAB>u -r1-> x1 -r2-> ... -> v` line per path.
pub fn render_text(paths: &[ScoredPath], graph: &KnowledgeGraph, entities: &Vocab, relations: &Vocab) -> String {
    let mut out = String::new();
    for p in paths {
        let _ = write!(out, "{:.6}\t", p.importance);
        if let Some(first) = p.triplets.first() {
            out.push_str(&entity_label(entities, first.head));
        }
        for t in &p.triplets {
            let _ = write!(
                out,
                " -{}-> {}",
                relation_label(relations, graph.num_base_relations(), t.relation),
                entity_label(entities, t.tail)
            );
        }
        out.push('\n');
    }
    out
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// A `digraph` holding the union of the edges of `paths`.
pub fn render_dot(paths: &[ScoredPath], graph: &KnowledgeGraph, entities: &Vocab, relations: &Vocab) -> String {
    let edges: BTreeSet<(usize, usize, usize)> = paths
        .iter()
        .flat_map(|p| p.triplets.iter().map(|t| (t.head, t.relation, t.tail)))
        .collect();
    let mut out = String::from("digraph paths {\n");
    for (h, r, t) in edges {
        let _ = writeln!(
            out,
            "  {} -> {} [label={}];",
            dot_quote(&entity_label(entities, h)),
            dot_quote(&entity_label(entities, t)),
            dot_quote(&relation_label(relations, graph.num_base_relations(), r))
        );
    }
    out.push_str("}\n");
    out
}
