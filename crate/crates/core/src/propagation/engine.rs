use std::time::Instant;

use super::select::{reached_pool, select_step};
use super::{PropagationStats, Selection, Trace};
use crate::algebra::{AggregateContext, BoundaryModel, EdgeWeightModel, PathAlgebra};
use crate::error::Result;
use crate::kg::{EdgeMask, KnowledgeGraph};

/// The fixed ingredients of a propagation run.
pub struct Setting<'a, A, W, B> {
    pub graph: &'a KnowledgeGraph,
    pub algebra: &'a A,
    pub weights: &'a W,
    pub boundary: &'a B,
    pub mask: Option<&'a EdgeMask>,
}

impl<A, W, B> Clone for Setting<'_, A, W, B> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<A, W, B> Copy for Setting<'_, A, W, B> {}

impl<'a, A, W, B> Setting<'a, A, W, B>
where
    A: PathAlgebra,
    W: EdgeWeightModel<A>,
    B: BoundaryModel<A>,
{
    pub fn new(graph: &'a KnowledgeGraph, algebra: &'a A, weights: &'a W, boundary: &'a B) -> Self {
        Self {
            graph,
            algebra,
            weights,
            boundary,
            mask: None,
        }
    }

    pub fn with_mask(mut self, mask: Option<&'a EdgeMask>) -> Self {
        self.mask = mask;
        self
    }

    fn boundary_table(&self, source: usize, query: usize) -> Vec<A::Value> {
        (0..self.graph.num_entities())
            .map(|v| self.boundary.boundary(self.algebra, source, query, v))
            .collect()
    }

    fn weight_table(&self, step: usize, query: usize) -> Vec<A::Weight> {
        (0..self.graph.num_relations())
            .map(|r| self.weights.weight(step, r, query))
            .collect()
    }

    fn visible(&self, edge: usize) -> bool {
        self.mask.is_none_or(|m| m.is_visible(edge))
    }

    /// `h⁽ᵗ⁾(v) = h⁽⁰⁾(v) ⊕ messages(v)` for nodes with messages, `h⁽⁰⁾(v)` otherwise.
    fn combine(&self, h0: &[A::Value], buckets: Vec<Vec<A::Value>>, step: usize) -> Vec<A::Value> {
        let mut next = h0.to_vec();
        for (v, msgs) in buckets.into_iter().enumerate() {
            if msgs.is_empty() {
                continue;
            }
            let mut values = Vec::with_capacity(msgs.len() + 1);
            values.push(h0[v].clone());
            values.extend(msgs);
            let ctx = AggregateContext {
                step,
                degree: self.graph.degree(v),
            };
            next[v] = self.algebra.aggregate(&values, ctx);
        }
        next
    }
}

/// Final representations of a full run.
#[derive(Debug, Clone)]
pub struct Propagation<V> {
    pub h: Vec<V>,
    pub stats: PropagationStats,
}

/// Final representations, final priorities `s⁽ᵀ⁾`, work and selection trace of a pruned run.
#[derive(Debug, Clone)]
pub struct AStarOutput<V> {
    pub h: Vec<V>,
    pub scores: Vec<f64>,
    pub stats: PropagationStats,
    pub trace: Trace,
}

/// Generalized Bellman-Ford over every visible edge for `steps` iterations.
pub fn bellman_ford_full<A, W, B>(
    setting: Setting<'_, A, W, B>,
    source: usize,
    query: usize,
    steps: usize,
) -> Result<Propagation<A::Value>>
where
    A: PathAlgebra,
    W: EdgeWeightModel<A>,
    B: BoundaryModel<A>,
{
    let start = Instant::now();
    let g = setting.graph;
    let n = g.num_entities();
    let h0 = setting.boundary_table(source, query);
    let mut h = h0.clone();
    let mut stats = PropagationStats::default();
    for t in 1..=steps {
        let w = setting.weight_table(t, query);
        let mut buckets = vec![Vec::new(); n];
        let mut messages = 0;
        for (e, tr) in g.edges().iter().enumerate() {
            if !setting.visible(e) {
                continue;
            }
            buckets[tr.tail].push(setting.algebra.multiply(&h[tr.head], &w[tr.relation])?);
            messages += 1;
        }
        h = setting.combine(&h0, buckets, t);
        stats.nodes_per_step.push(n);
        stats.messages_per_step.push(messages);
    }
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(Propagation { h, stats })
}

/// Priority-pruned propagation. Each iteration selects nodes and edges, scales every
/// message by the priority of its head, and recomputes priorities on the nodes that
/// now hold a representation. Nodes outside that set keep the priority of their
/// boundary value.
pub fn astar_propagate<A, W, B>(
    setting: Setting<'_, A, W, B>,
    source: usize,
    query: usize,
    selection: Selection<'_>,
    mut priority: impl FnMut(usize, &A::Value) -> f64,
) -> Result<AStarOutput<A::Value>>
where
    A: PathAlgebra,
    W: EdgeWeightModel<A>,
    B: BoundaryModel<A>,
{
    let start = Instant::now();
    let g = setting.graph;
    let n = g.num_entities();
    let h0 = setting.boundary_table(source, query);
    let s0: Vec<f64> = h0.iter().enumerate().map(|(v, x)| priority(v, x)).collect();
    let mut h = h0.clone();
    let mut s = s0.clone();
    let mut pool = vec![source];
    let mut stats = PropagationStats::default();
    let mut trace = Trace {
        source,
        steps: Vec::new(),
        priorities: vec![s0.clone()],
    };
    for t in 1..=selection.steps() {
        let step = select_step(g, &selection, t, &pool, &s, setting.mask)?;
        let w = setting.weight_table(t, query);
        let mut buckets = vec![Vec::new(); n];
        let mut tails = Vec::with_capacity(step.edges.len());
        for &e in &step.edges {
            let tr = g.edge(e);
            let m = setting.algebra.multiply(&h[tr.head], &w[tr.relation])?;
            buckets[tr.tail].push(setting.algebra.scale(m, s[tr.head]));
            tails.push(tr.tail);
        }
        h = setting.combine(&h0, buckets, t);
        pool = reached_pool(source, &tails);
        let mut next = s0.clone();
        for &v in &pool {
            next[v] = priority(v, &h[v]);
        }
        s = next;
        stats.nodes_per_step.push(step.nodes.len());
        stats.messages_per_step.push(step.edges.len());
        trace.steps.push(step);
        trace.priorities.push(s.clone());
    }
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(AStarOutput {
        h,
        scores: s,
        stats,
        trace,
    })
}
