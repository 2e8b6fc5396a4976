use std::time::Instant;

use super::{AggregatorKind, EdgeWeightMode, Model, NetIds};
use crate::algebra::neural::{pna_scalers, PNA_VAR_FLOOR};
use crate::error::Result;
use crate::kg::{EdgeMask, KnowledgeGraph};
use crate::nn::{Matrix, Tape, Var};
use crate::priority::PriorityKind;
use crate::propagation::select::select_step;
use crate::propagation::{reached_pool, PropagationStats, Selection, Trace};
use crate::scalar::Scalar;

/// Where node priorities come from during a forward pass.
#[derive(Debug, Clone, Copy)]
pub enum PrioritySource<'a> {
    /// The model's neural priority, recomputed every step.
    Learned,
    /// Fixed per-node scores such as PPR or degree.
    Static(&'a [f64]),
    /// The same value for every node.
    Constant(f64),
}

/// Tape nodes and bookkeeping of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// `|V| × d` final representations.
    pub h: Var,
    /// `|V| × 1` link probabilities.
    pub scores: Var,
    pub trace: Trace,
    pub stats: PropagationStats,
}

/// Detached result of [`Model::predict`].
#[derive(Debug, Clone)]
pub struct Prediction<T> {
    pub scores: Vec<f64>,
    pub h: Matrix<T>,
    pub trace: Trace,
    pub stats: PropagationStats,
}

fn column<T: Scalar>(values: impl Iterator<Item = f64>) -> Matrix<T> {
    let data: Vec<T> = values.map(T::from_f64_lossy).collect();
    Matrix::from_vec(data.len(), 1, data).expect("column")
}

impl<T: Scalar> Model<T> {
    /// `sigmoid(f(h ⊙ g([h, q])))` for every row of `rows`.
    fn net_rows(&self, tape: &mut Tape<'_, T>, net: &NetIds, rows: Var, qrow: Var) -> Result<Var> {
        let m = tape.shape(rows).0;
        let qb = tape.gather(qrow, &vec![0; m])?;
        let x = tape.concat_cols(&[rows, qb])?;
        let (w, b) = (tape.param(net.g_w0), tape.param(net.g_b0));
        let a = tape.matmul(x, w)?;
        let a = tape.add_row(a, b)?;
        let a = tape.relu(a);
        let (w, b) = (tape.param(net.g_w1), tape.param(net.g_b1));
        let g = tape.matmul(a, w)?;
        let g = tape.add_row(g, b)?;
        let s = tape.mul(rows, g)?;
        let (w, b) = (tape.param(net.f_w0), tape.param(net.f_b0));
        let z = tape.matmul(s, w)?;
        let z = tape.add_row(z, b)?;
        let z = tape.relu(z);
        let (w, b) = (tape.param(net.f_w1), tape.param(net.f_b1));
        let logit = tape.matmul(z, w)?;
        let logit = tape.add_row(logit, b)?;
        Ok(tape.sigmoid(logit))
    }

    /// Network output on `pool` rows of `h` and on the zero vector elsewhere.
    fn dense_scores(
        &self,
        tape: &mut Tape<'_, T>,
        net: &NetIds,
        h: Var,
        pool: &[usize],
        qrow: Var,
        zero_row: Var,
    ) -> Result<Var> {
        let n = tape.shape(h).0;
        let base = self.net_rows(tape, net, zero_row, qrow)?;
        let base = tape.gather(base, &vec![0; n])?;
        let rows = tape.gather(h, pool)?;
        let active = self.net_rows(tape, net, rows, qrow)?;
        tape.row_replace(base, active, pool)
    }

    fn relation_table(&self, tape: &mut Tape<'_, T>, step: usize, qrow: Var) -> Result<Var> {
        let l = self.layer(step);
        match self.meta.config.edge_weights {
            EdgeWeightMode::Embedding => Ok(tape.param(self.ids.rel_table[l])),
            EdgeWeightMode::Linear => {
                let (w, b) = (tape.param(self.ids.rel_w[l]), tape.param(self.ids.rel_b[l]));
                let flat = tape.matmul(qrow, w)?;
                let flat = tape.add_row(flat, b)?;
                let rel = 2 * self.meta.num_base_relations;
                tape.reshape(flat, rel, self.meta.config.dim)
            }
        }
    }

    /// Degree-scaled mean/max/min/std aggregation of `comb` rows grouped by `seg`.
    fn pna(
        &self,
        tape: &mut Tape<'_, T>,
        step: usize,
        comb: Var,
        seg: &[usize],
        nodes: &[usize],
        graph: &KnowledgeGraph,
    ) -> Result<Var> {
        let k = nodes.len();
        let mut counts = vec![0usize; k];
        seg.iter().for_each(|&s| counts[s] += 1);
        let inv_n = tape.constant(column(counts.iter().map(|&c| 1.0 / c as f64)));
        let sum = tape.segment_sum(comb, seg, k)?;
        let mean = tape.scale_rows(sum, inv_n)?;
        let sq = tape.mul(comb, comb)?;
        let sq = tape.segment_sum(sq, seg, k)?;
        let sq_mean = tape.scale_rows(sq, inv_n)?;
        let max = tape.segment_max(comb, seg, k)?;
        let neg = tape.scalar_mul(comb, -1.0);
        let neg_max = tape.segment_max(neg, seg, k)?;
        let min = tape.scalar_mul(neg_max, -1.0);
        let mean_sq = tape.mul(mean, mean)?;
        let var = tape.sub(sq_mean, mean_sq)?;
        let var = tape.clamp_min(var, PNA_VAR_FLOOR);
        let std = tape.sqrt(var);
        let feat = tape.concat_cols(&[mean, max, min, std])?;
        let scalers: Vec<(f64, f64)> = nodes
            .iter()
            .map(|&v| pna_scalers(graph.degree(v), self.meta.mean_log_degree))
            .collect();
        let amp = tape.constant(column(scalers.iter().map(|s| s.0)));
        let att = tape.constant(column(scalers.iter().map(|s| s.1)));
        let fa = tape.scale_rows(feat, amp)?;
        let ft = tape.scale_rows(feat, att)?;
        let full = tape.concat_cols(&[feat, fa, ft])?;
        let l = self.layer(step);
        let (w, b) = (tape.param(self.ids.pna_w[l]), tape.param(self.ids.pna_b[l]));
        let out = tape.matmul(full, w)?;
        tape.add_row(out, b)
    }

    /// Records one pruned propagation for query `(source, query, ?)` on `tape` and
    /// returns the final representations and link probabilities of every entity.
    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        &self,
        tape: &mut Tape<'_, T>,
        graph: &KnowledgeGraph,
        source: usize,
        query: usize,
        selection: Selection<'_>,
        priority: PrioritySource<'_>,
        mask: Option<&EdgeMask>,
    ) -> Result<Forward> {
        let start = Instant::now();
        let n = graph.num_entities();
        let d = self.meta.config.dim;
        let qtab = tape.param(self.ids.query);
        let qrow = tape.gather(qtab, &[query])?;
        let zero_row = tape.constant(Matrix::zeros(1, d));
        let h0 = tape.scatter_fill(qrow, &[source], n, zero_row)?;
        let prio = self.ids.prio;

        let s0 = match priority {
            PrioritySource::Learned => self.dense_scores(tape, &prio, h0, &[source], qrow, zero_row)?,
            PrioritySource::Static(s) => tape.constant(column(s.iter().copied())),
            PrioritySource::Constant(c) => tape.constant(Matrix::filled(n, 1, T::from_f64_lossy(c))),
        };
        let values = |tape: &Tape<'_, T>, v: Var| -> Vec<f64> { tape.value(v).data().iter().map(|x| x.as_f64()).collect() };

        let mut h = h0;
        let mut s = s0;
        let mut s_vals = values(tape, s0);
        let mut pool = vec![source];
        let mut stats = PropagationStats::default();
        let mut trace = Trace {
            source,
            steps: Vec::new(),
            priorities: vec![s_vals.clone()],
        };
        for t in 1..=selection.steps() {
            let step = select_step(graph, &selection, t, &pool, &s_vals, mask)?;
            if step.edges.is_empty() {
                h = h0;
                s = s0;
                pool = vec![source];
            } else {
                let edges = graph.edges();
                let heads: Vec<usize> = step.edges.iter().map(|&e| edges[e].head).collect();
                let rels: Vec<usize> = step.edges.iter().map(|&e| edges[e].relation).collect();
                let tails: Vec<usize> = step.edges.iter().map(|&e| edges[e].tail).collect();

                let wtab = self.relation_table(tape, t, qrow)?;
                let hx = tape.gather(h, &heads)?;
                let wr = tape.gather(wtab, &rels)?;
                let msg = tape.mul(hx, wr)?;
                let sx = tape.gather(s, &heads)?;
                let msg = tape.scale_rows(msg, sx)?;

                let mut nodes = tails.clone();
                nodes.sort_unstable();
                nodes.dedup();
                let mut local = vec![usize::MAX; n];
                for (i, &v) in nodes.iter().enumerate() {
                    local[v] = i;
                }
                let seg: Vec<usize> = (0..nodes.len()).chain(tails.iter().map(|&v| local[v])).collect();
                let h0v = tape.gather(h0, &nodes)?;
                let comb = tape.concat_rows(&[h0v, msg])?;
                let agg = match self.meta.config.aggregator {
                    AggregatorKind::Sum => tape.segment_sum(comb, &seg, nodes.len())?,
                    AggregatorKind::Pna => self.pna(tape, t, comb, &seg, &nodes, graph)?,
                };
                h = tape.row_replace(h0, agg, &nodes)?;
                pool = reached_pool(source, &tails);
                s = match priority {
                    PrioritySource::Learned => self.dense_scores(tape, &prio, h, &pool, qrow, zero_row)?,
                    _ => s0,
                };
            }
            s_vals = values(tape, s);
            stats.nodes_per_step.push(step.nodes.len());
            stats.messages_per_step.push(step.edges.len());
            trace.steps.push(step);
            trace.priorities.push(s_vals.clone());
        }

        let learned = matches!(priority, PrioritySource::Learned);
        let scores = if learned && self.meta.config.share_predictor {
            s
        } else {
            let net = self.ids.pred.unwrap_or(prio);
            self.dense_scores(tape, &net, h, &pool, qrow, zero_row)?
        };
        stats.wall_seconds = start.elapsed().as_secs_f64();
        Ok(Forward {
            h,
            scores,
            trace,
            stats,
        })
    }

    /// Link probabilities of every entity for one query, without keeping the tape.
    pub fn predict(
        &self,
        graph: &KnowledgeGraph,
        source: usize,
        query: usize,
        selection: Selection<'_>,
        priority: PrioritySource<'_>,
        mask: Option<&EdgeMask>,
    ) -> Result<Prediction<T>> {
        let mut tape = Tape::new(&self.store);
        let fwd = self.forward(&mut tape, graph, source, query, selection, priority, mask)?;
        Ok(Prediction {
            scores: tape.value(fwd.scores).data().iter().map(|x| x.as_f64()).collect(),
            h: tape.value(fwd.h).clone(),
            trace: fwd.trace,
            stats: fwd.stats,
        })
    }

    /// Priority kind configured for this model.
    pub fn priority_kind(&self) -> PriorityKind {
        self.meta.config.priority
    }
}
