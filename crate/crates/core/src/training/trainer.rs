use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::negatives::{sample_negatives, NegativeSample};
use crate::error::{Error, Result};
use crate::kg::{mask_query_edges, EdgeMask, FilterSet, KnowledgeGraph, Triplet};
use crate::model::{Model, PrioritySource};
use crate::nn::{adam_step, bce_loss, AdamConfig, Gradients, Matrix, Tape};
use crate::priority::{degree_scores, PprCache, PriorityKind};
use crate::propagation::{BudgetConfig, PropagationStats, Selection};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub negatives: usize,
    pub adversarial_temperature: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            learning_rate: 5e-3,
            epochs: 20,
            negatives: 32,
            adversarial_temperature: None,
            alpha: 0.5,
            beta: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn budget(&self, steps: usize) -> Result<BudgetConfig> {
        BudgetConfig::new(self.alpha, self.beta, steps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.negatives == 0 {
            return Err(Error::Config("negatives must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        self.budget(1).map(|_| ())
    }
}

/// Resolves the priority used for a query on one graph.
#[derive(Debug)]
pub struct PriorityProvider {
    kind: PriorityKind,
    degree: Option<Vec<f64>>,
    ppr: PprCache,
}

impl PriorityProvider {
    pub fn new(kind: PriorityKind, graph: &KnowledgeGraph) -> Self {
        Self {
            kind,
            degree: (kind == PriorityKind::Degree).then(|| degree_scores(graph)),
            ppr: PprCache::default(),
        }
    }

    /// Static scores for `source`, or `None` for the learned priority.
    pub fn scores(&self, graph: &KnowledgeGraph, source: usize) -> Result<Option<Arc<Vec<f64>>>> {
        Ok(match self.kind {
            PriorityKind::Neural => None,
            PriorityKind::Degree => Some(Arc::new(self.degree.clone().unwrap_or_default())),
            PriorityKind::Ppr => Some(self.ppr.scores(graph, source)?),
        })
    }
}

/// Aggregates of one training epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// Mean per-sample loss.
    pub loss: f64,
    pub positive: f64,
    pub negative: f64,
    /// Gradient norm of the last batch.
    pub grad_norm: f64,
    pub batches: usize,
    pub samples: usize,
    pub mean_messages: f64,
    pub wall_seconds: f64,
}

const MERGE_WAVE: usize = 16;

struct SampleResult<T> {
    grads: Gradients<T>,
    total: f64,
    positive: f64,
    negative: f64,
    stats: PropagationStats,
}

#[allow(clippy::too_many_arguments)]
fn run_sample<T: Scalar>(
    model: &Model<T>,
    graph: &KnowledgeGraph,
    sample: &NegativeSample,
    budget: BudgetConfig,
    provider: &PriorityProvider,
    mask: &EdgeMask,
    temperature: Option<f64>,
) -> Result<SampleResult<T>> {
    let fixed = provider.scores(graph, sample.source)?;
    let priority = match &fixed {
        Some(s) => PrioritySource::Static(s),
        None => PrioritySource::Learned,
    };
    let mut tape = Tape::new(&model.store);
    let fwd = model.forward(
        &mut tape,
        graph,
        sample.source,
        sample.relation,
        Selection::Budget(budget),
        priority,
        Some(mask),
    )?;
    let scores = tape.value(fwd.scores);
    let pos = scores.get(sample.answer, 0);
    let negs: Vec<T> = sample.negatives.iter().map(|&e| scores.get(e, 0)).collect();
    let out = bce_loss(pos, &negs, temperature);
    let mut seed = Matrix::zeros(graph.num_entities(), 1);
    seed.set(sample.answer, 0, out.d_positive);
    for (&e, &g) in sample.negatives.iter().zip(&out.d_negatives) {
        seed.set(e, 0, seed.get(e, 0) + g);
    }
    let grads = tape.backward(&[(fwd.scores, seed)])?;
    Ok(SampleResult {
        grads,
        total: out.report.total,
        positive: out.report.positive,
        negative: out.report.negative,
        stats: fwd.stats,
    })
}

/// One pass over `train` in shuffled batches. Every batch hides its own query edges,
/// propagates each sample (in parallel on the current rayon pool), averages the
/// gradients in sample order and takes one Adam step.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch<T: Scalar, R: Rng + ?Sized>(
    model: &mut Model<T>,
    graph: &KnowledgeGraph,
    train: &[Triplet],
    known: &FilterSet,
    cfg: &TrainConfig,
    provider: &PriorityProvider,
    rng: &mut R,
) -> Result<EpochReport> {
    cfg.validate()?;
    let start = Instant::now();
    let budget = cfg.budget(model.config().steps)?;
    let adam = AdamConfig {
        lr: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(rng);
    let mut report = EpochReport::default();
    let (mut messages, mut steps) = (0usize, 0usize);
    for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
        let batch: Vec<Triplet> = chunk.iter().map(|&i| train[i]).collect();
        let mask = mask_query_edges(graph, &batch);
        let samples: Vec<NegativeSample> = batch
            .iter()
            .map(|&t| {
                sample_negatives(
                    t,
                    graph.num_entities(),
                    graph.num_base_relations(),
                    known,
                    cfg.negatives,
                    rng,
                )
            })
            .collect();
        let model_ref = &*model;
        let mut merged = Gradients::new(model.store.len());
        let scale = T::from_f64_lossy(1.0 / batch.len() as f64);
        let mut batch_loss = 0.0;
        // fixed-size waves bound memory and keep the merge order independent of threads
        for wave in samples.chunks(MERGE_WAVE) {
            let results: Vec<Result<SampleResult<T>>> = wave
                .par_iter()
                .map(|s| run_sample(model_ref, graph, s, budget, provider, &mask, cfg.adversarial_temperature))
                .collect();
            for r in results {
                let r = r?;
                merged.merge(&r.grads, scale);
                batch_loss += r.total;
                report.positive += r.positive;
                report.negative += r.negative;
                messages += r.stats.total_messages();
                steps += r.stats.messages_per_step.len();
            }
        }
        if !batch_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                loss: batch_loss,
                batch: b,
            });
        }
        report.loss += batch_loss;
        report.samples += batch.len();
        report.batches += 1;
        model.store.accumulate(&merged, T::one());
        report.grad_norm = model.store.grad_norm().as_f64();
        adam_step(&mut model.store, &adam);
    }
    let n = report.samples.max(1) as f64;
    report.loss /= n;
    report.positive /= n;
    report.negative /= n;
    report.mean_messages = if steps == 0 { 0.0 } else { messages as f64 / steps as f64 };
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
