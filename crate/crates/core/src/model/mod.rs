//! The learnable model: DistMult messages over pruned propagation, scored by a
//! neural priority that doubles as the link predictor.

mod forward;

pub use forward::{Forward, Prediction, PrioritySource};

use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{NeuralAggregator, NeuralAlgebra, NeuralWeights, PnaLayer, RelationWeights};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, ParamId, ParameterStore};
use crate::priority::{PriorityKind, PriorityNet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregatorKind {
    Sum,
    Pna,
}

impl FromStr for AggregatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Self::Sum),
            "pna" => Ok(Self::Pna),
            other => Err(Error::Config(format!("unknown aggregator `{other}` (expected sum or pna)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeWeightMode {
    /// Relation vectors computed linearly from the query embedding.
    Linear,
    /// A free embedding per relation.
    Embedding,
}

impl FromStr for EdgeWeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "embedding" => Ok(Self::Embedding),
            other => Err(Error::Config(format!(
                "unknown edge weight mode `{other}` (expected linear or embedding)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub hidden: usize,
    pub steps: usize,
    pub aggregator: AggregatorKind,
    pub edge_weights: EdgeWeightMode,
    /// Separate relation (and PNA) parameters for every step.
    pub per_step_weights: bool,
    /// Use the priority network as the final predictor.
    pub share_predictor: bool,
    pub priority: PriorityKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            hidden: 64,
            steps: 8,
            aggregator: AggregatorKind::Sum,
            edge_weights: EdgeWeightMode::Linear,
            per_step_weights: true,
            share_predictor: true,
            priority: PriorityKind::Neural,
        }
    }
}

impl ModelConfig {
    fn layers(&self) -> usize {
        if self.per_step_weights {
            self.steps.max(1)
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NetIds {
    g_w0: ParamId,
    g_b0: ParamId,
    g_w1: ParamId,
    g_b1: ParamId,
    f_w0: ParamId,
    f_b0: ParamId,
    f_w1: ParamId,
    f_b1: ParamId,
}

#[derive(Debug, Clone)]
pub(crate) struct ParamIds {
    query: ParamId,
    rel_w: Vec<ParamId>,
    rel_b: Vec<ParamId>,
    rel_table: Vec<ParamId>,
    pna_w: Vec<ParamId>,
    pna_b: Vec<ParamId>,
    prio: NetIds,
    pred: Option<NetIds>,
}

/// Everything needed to rebuild a model around a stored parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub config: ModelConfig,
    pub num_base_relations: usize,
    pub mean_log_degree: f64,
}

/// Value-level copies of the model parameters, usable with the generic engines.
#[derive(Debug, Clone)]
pub struct ValueModel<T> {
    pub algebra: NeuralAlgebra<T>,
    pub weights: NeuralWeights<T>,
    pub priority: PriorityNet<T>,
    pub predictor: PriorityNet<T>,
}

#[derive(Debug, Clone)]
pub struct Model<T: Scalar> {
    pub meta: ModelMeta,
    pub store: ParameterStore<T>,
    ids: ParamIds,
}

fn add_net<T: Scalar, R: Rng + ?Sized>(store: &mut ParameterStore<T>, prefix: &str, d: usize, hidden: usize, rng: &mut R) {
    store.add_uniform(format!("{prefix}.g0.w"), 2 * d, hidden, 2 * d, rng);
    store.add_uniform(format!("{prefix}.g0.b"), 1, hidden, 2 * d, rng);
    store.add_uniform(format!("{prefix}.g1.w"), hidden, d, hidden, rng);
    store.add_uniform(format!("{prefix}.g1.b"), 1, d, hidden, rng);
    store.add_uniform(format!("{prefix}.f0.w"), d, hidden, d, rng);
    store.add_uniform(format!("{prefix}.f0.b"), 1, hidden, d, rng);
    store.add_uniform(format!("{prefix}.f1.w"), hidden, 1, hidden, rng);
    store.add_uniform(format!("{prefix}.f1.b"), 1, 1, hidden, rng);
}

impl<T: Scalar> Model<T> {
    pub fn new<R: Rng + ?Sized>(
        config: ModelConfig,
        num_base_relations: usize,
        mean_log_degree: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if config.dim == 0 || config.hidden == 0 {
            return Err(Error::Config("dim and hidden must be positive".into()));
        }
        let (d, h, rel) = (config.dim, config.hidden, 2 * num_base_relations);
        let mut store = ParameterStore::new();
        store.add_uniform("query", rel, d, d, rng);
        for l in 0..config.layers() {
            match config.edge_weights {
                EdgeWeightMode::Linear => {
                    store.add_uniform(format!("rel.{l}.w"), d, rel * d, d, rng);
                    store.add_uniform(format!("rel.{l}.b"), 1, rel * d, d, rng);
                }
                EdgeWeightMode::Embedding => {
                    store.add_uniform(format!("rel.{l}.table"), rel, d, d, rng);
                }
            }
            if config.aggregator == AggregatorKind::Pna {
                store.add_uniform(format!("pna.{l}.w"), 12 * d, d, 12 * d, rng);
                store.add_uniform(format!("pna.{l}.b"), 1, d, 12 * d, rng);
            }
        }
        add_net(&mut store, "prio", d, h, rng);
        if !config.share_predictor {
            add_net(&mut store, "pred", d, h, rng);
        }
        Self::from_store(
            ModelMeta {
                config,
                num_base_relations,
                mean_log_degree,
            },
            store,
        )
    }

    /// Rebinds a model to a parameter set, checking that every array is present with
    /// the expected shape.
    pub fn from_store(meta: ModelMeta, store: ParameterStore<T>) -> Result<Self> {
        let c = &meta.config;
        let (d, h, rel) = (c.dim, c.hidden, 2 * meta.num_base_relations);
        let find = |name: String, shape: (usize, usize)| -> Result<ParamId> {
            let id = store
                .id(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing array `{name}`")))?;
            let got = store.value(id).shape();
            if got != shape {
                return Err(Error::Checkpoint(format!(
                    "array `{name}` has shape {got:?}, expected {shape:?}"
                )));
            }
            Ok(id)
        };
        let net = |prefix: &str| -> Result<NetIds> {
            Ok(NetIds {
                g_w0: find(format!("{prefix}.g0.w"), (2 * d, h))?,
                g_b0: find(format!("{prefix}.g0.b"), (1, h))?,
                g_w1: find(format!("{prefix}.g1.w"), (h, d))?,
                g_b1: find(format!("{prefix}.g1.b"), (1, d))?,
                f_w0: find(format!("{prefix}.f0.w"), (d, h))?,
                f_b0: find(format!("{prefix}.f0.b"), (1, h))?,
                f_w1: find(format!("{prefix}.f1.w"), (h, 1))?,
                f_b1: find(format!("{prefix}.f1.b"), (1, 1))?,
            })
        };
        let mut ids = ParamIds {
            query: find("query".into(), (rel, d))?,
            rel_w: Vec::new(),
            rel_b: Vec::new(),
            rel_table: Vec::new(),
            pna_w: Vec::new(),
            pna_b: Vec::new(),
            prio: net("prio")?,
            pred: if c.share_predictor { None } else { Some(net("pred")?) },
        };
        for l in 0..c.layers() {
            match c.edge_weights {
                EdgeWeightMode::Linear => {
                    ids.rel_w.push(find(format!("rel.{l}.w"), (d, rel * d))?);
                    ids.rel_b.push(find(format!("rel.{l}.b"), (1, rel * d))?);
                }
                EdgeWeightMode::Embedding => ids.rel_table.push(find(format!("rel.{l}.table"), (rel, d))?),
            }
            if c.aggregator == AggregatorKind::Pna {
                ids.pna_w.push(find(format!("pna.{l}.w"), (12 * d, d))?);
                ids.pna_b.push(find(format!("pna.{l}.b"), (1, d))?);
            }
        }
        Ok(Self { meta, store, ids })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.meta.config
    }

    fn layer(&self, step: usize) -> usize {
        (step.max(1) - 1).min(self.meta.config.layers() - 1)
    }

    fn net_values(&self, ids: &NetIds) -> PriorityNet<T> {
        let v = |id| self.store.value(id).clone();
        PriorityNet {
            g_w0: v(ids.g_w0),
            g_b0: v(ids.g_b0),
            g_w1: v(ids.g_w1),
            g_b1: v(ids.g_b1),
            f_w0: v(ids.f_w0),
            f_b0: v(ids.f_b0),
            f_w1: v(ids.f_w1),
            f_b1: v(ids.f_b1),
        }
    }

    /// Copies the current parameters into value-level algebra, weights and networks.
    pub fn value_model(&self) -> ValueModel<T> {
        let c = &self.meta.config;
        let v = |id: &ParamId| self.store.value(*id).clone();
        let relations = match c.edge_weights {
            EdgeWeightMode::Linear => RelationWeights::Linear {
                w: self.ids.rel_w.iter().map(v).collect(),
                b: self.ids.rel_b.iter().map(v).collect(),
            },
            EdgeWeightMode::Embedding => RelationWeights::Table(self.ids.rel_table.iter().map(v).collect()),
        };
        let aggregator = match c.aggregator {
            AggregatorKind::Sum => NeuralAggregator::Sum,
            AggregatorKind::Pna => NeuralAggregator::Pna {
                layers: self
                    .ids
                    .pna_w
                    .iter()
                    .zip(&self.ids.pna_b)
                    .map(|(w, b)| PnaLayer {
                        weight: v(w),
                        bias: v(b),
                    })
                    .collect(),
                mean_log_degree: self.meta.mean_log_degree,
            },
        };
        let priority = self.net_values(&self.ids.prio);
        let predictor = self.ids.pred.as_ref().map_or_else(|| priority.clone(), |p| self.net_values(p));
        ValueModel {
            algebra: NeuralAlgebra {
                dim: c.dim,
                aggregator,
            },
            weights: NeuralWeights {
                dim: c.dim,
                query: v(&self.ids.query),
                relations,
            },
            priority,
            predictor,
        }
    }

    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<()> {
        let meta = serde_json::json!({ "model": self.meta, "extra": extra });
        checkpoint::save(path, &self.store, meta)
    }

    /// Loads a model and the `extra` metadata stored alongside it.
    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let (store, manifest) = checkpoint::load::<T>(path)?;
        let meta: ModelMeta = serde_json::from_value(manifest.meta["model"].clone())
            .map_err(|e| Error::Checkpoint(format!("model metadata: {e}")))?;
        let extra = manifest.meta.get("extra").cloned().unwrap_or(serde_json::Value::Null);
        Ok((Self::from_store(meta, store)?, extra))
    }
}
