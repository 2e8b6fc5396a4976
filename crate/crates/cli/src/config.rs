use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use astarnet::kg::SplitMode;
use astarnet::model::{AggregatorKind, EdgeWeightMode, ModelConfig};
use astarnet::priority::PriorityKind;
use astarnet::training::TrainConfig;

/// A problem in a configuration file, located by line and key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: key `{}`: {}", self.path, self.line, self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub split: SplitMode,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub valid_every: usize,
    /// Cap on evaluated triplets; 0 evaluates all of them.
    pub max_eval_triplets: usize,
    pub bench_alphas: Vec<f64>,
    pub bench_queries: usize,
    pub out: PathBuf,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            split: SplitMode::Inductive,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            valid_every: 1,
            max_eval_triplets: 0,
            bench_alphas: vec![0.01, 0.1, 0.5, 1.0],
            bench_queries: 100,
            out: PathBuf::from("runs/default"),
            threads: 0,
        }
    }
}

fn parse_value<T: FromStr>(raw: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| format!("cannot parse `{raw}`: {e}"))
}

fn parse_bool(raw: &str) -> Result<bool, String> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{raw}`")),
    }
}

fn ratio(raw: &str) -> Result<f64, String> {
    let v: f64 = parse_value(raw)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1], got {v}"))
    }
}

fn positive(raw: &str) -> Result<usize, String> {
    match parse_value::<usize>(raw)? {
        0 => Err("must be at least 1".into()),
        v => Ok(v),
    }
}

fn split_name(mode: SplitMode) -> &'static str {
    match mode {
        SplitMode::Transductive => "transductive",
        SplitMode::Inductive => "inductive",
    }
}

fn aggregator_name(a: AggregatorKind) -> &'static str {
    match a {
        AggregatorKind::Sum => "sum",
        AggregatorKind::Pna => "pna",
    }
}

fn edge_mode_name(m: EdgeWeightMode) -> &'static str {
    match m {
        EdgeWeightMode::Linear => "linear",
        EdgeWeightMode::Embedding => "embedding",
    }
}

fn priority_name(p: PriorityKind) -> &'static str {
    match p {
        PriorityKind::Neural => "neural",
        PriorityKind::Ppr => "ppr",
        PriorityKind::Degree => "degree",
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.display().to_string(),
            line: 0,
            key: String::new(),
            message: format!("cannot read: {e}"),
        })?;
        Ok(Self::parse(&text, &path.display().to_string())?)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |key: &str, message: String| ConfigError {
                path: origin.to_string(),
                line: i + 1,
                key: key.to_string(),
                message,
            };
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "unterminated section header".into()))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line, "expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            cfg.set(&full, value).map_err(|m| err(&full, m))?;
        }
        Ok(cfg)
    }

    /// Sets one dotted key such as `train.alpha`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "data.dataset" => self.dataset = Some(PathBuf::from(value)),
            "data.split" => self.split = value.parse().map_err(|e| format!("{e}"))?,
            "model.algebra" => {
                if value != "neural" {
                    return Err(format!(
                        "only the neural algebra is trainable, got `{value}` (exact algebras run under oracle-check)"
                    ));
                }
            }
            "model.dim" => self.model.dim = positive(value)?,
            "model.hidden" => self.model.hidden = positive(value)?,
            "model.steps" => self.model.steps = parse_value(value)?,
            "model.aggregator" => self.model.aggregator = value.parse().map_err(|e| format!("{e}"))?,
            "model.edge_weights" => self.model.edge_weights = value.parse().map_err(|e| format!("{e}"))?,
            "model.per_step_weights" => self.model.per_step_weights = parse_bool(value)?,
            "model.share_predictor" => self.model.share_predictor = parse_bool(value)?,
            "model.priority" => self.model.priority = value.parse().map_err(|e| format!("{e}"))?,
            "train.batch_size" => self.train.batch_size = positive(value)?,
            "train.learning_rate" => {
                let lr: f64 = parse_value(value)?;
                if !(lr >= 0.0 && lr.is_finite()) {
                    return Err(format!("must be a non-negative number, got {lr}"));
                }
                self.train.learning_rate = lr;
            }
            "train.epochs" => self.train.epochs = parse_value(value)?,
            "train.negatives" => self.train.negatives = positive(value)?,
            "train.adversarial_temperature" => {
                self.train.adversarial_temperature = match value {
                    "none" | "" => None,
                    v => Some(parse_value(v)?),
                }
            }
            "train.alpha" => self.train.alpha = ratio(value)?,
            "train.beta" => self.train.beta = ratio(value)?,
            "train.seed" => self.train.seed = parse_value(value)?,
            "eval.valid_every" => self.valid_every = positive(value)?,
            "eval.max_triplets" => self.max_eval_triplets = parse_value(value)?,
            "bench.alphas" => {
                self.bench_alphas = value
                    .split(',')
                    .map(|a| ratio(a.trim()))
                    .collect::<Result<_, _>>()?
            }
            "bench.queries" => self.bench_queries = positive(value)?,
            "run.out" => self.out = PathBuf::from(value),
            "run.threads" => self.threads = parse_value(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// The complete effective configuration in the file format.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[data]");
        if let Some(d) = &self.dataset {
            let _ = writeln!(s, "dataset = {}", d.display());
        }
        let _ = writeln!(s, "split = {}", split_name(self.split));
        let m = &self.model;
        let _ = writeln!(s, "\n[model]\nalgebra = neural\ndim = {}\nhidden = {}\nsteps = {}", m.dim, m.hidden, m.steps);
        let _ = writeln!(s, "aggregator = {}", aggregator_name(m.aggregator));
        let _ = writeln!(s, "edge_weights = {}", edge_mode_name(m.edge_weights));
        let _ = writeln!(s, "per_step_weights = {}", m.per_step_weights);
        let _ = writeln!(s, "share_predictor = {}", m.share_predictor);
        let _ = writeln!(s, "priority = {}", priority_name(m.priority));
        let t = &self.train;
        let _ = writeln!(s, "\n[train]\nbatch_size = {}", t.batch_size);
        let _ = writeln!(s, "learning_rate = {:?}", t.learning_rate);
        let _ = writeln!(s, "epochs = {}\nnegatives = {}", t.epochs, t.negatives);
        match t.adversarial_temperature {
            Some(v) => {
                let _ = writeln!(s, "adversarial_temperature = {v:?}");
            }
            None => {
                let _ = writeln!(s, "adversarial_temperature = none");
            }
        }
        let _ = writeln!(s, "alpha = {:?}\nbeta = {:?}\nseed = {}", t.alpha, t.beta, t.seed);
        let _ = writeln!(s, "\n[eval]\nvalid_every = {}\nmax_triplets = {}", self.valid_every, self.max_eval_triplets);
        let alphas: Vec<String> = self.bench_alphas.iter().map(|a| format!("{a:?}")).collect();
        let _ = writeln!(s, "\n[bench]\nalphas = {}\nqueries = {}", alphas.join(", "), self.bench_queries);
        let _ = writeln!(s, "\n[run]\nout = {}\nthreads = {}", self.out.display(), self.threads);
        s
    }
}
