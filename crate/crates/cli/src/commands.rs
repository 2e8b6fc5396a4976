use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use astarnet::explain::{explain_query, render_dot, render_text};
use astarnet::kg::{KnowledgeGraph, SplitBundle, Triplet, Vocab};
use astarnet::model::PrioritySource;
use astarnet::oracle::{run_oracle_suite, Fault};
use astarnet::propagation::{BudgetConfig, PropagationStats, Selection};
use astarnet::training::{count_messages, evaluate, train_epoch, PriorityProvider, RankingReport};
use astarnet::Model64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::{FaultArg, SplitArg, UsageError};

fn load_bundle(cfg: &RunConfig) -> anyhow::Result<SplitBundle> {
    let dir = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| UsageError("no dataset given; pass --dataset or set data.dataset".into()))?;
    Ok(SplitBundle::load(dir, cfg.split)?)
}

/// Fills in the dataset recorded in a checkpoint when none was given.
fn with_checkpoint_dataset(cfg: &RunConfig, extra: &Value) -> RunConfig {
    let mut cfg = cfg.clone();
    if cfg.dataset.is_none() {
        if let Some(text) = extra.get("config").and_then(Value::as_str) {
            if let Ok(saved) = RunConfig::parse(text, "checkpoint") {
                cfg.dataset = saved.dataset;
                cfg.split = saved.split;
            }
        }
    }
    cfg
}

fn capped(triplets: &[Triplet], cap: usize) -> &[Triplet] {
    if cap == 0 || cap >= triplets.len() {
        triplets
    } else {
        &triplets[..cap]
    }
}

fn report_json(r: &RankingReport) -> Value {
    json!({
        "mrr": r.mrr,
        "hits@1": r.hits1,
        "hits@3": r.hits3,
        "hits@10": r.hits10,
        "count": r.count,
    })
}

/// Mean selected nodes and messages at each step over a set of runs.
fn per_step_means(stats: &[PropagationStats]) -> Vec<(f64, f64)> {
    let steps = stats.iter().map(|s| s.messages_per_step.len()).max().unwrap_or(0);
    (0..steps)
        .map(|t| {
            let rows: Vec<&PropagationStats> = stats.iter().filter(|s| s.messages_per_step.len() > t).collect();
            let n = rows.len().max(1) as f64;
            let nodes = rows.iter().map(|s| s.nodes_per_step[t] as f64).sum::<f64>() / n;
            let msgs = rows.iter().map(|s| s.messages_per_step[t] as f64).sum::<f64>() / n;
            (nodes, msgs)
        })
        .collect()
}

struct MetricsLog(fs::File);

impl MetricsLog {
    fn open(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("metrics.log");
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("opening {}", path.display()))?;
        Ok(Self(file))
    }

    fn line(&mut self, text: &str) -> anyhow::Result<()> {
        writeln!(self.0, "{text}")?;
        Ok(())
    }

    fn steps(&mut self, prefix: &str, stats: &[PropagationStats]) -> anyhow::Result<()> {
        for (t, (nodes, msgs)) in per_step_means(stats).into_iter().enumerate() {
            self.line(&format!("{prefix} step={} nodes={nodes:.2} edges={msgs:.2}", t + 1))?;
        }
        Ok(())
    }
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

pub fn train(cfg: &RunConfig, resume: Option<&Path>) -> anyhow::Result<ExitCode> {
    let data = load_bundle(cfg)?;
    let out = &cfg.out;
    let mut log = MetricsLog::open(out)?;
    fs::write(out.join("config.ini"), cfg.render())?;
    let config_text = cfg.render();

    let (mut model, start_epoch, mut best_mrr, mut best_epoch) = match resume {
        Some(path) => {
            let (model, extra) = Model64::load(path).with_context(|| format!("loading {}", path.display()))?;
            if model.meta.num_base_relations != data.num_base_relations() {
                return Err(UsageError(format!(
                    "checkpoint has {} relations, dataset has {}",
                    model.meta.num_base_relations,
                    data.num_base_relations()
                ))
                .into());
            }
            let epoch = extra.get("epoch").and_then(Value::as_u64).unwrap_or(0) as usize;
            let best = extra.get("best_mrr").and_then(Value::as_f64).unwrap_or(f64::NEG_INFINITY);
            let best_epoch = extra.get("best_epoch").and_then(Value::as_u64).map(|e| e as usize);
            (model, epoch, best, best_epoch)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
            let model = Model64::new(
                cfg.model.clone(),
                data.num_base_relations(),
                data.train_graph.mean_log_degree(),
                &mut rng,
            )?;
            (model, 0, f64::NEG_INFINITY, None)
        }
    };

    let budget = cfg.train.budget(model.config().steps)?;
    let known = data.train_filter();
    let train_provider = PriorityProvider::new(model.priority_kind(), &data.train_graph);
    let valid = capped(&data.valid, cfg.max_eval_triplets);
    let epochs = cfg.train.epochs;

    for epoch in start_epoch..epochs {
        let mut rng = epoch_rng(cfg.train.seed, epoch);
        let rep = train_epoch(
            &mut model,
            &data.train_graph,
            &data.train,
            &known,
            &cfg.train,
            &train_provider,
            &mut rng,
        )?;
        let line = format!(
            "epoch={} split=train loss={:.6} positive={:.6} negative={:.6} grad_norm={:.6} batches={} messages={:.2} seconds={:.3}",
            epoch + 1,
            rep.loss,
            rep.positive,
            rep.negative,
            rep.grad_norm,
            rep.batches,
            rep.mean_messages,
            rep.wall_seconds
        );
        log.line(&line)?;
        eprintln!("{line}");

        if (epoch + 1) % cfg.valid_every == 0 || epoch + 1 == epochs {
            let ev = evaluate(
                &model,
                &data.train_graph,
                valid,
                Some(&data.valid_filter),
                budget,
                &train_provider,
            )?;
            let r = &ev.report;
            let line = format!(
                "epoch={} split=valid mrr={:.6} hits1={:.6} hits3={:.6} hits10={:.6} count={} messages={:.2} seconds={:.3}",
                epoch + 1,
                r.mrr,
                r.hits1,
                r.hits3,
                r.hits10,
                r.count,
                count_messages(&ev.stats),
                ev.wall_seconds
            );
            log.line(&line)?;
            log.steps(&format!("epoch={} split=valid", epoch + 1), &ev.stats)?;
            eprintln!("{line}");
            if r.mrr > best_mrr || best_epoch.is_none() {
                best_mrr = r.mrr;
                best_epoch = Some(epoch + 1);
                model.save(
                    &out.join("best.ckpt"),
                    json!({"epoch": epoch + 1, "best_mrr": best_mrr, "best_epoch": epoch + 1, "config": config_text}),
                )?;
            }
        }
        model.save(
            &out.join("last.ckpt"),
            json!({"epoch": epoch + 1, "best_mrr": best_mrr, "best_epoch": best_epoch, "config": config_text}),
        )?;
    }

    let best_path = out.join("best.ckpt");
    let final_model = if best_path.is_file() {
        Model64::load(&best_path)?.0
    } else {
        model
    };
    let test_provider = PriorityProvider::new(final_model.priority_kind(), &data.test.graph);
    let test = evaluate(
        &final_model,
        &data.test.graph,
        capped(&data.test.queries, cfg.max_eval_triplets),
        Some(&data.test.filter),
        budget,
        &test_provider,
    )?;
    let r = &test.report;
    log.line(&format!(
        "split=test mrr={:.6} hits1={:.6} hits3={:.6} hits10={:.6} count={} messages={:.2} seconds={:.3}",
        r.mrr,
        r.hits1,
        r.hits3,
        r.hits10,
        r.count,
        count_messages(&test.stats),
        test.wall_seconds
    ))?;
    log.steps("split=test", &test.stats)?;

    let summary = json!({
        "epochs": epochs,
        "best_epoch": best_epoch,
        "best_valid_mrr": if best_mrr.is_finite() { json!(best_mrr) } else { Value::Null },
        "test": report_json(r),
        "test_messages_per_step": count_messages(&test.stats),
        "test_graph_edges": data.test.graph.num_edges(),
        "alpha": budget.alpha,
        "beta": budget.beta,
        "steps": budget.steps,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    fs::write(out.join("summary.json"), &text)?;
    println!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn budget_for(cfg: &RunConfig, model: &Model64) -> anyhow::Result<BudgetConfig> {
    Ok(cfg.train.budget(model.config().steps)?)
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path, split: SplitArg, filtered: bool) -> anyhow::Result<ExitCode> {
    let (model, extra) = Model64::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let cfg = with_checkpoint_dataset(cfg, &extra);
    let data = load_bundle(&cfg)?;
    let budget = budget_for(&cfg, &model)?;
    let (graph, triplets, filter) = match split {
        SplitArg::Test => (&data.test.graph, &data.test.queries, &data.test.filter),
        SplitArg::Valid => (&data.train_graph, &data.valid, &data.valid_filter),
        SplitArg::Train => return Err(UsageError("eval supports --split valid or test".into()).into()),
    };
    let provider = PriorityProvider::new(model.priority_kind(), graph);
    let ev = evaluate(
        &model,
        graph,
        capped(triplets, cfg.max_eval_triplets),
        filtered.then_some(filter),
        budget,
        &provider,
    )?;
    let name = if split == SplitArg::Test { "test" } else { "valid" };
    let mut doc = report_json(&ev.report);
    doc["split"] = json!(name);
    doc["filtered"] = json!(filtered);
    doc["messages_per_step"] = json!(count_messages(&ev.stats));
    doc["alpha"] = json!(budget.alpha);
    doc["beta"] = json!(budget.beta);
    println!("{}", serde_json::to_string_pretty(&doc)?);

    let mut log = MetricsLog::open(&cfg.out)?;
    let r = &ev.report;
    log.line(&format!(
        "eval split={name} filtered={filtered} mrr={:.6} hits1={:.6} hits3={:.6} hits10={:.6} count={} messages={:.2}",
        r.mrr,
        r.hits1,
        r.hits3,
        r.hits10,
        r.count,
        count_messages(&ev.stats)
    ))?;
    log.steps(&format!("eval split={name}"), &ev.stats)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_relation(name: &str, relations: &Vocab) -> anyhow::Result<usize> {
    let (base, inverse) = match name.strip_suffix("^-1") {
        Some(b) => (b, true),
        None => (name, false),
    };
    let id = relations
        .get(base)
        .ok_or_else(|| UsageError(format!("unknown relation `{base}`")))?;
    Ok(if inverse { id + relations.len() } else { id })
}

fn lookup(entities: &Vocab, name: &str) -> anyhow::Result<usize> {
    entities
        .get(name)
        .ok_or_else(|| UsageError(format!("unknown entity `{name}`")).into())
}

#[allow(clippy::too_many_arguments)]
pub fn explain(
    cfg: &RunConfig,
    checkpoint: &Path,
    head: &str,
    relation: &str,
    answer: &str,
    beam: usize,
    graph_choice: SplitArg,
    dot: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    let (model, extra) = Model64::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let cfg = with_checkpoint_dataset(cfg, &extra);
    let data = load_bundle(&cfg)?;
    let budget = budget_for(&cfg, &model)?;
    let (graph, entities): (&KnowledgeGraph, &Vocab) = match graph_choice {
        SplitArg::Test => (&data.test.graph, &data.test.entities),
        _ => (&data.train_graph, &data.entities),
    };
    let source = lookup(entities, head)?;
    let target = lookup(entities, answer)?;
    let rel = parse_relation(relation, &data.relations)?;
    if beam == 0 {
        return Err(UsageError("--beam must be positive".into()).into());
    }
    let provider = PriorityProvider::new(model.priority_kind(), graph);
    let fixed = provider.scores(graph, source)?;
    let priority = match &fixed {
        Some(s) => PrioritySource::Static(s),
        None => PrioritySource::Learned,
    };
    let (score, paths) = explain_query(&model, graph, source, rel, target, budget, priority, beam)?;
    println!("# query ({head}, {relation}, {answer}) score={score:.6} paths={}", paths.len());
    print!("{}", render_text(&paths, graph, entities, &data.relations));
    if let Some(path) = dot {
        fs::write(path, render_dot(&paths, graph, entities, &data.relations))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Rough size of the activations a training tape keeps for one query, in bytes.
fn tape_bytes_estimate(stats: &PropagationStats, num_nodes: usize, dim: usize) -> f64 {
    let per_step: usize = stats
        .nodes_per_step
        .iter()
        .zip(&stats.messages_per_step)
        .map(|(&n, &m)| num_nodes + 3 * n + 4 * m)
        .sum();
    (per_step * dim * std::mem::size_of::<f64>()) as f64
}

pub fn bench(cfg: &RunConfig, checkpoint: Option<&Path>, time_training: bool) -> anyhow::Result<ExitCode> {
    let (model, cfg) = match checkpoint {
        Some(path) => {
            let (model, extra) = Model64::load(path).with_context(|| format!("loading {}", path.display()))?;
            (model, with_checkpoint_dataset(cfg, &extra))
        }
        None => {
            let data = load_bundle(cfg)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
            let model = Model64::new(
                cfg.model.clone(),
                data.num_base_relations(),
                data.train_graph.mean_log_degree(),
                &mut rng,
            )?;
            (model, cfg.clone())
        }
    };
    let data = load_bundle(&cfg)?;
    let graph = &data.test.graph;
    let provider = PriorityProvider::new(model.priority_kind(), graph);
    let queries: Vec<&Triplet> = data.test.queries.iter().take(cfg.bench_queries).collect();
    let steps = model.config().steps;
    let mut alphas = cfg.bench_alphas.clone();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();

    let mut rows = Vec::new();
    println!("alpha\tmessages/step\tfull/step\tms/query\ttape_mb");
    for &alpha in &alphas {
        let budget = BudgetConfig::new(alpha, cfg.train.beta, steps)?;
        let start = Instant::now();
        let mut stats = Vec::with_capacity(queries.len());
        let mut peak = 0.0f64;
        for q in &queries {
            let fixed = provider.scores(graph, q.head)?;
            let priority = match &fixed {
                Some(s) => PrioritySource::Static(s),
                None => PrioritySource::Learned,
            };
            let pred = model.predict(graph, q.head, q.relation, Selection::Budget(budget), priority, None)?;
            peak = peak.max(tape_bytes_estimate(&pred.stats, graph.num_entities(), model.config().dim));
            stats.push(pred.stats);
        }
        let ms = start.elapsed().as_secs_f64() * 1e3 / queries.len().max(1) as f64;
        let messages = count_messages(&stats);
        let mut row = json!({
            "alpha": alpha,
            "beta": cfg.train.beta,
            "messages_per_step": messages,
            "full_messages_per_step": graph.num_edges(),
            "ms_per_query": ms,
            "tape_bytes_estimate": peak,
            "queries": queries.len(),
        });
        if time_training {
            let mut trained = model.clone();
            let mut train_cfg = cfg.train.clone();
            train_cfg.alpha = alpha;
            let known = data.train_filter();
            let train_provider = PriorityProvider::new(model.priority_kind(), &data.train_graph);
            let mut rng = epoch_rng(cfg.train.seed, 0);
            let rep = train_epoch(
                &mut trained,
                &data.train_graph,
                &data.train,
                &known,
                &train_cfg,
                &train_provider,
                &mut rng,
            )?;
            row["train_epoch_seconds"] = json!(rep.wall_seconds);
            row["train_messages_per_step"] = json!(rep.mean_messages);
        }
        println!(
            "{alpha}\t{messages:.1}\t{}\t{ms:.3}\t{:.3}",
            graph.num_edges(),
            peak / (1024.0 * 1024.0)
        );
        rows.push(row);
    }
    fs::create_dir_all(&cfg.out)?;
    let out: PathBuf = cfg.out.join("bench.json");
    fs::write(&out, serde_json::to_string_pretty(&Value::Array(rows))?)?;
    Ok(ExitCode::SUCCESS)
}

pub fn oracle_check(seed: u64, trials: usize, fault: Option<FaultArg>) -> anyhow::Result<ExitCode> {
    let fault = fault.map(|f| match f {
        FaultArg::ShiftedBoundary => Fault::ShiftedBoundary,
    });
    let report = run_oracle_suite(seed, trials, fault)?;
    println!(
        "oracle-check seed={} trials={} passed={} failed={}",
        report.seed, report.trials, report.passed, report.failed
    );
    for f in report.failures.iter().take(10) {
        println!("  {f}");
    }
    Ok(if report.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
