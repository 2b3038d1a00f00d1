//! Runs a manifest through the model pipeline or a baseline and scores the results.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, Conversation, Meter, PriceTable, Usage};
use crate::harness::{
    run_column_type_task, run_join_task, run_table_class_task, run_table_pipeline, HarnessError,
    JoinPrediction, PipelineConfig, Task, UNKNOWN,
};
use crate::ontology::{normalize_label, strip_decorations, Ontology, TermKind};
use crate::table::{SamplingStrategy, Table};

use super::baselines::{jaccard_join, join_match, levenshtein_join};
use super::manifest::{Gold, LabeledExample, Manifest, ManifestError, Payload};
use super::metrics::{pair_metrics, per_class_stats_opt, weighted_metrics, MetricsError, WeightedMetrics};

/// What produces predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    /// The prompt pipeline over a chat backend.
    Llm,
    Jaccard,
    Levenshtein,
}

impl System {
    pub fn supports(self, task: Task) -> bool {
        self == System::Llm || task == Task::Join
    }
}

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("the llm system needs a backend")]
    MissingBackend,
    #[error("example {id}: {system:?} does not support {task}")]
    UnsupportedTask { id: String, system: System, task: Task },
    #[error("{path}: {reason}")]
    Table { path: String, reason: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Harness(HarnessError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl From<HarnessError> for BenchmarkError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Backend(b) => BenchmarkError::Backend(b),
            other => BenchmarkError::Harness(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub pipeline: PipelineConfig,
    /// Upper bound on concurrently evaluated examples.
    pub jobs: usize,
    pub prices: PriceTable,
    pub allowed_classes: Option<Vec<String>>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            jobs: 4,
            prices: PriceTable::default(),
            allowed_classes: None,
        }
    }
}

/// Predicted or gold labels of one example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Labels {
    Single(Option<String>),
    Pairs(Vec<(String, String)>),
    PerColumn(Vec<Option<String>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemResult {
    pub id: String,
    pub task: Task,
    pub prediction: Labels,
    pub gold: Labels,
    /// One bit per scored unit: the item, each column, or each distinct predicted pair.
    pub correct: Vec<bool>,
    pub anchored: bool,
    pub attempts: u32,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub metrics: WeightedMetrics,
    pub items: usize,
    /// Gold units: items, columns or gold pairs.
    pub units: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub temperature: f64,
    pub max_tokens: u32,
    pub sample_rows: usize,
    pub sampling_seed: Option<u64>,
    pub demonstration: bool,
    pub metadata: bool,
    pub prefix: bool,
    pub anchoring: bool,
    pub max_anchor_attempts: u32,
    pub context_flow: bool,
    pub jobs: usize,
    /// Scoring unit of join examples.
    pub join_instance_unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// A task name, or `mixed`.
    pub task: String,
    pub system: System,
    pub metrics: WeightedMetrics,
    pub per_task: BTreeMap<Task, TaskMetrics>,
    pub items: usize,
    /// Items per second.
    pub throughput: f64,
    pub wall_time_secs: f64,
    pub total_cost: f64,
    /// Token counts were estimated rather than reported by the provider.
    pub cost_approximate: bool,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub settings: ReportSettings,
    pub per_item: Vec<ItemResult>,
}

fn unit_count(item: &ItemResult) -> u64 {
    match &item.gold {
        Labels::Single(_) => 1,
        Labels::Pairs(p) => p.len() as u64,
        Labels::PerColumn(c) => c.len() as u64,
    }
}

fn class_units(item: &ItemResult) -> Result<Vec<(Option<String>, String)>, MetricsError> {
    let mismatch = |p: usize, g: usize| MetricsError::LengthMismatch {
        predictions: p,
        golds: g,
    };
    match (&item.prediction, &item.gold) {
        (Labels::Single(p), Labels::Single(Some(g))) => Ok(vec![(p.clone(), g.clone())]),
        (Labels::PerColumn(p), Labels::PerColumn(g)) if p.len() == g.len() => Ok(p
            .iter()
            .cloned()
            .zip(g.iter().map(|g| g.clone().unwrap_or_default()))
            .collect()),
        (Labels::PerColumn(p), Labels::PerColumn(g)) => Err(mismatch(p.len(), g.len())),
        _ => Err(mismatch(0, 1)),
    }
}

/// Scores per-item results: support-weighted multiclass metrics for class and column
/// tasks, pair precision and recall for joins. Across tasks, metrics are averaged with
/// weights equal to each task's gold units.
pub fn aggregate(
    per_item: &[ItemResult],
) -> Result<(WeightedMetrics, BTreeMap<Task, TaskMetrics>), MetricsError> {
    let mut by_task: BTreeMap<Task, Vec<&ItemResult>> = BTreeMap::new();
    for item in per_item {
        by_task.entry(item.task).or_default().push(item);
    }
    let mut per_task = BTreeMap::new();
    for (task, items) in &by_task {
        let units: u64 = items.iter().map(|i| unit_count(i)).sum();
        let metrics = match task {
            Task::Join => {
                let correct = items.iter().flat_map(|i| &i.correct).filter(|c| **c).count();
                let predicted: usize = items.iter().map(|i| i.correct.len()).sum();
                pair_metrics(correct as u64, predicted as u64, units)
            }
            _ => {
                let mut preds = Vec::new();
                let mut golds = Vec::new();
                for item in items {
                    for (p, g) in class_units(item)? {
                        preds.push(p);
                        golds.push(g);
                    }
                }
                weighted_metrics(&per_class_stats_opt(&preds, &golds)?)?
            }
        };
        per_task.insert(
            *task,
            TaskMetrics {
                metrics,
                items: items.len(),
                units,
            },
        );
    }
    let total: u64 = per_task.values().map(|t| t.units).sum();
    if total == 0 {
        return Err(MetricsError::EmptyStats);
    }
    let overall = if per_task.len() == 1 {
        per_task.values().next().expect("one task").metrics
    } else {
        let w = |f: fn(&WeightedMetrics) -> f64| {
            per_task.values().map(|t| t.units as f64 * f(&t.metrics)).sum::<f64>() / total as f64
        };
        WeightedMetrics {
            precision: w(|m| m.precision),
            recall: w(|m| m.recall),
            f1: w(|m| m.f1),
        }
    };
    Ok((overall, per_task))
}

fn load_table(path: &Path, headers: bool) -> Result<Table, BenchmarkError> {
    let err = |reason: String| BenchmarkError::Table {
        path: path.display().to_string(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    Table::from_csv_str(name, &text, headers).map_err(|e| err(e.to_string()))
}

fn canonical(raw: &str, kind: TermKind, ontology: &Ontology) -> String {
    if kind == TermKind::Property && strip_decorations(raw).eq_ignore_ascii_case(UNKNOWN) {
        return UNKNOWN.to_owned();
    }
    match normalize_label(raw, ontology) {
        Ok(c) => ontology
            .lookup(kind, &c)
            .map(|t| t.local_name().to_owned())
            .unwrap_or(c),
        Err(_) => raw.to_owned(),
    }
}

/// Errors that make one example wrong rather than stopping the run.
fn item_level(e: &HarnessError) -> bool {
    matches!(
        e,
        HarnessError::TaskFailed { .. } | HarnessError::Prompt(_) | HarnessError::MissingHeaders(_)
    )
}

struct Scored {
    result: ItemResult,
    usage: Usage,
}

struct Runner<'a> {
    system: System,
    backend: Option<&'a dyn ChatBackend>,
    ontology: &'a Ontology,
    config: &'a BenchmarkConfig,
}

impl Runner<'_> {
    fn backend(&self) -> Result<&dyn ChatBackend, BenchmarkError> {
        self.backend.ok_or(BenchmarkError::MissingBackend)
    }

    fn run(&self, ex: &LabeledExample) -> Result<Scored, BenchmarkError> {
        let mut result = ItemResult {
            id: ex.id.clone(),
            task: ex.task,
            prediction: Labels::Single(None),
            gold: Labels::Single(None),
            correct: Vec::new(),
            anchored: false,
            attempts: 0,
            error: None,
        };
        let mut usage = Usage::default();
        let cfg = &self.config.pipeline;
        match (&ex.payload, &ex.gold) {
            (Payload::Table(path), Gold::Class(gold)) => {
                let table = load_table(path, ex.headers)?;
                let gold = canonical(gold, TermKind::Class, self.ontology);
                let mut conv = Conversation::new();
                let allowed = self.config.allowed_classes.as_deref();
                let prediction = match run_table_class_task(&mut conv, &table, self.ontology, self.backend()?, cfg, allowed) {
                    Ok((r, u)) => {
                        usage = u;
                        result.anchored = r.anchored;
                        result.attempts = r.attempts;
                        Some(r.term.local_name().to_owned())
                    }
                    Err(e) if item_level(&e) => {
                        result.error = Some(e.to_string());
                        None
                    }
                    Err(e) => return Err(e.into()),
                };
                result.correct = vec![prediction.as_deref() == Some(gold.as_str())];
                result.prediction = Labels::Single(prediction);
                result.gold = Labels::Single(Some(gold));
            }
            (Payload::Table(path), Gold::Columns(gold)) => {
                let table = load_table(path, ex.headers)?;
                if gold.len() != table.arity() {
                    return Err(ManifestError {
                        line: ex.line,
                        reason: format!("gold has {} labels, table has {} columns", gold.len(), table.arity()),
                    }
                    .into());
                }
                let gold: Vec<String> =
                    gold.iter().map(|g| canonical(g, TermKind::Property, self.ontology)).collect();
                let backend = self.backend()?;
                let outcome = if cfg.context_flow {
                    let allowed = self.config.allowed_classes.as_deref();
                    run_table_pipeline(&table, self.ontology, backend, cfg, allowed)
                        .map(|o| (o.column_types, o.usage))
                } else {
                    run_column_type_task(&mut Conversation::new(), &table, self.ontology, backend, cfg)
                };
                let prediction: Vec<Option<String>> = match outcome {
                    Ok((r, u)) => {
                        usage = u;
                        result.anchored = r.anchored;
                        result.attempts = r.attempts;
                        r.assignments.iter().map(|a| Some(a.label().to_owned())).collect()
                    }
                    Err(e) if item_level(&e) => {
                        result.error = Some(e.to_string());
                        vec![None; gold.len()]
                    }
                    Err(e) => return Err(e.into()),
                };
                result.correct = prediction
                    .iter()
                    .zip(&gold)
                    .map(|(p, g)| p.as_deref() == Some(g.as_str()))
                    .collect();
                result.prediction = Labels::PerColumn(prediction);
                result.gold = Labels::PerColumn(gold.into_iter().map(Some).collect());
            }
            (Payload::Pair { left, right }, Gold::Pairs(gold)) => {
                let (l, r) = (load_table(left, ex.headers)?, load_table(right, ex.headers)?);
                let predicted: Result<JoinPrediction, String> = match self.system {
                    System::Llm => match run_join_task(&l, &r, self.backend()?, cfg, None) {
                        Ok(o) => {
                            usage = o.usage;
                            result.attempts = o.attempts;
                            Ok(o.prediction)
                        }
                        Err(e) if item_level(&e) => Err(e.to_string()),
                        Err(e) => return Err(e.into()),
                    },
                    System::Jaccard => jaccard_join(&l, &r).map_err(|e| e.to_string()),
                    System::Levenshtein => levenshtein_join(&l, &r).map_err(|e| e.to_string()),
                };
                let pairs = match predicted {
                    Ok(p) => {
                        result.correct = join_match(&p, gold);
                        let mut seen = std::collections::HashSet::new();
                        p.pairs()
                            .filter(|x| seen.insert(*x))
                            .map(|(a, b)| (a.to_owned(), b.to_owned()))
                            .collect()
                    }
                    Err(e) => {
                        result.error = Some(e);
                        Vec::new()
                    }
                };
                result.prediction = Labels::Pairs(pairs);
                result.gold = Labels::Pairs(gold.clone());
            }
            _ => unreachable!("manifest parsing ties payload and gold to the task"),
        }
        Ok(Scored { result, usage })
    }
}

/// Evaluates every example of `manifest`. Examples run concurrently up to `config.jobs`,
/// except over a backend that replays in order. Example-level failures are recorded as
/// incorrect predictions; backend failures abort the run.
pub fn run_benchmark(
    manifest: &Manifest,
    system: System,
    backend: Option<&dyn ChatBackend>,
    ontology: &Ontology,
    config: &BenchmarkConfig,
) -> Result<Report, BenchmarkError> {
    if system == System::Llm && backend.is_none() {
        return Err(BenchmarkError::MissingBackend);
    }
    if let Some(ex) = manifest.examples.iter().find(|e| !system.supports(e.task)) {
        return Err(BenchmarkError::UnsupportedTask {
            id: ex.id.clone(),
            system,
            task: ex.task,
        });
    }
    config.pipeline.validate().map_err(BenchmarkError::Harness)?;
    let backend = backend.filter(|_| system == System::Llm);
    let runner = Runner {
        system,
        backend,
        ontology,
        config,
    };
    let replay = backend.is_some_and(|b| b.replays_in_order());
    let n = manifest.examples.len();
    let jobs = if replay { 1 } else { config.jobs.clamp(1, n.max(1)) };

    let started = Instant::now();
    let slots: Mutex<Vec<Option<Result<Scored, BenchmarkError>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n || abort.load(Ordering::SeqCst) {
                    break;
                }
                let r = runner.run(&manifest.examples[i]);
                if r.is_err() {
                    abort.store(true, Ordering::SeqCst);
                }
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    let elapsed = started.elapsed();

    let mut meter = Meter::new(if backend.is_some() { config.prices } else { PriceTable::FREE });
    let mut per_item = Vec::with_capacity(n);
    for slot in slots.into_inner().unwrap_or_else(|e| e.into_inner()) {
        match slot {
            Some(Ok(scored)) => {
                meter.add(&scored.usage);
                per_item.push(scored.result);
            }
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    let (metrics, per_task) = aggregate(&per_item)?;
    let costs = meter.report();
    // Replayed latencies are simulated, which keeps scripted reports reproducible.
    let wall = if replay {
        costs.wall_time_secs
    } else {
        elapsed.as_secs_f64()
    };
    let tasks: Vec<Task> = per_task.keys().copied().collect();
    let pc = &config.pipeline.prompt_config;
    Ok(Report {
        task: match tasks.as_slice() {
            [one] => one.as_str().to_owned(),
            _ => "mixed".to_owned(),
        },
        system,
        metrics,
        per_task,
        items: per_item.len(),
        throughput: if wall > 0.0 { per_item.len() as f64 / wall } else { 0.0 },
        wall_time_secs: wall,
        total_cost: costs.total_cost,
        cost_approximate: costs.approximate,
        prompt_tokens: meter.totals().prompt_tokens,
        completion_tokens: meter.totals().completion_tokens,
        settings: ReportSettings {
            temperature: config.pipeline.params.temperature,
            max_tokens: config.pipeline.params.max_tokens,
            sample_rows: pc.sample_k,
            sampling_seed: match pc.strategy {
                SamplingStrategy::Head => None,
                SamplingStrategy::SeededRandom { seed } => Some(seed),
            },
            demonstration: pc.include_demonstration,
            metadata: pc.include_metadata,
            prefix: pc.include_prefix,
            anchoring: config.pipeline.anchoring_enabled,
            max_anchor_attempts: config.pipeline.max_anchor_attempts,
            context_flow: config.pipeline.context_flow,
            jobs,
            join_instance_unit: "column-pair".to_owned(),
        },
        per_item,
    })
}
