//! The `datadisc` command line. Results go to stdout as TSV, diagnostics to stderr.
//!
//! Exit codes: 0 on success, 1 on usage, configuration or input errors, 2 when the model
//! could not produce a valid answer or the backend failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::backend::{
    load_transcript, ChatBackend, Conversation, GenerationParams, HttpBackend, HttpConfig, PriceTable,
};
use crate::eval::{
    jaccard_join, levenshtein_join, load_manifest, run_benchmark, BenchmarkConfig, BenchmarkError,
    System,
};
use crate::harness::{
    run_column_type_task, run_join_task, run_table_class_task, ColumnAssignment, HarnessError,
    JoinPrediction, PipelineConfig, UNKNOWN,
};
use crate::ontology::{load_ontology, Ontology, OntologyFormat};
use crate::prompt::{assemble, column_type_prompt, join_prompt, table_class_prompt, PromptConfig};
use crate::table::{SamplingStrategy, Table};

#[derive(Debug, Parser)]
#[command(name = "datadisc", version, about = "Annotate CSV tables and predict join columns with a chat model")]
pub struct Cli {
    #[command(flatten)]
    pub config: CliConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CliConfig {
    /// `scripted:<transcript.jsonl>` or `http:<chat-completions url>`; `http:` alone uses
    /// the configured default endpoint. Credentials come from the environment.
    #[arg(long, global = true, value_name = "SPEC")]
    pub backend: Option<String>,
    /// Ontology file with one `C<TAB>iri` or `P<TAB>iri` per line.
    #[arg(long, global = true, value_name = "PATH")]
    pub ontology: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub sample_rows: u64,
    #[arg(long, global = true, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long, global = true, default_value_t = 256)]
    pub max_tokens: u32,
    /// Sample rows with this seed instead of taking the first rows.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub no_demonstration: bool,
    #[arg(long, global = true)]
    pub no_metadata: bool,
    #[arg(long, global = true)]
    pub no_prefix: bool,
    #[arg(long, global = true)]
    pub no_anchoring: bool,
    /// Run each task in its own conversation.
    #[arg(long, global = true)]
    pub no_context_flow: bool,
    #[arg(long, global = true, default_value_t = 3)]
    pub max_anchor_attempts: u32,
    /// Where `eval` writes its JSON report.
    #[arg(long, global = true, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Treat the first CSV line as the header row.
    #[arg(long, global = true)]
    pub headers: bool,
    /// Print the assembled prompt and exit without contacting a backend.
    #[arg(long, global = true)]
    pub dump_prompt: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print `IRI<TAB>anchored<TAB>attempts` for the table's class.
    ClassifyTable {
        csv: PathBuf,
        /// File listing the permitted classes, one per line.
        #[arg(long, value_name = "PATH")]
        allowed_classes: Option<PathBuf>,
    },
    /// Print `index<TAB>label` for each column.
    AnnotateColumns { csv: PathBuf },
    /// Print `left_cols<TAB>right_cols` for the predicted join.
    PredictJoin {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, value_enum, default_value_t = Baseline::None)]
        baseline: Baseline,
        /// Extra notes shown to the model above the two tables.
        #[arg(long)]
        context: Option<String>,
    },
    /// Score a JSON-lines manifest and print `P=.. R=.. F1=.. items=.. cost=..`.
    Eval {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = SystemArg::Llm)]
        system: SystemArg,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    None,
    Jaccard,
    Levenshtein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Llm,
    Jaccard,
    Levenshtein,
}

impl From<SystemArg> for System {
    fn from(s: SystemArg) -> Self {
        match s {
            SystemArg::Llm => System::Llm,
            SystemArg::Jaccard => System::Jaccard,
            SystemArg::Levenshtein => System::Levenshtein,
        }
    }
}

#[derive(Debug)]
enum Failure {
    /// Exit 1.
    Usage(String),
    /// Exit 2.
    Task(String),
    /// The reader went away; exit quietly with 0.
    Closed,
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Task(_) => 2,
            Failure::Closed => 0,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Task(m) => m,
            Failure::Closed => "",
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Prompt(_) | HarnessError::MissingHeaders(_) | HarnessError::Config(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Task(e.to_string()),
        }
    }
}

impl From<BenchmarkError> for Failure {
    fn from(e: BenchmarkError) -> Self {
        match e {
            BenchmarkError::Backend(_) => Failure::Task(e.to_string()),
            BenchmarkError::Harness(h) => h.into(),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

impl CliConfig {
    fn pipeline(&self) -> Result<PipelineConfig, Failure> {
        let config = PipelineConfig {
            anchoring_enabled: !self.no_anchoring,
            max_anchor_attempts: self.max_anchor_attempts,
            context_flow: !self.no_context_flow,
            prompt_config: PromptConfig {
                sample_k: self.sample_rows as usize,
                include_demonstration: !self.no_demonstration,
                include_metadata: !self.no_metadata,
                include_prefix: !self.no_prefix,
                strategy: match self.seed {
                    Some(seed) => SamplingStrategy::SeededRandom { seed },
                    None => SamplingStrategy::Head,
                },
                ..PromptConfig::default()
            },
            params: GenerationParams::new(self.temperature, self.max_tokens).map_err(usage)?,
        };
        config.validate().map_err(usage)?;
        Ok(config)
    }

    fn table(&self, path: &Path) -> Result<Table, Failure> {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
        Table::from_csv_str(name, &read(path)?, self.headers)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }

    fn ontology(&self) -> Result<Ontology, Failure> {
        let path = self
            .ontology
            .as_deref()
            .ok_or_else(|| usage("--ontology is required for this command"))?;
        load_ontology(&read(path)?, OntologyFormat::TabSeparatedKindIri)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }

    fn backend(&self) -> Result<Box<dyn ChatBackend>, Failure> {
        let spec = self
            .backend
            .as_deref()
            .ok_or_else(|| usage("--backend is required for this command"))?;
        if let Some(path) = spec.strip_prefix("scripted:") {
            let path = Path::new(path);
            let backend = load_transcript(&read(path)?)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Ok(Box::new(backend))
        } else if let Some(rest) = spec.strip_prefix("http:") {
            // `http:<url>`, where a bare `http://..` spec is itself the url.
            let url = if rest.starts_with("//") { spec } else { rest };
            let url = Some(url).filter(|u| !u.is_empty());
            Ok(Box::new(HttpBackend::new(HttpConfig::from_env(url).map_err(usage)?)))
        } else {
            Err(usage(format!(
                "unknown backend {spec:?}; expected scripted:<path> or http:<url>"
            )))
        }
    }
}

fn allowed_classes(path: Option<&Path>) -> Result<Option<Vec<String>>, Failure> {
    let Some(path) = path else { return Ok(None) };
    let classes: Vec<String> = read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect();
    if classes.is_empty() {
        return Err(Failure::Usage(format!("{}: no classes listed", path.display())));
    }
    Ok(Some(classes))
}

fn join_line(p: &JoinPrediction) -> String {
    format!("{}\t{}", p.left_cols().join(","), p.right_cols().join(","))
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let cfg = &cli.config;
    let pipeline = cfg.pipeline()?;
    let pc = &pipeline.prompt_config;
    let io = |e: std::io::Error| match e.kind() {
        std::io::ErrorKind::BrokenPipe => Failure::Closed,
        _ => Failure::Usage(e.to_string()),
    };
    match &cli.command {
        Command::ClassifyTable { csv, allowed_classes: list } => {
            let table = cfg.table(csv)?;
            let allowed = allowed_classes(list.as_deref())?;
            if cfg.dump_prompt {
                let prompt = table_class_prompt(&table, allowed.as_deref(), pc).map_err(usage)?;
                return writeln!(out, "{}", assemble(&prompt)).map_err(io);
            }
            let ontology = cfg.ontology()?;
            let backend = cfg.backend()?;
            let mut conv = Conversation::new();
            let (result, _) = run_table_class_task(
                &mut conv,
                &table,
                &ontology,
                backend.as_ref(),
                &pipeline,
                allowed.as_deref(),
            )?;
            writeln!(out, "{}\t{}\t{}", result.term.iri(), result.anchored, result.attempts).map_err(io)
        }
        Command::AnnotateColumns { csv } => {
            let table = cfg.table(csv)?;
            if cfg.dump_prompt {
                let prompt = column_type_prompt(&table, pc).map_err(usage)?;
                return writeln!(out, "{}", assemble(&prompt)).map_err(io);
            }
            let ontology = cfg.ontology()?;
            let backend = cfg.backend()?;
            let (result, _) =
                run_column_type_task(&mut Conversation::new(), &table, &ontology, backend.as_ref(), &pipeline)?;
            for (i, a) in result.assignments.iter().enumerate() {
                let label = match a {
                    ColumnAssignment::Term(t) => ontology.compact(t),
                    ColumnAssignment::Unknown => UNKNOWN.to_owned(),
                };
                writeln!(out, "{i}\t{label}").map_err(io)?;
            }
            Ok(())
        }
        Command::PredictJoin {
            left,
            right,
            baseline,
            context,
        } => {
            let (l, r) = (cfg.table(left)?, cfg.table(right)?);
            let prediction = match baseline {
                Baseline::Jaccard => jaccard_join(&l, &r).map_err(usage)?,
                Baseline::Levenshtein => levenshtein_join(&l, &r).map_err(usage)?,
                Baseline::None if cfg.dump_prompt => {
                    let notes = context.as_deref().filter(|_| pipeline.context_flow);
                    let prompt = join_prompt(&l, &r, pc, notes).map_err(usage)?;
                    return writeln!(out, "{}", assemble(&prompt)).map_err(io);
                }
                Baseline::None => {
                    let backend = cfg.backend()?;
                    run_join_task(&l, &r, backend.as_ref(), &pipeline, context.as_deref())?.prediction
                }
            };
            writeln!(out, "{}", join_line(&prediction)).map_err(io)
        }
        Command::Eval {
            manifest,
            system,
            jobs,
        } => {
            if cfg.dump_prompt {
                return Err(usage("--dump-prompt does not apply to eval"));
            }
            let manifest = load_manifest(manifest).map_err(usage)?;
            let system = System::from(*system);
            let (ontology, backend) = match system {
                System::Llm => (cfg.ontology()?, Some(cfg.backend()?)),
                _ => match cfg.ontology {
                    Some(_) => (cfg.ontology()?, None),
                    None => (Ontology::new(), None),
                },
            };
            let config = BenchmarkConfig {
                pipeline,
                jobs: *jobs as usize,
                prices: PriceTable::default(),
                allowed_classes: None,
            };
            let report = run_benchmark(&manifest, system, backend.as_deref(), &ontology, &config)?;
            if let Some(path) = &cfg.report {
                let json = serde_json::to_string_pretty(&report).map_err(usage)?;
                std::fs::write(path, json + "\n")
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            }
            let failed = report.per_item.iter().filter(|i| i.error.is_some()).count();
            if failed > 0 {
                let _ = writeln!(err, "{failed} of {} items failed; see the report for details", report.items);
            }
            let m = report.metrics;
            writeln!(
                out,
                "P={:.3} R={:.3} F1={:.3} items={} cost={:.6}",
                m.precision, m.recall, m.f1, report.items, report.total_cost
            )
            .map_err(io)
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(Failure::Closed) => 0,
        Err(f) => {
            let _ = writeln!(err, "datadisc: {}", f.message());
            f.code()
        }
    }
}
