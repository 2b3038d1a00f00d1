//! Sequential table-class then column-type annotation over one conversation.

use crate::backend::{ChatBackend, Conversation, Usage};
use crate::ontology::{normalize_label, Ontology, OntologyTerm, TermKind, DBPEDIA_ONTOLOGY_IRI};
use crate::prompt::{assemble, column_type_prompt, table_class_prompt};
use crate::table::Table;

use super::anchor::{rewrite_list, substitute_nearest};
use super::check::is_unknown;
use super::{
    anchor, check_column_types, check_table_class, parse_column_list, parse_column_types,
    parse_table_class, repair_text, ColumnList, ColumnTypeResult, HarnessError,
    OriginalParse, ParsedItem, PipelineConfig, TableClassResult, Task, Violation, ViolationKind,
    UNKNOWN,
};

/// Follow-up turn sent once when an answer cannot be parsed at all.
pub const CLARIFICATION: &str = "Answer with only the label.";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub table_class: TableClassResult,
    pub column_types: ColumnTypeResult,
    pub usage: Usage,
    /// The final conversation(s): one when context flows between tasks, two otherwise.
    pub conversations: Vec<Conversation>,
}

type Fixer<'a> = Box<dyn Fn(&str) -> Option<String> + 'a>;
type Evaluator<'a, T> = Box<dyn Fn(&str) -> Result<T, Violation> + 'a>;
type Repairer<'a> = Box<dyn Fn(&str, &Violation) -> Option<String> + 'a>;

struct TaskSpec<'a, T> {
    task: Task,
    evaluate: Evaluator<'a, T>,
    /// Targeted repair of one violation.
    repair: Repairer<'a>,
    /// Nearest-neighbour label substitution only; used when anchoring is off.
    post_process: Fixer<'a>,
    /// Repairs everything it can; used once the attempt budget is spent.
    fallback: Fixer<'a>,
}

struct TaskRun<T> {
    value: T,
    raw: String,
    anchored: bool,
    attempts: u32,
}

fn drive<T>(
    conversation: &mut Conversation,
    prompt: String,
    backend: &dyn ChatBackend,
    config: &PipelineConfig,
    spec: TaskSpec<'_, T>,
    usage: &mut Usage,
) -> Result<TaskRun<T>, HarnessError> {
    conversation.push_user(prompt)?;
    let first = backend.complete(conversation, &config.params)?;
    usage.accumulate(&first.usage);
    conversation.push_assistant(first.text.clone())?;
    let raw = first.text;
    let mut current = raw.clone();
    let (mut attempts, mut anchored, mut clarified) = (1, false, false);
    loop {
        let violation = match (spec.evaluate)(&current) {
            Ok(value) => {
                return Ok(TaskRun {
                    value,
                    raw,
                    anchored,
                    attempts,
                })
            }
            Err(v) => v,
        };
        let failed = |violation| HarnessError::TaskFailed {
            task: spec.task,
            violation,
        };
        if !config.anchoring_enabled {
            // Post-processing leaves the conversation as the model wrote it.
            let value = (spec.post_process)(&current).and_then(|t| (spec.evaluate)(&t).ok());
            return match value {
                Some(value) => Ok(TaskRun {
                    value,
                    raw,
                    anchored: false,
                    attempts,
                }),
                None => Err(failed(violation)),
            };
        }
        let next = if attempts >= config.max_anchor_attempts {
            None
        } else if violation.kind == ViolationKind::UnparsableOutput && !clarified {
            clarified = true;
            // The clarification exchange is not kept; only its answer replaces the bad one.
            let mut scratch = conversation.clone();
            scratch.push_user(CLARIFICATION)?;
            let c = backend.complete(&scratch, &config.params)?;
            usage.accumulate(&c.usage);
            Some(c.text)
        } else {
            (spec.repair)(&current, &violation)
        };
        match next {
            Some(text) => {
                *conversation = anchor(conversation, &text)?;
                anchored = true;
                attempts += 1;
                current = text;
            }
            None => {
                let fixed = (spec.fallback)(&current)
                    .and_then(|t| (spec.evaluate)(&t).ok().map(|v| (t, v)));
                let Some((text, value)) = fixed else {
                    return Err(failed(violation));
                };
                *conversation = anchor(conversation, &text)?;
                return Ok(TaskRun {
                    value,
                    raw,
                    anchored: true,
                    attempts,
                });
            }
        }
    }
}

/// Ontology restricted to the listed classes. Names absent from `ontology` are taken as
/// `dbo:` local names.
fn restrict_classes(ontology: &Ontology, allowed: &[String]) -> Ontology {
    let mut restricted = Ontology::new();
    for (short, iri) in ontology.namespace_prefixes() {
        restricted.register_prefix(short.clone(), iri.clone());
    }
    for name in allowed {
        let Ok(canonical) = normalize_label(name, ontology) else {
            continue;
        };
        let term = ontology
            .lookup(TermKind::Class, &canonical)
            .cloned()
            .or_else(|| OntologyTerm::new(&format!("{DBPEDIA_ONTOLOGY_IRI}{canonical}"), TermKind::Class));
        if let Some(term) = term {
            restricted.insert(term);
        }
    }
    for term in ontology.terms(TermKind::Property) {
        restricted.insert(term.clone());
    }
    restricted
}

/// The parsed class label, or the whole answer when it is a single bare word.
fn best_effort_label(response: &str) -> Option<(ParsedItem, bool)> {
    if let Ok(item) = parse_table_class(response) {
        return Some((item, false));
    }
    let t = response.trim();
    if t.is_empty() || t.contains(char::is_whitespace) {
        return None;
    }
    let start = response.find(t).unwrap_or(0);
    Some((
        ParsedItem {
            text: t.to_owned(),
            span: start..start + t.len(),
        },
        true,
    ))
}

fn nearest_class(response: &str, ontology: &Ontology) -> Option<String> {
    let (item, bare) = best_effort_label(response)?;
    if bare {
        // A bare word would not parse; synthesize the full IRI instead.
        let canonical = normalize_label(&item.text, ontology).unwrap_or_default();
        return ontology
            .nearest_term(TermKind::Class, &canonical)
            .ok()
            .map(|(t, _)| t.iri().to_owned());
    }
    if check_table_class(&item.text, ontology).is_ok() {
        return Some(response.to_owned());
    }
    substitute_nearest(response, &item, TermKind::Class, ontology)
}

/// Runs table-class detection as the next exchange of `conversation`.
pub fn run_table_class_task(
    conversation: &mut Conversation,
    table: &Table,
    ontology: &Ontology,
    backend: &dyn ChatBackend,
    config: &PipelineConfig,
    allowed_classes: Option<&[String]>,
) -> Result<(TableClassResult, Usage), HarnessError> {
    config.validate()?;
    let prompt = assemble(&table_class_prompt(table, allowed_classes, &config.prompt_config)?);
    let restricted;
    let ontology = match allowed_classes {
        Some(list) if !list.is_empty() => {
            restricted = restrict_classes(ontology, list);
            &restricted
        }
        _ => ontology,
    };
    let spec = TaskSpec {
        task: Task::TableClass,
        evaluate: Box::new(|text| {
            parse_table_class(text).and_then(|l| check_table_class(&l.text, ontology))
        }),
        repair: Box::new(|text, v| {
            let label = parse_table_class(text).ok()?;
            repair_text(v, ontology, OriginalParse::TableClass { response: text, label: &label }).ok()
        }),
        post_process: Box::new(|text| nearest_class(text, ontology)),
        fallback: Box::new(|text| nearest_class(text, ontology)),
    };
    let mut usage = Usage::default();
    let run = drive(conversation, prompt, backend, config, spec, &mut usage)?;
    Ok((
        TableClassResult {
            term: run.value,
            raw_response: run.raw,
            anchored: run.anchored,
            attempts: run.attempts,
        },
        usage,
    ))
}

fn item_texts(list: &ColumnList) -> Vec<String> {
    list.items.iter().map(|i| i.text.clone()).collect()
}

/// Substitutes every unknown property in a correctly sized list. Works right to left so
/// earlier spans stay valid.
fn nearest_properties(response: &str, arity: usize, ontology: &Ontology) -> Option<String> {
    let list = parse_column_types(response, arity).ok()?;
    let mut out = response.to_owned();
    for item in list.items.iter().rev() {
        if is_unknown(&item.text) || check_column_types(&[&item.text], ontology).is_ok() {
            continue;
        }
        out = substitute_nearest(&out, item, TermKind::Property, ontology)?;
    }
    Some(out)
}

/// Pads with `Unknown` or truncates so the list has `arity` items.
fn fit_arity(response: &str, arity: usize) -> Option<String> {
    let list = parse_column_list(response).ok()?;
    let mut items = item_texts(&list);
    items.resize(arity, UNKNOWN.to_owned());
    Some(rewrite_list(response, &list, &items))
}

/// Runs column-type annotation as the next exchange of `conversation`.
pub fn run_column_type_task(
    conversation: &mut Conversation,
    table: &Table,
    ontology: &Ontology,
    backend: &dyn ChatBackend,
    config: &PipelineConfig,
) -> Result<(ColumnTypeResult, Usage), HarnessError> {
    config.validate()?;
    let prompt = assemble(&column_type_prompt(table, &config.prompt_config)?);
    let arity = table.arity();
    let spec = TaskSpec {
        task: Task::ColumnType,
        evaluate: Box::new(move |text| {
            parse_column_types(text, arity).and_then(|l| check_column_types(&item_texts(&l), ontology))
        }),
        repair: Box::new(move |text, v| match v.kind {
            ViolationKind::UnknownProperty => {
                let list = parse_column_list(text).ok()?;
                repair_text(v, ontology, OriginalParse::ColumnTypes { response: text, list: &list }).ok()
            }
            ViolationKind::ArityMismatch { .. } => fit_arity(text, arity),
            _ => None,
        }),
        post_process: Box::new(move |text| nearest_properties(text, arity, ontology)),
        fallback: Box::new(move |text| {
            fit_arity(text, arity).and_then(|t| nearest_properties(&t, arity, ontology))
        }),
    };
    let mut usage = Usage::default();
    let run = drive(conversation, prompt, backend, config, spec, &mut usage)?;
    debug_assert_eq!(run.value.len(), arity);
    Ok((
        ColumnTypeResult {
            assignments: run.value,
            raw_response: run.raw,
            anchored: run.anchored,
            attempts: run.attempts,
        },
        usage,
    ))
}

/// Table-class detection followed by column-type annotation. With `context_flow` both
/// tasks share one conversation, so the second prompt sees the (possibly anchored) first
/// answer.
pub fn run_table_pipeline(
    table: &Table,
    ontology: &Ontology,
    backend: &dyn ChatBackend,
    config: &PipelineConfig,
    allowed_classes: Option<&[String]>,
) -> Result<PipelineOutcome, HarnessError> {
    let mut conversation = Conversation::new();
    let (table_class, mut usage) =
        run_table_class_task(&mut conversation, table, ontology, backend, config, allowed_classes)?;
    let mut conversations = Vec::new();
    if !config.context_flow {
        conversations.push(std::mem::take(&mut conversation));
    }
    let (column_types, u) = run_column_type_task(&mut conversation, table, ontology, backend, config)?;
    usage.accumulate(&u);
    conversations.push(conversation);
    Ok(PipelineOutcome {
        table_class,
        column_types,
        usage,
        conversations,
    })
}
