//! C ABI over `datadisc`.
//!
//! Conventions:
//! - Every fallible function returns a [`DdStatus`] and writes results through out
//!   pointers only on `DD_STATUS_OK`.
//! - On failure, [`dd_last_error`] describes the error. The message belongs to the
//!   calling thread and stays valid until that thread's next call.
//! - Strings handed out are NUL-terminated UTF-8 and must be released with
//!   [`dd_string_free`].
//! - Handles are released with their `_free` function; passing NULL there is a no-op.
//! - Panics never cross the boundary; they surface as `DD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use datadisc::backend::{load_transcript, ChatBackend, Conversation, GenerationParams, HttpBackend, HttpConfig};
use datadisc::eval::{jaccard_join, levenshtein_join, per_class_stats, weighted_metrics};
use datadisc::harness::{
    run_column_type_task, run_join_task, run_table_class_task, ColumnAssignment, HarnessError, JoinPrediction,
    PipelineConfig, UNKNOWN,
};
use datadisc::ontology::{load_ontology, Ontology, OntologyFormat};
use datadisc::prompt::{assemble, column_type_prompt, join_prompt, table_class_prompt, PromptConfig};
use datadisc::similarity::edit_distance;
use datadisc::table::Table;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Malformed input: CSV, ontology, transcript, options or an empty table.
    InvalidInput = 3,
    /// The model never produced an answer that passed the checks.
    TaskFailed = 4,
    Backend = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdOntologyFormat {
    /// One IRI per line, all classes.
    LineDelimited = 0,
    /// `C<TAB>iri` or `P<TAB>iri` per line.
    TabSeparated = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdBaseline {
    /// Ask the model.
    None = 0,
    Jaccard = 1,
    Levenshtein = 2,
}

/// Pipeline options; start from [`dd_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdOptions {
    pub sample_rows: u32,
    /// 0 takes the first rows; anything else seeds random row sampling.
    pub seed: u64,
    pub temperature: f64,
    pub max_tokens: u32,
    pub demonstration: bool,
    pub metadata: bool,
    pub prefix: bool,
    pub anchoring: bool,
    pub context_flow: bool,
    pub max_anchor_attempts: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DdMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub struct DdOntology(Ontology);
pub struct DdTable(Table);
pub struct DdBackend(Box<dyn ChatBackend>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

#[derive(Debug)]
struct Failure {
    status: DdStatus,
    message: String,
}

impl Failure {
    fn new(status: DdStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let status = match e {
            HarnessError::TaskFailed { .. } => DdStatus::TaskFailed,
            HarnessError::Backend(_) => DdStatus::Backend,
            _ => DdStatus::InvalidInput,
        };
        Failure::new(status, e.to_string())
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::new(DdStatus::InvalidInput, e.to_string())
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `body`, records any failure and maps it to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DdStatus::Ok,
        Ok(Err(f)) => {
            set_error(&f.message);
            f.status
        }
        Err(_) => {
            set_error("internal panic");
            DdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(DdStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(DdStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(DdStatus::NullArgument, format!("{name} is NULL")))
}

unsafe fn out<T>(p: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::new(DdStatus::NullArgument, format!("{name} is NULL")));
    }
    p.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    // Interior NULs cannot come from valid UTF-8 table or ontology text we produce.
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

fn pipeline(options: *const DdOptions) -> Result<PipelineConfig, Failure> {
    // SAFETY: callers pass NULL or a pointer to a valid DdOptions.
    let o = unsafe { options.as_ref() }.copied().unwrap_or_else(|| dd_options_default());
    if o.sample_rows == 0 {
        return Err(invalid("sample_rows must be at least 1"));
    }
    let config = PipelineConfig {
        anchoring_enabled: o.anchoring,
        max_anchor_attempts: o.max_anchor_attempts,
        context_flow: o.context_flow,
        prompt_config: PromptConfig {
            sample_k: o.sample_rows as usize,
            include_demonstration: o.demonstration,
            include_metadata: o.metadata,
            include_prefix: o.prefix,
            strategy: match o.seed {
                0 => datadisc::table::SamplingStrategy::Head,
                seed => datadisc::table::SamplingStrategy::SeededRandom { seed },
            },
            ..PromptConfig::default()
        },
        params: GenerationParams::new(o.temperature, o.max_tokens).map_err(invalid)?,
    };
    config.validate().map_err(invalid)?;
    Ok(config)
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn dd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the calling thread's last failure, or NULL after a success.
#[no_mangle]
pub extern "C" fn dd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` is NULL or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn dd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn dd_options_default() -> DdOptions {
    let p = PipelineConfig::default();
    DdOptions {
        sample_rows: p.prompt_config.sample_k as u32,
        seed: 0,
        temperature: p.params.temperature,
        max_tokens: p.params.max_tokens,
        demonstration: p.prompt_config.include_demonstration,
        metadata: p.prompt_config.include_metadata,
        prefix: p.prompt_config.include_prefix,
        anchoring: p.anchoring_enabled,
        context_flow: p.context_flow,
        max_anchor_attempts: p.max_anchor_attempts,
    }
}

/// # Safety
/// `text` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_ontology_parse(
    text: *const c_char,
    format: DdOntologyFormat,
    out_ontology: *mut *mut DdOntology,
) -> DdStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let format = match format {
            DdOntologyFormat::LineDelimited => OntologyFormat::LineDelimitedIri,
            DdOntologyFormat::TabSeparated => OntologyFormat::TabSeparatedKindIri,
        };
        let onto = load_ontology(text, format).map_err(invalid)?;
        out(out_ontology, Box::into_raw(Box::new(DdOntology(onto))), "out_ontology")
    })
}

/// # Safety
/// `ontology` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dd_ontology_free(ontology: *mut DdOntology) {
    if !ontology.is_null() {
        drop(Box::from_raw(ontology));
    }
}

/// Parses RFC-4180 text; with `has_headers` the first record is the header row.
///
/// # Safety
/// `name` and `csv` are NUL-terminated strings; `out_table` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_table_from_csv(
    name: *const c_char,
    csv: *const c_char,
    has_headers: bool,
    out_table: *mut *mut DdTable,
) -> DdStatus {
    guard(|| {
        let (name, csv) = (str_arg(name, "name")?, str_arg(csv, "csv")?);
        let table = Table::from_csv_str(name, csv, has_headers).map_err(invalid)?;
        out(out_table, Box::into_raw(Box::new(DdTable(table))), "out_table")
    })
}

/// Number of columns, or 0 for NULL.
///
/// # Safety
/// `table` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dd_table_arity(table: *const DdTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.arity())
}

/// # Safety
/// `table` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dd_table_free(table: *mut DdTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Backend replaying a JSON-lines transcript of `{"match"?, "response"}` entries.
///
/// # Safety
/// `transcript` is a NUL-terminated string; `out_backend` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_backend_scripted(transcript: *const c_char, out_backend: *mut *mut DdBackend) -> DdStatus {
    guard(|| {
        let backend = load_transcript(str_arg(transcript, "transcript")?).map_err(invalid)?;
        out(out_backend, Box::into_raw(Box::new(DdBackend(Box::new(backend)))), "out_backend")
    })
}

/// Chat-completions backend. Model and credential come from the environment;
/// `endpoint` may be NULL for the default.
///
/// # Safety
/// `endpoint` is NULL or a NUL-terminated string; `out_backend` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_backend_http(endpoint: *const c_char, out_backend: *mut *mut DdBackend) -> DdStatus {
    guard(|| {
        let config = HttpConfig::from_env(opt_str_arg(endpoint, "endpoint")?).map_err(invalid)?;
        let backend = HttpBackend::new(config);
        out(out_backend, Box::into_raw(Box::new(DdBackend(Box::new(backend)))), "out_backend")
    })
}

/// # Safety
/// `backend` is NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dd_backend_free(backend: *mut DdBackend) {
    if !backend.is_null() {
        drop(Box::from_raw(backend));
    }
}

/// Assembled table-class prompt. `allowed_classes` is NULL or a newline-separated list.
///
/// # Safety
/// Pointers are NULL where allowed or valid; `out_prompt` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_prompt_table_class(
    table: *const DdTable,
    allowed_classes: *const c_char,
    options: *const DdOptions,
    out_prompt: *mut *mut c_char,
) -> DdStatus {
    guard(|| {
        let table = &handle(table, "table")?.0;
        let allowed = class_list(opt_str_arg(allowed_classes, "allowed_classes")?);
        let config = pipeline(options)?;
        let prompt = table_class_prompt(table, allowed.as_deref(), &config.prompt_config).map_err(invalid)?;
        out(out_prompt, owned_string(assemble(&prompt)), "out_prompt")
    })
}

/// # Safety
/// Pointers are NULL where allowed or valid; `out_prompt` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_prompt_column_type(
    table: *const DdTable,
    options: *const DdOptions,
    out_prompt: *mut *mut c_char,
) -> DdStatus {
    guard(|| {
        let table = &handle(table, "table")?.0;
        let config = pipeline(options)?;
        let prompt = column_type_prompt(table, &config.prompt_config).map_err(invalid)?;
        out(out_prompt, owned_string(assemble(&prompt)), "out_prompt")
    })
}

/// # Safety
/// Pointers are NULL where allowed or valid; `out_prompt` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_prompt_join(
    left: *const DdTable,
    right: *const DdTable,
    context_notes: *const c_char,
    options: *const DdOptions,
    out_prompt: *mut *mut c_char,
) -> DdStatus {
    guard(|| {
        let (l, r) = (&handle(left, "left")?.0, &handle(right, "right")?.0);
        let notes = opt_str_arg(context_notes, "context_notes")?;
        let config = pipeline(options)?;
        let prompt = join_prompt(l, r, &config.prompt_config, notes).map_err(invalid)?;
        out(out_prompt, owned_string(assemble(&prompt)), "out_prompt")
    })
}

fn class_list(text: Option<&str>) -> Option<Vec<String>> {
    let classes: Vec<String> = text?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect();
    (!classes.is_empty()).then_some(classes)
}

/// Table-class detection. Writes the class IRI, whether anchoring intervened and the
/// number of answers considered. `out_anchored` and `out_attempts` may be NULL.
///
/// # Safety
/// Handles are live; `allowed_classes` and `options` may be NULL; `out_iri` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_classify_table(
    table: *const DdTable,
    ontology: *const DdOntology,
    backend: *const DdBackend,
    allowed_classes: *const c_char,
    options: *const DdOptions,
    out_iri: *mut *mut c_char,
    out_anchored: *mut bool,
    out_attempts: *mut u32,
) -> DdStatus {
    guard(|| {
        let table = &handle(table, "table")?.0;
        let onto = &handle(ontology, "ontology")?.0;
        let backend = handle(backend, "backend")?.0.as_ref();
        let allowed = class_list(opt_str_arg(allowed_classes, "allowed_classes")?);
        if out_iri.is_null() {
            return Err(Failure::new(DdStatus::NullArgument, "out_iri is NULL"));
        }
        let config = pipeline(options)?;
        let mut conv = Conversation::new();
        let (r, _) = run_table_class_task(&mut conv, table, onto, backend, &config, allowed.as_deref())?;
        out(out_iri, owned_string(r.term.iri().to_owned()), "out_iri")?;
        if !out_anchored.is_null() {
            out_anchored.write(r.anchored);
        }
        if !out_attempts.is_null() {
            out_attempts.write(r.attempts);
        }
        Ok(())
    })
}

/// Column-type annotation. Writes one `index<TAB>label` line per column, with labels
/// in `dbo:` form or `Unknown`.
///
/// # Safety
/// Handles are live; `options` may be NULL; `out_tsv` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_annotate_columns(
    table: *const DdTable,
    ontology: *const DdOntology,
    backend: *const DdBackend,
    options: *const DdOptions,
    out_tsv: *mut *mut c_char,
) -> DdStatus {
    guard(|| {
        let table = &handle(table, "table")?.0;
        let onto = &handle(ontology, "ontology")?.0;
        let backend = handle(backend, "backend")?.0.as_ref();
        if out_tsv.is_null() {
            return Err(Failure::new(DdStatus::NullArgument, "out_tsv is NULL"));
        }
        let config = pipeline(options)?;
        let (r, _) = run_column_type_task(&mut Conversation::new(), table, onto, backend, &config)?;
        let mut text = String::new();
        for (i, a) in r.assignments.iter().enumerate() {
            let label = match a {
                ColumnAssignment::Term(t) => onto.compact(t),
                ColumnAssignment::Unknown => UNKNOWN.to_owned(),
            };
            text.push_str(&format!("{i}\t{label}\n"));
        }
        out(out_tsv, owned_string(text), "out_tsv")
    })
}

fn join_line(p: &JoinPrediction) -> String {
    format!("{}\t{}", p.left_cols().join(","), p.right_cols().join(","))
}

/// Join-column prediction, written as `left_cols<TAB>right_cols` with comma-joined
/// names. With a baseline, `backend` may be NULL.
///
/// # Safety
/// Handles are live where required; `context_notes` and `options` may be NULL;
/// `out_join` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_predict_join(
    left: *const DdTable,
    right: *const DdTable,
    backend: *const DdBackend,
    baseline: DdBaseline,
    context_notes: *const c_char,
    options: *const DdOptions,
    out_join: *mut *mut c_char,
) -> DdStatus {
    guard(|| {
        let (l, r) = (&handle(left, "left")?.0, &handle(right, "right")?.0);
        let notes = opt_str_arg(context_notes, "context_notes")?;
        if out_join.is_null() {
            return Err(Failure::new(DdStatus::NullArgument, "out_join is NULL"));
        }
        let prediction = match baseline {
            DdBaseline::Jaccard => jaccard_join(l, r).map_err(invalid)?,
            DdBaseline::Levenshtein => levenshtein_join(l, r).map_err(invalid)?,
            DdBaseline::None => {
                let backend = handle(backend, "backend")?.0.as_ref();
                run_join_task(l, r, backend, &pipeline(options)?, notes)?.prediction
            }
        };
        out(out_join, owned_string(join_line(&prediction)), "out_join")
    })
}

/// Character-level Levenshtein distance.
///
/// # Safety
/// `a` and `b` are NUL-terminated strings; `out_distance` is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_edit_distance(a: *const c_char, b: *const c_char, out_distance: *mut usize) -> DdStatus {
    guard(|| {
        let d = edit_distance(str_arg(a, "a")?, str_arg(b, "b")?);
        out(out_distance, d, "out_distance")
    })
}

/// Support-weighted precision, recall and F1 of `n` predictions against `n` gold labels.
///
/// # Safety
/// `predictions` and `golds` point to `n` NUL-terminated strings each; `out_metrics`
/// is writable.
#[no_mangle]
pub unsafe extern "C" fn dd_weighted_metrics(
    predictions: *const *const c_char,
    golds: *const *const c_char,
    n: usize,
    out_metrics: *mut DdMetrics,
) -> DdStatus {
    guard(|| {
        if predictions.is_null() || golds.is_null() {
            return Err(Failure::new(DdStatus::NullArgument, "label arrays are NULL"));
        }
        let read = |arr: *const *const c_char, name: &str| -> Result<Vec<&str>, Failure> {
            (0..n).map(|i| str_arg(*arr.add(i), name)).collect()
        };
        let (p, g) = (read(predictions, "predictions")?, read(golds, "golds")?);
        let m = weighted_metrics(&per_class_stats(&p, &g).map_err(invalid)?).map_err(invalid)?;
        out(
            out_metrics,
            DdMetrics {
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
            },
            "out_metrics",
        )
    })
}
