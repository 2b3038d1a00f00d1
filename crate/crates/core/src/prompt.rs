//! Prompt assembly for the three tasks.
//!
//! A prompt is built from six optional components (instruction, task-specific knowledge,
//! demonstration, metadata, data sample, prefix). [`assemble`] lays them out as blank-line
//! separated paragraphs in that order; data samples are rendered as fenced CSV blocks with
//! the header row (when metadata is enabled) directly above the sampled rows.

use thiserror::Error;

use crate::table::{csv_line, sample_rows, to_csv, SamplingStrategy, Table};

pub const TABLE_CLASS_INSTRUCTION: &str =
    "For the following CSV sample, select one DBpedia.org ontology that represents the dataset";
pub const TABLE_CLASS_LIST_LEAD: &str = " from the following list:";
pub const TABLE_CLASS_DEMONSTRATION: &str =
    "For example, for a dataset about hospitals, return `https://dbpedia.org/ontology/Hospital`.";
pub const TABLE_CLASS_PREFIX: &str = "Begin your answer with 'https://dbpedia.org/ontology'.";

pub const COLUMN_TYPE_INSTRUCTION: &str = "For the following CSV sample, suggest a DBPedia.org Property for each column from the `dbo:` namespace.";
pub const COLUMN_TYPE_DEMONSTRATION: &str = "Consider this example. Input:
```
Name, Famous Book, Rk, Year
Fyodor Dostoevsky, Crime and Punishment, 22.5, 1866
Mark Twain, Adventures of Huckleberry Finn, 53, 1884
Albert Camus, The Stranger, -23, 1942
```
Output:
`dbo:author, dbo:title, Unknown, dbo:releaseDate`.";

pub const JOIN_INSTRUCTION: &str =
    "Given two Pandas Dataframes, suggest what `pd.merge` parameters to use to join the dataframes.";
pub const JOIN_PREFIX: &str =
    "Complete the correct Pandas merge command. `pd.merge(df1, df2, left_on=";

pub const DEFAULT_SAMPLE_ROWS: usize = 5;
pub const DEFAULT_CHAR_BUDGET: usize = 16_384;
pub const DEFAULT_MAX_CELL_CHARS: usize = 256;

const FENCE: &str = "```";
// Budget fitting never shrinks cells below this many characters.
const MIN_CELL_CHARS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("table {0:?} has neither rows nor headers")]
    EmptyTable(String),
    #[error("table {0:?} has no rows")]
    NoRows(String),
    #[error("prompt needs {needed} characters even at minimum size, budget is {budget}")]
    BudgetExceeded { needed: usize, budget: usize },
}

/// Where the prefix paragraph goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrefixPlacement {
    /// Last paragraph of the prompt.
    #[default]
    End,
    /// Appended to the demonstration paragraph (or standing alone) before the data.
    BeforeData,
}

/// One fenced CSV block, optionally introduced by a label line such as `df1 =`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DataSample {
    pub label: Option<String>,
    /// Header row; this is the metadata component for the block.
    pub header: Option<String>,
    pub rows: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PromptComponents {
    pub instruction: Option<String>,
    pub task_knowledge: Option<String>,
    pub demonstration: Option<String>,
    /// Schema notes shown above the data blocks.
    pub metadata: Option<String>,
    pub data_samples: Vec<DataSample>,
    pub prefix: Option<String>,
    pub prefix_placement: PrefixPlacement,
}

impl PromptComponents {
    pub fn is_empty(&self) -> bool {
        self.instruction.is_none()
            && self.task_knowledge.is_none()
            && self.demonstration.is_none()
            && self.metadata.is_none()
            && self.data_samples.is_empty()
            && self.prefix.is_none()
    }
}

/// Ablation switches and sampling settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptConfig {
    pub sample_k: usize,
    pub include_demonstration: bool,
    pub include_metadata: bool,
    pub include_prefix: bool,
    pub strategy: SamplingStrategy,
    pub char_budget: usize,
    pub max_cell_chars: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            sample_k: DEFAULT_SAMPLE_ROWS,
            include_demonstration: true,
            include_metadata: true,
            include_prefix: true,
            strategy: SamplingStrategy::Head,
            char_budget: DEFAULT_CHAR_BUDGET,
            max_cell_chars: DEFAULT_MAX_CELL_CHARS,
        }
    }
}

fn trim_blank_lines(text: &str) -> &str {
    let mut lines: Vec<&str> = text.split('\n').collect();
    while lines.first().is_some_and(|l| l.trim().is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.is_empty() {
        return "";
    }
    let start = lines[0].as_ptr() as usize - text.as_ptr() as usize;
    let last = lines[lines.len() - 1];
    let end = last.as_ptr() as usize - text.as_ptr() as usize + last.len();
    &text[start..end]
}

fn push_paragraph(out: &mut Vec<String>, text: Option<&str>) {
    if let Some(t) = text.map(trim_blank_lines).filter(|t| !t.is_empty()) {
        out.push(t.to_owned());
    }
}

fn render_block(sample: &DataSample) -> String {
    let mut lines = vec![FENCE];
    if let Some(h) = sample.header.as_deref().map(trim_blank_lines) {
        lines.push(h);
    }
    let rows = trim_blank_lines(&sample.rows);
    if !rows.is_empty() {
        lines.push(rows);
    }
    lines.push(FENCE);
    lines.join("\n")
}

/// Concatenates the present components into the final prompt text. Byte-deterministic.
pub fn assemble(components: &PromptComponents) -> String {
    let mut paragraphs = Vec::new();
    push_paragraph(&mut paragraphs, components.instruction.as_deref());
    push_paragraph(&mut paragraphs, components.task_knowledge.as_deref());
    let prefix = components.prefix.as_deref().map(trim_blank_lines);
    match (components.prefix_placement, prefix) {
        (PrefixPlacement::BeforeData, Some(p)) => match &components.demonstration {
            Some(d) => push_paragraph(&mut paragraphs, Some(&format!("{} {p}", trim_blank_lines(d)))),
            None => push_paragraph(&mut paragraphs, Some(p)),
        },
        _ => push_paragraph(&mut paragraphs, components.demonstration.as_deref()),
    }
    push_paragraph(&mut paragraphs, components.metadata.as_deref());
    for sample in &components.data_samples {
        push_paragraph(&mut paragraphs, sample.label.as_deref());
        paragraphs.push(render_block(sample));
    }
    if components.prefix_placement == PrefixPlacement::End {
        push_paragraph(&mut paragraphs, prefix);
    }
    paragraphs.join("\n\n")
}

fn data_sample(table: &Table, label: Option<&str>, include_metadata: bool) -> DataSample {
    DataSample {
        label: label.map(str::to_owned),
        header: table.headers().filter(|_| include_metadata).map(csv_line),
        rows: to_csv(&table.without_headers()),
    }
}

/// Samples, truncates and renders; shrinks cell width then row count until the assembled
/// prompt fits `config.char_budget`.
fn fit_budget(
    tables: &[&Table],
    config: &PromptConfig,
    build: impl Fn(&[Table]) -> PromptComponents,
) -> Result<PromptComponents, PromptError> {
    let mut cell_chars = config.max_cell_chars.max(1);
    let mut k = config.sample_k.max(1);
    loop {
        let prepared: Vec<Table> = tables
            .iter()
            .map(|t| sample_rows(t, k, config.strategy).truncate_cells(cell_chars))
            .collect();
        let components = build(&prepared);
        let needed = assemble(&components).chars().count();
        if needed <= config.char_budget {
            return Ok(components);
        }
        if cell_chars > MIN_CELL_CHARS {
            cell_chars = (cell_chars / 2).max(MIN_CELL_CHARS);
        } else if k > 1 {
            k -= 1;
        } else {
            return Err(PromptError::BudgetExceeded {
                needed,
                budget: config.char_budget,
            });
        }
    }
}

fn ensure_content(table: &Table) -> Result<(), PromptError> {
    if table.is_empty() && table.headers().is_none() {
        return Err(PromptError::EmptyTable(table.name().to_owned()));
    }
    Ok(())
}

/// Table-class detection. `allowed_classes` switches to the supervised variant by listing
/// the permitted class names as task-specific knowledge.
pub fn table_class_prompt(
    table: &Table,
    allowed_classes: Option<&[String]>,
    config: &PromptConfig,
) -> Result<PromptComponents, PromptError> {
    ensure_content(table)?;
    fit_budget(&[table], config, |prepared| {
        let (instruction, task_knowledge) = match allowed_classes {
            Some(classes) if !classes.is_empty() => (
                format!("{TABLE_CLASS_INSTRUCTION}{TABLE_CLASS_LIST_LEAD}"),
                Some(format!("{}.", classes.join(", "))),
            ),
            _ => (format!("{TABLE_CLASS_INSTRUCTION}."), None),
        };
        PromptComponents {
            instruction: Some(instruction),
            task_knowledge,
            demonstration: config
                .include_demonstration
                .then(|| TABLE_CLASS_DEMONSTRATION.to_owned()),
            metadata: None,
            data_samples: vec![data_sample(&prepared[0], None, config.include_metadata)],
            prefix: config.include_prefix.then(|| TABLE_CLASS_PREFIX.to_owned()),
            prefix_placement: PrefixPlacement::BeforeData,
        }
    })
}

/// Column-type annotation. The task has no prefix component.
pub fn column_type_prompt(
    table: &Table,
    config: &PromptConfig,
) -> Result<PromptComponents, PromptError> {
    ensure_content(table)?;
    fit_budget(&[table], config, |prepared| PromptComponents {
        instruction: Some(COLUMN_TYPE_INSTRUCTION.to_owned()),
        demonstration: config
            .include_demonstration
            .then(|| COLUMN_TYPE_DEMONSTRATION.to_owned()),
        data_samples: vec![data_sample(&prepared[0], None, config.include_metadata)],
        ..PromptComponents::default()
    })
}

/// Join-column prediction framed as completing a `pd.merge` call. `context_notes`
/// (e.g. classes detected earlier) are shown as metadata above the two frames.
pub fn join_prompt(
    left: &Table,
    right: &Table,
    config: &PromptConfig,
    context_notes: Option<&str>,
) -> Result<PromptComponents, PromptError> {
    for t in [left, right] {
        if t.is_empty() {
            return Err(PromptError::NoRows(t.name().to_owned()));
        }
    }
    fit_budget(&[left, right], config, |prepared| PromptComponents {
        instruction: Some(JOIN_INSTRUCTION.to_owned()),
        metadata: context_notes.map(str::to_owned),
        data_samples: vec![
            data_sample(&prepared[0], Some("df1 ="), config.include_metadata),
            data_sample(&prepared[1], Some("df2 ="), config.include_metadata),
        ],
        prefix: config.include_prefix.then(|| JOIN_PREFIX.to_owned()),
        ..PromptComponents::default()
    })
}
