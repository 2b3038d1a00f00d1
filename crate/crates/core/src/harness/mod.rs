//! Output parsing, feasibility checks, anchoring repair and task orchestration.

mod anchor;
mod check;
mod join;
mod parse;
mod pipeline;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::ontology::OntologyTerm;
use crate::prompt::PromptError;

pub use anchor::{anchor, repair_text, OriginalParse};
pub use check::{check, check_column_types, check_join, check_table_class, Candidate};
pub use join::{describe_violation, run_join_task, JoinOutcome};
pub use parse::{
    parse_column_list, parse_column_types, parse_join_completion, parse_table_class, ColumnList,
    ParsedItem, ParsedJoin,
};
pub use pipeline::{
    run_column_type_task, run_table_class_task, run_table_pipeline, PipelineOutcome,
    CLARIFICATION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    TableClass,
    ColumnType,
    Join,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::TableClass => "table-class",
            Task::ColumnType => "column-type",
            Task::Join => "join",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    UnparsableOutput,
    UnknownClass,
    UnknownProperty,
    NonexistentColumn { side: Side },
    ArityMismatch { expected: usize, found: usize },
}

/// Why a model output is infeasible. `position` is set only for
/// `UnknownProperty` (column index) and `NonexistentColumn` (index within its list).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub offending_text: String,
    pub position: Option<usize>,
}

impl Violation {
    pub(crate) fn new(kind: ViolationKind, text: &str, position: Option<usize>) -> Self {
        let position = match kind {
            ViolationKind::UnknownProperty | ViolationKind::NonexistentColumn { .. } => position,
            _ => None,
        };
        Self {
            kind,
            offending_text: text.to_owned(),
            position,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ViolationKind::UnparsableOutput => write!(f, "unparsable output {:?}", self.offending_text),
            ViolationKind::UnknownClass => write!(f, "unknown class {:?}", self.offending_text),
            ViolationKind::UnknownProperty => write!(
                f,
                "unknown property {:?} for column {}",
                self.offending_text,
                self.position.unwrap_or_default()
            ),
            ViolationKind::NonexistentColumn { side } => {
                write!(f, "no column {:?} in the {side:?} table", self.offending_text)
            }
            ViolationKind::ArityMismatch { expected, found } => {
                write!(f, "expected {expected} items, found {found}")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{task} failed: {violation}")]
    TaskFailed { task: Task, violation: Violation },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("no repair for {0:?}")]
    RepairUnavailable(ViolationKind),
    #[error("table {0:?} has no header row")]
    MissingHeaders(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// One column's annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ColumnAssignment {
    Term(OntologyTerm),
    Unknown,
}

impl ColumnAssignment {
    /// Local name of the term, or `Unknown`.
    pub fn label(&self) -> &str {
        match self {
            ColumnAssignment::Term(t) => t.local_name(),
            ColumnAssignment::Unknown => UNKNOWN,
        }
    }
}

pub const UNKNOWN: &str = "Unknown";

#[derive(Debug, Clone, PartialEq)]
pub struct TableClassResult {
    pub term: OntologyTerm,
    pub raw_response: String,
    pub anchored: bool,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnTypeResult {
    /// One entry per column, in column order.
    pub assignments: Vec<ColumnAssignment>,
    pub raw_response: String,
    pub anchored: bool,
    pub attempts: u32,
}

/// Column lists to equi-join on. Both lists are nonempty and equally long.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JoinPrediction {
    left_cols: Vec<String>,
    right_cols: Vec<String>,
}

impl JoinPrediction {
    pub fn new(left_cols: Vec<String>, right_cols: Vec<String>) -> Option<Self> {
        (!left_cols.is_empty() && left_cols.len() == right_cols.len()).then_some(Self {
            left_cols,
            right_cols,
        })
    }

    pub fn single(left: impl Into<String>, right: impl Into<String>) -> Self {
        Self {
            left_cols: vec![left.into()],
            right_cols: vec![right.into()],
        }
    }

    pub fn left_cols(&self) -> &[String] {
        &self.left_cols
    }

    pub fn right_cols(&self) -> &[String] {
        &self.right_cols
    }

    /// Positionally paired `(left, right)` column names.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.left_cols
            .iter()
            .zip(&self.right_cols)
            .map(|(l, r)| (l.as_str(), r.as_str()))
    }

    /// Renders the prediction as a completion of `pd.merge(df1, df2, left_on=`.
    pub fn to_completion(&self) -> String {
        fn quote(s: &str) -> String {
            format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
        }
        fn list(v: &[String]) -> String {
            match v {
                [one] => quote(one),
                many => format!("[{}]", many.iter().map(|s| quote(s)).collect::<Vec<_>>().join(", ")),
            }
        }
        format!("{}, right_on={})", list(&self.left_cols), list(&self.right_cols))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub anchoring_enabled: bool,
    /// Responses and rewrites allowed per task, including the first response.
    pub max_anchor_attempts: u32,
    pub context_flow: bool,
    pub prompt_config: crate::prompt::PromptConfig,
    pub params: crate::backend::GenerationParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            anchoring_enabled: true,
            max_anchor_attempts: 3,
            context_flow: true,
            prompt_config: Default::default(),
            params: Default::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.max_anchor_attempts == 0 {
            return Err(HarnessError::Config("max_anchor_attempts must be at least 1".into()));
        }
        if self.prompt_config.sample_k == 0 {
            return Err(HarnessError::Config("sample rows must be at least 1".into()));
        }
        Ok(())
    }
}
