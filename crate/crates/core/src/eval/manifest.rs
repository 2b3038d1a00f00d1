//! JSON-lines benchmark manifests.
//!
//! One example per line:
//! `{"id": .., "task": "table-class"|"column-type"|"join", "table": path | "left"/"right": paths,
//!   "headers": bool, "gold": label | [labels] | [[left, right], ..]}`.
//! Paths are relative to the manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::harness::Task;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("manifest line {line}: {reason}")]
pub struct ManifestError {
    /// 1-based; 0 when the file itself could not be read.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Table(PathBuf),
    Pair { left: PathBuf, right: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gold {
    Class(String),
    Columns(Vec<String>),
    Pairs(Vec<(String, String)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub id: String,
    pub task: Task,
    pub payload: Payload,
    pub headers: bool,
    pub gold: Gold,
    /// Manifest line the example came from.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub examples: Vec<LabeledExample>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExample {
    id: String,
    task: Task,
    table: Option<String>,
    left: Option<String>,
    right: Option<String>,
    #[serde(default = "default_headers")]
    headers: bool,
    gold: Value,
}

fn default_headers() -> bool {
    true
}

fn gold_for(task: Task, value: Value) -> Result<Gold, String> {
    let string = |v: &Value| v.as_str().map(str::to_owned);
    let strings = |v: &Value| -> Option<Vec<String>> { v.as_array()?.iter().map(string).collect() };
    let gold = match task {
        Task::TableClass => string(&value).filter(|s| !s.is_empty()).map(Gold::Class),
        Task::ColumnType => strings(&value).filter(|v| !v.is_empty()).map(Gold::Columns),
        Task::Join => value
            .as_array()
            .and_then(|pairs| {
                pairs
                    .iter()
                    .map(|p| match strings(p)?.as_slice() {
                        [l, r] => Some((l.clone(), r.clone())),
                        _ => None,
                    })
                    .collect::<Option<Vec<_>>>()
            })
            .filter(|v| !v.is_empty())
            .map(Gold::Pairs),
    };
    gold.ok_or_else(|| {
        let shape = match task {
            Task::TableClass => "a class label",
            Task::ColumnType => "a nonempty list of labels",
            Task::Join => "a nonempty list of [left, right] pairs",
        };
        format!("gold for a {task} example must be {shape}")
    })
}

/// Parses manifest text; relative table paths are resolved against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<Manifest, ManifestError> {
    let mut examples = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| ManifestError {
            line: idx + 1,
            reason,
        };
        let raw: RawExample = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if !ids.insert(raw.id.clone()) {
            return Err(err(format!("duplicate id {:?}", raw.id)));
        }
        let payload = match (raw.task, raw.table, raw.left, raw.right) {
            (Task::Join, None, Some(l), Some(r)) => Payload::Pair {
                left: base_dir.join(l),
                right: base_dir.join(r),
            },
            (Task::Join, ..) => return Err(err("join examples need \"left\" and \"right\"".into())),
            (_, Some(t), None, None) => Payload::Table(base_dir.join(t)),
            _ => return Err(err(format!("{} examples need exactly \"table\"", raw.task))),
        };
        let gold = gold_for(raw.task, raw.gold).map_err(err)?;
        examples.push(LabeledExample {
            id: raw.id,
            task: raw.task,
            payload,
            headers: raw.headers,
            gold,
            line: idx + 1,
        });
    }
    Ok(Manifest { examples })
}

pub fn load_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|e| ManifestError {
        line: 0,
        reason: format!("{}: {e}", path.display()),
    })?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}
