//! Feasibility constraints: classes and properties must exist in the ontology, join
//! columns must exist in their tables.

use crate::ontology::{normalize_label, strip_decorations, Ontology, OntologyTerm, TermKind};
use crate::table::Table;

use super::{ColumnAssignment, JoinPrediction, ParsedJoin, Side, Violation, ViolationKind, UNKNOWN};

/// Resolves a raw class label to an ontology class.
pub fn check_table_class(raw: &str, ontology: &Ontology) -> Result<OntologyTerm, Violation> {
    normalize_label(raw, ontology)
        .ok()
        .and_then(|c| ontology.lookup(TermKind::Class, &c).cloned())
        .ok_or_else(|| Violation::new(ViolationKind::UnknownClass, raw, None))
}

pub(crate) fn is_unknown(raw: &str) -> bool {
    strip_decorations(raw).eq_ignore_ascii_case(UNKNOWN)
}

/// Resolves each raw item to a property or `Unknown`; reports the first failing column.
pub fn check_column_types<S: AsRef<str>>(
    items: &[S],
    ontology: &Ontology,
) -> Result<Vec<ColumnAssignment>, Violation> {
    items
        .iter()
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.as_ref();
            if is_unknown(raw) {
                return Ok(ColumnAssignment::Unknown);
            }
            normalize_label(raw, ontology)
                .ok()
                .and_then(|c| ontology.lookup(TermKind::Property, &c).cloned())
                .map(ColumnAssignment::Term)
                .ok_or_else(|| Violation::new(ViolationKind::UnknownProperty, raw, Some(i)))
        })
        .collect()
}

/// Every name must be an exact header of its table, and the lists must pair up.
pub fn check_join(
    parsed: &ParsedJoin,
    left: &Table,
    right: &Table,
) -> Result<JoinPrediction, Violation> {
    if parsed.left_on.is_empty() || parsed.right_on.is_empty() {
        return Err(Violation::new(ViolationKind::UnparsableOutput, "[]", None));
    }
    for (side, names, table) in [
        (Side::Left, &parsed.left_on, left),
        (Side::Right, &parsed.right_on, right),
    ] {
        if let Some((i, missing)) = names.iter().enumerate().find(|(_, n)| !table.has_column(n)) {
            return Err(Violation::new(
                ViolationKind::NonexistentColumn { side },
                missing,
                Some(i),
            ));
        }
    }
    JoinPrediction::new(parsed.left_on.clone(), parsed.right_on.clone()).ok_or_else(|| {
        Violation::new(
            ViolationKind::ArityMismatch {
                expected: parsed.left_on.len(),
                found: parsed.right_on.len(),
            },
            &parsed.right_on.join(", "),
            None,
        )
    })
}

/// A parsed output of any task.
#[derive(Debug, Clone, Copy)]
pub enum Candidate<'a> {
    TableClass(&'a str),
    ColumnTypes(&'a [String]),
    Join {
        parsed: &'a ParsedJoin,
        left: &'a Table,
        right: &'a Table,
    },
}

/// Checks any candidate; the violation is returned as a value.
pub fn check(candidate: Candidate<'_>, ontology: &Ontology) -> Result<(), Violation> {
    match candidate {
        Candidate::TableClass(raw) => check_table_class(raw, ontology).map(drop),
        Candidate::ColumnTypes(items) => check_column_types(items, ontology).map(drop),
        Candidate::Join {
            parsed,
            left,
            right,
        } => check_join(parsed, left, right).map(drop),
    }
}
