//! History rewriting: replace an infeasible answer with a repaired one so later turns
//! are conditioned on a feasible history.

use crate::backend::{Conversation, Role};
use crate::ontology::{normalize_label, strip_decorations, Ontology, TermKind};

use super::{ColumnList, HarnessError, ParsedItem, Violation, ViolationKind};

/// Copy of `conversation` whose final assistant turn reads `replacement`. The original
/// is untouched; turn count and all earlier turns are preserved.
pub fn anchor(conversation: &Conversation, replacement: &str) -> Result<Conversation, HarnessError> {
    match conversation.last().map(|t| t.role()) {
        Some(Role::Assistant) => conversation
            .with_last_text(replacement.to_owned())
            .map_err(|e| HarnessError::InvalidState(e.to_string())),
        other => Err(HarnessError::InvalidState(format!(
            "final turn must be an assistant turn, found {other:?}"
        ))),
    }
}

/// The parse a violation refers to, with the response it was taken from.
#[derive(Debug, Clone, Copy)]
pub enum OriginalParse<'a> {
    TableClass {
        response: &'a str,
        label: &'a ParsedItem,
    },
    ColumnTypes {
        response: &'a str,
        list: &'a ColumnList,
    },
}

/// Swaps the label in `item` for its nearest ontology term, keeping the token's
/// decorations and its IRI / prefixed / bare style. Text outside the token is unchanged.
pub(crate) fn substitute_nearest(
    response: &str,
    item: &ParsedItem,
    kind: TermKind,
    ontology: &Ontology,
) -> Option<String> {
    let core = strip_decorations(&item.text);
    let canonical = normalize_label(&item.text, ontology).unwrap_or_default();
    let (term, _) = ontology.nearest_term(kind, &canonical).ok()?;
    let offset = item.text.find(core).unwrap_or(0);
    let start = item.span.start + offset;
    let mut out = String::with_capacity(response.len());
    out.push_str(&response[..start]);
    out.push_str(&ontology.format_like(core, term));
    out.push_str(&response[start + core.len()..]);
    Some(out)
}

/// Replaces the whole list span with `items` joined by `", "`.
pub(crate) fn rewrite_list(response: &str, list: &ColumnList, items: &[String]) -> String {
    format!(
        "{}{}{}",
        &response[..list.span.start],
        items.join(", "),
        &response[list.span.end..]
    )
}

/// Response text with the offending class or property replaced by its nearest term.
pub fn repair_text(
    violation: &Violation,
    ontology: &Ontology,
    original: OriginalParse<'_>,
) -> Result<String, HarnessError> {
    let unavailable = || HarnessError::RepairUnavailable(violation.kind);
    let repaired = match (violation.kind, original) {
        (ViolationKind::UnknownClass, OriginalParse::TableClass { response, label }) => {
            substitute_nearest(response, label, TermKind::Class, ontology)
        }
        (ViolationKind::UnknownProperty, OriginalParse::ColumnTypes { response, list }) => {
            let item = violation.position.and_then(|i| list.items.get(i));
            item.and_then(|item| substitute_nearest(response, item, TermKind::Property, ontology))
        }
        _ => None,
    };
    repaired.ok_or_else(unavailable)
}
