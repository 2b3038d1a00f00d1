//! Reference vocabularies of table classes and column properties.
//!
//! Terms are matched case-insensitively on their local name, separately per kind.
//! Model output is brought into canonical form with [`normalize_label`] before lookup.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::similarity::{Similarity, TokenEditSimilarity};

/// Namespace every loaded ontology knows about.
pub const DBPEDIA_PREFIX: &str = "dbo:";
pub const DBPEDIA_ONTOLOGY_IRI: &str = "https://dbpedia.org/ontology/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Class,
    Property,
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TermKind::Class => "class",
            TermKind::Property => "property",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OntologyError {
    #[error("line {line}: malformed IRI {text:?}")]
    MalformedIri { line: usize, text: String },
    #[error("line {line}: unknown kind tag {tag:?} (expected C or P)")]
    UnknownKindTag { line: usize, tag: String },
    #[error("line {line}: duplicate {kind} {local_name:?}")]
    DuplicateTerm {
        line: usize,
        kind: TermKind,
        local_name: String,
    },
    #[error("label is empty after normalization")]
    EmptyLabel,
    #[error("ontology has no {0} terms")]
    EmptyOntologyKind(TermKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct OntologyTerm {
    iri: String,
    local_name: String,
    kind: TermKind,
}

impl OntologyTerm {
    /// Accepts an absolute `http(s)://` IRI with a non-empty final path segment.
    pub fn new(iri: &str, kind: TermKind) -> Option<Self> {
        let iri = iri.trim();
        let rest = iri
            .strip_prefix("http://")
            .or_else(|| iri.strip_prefix("https://"))?;
        if rest.is_empty() || iri.chars().any(char::is_whitespace) {
            return None;
        }
        let local = &iri[iri.rfind('/')? + 1..];
        if local.is_empty() || !rest.contains('/') {
            return None;
        }
        Some(Self {
            iri: iri.to_owned(),
            local_name: local.to_owned(),
            kind,
        })
    }

    pub fn iri(&self) -> &str {
        &self.iri
    }

    pub fn local_name(&self) -> &str {
        &self.local_name
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }
}

/// Input layouts accepted by [`load_ontology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OntologyFormat {
    /// One IRI per line; every term is a class.
    LineDelimitedIri,
    /// `C<TAB>iri` or `P<TAB>iri` per line; untagged lines are classes.
    TabSeparatedKindIri,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ontology {
    classes: BTreeMap<String, OntologyTerm>,
    properties: BTreeMap<String, OntologyTerm>,
    namespace_prefixes: BTreeMap<String, String>,
}

impl Ontology {
    /// Empty ontology with the `dbo:` prefix registered.
    pub fn new() -> Self {
        let mut namespace_prefixes = BTreeMap::new();
        namespace_prefixes.insert(DBPEDIA_PREFIX.to_owned(), DBPEDIA_ONTOLOGY_IRI.to_owned());
        Self {
            namespace_prefixes,
            ..Self::default()
        }
    }

    /// Adds a term; returns `false` (and leaves the ontology unchanged) when its
    /// case-folded local name is already taken within its kind.
    pub fn insert(&mut self, term: OntologyTerm) -> bool {
        let key = term.local_name.to_lowercase();
        let set = self.terms_mut(term.kind);
        if set.contains_key(&key) {
            return false;
        }
        set.insert(key, term);
        true
    }

    pub fn register_prefix(&mut self, short: impl Into<String>, iri: impl Into<String>) {
        self.namespace_prefixes.insert(short.into(), iri.into());
    }

    pub fn namespace_prefixes(&self) -> &BTreeMap<String, String> {
        &self.namespace_prefixes
    }

    fn terms_mut(&mut self, kind: TermKind) -> &mut BTreeMap<String, OntologyTerm> {
        match kind {
            TermKind::Class => &mut self.classes,
            TermKind::Property => &mut self.properties,
        }
    }

    fn term_map(&self, kind: TermKind) -> &BTreeMap<String, OntologyTerm> {
        match kind {
            TermKind::Class => &self.classes,
            TermKind::Property => &self.properties,
        }
    }

    /// Terms of one kind, ordered by case-folded local name.
    pub fn terms(&self, kind: TermKind) -> impl Iterator<Item = &OntologyTerm> + '_ {
        self.term_map(kind).values()
    }

    pub fn len(&self, kind: TermKind) -> usize {
        self.term_map(kind).len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty() && self.properties.is_empty()
    }

    /// Case-insensitive exact match on local name within `kind`.
    pub fn lookup(&self, kind: TermKind, canonical: &str) -> Option<&OntologyTerm> {
        self.term_map(kind).get(&canonical.to_lowercase())
    }

    /// The most similar term under [`TokenEditSimilarity`].
    pub fn nearest_term(
        &self,
        kind: TermKind,
        canonical: &str,
    ) -> Result<(&OntologyTerm, f64), OntologyError> {
        self.nearest_term_by(kind, canonical, &TokenEditSimilarity)
    }

    /// The term maximizing `similarity`; ties go to the lexicographically smallest local name.
    pub fn nearest_term_by(
        &self,
        kind: TermKind,
        canonical: &str,
        similarity: &dyn Similarity,
    ) -> Result<(&OntologyTerm, f64), OntologyError> {
        let mut best: Option<(&OntologyTerm, f64)> = None;
        for term in self.terms(kind) {
            let score = similarity.similarity(canonical, &term.local_name);
            best = match best {
                Some((b, s))
                    if s > score || (s == score && b.local_name <= term.local_name) =>
                {
                    Some((b, s))
                }
                _ => Some((term, score)),
            };
        }
        best.ok_or(OntologyError::EmptyOntologyKind(kind))
    }

    /// Renders a term the way `style` is written: a full IRI, `prefix:name`, or a bare name.
    pub fn format_like(&self, style: &str, term: &OntologyTerm) -> String {
        let style = strip_decorations(style);
        if style.contains("://") {
            return term.iri.clone();
        }
        let lower = style.to_lowercase();
        for (short, iri) in &self.namespace_prefixes {
            if lower.starts_with(&short.to_lowercase()) {
                if term.iri.starts_with(iri.as_str()) {
                    return format!("{short}{}", term.local_name);
                }
                return term.iri.clone();
            }
        }
        term.local_name.clone()
    }

    /// Compact display form: `prefix:name` when the IRI sits under a registered
    /// namespace, the full IRI otherwise.
    pub fn compact(&self, term: &OntologyTerm) -> String {
        for (short, iri) in &self.namespace_prefixes {
            if term.iri == format!("{iri}{}", term.local_name) {
                return format!("{short}{}", term.local_name);
            }
        }
        term.iri.clone()
    }
}

/// Parses an ontology file. Blank lines and `#` comments are skipped.
pub fn load_ontology(source: &str, format: OntologyFormat) -> Result<Ontology, OntologyError> {
    let mut ontology = Ontology::new();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (kind, iri) = match format {
            OntologyFormat::LineDelimitedIri => (TermKind::Class, line),
            OntologyFormat::TabSeparatedKindIri => match line.split_once('\t') {
                Some((tag, iri)) => {
                    let kind = match tag.trim() {
                        "C" | "c" => TermKind::Class,
                        "P" | "p" => TermKind::Property,
                        other => {
                            return Err(OntologyError::UnknownKindTag {
                                line: line_no,
                                tag: other.to_owned(),
                            })
                        }
                    };
                    (kind, iri)
                }
                None => (TermKind::Class, line),
            },
        };
        let term = OntologyTerm::new(iri, kind).ok_or_else(|| OntologyError::MalformedIri {
            line: line_no,
            text: iri.to_owned(),
        })?;
        let local_name = term.local_name.clone();
        if !ontology.insert(term) {
            return Err(OntologyError::DuplicateTerm {
                line: line_no,
                kind,
                local_name,
            });
        }
    }
    Ok(ontology)
}

fn is_wrapper(c: char) -> bool {
    c.is_whitespace() || matches!(c, '`' | '\'' | '"')
}

/// Strips surrounding whitespace, backticks and quotes plus trailing `.` / `,`, to a fixpoint.
pub(crate) fn strip_decorations(mut s: &str) -> &str {
    loop {
        let next = s.trim_matches(is_wrapper).trim_end_matches(['.', ',']);
        if next.len() == s.len() {
            return s;
        }
        s = next;
    }
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

/// Reduces a model-emitted fragment to a bare local name.
///
/// Removes decorations (see above), then any registered namespace prefix (`dbo:`) or its
/// IRI, or, for any other absolute IRI, everything up to the last `/`. Repeats until
/// nothing changes, so the result is a fixpoint.
pub fn normalize_label(raw: &str, ontology: &Ontology) -> Result<String, OntologyError> {
    let mut current = raw;
    loop {
        let mut next = strip_decorations(current);
        let mut stripped = false;
        for (short, iri) in ontology.namespace_prefixes.iter().rev() {
            if let Some(rest) = strip_prefix_ci(next, iri).or_else(|| strip_prefix_ci(next, short)) {
                next = rest;
                stripped = true;
                break;
            }
        }
        if !stripped && next.contains("://") {
            next = &next[next.rfind('/').map_or(0, |i| i + 1)..];
        }
        if next.len() == current.len() {
            break;
        }
        current = next;
    }
    if current.is_empty() {
        Err(OntologyError::EmptyLabel)
    } else {
        Ok(current.to_owned())
    }
}
