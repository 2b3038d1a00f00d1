//! Extraction of candidate labels and merge arguments from free-form model output.

use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;

use super::{Violation, ViolationKind};

/// A fragment of a response together with its byte range in that response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedItem {
    pub text: String,
    pub span: Range<usize>,
}

impl ParsedItem {
    fn at(source: &str, span: Range<usize>) -> Self {
        Self {
            text: source[span.clone()].to_owned(),
            span,
        }
    }
}

/// A comma-separated label list and the byte range of the whole list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnList {
    pub items: Vec<ParsedItem>,
    pub span: Range<usize>,
}

fn iri_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"https?://dbpedia\.org/ontology/[^\s`'"<>()\[\],]+"#).unwrap())
}

fn backtick_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"`([^`\n]+)`").unwrap())
}

fn unparsable(text: &str) -> Violation {
    Violation::new(ViolationKind::UnparsableOutput, text, None)
}

/// First DBpedia ontology IRI in the response, else the first backtick-quoted token.
/// The result is not normalized.
pub fn parse_table_class(response: &str) -> Result<ParsedItem, Violation> {
    if let Some(m) = iri_pattern().find(response) {
        return Ok(ParsedItem::at(response, m.range()));
    }
    if let Some(c) = backtick_pattern().captures(response) {
        let inner = c.get(1).expect("group 1 always participates");
        let trimmed = trim_span(response, inner.range());
        if !trimmed.is_empty() {
            return Ok(ParsedItem::at(response, trimmed));
        }
    }
    Err(unparsable(response))
}

fn trim_span(source: &str, span: Range<usize>) -> Range<usize> {
    let s = &source[span.clone()];
    let start = span.start + (s.len() - s.trim_start().len());
    let end = span.end - (s.len() - s.trim_end().len());
    start..end.max(start)
}

/// The first backtick-quoted span, or failing that the first non-empty line that is not a
/// code fence, split on commas. Items are trimmed; an empty item makes the list unparsable.
pub fn parse_column_list(response: &str) -> Result<ColumnList, Violation> {
    let span = match backtick_pattern().captures(response) {
        Some(c) => c.get(1).expect("group 1 always participates").range(),
        None => {
            let mut offset = 0;
            let mut found = None;
            for line in response.split('\n') {
                let t = line.trim();
                if !t.is_empty() && !t.starts_with("```") {
                    found = Some(offset..offset + line.len());
                    break;
                }
                offset += line.len() + 1;
            }
            found.ok_or_else(|| unparsable(response))?
        }
    };
    let mut items = Vec::new();
    let mut start = span.start;
    for piece in response[span.clone()].split(',') {
        let item = trim_span(response, start..start + piece.len());
        if item.is_empty() {
            return Err(unparsable(&response[span]));
        }
        items.push(ParsedItem::at(response, item));
        start += piece.len() + 1;
    }
    Ok(ColumnList { items, span })
}

/// [`parse_column_list`] plus an item-count check against the table arity.
pub fn parse_column_types(response: &str, arity: usize) -> Result<ColumnList, Violation> {
    let list = parse_column_list(response)?;
    if list.items.len() != arity {
        return Err(Violation::new(
            ViolationKind::ArityMismatch {
                expected: arity,
                found: list.items.len(),
            },
            &response[list.span.clone()],
            None,
        ));
    }
    Ok(list)
}

/// Column lists named by a merge call. Lengths are not checked here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedJoin {
    pub left_on: Vec<String>,
    pub right_on: Vec<String>,
}

const MERGE_CALL: &str = "pd.merge(";

/// Parses the remainder of a `pd.merge(df1, df2, left_on=` call, or a complete call.
///
/// Grammar: comma-separated arguments, each `name=value` or a positional value. In a bare
/// completion the first positional value is `left_on`. Values are quoted strings (with
/// backslash escapes), bracketed lists of quoted strings, or bare words for other keyword
/// arguments. Parsing stops at `)`; anything after it is ignored.
pub fn parse_join_completion(response: &str) -> Result<ParsedJoin, Violation> {
    let trimmed = response.trim().trim_start_matches('`');
    let first = Cursor::new(trimmed, false).arguments();
    let Err(first_error) = first else {
        return first;
    };
    if let Some(i) = trimmed.find(MERGE_CALL) {
        if let Ok(j) = Cursor::new(&trimmed[i + MERGE_CALL.len()..], true).arguments() {
            return Ok(j);
        }
    }
    if let Some(i) = trimmed.find("left_on").filter(|&i| i > 0) {
        if let Ok(j) = Cursor::new(&trimmed[i..], false).arguments() {
            return Ok(j);
        }
    }
    Err(first_error)
}

#[derive(Debug)]
enum Value {
    Str(String),
    List(Vec<String>),
    Word,
}

impl Value {
    fn into_names(self) -> Option<Vec<String>> {
        match self {
            Value::Str(s) => Some(vec![s]),
            Value::List(v) => Some(v),
            Value::Word => None,
        }
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    full_call: bool,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, full_call: bool) -> Self {
        Self {
            src,
            pos: 0,
            full_call,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn fail(&self) -> Violation {
        unparsable(self.rest())
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> Option<&'a str> {
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '.' || c == '-'))
            .unwrap_or(rest.len());
        if len == 0 {
            return None;
        }
        self.pos += len;
        Some(&rest[..len])
    }

    fn string(&mut self) -> Result<String, Violation> {
        let quote = match self.peek() {
            Some(q @ ('\'' | '"')) => q,
            _ => return Err(self.fail()),
        };
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => match chars.next() {
                    Some((_, escaped)) => out.push(escaped),
                    None => break,
                },
                c if c == quote => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                c => out.push(c),
            }
        }
        self.pos = start;
        Err(self.fail())
    }

    fn value(&mut self) -> Result<Value, Violation> {
        self.skip_ws();
        match self.peek() {
            Some('\'' | '"') => self.string().map(Value::Str),
            Some('[') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    if self.eat(']') {
                        break;
                    }
                    items.push(self.string()?);
                    self.skip_ws();
                    if self.eat(',') {
                        continue;
                    }
                    if self.eat(']') {
                        break;
                    }
                    return Err(self.fail());
                }
                Ok(Value::List(items))
            }
            _ => self
                .word()
                .map(|_| Value::Word)
                .ok_or_else(|| self.fail()),
        }
    }

    fn arguments(mut self) -> Result<ParsedJoin, Violation> {
        let (mut left, mut right, mut on) = (None, None, None);
        let mut first = true;
        loop {
            self.skip_ws();
            if self.peek().is_none() || self.eat(')') {
                break;
            }
            let checkpoint = self.pos;
            let key = match self.word() {
                Some(w) => {
                    self.skip_ws();
                    if self.eat('=') {
                        Some(w)
                    } else {
                        self.pos = checkpoint;
                        None
                    }
                }
                None => None,
            };
            let value_start = self.pos;
            let value = self.value()?;
            let slot = match key {
                Some("left_on") => Some(&mut left),
                Some("right_on") => Some(&mut right),
                Some("on") => Some(&mut on),
                Some(_) => None,
                None => match value {
                    Value::Word if self.full_call => None,
                    Value::Str(_) | Value::List(_) if first && !self.full_call => Some(&mut left),
                    _ => {
                        self.pos = value_start;
                        return Err(self.fail());
                    }
                },
            };
            if let Some(slot) = slot {
                if slot.is_some() {
                    self.pos = value_start;
                    return Err(self.fail());
                }
                *slot = Some(value.into_names().ok_or_else(|| {
                    self.pos = value_start;
                    self.fail()
                })?);
            }
            first = false;
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            if self.peek().is_none() || self.eat(')') {
                break;
            }
            return Err(self.fail());
        }
        match (left, right, on) {
            (Some(l), Some(r), None) => Ok(ParsedJoin {
                left_on: l,
                right_on: r,
            }),
            (None, None, Some(o)) => Ok(ParsedJoin {
                left_on: o.clone(),
                right_on: o,
            }),
            _ => Err(self.fail()),
        }
    }
}
