//! Relational tables, row sampling and CSV serialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Marker appended to cells cut down by [`Table::truncate_cells`].
pub const TRUNCATION_MARKER: char = '…';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableError {
    #[error("table has no columns")]
    ZeroArity,
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("csv: {0}")]
    Csv(String),
}

/// A named relation. Cells are kept as text; typing them is the model's job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    name: String,
    headers: Option<Vec<String>>,
    rows: Vec<Vec<String>>,
}

impl Table {
    /// Builds a table, enforcing that every row (and the header, if any) has the same arity.
    pub fn new(
        name: impl Into<String>,
        headers: Option<Vec<String>>,
        rows: Vec<Vec<String>>,
    ) -> Result<Self, TableError> {
        let arity = match (&headers, rows.first()) {
            (Some(h), _) => h.len(),
            (None, Some(r)) => r.len(),
            (None, None) => 0,
        };
        if arity == 0 {
            return Err(TableError::ZeroArity);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != arity {
                return Err(TableError::Ragged {
                    row: i,
                    expected: arity,
                    found: row.len(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            headers,
            rows,
        })
    }

    /// Parses RFC-4180 text. When `has_headers` is set the first record becomes the header.
    pub fn from_csv_str(
        name: impl Into<String>,
        text: &str,
        has_headers: bool,
    ) -> Result<Self, TableError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
            records.push(rec.iter().map(str::to_owned).collect::<Vec<_>>());
        }
        let headers = if has_headers && !records.is_empty() {
            Some(records.remove(0))
        } else {
            None
        };
        Self::new(name, headers, records)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn headers(&self) -> Option<&[String]> {
        self.headers.as_deref()
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn arity(&self) -> usize {
        match &self.headers {
            Some(h) => h.len(),
            None => self.rows[0].len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Values of column `index`, top to bottom.
    pub fn column(&self, index: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[index].as_str())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.headers
            .as_ref()
            .is_some_and(|h| h.iter().any(|c| c == name))
    }

    /// Same table without its header row.
    pub fn without_headers(&self) -> Self {
        Self {
            name: self.name.clone(),
            headers: None,
            rows: self.rows.clone(),
        }
    }

    /// Cuts every cell (headers included) longer than `max_chars` characters down to
    /// `max_chars` characters followed by [`TRUNCATION_MARKER`].
    pub fn truncate_cells(&self, max_chars: usize) -> Self {
        let cut = |cell: &String| -> String {
            match cell.char_indices().nth(max_chars) {
                Some((byte, _)) => {
                    let mut s = cell[..byte].to_owned();
                    s.push(TRUNCATION_MARKER);
                    s
                }
                None => cell.clone(),
            }
        };
        Self {
            name: self.name.clone(),
            headers: self.headers.as_ref().map(|h| h.iter().map(cut).collect()),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(cut).collect())
                .collect(),
        }
    }
}

/// How rows are chosen when a table is too large to show in full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingStrategy {
    /// The first `k` rows.
    #[default]
    Head,
    /// `k` distinct rows drawn uniformly with a seeded generator, kept in table order.
    SeededRandom { seed: u64 },
}

/// Returns a table with the same name and headers and `min(k, rows)` of its rows.
pub fn sample_rows(table: &Table, k: usize, strategy: SamplingStrategy) -> Table {
    let n = table.rows.len();
    let rows = if k >= n {
        table.rows.clone()
    } else {
        match strategy {
            SamplingStrategy::Head => table.rows[..k].to_vec(),
            SamplingStrategy::SeededRandom { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|i| table.rows[i].clone()).collect()
            }
        }
    };
    Table {
        name: table.name.clone(),
        headers: table.headers.clone(),
        rows,
    }
}

fn push_field(out: &mut String, field: &str) {
    if field.contains([',', '"', '\n', '\r']) {
        out.push('"');
        out.push_str(&field.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(field);
    }
}

/// Serializes one record as an RFC-4180 line (no terminator).
pub fn csv_line<S: AsRef<str>>(fields: &[S]) -> String {
    if let [only] = fields {
        // An empty line would read back as no record at all.
        if only.as_ref().is_empty() {
            return "\"\"".to_owned();
        }
    }
    let mut out = String::new();
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_field(&mut out, f.as_ref());
    }
    out
}

/// RFC-4180 serialization: header line first when present, lines joined by `\n`,
/// no trailing newline.
pub fn to_csv(table: &Table) -> String {
    let mut lines = Vec::with_capacity(table.rows.len() + 1);
    if let Some(h) = &table.headers {
        lines.push(csv_line(h));
    }
    lines.extend(table.rows.iter().map(|r| csv_line(r)));
    lines.join("\n")
}
