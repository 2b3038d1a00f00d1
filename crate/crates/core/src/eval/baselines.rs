//! Name-similarity and value-overlap join baselines.

use std::collections::HashSet;

use thiserror::Error;

use crate::harness::JoinPrediction;
use crate::similarity::{edit_distance, jaccard};
use crate::table::Table;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error("table {0:?} has no header row")]
    MissingHeaders(String),
    #[error("table {0:?} has no rows")]
    EmptyTable(String),
}

fn headers(t: &Table) -> Result<&[String], BaselineError> {
    t.headers()
        .ok_or_else(|| BaselineError::MissingHeaders(t.name().to_owned()))
}

/// The header pair with the smallest edit distance between lowercased names; ties go
/// to the lexicographically smallest `(left, right)`.
pub fn levenshtein_join(left: &Table, right: &Table) -> Result<JoinPrediction, BaselineError> {
    let (lh, rh) = (headers(left)?, headers(right)?);
    let mut best: Option<(usize, &str, &str)> = None;
    for l in lh {
        let ll = l.to_lowercase();
        for r in rh {
            let candidate = (edit_distance(&ll, &r.to_lowercase()), l.as_str(), r.as_str());
            if best.is_none_or(|b| candidate < b) {
                best = Some(candidate);
            }
        }
    }
    let (_, l, r) = best.expect("tables have at least one column");
    Ok(JoinPrediction::single(l, r))
}

/// Distinct non-empty cell values of each column.
fn value_sets(t: &Table) -> Vec<HashSet<&str>> {
    (0..t.arity())
        .map(|i| t.column(i).filter(|v| !v.trim().is_empty()).collect())
        .collect()
}

/// The column pair whose distinct non-empty value sets have the highest Jaccard
/// similarity. Ties go to the smallest `(left name, right name)`, or to the smallest
/// `(left index, right index)` when either table lacks headers; the prediction then
/// names columns by index.
pub fn jaccard_join(left: &Table, right: &Table) -> Result<JoinPrediction, BaselineError> {
    for t in [left, right] {
        if t.is_empty() {
            return Err(BaselineError::EmptyTable(t.name().to_owned()));
        }
    }
    let names = |t: &Table| -> Vec<String> {
        match (left.headers(), right.headers()) {
            (Some(_), Some(_)) => t.headers().expect("checked").to_vec(),
            _ => (0..t.arity()).map(|i| i.to_string()).collect(),
        }
    };
    let by_name = left.headers().is_some() && right.headers().is_some();
    let (ln, rn) = (names(left), names(right));
    let (lv, rv) = (value_sets(left), value_sets(right));
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, x) in lv.iter().enumerate() {
        for (j, y) in rv.iter().enumerate() {
            let score = jaccard(x, y);
            let better = match best {
                None => true,
                Some((s, bi, bj)) => {
                    score > s
                        || (score == s
                            && if by_name {
                                (&ln[i], &rn[j]) < (&ln[bi], &rn[bj])
                            } else {
                                (i, j) < (bi, bj)
                            })
                }
            };
            if better {
                best = Some((score, i, j));
            }
        }
    }
    let (_, i, j) = best.expect("tables have at least one column");
    Ok(JoinPrediction::single(ln[i].clone(), rn[j].clone()))
}

/// Correctness of each distinct predicted pair against the gold pairs, in prediction
/// order. Names are compared exactly.
pub fn join_match(prediction: &JoinPrediction, gold: &[(String, String)]) -> Vec<bool> {
    let gold: HashSet<(&str, &str)> = gold.iter().map(|(l, r)| (l.as_str(), r.as_str())).collect();
    let mut seen = HashSet::new();
    prediction
        .pairs()
        .filter(|p| seen.insert(*p))
        .map(|p| gold.contains(&p))
        .collect()
}
