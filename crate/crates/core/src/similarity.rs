//! String and set similarity used by ontology repair and the join baselines.

use std::collections::HashSet;
use std::hash::Hash;

/// Levenshtein distance with unit-cost insert, delete and substitute, over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Splits camelCase, acronym boundaries, underscores, hyphens and whitespace, then
/// lowercases and joins with single spaces: `"iucnStatus"` becomes `"iucn status"`.
pub fn tokenize_label(label: &str) -> String {
    let chars: Vec<char> = label.chars().collect();
    let mut words: Vec<String> = Vec::new();
    let mut word = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c == '_' || c == '-' || c.is_whitespace() {
            if !word.is_empty() {
                words.push(std::mem::take(&mut word));
            }
            continue;
        }
        if c.is_uppercase() && !word.is_empty() {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || prev.is_ascii_digit() || (prev.is_uppercase() && next_lower) {
                words.push(std::mem::take(&mut word));
            }
        }
        word.extend(c.to_lowercase());
    }
    if !word.is_empty() {
        words.push(word);
    }
    words.join(" ")
}

/// A similarity score in `[0, 1]` between two labels; 1 means identical.
///
/// The default is [`TokenEditSimilarity`]; an embedding-backed scorer can be plugged in
/// wherever a `&dyn Similarity` is accepted.
pub trait Similarity: Send + Sync {
    fn similarity(&self, a: &str, b: &str) -> f64;
}

/// `1 - edit_distance / max_len` over the tokenized forms of both labels.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenEditSimilarity;

impl Similarity for TokenEditSimilarity {
    fn similarity(&self, a: &str, b: &str) -> f64 {
        let a = tokenize_label(a);
        let b = tokenize_label(b);
        let longest = a.chars().count().max(b.chars().count());
        if longest == 0 {
            return 1.0;
        }
        1.0 - edit_distance(&a, &b) as f64 / longest as f64
    }
}

/// `|X ∩ Y| / |X ∪ Y|`, defined as 0 when both sets are empty.
pub fn jaccard<T: Eq + Hash>(x: &HashSet<T>, y: &HashSet<T>) -> f64 {
    let union = x.union(y).count();
    if union == 0 {
        return 0.0;
    }
    x.intersection(y).count() as f64 / union as f64
}
