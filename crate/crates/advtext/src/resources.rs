//! Immutable word-embedding and word-frequency tables.
//!
//! The loaders accept tables of any size; the file formats, not the licensed
//! full-scale contents (GloVe-300, Web 1T), are the contract.

use std::collections::HashMap;
use std::path::Path;

use crate::{Error, Result};

/// word -> dense vector, all of the same dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First insert wins; duplicates are ignored.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch(vector.len(), self.dim));
        }
        if !vector.iter().all(|v| v.is_finite()) {
            return Err(Error::Invalid("non-finite embedding component".into()));
        }
        self.entries.entry(word.into()).or_insert(vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    /// Lookup on the normalized form first, falling back to the surface form.
    pub fn lookup(&self, norm: &str, surface: &str) -> Option<&[f64]> {
        self.get(norm).or_else(|| self.get(surface))
    }
}

/// word -> non-negative occurrence count. Absent words count as 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    entries: HashMap<String, u64>,
}

impl FrequencyTable {
    pub fn new() -> Self {
        FrequencyTable::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, word: impl Into<String>, count: u64) {
        self.entries.entry(word.into()).or_insert(count);
    }

    pub fn get(&self, word: &str) -> u64 {
        self.entries.get(word).copied().unwrap_or(0)
    }

    /// Lookup on the normalized form first, falling back to the surface form.
    pub fn lookup(&self, norm: &str, surface: &str) -> u64 {
        match self.entries.get(norm) {
            Some(count) => *count,
            None => self.get(surface),
        }
    }
}

/// Parses the GloVe text format: one `word v1 v2 ... vd` entry per line,
/// space-separated decimals. The dimensionality is inferred from the first
/// line unless `expected_dim` pins it.
pub fn parse_embeddings(text: &str, path: &str, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = expected_dim.map(EmbeddingTable::new);
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let word = fields
            .next()
            .ok_or_else(|| Error::parse(path, idx + 1, "missing word"))?;
        let mut vector = Vec::new();
        for field in fields {
            let value: f64 = field.parse().map_err(|_| {
                Error::parse(path, idx + 1, format!("non-numeric component {field:?}"))
            })?;
            if !value.is_finite() {
                return Err(Error::parse(path, idx + 1, "non-finite component"));
            }
            vector.push(value);
        }
        if vector.is_empty() {
            return Err(Error::parse(path, idx + 1, "entry has no vector components"));
        }
        let table = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
        if vector.len() != table.dim {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("expected {} components, got {}", table.dim, vector.len()),
            ));
        }
        table.insert(word, vector)?;
    }
    Ok(table.unwrap_or_else(|| EmbeddingTable::new(0)))
}

pub fn load_embeddings(path: &Path, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_embeddings(&text, &path.display().to_string(), expected_dim)
}

/// Parses the unigram frequency format: `word<TAB>count`, one entry per line.
pub fn parse_frequencies(text: &str, path: &str) -> Result<FrequencyTable> {
    let mut table = FrequencyTable::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 || cols[0].is_empty() {
            return Err(Error::parse(path, idx + 1, "expected `word<TAB>count`"));
        }
        let count: u64 = cols[1]
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("bad count {:?}", cols[1])))?;
        table.insert(cols[0], count);
    }
    Ok(table)
}

pub fn load_frequencies(path: &Path) -> Result<FrequencyTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_frequencies(&text, &path.display().to_string())
}

/// Euclidean distance between two equal-length vectors. Lower distance means
/// higher word similarity.
pub fn euclidean_distance(v1: &[f64], v2: &[f64]) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::DimMismatch(v1.len(), v2.len()));
    }
    Ok(squared_distance(v1, v2).sqrt())
}

pub(crate) fn squared_distance(v1: &[f64], v2: &[f64]) -> f64 {
    v1.iter()
        .zip(v2)
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_embeddings_infers_dim() {
        let table = parse_embeddings("a 1 0\nb 0 1\n", "e", None).unwrap();
        assert_eq!(table.dim(), 2);
        assert_eq!(table.len(), 2);
        assert_eq!(table.get("a"), Some(&[1.0, 0.0][..]));
    }

    #[test]
    fn parse_embeddings_rejects_inconsistent_dim() {
        let err = parse_embeddings("a 1 0\nb 1 0 0\n", "e", None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn parse_embeddings_rejects_non_numeric() {
        assert!(parse_embeddings("a x y\n", "e", None).is_err());
    }

    #[test]
    fn parse_embeddings_first_duplicate_wins() {
        let table = parse_embeddings("a 1 0\na 9 9\n", "e", None).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.get("a"), Some(&[1.0, 0.0][..]));
    }

    #[test]
    fn frequency_lookup_defaults_to_zero() {
        let table = parse_frequencies("responses\t19000000\nreactions\t7000000\n", "f").unwrap();
        assert_eq!(table.get("responses"), 19_000_000);
        assert_eq!(table.get("reactions"), 7_000_000);
        assert_eq!(table.get("knee-jerk"), 0);
    }

    #[test]
    fn frequency_parse_errors_carry_line_numbers() {
        let err = parse_frequencies("a\t1\nb two\n", "f").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn distance_basics() {
        assert_eq!(
            euclidean_distance(&[0.0, 0.0, 0.0], &[3.0, 4.0, 0.0]).unwrap(),
            5.0
        );
        let v = [0.3, -1.2, 7.0];
        assert_eq!(euclidean_distance(&v, &v).unwrap(), 0.0);
        assert!(euclidean_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn frequency_round_trip() {
        let text = "a\t3\nb\t0\n";
        let table = parse_frequencies(text, "f").unwrap();
        let mut rendered: Vec<(String, u64)> = table
            .entries
            .iter()
            .map(|(w, c)| (w.clone(), *c))
            .collect();
        rendered.sort();
        let formatted: String = rendered
            .iter()
            .map(|(w, c)| format!("{w}\t{c}\n"))
            .collect();
        assert_eq!(parse_frequencies(&formatted, "f").unwrap(), table);
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-100.0f64..100.0, 3)
    }

    proptest! {
        #[test]
        fn distance_axioms(a in vec3(), b in vec3(), c in vec3()) {
            let dab = euclidean_distance(&a, &b).unwrap();
            let dba = euclidean_distance(&b, &a).unwrap();
            prop_assert_eq!(dab, dba);
            prop_assert_eq!(euclidean_distance(&a, &a).unwrap(), 0.0);
            let dac = euclidean_distance(&a, &c).unwrap();
            let dcb = euclidean_distance(&c, &b).unwrap();
            prop_assert!(dab <= dac + dcb + 1e-9);
        }

        #[test]
        fn squared_distance_preserves_ranking(a in vec3(), b in vec3(), c in vec3()) {
            let full = euclidean_distance(&a, &b).unwrap() < euclidean_distance(&a, &c).unwrap();
            let fast = squared_distance(&a, &b) < squared_distance(&a, &c);
            prop_assert_eq!(full, fast);
        }
    }
}
