//! Feature matrix file I/O and atomic file writes.
//!
//! Matrix format: line 1 is `# schema <fingerprint>`, line 2 a tab-separated
//! header `id<TAB>label<TAB><feature names...>`, then one row per sentence
//! as `sentence_id<TAB>label<TAB>v1..vk`. Values are shortest round-trip
//! decimals, so files are byte-stable across runs.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::features::FeatureSchema;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub id: String,
    /// 0 = human, 1 = machine
    pub label: u8,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    pub rows: Vec<MatrixRow>,
}

impl FeatureMatrix {
    pub fn new(schema: FeatureSchema) -> Self {
        FeatureMatrix {
            schema,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, label: u8, values: Vec<f64>) -> Result<()> {
        if values.len() != self.schema.len() {
            return Err(Error::DimMismatch(values.len(), self.schema.len()));
        }
        self.rows.push(MatrixRow {
            id: id.into(),
            label,
            values,
        });
        Ok(())
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn values(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.values.as_slice()).collect()
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# schema {}", self.schema.fingerprint()).unwrap();
        write!(out, "id\tlabel").unwrap();
        for name in self.schema.names() {
            write!(out, "\t{name}").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "{}\t{}", row.id, row.label).unwrap();
            for v in &row.values {
                write!(out, "\t{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, path: &str) -> Result<FeatureMatrix> {
        let mut lines = text.lines().enumerate();
        let fingerprint = match lines.next() {
            Some((_, line)) if line.starts_with("# schema ") => {
                line.trim_start_matches("# schema ").to_string()
            }
            _ => return Err(Error::parse(path, 1, "expected `# schema <fingerprint>`")),
        };
        let names: Vec<String> = match lines.next() {
            Some((_, line)) => {
                let mut cols = line.split('\t');
                if cols.next() != Some("id") || cols.next() != Some("label") {
                    return Err(Error::parse(path, 2, "expected `id<TAB>label<TAB>...` header"));
                }
                cols.map(str::to_string).collect()
            }
            None => return Err(Error::parse(path, 2, "missing header line")),
        };
        let schema = FeatureSchema::from_names(&names)?;
        if schema.fingerprint() != fingerprint {
            return Err(Error::SchemaMismatch {
                expected: fingerprint,
                actual: schema.fingerprint().to_string(),
            });
        }
        let mut matrix = FeatureMatrix::new(schema);
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let id = cols
                .next()
                .filter(|c| !c.is_empty())
                .ok_or_else(|| Error::parse(path, idx + 1, "missing sentence id"))?;
            let label: u8 = cols
                .next()
                .and_then(|c| c.parse().ok())
                .filter(|l| *l <= 1)
                .ok_or_else(|| Error::parse(path, idx + 1, "label must be 0 or 1"))?;
            let mut values = Vec::with_capacity(names.len());
            for col in cols {
                let v: f64 = col
                    .parse()
                    .map_err(|_| Error::parse(path, idx + 1, format!("bad value {col:?}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(path, idx + 1, "non-finite value"));
                }
                values.push(v);
            }
            if values.len() != names.len() {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("expected {} values, got {}", names.len(), values.len()),
                ));
            }
            matrix.push(id, label, values)?;
        }
        Ok(matrix)
    }

    pub fn load(path: &Path) -> Result<FeatureMatrix> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        FeatureMatrix::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.format().as_bytes())
    }
}

/// Writes via a temp file in the target directory followed by a rename, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    tmp.write_all(bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(path.display().to_string(), e.error))?;
    Ok(())
}
