//! Flat, versioned text checkpoints.
//!
//! ```text
//! fairadabn-checkpoint v1
//! <path>\t<d0>x<d1>...\t<v0> <v1> ...
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so save → load is
//! bit-exact for every finite `f64` (and for NaN/inf).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const HEADER: &str = "fairadabn-checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: BTreeMap<String, Entry>,
}

impl Checkpoint {
    pub fn insert(&mut self, path: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) {
        self.entries.insert(path.into(), Entry { shape, values });
    }

    pub fn get(&self, path: &str) -> Result<&Entry> {
        self.entries
            .get(path)
            .ok_or_else(|| Error::Checkpoint(format!("missing entry `{path}`")))
    }

    /// Entries under `prefix.`, with the prefix stripped.
    pub fn scoped(&self, prefix: &str) -> Checkpoint {
        let p = format!("{prefix}.");
        Checkpoint {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&p).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }

    pub fn merge_scoped(&mut self, prefix: &str, other: Checkpoint) {
        for (k, v) in other.entries {
            self.entries.insert(format!("{prefix}.{k}"), v);
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(HEADER);
        out.push('\n');
        for (path, e) in &self.entries {
            let shape: Vec<String> = e.shape.iter().map(usize::to_string).collect();
            let values: Vec<String> = e.values.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&format!("{path}\t{}\t{}\n", shape.join("x"), values.join(" ")));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(HEADER) => {}
            other => {
                return Err(Error::Checkpoint(format!(
                    "expected header `{HEADER}`, found {other:?}"
                )))
            }
        }
        let mut ck = Checkpoint::default();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = |msg: &str| Error::Checkpoint(format!("line {}: {msg}", n + 2));
            let mut fields = line.split('\t');
            let (Some(path), Some(shape), Some(values), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad("expected 3 tab-separated fields"));
            };
            let shape = shape
                .split('x')
                .map(|d| d.parse::<usize>().map_err(|_| bad("bad dimension")))
                .collect::<Result<Vec<_>>>()?;
            let values = values
                .split(' ')
                .filter(|v| !v.is_empty())
                .map(|v| v.parse::<f64>().map_err(|_| bad("bad value")))
                .collect::<Result<Vec<_>>>()?;
            if shape.iter().product::<usize>() != values.len() {
                return Err(bad("value count does not match shape"));
            }
            ck.insert(path, shape, values);
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
