use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Ordered, duplicate-free list of label names with stable indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelList {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelList {
    /// Names are lowercased and trimmed; duplicates and empty names are rejected.
    pub fn new<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut out = Vec::new();
        let mut index = HashMap::new();
        for n in names {
            let key = normalize(n.as_ref());
            if key.is_empty() {
                return Err(Error::InvalidParameter("empty label name".into()));
            }
            if index.insert(key.clone(), out.len()).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate label `{key}`")));
            }
            out.push(key);
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter("label list is empty".into()));
        }
        Ok(Self { names: out, index })
    }

    /// One label per line, UTF-8; blank lines are skipped.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
            .map_err(|e| Error::parse(path.display().to_string(), e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = self.names.join("\n");
        s.push('\n');
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(&normalize(name)).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Open-set measurement alphabet and closed-set evaluation classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSpace {
    pub open_set: LabelList,
    pub closed_set: LabelList,
}

impl LabelSpace {
    pub fn new(open_set: LabelList, closed_set: LabelList) -> Self {
        Self {
            open_set,
            closed_set,
        }
    }

    /// Keeps the raw tags that name an open-set label, as indices.
    pub fn filter_tags<S: AsRef<str>>(&self, raw_tags: &[S]) -> BTreeSet<usize> {
        raw_tags
            .iter()
            .filter_map(|t| self.open_set.index_of(t.as_ref()))
            .collect()
    }
}
