//! Append-only JSON-lines log of accuracy records, one file per dataset.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::curves::AccuracyRecord;
use crate::error::{Error, Result};

pub type TaskKey = (usize, usize, usize);

#[derive(Debug)]
pub struct ResultStore {
    path: PathBuf,
    dataset: String,
    records: BTreeMap<TaskKey, AccuracyRecord>,
    file: Option<File>,
}

impl ResultStore {
    pub fn path_for(dir: &Path) -> PathBuf {
        dir.join("records.jsonl")
    }

    /// Opens (or creates) the store in `dir`. A trailing line left
    /// incomplete by an interrupted write is discarded.
    pub fn open(dir: &Path, dataset: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = Self::path_for(dir);
        let mut records = BTreeMap::new();
        if path.exists() {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let complete = match text.rfind('\n') {
                Some(i) => i + 1,
                None => 0,
            };
            if complete < text.len() {
                let f = OpenOptions::new().write(true).open(&path).map_err(|e| Error::io(&path, e))?;
                f.set_len(complete as u64).map_err(|e| Error::io(&path, e))?;
            }
            for (i, line) in text[..complete].lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let r: AccuracyRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                    row: i + 1,
                    message: format!("{}: {e}", path.display()),
                })?;
                if r.dataset != dataset {
                    return Err(Error::invalid(format!(
                        "{} holds records of dataset {}, expected {dataset}",
                        path.display(),
                        r.dataset
                    )));
                }
                records.entry(r.key()).or_insert(r);
            }
        }
        Ok(ResultStore {
            path,
            dataset: dataset.to_string(),
            records,
            file: None,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn dataset(&self) -> &str {
        &self.dataset
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, key: TaskKey) -> bool {
        self.records.contains_key(&key)
    }

    /// Appends a record unless its key is already stored. Returns whether it
    /// was written.
    pub fn append(&mut self, record: AccuracyRecord) -> Result<bool> {
        if record.dataset != self.dataset {
            return Err(Error::invalid(format!(
                "record for {} appended to store of {}",
                record.dataset, self.dataset
            )));
        }
        if self.records.contains_key(&record.key()) {
            return Ok(false);
        }
        if self.file.is_none() {
            let f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| Error::io(&self.path, e))?;
            self.file = Some(f);
        }
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        let f = self.file.as_mut().unwrap();
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        f.flush().map_err(|e| Error::io(&self.path, e))?;
        self.records.insert(record.key(), record);
        Ok(true)
    }

    /// Records ordered by (size, fold, rep).
    pub fn records(&self) -> Vec<AccuracyRecord> {
        self.records.values().cloned().collect()
    }

    /// Expected keys absent from the store, in order.
    pub fn missing(&self, expected: impl IntoIterator<Item = TaskKey>) -> Vec<TaskKey> {
        expected.into_iter().filter(|k| !self.records.contains_key(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::MethodId;

    fn rec(size: usize, fold: usize, rep: usize) -> AccuracyRecord {
        AccuracyRecord {
            dataset: "d".into(),
            size,
            fold,
            rep,
            winning_method: MethodId::NaiveBayes,
            accuracy: 0.5,
            per_method: Default::default(),
        }
    }

    #[test]
    fn append_is_idempotent_and_persistent() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ResultStore::open(dir.path(), "d").unwrap();
        assert!(s.append(rec(10, 0, 0)).unwrap());
        assert!(!s.append(rec(10, 0, 0)).unwrap());
        assert!(s.append(rec(10, 0, 1)).unwrap());
        drop(s);
        let s = ResultStore::open(dir.path(), "d").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.missing([(10, 0, 0), (10, 1, 0)]), vec![(10, 1, 0)]);
    }

    #[test]
    fn truncated_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ResultStore::open(dir.path(), "d").unwrap();
        s.append(rec(10, 0, 0)).unwrap();
        drop(s);
        let path = ResultStore::path_for(dir.path());
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"dataset\":\"d\",\"si").unwrap();
        drop(f);
        let mut s = ResultStore::open(dir.path(), "d").unwrap();
        assert_eq!(s.len(), 1);
        s.append(rec(20, 0, 0)).unwrap();
        drop(s);
        assert_eq!(ResultStore::open(dir.path(), "d").unwrap().len(), 2);
    }

    #[test]
    fn foreign_dataset_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ResultStore::open(dir.path(), "d").unwrap();
        s.append(rec(10, 0, 0)).unwrap();
        drop(s);
        assert!(ResultStore::open(dir.path(), "other").is_err());
    }
}
