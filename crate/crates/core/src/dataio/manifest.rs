//! Dataset manifests: `path,subject_id,eye,orientation,label,role` CSV.
//! Image paths are stored relative to the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pgm::read_pgm;
use super::types::{ClassLabel, Eye, Orientation, Role};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub subject_id: String,
    pub eye: Eye,
    pub orientation: Orientation,
    pub label: ClassLabel,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    /// Directory the row paths are relative to.
    pub base_dir: PathBuf,
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    pub fn new(base_dir: impl Into<PathBuf>, rows: Vec<ManifestRow>) -> Self {
        DatasetManifest {
            base_dir: base_dir.into(),
            rows,
        }
    }

    pub fn resolve(&self, row: &ManifestRow) -> PathBuf {
        self.base_dir.join(&row.path)
    }

    pub fn counts_by_label(&self) -> BTreeMap<ClassLabel, usize> {
        let mut counts = BTreeMap::new();
        for row in &self.rows {
            *counts.entry(row.label).or_insert(0) += 1;
        }
        counts
    }

    pub fn counts_by_label_role(&self) -> BTreeMap<(ClassLabel, Role), usize> {
        let mut counts = BTreeMap::new();
        for row in &self.rows {
            *counts.entry((row.label, row.role)).or_insert(0) += 1;
        }
        counts
    }

    /// Sorted distinct subject ids carrying `label`.
    pub fn subjects(&self, label: ClassLabel) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .rows
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.subject_id.as_str())
            .collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.role == role)
    }

    /// Fails when a subject appears under both `train` and `val`.
    pub fn check_subject_leakage(&self) -> Result<()> {
        let train: BTreeSet<&str> = self.with_role(Role::Train).map(|r| r.subject_id.as_str()).collect();
        let leaked: Vec<&str> = self
            .with_role(Role::Val)
            .map(|r| r.subject_id.as_str())
            .filter(|s| train.contains(s))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if leaked.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidData(format!(
                "subjects in both train and val: {}",
                leaked.join(", ")
            )))
        }
    }

    /// Checks that every referenced image exists and decodes, and that no
    /// subject leaks across roles.
    pub fn validate(&self) -> Result<()> {
        for row in &self.rows {
            read_pgm(self.resolve(row))?;
        }
        self.check_subject_leakage()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_csv_bytes().map_err(|e| Error::format(path, e))?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_bytes(&self) -> std::result::Result<Vec<u8>, String> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        for row in &self.rows {
            writer.serialize(row).map_err(|e| e.to_string())?;
        }
        if self.rows.is_empty() {
            writer
                .write_record(["path", "subject_id", "eye", "orientation", "label", "role"])
                .map_err(|e| e.to_string())?;
        }
        writer.into_inner().map_err(|e| e.to_string())
    }

    /// Reads a manifest; row paths resolve against the file's directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        let headers = reader.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
        let expected = ["path", "subject_id", "eye", "orientation", "label", "role"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::format(path, format!("unexpected header {headers:?}")));
        }
        let rows = reader
            .deserialize()
            .collect::<std::result::Result<Vec<ManifestRow>, _>>()
            .map_err(|e| Error::format(path, e.to_string()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(DatasetManifest { base_dir, rows })
    }
}
