use std::path::Path;

use dsegym_core::AgentKind;
use serde::{Deserialize, Serialize};

use crate::{load_file, merge, Dataset, DatasetError, SCHEMA_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Sidecar extension marking a trial whose trajectory stops early because of
/// an error; the file holds the error message.
pub const FAILURE_EXTENSION: &str = "error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// File name relative to the manifest's directory.
    pub file: String,
    pub records: usize,
    #[serde(default)]
    pub truncated_tail: bool,
    /// Why the trial stopped early, if it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub agent_type: AgentKind,
    pub experiment_id: String,
    pub count: usize,
}

/// Index of the trajectory files making up a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub env_id: Option<String>,
    pub total_records: usize,
    pub files: Vec<ManifestEntry>,
    pub provenance: Vec<ProvenanceEntry>,
}

impl Manifest {
    /// Loads every `*.jsonl` file in `dir` (sorted by name), merges them and
    /// describes the result. `{stem}.error` sidecars flag partial trials.
    pub fn build(dir: impl AsRef<Path>) -> Result<(Manifest, Dataset), DatasetError> {
        let dir = dir.as_ref();
        let mut names: Vec<String> = std::fs::read_dir(dir)
            .map_err(|e| DatasetError::io(dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".jsonl"))
            .collect();
        names.sort();
        let mut files = Vec::with_capacity(names.len());
        let mut parts = Vec::with_capacity(names.len());
        for name in names {
            let path = dir.join(&name);
            let (records, report) = load_file(&path)?;
            let sidecar = path.with_extension(FAILURE_EXTENSION);
            let failure = if sidecar.exists() {
                let msg = std::fs::read_to_string(&sidecar).map_err(|e| DatasetError::io(&sidecar, e))?;
                Some(msg.trim().to_string())
            } else {
                None
            };
            files.push(ManifestEntry {
                file: name,
                records: records.len(),
                truncated_tail: report.truncated_tail,
                failure,
            });
            parts.push(Dataset::from_records(records)?);
        }
        let dataset = merge(&parts)?;
        Ok((Manifest::describe(&dataset, files), dataset))
    }

    fn describe(dataset: &Dataset, files: Vec<ManifestEntry>) -> Manifest {
        Manifest {
            schema_version: SCHEMA_VERSION,
            env_id: dataset.env_id().map(str::to_string),
            total_records: dataset.len(),
            files,
            provenance: dataset
                .provenance()
                .into_iter()
                .map(|((agent_type, experiment_id), count)| ProvenanceEntry {
                    agent_type,
                    experiment_id,
                    count,
                })
                .collect(),
        }
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| DatasetError::io(&path, e))
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Manifest, DatasetError> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
            path,
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Loads the member files and checks them against the recorded counts.
    pub fn load_dataset(&self, dir: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
        let dir = dir.as_ref();
        let mut parts = Vec::with_capacity(self.files.len());
        for entry in &self.files {
            let (records, _) = load_file(dir.join(&entry.file))?;
            if records.len() != entry.records {
                return Err(DatasetError::Invalid(format!(
                    "{} has {} records, manifest says {}",
                    entry.file,
                    records.len(),
                    entry.records
                )));
            }
            parts.push(Dataset::from_records(records)?);
        }
        merge(&parts)
    }

    /// Provenance counts always sum to the record count.
    pub fn is_consistent(&self) -> bool {
        self.provenance.iter().map(|p| p.count).sum::<usize>() == self.total_records
            && self.files.iter().map(|f| f.records).sum::<usize>() == self.total_records
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::record;
    use crate::TrajectoryWriter;

    #[test]
    fn build_write_read_load() {
        let dir = tempfile::tempdir().unwrap();
        for (id, agent, n) in [("b", AgentKind::GA, 4u64), ("a", AgentKind::ACO, 3)] {
            let mut w = TrajectoryWriter::create(dir.path().join(format!("{id}.jsonl"))).unwrap();
            for i in 0..n {
                w.append(&record(id, agent, i, 1.0)).unwrap();
            }
        }
        std::fs::write(dir.path().join("b.error"), "simulator crashed\n").unwrap();
        let (m, d) = Manifest::build(dir.path()).unwrap();
        assert_eq!(m.total_records, 7);
        assert!(m.is_consistent());
        assert_eq!(m.files[0].file, "a.jsonl");
        assert_eq!(m.files[1].failure.as_deref(), Some("simulator crashed"));
        assert_eq!(m.env_id.as_deref(), Some("dram"));
        m.write(dir.path()).unwrap();
        let back = Manifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.load_dataset(dir.path()).unwrap(), d);
    }
}
