use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::{Dataset, DatasetError, TrajectoryRecord};

/// What [`load_file`] had to repair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadReport {
    pub records: usize,
    /// A torn final line (no trailing newline, unparseable) was dropped.
    pub truncated_tail: bool,
}

/// Reads a trajectory file.
///
/// A final line without its newline that fails to parse is the remains of an
/// interrupted append: it is dropped with a warning. Any other malformed
/// line, an invalid record, or a repeated (experiment_id, step_index) is an
/// error.
pub fn load_file(path: impl AsRef<Path>) -> Result<(Vec<TrajectoryRecord>, LoadReport), DatasetError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    let mut lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    // after the last newline: empty for a clean file, else a partial line
    let tail = lines.pop().unwrap_or_default();

    let mut records = Vec::with_capacity(lines.len());
    let mut seen = HashSet::new();
    let mut push = |records: &mut Vec<TrajectoryRecord>, record: TrajectoryRecord, line: usize| {
        record.validate().map_err(|e| parse_error(path, line, e.to_string()))?;
        if !seen.insert((record.experiment_id.clone(), record.step_index)) {
            return Err(parse_error(
                path,
                line,
                format!("duplicate step {} of `{}`", record.step_index, record.experiment_id),
            ));
        }
        records.push(record);
        Ok(())
    };
    for (i, line) in lines.iter().enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let record = serde_json::from_slice(line).map_err(|e| parse_error(path, i + 1, e.to_string()))?;
        push(&mut records, record, i + 1)?;
    }
    let mut report = LoadReport::default();
    if !tail.iter().all(u8::is_ascii_whitespace) {
        match serde_json::from_slice::<TrajectoryRecord>(tail) {
            Ok(record) => push(&mut records, record, lines.len() + 1)?,
            Err(_) => {
                log::warn!(
                    "{}: dropping partial final line ({} bytes) after {} records",
                    path.display(),
                    tail.len(),
                    records.len()
                );
                report.truncated_tail = true;
            }
        }
    }
    report.records = records.len();
    Ok((records, report))
}

fn parse_error(path: &Path, line: usize, message: String) -> DatasetError {
    DatasetError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

/// Writes a whole dataset as one trajectory file, replacing `path`.
pub fn export(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    dataset.check_unique()?;
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in dataset.records() {
        writeln!(out, "{}", r.to_line()).map_err(|e| DatasetError::io(path, e))?;
    }
    let file = out.into_inner().map_err(|e| DatasetError::io(path, e.into_error()))?;
    file.sync_all().map_err(|e| DatasetError::io(path, e))
}

pub fn import(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let (records, _) = load_file(path)?;
    Dataset::from_records(records)
}

/// Append-only writer for one trajectory file.
///
/// Each record is flushed to the OS as soon as it is appended; [`sync`]
/// additionally forces it to disk. Step indices must be dense from 0 within
/// each experiment.
///
/// [`sync`]: TrajectoryWriter::sync
pub struct TrajectoryWriter {
    path: PathBuf,
    out: BufWriter<File>,
    next_step: HashMap<String, u64>,
    written: usize,
}

impl TrajectoryWriter {
    /// Starts a fresh file, replacing any existing one.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| DatasetError::io(&path, e))?;
        Ok(TrajectoryWriter {
            path,
            out: BufWriter::new(file),
            next_step: HashMap::new(),
            written: 0,
        })
    }

    /// Opens `path` for appending, creating it if needed. A partial final
    /// line left by an interrupted append is cut off first.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref().to_path_buf();
        let mut next_step = HashMap::new();
        let mut written = 0;
        if path.exists() {
            let bytes = std::fs::read(&path).map_err(|e| DatasetError::io(&path, e))?;
            if bytes.last().is_some_and(|&b| b != b'\n') {
                let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
                log::warn!(
                    "{}: truncating {} bytes of partial final line",
                    path.display(),
                    bytes.len() - keep
                );
                let file = OpenOptions::new()
                    .write(true)
                    .open(&path)
                    .map_err(|e| DatasetError::io(&path, e))?;
                file.set_len(keep as u64).map_err(|e| DatasetError::io(&path, e))?;
            }
            let (records, _) = load_file(&path)?;
            written = records.len();
            for r in records {
                let next = next_step.entry(r.experiment_id).or_insert(0);
                *next = (*next).max(r.step_index + 1);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| DatasetError::io(&path, e))?;
        Ok(TrajectoryWriter {
            path,
            out: BufWriter::new(file),
            next_step,
            written,
        })
    }

    pub fn append(&mut self, record: &TrajectoryRecord) -> Result<(), DatasetError> {
        record.validate()?;
        let expected = self.next_step.get(&record.experiment_id).copied().unwrap_or(0);
        if record.step_index != expected {
            return Err(DatasetError::InvalidRecord(format!(
                "step {} of `{}` out of order (expected {expected})",
                record.step_index, record.experiment_id
            )));
        }
        let mut line = record.to_line();
        line.push('\n');
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|e| DatasetError::io(&self.path, e))?;
        self.next_step.insert(record.experiment_id.clone(), expected + 1);
        self.written += 1;
        Ok(())
    }

    /// Forces appended records to stable storage.
    pub fn sync(&mut self) -> Result<(), DatasetError> {
        self.out.flush().map_err(|e| DatasetError::io(&self.path, e))?;
        self.out.get_ref().sync_all().map_err(|e| DatasetError::io(&self.path, e))
    }

    /// Records in the file, including any present when it was opened.
    pub fn len(&self) -> usize {
        self.written
    }

    pub fn is_empty(&self) -> bool {
        self.written == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
