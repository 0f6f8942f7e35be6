//! Line-delimited dataset persistence: one JSON record object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::DatasetError;
use crate::model::KitgiRecord;
use crate::validate::validate_record;

/// Serializes one record as a single line, without the trailing newline.
pub fn encode_record(record: &KitgiRecord) -> String {
    serde_json::to_string(record).expect("records always serialize")
}

pub fn decode_record(line: &str, line_no: usize) -> Result<KitgiRecord, DatasetError> {
    serde_json::from_str(line).map_err(|e| DatasetError::Parse {
        line: line_no,
        message: e.to_string(),
    })
}

fn check(record: &KitgiRecord, line: usize) -> Result<(), DatasetError> {
    let violations = validate_record(record);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(DatasetError::Invalid {
            line,
            record_id: record.id().to_string(),
            violations,
        })
    }
}

/// Writes every record to `path`, replacing the file atomically.
///
/// Refuses to write anything if a record fails validation.
pub fn save_dataset(records: &[KitgiRecord], path: &Path) -> Result<usize, DatasetError> {
    for (i, record) in records.iter().enumerate() {
        check(record, i + 1)?;
    }
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut out = BufWriter::new(tmp.as_file());
        for record in records {
            out.write_all(encode_record(record).as_bytes())
                .map_err(io_err)?;
            out.write_all(b"\n").map_err(io_err)?;
        }
        out.flush().map_err(io_err)?;
    }
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(records.len())
}

/// Reads and validates every record. Blank lines are ignored; line numbers in
/// errors are 1-based and count blank lines.
pub fn load_dataset(path: &Path) -> Result<Vec<KitgiRecord>, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = decode_record(&line, i + 1)?;
        check(&record, i + 1)?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::look_watch_window;

    #[test]
    fn empty_dataset_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        assert_eq!(save_dataset(&[], &path).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        assert!(load_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn truncated_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let line = encode_record(&look_watch_window());
        std::fs::write(&path, &line[..line.len() / 2]).unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(
            err.to_string().starts_with("line 1: parse failure"),
            "{err}"
        );
    }

    #[test]
    fn invalid_record_is_rejected_on_load_and_save() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("invalid.jsonl");
        let mut record = look_watch_window();
        record.concept_set.concepts.truncate(2);
        record.retrieved_knowledge = Default::default();
        record.filtered_knowledge = Default::default();
        record.decisions.clear();
        assert!(matches!(
            save_dataset(&[record.clone()], &path),
            Err(DatasetError::Invalid { line: 1, .. })
        ));
        std::fs::write(&path, format!("{}\n", encode_record(&record))).unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(
            err.to_string().contains("ConceptSetSizeOutOfRange"),
            "{err}"
        );
    }

    #[test]
    fn field_names_on_the_wire() {
        let value: serde_json::Value =
            serde_json::from_str(&encode_record(&look_watch_window())).unwrap();
        let keys: Vec<_> = value.as_object().unwrap().keys().cloned().collect();
        assert_eq!(
            keys,
            [
                "concept_set",
                "retrieved_knowledge",
                "filtered_knowledge",
                "sentence_full",
                "sentence_filtered",
                "sentence_none",
                "decisions",
                "annotations"
            ]
        );
    }
}
