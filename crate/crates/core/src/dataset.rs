//! Dataset, summary and pipeline-output record formats (JSON lines).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::assemble::PassageRef;
use crate::corpus::BiblioRecord;
use crate::error::{Error, Result};
use crate::grounding::{RemovalEvent, Trigger};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub title: String,
    pub first_author_surname: String,
    pub year: i32,
    pub article: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub reference_summary: String,
    /// Sub-corpus label (e.g. journal) used for per-subset aggregates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<String>,
}

impl DatasetRecord {
    pub fn biblio(&self) -> BiblioRecord {
        BiblioRecord {
            doc_id: self.id.clone(),
            title: self.title.clone(),
            first_author_surname: self.first_author_surname.clone(),
            year: self.year,
        }
    }
}

/// One line of a fine-tuning input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedRecord {
    pub id: String,
    pub input_text: String,
    pub search_marker_offset: usize,
    pub global_attention_offsets: Vec<usize>,
    pub passages_used: Vec<PassageRef>,
    pub ref_string: String,
}

/// One line of a zero-shot prompt file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub system: String,
    pub user: String,
    #[serde(default)]
    pub passages_used: Vec<PassageRef>,
}

/// The part of either output record that usage statistics need.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct UsageRecord {
    pub id: String,
    pub passages_used: Vec<PassageRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedEntry {
    pub source: String,
    pub id: String,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub source: String,
    pub id: String,
    pub score: f64,
}

/// Per-document audit trail of a grounding run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub id: String,
    /// Pool after deduplication and self-removal, in retrieval order.
    pub pooled: Vec<RetrievedEntry>,
    pub removed: Vec<RemovalEvent>,
    pub ranked: Vec<RankedEntry>,
    pub included: Vec<PassageRef>,
    pub doc_tokens_used: usize,
    pub grounding_tokens_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSummary {
    pub id: String,
    pub summary: String,
}

/// A reference summary; accepts dataset records as well as `{id, summary}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReferenceSummary {
    pub id: String,
    #[serde(alias = "reference_summary")]
    pub summary: String,
    #[serde(default)]
    pub subset: Option<String>,
}

/// Reads JSON lines into `T`, skipping blank lines. Parse failures name the
/// line and, when it can be recovered, the record id.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str::<T>(&line).map_err(|e| {
            let id = serde_json::from_str::<serde_json::Value>(&line)
                .ok()
                .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(String::from));
            let message = match id {
                Some(id) => format!("record {id:?}: {e}"),
                None => e.to_string(),
            };
            Error::MalformedLine {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            }
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let records: Vec<DatasetRecord> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    for r in &records {
        if r.id.trim().is_empty() {
            return Err(Error::record("", "dataset record with empty id"));
        }
        if !seen.insert(r.id.as_str()) {
            return Err(Error::record(&r.id, "duplicate dataset id"));
        }
        r.biblio().validate()?;
    }
    Ok(records)
}
