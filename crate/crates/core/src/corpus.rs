//! Grounding corpora: passage files, definition stores, sentence chunking and
//! bibliographic reference strings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::{normalized_terms, split_sentences};

pub const DEFAULT_SENTENCES_PER_CHUNK: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub source: String,
    pub title: String,
    pub text: String,
    pub origin_doc_id: Option<String>,
}

/// One line of a passage file.
#[derive(Debug, Serialize, Deserialize)]
struct PassageLine {
    id: String,
    #[serde(default)]
    title: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin_doc_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefinitionEntry {
    /// Normalized tokens joined by single spaces.
    pub term: String,
    pub definition: String,
}

#[derive(Debug, Deserialize)]
struct DefinitionLine {
    term: String,
    definition: String,
}

#[derive(Debug, Clone, Default)]
pub struct DefinitionSet {
    pub entries: Vec<DefinitionEntry>,
    /// Normalized terms that appeared more than once; the last entry won.
    pub duplicates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiblioRecord {
    pub doc_id: String,
    pub title: String,
    pub first_author_surname: String,
    pub year: i32,
}

/// Splits `body` into consecutive windows of `sentences_per_chunk` sentences.
///
/// Passage ids are `{doc_id}#{n}` with `n` counting from zero. The source is
/// left empty; it is stamped when the passages are loaded as a corpus.
pub fn chunk_document(doc_id: &str, title: &str, body: &str, sentences_per_chunk: usize) -> Result<Vec<Passage>> {
    if sentences_per_chunk == 0 {
        return Err(Error::InvalidArgument("sentences_per_chunk must be at least 1".into()));
    }
    let sentences = split_sentences(body);
    Ok(sentences
        .chunks(sentences_per_chunk)
        .enumerate()
        .map(|(n, window)| Passage {
            passage_id: format!("{doc_id}#{n}"),
            source: String::new(),
            title: title.to_string(),
            text: window.iter().map(|s| s.text).collect::<Vec<_>>().join(" "),
            origin_doc_id: Some(doc_id.to_string()),
        })
        .collect())
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, line)| (i + 1, line.map_err(|e| Error::io(path, e)))))
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::MalformedLine {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads a JSON-lines passage file. Blank lines are skipped.
pub fn load_passages(path: &Path, source: &str) -> Result<Vec<Passage>> {
    let mut seen = std::collections::HashSet::new();
    let mut passages = Vec::new();
    for (lineno, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PassageLine = serde_json::from_str(&line).map_err(|e| malformed(path, lineno, e.to_string()))?;
        if rec.text.trim().is_empty() {
            return Err(malformed(path, lineno, format!("passage {:?} has empty text", rec.id)));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicatePassageId {
                path: path.to_path_buf(),
                id: rec.id,
            });
        }
        passages.push(Passage {
            passage_id: rec.id,
            source: source.to_string(),
            title: rec.title,
            text: rec.text,
            origin_doc_id: rec.origin_doc_id,
        });
    }
    Ok(passages)
}

pub fn write_passages(path: &Path, passages: &[Passage]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for p in passages {
        let line = PassageLine {
            id: p.passage_id.clone(),
            title: p.title.clone(),
            text: p.text.clone(),
            origin_doc_id: p.origin_doc_id.clone(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn normalize_term(term: &str) -> String {
    normalized_terms(term).join(" ")
}

/// Reads a JSON-lines definition file keyed by normalized term.
pub fn load_definitions(path: &Path) -> Result<DefinitionSet> {
    let mut by_term: IndexMap<String, String> = IndexMap::new();
    let mut duplicates = Vec::new();
    for (lineno, line) in open_lines(path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DefinitionLine = serde_json::from_str(&line).map_err(|e| malformed(path, lineno, e.to_string()))?;
        let term = normalize_term(&rec.term);
        if term.is_empty() {
            return Err(malformed(
                path,
                lineno,
                format!("term {:?} has no word characters", rec.term),
            ));
        }
        if rec.definition.trim().is_empty() {
            return Err(malformed(
                path,
                lineno,
                format!("term {:?} has an empty definition", rec.term),
            ));
        }
        if by_term.insert(term.clone(), rec.definition).is_some() {
            log::warn!(
                "{}:{lineno}: duplicate definition for {term:?}, keeping the later one",
                path.display()
            );
            duplicates.push(term);
        }
    }
    Ok(DefinitionSet {
        entries: by_term
            .into_iter()
            .map(|(term, definition)| DefinitionEntry { term, definition })
            .collect(),
        duplicates,
    })
}

impl BiblioRecord {
    pub fn validate(&self) -> Result<()> {
        if !(1500..=2100).contains(&self.year) {
            return Err(Error::record(
                &self.doc_id,
                format!("year {} outside 1500..=2100", self.year),
            ));
        }
        if self.title.trim().is_empty() {
            return Err(Error::record(&self.doc_id, "empty title"));
        }
        Ok(())
    }
}

/// `{surname}, et al. ({year}). {title}.`
pub fn format_reference_string(rec: &BiblioRecord) -> Result<String> {
    rec.validate()?;
    Ok(format!(
        "{}, et al. ({}). {}.",
        rec.first_author_surname, rec.year, rec.title
    ))
}
