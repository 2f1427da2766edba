//! Immutable BM25 inverted index over a passage corpus.
//!
//! Scoring is Okapi BM25 with the non-negative idf
//! `ln(1 + (N - df + 0.5) / (df + 0.5))`, so every matching passage scores
//! strictly above zero.
//!
//! On disk an index is a directory holding two files:
//!
//! * `meta`: UTF-8 `key: value` lines (format version, source, params,
//!   counts, and the SHA-256 of `postings`).
//! * `postings`: little-endian binary. Magic `LGPOST01`, then the passage
//!   table (`u32` count; per passage the id, source, title, text, optional
//!   origin id and `u32` token length) and the term dictionary (`u32` count;
//!   per term in byte order the term, `u32` posting count and `(u32 doc,
//!   u32 tf)` pairs). Strings are `u32` byte length plus UTF-8 bytes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Passage;
use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::textproc::normalized_terms;

pub const FORMAT_VERSION: u32 = 1;
const META_MAGIC: &str = "layground-index";
const POSTINGS_MAGIC: &[u8; 8] = b"LGPOST01";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        let params = Bm25Params { k1, b };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(Error::Config(format!("bm25 k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("bm25 b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub passage_id: String,
    pub score: f64,
    pub doc: u32,
}

#[derive(Debug, Clone)]
pub struct Index {
    source: String,
    params: Bm25Params,
    passages: Vec<Passage>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    by_id: HashMap<String, u32>,
    /// Each list is sorted by `doc`.
    postings: HashMap<String, Vec<Posting>>,
}

fn term_counts(text: &str) -> (Vec<(String, u32)>, u32) {
    let terms = normalized_terms(text);
    let len = terms.len() as u32;
    let mut counts: HashMap<String, u32> = HashMap::new();
    for t in terms {
        *counts.entry(t).or_default() += 1;
    }
    (counts.into_iter().collect(), len)
}

pub fn build_index(passages: Vec<Passage>, params: Bm25Params) -> Result<Index> {
    build_index_with(passages, params, Execution::default())
}

/// Tokenization runs per passage under `exec`; postings are merged in
/// passage order so the result does not depend on scheduling.
pub fn build_index_with(passages: Vec<Passage>, params: Bm25Params, exec: Execution) -> Result<Index> {
    params.validate()?;
    if passages.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if passages.len() > u32::MAX as usize {
        return Err(Error::InvalidArgument("corpus too large for a u32 doc table".into()));
    }
    let mut by_id = HashMap::with_capacity(passages.len());
    for (i, p) in passages.iter().enumerate() {
        if by_id.insert(p.passage_id.clone(), i as u32).is_some() {
            return Err(Error::DuplicatePassageId {
                path: PathBuf::new(),
                id: p.passage_id.clone(),
            });
        }
    }

    let counted = map_ordered(&passages, exec, |p| term_counts(&p.text));
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_lengths = Vec::with_capacity(passages.len());
    for (doc, (counts, len)) in counted.into_iter().enumerate() {
        doc_lengths.push(len);
        for (term, tf) in counts {
            postings.entry(term).or_default().push(Posting { doc: doc as u32, tf });
        }
    }

    let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("corpus has no indexable tokens".into()));
    }
    let avg_doc_length = total as f64 / doc_lengths.len() as f64;
    let source = passages[0].source.clone();
    Ok(Index {
        source,
        params,
        passages,
        doc_lengths,
        avg_doc_length,
        by_id,
        postings,
    })
}

impl Index {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_count(&self) -> usize {
        self.passages.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn passage(&self, doc: u32) -> &Passage {
        &self.passages[doc as usize]
    }

    pub fn doc_length(&self, doc: u32) -> u32 {
        self.doc_lengths[doc as usize]
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.doc_count(), self.document_frequency(term))
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    fn contribution(&self, idf: f64, tf: u32, doc: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let dl = self.doc_lengths[doc as usize] as f64;
        idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / self.avg_doc_length))
    }

    /// BM25 score of one passage. Query terms are summed with multiplicity;
    /// terms absent from the passage add nothing.
    pub fn bm25_score<S: AsRef<str>>(&self, query_terms: &[S], passage_id: &str) -> Result<f64> {
        let doc = *self
            .by_id
            .get(passage_id)
            .ok_or_else(|| Error::UnknownPassage(passage_id.to_string()))?;
        let mut score = 0.0;
        for term in query_terms {
            let list = self.postings(term.as_ref());
            if let Ok(pos) = list.binary_search_by_key(&doc, |p| p.doc) {
                score += self.contribution(idf(self.doc_count(), list.len()), list[pos].tf, doc);
            }
        }
        Ok(score)
    }

    /// Top `k` passages with positive score, by descending score then
    /// ascending passage id.
    pub fn search(&self, query: &str, k: usize) -> Vec<Hit> {
        self.search_terms(&normalized_terms(query), k)
    }

    pub fn search_terms<S: AsRef<str>>(&self, terms: &[S], k: usize) -> Vec<Hit> {
        if k == 0 {
            return Vec::new();
        }
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in terms {
            let list = self.postings(term.as_ref());
            if list.is_empty() {
                continue;
            }
            let w = idf(self.doc_count(), list.len());
            for p in list {
                *acc.entry(p.doc).or_insert(0.0) += self.contribution(w, p.tf, p.doc);
            }
        }
        let mut hits: Vec<(u32, f64)> = acc.into_iter().filter(|&(_, s)| s > 0.0).collect();
        let order = |a: &(u32, f64), b: &(u32, f64)| {
            b.1.total_cmp(&a.1).then_with(|| {
                self.passages[a.0 as usize]
                    .passage_id
                    .cmp(&self.passages[b.0 as usize].passage_id)
            })
        };
        if hits.len() > k {
            hits.select_nth_unstable_by(k - 1, order);
            hits.truncate(k);
        }
        hits.sort_unstable_by(order);
        hits.into_iter()
            .map(|(doc, score)| Hit {
                passage_id: self.passages[doc as usize].passage_id.clone(),
                score,
                doc,
            })
            .collect()
    }
}

pub fn idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

// --- persistence ---

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn string(&mut self) -> Option<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).ok()
    }
}

impl Index {
    fn encode_postings(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(POSTINGS_MAGIC);
        put_u32(&mut buf, self.passages.len() as u32);
        for (p, &len) in self.passages.iter().zip(&self.doc_lengths) {
            put_str(&mut buf, &p.passage_id);
            put_str(&mut buf, &p.source);
            put_str(&mut buf, &p.title);
            put_str(&mut buf, &p.text);
            match &p.origin_doc_id {
                Some(o) => {
                    buf.push(1);
                    put_str(&mut buf, o);
                }
                None => buf.push(0),
            }
            put_u32(&mut buf, len);
        }
        let mut terms: Vec<&String> = self.postings.keys().collect();
        terms.sort();
        put_u32(&mut buf, terms.len() as u32);
        for term in terms {
            let list = &self.postings[term];
            put_str(&mut buf, term);
            put_u32(&mut buf, list.len() as u32);
            for p in list {
                put_u32(&mut buf, p.doc);
                put_u32(&mut buf, p.tf);
            }
        }
        buf
    }

    fn meta_text(&self, postings_digest: &str) -> String {
        format!(
            "{META_MAGIC}\nformat_version: {FORMAT_VERSION}\nsource: {}\nk1: {}\nb: {}\ndoc_count: {}\nterm_count: {}\navg_doc_length: {}\npostings_sha256: {postings_digest}\n",
            self.source,
            self.params.k1,
            self.params.b,
            self.doc_count(),
            self.term_count(),
            self.avg_doc_length,
        )
    }

    /// Writes the index into `dir`, replacing any previous contents only
    /// once the new files are complete.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let postings = self.encode_postings();
        let digest = format!("{:x}", Sha256::digest(&postings));
        let meta = self.meta_text(&digest);

        let staging = sibling(dir, "partial");
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        fs::write(staging.join("postings"), &postings).map_err(|e| Error::io(&staging, e))?;
        fs::write(staging.join("meta"), meta).map_err(|e| Error::io(&staging, e))?;

        let retired = sibling(dir, "old");
        if dir.exists() {
            if retired.exists() {
                fs::remove_dir_all(&retired).map_err(|e| Error::io(&retired, e))?;
            }
            fs::rename(dir, &retired).map_err(|e| Error::io(dir, e))?;
        }
        fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))?;
        if retired.exists() {
            fs::remove_dir_all(&retired).map_err(|e| Error::io(&retired, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Index> {
        let corrupt = |message: String| Error::CorruptIndex {
            path: dir.to_path_buf(),
            message,
        };
        let meta_path = dir.join("meta");
        let meta = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta = IndexMeta::parse(&meta).map_err(corrupt)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(corrupt(format!(
                "format version {} is not supported (expected {FORMAT_VERSION})",
                meta.format_version
            )));
        }
        let postings_path = dir.join("postings");
        let bytes = fs::read(&postings_path).map_err(|e| Error::io(&postings_path, e))?;
        let digest = format!("{:x}", Sha256::digest(&bytes));
        if digest != meta.postings_sha256 {
            return Err(corrupt("postings checksum does not match meta".into()));
        }
        let mut index = decode_postings(&bytes, meta.params)
            .ok_or_else(|| corrupt("truncated or inconsistent postings file".into()))?;
        index.source = meta.source;
        Ok(index)
    }
}

fn sibling(dir: &Path, suffix: &str) -> PathBuf {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "index".into());
    dir.with_file_name(format!(".{name}.{suffix}"))
}

/// Parsed contents of an index `meta` file.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMeta {
    pub format_version: u32,
    pub source: String,
    pub params: Bm25Params,
    pub doc_count: usize,
    pub term_count: usize,
    pub postings_sha256: String,
}

impl IndexMeta {
    pub fn read(dir: &Path) -> Result<IndexMeta> {
        let path = dir.join("meta");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        IndexMeta::parse(&text).map_err(|message| Error::CorruptIndex {
            path: dir.to_path_buf(),
            message,
        })
    }

    fn parse(text: &str) -> std::result::Result<IndexMeta, String> {
        let mut lines = text.lines();
        if lines.next() != Some(META_MAGIC) {
            return Err("meta header missing".into());
        }
        let fields: HashMap<&str, &str> = lines.filter_map(|l| l.split_once(": ")).collect();
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| format!("meta lacks {k}"));
        let num = |k: &str| -> std::result::Result<f64, String> {
            get(k)?.parse().map_err(|_| format!("meta {k} is not a number"))
        };
        let int = |k: &str| -> std::result::Result<usize, String> {
            get(k)?.parse().map_err(|_| format!("meta {k} is not an integer"))
        };
        Ok(IndexMeta {
            format_version: int("format_version")? as u32,
            source: get("source")?.to_string(),
            params: Bm25Params {
                k1: num("k1")?,
                b: num("b")?,
            },
            doc_count: int("doc_count")?,
            term_count: int("term_count")?,
            postings_sha256: get("postings_sha256")?.to_string(),
        })
    }
}

fn decode_postings(bytes: &[u8], params: Bm25Params) -> Option<Index> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != POSTINGS_MAGIC {
        return None;
    }
    let n = r.u32()? as usize;
    let mut passages = Vec::with_capacity(n.min(1 << 20));
    let mut doc_lengths = Vec::with_capacity(n.min(1 << 20));
    let mut by_id = HashMap::new();
    for i in 0..n {
        let passage_id = r.string()?;
        let source = r.string()?;
        let title = r.string()?;
        let text = r.string()?;
        let origin_doc_id = match r.u8()? {
            0 => None,
            1 => Some(r.string()?),
            _ => return None,
        };
        doc_lengths.push(r.u32()?);
        if by_id.insert(passage_id.clone(), i as u32).is_some() {
            return None;
        }
        passages.push(Passage {
            passage_id,
            source,
            title,
            text,
            origin_doc_id,
        });
    }
    let terms = r.u32()? as usize;
    let mut postings = HashMap::with_capacity(terms.min(1 << 20));
    for _ in 0..terms {
        let term = r.string()?;
        let m = r.u32()? as usize;
        let mut list = Vec::with_capacity(m.min(n));
        for _ in 0..m {
            let doc = r.u32()?;
            let tf = r.u32()?;
            if doc as usize >= n || tf == 0 {
                return None;
            }
            list.push(Posting { doc, tf });
        }
        postings.insert(term, list);
    }
    if r.pos != bytes.len() || n == 0 {
        return None;
    }
    let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
    Some(Index {
        source: String::new(),
        params,
        passages,
        avg_doc_length: total as f64 / n as f64,
        doc_lengths,
        by_id,
        postings,
    })
}
