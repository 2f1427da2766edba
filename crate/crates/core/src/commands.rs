//! The `build-index`, `ground`, `eval`, `report` and `chunk` commands.
//!
//! Each command is deterministic given its configuration and input files.
//! Documents are processed on a bounded worker pool but outputs are always
//! written in input order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::assemble::{build_model_input, build_zero_shot_prompt};
use crate::config::{Mode, RunConfig};
use crate::corpus::{chunk_document, format_reference_string, load_definitions, load_passages, write_passages};
use crate::dataset::{
    load_dataset, read_jsonl, write_jsonl, DatasetRecord, GeneratedSummary, GroundedRecord, PromptRecord,
    ProvenanceRecord, RankedEntry, ReferenceSummary, RetrievedEntry, UsageRecord,
};
use crate::error::{Error, Result};
use crate::exec::{try_map_ordered, with_workers, Execution};
use crate::grounding::{ground_document, CorpusKind, DefinitionDictionary, GroundingSources};
use crate::index::{build_index_with, Index};
use crate::metrics::{score_summary, FamiliarWordList};
use crate::report::{MetricReport, ReportTables};
use crate::rerank::{rank_pool, PassageScorer};
use crate::textproc::{TokenCounter, WordTokenizer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltIndex {
    pub corpus: String,
    pub dir: PathBuf,
    pub doc_count: usize,
}

pub fn cmd_build_index(cfg: &RunConfig) -> Result<Vec<BuiltIndex>> {
    let mut built = Vec::new();
    for corpus in &cfg.corpora {
        match corpus.kind {
            CorpusKind::Searchable => {
                let passages = load_passages(&corpus.path, &corpus.name)?;
                let index = build_index_with(passages, cfg.bm25, Execution::default())
                    .map_err(|e| Error::record(&corpus.name, e.to_string()))?;
                let dir = cfg.index_path(&corpus.name);
                if let Some(parent) = dir.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                index.save(&dir)?;
                log::info!(
                    "indexed {} passages of {:?} into {}",
                    index.doc_count(),
                    corpus.name,
                    dir.display()
                );
                built.push(BuiltIndex {
                    corpus: corpus.name.clone(),
                    dir,
                    doc_count: index.doc_count(),
                });
            }
            CorpusKind::Definitional => {
                // Lookup table only; loading validates the file.
                let defs = load_definitions(&corpus.path)?;
                log::info!("{:?}: {} definitions, no index needed", corpus.name, defs.entries.len());
            }
        }
    }
    Ok(built)
}

/// Loaded indexes and definition dictionaries for a run.
pub struct LoadedSources {
    pub indexes: HashMap<String, Index>,
    pub dictionaries: BTreeMap<String, DefinitionDictionary>,
}

impl LoadedSources {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let mut indexes = HashMap::new();
        let mut dictionaries = BTreeMap::new();
        for corpus in &cfg.corpora {
            match corpus.kind {
                CorpusKind::Searchable => {
                    let dir = cfg.index_path(&corpus.name);
                    if !dir.join("meta").exists() {
                        return Err(Error::MissingIndex(format!(
                            "{} (run build-index first; expected {})",
                            corpus.name,
                            dir.display()
                        )));
                    }
                    let index = Index::load(&dir)?;
                    if index.params() != cfg.bm25 {
                        log::warn!(
                            "index {:?} was built with {:?}, config asks for {:?}; using the index's parameters",
                            corpus.name,
                            index.params(),
                            cfg.bm25
                        );
                    }
                    indexes.insert(corpus.name.clone(), index);
                }
                CorpusKind::Definitional => {
                    let defs = load_definitions(&corpus.path)?;
                    dictionaries.insert(corpus.name.clone(), DefinitionDictionary::new(&defs.entries));
                }
            }
        }
        Ok(LoadedSources { indexes, dictionaries })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundOutput {
    Grounded(GroundedRecord),
    Prompt(PromptRecord),
}

/// Runs retrieval, re-ranking and assembly for one dataset record.
pub fn ground_record(
    record: &DatasetRecord,
    cfg: &RunConfig,
    sources: &LoadedSources,
    scorer: &dyn PassageScorer,
    tok: &dyn TokenCounter,
) -> Result<(GroundOutput, ProvenanceRecord)> {
    let budgets = cfg.budgets();
    let grounding = cfg.grounding();
    let src = GroundingSources {
        indexes: &sources.indexes,
        dictionaries: &sources.dictionaries,
    };
    let pool = ground_document(
        &record.id,
        &record.article,
        &record.abstract_text,
        &src,
        &grounding,
        tok,
    )?;
    let query = tok.take_lead(&record.article, budgets.lead_budget);
    let ranked = rank_pool(&pool, query, scorer)?;
    let ref_string = format_reference_string(&record.biblio())?;

    let (output, included, doc_tokens_used, grounding_tokens_used) = match cfg.mode {
        Mode::FinetuneInput => {
            let input = build_model_input(&record.article, &ranked, &ref_string, &budgets, tok)?;
            let included = input.passages_used.clone();
            let (d, g) = (input.doc_tokens_used, input.grounding_tokens_used);
            let rec = GroundedRecord {
                id: record.id.clone(),
                input_text: input.text,
                search_marker_offset: input.search_marker_offset,
                global_attention_offsets: input.global_attention_offsets,
                passages_used: input.passages_used,
                ref_string,
            };
            (GroundOutput::Grounded(rec), included, d, g)
        }
        Mode::ZeroShotPrompt => {
            let p = build_zero_shot_prompt(&record.article, &ranked, &budgets, tok)?;
            let rec = PromptRecord {
                id: record.id.clone(),
                system: p.prompt.system,
                user: p.prompt.user,
                passages_used: p.passages_used.clone(),
            };
            (
                GroundOutput::Prompt(rec),
                p.passages_used,
                p.doc_tokens_used,
                p.grounding_tokens_used,
            )
        }
    };

    let provenance = ProvenanceRecord {
        id: record.id.clone(),
        pooled: pool
            .iter()
            .map(|(p, prov)| RetrievedEntry {
                source: p.source.clone(),
                id: p.passage_id.clone(),
                trigger: prov.trigger.clone(),
            })
            .collect(),
        removed: pool.removed.clone(),
        ranked: ranked
            .iter()
            .map(|c| RankedEntry {
                source: c.passage.source.clone(),
                id: c.passage.passage_id.clone(),
                score: c.score,
            })
            .collect(),
        included,
        doc_tokens_used,
        grounding_tokens_used,
    };
    Ok((output, provenance))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundRun {
    pub outputs: Vec<GroundOutput>,
    pub provenance: Vec<ProvenanceRecord>,
    pub out_path: PathBuf,
    pub provenance_path: PathBuf,
}

/// Grounds every dataset record and writes the output and provenance files.
pub fn cmd_ground(cfg: &RunConfig, out: Option<&Path>) -> Result<GroundRun> {
    let records = load_dataset(cfg.dataset_path()?)?;
    let sources = LoadedSources::load(cfg)?;
    let scorer = cfg.scorer.build()?;
    let run = ground_records(&records, cfg, &sources, scorer.as_ref(), Execution::default())?;

    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output.grounded.clone());
    let provenance_path = cfg.provenance_path(&out_path);
    let (outputs, provenance): (Vec<_>, Vec<_>) = run.into_iter().unzip();
    match cfg.mode {
        Mode::FinetuneInput => {
            let recs: Vec<&GroundedRecord> = outputs
                .iter()
                .filter_map(|o| match o {
                    GroundOutput::Grounded(r) => Some(r),
                    GroundOutput::Prompt(_) => None,
                })
                .collect();
            write_jsonl(&out_path, &recs)?;
        }
        Mode::ZeroShotPrompt => {
            let recs: Vec<&PromptRecord> = outputs
                .iter()
                .filter_map(|o| match o {
                    GroundOutput::Prompt(r) => Some(r),
                    GroundOutput::Grounded(_) => None,
                })
                .collect();
            write_jsonl(&out_path, &recs)?;
        }
    }
    write_jsonl(&provenance_path, &provenance)?;
    Ok(GroundRun {
        outputs,
        provenance,
        out_path,
        provenance_path,
    })
}

/// The per-document part of [`cmd_ground`], without file I/O.
pub fn ground_records(
    records: &[DatasetRecord],
    cfg: &RunConfig,
    sources: &LoadedSources,
    scorer: &dyn PassageScorer,
    exec: Execution,
) -> Result<Vec<(GroundOutput, ProvenanceRecord)>> {
    let tok = WordTokenizer;
    with_workers(cfg.workers, || {
        try_map_ordered(records, exec, |r| {
            ground_record(r, cfg, sources, scorer, &tok).map_err(|e| match e {
                Error::Record { .. } => e,
                other => Error::record(&r.id, other.to_string()),
            })
        })
    })
}

pub struct EvalInputs<'a> {
    pub generated: &'a Path,
    pub references: &'a Path,
    pub familiar_words: Option<&'a Path>,
    pub label: Option<&'a str>,
}

pub fn cmd_eval(inputs: &EvalInputs<'_>, workers: Option<usize>) -> Result<MetricReport> {
    let generated: Vec<GeneratedSummary> = read_jsonl(inputs.generated)?;
    let references: Vec<ReferenceSummary> = read_jsonl(inputs.references)?;
    let familiar = match inputs.familiar_words {
        Some(p) => FamiliarWordList::from_file(p)?,
        None => FamiliarWordList::dale_chall(),
    };
    let label = inputs.label.map(String::from).unwrap_or_else(|| {
        inputs
            .generated
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "generated".into())
    });
    evaluate(
        &label,
        &generated,
        &references,
        &familiar,
        workers,
        Execution::default(),
    )
}

/// Scores aligned generated/reference pairs; any id present on only one
/// side is an error listing those ids.
pub fn evaluate(
    label: &str,
    generated: &[GeneratedSummary],
    references: &[ReferenceSummary],
    familiar: &FamiliarWordList,
    workers: Option<usize>,
    exec: Execution,
) -> Result<MetricReport> {
    let mut refs: HashMap<&str, &ReferenceSummary> = HashMap::new();
    for r in references {
        if refs.insert(&r.id, r).is_some() {
            return Err(Error::record(&r.id, "duplicate reference id"));
        }
    }
    let mut gen_ids = HashSet::new();
    for g in generated {
        if !gen_ids.insert(g.id.as_str()) {
            return Err(Error::record(&g.id, "duplicate generated id"));
        }
    }
    let without_reference: Vec<String> = generated
        .iter()
        .filter(|g| !refs.contains_key(g.id.as_str()))
        .map(|g| g.id.clone())
        .collect();
    let without_summary: Vec<String> = references
        .iter()
        .filter(|r| !gen_ids.contains(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    if !without_reference.is_empty() || !without_summary.is_empty() {
        return Err(Error::IdMismatch {
            without_reference,
            without_summary,
        });
    }

    let rows = with_workers(workers, || {
        try_map_ordered(generated, exec, |g| {
            let r = refs[g.id.as_str()];
            let mut row = score_summary(&g.id, &g.summary, &r.summary, familiar)?;
            row.subset = r.subset.clone();
            Ok::<_, Error>(row)
        })
    })?;
    Ok(MetricReport::from_rows(label, rows))
}

pub fn read_report(path: &Path) -> Result<MetricReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_report(path: &Path, report: &MetricReport) -> Result<()> {
    write_json(path, report)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Builds the metric and usage tables. `grounded` may be a fine-tuning input
/// file or a prompt file; both carry `passages_used`.
pub fn cmd_report(reports: &[MetricReport], grounded: Option<&Path>) -> Result<ReportTables> {
    let usage: Vec<UsageRecord> = match grounded {
        Some(p) => read_jsonl(p)?,
        None => Vec::new(),
    };
    Ok(ReportTables::build(reports, &usage))
}

/// Writes `{stem}.txt` and `{stem}.json` next to `stem`.
pub fn write_tables(stem: &Path, tables: &ReportTables) -> Result<(PathBuf, PathBuf)> {
    let txt = stem.with_extension("txt");
    let json = stem.with_extension("json");
    if let Some(parent) = txt.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&txt, tables.render_text()).map_err(|e| Error::io(&txt, e))?;
    write_json(&json, tables)?;
    Ok((txt, json))
}

#[derive(Debug, Deserialize)]
struct ArticleLine {
    id: String,
    #[serde(default)]
    title: String,
    text: String,
}

/// Splits plain-text articles (`{id, title, text}` lines) into passages of
/// `sentences_per_chunk` sentences, written as a passage file.
pub fn cmd_chunk(input: &Path, out: &Path, sentences_per_chunk: usize) -> Result<usize> {
    let articles: Vec<ArticleLine> = read_jsonl(input)?;
    let chunked = try_map_ordered(&articles, Execution::default(), |a| {
        chunk_document(&a.id, &a.title, &a.text, sentences_per_chunk)
    })?;
    let passages: Vec<_> = chunked.into_iter().flatten().collect();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_passages(out, &passages)?;
    Ok(passages.len())
}
