//! Deterministic synthetic datasets and corpora for integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use layground::corpus::{write_passages, Passage};
use layground::dataset::{write_jsonl, DatasetRecord, GeneratedSummary};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOPICS: usize = 8;
const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "pha", "gro", "bel", "dran", "ex", "quo", "tor", "ly", "sin",
    "mab", "cet", "ur", "ion", "ost", "pli",
];
const COMMON: &[&str] = &[
    "the", "of", "and", "in", "cells", "we", "show", "that", "protein", "this", "is", "a", "to", "gene", "with", "for",
    "study", "found", "these", "results", "are", "by", "levels", "during", "growth", "two", "new", "data",
];
const SURNAMES: &[&str] = &[
    "Okafor",
    "Lindqvist",
    "Tanaka",
    "Moreau",
    "Ivanova",
    "Castillo",
    "Nair",
    "Becker",
];

pub struct Synthetic {
    pub records: Vec<DatasetRecord>,
    pub abstracts: Vec<Passage>,
    pub wiki: Vec<Passage>,
    /// `(term, definition)` pairs.
    pub glossary: Vec<(String, String)>,
    /// Doc ids whose own abstract sits in the abstracts corpus, tagged with
    /// `origin_doc_id`.
    pub tagged_self: Vec<String>,
    /// Doc ids whose abstract sits in the corpus untagged and lightly edited.
    pub untagged_self: Vec<String>,
}

struct Gen {
    rng: ChaCha8Rng,
    topics: Vec<Vec<String>>,
}

impl Gen {
    fn word(rng: &mut ChaCha8Rng) -> String {
        let n = rng.gen_range(2..=3);
        (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
    }

    fn sentence(&mut self, topic: usize, len: usize) -> String {
        let mut words: Vec<String> = (0..len)
            .map(|_| {
                if self.rng.gen_bool(0.65) {
                    self.topics[topic].choose(&mut self.rng).unwrap().clone()
                } else {
                    COMMON.choose(&mut self.rng).unwrap().to_string()
                }
            })
            .collect();
        let first = &mut words[0];
        *first = first[..1].to_uppercase() + &first[1..];
        let end = if self.rng.gen_bool(0.1) { "?" } else { "." };
        format!("{}{end}", words.join(" "))
    }

    fn paragraph(&mut self, topic: usize, sentences: usize) -> String {
        (0..sentences)
            .map(|_| {
                let len = self.rng.gen_range(6..=14);
                self.sentence(topic, len)
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn generate(seed: u64, docs: usize) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics = (0..TOPICS)
        .map(|_| (0..24).map(|_| Gen::word(&mut rng)).collect())
        .collect();
    let mut g = Gen { rng, topics };

    let mut records = Vec::new();
    let mut abstracts = Vec::new();
    let mut tagged_self = Vec::new();
    let mut untagged_self = Vec::new();
    for i in 0..docs {
        let topic = i % TOPICS;
        let id = format!("doc{i:03}");
        let abstract_text = g.paragraph(topic, 4);
        let opening = abstract_text
            .split_inclusive(['.', '?'])
            .next()
            .unwrap()
            .trim()
            .to_string();
        let n_sentences = g.rng.gen_range(20..40);
        let body = g.paragraph(topic, n_sentences);
        let article = format!("{opening} {body}");
        records.push(DatasetRecord {
            id: id.clone(),
            title: format!("On {} {}", g.topics[topic][0], g.topics[topic][1]),
            first_author_surname: SURNAMES[i % SURNAMES.len()].to_string(),
            year: 2005 + (i % 17) as i32,
            article,
            abstract_text: abstract_text.clone(),
            reference_summary: g.paragraph(topic, 3),
            subset: Some(if i % 2 == 0 { "plos" } else { "elife" }.to_string()),
        });
        if i % 2 == 0 {
            abstracts.push(Passage {
                passage_id: format!("abs-{id}"),
                source: "abstracts".into(),
                title: String::new(),
                text: abstract_text,
                origin_doc_id: Some(id.clone()),
            });
            tagged_self.push(id);
        } else if i % 4 == 3 {
            // Same abstract under a different id, last word changed.
            let mut words: Vec<&str> = abstract_text.split(' ').collect();
            words.pop();
            let text = format!("{} ending.", words.join(" "));
            abstracts.push(Passage {
                passage_id: format!("mirror-{i}"),
                source: "abstracts".into(),
                title: String::new(),
                text,
                origin_doc_id: None,
            });
            untagged_self.push(id);
        }
    }
    for j in 0..TOPICS * 5 {
        let text = g.paragraph(j % TOPICS, 4);
        abstracts.push(Passage {
            passage_id: format!("other-{j:03}"),
            source: "abstracts".into(),
            title: String::new(),
            text,
            origin_doc_id: Some(format!("other{j:03}")),
        });
    }
    abstracts.shuffle(&mut g.rng);

    let mut wiki = Vec::new();
    for j in 0..TOPICS * 6 + 12 {
        let topic = j % TOPICS;
        let n = g.rng.gen_range(2..6);
        let text = g.paragraph(topic, n);
        wiki.push(Passage {
            passage_id: format!("w{j:03}"),
            source: "wikipedia".into(),
            title: g.topics[topic][j % 24].clone(),
            text,
            origin_doc_id: None,
        });
    }

    let mut glossary = Vec::new();
    for t in 0..TOPICS {
        for k in 0..3 {
            let term = g.topics[t][k * 5].clone();
            let def = g.paragraph(t, 1);
            glossary.push((term, def));
        }
        let phrase = format!("{} {}", g.topics[t][2], g.topics[t][3]);
        let def = g.paragraph(t, 1);
        glossary.push((phrase, def));
    }

    Synthetic {
        records,
        abstracts,
        wiki,
        glossary,
        tagged_self,
        untagged_self,
    }
}

/// Budgets small enough that the synthetic documents hit every limit.
pub const TIGHT_BUDGETS: &str = "[budgets]\nlead = 96\ndoc = 160\ngrounding = 120\n";

/// Writes the dataset, three corpora and `config.toml` into `dir`. `extra`
/// is inserted verbatim after the top-level keys, before the corpus tables.
pub fn write_workspace(dir: &Path, syn: &Synthetic, extra: &str) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    write_jsonl(&dir.join("dataset.jsonl"), &syn.records).unwrap();
    write_passages(&dir.join("abstracts.jsonl"), &syn.abstracts).unwrap();
    write_passages(&dir.join("wikipedia.jsonl"), &syn.wiki).unwrap();
    let defs: Vec<serde_json::Value> = syn
        .glossary
        .iter()
        .map(|(t, d)| serde_json::json!({"term": t, "definition": d}))
        .collect();
    write_jsonl(&dir.join("glossary.jsonl"), &defs).unwrap();
    let config = format!(
        r#"dataset = "dataset.jsonl"
index_dir = "indexes"
{extra}
[[corpora]]
name = "abstracts"
kind = "searchable"
path = "abstracts.jsonl"

[[corpora]]
name = "wikipedia"
kind = "searchable"
path = "wikipedia.jsonl"

[[corpora]]
name = "glossary"
kind = "definitional"
path = "glossary.jsonl"
"#
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

/// First two sentences of each article as stand-in model output.
pub fn lead_summaries(syn: &Synthetic) -> Vec<GeneratedSummary> {
    syn.records
        .iter()
        .map(|r| GeneratedSummary {
            id: r.id.clone(),
            summary: r
                .article
                .split_inclusive(['.', '?'])
                .take(2)
                .collect::<String>()
                .trim()
                .to_string(),
        })
        .collect()
}
