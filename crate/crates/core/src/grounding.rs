//! Candidate retrieval for one document.
//!
//! Each sentence of the lead window queries every searchable corpus for its
//! top hits; definitional corpora contribute definitions for terms found in
//! the lead window by greedy longest-match. The pool keeps the first
//! occurrence of every `(source, passage_id)` and never holds a passage that
//! originates from the document being grounded.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{DefinitionEntry, Passage};
use crate::error::{Error, Result};
use crate::index::Index;
use crate::textproc::{normalized_terms, split_sentences, TokenCounter};

pub const DEFAULT_LEAD_BUDGET: usize = 1024;
pub const SELF_SIMILARITY_THRESHOLD: f64 = 0.8;
const SHINGLE_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Searchable,
    Definitional,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub name: String,
    pub kind: CorpusKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingConfig {
    pub lead_budget: usize,
    pub corpora: Vec<CorpusSpec>,
    pub per_sentence_k: usize,
}

impl GroundingConfig {
    pub fn new(corpora: Vec<CorpusSpec>) -> Self {
        GroundingConfig {
            lead_budget: DEFAULT_LEAD_BUDGET,
            corpora,
            per_sentence_k: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_sentence_k == 0 {
            return Err(Error::Config("per_sentence_k must be at least 1".into()));
        }
        if self.lead_budget == 0 {
            return Err(Error::Config("lead budget must be positive".into()));
        }
        let mut names = HashSet::new();
        for c in &self.corpora {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Config(format!("corpus name {:?} listed twice", c.name)));
            }
        }
        Ok(())
    }

    /// Corpora of `kind`, sorted by name.
    pub fn corpora_of(&self, kind: CorpusKind) -> Vec<&str> {
        let mut names: Vec<&str> = self
            .corpora
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.name.as_str())
            .collect();
        names.sort_unstable();
        names
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Index of the lead-window sentence whose query retrieved the passage.
    Sentence(usize),
    /// Normalized term matched in the lead window.
    Term(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub corpus: String,
    pub trigger: Trigger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Removal {
    Duplicate,
    SelfOrigin,
    NearDuplicate { jaccard: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalEvent {
    pub source: String,
    pub passage_id: String,
    pub trigger: Trigger,
    #[serde(flatten)]
    pub removal: Removal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub doc_id: String,
    pub candidates: Vec<Passage>,
    /// Parallel to `candidates`.
    pub provenance: Vec<Provenance>,
    pub removed: Vec<RemovalEvent>,
    keys: HashSet<(String, String)>,
}

impl CandidatePool {
    pub fn new(doc_id: impl Into<String>) -> Self {
        CandidatePool {
            doc_id: doc_id.into(),
            candidates: Vec::new(),
            provenance: Vec::new(),
            removed: Vec::new(),
            keys: HashSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Adds `passage` unless it is a repeat or comes from this document.
    /// Returns whether it was added.
    pub fn offer(&mut self, passage: Passage, provenance: Provenance) -> bool {
        let removal = if passage.origin_doc_id.as_deref() == Some(self.doc_id.as_str()) {
            Some(Removal::SelfOrigin)
        } else if self
            .keys
            .contains(&(passage.source.clone(), passage.passage_id.clone()))
        {
            Some(Removal::Duplicate)
        } else {
            None
        };
        if let Some(removal) = removal {
            self.removed.push(RemovalEvent {
                source: passage.source,
                passage_id: passage.passage_id,
                trigger: provenance.trigger,
                removal,
            });
            return false;
        }
        self.keys.insert((passage.source.clone(), passage.passage_id.clone()));
        self.candidates.push(passage);
        self.provenance.push(provenance);
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Passage, &Provenance)> {
        self.candidates.iter().zip(&self.provenance)
    }
}

/// Top hits per lead-window sentence from every searchable corpus.
///
/// Corpora are visited in name order so the pool does not depend on the
/// iteration order of `indexes`.
pub fn retrieve_candidates(
    doc_id: &str,
    article: &str,
    indexes: &HashMap<String, Index>,
    config: &GroundingConfig,
    tok: &dyn TokenCounter,
) -> Result<CandidatePool> {
    config.validate()?;
    let searchable = config.corpora_of(CorpusKind::Searchable);
    let mut ordered = Vec::with_capacity(searchable.len());
    for name in searchable {
        let index = indexes.get(name).ok_or_else(|| Error::MissingIndex(name.to_string()))?;
        ordered.push((name, index));
    }

    let lead = tok.take_lead(article, config.lead_budget);
    let mut pool = CandidatePool::new(doc_id);
    for (i, sentence) in split_sentences(lead).iter().enumerate() {
        let terms = normalized_terms(sentence.text);
        for &(name, index) in &ordered {
            for hit in index.search_terms(&terms, config.per_sentence_k) {
                let mut passage = index.passage(hit.doc).clone();
                passage.source = name.to_string();
                pool.offer(
                    passage,
                    Provenance {
                        corpus: name.to_string(),
                        trigger: Trigger::Sentence(i),
                    },
                );
            }
        }
    }
    Ok(pool)
}

/// Phrase dictionary for greedy longest-match over normalized tokens.
#[derive(Debug, Clone, Default)]
pub struct DefinitionDictionary {
    by_term: HashMap<String, String>,
    longest: usize,
}

impl DefinitionDictionary {
    pub fn new(entries: &[DefinitionEntry]) -> Self {
        let mut dict = DefinitionDictionary::default();
        for e in entries {
            // Re-normalize so hand-built entries match the same way loaded ones do.
            let key = normalized_terms(&e.term).join(" ");
            if key.is_empty() {
                continue;
            }
            dict.longest = dict.longest.max(key.split(' ').count());
            dict.by_term.insert(key, e.definition.clone());
        }
        dict
    }

    pub fn len(&self) -> usize {
        self.by_term.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_term.is_empty()
    }

    /// Matched terms in order of first appearance, each once.
    pub fn match_terms(&self, tokens: &[String]) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let max = self.longest.min(tokens.len() - i);
            let found = (1..=max).rev().find_map(|len| {
                let key = tokens[i..i + len].join(" ");
                self.by_term.get_key_value(&key).map(|(k, _)| (k.as_str(), len))
            });
            match found {
                Some((term, len)) => {
                    if seen.insert(term) {
                        out.push(term);
                    }
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }

    pub fn definition(&self, term: &str) -> Option<&str> {
        self.by_term.get(term).map(String::as_str)
    }
}

/// Definition passages for terms appearing in the lead window. The passage id
/// and title are the normalized term.
pub fn link_definitions(
    article: &str,
    corpus: &str,
    dictionary: &DefinitionDictionary,
    lead_budget: usize,
    tok: &dyn TokenCounter,
) -> Vec<(Passage, Provenance)> {
    let lead = tok.take_lead(article, lead_budget);
    let tokens = normalized_terms(lead);
    dictionary
        .match_terms(&tokens)
        .into_iter()
        .map(|term| {
            let passage = Passage {
                passage_id: term.to_string(),
                source: corpus.to_string(),
                title: term.to_string(),
                text: dictionary.definition(term).unwrap_or_default().to_string(),
                origin_doc_id: None,
            };
            let provenance = Provenance {
                corpus: corpus.to_string(),
                trigger: Trigger::Term(term.to_string()),
            };
            (passage, provenance)
        })
        .collect()
}

fn shingles(tokens: &[String], n: usize) -> HashSet<&[String]> {
    let n = n.min(tokens.len());
    if n == 0 {
        return HashSet::new();
    }
    tokens.windows(n).collect()
}

/// Jaccard similarity of word 3-gram sets. Texts shorter than three tokens
/// use their whole token sequence as the single shingle.
pub fn shingle_jaccard(a: &str, b: &str) -> f64 {
    let ta = normalized_terms(a);
    let tb = normalized_terms(b);
    let sa = shingles(&ta, SHINGLE_SIZE);
    let sb = shingles(&tb, SHINGLE_SIZE);
    if sa.is_empty() || sb.is_empty() {
        return 0.0;
    }
    let inter = sa.intersection(&sb).count();
    let union = sa.len() + sb.len() - inter;
    inter as f64 / union as f64
}

/// Drops passages that came from `doc_id` or that reproduce `own_abstract`.
pub fn remove_self(pool: CandidatePool, doc_id: &str, own_abstract: &str) -> CandidatePool {
    let CandidatePool {
        doc_id: pool_doc,
        candidates,
        provenance,
        mut removed,
        ..
    } = pool;
    let mut kept = CandidatePool::new(pool_doc);
    for (passage, prov) in candidates.into_iter().zip(provenance) {
        let removal = if passage.origin_doc_id.as_deref() == Some(doc_id) {
            Some(Removal::SelfOrigin)
        } else {
            let jaccard = shingle_jaccard(&passage.text, own_abstract);
            (jaccard >= SELF_SIMILARITY_THRESHOLD).then_some(Removal::NearDuplicate { jaccard })
        };
        match removal {
            Some(removal) => removed.push(RemovalEvent {
                source: passage.source,
                passage_id: passage.passage_id,
                trigger: prov.trigger,
                removal,
            }),
            None => {
                kept.offer(passage, prov);
            }
        }
    }
    kept.removed.splice(0..0, removed);
    kept
}

/// Everything a document needs to be grounded against.
pub struct GroundingSources<'a> {
    pub indexes: &'a HashMap<String, Index>,
    pub dictionaries: &'a BTreeMap<String, DefinitionDictionary>,
}

/// Retrieval, definition linking and self-removal for one document.
pub fn ground_document(
    doc_id: &str,
    article: &str,
    own_abstract: &str,
    sources: &GroundingSources<'_>,
    config: &GroundingConfig,
    tok: &dyn TokenCounter,
) -> Result<CandidatePool> {
    let mut pool = retrieve_candidates(doc_id, article, sources.indexes, config, tok)?;
    for name in config.corpora_of(CorpusKind::Definitional) {
        let dict = sources
            .dictionaries
            .get(name)
            .ok_or_else(|| Error::MissingIndex(name.to_string()))?;
        for (passage, prov) in link_definitions(article, name, dict, config.lead_budget, tok) {
            pool.offer(passage, prov);
        }
    }
    Ok(remove_self(pool, doc_id, own_abstract))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_index, Bm25Params};
    use crate::textproc::WordTokenizer;

    fn passage(id: &str, text: &str, origin: Option<&str>) -> Passage {
        Passage {
            passage_id: id.into(),
            source: String::new(),
            title: String::new(),
            text: text.into(),
            origin_doc_id: origin.map(Into::into),
        }
    }

    fn searchable(names: &[&str]) -> GroundingConfig {
        GroundingConfig::new(
            names
                .iter()
                .map(|n| CorpusSpec {
                    name: n.to_string(),
                    kind: CorpusKind::Searchable,
                })
                .collect(),
        )
    }

    fn indexes() -> HashMap<String, Index> {
        let a = build_index(
            vec![
                passage("a1", "alpha apples", None),
                passage("a2", "beta bananas", None),
                passage("a3", "gamma grapes", Some("doc1")),
            ],
            Bm25Params::default(),
        )
        .unwrap();
        let b = build_index(
            vec![
                passage("b1", "alpha arrows", None),
                passage("b2", "beta bows", None),
                passage("b3", "gamma guns", None),
            ],
            Bm25Params::default(),
        )
        .unwrap();
        HashMap::from([("a".to_string(), a), ("b".to_string(), b)])
    }

    #[test]
    fn three_sentences_two_corpora() {
        let pool = retrieve_candidates(
            "doc9",
            "Alpha one. Beta two. Gamma three.",
            &indexes(),
            &searchable(&["b", "a"]),
            &WordTokenizer,
        )
        .unwrap();
        assert_eq!(pool.len(), 6);
        let ids: Vec<_> = pool.candidates.iter().map(|p| p.passage_id.as_str()).collect();
        assert_eq!(ids, ["a1", "b1", "a2", "b2", "a3", "b3"]);
        assert_eq!(pool.candidates[1].source, "b");
        assert_eq!(pool.provenance[2].trigger, Trigger::Sentence(1));
    }

    #[test]
    fn duplicates_and_oov_sentences() {
        let pool = retrieve_candidates(
            "doc9",
            "Alpha here. Alpha again. Zzz qqq.",
            &indexes(),
            &searchable(&["a"]),
            &WordTokenizer,
        )
        .unwrap();
        assert_eq!(pool.len(), 1);
        assert_eq!(pool.removed.len(), 1);
        assert_eq!(pool.removed[0].removal, Removal::Duplicate);
    }

    #[test]
    fn self_origin_never_enters_pool() {
        let pool = retrieve_candidates("doc1", "Gamma rays.", &indexes(), &searchable(&["a"]), &WordTokenizer).unwrap();
        assert!(pool.is_empty());
        assert_eq!(pool.removed[0].removal, Removal::SelfOrigin);
    }

    #[test]
    fn missing_index_is_an_error() {
        let err =
            retrieve_candidates("d", "Alpha.", &indexes(), &searchable(&["a", "zz"]), &WordTokenizer).unwrap_err();
        assert!(matches!(err, Error::MissingIndex(n) if n == "zz"));
    }

    #[test]
    fn lead_budget_limits_queries() {
        let mut cfg = searchable(&["a"]);
        cfg.lead_budget = 2;
        let pool = retrieve_candidates("d", "Alpha one. Beta two.", &indexes(), &cfg, &WordTokenizer).unwrap();
        assert_eq!(pool.len(), 1);
    }

    fn dict(pairs: &[(&str, &str)]) -> DefinitionDictionary {
        DefinitionDictionary::new(
            &pairs
                .iter()
                .map(|(t, d)| DefinitionEntry {
                    term: t.to_string(),
                    definition: d.to_string(),
                })
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn definition_linking() {
        let d = dict(&[("mrna", "D")]);
        let out = link_definitions("mRNA is transcribed", "umls", &d, 1024, &WordTokenizer);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0.text, "D");
        assert_eq!(out[0].0.source, "umls");

        let d = dict(&[("rna", "D1"), ("messenger rna", "D2")]);
        let out = link_definitions("The Messenger RNA binds.", "umls", &d, 1024, &WordTokenizer);
        let texts: Vec<_> = out.iter().map(|(p, _)| p.text.as_str()).collect();
        assert_eq!(texts, ["D2"]);
        let out = link_definitions("Messenger RNA and plain RNA.", "umls", &d, 1024, &WordTokenizer);
        let texts: Vec<_> = out.iter().map(|(p, _)| p.text.as_str()).collect();
        assert_eq!(texts, ["D2", "D1"]);

        let d = dict(&[("cell", "C")]);
        let out = link_definitions("cell cell cell cell cell", "umls", &d, 1024, &WordTokenizer);
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn self_removal_rules() {
        let mut pool = CandidatePool::new("doc");
        let prov = |c: &str| Provenance {
            corpus: c.into(),
            trigger: Trigger::Sentence(0),
        };
        let abstract_text = "we surveyed mrna ends from ten thousand genes in immune cells";
        let mut a = passage("same-text", abstract_text, None);
        a.source = "abs".into();
        let mut b = passage("unrelated", "wikipedia article about volcanoes and lava", None);
        b.source = "abs".into();
        pool.offer(a, prov("abs"));
        pool.offer(b, prov("abs"));
        // Sneak an own-origin passage in to exercise the id rule.
        pool.candidates.push(passage("own", "text", Some("doc")));
        pool.provenance.push(prov("abs"));

        let out = remove_self(pool, "doc", abstract_text);
        let ids: Vec<_> = out.candidates.iter().map(|p| p.passage_id.as_str()).collect();
        assert_eq!(ids, ["unrelated"]);
        assert_eq!(out.removed.len(), 2);
        assert!(matches!(out.removed[0].removal, Removal::NearDuplicate { jaccard } if jaccard == 1.0));
        assert_eq!(out.removed[1].removal, Removal::SelfOrigin);
    }

    #[test]
    fn jaccard_edges() {
        assert_eq!(shingle_jaccard("a b c d", "a b c d"), 1.0);
        assert_eq!(shingle_jaccard("a b c", "x y z"), 0.0);
        assert_eq!(shingle_jaccard("", "a b c"), 0.0);
        assert_eq!(shingle_jaccard("Short text", "short, text"), 1.0);
        // {abc, bcd} vs {abc, bce}: 1 / 3
        assert!((shingle_jaccard("a b c d", "a b c e") - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pool_ignores_corpus_map_order() {
        let idx = indexes();
        let one = retrieve_candidates("d", "Alpha. Beta.", &idx, &searchable(&["a", "b"]), &WordTokenizer).unwrap();
        let two = retrieve_candidates("d", "Alpha. Beta.", &idx, &searchable(&["b", "a"]), &WordTokenizer).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn config_validation() {
        let mut cfg = searchable(&["a", "a"]);
        assert!(cfg.validate().is_err());
        cfg = searchable(&["a"]);
        cfg.per_sentence_k = 0;
        assert!(cfg.validate().is_err());
    }
}
