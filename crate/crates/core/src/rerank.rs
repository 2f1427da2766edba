//! Re-ranking of a candidate pool against the lead window.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::bridge::RemoteScorer;
use crate::corpus::Passage;
use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::grounding::CandidatePool;
use crate::index::idf;
use crate::textproc::normalized_terms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub passage: Passage,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScorerSpec {
    Lexical,
    Remote { endpoint: String },
}

impl ScorerSpec {
    pub fn from_parts(kind: &str, endpoint: Option<&str>) -> Result<Self> {
        match (kind, endpoint) {
            ("lexical", _) => Ok(ScorerSpec::Lexical),
            ("remote", Some(e)) if !e.trim().is_empty() => Ok(ScorerSpec::Remote {
                endpoint: e.trim().to_string(),
            }),
            ("remote", _) => Err(Error::Config("remote scorer requires an endpoint".into())),
            (other, _) => Err(Error::Config(format!(
                "unknown scorer kind {other:?} (expected lexical or remote)"
            ))),
        }
    }

    pub fn build(&self) -> Result<Box<dyn PassageScorer>> {
        Ok(match self {
            ScorerSpec::Lexical => Box::new(LexicalScorer::default()),
            ScorerSpec::Remote { endpoint } => Box::new(RemoteScorer::new(endpoint)?),
        })
    }
}

/// Assigns one relevance score per passage, in input order.
pub trait PassageScorer: Send + Sync {
    fn score(&self, query: &str, passages: &[Passage]) -> Result<Vec<f64>>;
}

fn weights(text: &str, idf: &HashMap<String, f64>) -> BTreeMap<String, f64> {
    let mut tf: BTreeMap<String, f64> = BTreeMap::new();
    for term in normalized_terms(text) {
        if idf.get(&term).is_some_and(|&w| w > 0.0) {
            *tf.entry(term).or_default() += 1.0;
        }
    }
    for (term, w) in tf.iter_mut() {
        *w *= idf[term];
    }
    tf
}

/// Cosine similarity of tf·idf vectors; terms missing from `idf` are ignored.
pub fn score_lexical(query: &str, passage_text: &str, idf: &HashMap<String, f64>) -> f64 {
    let q = weights(query, idf);
    let p = weights(passage_text, idf);
    if q.is_empty() || p.is_empty() {
        return 0.0;
    }
    let dot: f64 = q.iter().filter_map(|(t, wq)| p.get(t).map(|wp| wq * wp)).sum();
    let nq: f64 = q.values().map(|w| w * w).sum();
    let np: f64 = p.values().map(|w| w * w).sum();
    (dot / (nq * np).sqrt()).clamp(0.0, 1.0)
}

/// BM25-style idf with the pool itself as the collection.
pub fn pool_idf(passages: &[Passage]) -> HashMap<String, f64> {
    let mut df: HashMap<String, usize> = HashMap::new();
    for p in passages {
        let mut terms = normalized_terms(&p.text);
        terms.sort_unstable();
        terms.dedup();
        for t in terms {
            *df.entry(t).or_default() += 1;
        }
    }
    df.into_iter().map(|(t, n)| (t, idf(passages.len(), n))).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer {
    pub exec: Execution,
}

impl PassageScorer for LexicalScorer {
    fn score(&self, query: &str, passages: &[Passage]) -> Result<Vec<f64>> {
        let idf = pool_idf(passages);
        Ok(map_ordered(passages, self.exec, |p| {
            score_lexical(query, &p.text, &idf)
        }))
    }
}

fn rank_order(a: &ScoredCandidate, b: &ScoredCandidate) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.passage.passage_id.cmp(&b.passage.passage_id))
        .then_with(|| a.passage.source.cmp(&b.passage.source))
}

/// Orders the pool by descending score, ties by ascending passage id.
pub fn rank_pool(pool: &CandidatePool, query: &str, scorer: &dyn PassageScorer) -> Result<Vec<ScoredCandidate>> {
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    let scores = scorer.score(query, &pool.candidates)?;
    if scores.len() != pool.len() {
        return Err(Error::Remote(format!(
            "scorer returned {} scores for {} candidates",
            scores.len(),
            pool.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Remote(format!("scorer returned non-finite score {bad}")));
    }
    let mut ranked: Vec<ScoredCandidate> = pool
        .candidates
        .iter()
        .cloned()
        .zip(scores)
        .map(|(passage, score)| ScoredCandidate { passage, score })
        .collect();
    ranked.sort_by(rank_order);
    Ok(ranked)
}
