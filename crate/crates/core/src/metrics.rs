//! ROUGE-1/2/L and the FKGL and Dale-Chall readability scores.
//!
//! All metrics share the crate's word tokenizer, so numbers are comparable
//! across runs of this tool but not digit-for-digit with other toolkits.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::{normalized_terms, split_sentences};

const DALE_CHALL_LIST: &str = include_str!("../data/dale_chall_familiar.txt");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        if candidate_total == 0 || reference_total == 0 {
            return Self::ZERO;
        }
        let precision = overlap as f64 / candidate_total as f64;
        let recall = overlap as f64 / reference_total as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        RougeScore { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityScore {
    pub fkgl: f64,
    pub dcrs: f64,
}

#[derive(Debug, Clone)]
pub struct FamiliarWordList {
    words: HashSet<String>,
}

impl FamiliarWordList {
    /// The bundled Dale-Chall list.
    pub fn dale_chall() -> Self {
        Self::parse(DALE_CHALL_LIST).expect("bundled word list is non-empty")
    }

    /// One word per line, `#` starts a comment. Entries are normalized with
    /// the word tokenizer, so "don't" contributes "don" and "t".
    pub fn parse(text: &str) -> Result<Self> {
        let words: HashSet<String> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or_default())
            .flat_map(normalized_terms)
            .collect();
        if words.is_empty() {
            return Err(Error::InvalidArgument("familiar word list is empty".into()));
        }
        Ok(FamiliarWordList { words })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let joined: Vec<String> = words.into_iter().map(|w| w.as_ref().to_string()).collect();
        Self::parse(&joined.join("\n"))
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.words.contains(normalized)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<RougeScore> {
    if n == 0 {
        return Err(Error::InvalidArgument("rouge n must be at least 1".into()));
    }
    let c = normalized_terms(candidate);
    let r = normalized_terms(reference);
    Ok(rouge_n_tokens(&c, &r, n))
}

pub fn rouge_n_tokens(candidate: &[String], reference: &[String], n: usize) -> RougeScore {
    let cc = ngram_counts(candidate, n);
    let rc = ngram_counts(reference, n);
    let overlap: usize = cc
        .iter()
        .map(|(gram, &k)| k.min(rc.get(gram).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_counts(
        overlap,
        candidate.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    )
}

/// Length of the longest common subsequence, two-row dynamic program.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Summary-level ROUGE-L over the full token sequences.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let c = normalized_terms(candidate);
    let r = normalized_terms(reference);
    rouge_l_tokens(&c, &r)
}

pub fn rouge_l_tokens(candidate: &[String], reference: &[String]) -> RougeScore {
    RougeScore::from_counts(lcs_length(candidate, reference), candidate.len(), reference.len())
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group heuristic: count runs of a/e/i/o/u/y, drop one for a silent
/// final "e" after a consonant (but keep consonant + "le"), never below one.
pub fn count_syllables(word: &str) -> Result<usize> {
    if word.is_empty() || !word.chars().all(char::is_alphabetic) {
        return Err(Error::InvalidArgument(format!(
            "syllables need a non-empty alphabetic word, got {word:?}"
        )));
    }
    let chars: Vec<char> = word.chars().flat_map(char::to_lowercase).collect();
    let mut groups = 0;
    let mut in_vowel = false;
    for &c in &chars {
        let v = is_vowel(c);
        if v && !in_vowel {
            groups += 1;
        }
        in_vowel = v;
    }
    let n = chars.len();
    let consonant = |c: char| c.is_alphabetic() && !is_vowel(c);
    if n >= 2 && chars[n - 1] == 'e' && consonant(chars[n - 2]) {
        let consonant_le = n >= 3 && chars[n - 2] == 'l' && consonant(chars[n - 3]);
        if !consonant_le {
            groups -= 1;
        }
    }
    Ok(groups.max(1))
}

struct TextCounts {
    sentences: usize,
    words: Vec<String>,
}

/// Words for readability are tokens with at least one letter; bare numbers
/// are skipped. Syllables are counted over the letters of each word.
fn readability_counts(text: &str) -> Result<TextCounts> {
    let sentences = split_sentences(text).len();
    let words: Vec<String> = normalized_terms(text)
        .into_iter()
        .filter(|t| t.chars().any(char::is_alphabetic))
        .collect();
    if sentences == 0 || words.is_empty() {
        return Err(Error::InvalidArgument(
            "readability needs at least one word and one sentence".into(),
        ));
    }
    Ok(TextCounts { sentences, words })
}

fn letters(word: &str) -> String {
    word.chars().filter(|c| c.is_alphabetic()).collect()
}

pub fn fkgl(text: &str) -> Result<f64> {
    let counts = readability_counts(text)?;
    let mut syllables = 0;
    for w in &counts.words {
        syllables += count_syllables(&letters(w))?;
    }
    let words = counts.words.len() as f64;
    Ok(0.39 * (words / counts.sentences as f64) + 11.8 * (syllables as f64 / words) - 15.59)
}

/// Percentage (0-100) of words outside the familiar list.
pub fn difficult_word_percent(text: &str, familiar: &FamiliarWordList) -> Result<f64> {
    let counts = readability_counts(text)?;
    let difficult = counts.words.iter().filter(|w| !familiar.contains(w)).count();
    Ok(100.0 * difficult as f64 / counts.words.len() as f64)
}

pub fn dcrs(text: &str, familiar: &FamiliarWordList) -> Result<f64> {
    let counts = readability_counts(text)?;
    let difficult = counts.words.iter().filter(|w| !familiar.contains(w)).count();
    let words = counts.words.len() as f64;
    let percent = 100.0 * difficult as f64 / words;
    let mut score = 0.1579 * percent + 0.0496 * (words / counts.sentences as f64);
    if percent > 5.0 {
        score += 3.6365;
    }
    Ok(score)
}

pub fn readability(text: &str, familiar: &FamiliarWordList) -> Result<ReadabilityScore> {
    Ok(ReadabilityScore {
        fkgl: fkgl(text)?,
        dcrs: dcrs(text, familiar)?,
    })
}

/// Metric values for one generated summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<String>,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub fkgl: f64,
    pub dcrs: f64,
}

pub const METRIC_NAMES: [&str; 5] = ["dcrs", "fkgl", "rouge1", "rouge2", "rougeL"];

impl MetricRow {
    pub fn value(&self, metric: &str) -> Option<f64> {
        Some(match metric {
            "rouge1" => self.rouge1,
            "rouge2" => self.rouge2,
            "rougeL" => self.rouge_l,
            "fkgl" => self.fkgl,
            "dcrs" => self.dcrs,
            _ => return None,
        })
    }
}

pub fn score_summary(id: &str, candidate: &str, reference: &str, familiar: &FamiliarWordList) -> Result<MetricRow> {
    if candidate.trim().is_empty() {
        return Err(Error::record(id, "empty generated summary"));
    }
    if reference.trim().is_empty() {
        return Err(Error::record(id, "empty reference summary"));
    }
    let c = normalized_terms(candidate);
    let r = normalized_terms(reference);
    let wrap = |e: Error| Error::record(id, e.to_string());
    Ok(MetricRow {
        id: id.to_string(),
        subset: None,
        rouge1: rouge_n_tokens(&c, &r, 1).f1,
        rouge2: rouge_n_tokens(&c, &r, 2).f1,
        rouge_l: rouge_l_tokens(&c, &r).f1,
        fkgl: fkgl(candidate).map_err(wrap)?,
        dcrs: dcrs(candidate, familiar).map_err(wrap)?,
    })
}
