//! Word tokenization, sentence segmentation and token budgets.
//!
//! A token is a maximal run of Unicode alphanumeric characters; everything
//! else separates tokens and is otherwise dropped. The normalized form is the
//! lowercased run. Budgets elsewhere in the crate go through [`TokenCounter`],
//! so a model-specific subword tokenizer can be swapped in without touching
//! retrieval, which always uses the word tokens produced here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub surface: &'a str,
    pub normalized: String,
    /// Byte offset of `surface` in the tokenized text.
    pub start: usize,
}

impl Token<'_> {
    pub fn end(&self) -> usize {
        self.start + self.surface.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sentence<'a> {
    pub text: &'a str,
    pub start_token: usize,
    /// Exclusive.
    pub end_token: usize,
}

impl Sentence<'_> {
    pub fn token_count(&self) -> usize {
        self.end_token - self.start_token
    }
}

/// Byte spans of raw alphanumeric runs.
fn raw_spans(text: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut chars = text.char_indices().peekable();
    std::iter::from_fn(move || {
        while let Some(&(_, c)) = chars.peek() {
            if c.is_alphanumeric() {
                break;
            }
            chars.next();
        }
        let (start, _) = chars.next()?;
        let mut end = text.len();
        while let Some(&(i, c)) = chars.peek() {
            if !c.is_alphanumeric() {
                end = i;
                break;
            }
            chars.next();
        }
        Some((start, end))
    })
}

fn normalize(surface: &str) -> String {
    // Lowercasing can introduce combining marks (e.g. U+0130); keep only the
    // alphanumeric part so normalized tokens re-tokenize to themselves.
    surface
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| c.is_alphanumeric())
        .collect()
}

fn has_normal_form(surface: &str) -> bool {
    surface.chars().flat_map(char::to_lowercase).any(char::is_alphanumeric)
}

fn spans(text: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    raw_spans(text).filter(move |&(s, e)| has_normal_form(&text[s..e]))
}

pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    spans(text)
        .map(|(s, e)| Token {
            surface: &text[s..e],
            normalized: normalize(&text[s..e]),
            start: s,
        })
        .collect()
}

/// Normalized forms only; what the index and the metrics consume.
pub fn normalized_terms(text: &str) -> Vec<String> {
    spans(text).map(|(s, e)| normalize(&text[s..e])).collect()
}

pub fn count_tokens(text: &str) -> usize {
    spans(text).count()
}

/// Longest prefix of `text` holding at most `budget` tokens, cut right after
/// the last kept token. Returns `text` unchanged when it already fits.
pub fn take_lead(text: &str, budget: usize) -> &str {
    if budget == 0 {
        return "";
    }
    match spans(text).nth(budget - 1) {
        None => text,
        Some((_, end)) => {
            if spans(&text[end..]).next().is_none() {
                text
            } else {
                &text[..end]
            }
        }
    }
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

/// Byte offsets just past each sentence-closing terminator.
fn sentence_breaks(text: &str) -> Vec<usize> {
    let mut breaks = Vec::new();
    for (i, c) in text.char_indices() {
        if !is_terminator(c) {
            continue;
        }
        let after = i + c.len_utf8();
        let rest = &text[after..];
        let trimmed = rest.trim_start();
        if trimmed.is_empty() {
            breaks.push(after);
            break;
        }
        if trimmed.len() < rest.len() && trimmed.chars().next().is_some_and(char::is_uppercase) {
            breaks.push(after);
        }
    }
    breaks
}

/// Rule-based splitter: `.`, `?` or `!` closes a sentence when followed by
/// whitespace and an uppercase letter, or by the end of the text. There is no
/// abbreviation list, so "Dr. Smith" splits after "Dr.".
///
/// Segments without any token are folded into a neighbour so the sentences
/// partition the token range of the whole text.
pub fn split_sentences(text: &str) -> Vec<Sentence<'_>> {
    let mut bounds = sentence_breaks(text);
    if bounds.last() != Some(&text.len()) {
        bounds.push(text.len());
    }

    let mut ranges: Vec<(usize, usize, usize)> = Vec::new();
    let mut seg_start = 0;
    let mut pending_start: Option<usize> = None;
    for end in bounds {
        let n = count_tokens(&text[seg_start..end]);
        if n == 0 {
            match ranges.last_mut() {
                Some(last) => last.1 = end,
                None => pending_start = pending_start.or(Some(seg_start)),
            }
        } else {
            ranges.push((pending_start.take().unwrap_or(seg_start), end, n));
        }
        seg_start = end;
    }

    let mut next_token = 0;
    ranges
        .into_iter()
        .map(|(s, e, n)| {
            let sentence = Sentence {
                text: text[s..e].trim(),
                start_token: next_token,
                end_token: next_token + n,
            };
            next_token += n;
            sentence
        })
        .collect()
}

/// Token accounting used for every budget decision.
pub trait TokenCounter: Send + Sync {
    fn count_tokens(&self, text: &str) -> usize;

    /// Longest whitespace-delimited prefix within `budget`. Implementations
    /// with a cheaper exact answer should override this.
    fn take_lead<'a>(&self, text: &'a str, budget: usize) -> &'a str {
        if self.count_tokens(text) <= budget {
            return text;
        }
        let mut cuts: Vec<usize> = text
            .char_indices()
            .filter(|&(i, c)| c.is_whitespace() && i > 0)
            .map(|(i, _)| i)
            .collect();
        cuts.dedup();
        // Largest cut whose prefix fits; token counts grow with the prefix.
        let fits = cuts.partition_point(|&cut| self.count_tokens(&text[..cut]) <= budget);
        match fits {
            0 => "",
            n => text[..cuts[n - 1]].trim_end(),
        }
    }
}

/// The built-in word tokenizer.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordTokenizer;

impl TokenCounter for WordTokenizer {
    fn count_tokens(&self, text: &str) -> usize {
        count_tokens(text)
    }

    fn take_lead<'a>(&self, text: &'a str, budget: usize) -> &'a str {
        take_lead(text, budget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    /// Lead window used as retrieval query and re-ranking reference.
    pub lead_budget: usize,
    /// Prefix of the original document placed before the separator.
    pub doc_budget: usize,
    /// Reference string plus retrieved passages.
    pub grounding_budget: usize,
}

impl Default for TokenBudget {
    fn default() -> Self {
        TokenBudget {
            lead_budget: 1024,
            doc_budget: 8192,
            grounding_budget: 8192,
        }
    }
}

impl TokenBudget {
    pub fn new(lead_budget: usize, doc_budget: usize, grounding_budget: usize) -> Result<Self> {
        let budget = TokenBudget {
            lead_budget,
            doc_budget,
            grounding_budget,
        };
        budget.validate()?;
        Ok(budget)
    }

    /// Defaults for prompt construction: 2,048 lead and document tokens.
    pub fn zero_shot() -> Self {
        TokenBudget {
            lead_budget: 2048,
            doc_budget: 2048,
            grounding_budget: 8192,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lead_budget == 0 || self.doc_budget == 0 || self.grounding_budget == 0 {
            return Err(Error::Config(format!("token budgets must be positive, got {self:?}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norms(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.normalized).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(norms("The cat sat."), ["the", "cat", "sat"]);
        assert_eq!(norms("mRNA 3'-end"), ["mrna", "3", "end"]);
        let toks = tokenize("  Hello,world ");
        assert_eq!(toks[1].surface, "world");
        assert_eq!(toks[1].start, 8);
        assert_eq!(toks[1].end(), 13);
    }

    #[test]
    fn tokenize_unicode_letters() {
        assert_eq!(norms("Zürich café«ÉCOLE»"), ["zürich", "café", "école"]);
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_sentences("A b. C d.").len(), 2);
        assert_eq!(split_sentences("Hello").len(), 1);
        let s = split_sentences("Dr. Smith left.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "Dr.");
        assert_eq!(s[1].text, "Smith left.");
        assert_eq!((s[1].start_token, s[1].end_token), (1, 3));
    }

    #[test]
    fn split_needs_uppercase_after_terminator() {
        assert_eq!(split_sentences("Values near 3.5 rose. then fell. Next one").len(), 2);
        assert_eq!(split_sentences("Really?! Yes.").len(), 2);
    }

    #[test]
    fn split_folds_tokenless_segments() {
        let s = split_sentences("... ! Alpha beta. ?? Gamma.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].start_token, 0);
        assert_eq!(s[0].end_token, 2);
        assert_eq!(s[1].end_token, 3);
        assert!(split_sentences("").is_empty());
        assert!(split_sentences(" .!? ").is_empty());
    }

    #[test]
    fn take_lead_examples() {
        assert_eq!(take_lead("a b c", 5), "a b c");
        assert_eq!(take_lead("a b c d e f", 3), "a b c");
        assert_eq!(take_lead("", 1024), "");
        assert_eq!(take_lead("a b c.", 3), "a b c.");
        assert_eq!(take_lead("One, two; three four", 2), "One, two");
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("one two three"), 3);
        assert_eq!(count_tokens("A b. C d."), 4);
    }

    #[test]
    fn default_trait_take_lead_respects_budget() {
        struct CharCounter;
        impl TokenCounter for CharCounter {
            fn count_tokens(&self, text: &str) -> usize {
                text.chars().filter(|c| !c.is_whitespace()).count()
            }
        }
        assert_eq!(CharCounter.take_lead("ab cd ef", 4), "ab cd");
        assert_eq!(CharCounter.take_lead("ab cd ef", 1), "");
        assert_eq!(CharCounter.take_lead("ab cd ef", 6), "ab cd ef");
    }

    #[test]
    fn budgets() {
        assert_eq!(TokenBudget::default(), TokenBudget::new(1024, 8192, 8192).unwrap());
        assert!(TokenBudget::new(0, 1, 1).is_err());
        assert_eq!(TokenBudget::zero_shot().doc_budget, 2048);
    }

    proptest! {
        #[test]
        fn tokenize_idempotent_on_normalized(text in "\\PC{0,80}") {
            let first = norms(&text);
            prop_assert!(first.iter().all(|t| !t.is_empty() && !t.contains(char::is_whitespace)));
            let again = norms(&first.join(" "));
            prop_assert_eq!(first, again);
        }

        #[test]
        fn take_lead_within_budget(text in "[a-zA-Z .,!?'\\-]{0,120}", budget in 1usize..30) {
            let lead = take_lead(&text, budget);
            prop_assert!(count_tokens(lead) <= budget);
            prop_assert!(text.starts_with(lead));
            prop_assert_eq!(count_tokens(lead), count_tokens(&text).min(budget));
        }

        #[test]
        fn sentences_partition_tokens(text in "[a-zA-Z .!?]{0,120}") {
            let sents = split_sentences(&text);
            let mut next = 0;
            for s in &sents {
                prop_assert_eq!(s.start_token, next);
                prop_assert!(s.start_token < s.end_token);
                prop_assert_eq!(count_tokens(s.text), s.token_count());
                next = s.end_token;
            }
            prop_assert_eq!(next, count_tokens(&text));
        }
    }
}
