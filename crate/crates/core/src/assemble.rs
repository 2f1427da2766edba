//! Final model inputs and zero-shot prompts.
//!
//! A fine-tuning input is the budgeted document prefix, the `<|SEARCH|>`
//! separator on its own line, then the grounding block: the reference string
//! followed by ranked passages, separated by blank lines. Passages are taken
//! whole in rank order until the first one that would overflow the grounding
//! budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rerank::ScoredCandidate;
use crate::textproc::{TokenBudget, TokenCounter};

pub const SEARCH_TOKEN: &str = "<|SEARCH|>";
pub const PASSAGE_DELIMITER: &str = "\n\n";

pub const ZERO_SHOT_SYSTEM_PROMPT: &str = "You are a document summarizing agent focusing on summarizing documents to make them readable for a lay audience. Summarize the documents presented by the user in as simple terms as possible.";
pub const ZERO_SHOT_DOCUMENT_HEADER: &str = "Summarize this document for a lay audience:";
pub const ZERO_SHOT_RESULTS_HEADER: &str = "Below are a set of search results that ground the above document.";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PassageRef {
    pub source: String,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInput {
    pub text: String,
    pub search_marker_offset: usize,
    pub global_attention_offsets: Vec<usize>,
    pub doc_tokens_used: usize,
    pub grounding_tokens_used: usize,
    pub passages_used: Vec<PassageRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroShotPrompt {
    pub prompt: PromptPair,
    pub doc_tokens_used: usize,
    pub grounding_tokens_used: usize,
    pub passages_used: Vec<PassageRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionMetadata {
    pub search_marker_offset: usize,
    pub global_attention_offsets: Vec<usize>,
    pub token_count: usize,
}

/// Input text must not smuggle in a second separator. Replacing the literal
/// by its bare word keeps word-token counts unchanged.
fn sanitize(text: &str) -> std::borrow::Cow<'_, str> {
    if text.contains(SEARCH_TOKEN) {
        text.replace(SEARCH_TOKEN, "SEARCH").into()
    } else {
        text.into()
    }
}

struct Selection {
    texts: Vec<String>,
    refs: Vec<PassageRef>,
    tokens: usize,
}

fn select_passages(ranked: &[ScoredCandidate], budget: usize, tok: &dyn TokenCounter) -> Selection {
    let mut sel = Selection {
        texts: Vec::new(),
        refs: Vec::new(),
        tokens: 0,
    };
    for c in ranked {
        let text = sanitize(c.passage.text.trim()).into_owned();
        let cost = tok.count_tokens(&text);
        if sel.tokens + cost > budget {
            break;
        }
        sel.tokens += cost;
        sel.texts.push(text);
        sel.refs.push(PassageRef {
            source: c.passage.source.clone(),
            id: c.passage.passage_id.clone(),
        });
    }
    sel
}

pub fn build_model_input(
    article: &str,
    ranked: &[ScoredCandidate],
    ref_string: &str,
    budgets: &TokenBudget,
    tok: &dyn TokenCounter,
) -> Result<ModelInput> {
    budgets.validate()?;
    let article = sanitize(article);
    let doc = tok.take_lead(&article, budgets.doc_budget);
    let doc_tokens_used = tok.count_tokens(doc);

    let ref_string = sanitize(ref_string.trim());
    let ref_cost = tok.count_tokens(&ref_string);
    if ref_cost > budgets.grounding_budget {
        return Err(Error::ReferenceOverBudget {
            needed: ref_cost,
            budget: budgets.grounding_budget,
        });
    }
    let sel = select_passages(ranked, budgets.grounding_budget - ref_cost, tok);

    let mut block: Vec<&str> = Vec::with_capacity(sel.texts.len() + 1);
    if !ref_string.is_empty() {
        block.push(&ref_string);
    }
    block.extend(sel.texts.iter().map(String::as_str));
    let text = format!("{doc}\n{SEARCH_TOKEN}\n{}", block.join(PASSAGE_DELIMITER));

    let search_marker_offset = doc_tokens_used;
    let mut global_attention_offsets = vec![0, search_marker_offset];
    global_attention_offsets.dedup();
    Ok(ModelInput {
        text,
        search_marker_offset,
        global_attention_offsets,
        doc_tokens_used,
        grounding_tokens_used: ref_cost + sel.tokens,
        passages_used: sel.refs,
    })
}

pub fn build_zero_shot_prompt(
    article: &str,
    ranked: &[ScoredCandidate],
    budgets: &TokenBudget,
    tok: &dyn TokenCounter,
) -> Result<ZeroShotPrompt> {
    budgets.validate()?;
    let doc = tok.take_lead(article, budgets.doc_budget);
    let sel = select_passages(ranked, budgets.grounding_budget, tok);
    let results = sel.texts.join(PASSAGE_DELIMITER);
    Ok(ZeroShotPrompt {
        prompt: PromptPair {
            system: ZERO_SHOT_SYSTEM_PROMPT.to_string(),
            user: format!("{ZERO_SHOT_DOCUMENT_HEADER}\n{doc}\n{ZERO_SHOT_RESULTS_HEADER}\n{results}"),
        },
        doc_tokens_used: tok.count_tokens(doc),
        grounding_tokens_used: sel.tokens,
        passages_used: sel.refs,
    })
}

pub fn emit_attention_metadata(input: &ModelInput, tok: &dyn TokenCounter) -> AttentionMetadata {
    AttentionMetadata {
        search_marker_offset: input.search_marker_offset,
        global_attention_offsets: input.global_attention_offsets.clone(),
        token_count: tok.count_tokens(&input.text),
    }
}
