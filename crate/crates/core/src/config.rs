//! Run configuration, read from a single TOML file.
//!
//! Every key is optional except what a command actually needs; defaults
//! reproduce the reference setting (1,024-token lead window, 8,192 document
//! and grounding tokens, BM25 k1 = 0.9 and b = 0.4, top-1 per sentence).
//! Relative paths are resolved against the directory of the config file.
//!
//! ```toml
//! dataset = "data/dataset.jsonl"
//! index_dir = "indexes"
//! mode = "finetune-input"        # or "zero-shot-prompt"
//!
//! [[corpora]]
//! name = "abstracts"
//! kind = "searchable"
//! path = "data/abstracts.jsonl"
//!
//! [[corpora]]
//! name = "umls"
//! kind = "definitional"
//! path = "data/definitions.jsonl"
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grounding::{CorpusKind, CorpusSpec, GroundingConfig};
use crate::index::Bm25Params;
use crate::rerank::ScorerSpec;
use crate::textproc::TokenBudget;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    #[serde(rename = "finetune-input")]
    FinetuneInput,
    #[serde(rename = "zero-shot-prompt")]
    ZeroShotPrompt,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finetune-input" => Ok(Mode::FinetuneInput),
            "zero-shot-prompt" => Ok(Mode::ZeroShotPrompt),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected finetune-input or zero-shot-prompt)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetOverrides {
    pub lead: Option<usize>,
    pub doc: Option<usize>,
    pub grounding: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBm25 {
    k1: Option<f64>,
    b: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScorer {
    kind: Option<String>,
    endpoint: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorpus {
    name: String,
    kind: CorpusKind,
    path: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    grounded: Option<PathBuf>,
    provenance: Option<PathBuf>,
    metrics: Option<PathBuf>,
    report: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    generated: Option<PathBuf>,
    references: Option<PathBuf>,
    familiar_words: Option<PathBuf>,
    label: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dataset: Option<PathBuf>,
    index_dir: Option<PathBuf>,
    mode: Option<Mode>,
    per_sentence_k: Option<usize>,
    workers: Option<usize>,
    #[serde(default)]
    budgets: BudgetOverrides,
    #[serde(default)]
    bm25: RawBm25,
    #[serde(default)]
    scorer: RawScorer,
    #[serde(default)]
    corpora: Vec<RawCorpus>,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    eval: RawEval,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: String,
    pub kind: CorpusKind,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub grounded: PathBuf,
    pub provenance: Option<PathBuf>,
    pub metrics: PathBuf,
    pub report: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalInputs {
    pub generated: Option<PathBuf>,
    pub references: Option<PathBuf>,
    pub familiar_words: Option<PathBuf>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub corpora: Vec<CorpusEntry>,
    pub index_dir: PathBuf,
    pub budget_overrides: BudgetOverrides,
    pub scorer: ScorerSpec,
    pub mode: Mode,
    pub bm25: Bm25Params,
    pub per_sentence_k: usize,
    /// Worker threads for per-document processing; `None` means one per core.
    pub workers: Option<usize>,
    pub output: OutputPaths,
    pub eval: EvalInputs,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let at = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let scorer = ScorerSpec::from_parts(
            raw.scorer.kind.as_deref().unwrap_or("lexical"),
            raw.scorer.endpoint.as_deref(),
        )?;
        let defaults = Bm25Params::default();
        let bm25 = Bm25Params::new(raw.bm25.k1.unwrap_or(defaults.k1), raw.bm25.b.unwrap_or(defaults.b))?;
        let corpora = raw
            .corpora
            .into_iter()
            .map(|c| CorpusEntry {
                name: c.name,
                kind: c.kind,
                path: at(c.path),
            })
            .collect();

        let out_dir = base.join("out");
        let cfg = RunConfig {
            dataset: raw.dataset.map(at),
            corpora,
            index_dir: at(raw.index_dir.unwrap_or_else(|| "indexes".into())),
            budget_overrides: raw.budgets,
            scorer,
            mode: raw.mode.unwrap_or_default(),
            bm25,
            per_sentence_k: raw.per_sentence_k.unwrap_or(1),
            workers: raw.workers,
            output: OutputPaths {
                grounded: raw
                    .output
                    .grounded
                    .map(at)
                    .unwrap_or_else(|| out_dir.join("grounded.jsonl")),
                provenance: raw.output.provenance.map(at),
                metrics: raw
                    .output
                    .metrics
                    .map(at)
                    .unwrap_or_else(|| out_dir.join("metrics.json")),
                report: raw.output.report.map(at).unwrap_or_else(|| out_dir.join("report")),
            },
            eval: EvalInputs {
                generated: raw.eval.generated.map(at),
                references: raw.eval.references.map(at),
                familiar_words: raw.eval.familiar_words.map(at),
                label: raw.eval.label,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grounding().validate()?;
        self.budgets().validate()?;
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Budgets after applying configured overrides to the mode's defaults.
    pub fn budgets(&self) -> TokenBudget {
        let base = match self.mode {
            Mode::FinetuneInput => TokenBudget::default(),
            Mode::ZeroShotPrompt => TokenBudget::zero_shot(),
        };
        let o = &self.budget_overrides;
        TokenBudget {
            lead_budget: o.lead.unwrap_or(base.lead_budget),
            doc_budget: o.doc.unwrap_or(base.doc_budget),
            grounding_budget: o.grounding.unwrap_or(base.grounding_budget),
        }
    }

    pub fn grounding(&self) -> GroundingConfig {
        GroundingConfig {
            lead_budget: self.budgets().lead_budget,
            corpora: self
                .corpora
                .iter()
                .map(|c| CorpusSpec {
                    name: c.name.clone(),
                    kind: c.kind,
                })
                .collect(),
            per_sentence_k: self.per_sentence_k,
        }
    }

    pub fn index_path(&self, corpus: &str) -> PathBuf {
        self.index_dir.join(corpus)
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset configured".into()))
    }

    pub fn provenance_path(&self, grounded: &Path) -> PathBuf {
        self.output.provenance.clone().unwrap_or_else(|| {
            let name = grounded
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "grounded".into());
            grounded.with_file_name(format!("{name}.provenance.jsonl"))
        })
    }
}
