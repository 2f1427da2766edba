//! Client side of the model service's HTTP/JSON contract.
//!
//! `POST /rerank` takes `{"query", "candidates": [{"id", "text"}]}` and
//! answers `{"scores": [{"id", "score"}]}`; `POST /summarize` takes
//! `{"system", "user", "temperature"}` and answers `{"summary"}`. Failures
//! are non-2xx responses carrying `{"error"}`.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Passage;
use crate::error::{Error, Result};
use crate::rerank::PassageScorer;

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireCandidate {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankRequest {
    pub query: String,
    pub candidates: Vec<WireCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdScore {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankResponse {
    pub scores: Vec<IdScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeRequest {
    pub system: String,
    pub user: String,
    #[serde(default)]
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizeResponse {
    pub summary: String,
}

#[derive(Debug, Deserialize)]
struct ErrorBody {
    error: String,
}

pub struct BridgeClient {
    base: String,
    http: reqwest::blocking::Client,
}

impl BridgeClient {
    pub fn new(endpoint: &str) -> Result<Self> {
        Self::with_timeout(endpoint, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(endpoint: &str, timeout: Duration) -> Result<Self> {
        let endpoint = endpoint.trim().trim_end_matches('/');
        if endpoint.is_empty() {
            return Err(Error::Config("empty model service endpoint".into()));
        }
        let base = if endpoint.contains("://") {
            endpoint.to_string()
        } else {
            format!("http://{endpoint}")
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Remote(e.to_string()))?;
        Ok(BridgeClient { base, http })
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(&self, path: &str, body: &Req) -> Result<Resp> {
        let url = format!("{}{path}", self.base);
        let resp = self
            .http
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| Error::Remote(format!("{url}: {e}")))?;
        let status = resp.status();
        let bytes = resp.bytes().map_err(|e| Error::Remote(format!("{url}: {e}")))?;
        if !status.is_success() {
            let detail = serde_json::from_slice::<ErrorBody>(&bytes)
                .map(|b| b.error)
                .unwrap_or_else(|_| String::from_utf8_lossy(&bytes).into_owned());
            return Err(Error::Remote(format!("{url}: HTTP {status}: {detail}")));
        }
        serde_json::from_slice(&bytes).map_err(|e| Error::Remote(format!("{url}: bad response body: {e}")))
    }

    /// Scores every candidate; the response must cover exactly the request ids.
    pub fn rerank(&self, req: &RerankRequest) -> Result<HashMap<String, f64>> {
        let resp: RerankResponse = self.post("/rerank", req)?;
        validate_rerank(req, &resp)
    }

    pub fn summarize(&self, req: &SummarizeRequest) -> Result<String> {
        if req.user.trim().is_empty() {
            return Err(Error::InvalidArgument(
                "summarize request has an empty user prompt".into(),
            ));
        }
        let resp: SummarizeResponse = self.post("/summarize", req)?;
        if resp.summary.trim().is_empty() {
            return Err(Error::Remote("model service returned an empty summary".into()));
        }
        Ok(resp.summary)
    }
}

/// Checks that `resp` holds exactly one finite score for each request id.
pub fn validate_rerank(req: &RerankRequest, resp: &RerankResponse) -> Result<HashMap<String, f64>> {
    let mut scores = HashMap::with_capacity(resp.scores.len());
    for s in &resp.scores {
        if !s.score.is_finite() {
            return Err(Error::Remote(format!("non-finite score for candidate {:?}", s.id)));
        }
        if scores.insert(s.id.clone(), s.score).is_some() {
            return Err(Error::Remote(format!("candidate {:?} scored twice", s.id)));
        }
    }
    let missing: Vec<&str> = req
        .candidates
        .iter()
        .filter(|c| !scores.contains_key(&c.id))
        .map(|c| c.id.as_str())
        .collect();
    if !missing.is_empty() || scores.len() != req.candidates.len() {
        return Err(Error::Remote(format!(
            "rerank response is not a permutation of the request (missing: {missing:?})"
        )));
    }
    Ok(scores)
}

/// [`PassageScorer`] backed by the model service; one request per pool.
pub struct RemoteScorer {
    client: BridgeClient,
}

impl RemoteScorer {
    pub fn new(endpoint: &str) -> Result<Self> {
        Ok(RemoteScorer {
            client: BridgeClient::new(endpoint)?,
        })
    }
}

impl PassageScorer for RemoteScorer {
    fn score(&self, query: &str, passages: &[Passage]) -> Result<Vec<f64>> {
        if passages.is_empty() {
            return Ok(Vec::new());
        }
        // Positions are unique even when passage ids repeat across sources.
        let req = RerankRequest {
            query: query.to_string(),
            candidates: passages
                .iter()
                .enumerate()
                .map(|(i, p)| WireCandidate {
                    id: i.to_string(),
                    text: p.text.clone(),
                })
                .collect(),
        };
        let scores = self.client.rerank(&req)?;
        Ok(req.candidates.iter().map(|c| scores[&c.id]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(ids: &[&str]) -> RerankRequest {
        RerankRequest {
            query: "q".into(),
            candidates: ids
                .iter()
                .map(|id| WireCandidate {
                    id: id.to_string(),
                    text: "t".into(),
                })
                .collect(),
        }
    }

    fn resp(pairs: &[(&str, f64)]) -> RerankResponse {
        RerankResponse {
            scores: pairs
                .iter()
                .map(|(id, score)| IdScore {
                    id: id.to_string(),
                    score: *score,
                })
                .collect(),
        }
    }

    #[test]
    fn permutation_check() {
        let r = req(&["a", "b", "c"]);
        let ok = validate_rerank(&r, &resp(&[("c", 0.1), ("a", 0.3), ("b", 0.2)])).unwrap();
        assert_eq!(ok["a"], 0.3);
        assert!(validate_rerank(&r, &resp(&[("a", 0.1), ("b", 0.2)])).is_err());
        assert!(validate_rerank(&r, &resp(&[("a", 0.1), ("b", 0.2), ("d", 0.0)])).is_err());
        assert!(validate_rerank(&r, &resp(&[("a", 0.1), ("a", 0.2), ("b", 0.0)])).is_err());
        assert!(validate_rerank(&r, &resp(&[("a", 0.1), ("b", f64::INFINITY), ("c", 0.0)])).is_err());
    }

    #[test]
    fn wire_shapes() {
        let body = serde_json::to_value(req(&["x"])).unwrap();
        assert_eq!(
            body,
            serde_json::json!({"query": "q", "candidates": [{"id": "x", "text": "t"}]})
        );
        let s: SummarizeRequest = serde_json::from_str(r#"{"system":"s","user":"u"}"#).unwrap();
        assert_eq!(s.temperature, 0.0);
    }

    #[test]
    fn endpoint_normalization() {
        assert_eq!(
            BridgeClient::new("localhost:8000/").unwrap().base,
            "http://localhost:8000"
        );
        assert!(BridgeClient::new("  ").is_err());
    }
}
