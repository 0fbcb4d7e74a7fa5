//! Chat-completion backend for respondents played by a real model.
//!
//! Speaks the OpenAI-compatible `/chat/completions` protocol with the
//! temperature pinned to 0. Every exchange is appended to an audit log.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, BehaviorBackend, RespondentProfile};
use crate::debate::{DebateMessage, DebateTranscript};
use crate::reputation::{default_keyword_rules, derive_tags, KeywordRule, PeerEvaluation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmEndpoint {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token. Unset means no auth header.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

/// Append-only NDJSON log of requests and responses.
#[derive(Debug)]
pub struct ExchangeLog(Mutex<File>);

impl ExchangeLog {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self(Mutex::new(file)))
    }

    fn record(&self, entry: &Value) {
        if let Ok(mut f) = self.0.lock() {
            // audit logging must not take the debate down
            let _ = writeln!(f, "{entry}");
        }
    }
}

/// The role-conditioning system prompt for a respondent.
pub fn persona_preamble(profile: &RespondentProfile) -> String {
    format!(
        "You are respondent {} in a multi-agent debate on a decentralized LLM network. \
         Your capability is constrained by an intelligence index of {:.1} ({}). \
         Answer only at that level of understanding. \
         End every message with your answer in bold, for example **42**.",
        profile.node_id(),
        profile.intelligence_index,
        profile.band().descriptor(),
    )
}

fn render_transcript(transcript: &DebateTranscript) -> String {
    let mut out = String::new();
    for (i, cycle) in transcript.cycles.iter().enumerate() {
        for m in cycle {
            out.push_str(&format!("[cycle {} | {}] {}\n", i + 1, m.author, m.text));
        }
    }
    out
}

pub struct LlmBackend {
    endpoint: LlmEndpoint,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    keyword_rules: Vec<KeywordRule>,
    log: Option<ExchangeLog>,
}

impl LlmBackend {
    /// Reads the credential variable now; fails if it is named but unset.
    pub fn new(endpoint: LlmEndpoint) -> Result<Self, BackendError> {
        let api_key = match &endpoint.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| BackendError::MissingCredentials(var.clone()))?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint,
            api_key,
            client,
            keyword_rules: default_keyword_rules(),
            log: None,
        })
    }

    pub fn with_log(mut self, log: ExchangeLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn with_keyword_rules(mut self, rules: Vec<KeywordRule>) -> Self {
        self.keyword_rules = rules;
        self
    }

    fn complete(&self, node: &str, system: &str, user: &str) -> Result<String, BackendError> {
        let url = format!(
            "{}/chat/completions",
            self.endpoint.base_url.trim_end_matches('/')
        );
        let body = json!({
            "model": self.endpoint.model,
            "temperature": 0,
            "messages": [
                { "role": "system", "content": system },
                { "role": "user", "content": user },
            ],
        });
        let mut req = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let result = req.send();
        let resp = match result {
            Ok(r) => r,
            Err(e) => {
                self.log_exchange(node, &body, None, &Value::Null);
                return Err(BackendError::Transport(e.to_string()));
            }
        };
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let parsed: Value = serde_json::from_str(&text).unwrap_or(Value::String(text));
        self.log_exchange(node, &body, Some(status.as_u16()), &parsed);
        if !status.is_success() {
            return Err(BackendError::Provider(status.as_u16()));
        }
        parsed
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| {
                BackendError::MalformedResponse("missing choices[0].message.content".into())
            })
    }

    fn log_exchange(&self, node: &str, request: &Value, status: Option<u16>, response: &Value) {
        if let Some(log) = &self.log {
            log.record(&json!({
                "node": node,
                "request": request,
                "status": status,
                "response": response,
            }));
        }
    }
}

impl BehaviorBackend for LlmBackend {
    fn respond(
        &self,
        query: &str,
        cycle: u32,
        transcript: &DebateTranscript,
        profile: &RespondentProfile,
    ) -> Result<DebateMessage, BackendError> {
        let user = format!(
            "Query: {query}\n\nDebate so far:\n{}\nThis is cycle {cycle}. Give your contribution.",
            render_transcript(transcript)
        );
        let text = self.complete(
            profile.node_id().as_str(),
            &persona_preamble(profile),
            &user,
        )?;
        // a message without a parsable claim is kept; it simply blocks consensus
        Ok(DebateMessage::new(profile.node_id().clone(), cycle, text))
    }

    fn evaluate_peers(
        &self,
        transcript: &DebateTranscript,
        profile: &RespondentProfile,
    ) -> Result<Vec<PeerEvaluation>, BackendError> {
        let system = persona_preamble(profile);
        let history = render_transcript(transcript);
        transcript
            .participants
            .iter()
            .map(|subject| {
                let whom = if subject == profile.node_id() {
                    "your own contribution".to_owned()
                } else {
                    format!("the contribution of {subject}")
                };
                let user = format!(
                    "Query: {}\n\nDebate transcript:\n{history}\nIn one or two sentences, assess {whom}.",
                    transcript.query
                );
                let text = self.complete(profile.node_id().as_str(), &system, &user)?;
                let is_self = subject == profile.node_id();
                Ok(PeerEvaluation {
                    evaluator: profile.node_id().clone(),
                    subject: subject.clone(),
                    contract_id: transcript.contract_id.clone(),
                    tags: derive_tags(&text, is_self, &self.keyword_rules),
                    text,
                })
            })
            .collect()
    }
}
