//! Scripted respondents that replay bundled debate and evaluation scripts.
//!
//! Script lines supply the substance of each message; the respondent's
//! intelligence band decides how it is wrapped. Low-band messages carry the
//! line and a bold final answer, medium-band messages add a short
//! verification note and high-band messages add a numbered verification
//! procedure. Peer evaluations are derived from what each subject visibly
//! contributed to the transcript, filtered through the evaluator's band.

use serde::{Deserialize, Serialize};

use super::{BackendError, Band, BehaviorBackend, RespondentProfile};
use crate::debate::{extract_claim, DebateMessage, DebateTranscript};
use crate::id::NodeId;
use crate::reputation::{EvalTag, PeerEvaluation};

/// Marker opening a medium-band verification note.
pub const MEDIUM_MARKER: &str = "Verification:";
/// Marker opening a high-band verification procedure.
pub const HIGH_MARKER: &str = "Verification steps:";

/// Bundled script sets, one per simulated model family.
pub const BUNDLED_SCRIPT_SETS: [(&str, &str); 4] = [
    ("claude", include_str!("../../scripts/claude.json")),
    ("llama", include_str!("../../scripts/llama.json")),
    ("grok", include_str!("../../scripts/grok.json")),
    ("gpt4o", include_str!("../../scripts/gpt4o.json")),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptLine {
    pub respondent: NodeId,
    pub cycle: u32,
    pub text: String,
    /// Answer the line commits to; `None` for lines that take no position.
    #[serde(default)]
    pub claim: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEvaluation {
    pub evaluator: NodeId,
    pub subject: NodeId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryScript {
    pub query: String,
    pub lines: Vec<ScriptLine>,
    #[serde(default)]
    pub evaluations: Vec<ScriptEvaluation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptSet {
    pub name: String,
    #[serde(default)]
    pub model: String,
    pub queries: Vec<QueryScript>,
}

impl ScriptSet {
    pub fn bundled(name: &str) -> Option<ScriptSet> {
        BUNDLED_SCRIPT_SETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| serde_json::from_str(text).expect("bundled scripts are valid JSON"))
    }

    pub fn query(&self, query: &str) -> Option<&QueryScript> {
        self.queries.iter().find(|q| q.query.trim() == query.trim())
    }

    fn line(&self, query: &str, respondent: &NodeId, cycle: u32) -> Option<&ScriptLine> {
        self.query(query)?
            .lines
            .iter()
            .find(|l| &l.respondent == respondent && l.cycle == cycle)
    }

    fn evaluation_text(&self, query: &str, evaluator: &NodeId, subject: &NodeId) -> Option<&str> {
        self.query(query)?
            .evaluations
            .iter()
            .find(|e| &e.evaluator == evaluator && &e.subject == subject)
            .map(|e| e.text.as_str())
    }
}

fn render(band: Band, text: &str, claim: Option<&str>) -> String {
    let mut out = text.trim().to_owned();
    match band {
        Band::Low => {}
        Band::Medium => out.push_str(&format!(
            "\n\n{MEDIUM_MARKER} I re-checked this position against the query and the \
             earlier messages, and it still holds."
        )),
        Band::High => out.push_str(&format!(
            "\n\n{HIGH_MARKER}\n\
             1. Restate the query and the exact quantity it asks for.\n\
             2. Test the candidate answer directly against that definition.\n\
             3. Rule out every smaller candidate that could satisfy the query.\n\
             4. Check that no earlier message in the debate contradicts the result."
        )),
    }
    if let Some(claim) = claim {
        out.push_str(&format!("\n\nFinal answer: **{claim}**."));
    }
    out
}

/// Replay the script line for `(profile, cycle)`, wrapped for the profile's band.
pub fn scripted_respond(
    script: &ScriptSet,
    query: &str,
    cycle: u32,
    profile: &RespondentProfile,
) -> Result<DebateMessage, BackendError> {
    let line = script
        .line(query, profile.node_id(), cycle)
        .ok_or_else(|| BackendError::NoScriptEntry {
            respondent: profile.node_id().clone(),
            cycle,
        })?;
    let text = render(profile.band(), &line.text, line.claim.as_deref());
    // lines that take no position carry no claim, whatever numbers they mention
    let claim = line.claim.as_ref().and_then(|_| extract_claim(&text));
    Ok(DebateMessage {
        author: profile.node_id().clone(),
        cycle,
        text,
        claim,
    })
}

/// How much verification a participant showed across the debate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Depth {
    Shallow,
    Reasoned,
    Systematic,
}

pub fn message_depth(text: &str) -> Depth {
    if text.contains(HIGH_MARKER) {
        Depth::Systematic
    } else if text.contains(MEDIUM_MARKER) {
        Depth::Reasoned
    } else {
        Depth::Shallow
    }
}

pub fn contribution_depth(transcript: &DebateTranscript, subject: &NodeId) -> Depth {
    transcript
        .messages_by(subject)
        .map(|m| message_depth(&m.text))
        .max()
        .unwrap_or(Depth::Shallow)
}

fn ended_on_answer(transcript: &DebateTranscript, subject: &NodeId) -> bool {
    let Some(answer) = transcript.consolidated_answer() else {
        return false;
    };
    transcript
        .messages_by(subject)
        .last()
        .and_then(|m| m.claim.as_deref())
        == Some(answer.answer.as_str())
}

fn tags_for(
    transcript: &DebateTranscript,
    evaluator: &RespondentProfile,
    subject: &NodeId,
) -> Vec<EvalTag> {
    let depth = contribution_depth(transcript, subject);
    let correct = ended_on_answer(transcript, subject);
    let mut tags = Vec::new();
    match evaluator.band() {
        Band::Low if subject == evaluator.node_id() => {
            tags.push(EvalTag::BiasedSelfPromotion);
            if correct {
                tags.push(EvalTag::CorrectAnswer);
            }
        }
        Band::Low if depth == Depth::Systematic => tags.push(EvalTag::UnwarrantedCriticism),
        Band::Low => tags.push(EvalTag::GoodCollaboration),
        Band::Medium | Band::High => {
            match depth {
                Depth::Systematic => tags.push(EvalTag::SubstantiveProof),
                Depth::Reasoned => tags.push(EvalTag::GoodCollaboration),
                Depth::Shallow => tags.extend([EvalTag::ShallowAgreement, EvalTag::LimitedDepth]),
            }
            if correct {
                tags.push(EvalTag::CorrectAnswer);
            }
        }
    }
    tags
}

fn fallback_text(tags: &[EvalTag]) -> String {
    tags.iter()
        .map(|t| t.phrase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// One evaluation per participant, self included, in speaking order.
pub fn scripted_evaluate_peers(
    script: &ScriptSet,
    transcript: &DebateTranscript,
    profile: &RespondentProfile,
) -> Vec<PeerEvaluation> {
    transcript
        .participants
        .iter()
        .map(|subject| {
            let tags = tags_for(transcript, profile, subject);
            let text = script
                .evaluation_text(&transcript.query, profile.node_id(), subject)
                .map(str::to_owned)
                .unwrap_or_else(|| fallback_text(&tags));
            PeerEvaluation {
                evaluator: profile.node_id().clone(),
                subject: subject.clone(),
                contract_id: transcript.contract_id.clone(),
                text,
                tags,
            }
        })
        .collect()
}

/// Backend replaying a [`ScriptSet`]. Pure: same inputs, same bytes.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    script: std::sync::Arc<ScriptSet>,
}

impl ScriptedBackend {
    pub fn new(script: std::sync::Arc<ScriptSet>) -> Self {
        Self { script }
    }
}

impl BehaviorBackend for ScriptedBackend {
    fn respond(
        &self,
        query: &str,
        cycle: u32,
        _transcript: &DebateTranscript,
        profile: &RespondentProfile,
    ) -> Result<DebateMessage, BackendError> {
        scripted_respond(&self.script, query, cycle, profile)
    }

    fn evaluate_peers(
        &self,
        transcript: &DebateTranscript,
        profile: &RespondentProfile,
    ) -> Result<Vec<PeerEvaluation>, BackendError> {
        Ok(scripted_evaluate_peers(&self.script, transcript, profile))
    }
}
