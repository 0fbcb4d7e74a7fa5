//! Node identities, roles and respondent behavior backends.

mod llm;
mod scripted;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::debate::{DebateMessage, DebateTranscript};
use crate::id::NodeId;
use crate::reputation::PeerEvaluation;

pub use llm::{persona_preamble, ExchangeLog, LlmBackend, LlmEndpoint};
pub use scripted::{
    contribution_depth, scripted_evaluate_peers, scripted_respond, Depth, QueryScript,
    ScriptEvaluation, ScriptLine, ScriptSet, ScriptedBackend, BUNDLED_SCRIPT_SETS, HIGH_MARKER,
    MEDIUM_MARKER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Requester,
    Coordinator,
    Respondent,
    Validator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeIdentity {
    pub node_id: NodeId,
    pub role: Role,
    #[serde(default)]
    pub declared_expertise: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("intelligence index {0} is outside [0, 1]")]
    IndexOutOfRange(f64),
    #[error("respondent {0} declares no expertise")]
    NoExpertise(NodeId),
    #[error("{0} is not a respondent")]
    NotRespondent(NodeId),
}

/// Discretized intelligence index. Cutoffs are 0.3 and 0.7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Band {
    Low,
    Medium,
    High,
}

impl Band {
    pub fn of(index: f64) -> Band {
        if index < 0.3 {
            Band::Low
        } else if index <= 0.7 {
            Band::Medium
        } else {
            Band::High
        }
    }

    pub fn descriptor(self) -> &'static str {
        match self {
            Band::Low => "low intelligence - basic understanding, simple logic",
            Band::Medium => "medium intelligence - good understanding, moderate analysis",
            Band::High => "high intelligence - expert understanding, complex analysis",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespondentProfile {
    pub identity: NodeIdentity,
    pub intelligence_index: f64,
}

impl RespondentProfile {
    pub fn new(identity: NodeIdentity, intelligence_index: f64) -> Result<Self, ProfileError> {
        if identity.role != Role::Respondent {
            return Err(ProfileError::NotRespondent(identity.node_id));
        }
        if !(0.0..=1.0).contains(&intelligence_index) {
            return Err(ProfileError::IndexOutOfRange(intelligence_index));
        }
        if identity.declared_expertise.is_empty() {
            return Err(ProfileError::NoExpertise(identity.node_id));
        }
        Ok(Self {
            identity,
            intelligence_index,
        })
    }

    pub fn node_id(&self) -> &NodeId {
        &self.identity.node_id
    }

    pub fn band(&self) -> Band {
        Band::of(self.intelligence_index)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("script has no line for {respondent} in cycle {cycle}")]
    NoScriptEntry { respondent: NodeId, cycle: u32 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {0}")]
    Provider(u16),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("credentials variable {0} is not set")]
    MissingCredentials(String),
}

/// How a respondent produces debate messages and peer evaluations.
pub trait BehaviorBackend: Send + Sync {
    /// Produce this respondent's message for `cycle`. The last entry of
    /// `transcript.cycles` is the cycle in progress.
    fn respond(
        &self,
        query: &str,
        cycle: u32,
        transcript: &DebateTranscript,
        profile: &RespondentProfile,
    ) -> Result<DebateMessage, BackendError>;

    /// Evaluate every participant of a finished debate, self included.
    fn evaluate_peers(
        &self,
        transcript: &DebateTranscript,
        profile: &RespondentProfile,
    ) -> Result<Vec<PeerEvaluation>, BackendError>;
}

/// A respondent taking part in a debate.
#[derive(Clone)]
pub struct Participant {
    pub profile: RespondentProfile,
    pub backend: Arc<dyn BehaviorBackend>,
}

impl Participant {
    pub fn new(profile: RespondentProfile, backend: Arc<dyn BehaviorBackend>) -> Self {
        Self { profile, backend }
    }

    pub fn node_id(&self) -> &NodeId {
        self.profile.node_id()
    }
}

impl fmt::Debug for Participant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Participant")
            .field("profile", &self.profile)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(role: Role, expertise: &[&str]) -> NodeIdentity {
        NodeIdentity {
            node_id: "resp1".into(),
            role,
            declared_expertise: expertise.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn bands() {
        assert_eq!(Band::of(0.1), Band::Low);
        assert_eq!(Band::of(0.3), Band::Medium);
        assert_eq!(Band::of(0.5), Band::Medium);
        assert_eq!(Band::of(0.7), Band::Medium);
        assert_eq!(Band::of(0.8), Band::High);
    }

    #[test]
    fn profile_invariants() {
        assert!(RespondentProfile::new(identity(Role::Respondent, &["math"]), 0.5).is_ok());
        assert_eq!(
            RespondentProfile::new(identity(Role::Respondent, &["math"]), 1.5),
            Err(ProfileError::IndexOutOfRange(1.5))
        );
        assert!(matches!(
            RespondentProfile::new(identity(Role::Respondent, &[]), 0.5),
            Err(ProfileError::NoExpertise(_))
        ));
        assert!(matches!(
            RespondentProfile::new(identity(Role::Validator, &["math"]), 0.5),
            Err(ProfileError::NotRespondent(_))
        ));
    }
}
