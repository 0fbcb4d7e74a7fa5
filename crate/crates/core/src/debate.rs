//! Multi-agent debate orchestration.
//!
//! Proposers open cycle 1, then every participant speaks once per cycle in
//! contract order. After each cycle the extracted claims are checked for
//! unanimity, once every participant has heard from every other one.
//! Each cycle becomes one ledger block, followed by a block with
//! the outcome marker.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::contract::{ConsolidatedAnswer, ContractState, QueryContract};
use crate::id::{ContractId, NodeId};
use crate::ledger::{Chain, EntryKind, LedgerError, RecordEntry, RecordFilter};
use crate::netbus::{Bus, BusError, Envelope, EnvelopeKind};
use crate::nodes::Participant;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateMessage {
    pub author: NodeId,
    pub cycle: u32,
    pub text: String,
    pub claim: Option<String>,
}

impl DebateMessage {
    /// Build a message, extracting its claim from `text`.
    pub fn new(author: NodeId, cycle: u32, text: impl Into<String>) -> Self {
        let text = text.into();
        let claim = extract_claim(&text);
        Self {
            author,
            cycle,
            text,
            claim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DebateOutcome {
    Consensus(String),
    MaxRoundsExceeded,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebateTranscript {
    pub contract_id: ContractId,
    pub query: String,
    /// Speaking order.
    pub participants: Vec<NodeId>,
    /// `cycles[i]` holds the messages of cycle `i + 1`.
    pub cycles: Vec<Vec<DebateMessage>>,
    /// `None` while the debate is still running.
    pub outcome: Option<DebateOutcome>,
}

impl DebateTranscript {
    pub fn new(
        contract_id: ContractId,
        query: impl Into<String>,
        participants: Vec<NodeId>,
    ) -> Self {
        Self {
            contract_id,
            query: query.into(),
            participants,
            cycles: Vec::new(),
            outcome: None,
        }
    }

    /// Consensus found after cycle N is shown as a marker row at N + 1.
    pub fn consensus_marker_cycle(&self) -> Option<u32> {
        match self.outcome {
            Some(DebateOutcome::Consensus(_)) => Some(self.cycles.len() as u32 + 1),
            _ => None,
        }
    }

    pub fn messages(&self) -> impl Iterator<Item = &DebateMessage> + '_ {
        self.cycles.iter().flatten()
    }

    pub fn messages_by<'a>(
        &'a self,
        author: &'a NodeId,
    ) -> impl Iterator<Item = &'a DebateMessage> + 'a {
        self.messages().filter(move |m| &m.author == author)
    }

    /// The answer handed back to the coordinator: the consensus claim, or
    /// else the most common claim of the last cycle (ties to the smallest).
    pub fn consolidated_answer(&self) -> Option<ConsolidatedAnswer> {
        if let Some(DebateOutcome::Consensus(a)) = &self.outcome {
            return Some(ConsolidatedAnswer {
                answer: a.clone(),
                consensus: true,
            });
        }
        let last = self.cycles.last()?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for claim in last.iter().filter_map(|m| m.claim.as_deref()) {
            *counts.entry(claim).or_default() += 1;
        }
        let best = counts.values().copied().max()?;
        let answer = counts.into_iter().find(|(_, n)| *n == best)?.0.to_owned();
        Some(ConsolidatedAnswer {
            answer,
            consensus: false,
        })
    }

    /// JSON laid out as cycle → author → text → claim.
    pub fn to_export_json(&self) -> serde_json::Value {
        let cycles: Vec<_> = self
            .cycles
            .iter()
            .enumerate()
            .map(|(i, msgs)| {
                json!({
                    "cycle": i + 1,
                    "messages": msgs.iter().map(|m| json!({
                        "author": m.author,
                        "text": m.text,
                        "claim": m.claim,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "contract_id": self.contract_id,
            "query": self.query,
            "participants": self.participants,
            "cycles": cycles,
            "outcome": self.outcome,
            "consensus_marker_cycle": self.consensus_marker_cycle(),
        })
    }
}

static BOLD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\*\*([^*]+?)\*\*").unwrap());
static ANSWER_IS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\banswer\s+is\s*:?\s*(\S+)").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d+(?:\.\d+)?\b").unwrap());

/// Lowercase, drop punctuation (keeping decimal points between digits) and
/// collapse whitespace. Empty results become `None`.
pub fn normalize_claim(raw: &str) -> Option<String> {
    let chars: Vec<char> = raw.chars().collect();
    let mut out = String::with_capacity(raw.len());
    for (i, &c) in chars.iter().enumerate() {
        if c.is_ascii_punctuation() {
            let decimal = c == '.'
                && i > 0
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if !decimal {
                out.push(' ');
                continue;
            }
        }
        out.extend(c.to_lowercase());
    }
    let joined = out.split_whitespace().collect::<Vec<_>>().join(" ");
    (!joined.is_empty()).then_some(joined)
}

/// The answer asserted by a message, by precedence: last bold token, last
/// token after "answer is", last standalone number.
pub fn extract_claim(text: &str) -> Option<String> {
    let bold = BOLD
        .captures_iter(text)
        .filter_map(|c| normalize_claim(&c[1]))
        .last();
    if bold.is_some() {
        return bold;
    }
    let answer = ANSWER_IS
        .captures_iter(text)
        .filter_map(|c| normalize_claim(&c[1]))
        .last();
    if answer.is_some() {
        return answer;
    }
    NUMBER
        .find_iter(text)
        .last()
        .and_then(|m| normalize_claim(m.as_str()))
}

/// The common claim iff every message carries one and they all agree.
pub fn check_consensus(messages: &[DebateMessage]) -> Option<String> {
    let first = messages.first()?.claim.as_ref()?;
    messages
        .iter()
        .all(|m| m.claim.as_ref() == Some(first))
        .then(|| first.clone())
}

/// Whether unanimity in `cycle` counts as consensus. A cycle qualifies once
/// every participant has seen every other participant's position before
/// speaking in it: from cycle 2 on, or in cycle 1 when debating alone.
pub fn informed(cycle: u32, participants: usize) -> bool {
    cycle >= 2 || participants <= 1
}

#[derive(Debug, Error)]
pub enum DebateError {
    #[error("debate requires a contract in Debating, found {0}")]
    WrongContractState(ContractState),
    #[error("participants do not match the contract: {0}")]
    ParticipantMismatch(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Bus(#[from] BusError),
}

#[derive(Debug, Clone)]
pub struct DebateRun {
    pub transcript: DebateTranscript,
    pub chain: Chain,
}

fn deliver(bus: &mut Bus, envelope: Envelope) -> Result<(), BusError> {
    let to = envelope.to.clone();
    let kind = envelope.kind;
    bus.send(envelope)?;
    bus.run_until(|e| e.to == to && e.kind == kind);
    Ok(())
}

/// Run the debate for `contract` and record it on `chain`.
///
/// A backend failure does not raise: the debate stops with an
/// [`DebateOutcome::Aborted`] outcome, which is recorded like any other, and
/// the caller is expected to abort the contract.
pub fn run_debate(
    contract: &QueryContract,
    participants: &[Participant],
    bus: &mut Bus,
    chain: &Chain,
    validator: &NodeId,
) -> Result<DebateRun, DebateError> {
    if contract.state != ContractState::Debating {
        return Err(DebateError::WrongContractState(contract.state.clone()));
    }
    let order: Vec<&NodeId> = contract.terms.respondents().collect();
    let mut by_id: BTreeMap<&NodeId, &Participant> = BTreeMap::new();
    for p in participants {
        if by_id.insert(p.node_id(), p).is_some() {
            return Err(DebateError::ParticipantMismatch(format!(
                "{} given twice",
                p.node_id()
            )));
        }
    }
    if by_id.len() != order.len() || order.iter().any(|id| !by_id.contains_key(id)) {
        return Err(DebateError::ParticipantMismatch(format!(
            "contract lists {:?}",
            order.iter().map(|n| n.as_str()).collect::<Vec<_>>()
        )));
    }

    let coordinator = &contract.terms.coordinator;
    let terms = &contract.terms;
    let mut transcript = DebateTranscript::new(
        contract.contract_id.clone(),
        terms.query_text.clone(),
        order.iter().map(|n| (*n).clone()).collect(),
    );
    let mut chain = chain.clone();
    let start = bus.now();
    let mut outcome = None;

    'cycles: for cycle in 1..=terms.max_rounds {
        transcript.cycles.push(Vec::new());
        let mut entries = Vec::with_capacity(order.len());
        for node in &order {
            let participant = by_id[node];
            let assignment = json!({ "contract_id": contract.contract_id, "cycle": cycle });
            deliver(
                bus,
                Envelope::new(
                    coordinator.clone(),
                    (*node).clone(),
                    EnvelopeKind::TaskAssignment,
                    assignment.to_string(),
                ),
            )?;
            let reply = participant
                .backend
                .respond(&terms.query_text, cycle, &transcript, &participant.profile)
                .map_err(|e| e.to_string())
                .and_then(|m| {
                    if &m.author != *node || m.cycle != cycle || m.text.trim().is_empty() {
                        Err(format!(
                            "malformed message (author {}, cycle {})",
                            m.author, m.cycle
                        ))
                    } else {
                        Ok(m)
                    }
                });
            let message = match reply {
                Ok(m) => m,
                Err(reason) => {
                    outcome = Some(DebateOutcome::Aborted(format!(
                        "backend failure: {node}: {reason}"
                    )));
                    break 'cycles;
                }
            };
            let body = serde_json::to_string(&message).expect("messages always serialize");
            deliver(
                bus,
                Envelope::new(
                    (*node).clone(),
                    coordinator.clone(),
                    EnvelopeKind::DebateMsg,
                    body.clone(),
                ),
            )?;
            entries.push(RecordEntry::new(
                EntryKind::DebateMessage,
                (*node).clone(),
                contract.contract_id.clone(),
                body,
                bus.now(),
            ));
            transcript
                .cycles
                .last_mut()
                .expect("cycle pushed above")
                .push(message);
        }
        chain = chain.append_block(entries, validator)?;

        if bus.now() - start > terms.response_deadline {
            outcome = Some(DebateOutcome::Aborted("deadline exceeded".into()));
            break;
        }
        if !informed(cycle, order.len()) {
            continue;
        }
        if let Some(answer) = check_consensus(transcript.cycles.last().expect("cycle pushed above"))
        {
            outcome = Some(DebateOutcome::Consensus(answer));
            break;
        }
    }

    // a cycle cut short by a failing backend is not part of the transcript
    if matches!(transcript.cycles.last(), Some(c) if c.len() < order.len()) {
        transcript.cycles.pop();
    }
    transcript.outcome = Some(outcome.unwrap_or(DebateOutcome::MaxRoundsExceeded));
    let conclusion = json!({
        "query": transcript.query,
        "participants": transcript.participants,
        "cycles": transcript.cycles.len(),
        "outcome": transcript.outcome,
        "consensus_marker_cycle": transcript.consensus_marker_cycle(),
    });
    chain = chain.append_block(
        vec![RecordEntry::new(
            EntryKind::DebateConcluded,
            coordinator.clone(),
            contract.contract_id.clone(),
            conclusion.to_string(),
            bus.now(),
        )],
        validator,
    )?;
    Ok(DebateRun { transcript, chain })
}

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("no debate conclusion recorded for contract {0}")]
    MissingConclusion(ContractId),
    #[error("unparsable debate record: {0}")]
    Payload(#[from] serde_json::Error),
    #[error("message for cycle {cycle} recorded out of order")]
    CycleOrder { cycle: u32 },
}

#[derive(Deserialize)]
struct Conclusion {
    query: String,
    participants: Vec<NodeId>,
    outcome: DebateOutcome,
}

/// Rebuild a transcript purely from ledger records.
pub fn transcript_from_chain(
    chain: &Chain,
    contract_id: &ContractId,
) -> Result<DebateTranscript, ReconstructError> {
    let filter = RecordFilter::all().contract(contract_id.clone());
    let mut cycles: Vec<Vec<DebateMessage>> = Vec::new();
    let mut conclusion: Option<Conclusion> = None;
    for entry in chain.query_records(&filter) {
        match entry.entry_kind {
            EntryKind::DebateMessage => {
                let msg: DebateMessage = serde_json::from_str(&entry.payload)?;
                let idx = msg.cycle as usize;
                if idx == 0 || idx < cycles.len() || idx > cycles.len() + 1 {
                    return Err(ReconstructError::CycleOrder { cycle: msg.cycle });
                }
                if idx > cycles.len() {
                    cycles.push(Vec::new());
                }
                cycles[idx - 1].push(msg);
            }
            EntryKind::DebateConcluded => {
                conclusion = Some(serde_json::from_str(&entry.payload)?);
            }
            _ => {}
        }
    }
    let c = conclusion.ok_or_else(|| ReconstructError::MissingConclusion(contract_id.clone()))?;
    if matches!(cycles.last(), Some(last) if last.len() < c.participants.len()) {
        cycles.pop();
    }
    Ok(DebateTranscript {
        contract_id: contract_id.clone(),
        query: c.query,
        participants: c.participants,
        cycles,
        outcome: Some(c.outcome),
    })
}
