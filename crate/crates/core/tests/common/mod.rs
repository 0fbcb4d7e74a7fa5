//! Fixtures shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use llmnet::contract::{
    ContractEvent, ContractIssuer, ContractTerms, QualityCriteria, QueryContract, RewardSplit,
};
use llmnet::debate::{DebateMessage, DebateTranscript};
use llmnet::netbus::Bus;
use llmnet::nodes::{
    BackendError, BehaviorBackend, NodeIdentity, Participant, RespondentProfile, Role,
};
use llmnet::reputation::{EvalTag, PeerEvaluation};
use llmnet::{ContractId, NodeId};

pub const COORDINATOR: &str = "coordinator";
pub const VALIDATOR: &str = "validator-1";

pub fn profile(id: &str, index: f64) -> RespondentProfile {
    profile_with(id, index, &["mathematics"])
}

pub fn profile_with(id: &str, index: f64, expertise: &[&str]) -> RespondentProfile {
    RespondentProfile::new(
        NodeIdentity {
            node_id: id.into(),
            role: Role::Respondent,
            declared_expertise: expertise.iter().map(|s| s.to_string()).collect(),
        },
        index,
    )
    .unwrap()
}

/// Answers from a per-node list of claims, one per cycle; the last one
/// repeats. `None` produces a message with no claim.
#[derive(Debug, Clone, Default)]
pub struct FixedBackend {
    pub claims: BTreeMap<NodeId, Vec<Option<String>>>,
}

impl FixedBackend {
    pub fn new(claims: &[(&str, &[Option<&str>])]) -> Self {
        Self {
            claims: claims
                .iter()
                .map(|(id, cs)| {
                    (
                        NodeId::from(*id),
                        cs.iter().map(|c| c.map(str::to_owned)).collect(),
                    )
                })
                .collect(),
        }
    }
}

impl BehaviorBackend for FixedBackend {
    fn respond(
        &self,
        _query: &str,
        cycle: u32,
        _transcript: &DebateTranscript,
        profile: &RespondentProfile,
    ) -> Result<DebateMessage, BackendError> {
        let list =
            self.claims
                .get(profile.node_id())
                .ok_or_else(|| BackendError::NoScriptEntry {
                    respondent: profile.node_id().clone(),
                    cycle,
                })?;
        let claim = list[(cycle as usize - 1).min(list.len() - 1)].clone();
        let text = match claim {
            Some(c) => format!("Having checked again, I hold that the result is **{c}**."),
            None => "I am not sure yet.".to_owned(),
        };
        Ok(DebateMessage::new(profile.node_id().clone(), cycle, text))
    }

    fn evaluate_peers(
        &self,
        transcript: &DebateTranscript,
        profile: &RespondentProfile,
    ) -> Result<Vec<PeerEvaluation>, BackendError> {
        Ok(transcript
            .participants
            .iter()
            .map(|s| PeerEvaluation {
                evaluator: profile.node_id().clone(),
                subject: s.clone(),
                contract_id: transcript.contract_id.clone(),
                text: "Worked well with the group.".into(),
                tags: vec![EvalTag::GoodCollaboration],
            })
            .collect())
    }
}

/// Fails on every call after `ok_cycles` cycles.
#[derive(Debug, Clone)]
pub struct FailingBackend {
    pub ok_cycles: u32,
}

impl BehaviorBackend for FailingBackend {
    fn respond(
        &self,
        _query: &str,
        cycle: u32,
        _transcript: &DebateTranscript,
        profile: &RespondentProfile,
    ) -> Result<DebateMessage, BackendError> {
        if cycle > self.ok_cycles {
            return Err(BackendError::Provider(503));
        }
        Ok(DebateMessage::new(
            profile.node_id().clone(),
            cycle,
            "Still thinking, maybe **7**.",
        ))
    }

    fn evaluate_peers(
        &self,
        _transcript: &DebateTranscript,
        _profile: &RespondentProfile,
    ) -> Result<Vec<PeerEvaluation>, BackendError> {
        Err(BackendError::Provider(503))
    }
}

pub fn participants(
    profiles: &[RespondentProfile],
    backend: Arc<dyn BehaviorBackend>,
) -> Vec<Participant> {
    profiles
        .iter()
        .map(|p| Participant::new(p.clone(), backend.clone()))
        .collect()
}

pub fn terms(query: &str, proposers: &[&str], debaters: &[&str], max_rounds: u32) -> ContractTerms {
    ContractTerms {
        query_text: query.into(),
        coordinator: COORDINATOR.into(),
        proposers: proposers.iter().map(|&s| s.into()).collect(),
        debaters: debaters.iter().map(|&s| s.into()).collect(),
        validators: vec![VALIDATOR.into()],
        max_rounds,
        response_deadline: 1_000,
        reward_pool: 1_000,
        reward_split: RewardSplit::default(),
        validator_reward: Default::default(),
        quality_criteria: QualityCriteria::ConsensusRequired,
    }
}

/// A deployed, fully accepted contract already in `Debating`.
pub fn debating(terms: ContractTerms) -> QueryContract {
    let (mut c, _) = ContractIssuer::new().deploy(terms, 0).unwrap();
    let respondents: Vec<NodeId> = c.terms.respondents().cloned().collect();
    for r in &respondents {
        c.accept_subsidiary(r, 0).unwrap();
    }
    c.transition(ContractEvent::DebateStarted, 0).unwrap();
    c
}

pub fn bus_for(ids: &[&str]) -> Bus {
    let mut bus = Bus::default();
    bus.register(COORDINATOR.into());
    for id in ids {
        bus.register((*id).into());
    }
    bus
}

pub fn contract_id(i: usize) -> ContractId {
    ContractId::new(format!("C{i:04}"))
}

use llmnet::ledger::{Block, Chain, EntryKind, RecordEntry};

/// Raw material for one entry: (kind index, actor, payload, time step).
pub type EntrySeed = (usize, String, String, u64);

/// Build a valid chain, one block per inner list.
pub fn chain_from_seeds(blocks: &[Vec<EntrySeed>]) -> Chain {
    let mut chain = Chain::new();
    let mut time = 0;
    for (b, entries) in blocks.iter().enumerate() {
        let entries = entries
            .iter()
            .map(|(kind, actor, payload, step)| {
                time += step;
                RecordEntry::new(
                    EntryKind::ALL[kind % EntryKind::ALL.len()],
                    actor.as_str().into(),
                    contract_id(b % 3 + 1),
                    payload.clone(),
                    time,
                )
            })
            .collect();
        chain = chain.append_block(entries, &VALIDATOR.into()).unwrap();
    }
    chain
}

fn flip_char(s: &mut String, pos: usize) {
    let mut chars: Vec<char> = s.chars().collect();
    let i = pos % chars.len();
    chars[i] = if chars[i] == 'x' { 'y' } else { 'x' };
    *s = chars.into_iter().collect();
}

/// Change exactly one serialized byte of one field of `block`.
/// `field` picks the field, `pos` the byte within it.
pub fn mutate_block(block: &mut Block, field: usize, pos: usize) {
    let n = block.entries.len();
    let entry = &mut block.entries[pos % n];
    match field % 9 {
        0 => block.index ^= 1 << (pos % 64),
        1 => block.prev_hash.0[pos % 32] ^= 1 << (pos % 8),
        2 => block.block_hash.0[pos % 32] ^= 1 << (pos % 8),
        3 => {
            let mut v = block.validator.as_str().to_owned();
            flip_char(&mut v, pos);
            block.validator = NodeId::new(v);
        }
        4 => {
            let mut a = entry.actor.as_str().to_owned();
            flip_char(&mut a, pos / n);
            entry.actor = NodeId::new(a);
        }
        5 => {
            let mut c = entry.contract_id.as_str().to_owned();
            flip_char(&mut c, pos / n);
            entry.contract_id = ContractId::new(c);
        }
        6 => flip_char(&mut entry.payload, pos / n),
        7 => entry.logical_time ^= 1 << (pos % 64),
        _ => {
            let i = EntryKind::ALL
                .iter()
                .position(|k| *k == entry.entry_kind)
                .unwrap();
            entry.entry_kind = EntryKind::ALL[(i + 1 + pos % 11) % EntryKind::ALL.len()];
        }
    }
}

/// One evaluation in compact form: (evaluator, subject, tag bitmask, contract).
pub type EvalSeed = (usize, usize, u8, usize);

pub fn pool_of(n: usize) -> Vec<RespondentProfile> {
    (0..n)
        .map(|i| {
            profile_with(
                &format!("r{i}"),
                0.1 + 0.8 * (i as f64) / (n as f64),
                if i % 2 == 0 {
                    &["prime number"]
                } else {
                    &["poetry"]
                },
            )
        })
        .collect()
}

pub fn evaluation_from_seed(
    pool: &[RespondentProfile],
    (ev, sub, mask, c): EvalSeed,
) -> PeerEvaluation {
    let evaluator = pool[ev % pool.len()].node_id().clone();
    let subject = pool[sub % pool.len()].node_id().clone();
    let tags = EvalTag::ALL
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, t)| *t)
        .collect();
    PeerEvaluation {
        evaluator,
        subject,
        contract_id: contract_id(c % 4 + 1),
        text: format!("Assessment with mask {mask}."),
        tags,
    }
}

/// Position of `node` in a ranking.
pub fn position(ranking: &[llmnet::reputation::Standing], node: &NodeId) -> usize {
    ranking.iter().position(|s| &s.node_id == node).unwrap()
}
