//! Query contracts: terms, lifecycle state machine, quality criteria and
//! reward apportionment.
//!
//! Contracts are native state machines. Every state change produces a
//! [`RecordEntry`] that the coordinator batches into the ledger.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;
use thiserror::Error;

use crate::debate::normalize_claim;
use crate::id::{ContractId, NodeId};
use crate::ledger::{EntryKind, RecordEntry};

/// An exact non-negative fraction, written as `"n/d"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(pub Ratio<u64>);

impl Fraction {
    pub fn new(numer: u64, denom: u64) -> Self {
        Fraction(Ratio::new(numer, denom))
    }

    pub fn zero() -> Self {
        Fraction(Ratio::zero())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid fraction {0:?}")]
pub struct FractionParseError(String);

impl FromStr for Fraction {
    type Err = FractionParseError;

    /// Accepts `"n/d"`, integers and finite decimals such as `"0.25"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || FractionParseError(s.to_owned());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| err())?;
            let d: u64 = d.trim().parse().map_err(|_| err())?;
            if d == 0 {
                return Err(err());
            }
            return Ok(Fraction::new(n, d));
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            let int: u64 = if int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| err())?
            };
            let denom = 10u64.pow(frac.len() as u32);
            let frac: u64 = frac.parse().map_err(|_| err())?;
            let numer = int
                .checked_mul(denom)
                .and_then(|v| v.checked_add(frac))
                .ok_or_else(err)?;
            return Ok(Fraction::new(numer, denom));
        }
        s.parse::<u64>()
            .map(|n| Fraction::new(n, 1))
            .map_err(|_| err())
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardRole {
    Coordinator,
    Proposer,
    Debater,
    Validator,
}

/// Share of the pool per role. Must sum to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardSplit {
    pub coordinator: Fraction,
    pub proposer: Fraction,
    pub debater: Fraction,
    pub validator: Fraction,
}

impl Default for RewardSplit {
    fn default() -> Self {
        Self {
            coordinator: Fraction::new(1, 5),
            proposer: Fraction::new(3, 10),
            debater: Fraction::new(2, 5),
            validator: Fraction::new(1, 10),
        }
    }
}

impl RewardSplit {
    pub fn fraction(&self, role: RewardRole) -> Fraction {
        match role {
            RewardRole::Coordinator => self.coordinator,
            RewardRole::Proposer => self.proposer,
            RewardRole::Debater => self.debater,
            RewardRole::Validator => self.validator,
        }
    }

    pub fn total(&self) -> Ratio<u64> {
        self.coordinator.0 + self.proposer.0 + self.debater.0 + self.validator.0
    }
}

/// How validators are paid: a fraction of the pool from the split, or a
/// fixed number of units taken off the top (the validator fraction is then
/// ignored and the other roles share the rest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ValidatorReward {
    #[default]
    Portion,
    Fixed {
        amount: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QualityCriteria {
    /// The debate must end in consensus.
    ConsensusRequired,
    /// The delivered answer must equal this text after claim normalization.
    ExpectedAnswer { answer: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractTerms {
    pub query_text: String,
    pub coordinator: NodeId,
    pub proposers: Vec<NodeId>,
    pub debaters: Vec<NodeId>,
    pub validators: Vec<NodeId>,
    pub max_rounds: u32,
    pub response_deadline: u64,
    pub reward_pool: u64,
    pub reward_split: RewardSplit,
    #[serde(default)]
    pub validator_reward: ValidatorReward,
    pub quality_criteria: QualityCriteria,
}

impl ContractTerms {
    /// Proposers first, then debaters. This is also the speaking order.
    pub fn respondents(&self) -> impl Iterator<Item = &NodeId> + '_ {
        self.proposers.iter().chain(self.debaters.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContractState {
    Deployed,
    AllAccepted,
    Debating,
    AnswerDelivered,
    RewardsDistributed,
    Completed,
    Failed(String),
}

impl ContractState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, ContractState::Completed | ContractState::Failed(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ContractState::Deployed => "Deployed",
            ContractState::AllAccepted => "AllAccepted",
            ContractState::Debating => "Debating",
            ContractState::AnswerDelivered => "AnswerDelivered",
            ContractState::RewardsDistributed => "RewardsDistributed",
            ContractState::Completed => "Completed",
            ContractState::Failed(_) => "Failed",
        }
    }
}

impl fmt::Display for ContractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContractState::Failed(reason) => write!(f, "Failed({reason})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContractEvent {
    DebateStarted,
    AnswerReady,
    QualityPassed,
    RewardsPaid,
    Finalized,
    Abort(String),
}

impl ContractEvent {
    pub fn name(&self) -> &'static str {
        match self {
            ContractEvent::DebateStarted => "DebateStarted",
            ContractEvent::AnswerReady => "AnswerReady",
            ContractEvent::QualityPassed => "QualityPassed",
            ContractEvent::RewardsPaid => "RewardsPaid",
            ContractEvent::Finalized => "Finalized",
            ContractEvent::Abort(_) => "Abort",
        }
    }

    /// Ledger kind of the entry this event emits.
    pub fn entry_kind(&self) -> EntryKind {
        match self {
            ContractEvent::QualityPassed => EntryKind::AnswerDelivered,
            ContractEvent::RewardsPaid => EntryKind::RewardDistribution,
            ContractEvent::Finalized => EntryKind::ContractCompleted,
            ContractEvent::DebateStarted | ContractEvent::AnswerReady | ContractEvent::Abort(_) => {
                EntryKind::ContractTransition
            }
        }
    }
}

impl fmt::Display for ContractEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContractEvent::Abort(reason) => write!(f, "Abort({reason})"),
            other => f.write_str(other.name()),
        }
    }
}

/// The legal-transition table. `None` means the event is illegal in `state`.
///
/// `AnswerReady` records the consolidated answer without leaving `Debating`.
pub fn next_state(state: &ContractState, event: &ContractEvent) -> Option<ContractState> {
    use ContractEvent as E;
    use ContractState as S;
    match (state, event) {
        (s, E::Abort(reason)) if !s.is_terminal() => Some(S::Failed(reason.clone())),
        (S::AllAccepted, E::DebateStarted) => Some(S::Debating),
        (S::Debating, E::AnswerReady) => Some(S::Debating),
        (S::Debating, E::QualityPassed) => Some(S::AnswerDelivered),
        (S::AnswerDelivered, E::RewardsPaid) => Some(S::RewardsDistributed),
        (S::RewardsDistributed, E::Finalized) => Some(S::Completed),
        _ => None,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContractError {
    #[error("reward split sums to {0}, not 1")]
    BadSplit(String),
    #[error("contract lists no proposers or debaters")]
    EmptyParticipants,
    #[error("max_rounds must be at least 1")]
    ZeroRounds,
    #[error("{0} is listed more than once")]
    DuplicateParticipant(NodeId),
    #[error("{0} is not a respondent of this contract")]
    UnknownRespondent(NodeId),
    #[error("{0} has already accepted")]
    DuplicateAcceptance(NodeId),
    #[error("operation requires state {expected}, contract is {actual}")]
    WrongState {
        expected: &'static str,
        actual: ContractState,
    },
    #[error("event {event} is illegal in state {state}")]
    IllegalTransition {
        state: ContractState,
        event: ContractEvent,
    },
}

/// The answer a debate hands back to the coordinator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsolidatedAnswer {
    pub answer: String,
    pub consensus: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityVerdict {
    pub passed: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RewardAllocation {
    pub allocations: BTreeMap<NodeId, u64>,
}

impl RewardAllocation {
    pub fn total(&self) -> u64 {
        self.allocations.values().sum()
    }

    pub fn get(&self, node: &NodeId) -> u64 {
        self.allocations.get(node).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryContract {
    pub contract_id: ContractId,
    pub terms: ContractTerms,
    pub accepted: Vec<NodeId>,
    pub state: ContractState,
}

/// Hands out contract ids that are unique within a run.
#[derive(Debug, Clone, Default)]
pub struct ContractIssuer {
    issued: u64,
}

impl ContractIssuer {
    pub fn new() -> Self {
        Self::default()
    }

    /// The id the next successful [`ContractIssuer::deploy`] will use.
    pub fn peek_id(&self) -> ContractId {
        ContractId::new(format!("C{:04}", self.issued + 1))
    }

    pub fn deploy(
        &mut self,
        terms: ContractTerms,
        tick: u64,
    ) -> Result<(QueryContract, RecordEntry), ContractError> {
        validate_terms(&terms)?;
        let contract_id = self.peek_id();
        self.issued += 1;
        let payload = json!({
            "contract_id": contract_id,
            "state": ContractState::Deployed.name(),
            "terms": terms,
        });
        let entry = RecordEntry::new(
            EntryKind::ContractDeployed,
            terms.coordinator.clone(),
            contract_id.clone(),
            payload.to_string(),
            tick,
        );
        Ok((
            QueryContract {
                contract_id,
                terms,
                accepted: Vec::new(),
                state: ContractState::Deployed,
            },
            entry,
        ))
    }
}

pub fn validate_terms(terms: &ContractTerms) -> Result<(), ContractError> {
    let total = terms.reward_split.total();
    if total != Ratio::from_integer(1) {
        return Err(ContractError::BadSplit(format!(
            "{}/{}",
            total.numer(),
            total.denom()
        )));
    }
    if terms.proposers.is_empty() && terms.debaters.is_empty() {
        return Err(ContractError::EmptyParticipants);
    }
    if terms.max_rounds == 0 {
        return Err(ContractError::ZeroRounds);
    }
    let mut seen = std::collections::BTreeSet::new();
    for node in terms.respondents() {
        if !seen.insert(node) {
            return Err(ContractError::DuplicateParticipant(node.clone()));
        }
    }
    Ok(())
}

impl QueryContract {
    fn transition_payload(
        &self,
        from: &ContractState,
        event: &ContractEvent,
        detail: serde_json::Value,
    ) -> String {
        json!({
            "event": event,
            "from": from,
            "to": self.state,
            "detail": detail,
        })
        .to_string()
    }

    /// Record a respondent's subsidiary agreement.
    pub fn accept_subsidiary(
        &mut self,
        respondent: &NodeId,
        tick: u64,
    ) -> Result<RecordEntry, ContractError> {
        if self.state != ContractState::Deployed {
            return Err(ContractError::WrongState {
                expected: "Deployed",
                actual: self.state.clone(),
            });
        }
        if !self.terms.respondents().any(|r| r == respondent) {
            return Err(ContractError::UnknownRespondent(respondent.clone()));
        }
        if self.accepted.contains(respondent) {
            return Err(ContractError::DuplicateAcceptance(respondent.clone()));
        }
        self.accepted.push(respondent.clone());
        if self.terms.respondents().all(|r| self.accepted.contains(r)) {
            self.state = ContractState::AllAccepted;
        }
        let payload = json!({
            "respondent": respondent,
            "accepted": self.accepted.len(),
            "state": self.state,
        });
        Ok(RecordEntry::new(
            EntryKind::SubsidiaryAccepted,
            respondent.clone(),
            self.contract_id.clone(),
            payload.to_string(),
            tick,
        ))
    }

    /// Apply `event`; on error the contract is unchanged.
    pub fn transition(
        &mut self,
        event: ContractEvent,
        tick: u64,
    ) -> Result<RecordEntry, ContractError> {
        self.transition_with(event, tick, serde_json::Value::Null)
    }

    fn transition_with(
        &mut self,
        event: ContractEvent,
        tick: u64,
        detail: serde_json::Value,
    ) -> Result<RecordEntry, ContractError> {
        let next =
            next_state(&self.state, &event).ok_or_else(|| ContractError::IllegalTransition {
                state: self.state.clone(),
                event: event.clone(),
            })?;
        let from = std::mem::replace(&mut self.state, next);
        let payload = self.transition_payload(&from, &event, detail);
        Ok(RecordEntry::new(
            event.entry_kind(),
            self.terms.coordinator.clone(),
            self.contract_id.clone(),
            payload,
            tick,
        ))
    }

    /// Mark the consolidated answer as ready for the quality check.
    pub fn answer_ready(
        &mut self,
        answer: &ConsolidatedAnswer,
        tick: u64,
    ) -> Result<RecordEntry, ContractError> {
        self.transition_with(ContractEvent::AnswerReady, tick, json!(answer))
    }

    /// Deliver the answer after a passing quality check.
    pub fn deliver_answer(
        &mut self,
        answer: &ConsolidatedAnswer,
        verdict: &QualityVerdict,
        tick: u64,
    ) -> Result<RecordEntry, ContractError> {
        self.transition_with(
            ContractEvent::QualityPassed,
            tick,
            json!({ "answer": answer, "verdict": verdict }),
        )
    }

    /// Check the answer against the contract's quality criteria.
    pub fn evaluate_quality(
        &self,
        answer: &ConsolidatedAnswer,
    ) -> Result<QualityVerdict, ContractError> {
        if self.state != ContractState::Debating {
            return Err(ContractError::WrongState {
                expected: "Debating",
                actual: self.state.clone(),
            });
        }
        Ok(match &self.terms.quality_criteria {
            QualityCriteria::ConsensusRequired if answer.consensus => QualityVerdict {
                passed: true,
                reason: format!("debate reached consensus on {:?}", answer.answer),
            },
            QualityCriteria::ConsensusRequired => QualityVerdict {
                passed: false,
                reason: "debate ended without consensus".into(),
            },
            QualityCriteria::ExpectedAnswer { answer: expected } => {
                let want = normalize_claim(expected);
                let got = normalize_claim(&answer.answer);
                if want.is_some() && want == got {
                    QualityVerdict {
                        passed: true,
                        reason: format!("answer matches expected {expected:?}"),
                    }
                } else {
                    QualityVerdict {
                        passed: false,
                        reason: format!(
                            "answer {:?} does not match expected {expected:?}",
                            answer.answer
                        ),
                    }
                }
            }
        })
    }

    /// Pay out the pool and move to `RewardsDistributed`.
    pub fn distribute_rewards(
        &mut self,
        tick: u64,
    ) -> Result<(RewardAllocation, RecordEntry), ContractError> {
        if self.state != ContractState::AnswerDelivered {
            return Err(ContractError::WrongState {
                expected: "AnswerDelivered",
                actual: self.state.clone(),
            });
        }
        let allocation = allocate_rewards(&self.terms);
        let detail =
            json!({ "pool": self.terms.reward_pool, "allocations": allocation.allocations });
        let entry = self.transition_with(ContractEvent::RewardsPaid, tick, detail)?;
        Ok((allocation, entry))
    }
}

type Quota = Ratio<u128>;

fn widen(f: Fraction) -> Quota {
    Ratio::new(u128::from(*f.0.numer()), u128::from(*f.0.denom()))
}

/// Largest-remainder apportionment of `amount` over weighted slots.
/// Remainder units go to the largest fractional parts; ties by node id,
/// then by role.
fn apportion(amount: u64, slots: &[(RewardRole, &NodeId, Quota)], out: &mut BTreeMap<NodeId, u64>) {
    if slots.is_empty() {
        return;
    }
    let total_weight: Quota = slots.iter().map(|s| s.2).sum();
    let amount_q = Quota::from_integer(u128::from(amount));
    let quotas: Vec<Quota> = if total_weight.is_zero() {
        let n = Quota::from_integer(slots.len() as u128);
        slots.iter().map(|_| amount_q / n).collect()
    } else {
        slots
            .iter()
            .map(|s| amount_q * s.2 / total_weight)
            .collect()
    };
    let floors: Vec<u64> = quotas
        .iter()
        .map(|q| {
            q.floor()
                .to_integer()
                .to_u64()
                .expect("quota never exceeds amount")
        })
        .collect();
    let mut remainder = amount - floors.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..slots.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a].fract();
        let fb = quotas[b].fract();
        fb.cmp(&fa)
            .then_with(|| slots[a].1.cmp(slots[b].1))
            .then_with(|| slots[a].0.cmp(&slots[b].0))
    });
    let mut alloc = floors;
    for &i in &order {
        if remainder == 0 {
            break;
        }
        alloc[i] += 1;
        remainder -= 1;
    }
    for ((_, node, _), units) in slots.iter().zip(alloc) {
        *out.entry((*node).clone()).or_insert(0) += units;
    }
}

/// Split the contract's pool across every role member.
///
/// Each member's exact quota is `pool * role_fraction / role_size`. Roles
/// without members hand their share to the remaining roles in proportion.
/// The result always sums to exactly `reward_pool`.
pub fn allocate_rewards(terms: &ContractTerms) -> RewardAllocation {
    let coordinator = std::slice::from_ref(&terms.coordinator);
    let roles: [(RewardRole, &[NodeId]); 4] = [
        (RewardRole::Coordinator, coordinator),
        (RewardRole::Proposer, &terms.proposers),
        (RewardRole::Debater, &terms.debaters),
        (RewardRole::Validator, &terms.validators),
    ];
    let mut out = BTreeMap::new();
    let mut pool = terms.reward_pool;

    if let ValidatorReward::Fixed { amount } = terms.validator_reward {
        if !terms.validators.is_empty() {
            let paid = amount.min(pool);
            let slots: Vec<_> = terms
                .validators
                .iter()
                .map(|v| (RewardRole::Validator, v, Quota::from_integer(1)))
                .collect();
            apportion(paid, &slots, &mut out);
            pool -= paid;
        }
    }

    let proportional_validators = matches!(terms.validator_reward, ValidatorReward::Portion);
    let mut slots = Vec::new();
    for (role, members) in roles {
        if members.is_empty() || (role == RewardRole::Validator && !proportional_validators) {
            continue;
        }
        let per_member =
            widen(terms.reward_split.fraction(role)) / Quota::from_integer(members.len() as u128);
        slots.extend(members.iter().map(|m| (role, m, per_member)));
    }
    apportion(pool, &slots, &mut out);
    for (_, members) in roles {
        for m in members {
            out.entry(m.clone()).or_insert(0);
        }
    }
    RewardAllocation { allocations: out }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(names: &[&str]) -> Vec<NodeId> {
        names.iter().map(|n| NodeId::new(*n)).collect()
    }

    fn terms() -> ContractTerms {
        ContractTerms {
            query_text: "What is the smallest prime number after 60?".into(),
            coordinator: "coord".into(),
            proposers: ids(&["p"]),
            debaters: ids(&["d1", "d2"]),
            validators: ids(&["v"]),
            max_rounds: 5,
            response_deadline: 100,
            reward_pool: 100,
            reward_split: RewardSplit::default(),
            validator_reward: ValidatorReward::Portion,
            quality_criteria: QualityCriteria::ConsensusRequired,
        }
    }

    fn deployed() -> QueryContract {
        ContractIssuer::new().deploy(terms(), 0).unwrap().0
    }

    fn in_state(state: ContractState) -> QueryContract {
        let mut c = deployed();
        c.state = state;
        c
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!("1/5".parse::<Fraction>().unwrap(), Fraction::new(1, 5));
        assert_eq!("0.3".parse::<Fraction>().unwrap(), Fraction::new(3, 10));
        assert_eq!("1".parse::<Fraction>().unwrap(), Fraction::new(1, 1));
        assert!("1/0".parse::<Fraction>().is_err());
        assert!("-1/2".parse::<Fraction>().is_err());
        assert!("x".parse::<Fraction>().is_err());
        let json = serde_json::to_string(&RewardSplit::default()).unwrap();
        assert!(json.contains("\"3/10\""));
    }

    #[test]
    fn deploy_success_and_fresh_ids() {
        let mut issuer = ContractIssuer::new();
        let (a, entry) = issuer.deploy(terms(), 3).unwrap();
        let (b, _) = issuer.deploy(terms(), 4).unwrap();
        assert_eq!(a.state, ContractState::Deployed);
        assert_ne!(a.contract_id, b.contract_id);
        assert_eq!(entry.entry_kind, EntryKind::ContractDeployed);
        assert_eq!(entry.logical_time, 3);
    }

    #[test]
    fn deploy_rejects_bad_terms() {
        let mut issuer = ContractIssuer::new();
        let mut t = terms();
        t.reward_split.validator = Fraction::zero();
        assert!(matches!(issuer.deploy(t, 0), Err(ContractError::BadSplit(s)) if s == "9/10"));

        let mut t = terms();
        t.max_rounds = 0;
        assert_eq!(issuer.deploy(t, 0).unwrap_err(), ContractError::ZeroRounds);

        let mut t = terms();
        t.proposers.clear();
        t.debaters.clear();
        assert_eq!(
            issuer.deploy(t, 0).unwrap_err(),
            ContractError::EmptyParticipants
        );

        let mut t = terms();
        t.debaters.push("p".into());
        assert!(matches!(
            issuer.deploy(t, 0),
            Err(ContractError::DuplicateParticipant(_))
        ));
        // failed deployments don't consume ids
        assert_eq!(issuer.peek_id(), ContractId::new("C0001"));
    }

    #[test]
    fn acceptance_flow() {
        let mut c = deployed();
        c.accept_subsidiary(&"p".into(), 1).unwrap();
        c.accept_subsidiary(&"d1".into(), 1).unwrap();
        assert_eq!(c.state, ContractState::Deployed);
        assert_eq!(
            c.accept_subsidiary(&"d1".into(), 2),
            Err(ContractError::DuplicateAcceptance("d1".into()))
        );
        assert_eq!(
            c.accept_subsidiary(&"mallory".into(), 2),
            Err(ContractError::UnknownRespondent("mallory".into()))
        );
        let entry = c.accept_subsidiary(&"d2".into(), 2).unwrap();
        assert_eq!(c.state, ContractState::AllAccepted);
        assert_eq!(entry.entry_kind, EntryKind::SubsidiaryAccepted);
        assert!(matches!(
            c.accept_subsidiary(&"d2".into(), 3),
            Err(ContractError::WrongState { .. })
        ));
    }

    #[test]
    fn debate_cannot_start_before_acceptance() {
        let mut c = deployed();
        let err = c.transition(ContractEvent::DebateStarted, 1).unwrap_err();
        assert!(matches!(err, ContractError::IllegalTransition { .. }));
        assert_eq!(c.state, ContractState::Deployed);
    }

    #[test]
    fn full_lifecycle_emits_entries() {
        let mut c = in_state(ContractState::AllAccepted);
        let kinds: Vec<EntryKind> = [
            ContractEvent::DebateStarted,
            ContractEvent::AnswerReady,
            ContractEvent::QualityPassed,
            ContractEvent::RewardsPaid,
            ContractEvent::Finalized,
        ]
        .into_iter()
        .map(|e| c.transition(e, 5).unwrap().entry_kind)
        .collect();
        assert_eq!(c.state, ContractState::Completed);
        assert_eq!(
            kinds,
            [
                EntryKind::ContractTransition,
                EntryKind::ContractTransition,
                EntryKind::AnswerDelivered,
                EntryKind::RewardDistribution,
                EntryKind::ContractCompleted,
            ]
        );
    }

    #[test]
    fn abort_from_any_non_terminal_state() {
        for s in [
            ContractState::Deployed,
            ContractState::AllAccepted,
            ContractState::Debating,
            ContractState::AnswerDelivered,
            ContractState::RewardsDistributed,
        ] {
            let mut c = in_state(s);
            c.transition(ContractEvent::Abort("deadline exceeded".into()), 9)
                .unwrap();
            assert_eq!(c.state, ContractState::Failed("deadline exceeded".into()));
        }
        let mut done = in_state(ContractState::Completed);
        assert!(done
            .transition(ContractEvent::Abort("late".into()), 9)
            .is_err());
    }

    #[test]
    fn quality_criteria() {
        let c = in_state(ContractState::Debating);
        let consensus = ConsolidatedAnswer {
            answer: "61".into(),
            consensus: true,
        };
        assert!(c.evaluate_quality(&consensus).unwrap().passed);
        let split = ConsolidatedAnswer {
            answer: "61".into(),
            consensus: false,
        };
        assert!(!c.evaluate_quality(&split).unwrap().passed);

        let mut c = in_state(ContractState::Debating);
        c.terms.quality_criteria = QualityCriteria::ExpectedAnswer {
            answer: "61".into(),
        };
        assert!(c.evaluate_quality(&split).unwrap().passed);
        let wrong = ConsolidatedAnswer {
            answer: "62".into(),
            consensus: true,
        };
        let v = c.evaluate_quality(&wrong).unwrap();
        assert!(!v.passed);
        assert!(v.reason.contains("62"));

        let early = deployed();
        assert!(matches!(
            early.evaluate_quality(&consensus),
            Err(ContractError::WrongState { .. })
        ));
    }

    #[test]
    fn rewards_default_split() {
        let mut c = in_state(ContractState::AnswerDelivered);
        let (alloc, entry) = c.distribute_rewards(7).unwrap();
        let expect: BTreeMap<NodeId, u64> =
            [("coord", 20), ("p", 30), ("d1", 20), ("d2", 20), ("v", 10)]
                .into_iter()
                .map(|(n, u)| (NodeId::new(n), u))
                .collect();
        assert_eq!(alloc.allocations, expect);
        assert_eq!(c.state, ContractState::RewardsDistributed);
        assert_eq!(entry.entry_kind, EntryKind::RewardDistribution);
    }

    #[test]
    fn rewards_zero_pool() {
        let mut t = terms();
        t.reward_pool = 0;
        let alloc = allocate_rewards(&t);
        assert_eq!(alloc.total(), 0);
        assert_eq!(alloc.allocations.len(), 5);
    }

    #[test]
    fn rewards_remainder_to_largest_fraction() {
        // quotas 20.2, 30.3, 20.2, 20.2, 10.1: the proposer's .3 is largest
        let mut t = terms();
        t.reward_pool = 101;
        let alloc = allocate_rewards(&t);
        assert_eq!(alloc.total(), 101);
        assert_eq!(alloc.get(&"p".into()), 31);
        assert_eq!(alloc.get(&"coord".into()), 20);
    }

    #[test]
    fn rewards_ties_broken_by_node_id() {
        // three debaters share 2/5 of 10 = 4 units: 1.333 each, one extra unit
        let mut t = terms();
        t.reward_pool = 10;
        t.debaters = ids(&["d3", "d1", "d2"]);
        let alloc = allocate_rewards(&t);
        assert_eq!(alloc.total(), 10);
        assert_eq!(alloc.get(&"d1".into()), 2);
        assert_eq!(alloc.get(&"d2".into()), 1);
        assert_eq!(alloc.get(&"d3".into()), 1);
    }

    #[test]
    fn rewards_fixed_validator_mode() {
        let mut t = terms();
        t.validator_reward = ValidatorReward::Fixed { amount: 5 };
        let alloc = allocate_rewards(&t);
        assert_eq!(alloc.get(&"v".into()), 5);
        assert_eq!(alloc.total(), 100);
    }

    #[test]
    fn rewards_empty_role_is_redistributed() {
        let mut t = terms();
        t.proposers.clear();
        t.reward_pool = 70;
        let alloc = allocate_rewards(&t);
        // remaining weights 1/5, 2/5, 1/10 over a pool of 70
        assert_eq!(alloc.get(&"coord".into()), 20);
        assert_eq!(alloc.get(&"d1".into()), 20);
        assert_eq!(alloc.get(&"v".into()), 10);
        assert_eq!(alloc.total(), 70);
    }

    #[test]
    fn rewards_require_delivered_state() {
        let mut c = in_state(ContractState::Debating);
        assert!(matches!(
            c.distribute_rewards(0),
            Err(ContractError::WrongState { .. })
        ));
    }
}
