//! Peer evaluation and reputation-driven respondent selection.
//!
//! Evaluations are kept as text on the ledger: free-form prose plus a small
//! set of tags, serialized together as the entry payload. There is no
//! numeric reputation score. Selection reads the recorded evaluations back
//! and applies fixed rules: drop respondents whose peers were mostly
//! negative or who promoted themselves against their peers' judgement, then
//! rank the rest by the positive findings they received.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use regex::RegexBuilder;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::debate::DebateTranscript;
use crate::id::{ContractId, NodeId};
use crate::ledger::{Chain, EntryKind, LedgerError, RecordEntry, RecordFilter};
use crate::nodes::{Participant, RespondentProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvalTag {
    SubstantiveProof,
    CorrectAnswer,
    ShallowAgreement,
    BiasedSelfPromotion,
    UnwarrantedCriticism,
    GoodCollaboration,
    LimitedDepth,
}

impl EvalTag {
    pub const ALL: [EvalTag; 7] = [
        EvalTag::SubstantiveProof,
        EvalTag::CorrectAnswer,
        EvalTag::ShallowAgreement,
        EvalTag::BiasedSelfPromotion,
        EvalTag::UnwarrantedCriticism,
        EvalTag::GoodCollaboration,
        EvalTag::LimitedDepth,
    ];

    pub fn is_negative(self) -> bool {
        matches!(
            self,
            EvalTag::ShallowAgreement
                | EvalTag::LimitedDepth
                | EvalTag::UnwarrantedCriticism
                | EvalTag::BiasedSelfPromotion
        )
    }

    /// Counts toward rank.
    pub fn is_merit(self) -> bool {
        matches!(self, EvalTag::SubstantiveProof | EvalTag::CorrectAnswer)
    }

    pub fn phrase(self) -> &'static str {
        match self {
            EvalTag::SubstantiveProof => "Backed the answer with a substantive proof.",
            EvalTag::CorrectAnswer => "Arrived at the correct answer.",
            EvalTag::ShallowAgreement => "Mostly agreed with others without adding reasoning.",
            EvalTag::BiasedSelfPromotion => "My own contribution was the strongest in the debate.",
            EvalTag::UnwarrantedCriticism => "Overcomplicated the discussion.",
            EvalTag::GoodCollaboration => "Built constructively on the other contributions.",
            EvalTag::LimitedDepth => "Contributions showed limited depth.",
        }
    }
}

impl fmt::Display for EvalTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerEvaluation {
    pub evaluator: NodeId,
    pub subject: NodeId,
    pub contract_id: ContractId,
    pub text: String,
    pub tags: Vec<EvalTag>,
}

impl PeerEvaluation {
    pub fn is_self(&self) -> bool {
        self.evaluator == self.subject
    }

    pub fn is_negative(&self) -> bool {
        self.tags.iter().any(|t| t.is_negative())
    }

    pub fn has(&self, tag: EvalTag) -> bool {
        self.tags.contains(&tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordScope {
    #[default]
    Any,
    SelfOnly,
    PeerOnly,
}

/// Maps a phrase found in free-text feedback to a tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordRule {
    pub phrase: String,
    pub tag: EvalTag,
    #[serde(default)]
    pub scope: KeywordScope,
}

impl KeywordRule {
    fn new(phrase: &str, tag: EvalTag, scope: KeywordScope) -> Self {
        Self {
            phrase: phrase.to_owned(),
            tag,
            scope,
        }
    }
}

pub fn default_keyword_rules() -> Vec<KeywordRule> {
    use EvalTag::*;
    use KeywordScope::*;
    vec![
        KeywordRule::new("lacked depth", LimitedDepth, Any),
        KeywordRule::new("lacked analytical depth", LimitedDepth, Any),
        KeywordRule::new("without depth", LimitedDepth, Any),
        KeywordRule::new("limited depth", LimitedDepth, Any),
        KeywordRule::new("depth of reasoning was limited", LimitedDepth, Any),
        KeywordRule::new("minimal", LimitedDepth, Any),
        KeywordRule::new("needed more detailed", LimitedDepth, Any),
        KeywordRule::new("basic confirmation", ShallowAgreement, Any),
        KeywordRule::new("basic confirmations", ShallowAgreement, Any),
        KeywordRule::new("primarily agreed", ShallowAgreement, Any),
        KeywordRule::new("agreed without", ShallowAgreement, Any),
        KeywordRule::new("proof", SubstantiveProof, Any),
        KeywordRule::new("systematic", SubstantiveProof, Any),
        KeywordRule::new("rigorous", SubstantiveProof, Any),
        KeywordRule::new("thorough verification", SubstantiveProof, Any),
        KeywordRule::new("correct", CorrectAnswer, Any),
        KeywordRule::new("collaboration", GoodCollaboration, Any),
        KeywordRule::new("built on", GoodCollaboration, Any),
        KeywordRule::new("constructively", GoodCollaboration, Any),
        KeywordRule::new("big words", UnwarrantedCriticism, PeerOnly),
        KeywordRule::new("complicated", UnwarrantedCriticism, PeerOnly),
        KeywordRule::new("overcomplicated", UnwarrantedCriticism, PeerOnly),
        KeywordRule::new("excellent", BiasedSelfPromotion, SelfOnly),
        KeywordRule::new("strongest", BiasedSelfPromotion, SelfOnly),
        KeywordRule::new("outstanding", BiasedSelfPromotion, SelfOnly),
    ]
}

/// Tags implied by `text` under `rules`, matched case-insensitively on word
/// boundaries, in [`EvalTag::ALL`] order without duplicates.
pub fn derive_tags(text: &str, is_self: bool, rules: &[KeywordRule]) -> Vec<EvalTag> {
    let mut found = BTreeSet::new();
    for rule in rules {
        let in_scope = match rule.scope {
            KeywordScope::Any => true,
            KeywordScope::SelfOnly => is_self,
            KeywordScope::PeerOnly => !is_self,
        };
        if !in_scope {
            continue;
        }
        let pattern = format!(r"\b{}\b", regex::escape(&rule.phrase));
        let re = RegexBuilder::new(&pattern)
            .case_insensitive(true)
            .build()
            .expect("escaped phrase is a valid pattern");
        if re.is_match(text) {
            found.insert(rule.tag);
        }
    }
    EvalTag::ALL
        .into_iter()
        .filter(|t| found.contains(t))
        .collect()
}

#[derive(Debug, Error)]
pub enum ReputationError {
    #[error("debate has no outcome yet")]
    DebateNotConcluded,
    #[error("backend failure for {node}: {reason}")]
    BackendFailure { node: NodeId, reason: String },
    #[error("pool of {pool} cannot supply {k} respondents")]
    PoolTooSmall { pool: usize, k: usize },
    #[error("at least one respondent must be requested")]
    ZeroK,
    #[error("unparsable evaluation record: {0}")]
    Payload(#[from] serde_json::Error),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Ask every participant to evaluate every participant, self included.
pub fn collect_evaluations(
    participants: &[Participant],
    transcript: &DebateTranscript,
) -> Result<Vec<PeerEvaluation>, ReputationError> {
    if transcript.outcome.is_none() {
        return Err(ReputationError::DebateNotConcluded);
    }
    let by_id: BTreeMap<&NodeId, &Participant> =
        participants.iter().map(|p| (p.node_id(), p)).collect();
    let mut out = Vec::with_capacity(transcript.participants.len().pow(2));
    for evaluator in &transcript.participants {
        let failure = |reason: String| ReputationError::BackendFailure {
            node: evaluator.clone(),
            reason,
        };
        let p = by_id
            .get(evaluator)
            .ok_or_else(|| failure("no backend for participant".into()))?;
        let evals = p
            .backend
            .evaluate_peers(transcript, &p.profile)
            .map_err(|e| failure(e.to_string()))?;
        let subjects: Vec<&NodeId> = evals.iter().map(|e| &e.subject).collect();
        if subjects != transcript.participants.iter().collect::<Vec<_>>() {
            return Err(failure(format!(
                "evaluated {subjects:?} instead of every participant"
            )));
        }
        for mut e in evals {
            if e.evaluator != *evaluator || e.text.trim().is_empty() {
                return Err(failure("malformed evaluation".into()));
            }
            e.contract_id = transcript.contract_id.clone();
            out.push(e);
        }
    }
    Ok(out)
}

/// Append one block holding one entry per evaluation.
pub fn record_evaluations(
    chain: &Chain,
    evaluations: &[PeerEvaluation],
    validator: &NodeId,
    tick: u64,
) -> Result<Chain, LedgerError> {
    let entries = evaluations
        .iter()
        .map(|e| {
            RecordEntry::new(
                EntryKind::PeerEvaluation,
                e.evaluator.clone(),
                e.contract_id.clone(),
                serde_json::to_string(e).expect("evaluations always serialize"),
                tick,
            )
        })
        .collect();
    chain.append_block(entries, validator)
}

/// Every evaluation on the chain, in chain order.
pub fn evaluations_from_chain(chain: &Chain) -> Result<Vec<PeerEvaluation>, serde_json::Error> {
    chain
        .query_records(&RecordFilter::all().kind(EntryKind::PeerEvaluation))
        .into_iter()
        .map(|e| serde_json::from_str(&e.payload))
        .collect()
}

/// `evaluator → subject → evaluation` for one contract.
pub fn evaluation_matrix(evaluations: &[PeerEvaluation]) -> serde_json::Value {
    let mut rows: BTreeMap<&NodeId, BTreeMap<&NodeId, serde_json::Value>> = BTreeMap::new();
    for e in evaluations {
        rows.entry(&e.evaluator)
            .or_default()
            .insert(&e.subject, json!({ "text": e.text, "tags": e.tags }));
    }
    json!(rows)
}

fn words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Number of declared expertise tags whose every word occurs in the query.
pub fn expertise_overlap(query: &str, expertise: &[String]) -> usize {
    let query_words = words(query);
    expertise
        .iter()
        .filter(|tag| {
            let tag_words = words(tag);
            !tag_words.is_empty() && tag_words.is_subset(&query_words)
        })
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Selected,
    Excluded,
    /// Eligible but ranked below the cut.
    NotSelected,
}

/// Everything the coordinator concluded about one pool member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Standing {
    pub node_id: NodeId,
    pub peer_evaluations: usize,
    pub negative_peer_evaluations: usize,
    pub merit: usize,
    pub expertise_overlap: usize,
    pub tag_counts: BTreeMap<EvalTag, usize>,
    /// Reasons for exclusion; empty for eligible members.
    pub exclusion_reasons: Vec<String>,
}

impl Standing {
    pub fn eligible(&self) -> bool {
        self.exclusion_reasons.is_empty()
    }

    fn rank_key(
        &self,
    ) -> (
        bool,
        std::cmp::Reverse<usize>,
        std::cmp::Reverse<usize>,
        &NodeId,
    ) {
        (
            !self.eligible(),
            std::cmp::Reverse(self.merit),
            std::cmp::Reverse(self.expertise_overlap),
            &self.node_id,
        )
    }
}

fn contract_list(ids: &BTreeSet<&ContractId>) -> String {
    ids.iter()
        .map(|c| c.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn assess(member: &RespondentProfile, query: &str, history: &[PeerEvaluation]) -> Standing {
    let id = member.node_id();
    let received: Vec<&PeerEvaluation> = history
        .iter()
        .filter(|e| &e.subject == id && !e.is_self())
        .collect();
    let own: Vec<&PeerEvaluation> = history
        .iter()
        .filter(|e| &e.subject == id && e.is_self())
        .collect();

    let mut tag_counts = BTreeMap::new();
    for tag in received.iter().flat_map(|e| e.tags.iter()) {
        *tag_counts.entry(*tag).or_insert(0) += 1;
    }
    let negatives: Vec<&&PeerEvaluation> = received.iter().filter(|e| e.is_negative()).collect();
    let merit = received
        .iter()
        .flat_map(|e| e.tags.iter())
        .filter(|t| t.is_merit())
        .count();

    let mut reasons = Vec::new();
    if !received.is_empty() && negatives.len() * 2 > received.len() {
        let tags: BTreeSet<EvalTag> = negatives
            .iter()
            .flat_map(|e| e.tags.iter().copied().filter(|t| t.is_negative()))
            .collect();
        let contracts: BTreeSet<&ContractId> = negatives.iter().map(|e| &e.contract_id).collect();
        reasons.push(format!(
            "{} of {} peer evaluations were negative ({}) in {}",
            negatives.len(),
            received.len(),
            tags.iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(", "),
            contract_list(&contracts),
        ));
    }
    let promoted: BTreeSet<&ContractId> = own
        .iter()
        .filter(|e| e.has(EvalTag::BiasedSelfPromotion))
        .map(|e| &e.contract_id)
        .collect();
    let shallow: Vec<&&PeerEvaluation> = received
        .iter()
        .filter(|e| e.has(EvalTag::LimitedDepth) || e.has(EvalTag::ShallowAgreement))
        .collect();
    if !promoted.is_empty() && !shallow.is_empty() {
        let contracts: BTreeSet<&ContractId> = shallow.iter().map(|e| &e.contract_id).collect();
        reasons.push(format!(
            "self-evaluation flagged BiasedSelfPromotion in {} while peers reported limited depth or shallow agreement in {}",
            contract_list(&promoted),
            contract_list(&contracts),
        ));
    }

    Standing {
        node_id: id.clone(),
        peer_evaluations: received.len(),
        negative_peer_evaluations: negatives.len(),
        merit,
        expertise_overlap: expertise_overlap(query, &member.identity.declared_expertise),
        tag_counts,
        exclusion_reasons: reasons,
    }
}

/// Full ordering of the pool: eligible members by merit, expertise overlap
/// and node id, then excluded members in the same order.
pub fn rank_candidates(
    history: &[PeerEvaluation],
    query: &str,
    pool: &[RespondentProfile],
) -> Vec<Standing> {
    let mut standings: Vec<Standing> = pool.iter().map(|m| assess(m, query, history)).collect();
    standings.sort_by(|a, b| a.rank_key().cmp(&b.rank_key()));
    standings
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub node_id: NodeId,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub node_id: NodeId,
    pub verdict: Verdict,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub contract_id: ContractId,
    pub query: String,
    pub k: usize,
    pub selected: Vec<NodeId>,
    pub excluded: Vec<Exclusion>,
    pub assessments: Vec<Assessment>,
    /// Set when exclusions left fewer than `k` eligible members.
    pub insufficient_candidates: bool,
}

fn summarize(s: &Standing, verdict: &Verdict) -> String {
    let mut out = if s.peer_evaluations == 0 {
        "No peer evaluations on record.".to_owned()
    } else {
        let tags = s
            .tag_counts
            .iter()
            .map(|(t, n)| format!("{t} x{n}"))
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "{} peer evaluations, {} negative; tags received: {}.",
            s.peer_evaluations,
            s.negative_peer_evaluations,
            if tags.is_empty() { "none".into() } else { tags }
        )
    };
    out.push_str(&format!(
        " Expertise overlap with the query: {}.",
        s.expertise_overlap
    ));
    out.push(' ');
    out.push_str(match verdict {
        Verdict::Selected => "Selected for this query.",
        Verdict::Excluded => "Excluded from this query.",
        Verdict::NotSelected => "Eligible but not selected.",
    });
    out
}

/// Choose `k` respondents for the query `contract_id` from the ledger history.
pub fn select_respondents(
    chain: &Chain,
    contract_id: ContractId,
    query: &str,
    pool: &[RespondentProfile],
    k: usize,
) -> Result<SelectionDecision, ReputationError> {
    if k == 0 {
        return Err(ReputationError::ZeroK);
    }
    if k > pool.len() {
        return Err(ReputationError::PoolTooSmall {
            pool: pool.len(),
            k,
        });
    }
    let history = evaluations_from_chain(chain)?;
    let ranking = rank_candidates(&history, query, pool);

    let mut selected = Vec::new();
    let mut excluded = Vec::new();
    let mut assessments = Vec::new();
    for s in &ranking {
        let verdict = if !s.eligible() {
            excluded.push(Exclusion {
                node_id: s.node_id.clone(),
                rationale: s.exclusion_reasons.join("; "),
            });
            Verdict::Excluded
        } else if selected.len() < k {
            selected.push(s.node_id.clone());
            Verdict::Selected
        } else {
            Verdict::NotSelected
        };
        assessments.push(Assessment {
            node_id: s.node_id.clone(),
            summary: summarize(s, &verdict),
            verdict,
        });
    }
    assessments.sort_by(|a, b| a.node_id.cmp(&b.node_id));
    Ok(SelectionDecision {
        contract_id,
        query: query.to_owned(),
        k,
        insufficient_candidates: selected.len() < k,
        selected,
        excluded,
        assessments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodes::{NodeIdentity, Role};

    fn member(id: &str, expertise: &[&str]) -> RespondentProfile {
        RespondentProfile::new(
            NodeIdentity {
                node_id: id.into(),
                role: Role::Respondent,
                declared_expertise: expertise.iter().map(|s| s.to_string()).collect(),
            },
            0.5,
        )
        .unwrap()
    }

    fn eval(from: &str, to: &str, tags: &[EvalTag]) -> PeerEvaluation {
        PeerEvaluation {
            evaluator: from.into(),
            subject: to.into(),
            contract_id: "C0001".into(),
            text: "assessment".into(),
            tags: tags.to_vec(),
        }
    }

    fn chain_with(evals: &[PeerEvaluation]) -> Chain {
        record_evaluations(&Chain::new(), evals, &"v".into(), 1).unwrap()
    }

    #[test]
    fn keyword_tags() {
        let rules = default_keyword_rules();
        assert_eq!(
            derive_tags(
                "Demonstrated basic understanding but lacked analytical depth in responses.",
                false,
                &rules
            ),
            vec![EvalTag::LimitedDepth]
        );
        assert_eq!(
            derive_tags("Used big words and complicated math stuff.", false, &rules),
            vec![EvalTag::UnwarrantedCriticism]
        );
        // "incorrect" must not match "correct"
        assert!(derive_tags("The claim was incorrect.", false, &rules).is_empty());
        assert_eq!(
            derive_tags("My work was excellent.", true, &rules),
            vec![EvalTag::BiasedSelfPromotion]
        );
        assert!(derive_tags("Their work was excellent.", false, &rules).is_empty());
    }

    #[test]
    fn record_then_read_back() {
        let evals = vec![
            eval("a", "b", &[EvalTag::CorrectAnswer]),
            eval("b", "a", &[]),
        ];
        let chain = chain_with(&evals);
        assert_eq!(chain.len(), 1);
        assert_eq!(chain.block(0).unwrap().entries.len(), 2);
        assert_eq!(evaluations_from_chain(&chain).unwrap(), evals);
        assert_eq!(
            record_evaluations(&chain, &[], &"v".into(), 2),
            Err(LedgerError::EmptyEntries)
        );
    }

    #[test]
    fn cold_start_ranks_by_expertise_then_id() {
        let pool = [
            member("c", &["number theory"]),
            member("b", &["cooking"]),
            member("a", &["poetry"]),
        ];
        let d = select_respondents(
            &Chain::new(),
            "C0001".into(),
            "A number theory question",
            &pool,
            2,
        )
        .unwrap();
        assert_eq!(d.selected, vec![NodeId::new("c"), NodeId::new("a")]);
        assert!(d.excluded.is_empty());
        assert!(!d.insufficient_candidates);
    }

    #[test]
    fn all_positive_history_selects_everyone() {
        let pool = [
            member("a", &["x"]),
            member("b", &["x"]),
            member("c", &["x"]),
        ];
        let mut evals = Vec::new();
        for e in ["a", "b", "c"] {
            for s in ["a", "b", "c"] {
                evals.push(eval(e, s, &[EvalTag::CorrectAnswer]));
            }
        }
        let d = select_respondents(&chain_with(&evals), "C0002".into(), "q", &pool, 3).unwrap();
        assert_eq!(d.selected.len(), 3);
        assert!(d.excluded.is_empty());
    }

    #[test]
    fn majority_negative_is_excluded_with_cited_contract() {
        let pool = [
            member("a", &["x"]),
            member("b", &["x"]),
            member("c", &["x"]),
        ];
        let evals = [
            eval("b", "a", &[EvalTag::LimitedDepth]),
            eval("c", "a", &[EvalTag::ShallowAgreement]),
            eval("a", "b", &[EvalTag::CorrectAnswer]),
        ];
        let d = select_respondents(&chain_with(&evals), "C0002".into(), "q", &pool, 2).unwrap();
        assert_eq!(d.selected, vec![NodeId::new("b"), NodeId::new("c")]);
        assert_eq!(d.excluded.len(), 1);
        assert_eq!(d.excluded[0].node_id, NodeId::new("a"));
        assert!(d.excluded[0].rationale.contains("C0001"));
    }

    #[test]
    fn half_negative_is_not_a_majority() {
        let pool = [member("a", &["x"])];
        let evals = [
            eval("b", "a", &[EvalTag::LimitedDepth]),
            eval("c", "a", &[EvalTag::CorrectAnswer]),
        ];
        let d = select_respondents(&chain_with(&evals), "C0002".into(), "q", &pool, 1).unwrap();
        assert_eq!(d.selected, vec![NodeId::new("a")]);
    }

    #[test]
    fn self_promotion_against_peers_excludes() {
        let pool = [member("a", &["x"]), member("b", &["x"])];
        let evals = [
            eval("a", "a", &[EvalTag::BiasedSelfPromotion]),
            eval("b", "a", &[EvalTag::LimitedDepth]),
            eval("c", "a", &[EvalTag::CorrectAnswer]),
            eval("d", "a", &[EvalTag::CorrectAnswer]),
        ];
        let d = select_respondents(&chain_with(&evals), "C0002".into(), "q", &pool, 1).unwrap();
        assert_eq!(d.selected, vec![NodeId::new("b")]);
        assert!(d.excluded[0].rationale.contains("BiasedSelfPromotion"));
    }

    #[test]
    fn insufficient_candidates_flagged() {
        let pool = [member("a", &["x"]), member("b", &["x"])];
        let evals = [eval("b", "a", &[EvalTag::LimitedDepth])];
        let d = select_respondents(&chain_with(&evals), "C0002".into(), "q", &pool, 2).unwrap();
        assert_eq!(d.selected, vec![NodeId::new("b")]);
        assert!(d.insufficient_candidates);
    }

    #[test]
    fn pool_and_k_errors() {
        let pool = [member("a", &["x"])];
        assert!(matches!(
            select_respondents(&Chain::new(), "C1".into(), "q", &pool, 2),
            Err(ReputationError::PoolTooSmall { pool: 1, k: 2 })
        ));
        assert!(matches!(
            select_respondents(&Chain::new(), "C1".into(), "q", &pool, 0),
            Err(ReputationError::ZeroK)
        ));
    }

    #[test]
    fn self_evaluations_do_not_add_merit() {
        let pool = [member("a", &["x"]), member("b", &["x"])];
        let evals = [eval(
            "a",
            "a",
            &[EvalTag::SubstantiveProof, EvalTag::CorrectAnswer],
        )];
        let ranking = rank_candidates(&evals, "q", &pool);
        assert_eq!(ranking[0].node_id, NodeId::new("a"));
        assert_eq!(ranking[0].merit, 0);
    }

    #[test]
    fn expertise_overlap_counts_whole_tags() {
        let tags = vec![
            "number theory".to_string(),
            "prime".into(),
            "chemistry".into(),
        ];
        assert_eq!(
            expertise_overlap("What is the smallest prime number after 60?", &tags),
            1
        );
        assert_eq!(expertise_overlap("prime number theory", &tags), 2);
    }
}
