//! Scenario files, end-to-end runs and run verification.
//!
//! A scenario is one JSON document naming the nodes, contract defaults and
//! an ordered list of queries. [`run_scenario`] drives every query through
//! selection, contract, debate, evaluation and payout, records each phase on
//! the ledger and writes the run directory. [`verify_run`] checks a ledger
//! dump by recomputing hashes and replaying every contract.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::contract::{
    allocate_rewards, next_state, ConsolidatedAnswer, ContractError, ContractEvent, ContractIssuer,
    ContractState, ContractTerms, QualityCriteria, QueryContract, RewardAllocation, RewardSplit,
    ValidatorReward,
};
use crate::debate::{run_debate, DebateOutcome, DebateTranscript};
use crate::id::{ContractId, NodeId};
use crate::ledger::{Chain, DumpError, EntryKind, RecordEntry, VerificationReport};
use crate::netbus::{Bus, BusConfig, Envelope, EnvelopeKind, FaultInjection};
use crate::nodes::{
    BackendError, BehaviorBackend, ExchangeLog, LlmBackend, LlmEndpoint, NodeIdentity, Participant,
    ProfileError, RespondentProfile, Role, ScriptSet, ScriptedBackend,
};
use crate::reputation::{
    collect_evaluations, default_keyword_rules, evaluation_matrix, record_evaluations,
    select_respondents, KeywordRule, PeerEvaluation, SelectionDecision,
};

/// Bundled scenarios reproducing the four model-specific simulations.
pub const BUNDLED_SCENARIOS: [(&str, &str); 4] = [
    (
        "primes-claude",
        include_str!("../scenarios/primes-claude.json"),
    ),
    (
        "primes-llama",
        include_str!("../scenarios/primes-llama.json"),
    ),
    ("primes-grok", include_str!("../scenarios/primes-grok.json")),
    (
        "primes-gpt4o",
        include_str!("../scenarios/primes-gpt4o.json"),
    ),
];

pub const LEDGER_FILE: &str = "ledger.ndjson";
pub const BUS_TRACE_FILE: &str = "bus.ndjson";
pub const REPORT_FILE: &str = "report.json";
pub const EXCHANGE_LOG_FILE: &str = "llm-exchanges.ndjson";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: NodeId,
    pub role: Role,
    #[serde(default)]
    pub expertise: Vec<String>,
    /// Respondents only.
    #[serde(default)]
    pub intelligence_index: Option<f64>,
    #[serde(default)]
    pub backend: BackendKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContractDefaults {
    pub max_rounds: u32,
    pub response_deadline: u64,
    pub reward_pool: u64,
    pub reward_split: RewardSplit,
    pub validator_reward: ValidatorReward,
    pub quality_criteria: QualityCriteria,
}

impl Default for ContractDefaults {
    fn default() -> Self {
        Self {
            max_rounds: 5,
            response_deadline: 100,
            reward_pool: 1000,
            reward_split: RewardSplit::default(),
            validator_reward: ValidatorReward::default(),
            quality_criteria: QualityCriteria::ConsensusRequired,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub text: String,
    pub k: usize,
    /// Preferred proposers. Those not selected are ignored; if none is
    /// selected the top-ranked respondent proposes.
    #[serde(default)]
    pub proposers: Vec<NodeId>,
    #[serde(default)]
    pub quality_criteria: Option<QualityCriteria>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub contract_defaults: ContractDefaults,
    pub queries: Vec<QuerySpec>,
    /// Bundled script set name, or a path to a script set file.
    #[serde(default)]
    pub scripts: Option<String>,
    #[serde(default)]
    pub llm: Option<LlmEndpoint>,
    /// Replaces the default phrase → tag rules for free-text evaluations.
    #[serde(default)]
    pub tag_keywords: Option<Vec<KeywordRule>>,
    #[serde(default)]
    pub bus: BusConfig,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid scenario file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown bundled scenario {0:?}")]
    UnknownScenario(String),
    #[error("scenario needs exactly one coordinator, found {0}")]
    Coordinators(usize),
    #[error("scenario needs at least one validator")]
    NoValidator,
    #[error("scenario lists no queries")]
    NoQueries,
    #[error("scenario lists no respondents")]
    NoRespondents,
    #[error("node {0} is declared twice")]
    DuplicateNode(NodeId),
    #[error("respondent {0} has no intelligence_index")]
    MissingIndex(NodeId),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("query {query:?} pins unknown respondent {node}")]
    UnknownProposer { query: String, node: NodeId },
    #[error("query {0:?} asks for zero respondents")]
    ZeroK(String),
    #[error("script set {0:?} is neither bundled nor a readable file")]
    UnknownScripts(String),
    #[error("scripted respondents need a script set")]
    NoScripts,
    #[error("script set {set:?} has no script for query {query:?}")]
    MissingScript { set: String, query: String },
    #[error("llm respondents need an llm endpoint")]
    NoLlmEndpoint,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot read back the run: {0}")]
    Verify(#[from] VerifyError),
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Load a scenario file. A relative script path is resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let mut config = Self::from_json(&text)?;
        if let Some(scripts) = &config.scripts {
            let candidate = Path::new(scripts);
            if ScriptSet::bundled(scripts).is_none() && candidate.is_relative() {
                if let Some(dir) = path.parent() {
                    config.scripts = Some(dir.join(candidate).to_string_lossy().into_owned());
                }
            }
        }
        Ok(config)
    }

    pub fn bundled(name: &str) -> Result<Self, ConfigError> {
        let (_, text) = BUNDLED_SCENARIOS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ConfigError::UnknownScenario(name.to_owned()))?;
        Self::from_json(text)
    }

    /// Switch every respondent to `kind`.
    pub fn force_backend(&mut self, kind: BackendKind) {
        for node in &mut self.nodes {
            if node.role == Role::Respondent {
                node.backend = kind;
            }
        }
    }

    fn with_role(&self, role: Role) -> impl Iterator<Item = &NodeConfig> + '_ {
        self.nodes.iter().filter(move |n| n.role == role)
    }

    fn load_scripts(&self) -> Result<Option<ScriptSet>, ConfigError> {
        let Some(name) = &self.scripts else {
            return Ok(None);
        };
        if let Some(set) = ScriptSet::bundled(name) {
            return Ok(Some(set));
        }
        let text =
            fs::read_to_string(name).map_err(|_| ConfigError::UnknownScripts(name.clone()))?;
        Ok(Some(serde_json::from_str(&text)?))
    }

    /// Check the invariants and build the respondent pool.
    pub fn validate(&self) -> Result<Validated, ConfigError> {
        let mut seen = BTreeSet::new();
        for node in &self.nodes {
            if !seen.insert(&node.id) {
                return Err(ConfigError::DuplicateNode(node.id.clone()));
            }
        }
        let coordinators = self.with_role(Role::Coordinator).count();
        if coordinators != 1 {
            return Err(ConfigError::Coordinators(coordinators));
        }
        if self.with_role(Role::Validator).next().is_none() {
            return Err(ConfigError::NoValidator);
        }
        if self.queries.is_empty() {
            return Err(ConfigError::NoQueries);
        }
        let mut pool = Vec::new();
        for node in self.with_role(Role::Respondent) {
            let index = node
                .intelligence_index
                .ok_or_else(|| ConfigError::MissingIndex(node.id.clone()))?;
            let identity = NodeIdentity {
                node_id: node.id.clone(),
                role: node.role,
                declared_expertise: node.expertise.clone(),
            };
            pool.push(RespondentProfile::new(identity, index)?);
        }
        if pool.is_empty() {
            return Err(ConfigError::NoRespondents);
        }
        for q in &self.queries {
            if q.k == 0 {
                return Err(ConfigError::ZeroK(q.text.clone()));
            }
            if let Some(node) = q
                .proposers
                .iter()
                .find(|p| !pool.iter().any(|m| m.node_id() == *p))
            {
                return Err(ConfigError::UnknownProposer {
                    query: q.text.clone(),
                    node: node.clone(),
                });
            }
        }
        let respondents: Vec<&NodeConfig> = self.with_role(Role::Respondent).collect();
        let scripts = self.load_scripts()?;
        if respondents
            .iter()
            .any(|n| n.backend == BackendKind::Scripted)
        {
            let set = scripts.as_ref().ok_or(ConfigError::NoScripts)?;
            if let Some(q) = self.queries.iter().find(|q| set.query(&q.text).is_none()) {
                return Err(ConfigError::MissingScript {
                    set: set.name.clone(),
                    query: q.text.clone(),
                });
            }
        }
        if respondents.iter().any(|n| n.backend == BackendKind::Llm) && self.llm.is_none() {
            return Err(ConfigError::NoLlmEndpoint);
        }
        Ok(Validated {
            pool,
            scripts: scripts.map(Arc::new),
        })
    }
}

/// Output of [`ScenarioConfig::validate`].
#[derive(Debug, Clone)]
pub struct Validated {
    pub pool: Vec<RespondentProfile>,
    pub scripts: Option<Arc<ScriptSet>>,
}

/// Everything known about one query after the run.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRun {
    pub index: usize,
    pub query: String,
    pub contract_id: Option<ContractId>,
    pub selection: Option<SelectionDecision>,
    pub transcript: Option<DebateTranscript>,
    pub evaluations: Vec<PeerEvaluation>,
    pub answer: Option<ConsolidatedAnswer>,
    pub rewards: Option<RewardAllocation>,
    pub final_state: Option<ContractState>,
    pub failure: Option<String>,
}

impl QueryRun {
    pub fn completed(&self) -> bool {
        self.final_state == Some(ContractState::Completed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryReport {
    pub index: usize,
    pub query: String,
    pub contract_id: Option<ContractId>,
    pub final_state: Option<ContractState>,
    pub answer: Option<String>,
    pub outcome: Option<DebateOutcome>,
    pub message_cycles: usize,
    pub consensus_marker_cycle: Option<u32>,
    pub rewards: Option<BTreeMap<NodeId, u64>>,
    pub failure: Option<String>,
    /// Paths relative to the run directory.
    pub selection: Option<String>,
    pub transcript: Option<String>,
    pub evaluations: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub script_set: Option<String>,
    pub ledger: String,
    pub bus_trace: String,
    pub queries: Vec<QueryReport>,
    pub verification: RunVerification,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: RunReport,
    pub chain: Chain,
    pub queries: Vec<QueryRun>,
}

struct Runner<'a> {
    config: &'a ScenarioConfig,
    pool: &'a [RespondentProfile],
    participants: BTreeMap<NodeId, Participant>,
    chain: Chain,
    bus: Bus,
    issuer: ContractIssuer,
    coordinator: NodeId,
    requester: NodeId,
    validators: Vec<NodeId>,
    script_set: Option<String>,
}

type Step<T> = Result<T, String>;

impl Runner<'_> {
    fn validator(&self) -> &NodeId {
        &self.validators[0]
    }

    fn append(&mut self, entries: Vec<RecordEntry>) -> Step<()> {
        self.chain = self
            .chain
            .append_block(entries, &self.validators[0])
            .map_err(|e| format!("ledger: {e}"))?;
        Ok(())
    }

    /// Send one envelope and advance the clock until it lands.
    fn deliver(
        &mut self,
        from: &NodeId,
        to: &NodeId,
        kind: EnvelopeKind,
        payload: String,
    ) -> Step<()> {
        self.bus
            .send(Envelope::new(from.clone(), to.clone(), kind, payload))
            .map_err(|e| format!("bus: {e}"))?;
        let to = to.clone();
        self.bus.run_until(|e| e.to == to && e.kind == kind);
        Ok(())
    }

    fn genesis(&mut self) -> Step<()> {
        let meta = json!({
            "scenario": self.config.name,
            "seed": self.config.seed,
            "script_set": self.script_set,
            "nodes": self.config.nodes.iter().map(|n| json!({ "id": n.id, "role": n.role })).collect::<Vec<_>>(),
        });
        let mut entries = vec![RecordEntry::new(
            EntryKind::RunMetadata,
            self.coordinator.clone(),
            ContractId::network(),
            meta.to_string(),
            0,
        )];
        for node in self.config.nodes.iter().filter(|n| !n.expertise.is_empty()) {
            entries.push(RecordEntry::new(
                EntryKind::ExpertiseDeclared,
                node.id.clone(),
                ContractId::network(),
                json!({ "expertise": node.expertise }).to_string(),
                0,
            ));
        }
        self.append(entries)
    }

    fn run_query(&mut self, index: usize, spec: &QuerySpec) -> QueryRun {
        let mut run = QueryRun {
            index,
            query: spec.text.clone(),
            contract_id: None,
            selection: None,
            transcript: None,
            evaluations: Vec::new(),
            answer: None,
            rewards: None,
            final_state: None,
            failure: None,
        };
        let mut contract = None;
        if let Err(reason) = self.drive(spec, &mut run, &mut contract) {
            run.failure = Some(reason.clone());
            if let Some(c) = contract.as_mut().filter(|c| !c.state.is_terminal()) {
                let tick = self.bus.now();
                let aborted = c
                    .transition(ContractEvent::Abort(reason), tick)
                    .map_err(|e| e.to_string())
                    .and_then(|entry| self.append(vec![entry]));
                if let Err(e) = aborted {
                    run.failure = Some(format!(
                        "{}; abort not recorded: {e}",
                        run.failure.take().unwrap_or_default()
                    ));
                }
            }
        }
        run.final_state = contract.map(|c| c.state);
        run
    }

    fn drive(
        &mut self,
        spec: &QuerySpec,
        run: &mut QueryRun,
        slot: &mut Option<QueryContract>,
    ) -> Step<()> {
        let contract_id = self.issuer.peek_id();
        let requester = self.requester.clone();
        let coordinator = self.coordinator.clone();
        self.deliver(
            &requester,
            &coordinator,
            EnvelopeKind::Query,
            spec.text.clone(),
        )?;

        let selection = select_respondents(
            &self.chain,
            contract_id.clone(),
            &spec.text,
            self.pool,
            spec.k,
        );
        let submitted = match &selection {
            Ok(d) => {
                json!({ "query": spec.text, "k": spec.k, "selected": d.selected, "excluded": d.excluded })
            }
            Err(e) => json!({ "query": spec.text, "k": spec.k, "rejected": e.to_string() }),
        };
        let tick = self.bus.now();
        self.append(vec![RecordEntry::new(
            EntryKind::QuerySubmitted,
            requester.clone(),
            contract_id.clone(),
            submitted.to_string(),
            tick,
        )])?;
        let decision = selection.map_err(|e| format!("selection: {e}"))?;
        run.selection = Some(decision.clone());
        if decision.selected.is_empty() {
            return Err("selection: no eligible respondents".into());
        }

        let pinned: Vec<NodeId> = decision
            .selected
            .iter()
            .filter(|n| spec.proposers.contains(n))
            .cloned()
            .collect();
        let proposers = if pinned.is_empty() {
            vec![decision.selected[0].clone()]
        } else {
            pinned
        };
        let debaters = decision
            .selected
            .iter()
            .filter(|n| !proposers.contains(n))
            .cloned()
            .collect();
        let d = &self.config.contract_defaults;
        let terms = ContractTerms {
            query_text: spec.text.clone(),
            coordinator: coordinator.clone(),
            proposers,
            debaters,
            validators: self.validators.clone(),
            max_rounds: d.max_rounds,
            response_deadline: d.response_deadline,
            reward_pool: d.reward_pool,
            reward_split: d.reward_split,
            validator_reward: d.validator_reward,
            quality_criteria: spec
                .quality_criteria
                .clone()
                .unwrap_or_else(|| d.quality_criteria.clone()),
        };
        let (contract, deployed) = self
            .issuer
            .deploy(terms, self.bus.now())
            .map_err(|e| format!("deploy: {e}"))?;
        run.contract_id = Some(contract.contract_id.clone());
        let contract = slot.insert(contract);
        let contract_err = |e: ContractError| format!("contract: {e}");

        let mut block = vec![deployed];
        let respondents: Vec<NodeId> = contract.terms.respondents().cloned().collect();
        for r in &respondents {
            let offer =
                json!({ "contract_id": contract.contract_id, "query": spec.text }).to_string();
            self.deliver(&coordinator, r, EnvelopeKind::Query, offer)?;
            let accept = json!({ "contract_id": contract.contract_id }).to_string();
            self.deliver(r, &coordinator, EnvelopeKind::Acceptance, accept)?;
            block.push(
                contract
                    .accept_subsidiary(r, self.bus.now())
                    .map_err(contract_err)?,
            );
        }
        block.push(
            contract
                .transition(ContractEvent::DebateStarted, self.bus.now())
                .map_err(contract_err)?,
        );
        self.append(block)?;

        let participants: Vec<Participant> = respondents
            .iter()
            .map(|r| self.participants[r].clone())
            .collect();
        let validator = self.validator().clone();
        let debate = run_debate(
            contract,
            &participants,
            &mut self.bus,
            &self.chain,
            &validator,
        )
        .map_err(|e| format!("debate: {e}"))?;
        self.chain = debate.chain;
        let transcript = debate.transcript;
        run.transcript = Some(transcript.clone());
        if let Some(DebateOutcome::Aborted(reason)) = &transcript.outcome {
            return Err(format!("debate aborted: {reason}"));
        }

        let answer = transcript
            .consolidated_answer()
            .ok_or_else(|| "debate produced no answer".to_owned())?;
        run.answer = Some(answer.clone());
        let ready = contract
            .answer_ready(&answer, self.bus.now())
            .map_err(contract_err)?;
        let verdict = contract.evaluate_quality(&answer).map_err(contract_err)?;
        if !verdict.passed {
            self.append(vec![ready])?;
            return Err(format!("quality check failed: {}", verdict.reason));
        }
        let delivered = contract
            .deliver_answer(&answer, &verdict, self.bus.now())
            .map_err(contract_err)?;
        self.append(vec![ready, delivered])?;
        let body = serde_json::to_string(&answer).expect("answers always serialize");
        self.deliver(&coordinator, &requester, EnvelopeKind::Answer, body)?;

        let evaluations = collect_evaluations(&participants, &transcript)
            .map_err(|e| format!("evaluation: {e}"))?;
        for r in &respondents {
            let own: Vec<&PeerEvaluation> =
                evaluations.iter().filter(|e| &e.evaluator == r).collect();
            let body = serde_json::to_string(&own).expect("evaluations always serialize");
            self.deliver(r, &coordinator, EnvelopeKind::Evaluation, body)?;
        }
        let tick = self.bus.now();
        self.chain = record_evaluations(&self.chain, &evaluations, &validator, tick)
            .map_err(|e| format!("ledger: {e}"))?;
        run.evaluations = evaluations;

        let (allocation, paid) = contract
            .distribute_rewards(self.bus.now())
            .map_err(contract_err)?;
        self.append(vec![paid])?;
        for (node, units) in &allocation.allocations {
            self.deliver(&coordinator, node, EnvelopeKind::Reward, units.to_string())?;
        }
        run.rewards = Some(allocation);
        let done = contract
            .transition(ContractEvent::Finalized, self.bus.now())
            .map_err(contract_err)?;
        self.append(vec![done])
    }
}

fn build_participants(
    config: &ScenarioConfig,
    validated: &Validated,
    out_dir: &Path,
) -> Result<BTreeMap<NodeId, Participant>, ScenarioError> {
    let rules = config
        .tag_keywords
        .clone()
        .unwrap_or_else(default_keyword_rules);
    let mut llm: Option<Arc<dyn BehaviorBackend>> = None;
    let mut out = BTreeMap::new();
    for profile in &validated.pool {
        let node = config
            .nodes
            .iter()
            .find(|n| n.id == *profile.node_id())
            .expect("pool built from nodes");
        let backend: Arc<dyn BehaviorBackend> = match node.backend {
            BackendKind::Scripted => Arc::new(ScriptedBackend::new(
                validated.scripts.clone().expect("validated scripts"),
            )),
            BackendKind::Llm => match &llm {
                Some(b) => b.clone(),
                None => {
                    let endpoint = config.llm.clone().expect("validated endpoint");
                    let path = out_dir.join(EXCHANGE_LOG_FILE);
                    let log = ExchangeLog::open(&path)
                        .map_err(|source| ScenarioError::Io { path, source })?;
                    let b: Arc<dyn BehaviorBackend> = Arc::new(
                        LlmBackend::new(endpoint)
                            .map_err(ConfigError::from)?
                            .with_keyword_rules(rules.clone())
                            .with_log(log),
                    );
                    llm = Some(b.clone());
                    b
                }
            },
        };
        out.insert(
            profile.node_id().clone(),
            Participant::new(profile.clone(), backend),
        );
    }
    Ok(out)
}

fn write(path: &Path, contents: &str) -> Result<(), ScenarioError> {
    fs::write(path, contents).map_err(|source| ScenarioError::Io {
        path: path.to_owned(),
        source,
    })
}

fn pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("run artifacts always serialize");
    s.push('\n');
    s
}

/// Run every query of `config` and write the run directory `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<ScenarioRun, ScenarioError> {
    let validated = config.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| ScenarioError::Io {
        path: out_dir.to_owned(),
        source,
    })?;
    let participants = build_participants(config, &validated, out_dir)?;

    let first = |role| config.with_role(role).next().map(|n| n.id.clone());
    let coordinator = first(Role::Coordinator).expect("validated coordinator");
    let mut bus_config = config.bus.clone();
    if let Some(f) = bus_config.faults.as_mut() {
        *f = FaultInjection {
            seed: config.seed,
            ..*f
        };
    }
    let mut bus = Bus::new(bus_config);
    for node in &config.nodes {
        bus.register(node.id.clone());
    }
    let mut runner = Runner {
        config,
        pool: &validated.pool,
        participants,
        chain: Chain::new(),
        bus,
        issuer: ContractIssuer::new(),
        requester: first(Role::Requester).unwrap_or_else(|| coordinator.clone()),
        coordinator,
        validators: config
            .with_role(Role::Validator)
            .map(|n| n.id.clone())
            .collect(),
        script_set: validated.scripts.as_ref().map(|s| s.name.clone()),
    };
    runner.genesis().map_err(|e| ScenarioError::Io {
        path: out_dir.join(LEDGER_FILE),
        source: std::io::Error::other(e),
    })?;

    let queries: Vec<QueryRun> = config
        .queries
        .iter()
        .enumerate()
        .map(|(i, q)| runner.run_query(i + 1, q))
        .collect();

    let ledger_path = out_dir.join(LEDGER_FILE);
    write(&ledger_path, &runner.chain.to_ndjson())?;
    write(&out_dir.join(BUS_TRACE_FILE), &runner.bus.trace_ndjson())?;

    let mut reports = Vec::new();
    for q in &queries {
        let dir_name = format!("q{}", q.index);
        let dir = out_dir.join(&dir_name);
        fs::create_dir_all(&dir).map_err(|source| ScenarioError::Io {
            path: dir.clone(),
            source,
        })?;
        let artifact = |file: &str, body: String| -> Result<String, ScenarioError> {
            write(&dir.join(file), &body)?;
            Ok(format!("{dir_name}/{file}"))
        };
        let selection = q
            .selection
            .as_ref()
            .map(|s| artifact("selection.json", pretty(s)))
            .transpose()?;
        let transcript = q
            .transcript
            .as_ref()
            .map(|t| artifact("transcript.json", pretty(&t.to_export_json())))
            .transpose()?;
        let evaluations = if q.evaluations.is_empty() {
            None
        } else {
            Some(artifact(
                "evaluations.json",
                pretty(&evaluation_matrix(&q.evaluations)),
            )?)
        };
        reports.push(QueryReport {
            index: q.index,
            query: q.query.clone(),
            contract_id: q.contract_id.clone(),
            final_state: q.final_state.clone(),
            answer: q.answer.as_ref().map(|a| a.answer.clone()),
            outcome: q.transcript.as_ref().and_then(|t| t.outcome.clone()),
            message_cycles: q.transcript.as_ref().map_or(0, |t| t.cycles.len()),
            consensus_marker_cycle: q
                .transcript
                .as_ref()
                .and_then(|t| t.consensus_marker_cycle()),
            rewards: q.rewards.as_ref().map(|r| r.allocations.clone()),
            failure: q.failure.clone(),
            selection,
            transcript,
            evaluations,
        });
    }

    let verification = verify_run(&ledger_path)?;
    let report = RunReport {
        name: config.name.clone(),
        seed: config.seed,
        script_set: validated.scripts.as_ref().map(|s| s.name.clone()),
        ledger: LEDGER_FILE.into(),
        bus_trace: BUS_TRACE_FILE.into(),
        queries: reports,
        verification,
    };
    write(&out_dir.join(REPORT_FILE), &pretty(&report))?;
    Ok(ScenarioRun {
        report,
        chain: runner.chain,
        queries,
    })
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] DumpError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayViolation {
    pub block: u64,
    pub contract_id: ContractId,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractReplay {
    pub contract_id: ContractId,
    pub final_state: ContractState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunVerification {
    pub valid: bool,
    pub chain: VerificationReport,
    pub contracts: Vec<ContractReplay>,
    pub violations: Vec<ReplayViolation>,
}

#[derive(Deserialize)]
struct DeployedPayload {
    terms: ContractTerms,
}

#[derive(Deserialize)]
struct AcceptedPayload {
    respondent: NodeId,
}

#[derive(Deserialize)]
struct TransitionPayload {
    event: ContractEvent,
    from: ContractState,
    to: ContractState,
    #[serde(default)]
    detail: serde_json::Value,
}

/// Replay every contract's state machine from the chain's entries.
pub fn replay_contracts(chain: &Chain) -> (Vec<ContractReplay>, Vec<ReplayViolation>) {
    let mut contracts: BTreeMap<ContractId, QueryContract> = BTreeMap::new();
    let mut violations = Vec::new();
    for block in chain.blocks() {
        for entry in &block.entries {
            if entry.contract_id.is_network() {
                continue;
            }
            let mut violation = |detail: String| {
                violations.push(ReplayViolation {
                    block: block.index,
                    contract_id: entry.contract_id.clone(),
                    detail,
                })
            };
            if entry.entry_kind == EntryKind::QuerySubmitted {
                if contracts.contains_key(&entry.contract_id) {
                    violation("query submitted after deployment".into());
                }
                continue;
            }
            if entry.entry_kind == EntryKind::ContractDeployed {
                if contracts.contains_key(&entry.contract_id) {
                    violation("contract deployed twice".into());
                    continue;
                }
                match serde_json::from_str::<DeployedPayload>(&entry.payload) {
                    Ok(p) => {
                        contracts.insert(
                            entry.contract_id.clone(),
                            QueryContract {
                                contract_id: entry.contract_id.clone(),
                                terms: p.terms,
                                accepted: Vec::new(),
                                state: ContractState::Deployed,
                            },
                        );
                    }
                    Err(e) => violation(format!("unreadable deployment: {e}")),
                }
                continue;
            }
            let Some(c) = contracts.get_mut(&entry.contract_id) else {
                violation(format!(
                    "{:?} entry for a contract never deployed",
                    entry.entry_kind
                ));
                continue;
            };
            let state = &c.state;
            match entry.entry_kind {
                EntryKind::SubsidiaryAccepted => {
                    match serde_json::from_str::<AcceptedPayload>(&entry.payload) {
                        Ok(p) => {
                            if let Err(e) = c.accept_subsidiary(&p.respondent, entry.logical_time) {
                                violation(format!("acceptance rejected: {e}"));
                            }
                        }
                        Err(e) => violation(format!("unreadable acceptance: {e}")),
                    }
                }
                EntryKind::DebateMessage | EntryKind::DebateConcluded => {
                    if *state != ContractState::Debating {
                        violation(format!("{:?} recorded in state {state}", entry.entry_kind));
                    }
                }
                EntryKind::PeerEvaluation => {
                    if *state != ContractState::AnswerDelivered {
                        violation(format!("peer evaluation recorded in state {state}"));
                    }
                }
                EntryKind::ContractTransition
                | EntryKind::AnswerDelivered
                | EntryKind::RewardDistribution
                | EntryKind::ContractCompleted => {
                    let p = match serde_json::from_str::<TransitionPayload>(&entry.payload) {
                        Ok(p) => p,
                        Err(e) => {
                            violation(format!("unreadable transition: {e}"));
                            continue;
                        }
                    };
                    if p.event.entry_kind() != entry.entry_kind {
                        violation(format!(
                            "event {} recorded as {:?}",
                            p.event, entry.entry_kind
                        ));
                    }
                    if p.from != *state {
                        violation(format!(
                            "event {} claims state {} but contract is {state}",
                            p.event, p.from
                        ));
                    }
                    match next_state(state, &p.event) {
                        Some(next) if next == p.to => {
                            if p.event == ContractEvent::RewardsPaid {
                                check_payout(&c.terms, &p.detail, &mut violation);
                            }
                            c.state = next;
                        }
                        Some(next) => violation(format!(
                            "event {} leads to {next}, recorded {}",
                            p.event, p.to
                        )),
                        None => violation(format!("event {} is illegal in state {state}", p.event)),
                    }
                }
                other => violation(format!("{other:?} entry attached to a contract")),
            }
        }
    }
    let mut replays = Vec::new();
    for (id, c) in contracts {
        if !c.state.is_terminal() {
            violations.push(ReplayViolation {
                block: chain.tip().map_or(0, |b| b.index),
                contract_id: id.clone(),
                detail: format!("contract ended in non-terminal state {}", c.state),
            });
        }
        replays.push(ContractReplay {
            contract_id: id,
            final_state: c.state,
        });
    }
    (replays, violations)
}

fn check_payout(
    terms: &ContractTerms,
    detail: &serde_json::Value,
    violation: &mut impl FnMut(String),
) {
    let recorded: Option<BTreeMap<NodeId, u64>> = detail
        .get("allocations")
        .and_then(|a| serde_json::from_value(a.clone()).ok());
    match recorded {
        None => violation("reward payout lists no allocations".into()),
        Some(a) => {
            let total: u64 = a.values().sum();
            if total != terms.reward_pool {
                violation(format!(
                    "payout sums to {total}, pool is {}",
                    terms.reward_pool
                ));
            } else if a != allocate_rewards(terms).allocations {
                violation("payout differs from the contract's reward split".into());
            }
        }
    }
}

/// Verify a chain already in memory: hashes, links and contract replay.
pub fn verify_chain_run(chain: &Chain) -> RunVerification {
    let report = chain.verify();
    let (contracts, violations) = replay_contracts(chain);
    RunVerification {
        valid: report.valid && violations.is_empty(),
        chain: report,
        contracts,
        violations,
    }
}

/// Read a ledger dump and verify it.
pub fn verify_run(path: &Path) -> Result<RunVerification, VerifyError> {
    let text = fs::read_to_string(path).map_err(|source| VerifyError::Read {
        path: path.to_owned(),
        source,
    })?;
    Ok(verify_chain_run(&Chain::from_ndjson(&text)?))
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Read {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ReportError::Parse {
        path: path.to_owned(),
        source,
    })
}

fn one_line(text: &str, width: usize) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= width {
        flat
    } else {
        let cut: String = flat.chars().take(width.saturating_sub(3)).collect();
        format!("{cut}...")
    }
}

/// Render a run directory as plain-text tables.
pub fn render_report(out_dir: &Path) -> Result<String, ReportError> {
    let report: RunReport = read_json(&out_dir.join(REPORT_FILE))?;
    let mut out = String::new();
    let _ = writeln!(out, "Scenario {} (seed {})", report.name, report.seed);
    let _ = writeln!(
        out,
        "Ledger {}: {}",
        report.ledger,
        if report.verification.valid {
            "valid"
        } else {
            "INVALID"
        }
    );
    for v in &report.verification.violations {
        let _ = writeln!(out, "  block {} {}: {}", v.block, v.contract_id, v.detail);
    }
    for q in &report.queries {
        let _ = writeln!(out, "\nQuery {}: {}", q.index, q.query);
        let state = q
            .final_state
            .as_ref()
            .map_or("not deployed".to_owned(), |s| s.to_string());
        let _ = writeln!(
            out,
            "  contract {}  state {}  answer {}",
            q.contract_id.as_ref().map_or("-", |c| c.as_str()),
            state,
            q.answer.as_deref().unwrap_or("-")
        );
        if let Some(f) = &q.failure {
            let _ = writeln!(out, "  failure: {f}");
        }
        if let Some(path) = &q.selection {
            let s: SelectionDecision = read_json(&out_dir.join(path))?;
            let _ = writeln!(out, "\n  {:<12} {:<12} Assessment", "Respondent", "Verdict");
            for a in &s.assessments {
                let _ = writeln!(
                    out,
                    "  {:<12} {:<12} {}",
                    a.node_id.as_str(),
                    format!("{:?}", a.verdict),
                    a.summary
                );
            }
            for e in &s.excluded {
                let _ = writeln!(out, "  excluded {}: {}", e.node_id, e.rationale);
            }
        }
        if let Some(path) = &q.transcript {
            let t: serde_json::Value = read_json(&out_dir.join(path))?;
            let _ = writeln!(
                out,
                "\n  {:<6} {:<12} {:<8} Message",
                "Cycle", "Respondent", "Claim"
            );
            for cycle in t["cycles"].as_array().into_iter().flatten() {
                for m in cycle["messages"].as_array().into_iter().flatten() {
                    let _ = writeln!(
                        out,
                        "  {:<6} {:<12} {:<8} {}",
                        cycle["cycle"].as_u64().unwrap_or(0),
                        m["author"].as_str().unwrap_or(""),
                        m["claim"].as_str().unwrap_or("-"),
                        one_line(m["text"].as_str().unwrap_or(""), 90)
                    );
                }
            }
            if let Some(marker) = q.consensus_marker_cycle {
                let _ = writeln!(out, "  {marker:<6} consensus reached");
            }
        }
        if let Some(path) = &q.evaluations {
            let m: BTreeMap<String, BTreeMap<String, serde_json::Value>> =
                read_json(&out_dir.join(path))?;
            let _ = writeln!(
                out,
                "\n  {:<12} {:<12} {:<40} Evaluation",
                "Evaluator", "Subject", "Tags"
            );
            for (evaluator, row) in &m {
                for (subject, cell) in row {
                    let tags = cell["tags"]
                        .as_array()
                        .map(|ts| {
                            ts.iter()
                                .filter_map(|t| t.as_str())
                                .collect::<Vec<_>>()
                                .join(",")
                        })
                        .unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "  {evaluator:<12} {subject:<12} {tags:<40} {}",
                        one_line(cell["text"].as_str().unwrap_or(""), 70)
                    );
                }
            }
        }
        if let Some(rewards) = &q.rewards {
            let paid = rewards
                .iter()
                .map(|(n, u)| format!("{n}={u}"))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(out, "\n  rewards: {paid}");
        }
    }
    Ok(out)
}
