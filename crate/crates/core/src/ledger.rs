//! Append-only hash-chained ledger.
//!
//! Every block commits to its predecessor through `prev_hash` and to its own
//! contents through `block_hash`, a SHA-256 digest over a canonical,
//! length-prefixed binary serialization. Hash input layout (big-endian):
//!
//!   1. `index` as u64
//!   2. `prev_hash` (32 raw bytes)
//!   3. `validator` as u64 length + UTF-8 bytes
//!   4. entry count as u64
//!   5. per entry: kind tag (u8), actor, contract id, payload (each u64
//!      length + UTF-8 bytes), then `logical_time` as u64
//!
//! Chains are values: [`Chain::append_block`] returns a new chain and never
//! touches the blocks of the input.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::id::{ContractId, NodeId};

/// A 32-byte SHA-256 digest, hex-encoded (lowercase) when serialized.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// What a ledger entry records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntryKind {
    QuerySubmitted,
    ContractDeployed,
    SubsidiaryAccepted,
    DebateMessage,
    AnswerDelivered,
    PeerEvaluation,
    RewardDistribution,
    ContractCompleted,
    /// A contract state change that has no dedicated kind above
    /// (debate start, answer ready, abort).
    ContractTransition,
    /// Debate outcome marker written after the last message cycle.
    DebateConcluded,
    /// A respondent (re-)declaring its expertise tags.
    ExpertiseDeclared,
    /// Run-level metadata (scenario name, seed).
    RunMetadata,
}

impl EntryKind {
    pub const ALL: [EntryKind; 12] = [
        EntryKind::QuerySubmitted,
        EntryKind::ContractDeployed,
        EntryKind::SubsidiaryAccepted,
        EntryKind::DebateMessage,
        EntryKind::AnswerDelivered,
        EntryKind::PeerEvaluation,
        EntryKind::RewardDistribution,
        EntryKind::ContractCompleted,
        EntryKind::ContractTransition,
        EntryKind::DebateConcluded,
        EntryKind::ExpertiseDeclared,
        EntryKind::RunMetadata,
    ];

    /// Stable tag used in the canonical serialization.
    pub fn tag(self) -> u8 {
        match self {
            EntryKind::QuerySubmitted => 1,
            EntryKind::ContractDeployed => 2,
            EntryKind::SubsidiaryAccepted => 3,
            EntryKind::DebateMessage => 4,
            EntryKind::AnswerDelivered => 5,
            EntryKind::PeerEvaluation => 6,
            EntryKind::RewardDistribution => 7,
            EntryKind::ContractCompleted => 8,
            EntryKind::ContractTransition => 9,
            EntryKind::DebateConcluded => 10,
            EntryKind::ExpertiseDeclared => 11,
            EntryKind::RunMetadata => 12,
        }
    }
}

/// A single recorded interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub entry_kind: EntryKind,
    pub actor: NodeId,
    pub contract_id: ContractId,
    pub payload: String,
    pub logical_time: u64,
}

impl RecordEntry {
    pub fn new(
        entry_kind: EntryKind,
        actor: NodeId,
        contract_id: ContractId,
        payload: impl Into<String>,
        logical_time: u64,
    ) -> Self {
        Self {
            entry_kind,
            actor,
            contract_id,
            payload: payload.into(),
            logical_time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    pub prev_hash: Digest,
    pub entries: Vec<RecordEntry>,
    pub validator: NodeId,
    pub block_hash: Digest,
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u64).to_be_bytes());
    out.extend_from_slice(bytes);
}

/// Canonical byte serialization of the hashed block fields.
pub fn canonical_bytes(
    index: u64,
    prev_hash: &Digest,
    validator: &NodeId,
    entries: &[RecordEntry],
) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + entries.len() * 96);
    out.extend_from_slice(&index.to_be_bytes());
    out.extend_from_slice(&prev_hash.0);
    put_bytes(&mut out, validator.as_str().as_bytes());
    out.extend_from_slice(&(entries.len() as u64).to_be_bytes());
    for e in entries {
        out.push(e.entry_kind.tag());
        put_bytes(&mut out, e.actor.as_str().as_bytes());
        put_bytes(&mut out, e.contract_id.as_str().as_bytes());
        put_bytes(&mut out, e.payload.as_bytes());
        out.extend_from_slice(&e.logical_time.to_be_bytes());
    }
    out
}

impl Block {
    /// Build a block and compute its hash.
    pub fn seal(
        index: u64,
        prev_hash: Digest,
        entries: Vec<RecordEntry>,
        validator: NodeId,
    ) -> Self {
        let block_hash =
            Digest(Sha256::digest(canonical_bytes(index, &prev_hash, &validator, &entries)).into());
        Self {
            index,
            prev_hash,
            entries,
            validator,
            block_hash,
        }
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical_bytes(self.index, &self.prev_hash, &self.validator, &self.entries)
    }

    pub fn compute_hash(&self) -> Digest {
        Digest(Sha256::digest(self.canonical_bytes()).into())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("cannot append a block with no entries")]
    EmptyEntries,
    #[error("parent chain fails verification at block {index}: {detail}")]
    InvalidParentChain { index: u64, detail: String },
    #[error("entry {position} is malformed: {reason}")]
    MalformedEntry { position: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    IndexMismatch,
    BrokenLink,
    HashMismatch,
    MalformedEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainFault {
    pub index: u64,
    pub kind: FaultKind,
    pub detail: String,
}

/// Outcome of [`Chain::verify`]. Failures are reported, never raised.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub blocks_checked: usize,
    pub first_failure: Option<ChainFault>,
}

impl VerificationReport {
    pub fn failing_index(&self) -> Option<u64> {
        self.first_failure.as_ref().map(|f| f.index)
    }
}

fn check_entries(entries: &[RecordEntry]) -> Result<(), (usize, String)> {
    let mut last_time = 0u64;
    for (pos, e) in entries.iter().enumerate() {
        if e.payload.is_empty() {
            return Err((pos, "empty payload".into()));
        }
        if e.logical_time < last_time {
            return Err((
                pos,
                format!("logical_time {} precedes {}", e.logical_time, last_time),
            ));
        }
        last_time = e.logical_time;
    }
    Ok(())
}

/// Filter for [`Chain::query_records`]. Unset fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordFilter {
    pub kind: Option<EntryKind>,
    pub actor: Option<NodeId>,
    pub contract_id: Option<ContractId>,
}

impl RecordFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn kind(mut self, kind: EntryKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn actor(mut self, actor: NodeId) -> Self {
        self.actor = Some(actor);
        self
    }

    pub fn contract(mut self, contract_id: ContractId) -> Self {
        self.contract_id = Some(contract_id);
        self
    }

    pub fn matches(&self, e: &RecordEntry) -> bool {
        self.kind.is_none_or(|k| k == e.entry_kind)
            && self.actor.as_ref().is_none_or(|a| *a == e.actor)
            && self
                .contract_id
                .as_ref()
                .is_none_or(|c| *c == e.contract_id)
    }
}

/// An immutable sequence of blocks.
///
/// Blocks are shared behind `Arc`, so appending copies pointers rather than
/// block contents. `verified_len` tracks how many leading blocks are known
/// to verify; chains built only through [`Chain::append_block`] are fully
/// verified by construction, while [`Chain::from_blocks`] starts at zero.
#[derive(Debug, Clone, Default)]
pub struct Chain {
    blocks: Vec<Arc<Block>>,
    verified_len: usize,
}

impl PartialEq for Chain {
    fn eq(&self, other: &Self) -> bool {
        self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a == b)
    }
}

impl Eq for Chain {}

impl Chain {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wrap blocks from an untrusted source. Nothing is checked here.
    pub fn from_blocks(blocks: Vec<Block>) -> Self {
        Self {
            blocks: blocks.into_iter().map(Arc::new).collect(),
            verified_len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> impl ExactSizeIterator<Item = &Block> + '_ {
        self.blocks.iter().map(|b| b.as_ref())
    }

    pub fn block(&self, index: usize) -> Option<&Block> {
        self.blocks.get(index).map(|b| b.as_ref())
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last().map(|b| b.as_ref())
    }

    pub fn to_blocks(&self) -> Vec<Block> {
        self.blocks().cloned().collect()
    }

    /// All entries in chain order.
    pub fn entries(&self) -> impl Iterator<Item = &RecordEntry> + '_ {
        self.blocks().flat_map(|b| b.entries.iter())
    }

    /// Append one block sealed by `validator`, returning the extended chain.
    pub fn append_block(
        &self,
        entries: Vec<RecordEntry>,
        validator: &NodeId,
    ) -> Result<Chain, LedgerError> {
        if entries.is_empty() {
            return Err(LedgerError::EmptyEntries);
        }
        if let Err((position, reason)) = check_entries(&entries) {
            return Err(LedgerError::MalformedEntry { position, reason });
        }
        if self.verified_len < self.blocks.len() {
            let report = self.verify();
            if let Some(fault) = report.first_failure {
                return Err(LedgerError::InvalidParentChain {
                    index: fault.index,
                    detail: fault.detail,
                });
            }
        }
        let (index, prev_hash) = match self.tip() {
            Some(tip) => (tip.index + 1, tip.block_hash),
            None => (0, Digest::ZERO),
        };
        let block = Block::seal(index, prev_hash, entries, validator.clone());
        let mut blocks = self.blocks.clone();
        blocks.push(Arc::new(block));
        let verified_len = blocks.len();
        Ok(Chain {
            blocks,
            verified_len,
        })
    }

    /// Recompute every hash and check every link.
    pub fn verify(&self) -> VerificationReport {
        let mut prev: Option<&Block> = None;
        for (pos, block) in self.blocks().enumerate() {
            if let Err(fault) = verify_block(block, pos as u64, prev) {
                return VerificationReport {
                    valid: false,
                    blocks_checked: pos + 1,
                    first_failure: Some(fault),
                };
            }
            prev = Some(block);
        }
        VerificationReport {
            valid: true,
            blocks_checked: self.blocks.len(),
            first_failure: None,
        }
    }

    /// All and only the matching entries, in chain order.
    pub fn query_records<'a>(&'a self, filter: &RecordFilter) -> Vec<&'a RecordEntry> {
        self.entries().filter(|e| filter.matches(e)).collect()
    }

    /// Newline-delimited JSON, one block per line.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for block in self.blocks() {
            out.push_str(&serde_json::to_string(block).expect("blocks always serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Chain, DumpError> {
        let mut blocks = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let block: Block = serde_json::from_str(line).map_err(|source| DumpError::Parse {
                line: n + 1,
                source,
            })?;
            blocks.push(block);
        }
        Ok(Chain::from_blocks(blocks))
    }
}

fn verify_block(block: &Block, position: u64, prev: Option<&Block>) -> Result<(), ChainFault> {
    let fault = |kind, detail: String| ChainFault {
        index: position,
        kind,
        detail,
    };
    if block.index != position {
        return Err(fault(
            FaultKind::IndexMismatch,
            format!("block at position {position} carries index {}", block.index),
        ));
    }
    let expected_prev = prev.map_or(Digest::ZERO, |p| p.block_hash);
    if block.prev_hash != expected_prev {
        return Err(fault(
            FaultKind::BrokenLink,
            format!(
                "prev_hash {} does not match {}",
                block.prev_hash, expected_prev
            ),
        ));
    }
    let recomputed = block.compute_hash();
    if recomputed != block.block_hash {
        return Err(fault(
            FaultKind::HashMismatch,
            format!(
                "stored hash {} but contents hash to {}",
                block.block_hash, recomputed
            ),
        ));
    }
    if block.entries.is_empty() {
        return Err(fault(
            FaultKind::MalformedEntry,
            "block has no entries".into(),
        ));
    }
    if let Err((pos, reason)) = check_entries(&block.entries) {
        return Err(fault(
            FaultKind::MalformedEntry,
            format!("entry {pos}: {reason}"),
        ));
    }
    Ok(())
}

/// Free-function form of [`Chain::append_block`].
pub fn append_block(
    chain: &Chain,
    entries: Vec<RecordEntry>,
    validator: &NodeId,
) -> Result<Chain, LedgerError> {
    chain.append_block(entries, validator)
}

pub fn verify_chain(chain: &Chain) -> VerificationReport {
    chain.verify()
}

pub fn query_records<'a>(chain: &'a Chain, filter: &RecordFilter) -> Vec<&'a RecordEntry> {
    chain.query_records(filter)
}
