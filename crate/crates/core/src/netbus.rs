//! In-process message bus and logical clock.
//!
//! Stands in for the peer-to-peer network: every cross-node effect is an
//! [`Envelope`]. Delivery order is total: `(deliver_tick, send order)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::id::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvelopeKind {
    Query,
    TaskAssignment,
    Acceptance,
    DebateMsg,
    Evaluation,
    Answer,
    Reward,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: EnvelopeKind,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
    pub send_tick: u64,
    pub deliver_tick: u64,
}

impl Envelope {
    /// Ticks are filled in by [`Bus::send`].
    pub fn new(from: NodeId, to: NodeId, kind: EnvelopeKind, payload: impl Into<Vec<u8>>) -> Self {
        Self {
            from,
            to,
            kind,
            payload: payload.into(),
            send_tick: 0,
            deliver_tick: 0,
        }
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BusError {
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(NodeId),
}

/// Seeded message dropping. Off unless configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub drop_probability: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusConfig {
    pub latency: u64,
    #[serde(default)]
    pub faults: Option<FaultInjection>,
}

impl Default for BusConfig {
    fn default() -> Self {
        Self {
            latency: 1,
            faults: None,
        }
    }
}

#[derive(Debug)]
pub struct Bus {
    config: BusConfig,
    now: u64,
    next_seq: u64,
    endpoints: BTreeSet<NodeId>,
    queue: BTreeMap<(u64, u64), Envelope>,
    rng: Option<ChaCha8Rng>,
    dropped: u64,
    trace: Vec<Envelope>,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new(BusConfig::default())
    }
}

impl Bus {
    pub fn new(config: BusConfig) -> Self {
        let rng = config.faults.map(|f| ChaCha8Rng::seed_from_u64(f.seed));
        Self {
            config,
            now: 0,
            next_seq: 0,
            endpoints: BTreeSet::new(),
            queue: BTreeMap::new(),
            rng,
            dropped: 0,
            trace: Vec::new(),
        }
    }

    pub fn register(&mut self, node: NodeId) {
        self.endpoints.insert(node);
    }

    pub fn is_registered(&self, node: &NodeId) -> bool {
        self.endpoints.contains(node)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Every delivered envelope, in delivery order.
    pub fn trace(&self) -> &[Envelope] {
        &self.trace
    }

    pub fn trace_ndjson(&self) -> String {
        self.trace
            .iter()
            .map(|e| serde_json::to_string(e).expect("envelopes always serialize") + "\n")
            .collect()
    }

    /// Enqueue `envelope` for delivery at `now + latency`.
    pub fn send(&mut self, mut envelope: Envelope) -> Result<(), BusError> {
        for end in [&envelope.from, &envelope.to] {
            if !self.endpoints.contains(end) {
                return Err(BusError::UnknownEndpoint(end.clone()));
            }
        }
        envelope.send_tick = self.now;
        envelope.deliver_tick = self.now + self.config.latency;
        let seq = self.next_seq;
        self.next_seq += 1;
        if let (Some(rng), Some(faults)) = (self.rng.as_mut(), self.config.faults) {
            if rng.random_bool(faults.drop_probability.clamp(0.0, 1.0)) {
                self.dropped += 1;
                return Ok(());
            }
        }
        self.queue.insert((envelope.deliver_tick, seq), envelope);
        Ok(())
    }

    /// Advance the clock one tick and return everything now due.
    pub fn step(&mut self) -> Vec<Envelope> {
        self.now += 1;
        let later = self.queue.split_off(&(self.now + 1, 0));
        let due = std::mem::replace(&mut self.queue, later);
        let delivered: Vec<Envelope> = due.into_values().collect();
        self.trace.extend(delivered.iter().cloned());
        delivered
    }

    /// Step until `pred` matches a delivered envelope or the queue drains.
    /// Returns every envelope delivered on the way.
    pub fn run_until(&mut self, mut pred: impl FnMut(&Envelope) -> bool) -> Vec<Envelope> {
        let mut out = Vec::new();
        while !self.queue.is_empty() {
            let batch = self.step();
            let hit = batch.iter().any(&mut pred);
            out.extend(batch);
            if hit {
                break;
            }
        }
        out
    }
}
