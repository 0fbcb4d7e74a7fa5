//! Protocol library and deterministic simulator for a decentralized network
//! of LLM service nodes.
//!
//! Queries become contracts, respondents debate until they agree, peers
//! evaluate each other, and every step lands on a hash-linked ledger.

pub mod contract;
pub mod debate;
pub mod id;
pub mod ledger;
pub mod netbus;
pub mod nodes;
pub mod reputation;
pub mod scenario;

pub use id::{ContractId, NodeId};
