//! Consensus-node library and deterministic network simulator for a
//! committee-based blockchain with a simulated trusted-hardware boundary.
//!
//! The pieces, bottom-up:
//!
//! * [`codec`] / [`types`] / [`crypto`] — canonical byte encoding, the core
//!   data model (blocks, votes, quorum certificates), SHA-256 hashing, and
//!   Ed25519 verification.
//! * [`membership`] — stake accounting, proof-of-stake committee selection,
//!   quorum arithmetic, and round-robin leader rotation.
//! * [`vault`] — the simulated security chip: non-exportable endorsement and
//!   node keys, a seeded TRNG, and the code-attestation engine.
//! * [`ledger`] — chain storage, deterministic transaction execution, the
//!   on-chain attestation registry, and chain-file persistence.
//! * [`consensus`] — the per-validator three-phase BFT state machine with
//!   leader-side vote aggregation and a timeout pacemaker.
//! * [`sim`] — the deterministic discrete-event network simulator with link
//!   models, Byzantine behavior injection, and safety/liveness checkers.
//! * [`bench`] — scenario runner, delay/throughput metrics, CSV output,
//!   genesis files, and the end-to-end attestation demo.
//!
//! Start with the `examples/` directory: each example is a runnable tour of
//! one capability.

pub mod bench;
pub mod codec;
pub mod consensus;
pub mod crypto;
pub mod ledger;
pub mod membership;
pub mod sim;
pub mod types;
pub mod vault;

pub use consensus::{ConsensusConfig, ConsensusCore, ConsensusMessage};
pub use ledger::{Ledger, WorldState};
pub use membership::{
    leader_for_epoch, max_faulty, quorum_threshold, select_committee, StakeLedger, ValidatorSet,
};
pub use sim::{ByzantineStrategy, LinkModel, SimConfig, Simulation};
pub use types::{
    Address, AttestationReport, Block, BlockHeader, Hash32, Phase, PublicKey, QuorumCertificate,
    Signature, Transaction, TxKind, Vote,
};
pub use vault::{verify_report, Vault, VaultKey};
