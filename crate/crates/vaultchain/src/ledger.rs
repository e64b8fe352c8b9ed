//! Chain storage, deterministic transaction execution, and the on-chain
//! attestation registry.
//!
//! Execution is strictly deterministic: identical `(state, tx)` pairs yield
//! identical outcomes on every node. Transactions that fail validation
//! inside a decided block are skipped without any state change, so honest
//! nodes converge even when a Byzantine leader includes junk. A failed
//! append leaves chain and state untouched.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::codec::{self, Decode, Encode, Reader};
use crate::crypto::sha256;
use crate::membership::{quorum_threshold, ValidatorSet};
use crate::types::{
    Address, AttestationReport, Block, BlockHeader, Hash32, PublicKey, QuorumCertificate,
    Transaction, TxKind,
};

/// Why a transaction was rejected. Rejection inside a decided block skips
/// the transaction deterministically; it never aborts the block.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RejectReason {
    BadSig,
    BadNonce { expected: u64, got: u64 },
    InsufficientBalance { balance: u64, amount: u64 },
    BadReport,
    DuplicateReport,
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::BadSig => "BAD_SIG",
            RejectReason::BadNonce { .. } => "BAD_NONCE",
            RejectReason::InsufficientBalance { .. } => "INSUFFICIENT_BALANCE",
            RejectReason::BadReport => "BAD_REPORT",
            RejectReason::DuplicateReport => "BAD_REPORT:DUPLICATE",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct Account {
    pub nonce: u64,
    pub balance: u64,
}

/// Global replicated state: account balances/nonces, registered public
/// keys, and the attestation-report registry keyed by code hash.
#[derive(Clone, Debug, Default)]
pub struct WorldState {
    accounts: BTreeMap<Address, Account>,
    keys: BTreeMap<Address, PublicKey>,
    registry: BTreeMap<Hash32, AttestationReport>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an account with its public key and opening balance.
    pub fn credit_account(&mut self, public_key: PublicKey, balance: u64) -> Address {
        let address = Address::from_public_key(&public_key);
        self.keys.insert(address, public_key);
        self.accounts.insert(address, Account { nonce: 0, balance });
        address
    }

    pub fn account(&self, address: &Address) -> Option<Account> {
        self.accounts.get(address).copied()
    }

    pub fn public_key(&self, address: &Address) -> Option<PublicKey> {
        self.keys.get(address).copied()
    }

    /// The nonce the next transaction from `address` must carry.
    pub fn expected_nonce(&self, address: &Address) -> u64 {
        self.accounts.get(address).map(|a| a.nonce).unwrap_or(0) + 1
    }

    pub fn lookup_report(&self, code_hash: &Hash32) -> Option<&AttestationReport> {
        self.registry.get(code_hash)
    }

    pub fn report_count(&self) -> usize {
        self.registry.len()
    }

    /// Hash of the canonical encoding of the sorted state.
    pub fn state_root(&self) -> Hash32 {
        sha256(&self.encode())
    }

    fn validate(&self, tx: &Transaction) -> Result<(), RejectReason> {
        let Some(key) = self.keys.get(&tx.sender) else {
            return Err(RejectReason::BadSig);
        };
        if !tx.verify(key) {
            return Err(RejectReason::BadSig);
        }
        let expected = self.expected_nonce(&tx.sender);
        if tx.nonce != expected {
            return Err(RejectReason::BadNonce {
                expected,
                got: tx.nonce,
            });
        }
        match &tx.kind {
            TxKind::Transfer { amount, .. } => {
                let balance = self.accounts.get(&tx.sender).map(|a| a.balance).unwrap_or(0);
                if balance < *amount {
                    return Err(RejectReason::InsufficientBalance {
                        balance,
                        amount: *amount,
                    });
                }
            }
            TxKind::PublishReport(report) => {
                if !report.verify(None) {
                    return Err(RejectReason::BadReport);
                }
                if self.registry.contains_key(&report.code_hash) {
                    return Err(RejectReason::DuplicateReport);
                }
            }
        }
        Ok(())
    }

    /// Validates and applies one transaction. On rejection the state is
    /// bit-identical to before the call.
    pub fn execute_transaction(&mut self, tx: &Transaction) -> Result<(), RejectReason> {
        self.validate(tx)?;
        match &tx.kind {
            TxKind::Transfer { to, amount } => {
                let sender = self.accounts.entry(tx.sender).or_default();
                sender.balance -= amount;
                sender.nonce = tx.nonce;
                let recipient = self.accounts.entry(*to).or_default();
                recipient.balance += amount;
            }
            TxKind::PublishReport(report) => {
                self.registry.insert(report.code_hash, report.clone());
                self.accounts.entry(tx.sender).or_default().nonce = tx.nonce;
            }
        }
        Ok(())
    }
}

impl Encode for WorldState {
    fn encode_into(&self, out: &mut Vec<u8>) {
        codec::put_count(out, self.accounts.len());
        for (addr, acct) in &self.accounts {
            addr.encode_into(out);
            codec::put_u64(out, acct.nonce);
            codec::put_u64(out, acct.balance);
        }
        codec::put_count(out, self.keys.len());
        for (addr, key) in &self.keys {
            addr.encode_into(out);
            key.encode_into(out);
        }
        codec::put_count(out, self.registry.len());
        for (hash, report) in &self.registry {
            hash.encode_into(out);
            report.encode_into(out);
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AppendError {
    #[error("WRONG_PARENT: block parent {got} does not extend head {expected}")]
    WrongParent { expected: Hash32, got: Hash32 },
    #[error("BAD_HEIGHT: expected {expected}, block carries {got}")]
    BadHeight { expected: u64, got: u64 },
    #[error("BAD_TX_ROOT: transaction root does not recompute")]
    BadTxRoot,
    #[error("BAD_CERT: {0}")]
    BadCert(String),
}

impl AppendError {
    pub fn code(&self) -> &'static str {
        match self {
            AppendError::WrongParent { .. } => "WRONG_PARENT",
            AppendError::BadHeight { .. } => "BAD_HEIGHT",
            AppendError::BadTxRoot => "BAD_TX_ROOT",
            AppendError::BadCert(_) => "BAD_CERT",
        }
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("chain file is empty")]
    Empty,
    #[error("malformed chain file: {0}")]
    Codec(#[from] codec::CodecError),
    #[error("genesis block in file does not match the supplied genesis state")]
    GenesisMismatch,
    #[error("block at height {height} carries no commit certificate")]
    MissingCertificate { height: u64 },
    #[error("block at height {height} rejected: {source}")]
    Rejected {
        height: u64,
        source: AppendError,
    },
}

/// Result of appending a decided block: how many transactions applied and
/// which were skipped.
#[derive(Debug, Default)]
pub struct AppendOutcome {
    pub applied: usize,
    pub skipped: Vec<(usize, RejectReason)>,
}

/// Single-chain block store indexed by hash and by height.
#[derive(Clone, Debug)]
pub struct ChainStore {
    blocks: HashMap<Hash32, Block>,
    heights: Vec<Hash32>,
}

impl ChainStore {
    fn new(genesis: Block) -> Self {
        let hash = genesis.hash();
        let mut blocks = HashMap::new();
        blocks.insert(hash, genesis);
        ChainStore {
            blocks,
            heights: vec![hash],
        }
    }

    pub fn head(&self) -> &Block {
        &self.blocks[self.heights.last().expect("chain always has genesis")]
    }

    pub fn head_hash(&self) -> Hash32 {
        *self.heights.last().expect("chain always has genesis")
    }

    pub fn height(&self) -> u64 {
        (self.heights.len() - 1) as u64
    }

    pub fn get(&self, hash: &Hash32) -> Option<&Block> {
        self.blocks.get(hash)
    }

    pub fn contains(&self, hash: &Hash32) -> bool {
        self.blocks.contains_key(hash)
    }

    pub fn at_height(&self, height: u64) -> Option<&Block> {
        self.heights
            .get(height as usize)
            .and_then(|h| self.blocks.get(h))
    }
}

/// One node's chain plus world state. Only the node's own decision path
/// appends; reads are free between appends.
#[derive(Clone, Debug)]
pub struct Ledger {
    chain: ChainStore,
    state: WorldState,
}

/// Deterministic genesis block for a given opening state.
pub fn genesis_block(state: &WorldState) -> Block {
    Block {
        header: BlockHeader {
            parent_hash: Hash32::ZERO,
            height: 0,
            epoch: 0,
            proposer: Address::ZERO,
            tx_root: Block::compute_tx_root(&[]),
            state_root: state.state_root(),
            commit_certificate: None,
        },
        transactions: Vec::new(),
    }
}

impl Ledger {
    pub fn genesis(state: WorldState) -> Self {
        let block = genesis_block(&state);
        Ledger {
            chain: ChainStore::new(block),
            state,
        }
    }

    pub fn chain(&self) -> &ChainStore {
        &self.chain
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn head_hash(&self) -> Hash32 {
        self.chain.head_hash()
    }

    pub fn height(&self) -> u64 {
        self.chain.height()
    }

    pub fn state_root(&self) -> Hash32 {
        self.state.state_root()
    }

    /// Appends a decided block. All structural checks run before any state
    /// mutation, so a rejected append leaves the ledger bit-identical.
    /// Individual transactions that fail validation are skipped, not fatal.
    pub fn append_block(
        &mut self,
        block: &Block,
        cert: &QuorumCertificate,
        committee: &ValidatorSet,
    ) -> Result<AppendOutcome, AppendError> {
        let head = self.chain.head();
        let expected_height = head.header.height + 1;
        if block.header.height != expected_height {
            return Err(AppendError::BadHeight {
                expected: expected_height,
                got: block.header.height,
            });
        }
        let head_hash = self.chain.head_hash();
        if block.header.parent_hash != head_hash {
            return Err(AppendError::WrongParent {
                expected: head_hash,
                got: block.header.parent_hash,
            });
        }
        if !block.tx_root_matches() {
            return Err(AppendError::BadTxRoot);
        }
        if cert.phase != crate::types::Phase::Commit {
            return Err(AppendError::BadCert(format!(
                "certificate phase is {}, not COMMIT",
                cert.phase
            )));
        }
        let block_hash = block.hash();
        if cert.block_hash != block_hash {
            return Err(AppendError::BadCert(
                "certificate is for a different block".to_string(),
            ));
        }
        cert.verify_with(quorum_threshold(committee.len()), |addr| {
            committee.public_key(addr)
        })
        .map_err(|e| AppendError::BadCert(e.to_string()))?;

        let mut outcome = AppendOutcome::default();
        for (index, tx) in block.transactions.iter().enumerate() {
            match self.state.execute_transaction(tx) {
                Ok(()) => outcome.applied += 1,
                Err(reason) => outcome.skipped.push((index, reason)),
            }
        }

        let mut stored = block.clone();
        stored.header.commit_certificate = Some(cert.clone());
        self.chain.blocks.insert(block_hash, stored);
        self.chain.heights.push(block_hash);
        Ok(outcome)
    }

    /// Serializes the chain as concatenated length-prefixed canonical block
    /// encodings, genesis first.
    pub fn chain_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for hash in &self.chain.heights {
            codec::put_var_bytes(&mut out, &self.chain.blocks[hash].encode());
        }
        out
    }

    /// Rebuilds a ledger from genesis state plus a chain file, re-executing
    /// every block and re-verifying every embedded commit certificate.
    pub fn replay_chain(
        genesis_state: WorldState,
        bytes: &[u8],
        committee: &ValidatorSet,
    ) -> Result<Ledger, ReplayError> {
        let mut reader = Reader::new(bytes);
        if reader.remaining() == 0 {
            return Err(ReplayError::Empty);
        }
        let mut ledger = Ledger::genesis(genesis_state);

        let first = Block::decode(&reader.var_bytes()?)?;
        if first != *ledger.chain.head() {
            return Err(ReplayError::GenesisMismatch);
        }
        while reader.remaining() > 0 {
            let stored = Block::decode(&reader.var_bytes()?)?;
            let height = stored.header.height;
            let cert = stored
                .header
                .commit_certificate
                .clone()
                .ok_or(ReplayError::MissingCertificate { height })?;
            let mut block = stored;
            block.header.commit_certificate = None;
            ledger
                .append_block(&block, &cert, committee)
                .map_err(|source| ReplayError::Rejected { height, source })?;
        }
        Ok(ledger)
    }
}
