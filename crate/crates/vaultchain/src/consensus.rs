//! Per-validator state machine for the three-phase BFT protocol with
//! leader-side vote aggregation.
//!
//! One epoch drives one block through PREPARE, PRE_COMMIT, and COMMIT. The
//! epoch leader packages transactions, broadcasts the proposal, collects
//! votes point-to-point, and broadcasts one aggregated certificate per
//! phase, which keeps per-epoch message complexity linear in the committee
//! size. Validators lock on a PRE_COMMIT certificate and only abandon a lock
//! for a proposal that carries a strictly newer certificate for the same
//! block, which is what makes equivocating leaders unable to split decided
//! history.
//!
//! A timeout pacemaker covers leader failure: on expiry a validator
//! broadcasts a signed `NewEpoch` and enters the next epoch once a quorum of
//! such messages arrives, with exponential backoff until the next decision.
//!
//! The state machine is strictly single-threaded: it consumes one input
//! (message, timeout, or epoch entry) at a time and returns the outputs to
//! send. All I/O is the caller's job.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use crate::codec::{self, CodecError, Decode, Encode, Reader};
use crate::crypto::{self, domain};
use crate::ledger::Ledger;
use crate::membership::{leader_for_epoch, max_faulty, quorum_threshold, ValidatorSet};
use crate::types::{
    Address, Block, BlockHeader, CertError, Hash32, Phase, QuorumCertificate,
    Signature, Transaction, Vote,
};
use crate::vault::{Vault, VaultKey};

/// Static per-run consensus parameters.
#[derive(Clone, Debug)]
pub struct ConsensusConfig {
    pub committee: ValidatorSet,
    pub base_timeout_ms: u64,
    pub max_block_txs: usize,
}

impl ConsensusConfig {
    pub fn new(committee: ValidatorSet, base_timeout_ms: u64, max_block_txs: usize) -> Self {
        ConsensusConfig {
            committee,
            base_timeout_ms,
            max_block_txs,
        }
    }

    pub fn n(&self) -> usize {
        self.committee.len()
    }

    pub fn f(&self) -> usize {
        max_faulty(self.n())
    }

    pub fn quorum(&self) -> usize {
        quorum_threshold(self.n())
    }

    pub fn leader(&self, epoch: u64) -> Address {
        leader_for_epoch(epoch, &self.committee)
    }

    pub fn verify_cert(&self, cert: &QuorumCertificate) -> Result<(), CertError> {
        cert.verify_with(self.quorum(), |addr| self.committee.public_key(addr))
    }
}

/// Protocol messages exchanged between validators. Votes travel
/// point-to-point to the leader; proposals, certificates, and epoch changes
/// are broadcast. `BlockRequest`/`BlockResponse` let a validator that saw a
/// quorum certificate for an unknown block fetch the decided body.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ConsensusMessage {
    Proposal {
        epoch: u64,
        block: Block,
        justify: Option<QuorumCertificate>,
    },
    VoteMsg(Vote),
    CertMsg(QuorumCertificate),
    NewEpoch {
        epoch: u64,
        highest_cert: Option<QuorumCertificate>,
        sender: Address,
        signature: Signature,
    },
    BlockRequest {
        block_hash: Hash32,
    },
    BlockResponse {
        block: Block,
    },
}

impl ConsensusMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ConsensusMessage::Proposal { .. } => "proposal",
            ConsensusMessage::VoteMsg(_) => "vote",
            ConsensusMessage::CertMsg(_) => "cert",
            ConsensusMessage::NewEpoch { .. } => "new_epoch",
            ConsensusMessage::BlockRequest { .. } => "block_req",
            ConsensusMessage::BlockResponse { .. } => "block_resp",
        }
    }

    pub fn new_epoch_payload(epoch: u64, highest_cert: &Option<QuorumCertificate>) -> Vec<u8> {
        let mut out = vec![domain::NEW_EPOCH];
        codec::put_u64(&mut out, epoch);
        highest_cert.encode_into(&mut out);
        out
    }
}

impl Encode for ConsensusMessage {
    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            ConsensusMessage::Proposal {
                epoch,
                block,
                justify,
            } => {
                out.push(0);
                codec::put_u64(out, *epoch);
                block.encode_into(out);
                justify.encode_into(out);
            }
            ConsensusMessage::VoteMsg(vote) => {
                out.push(1);
                vote.encode_into(out);
            }
            ConsensusMessage::CertMsg(cert) => {
                out.push(2);
                cert.encode_into(out);
            }
            ConsensusMessage::NewEpoch {
                epoch,
                highest_cert,
                sender,
                signature,
            } => {
                out.push(3);
                codec::put_u64(out, *epoch);
                highest_cert.encode_into(out);
                sender.encode_into(out);
                signature.encode_into(out);
            }
            ConsensusMessage::BlockRequest { block_hash } => {
                out.push(4);
                block_hash.encode_into(out);
            }
            ConsensusMessage::BlockResponse { block } => {
                out.push(5);
                block.encode_into(out);
            }
        }
    }
}

impl Decode for ConsensusMessage {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.u8()? {
            0 => Ok(ConsensusMessage::Proposal {
                epoch: r.u64_be()?,
                block: Block::decode_from(r)?,
                justify: Option::decode_from(r)?,
            }),
            1 => Ok(ConsensusMessage::VoteMsg(Vote::decode_from(r)?)),
            2 => Ok(ConsensusMessage::CertMsg(QuorumCertificate::decode_from(r)?)),
            3 => Ok(ConsensusMessage::NewEpoch {
                epoch: r.u64_be()?,
                highest_cert: Option::decode_from(r)?,
                sender: Address::decode_from(r)?,
                signature: Signature::decode_from(r)?,
            }),
            4 => Ok(ConsensusMessage::BlockRequest {
                block_hash: Hash32::decode_from(r)?,
            }),
            5 => Ok(ConsensusMessage::BlockResponse {
                block: Block::decode_from(r)?,
            }),
            tag => Err(CodecError::InvalidTag {
                what: "consensus message",
                tag,
            }),
        }
    }
}

/// Reason code attached to every silently dropped input. Byzantine inputs
/// must never crash an honest node; they surface in the trace instead.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DropReason {
    WrongLeader,
    LockConflict,
    BadCert,
    Stale,
    NotLeader,
    NonMember,
    BadSig,
    DuplicateVote,
    UnknownBlock,
    BadHeight,
    WrongParent,
    BadTxRoot,
    BadTx,
    TooManyTxs,
    AlreadyVoted,
    Behind,
    MissingBody,
    MempoolFull,
}

impl DropReason {
    pub fn code(&self) -> &'static str {
        match self {
            DropReason::WrongLeader => "WRONG_LEADER",
            DropReason::LockConflict => "LOCK_CONFLICT",
            DropReason::BadCert => "BAD_CERT",
            DropReason::Stale => "STALE",
            DropReason::NotLeader => "NOT_LEADER",
            DropReason::NonMember => "NON_MEMBER",
            DropReason::BadSig => "BAD_SIG",
            DropReason::DuplicateVote => "DUPLICATE_VOTE",
            DropReason::UnknownBlock => "UNKNOWN_BLOCK",
            DropReason::BadHeight => "BAD_HEIGHT",
            DropReason::WrongParent => "WRONG_PARENT",
            DropReason::BadTxRoot => "BAD_TX_ROOT",
            DropReason::BadTx => "BAD_TX",
            DropReason::TooManyTxs => "TOO_MANY_TXS",
            DropReason::AlreadyVoted => "ALREADY_VOTED",
            DropReason::Behind => "BEHIND",
            DropReason::MissingBody => "MISSING_BODY",
            DropReason::MempoolFull => "MEMPOOL_FULL",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Destination {
    Broadcast,
    To(Address),
}

#[derive(Clone, Debug)]
pub struct Outbound {
    pub to: Destination,
    pub message: ConsensusMessage,
}

#[derive(Clone, Debug)]
pub struct DecidedEntry {
    pub block_hash: Hash32,
    pub height: u64,
    pub epoch: u64,
}

/// Everything a single state-machine step wants the host to do.
#[derive(Default, Debug)]
pub struct StepResult {
    pub outbound: Vec<Outbound>,
    pub decided: Vec<DecidedEntry>,
    pub rejects: Vec<(DropReason, Hash32)>,
    /// Replace the pacemaker deadline with this absolute time.
    pub set_timer: Option<u64>,
    /// Enter this epoch on a fresh event (never re-entrantly).
    pub schedule_epoch: Option<u64>,
    /// A proposal was packaged: (block hash, hashes of included txs).
    pub packaged: Option<(Hash32, Vec<Hash32>)>,
}

impl StepResult {
    fn merge(&mut self, other: StepResult) {
        self.outbound.extend(other.outbound);
        self.decided.extend(other.decided);
        self.rejects.extend(other.rejects);
        if other.set_timer.is_some() {
            self.set_timer = other.set_timer;
        }
        if other.schedule_epoch.is_some() {
            self.schedule_epoch = other.schedule_epoch;
        }
        if other.packaged.is_some() {
            self.packaged = other.packaged;
        }
    }

    fn reject(reason: DropReason, payload: Hash32) -> StepResult {
        StepResult {
            rejects: vec![(reason, payload)],
            ..Default::default()
        }
    }
}

/// FIFO transaction pool. Arrival order is preserved; signatures are checked
/// once on admission.
#[derive(Debug, Default)]
pub struct Mempool {
    queue: VecDeque<Transaction>,
    known: HashSet<Hash32>,
    cap: usize,
}

impl Mempool {
    pub fn new(cap: usize) -> Self {
        Mempool {
            queue: VecDeque::new(),
            known: HashSet::new(),
            cap,
        }
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn contains(&self, hash: &Hash32) -> bool {
        self.known.contains(hash)
    }

    /// Admits a transaction after signature and nonce-staleness checks.
    pub fn push(
        &mut self,
        tx: Transaction,
        state: &crate::ledger::WorldState,
    ) -> Result<(), DropReason> {
        let hash = tx.hash();
        if self.known.contains(&hash) {
            return Ok(());
        }
        if self.queue.len() >= self.cap {
            return Err(DropReason::MempoolFull);
        }
        let Some(key) = state.public_key(&tx.sender) else {
            return Err(DropReason::BadSig);
        };
        if !tx.verify(&key) {
            return Err(DropReason::BadSig);
        }
        if tx.nonce < state.expected_nonce(&tx.sender) {
            return Err(DropReason::Stale);
        }
        self.known.insert(hash);
        self.queue.push_back(tx);
        Ok(())
    }

    /// Selects up to `max` transactions in arrival order whose nonces chain
    /// correctly from the current state, rescanning until no further entry
    /// becomes selectable (a later arrival can fill an earlier nonce gap).
    /// Stale entries are evicted; future nonces stay queued. Selected
    /// transactions remain in the pool until a decided block includes them.
    pub fn select(&mut self, state: &crate::ledger::WorldState, max: usize) -> Vec<Transaction> {
        let mut stale = Vec::new();
        self.queue.retain(|tx| {
            if tx.nonce < state.expected_nonce(&tx.sender) {
                stale.push(tx.hash());
                false
            } else {
                true
            }
        });
        for hash in stale {
            self.known.remove(&hash);
        }

        let mut next_nonce: HashMap<Address, u64> = HashMap::new();
        let mut picked: HashSet<Hash32> = HashSet::new();
        let mut selected = Vec::new();
        loop {
            let mut progressed = false;
            for tx in &self.queue {
                if selected.len() >= max {
                    break;
                }
                let hash = tx.hash();
                if picked.contains(&hash) {
                    continue;
                }
                let expected = *next_nonce
                    .entry(tx.sender)
                    .or_insert_with(|| state.expected_nonce(&tx.sender));
                if tx.nonce == expected {
                    next_nonce.insert(tx.sender, expected + 1);
                    picked.insert(hash);
                    selected.push(tx.clone());
                    progressed = true;
                }
            }
            if !progressed || selected.len() >= max {
                break;
            }
        }
        selected
    }

    pub fn remove_included(&mut self, hashes: &[Hash32]) {
        let set: HashSet<&Hash32> = hashes.iter().collect();
        self.queue.retain(|tx| !set.contains(&tx.hash()));
        for h in hashes {
            self.known.remove(h);
        }
    }
}

const STASH_CAP: usize = 16;
const PENDING_BODIES_CAP: usize = 16;
const MAX_BACKOFF_DOUBLINGS: u32 = 16;

/// The consensus state machine for one validator.
pub struct ConsensusCore {
    config: ConsensusConfig,
    me: Address,
    vault: Vault,
    ledger: Ledger,
    mempool: Mempool,

    epoch: u64,
    entered: bool,
    phase: Phase,
    proposal_hash: Option<Hash32>,
    voted: [Option<Hash32>; 3],
    /// Leader-only vote aggregation for the current epoch.
    vote_buffer: HashMap<(Hash32, Phase), BTreeMap<Address, Signature>>,
    vote_index: HashSet<(Address, Phase)>,
    cert_emitted: HashSet<Phase>,

    locked: Option<QuorumCertificate>,
    locked_block: Option<Block>,
    /// Proposal bodies seen for the current undecided height.
    pending_blocks: HashMap<Hash32, Block>,
    pending_order: VecDeque<Hash32>,
    /// Valid COMMIT certificates waiting for their block body. Ordered map:
    /// the apply loop iterates it, and iteration order must be reproducible.
    pending_commit: BTreeMap<Hash32, QuorumCertificate>,
    /// NewEpoch collectors per target epoch: sender -> carried certificate.
    new_epoch_votes: BTreeMap<u64, BTreeMap<Address, Option<QuorumCertificate>>>,
    adopted_cert: Option<QuorumCertificate>,
    /// Messages that arrived early (future epoch or future height).
    stash: Vec<(Address, ConsensusMessage)>,
    requested: HashMap<Hash32, u64>,
    verified_certs: HashSet<Hash32>,
    consecutive_timeouts: u32,
}

impl ConsensusCore {
    pub fn new(config: ConsensusConfig, vault: Vault, ledger: Ledger) -> Self {
        let me = vault.address();
        ConsensusCore {
            config,
            me,
            vault,
            ledger,
            mempool: Mempool::new(1 << 16),
            epoch: 0,
            entered: false,
            phase: Phase::Prepare,
            proposal_hash: None,
            voted: [None; 3],
            vote_buffer: HashMap::new(),
            vote_index: HashSet::new(),
            cert_emitted: HashSet::new(),
            locked: None,
            locked_block: None,
            pending_blocks: HashMap::new(),
            pending_order: VecDeque::new(),
            pending_commit: BTreeMap::new(),
            new_epoch_votes: BTreeMap::new(),
            adopted_cert: None,
            stash: Vec::new(),
            requested: HashMap::new(),
            verified_certs: HashSet::new(),
            consecutive_timeouts: 0,
        }
    }

    pub fn address(&self) -> Address {
        self.me
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn config(&self) -> &ConsensusConfig {
        &self.config
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn locked_cert(&self) -> Option<&QuorumCertificate> {
        self.locked.as_ref()
    }

    pub fn is_leader(&self) -> bool {
        self.config.leader(self.epoch) == self.me
    }

    fn timeout_duration(&self) -> u64 {
        let shift = self.consecutive_timeouts.min(MAX_BACKOFF_DOUBLINGS);
        self.config.base_timeout_ms.saturating_mul(1u64 << shift)
    }

    /// Kicks off the protocol at simulated time `now` by scheduling entry
    /// into epoch 0.
    pub fn start(&mut self, now: u64) -> StepResult {
        self.enter_epoch(0, now)
    }

    /// Enters `epoch`: resets per-epoch state, arms the pacemaker, and
    /// proposes when this validator is the epoch leader.
    pub fn enter_epoch(&mut self, epoch: u64, now: u64) -> StepResult {
        if epoch < self.epoch || (epoch == self.epoch && self.entered) {
            return StepResult::default();
        }
        self.epoch = epoch;
        self.entered = true;
        self.phase = Phase::Prepare;
        self.proposal_hash = None;
        self.voted = [None; 3];
        self.vote_buffer.clear();
        self.vote_index.clear();
        self.cert_emitted.clear();
        self.new_epoch_votes = self.new_epoch_votes.split_off(&(epoch + 1));

        let mut result = StepResult {
            set_timer: Some(now + self.timeout_duration()),
            ..Default::default()
        };
        if self.is_leader() {
            result.merge(self.propose(now));
        }
        result.merge(self.replay_stash(now));
        result
    }

    /// Leader-side packaging: re-propose the highest locked block when one
    /// is known, otherwise build a fresh block from the mempool (empty
    /// blocks are allowed so the chain keeps advancing under zero load).
    fn propose(&mut self, now: u64) -> StepResult {
        let candidate = self.reproposal_candidate();
        let (block, justify) = match candidate {
            Some((cert, block)) => (block, Some(cert)),
            None => {
                let txs = self
                    .mempool
                    .select(self.ledger.state(), self.config.max_block_txs);
                let mut speculative = self.ledger.state().clone();
                for tx in &txs {
                    let _ = speculative.execute_transaction(tx);
                }
                let head = self.ledger.chain().head();
                let block = Block {
                    header: BlockHeader {
                        parent_hash: self.ledger.head_hash(),
                        height: head.header.height + 1,
                        epoch: self.epoch,
                        proposer: self.me,
                        tx_root: Block::compute_tx_root(&txs),
                        state_root: speculative.state_root(),
                        commit_certificate: None,
                    },
                    transactions: txs,
                };
                (block, self.locked.clone())
            }
        };

        let block_hash = block.hash();
        let tx_hashes: Vec<Hash32> = block.transactions.iter().map(Transaction::hash).collect();
        self.remember_body(block.clone());
        self.proposal_hash = Some(block_hash);

        let mut result = StepResult {
            outbound: vec![Outbound {
                to: Destination::Broadcast,
                message: ConsensusMessage::Proposal {
                    epoch: self.epoch,
                    block,
                    justify: justify.clone(),
                },
            }],
            packaged: Some((block_hash, tx_hashes)),
            ..Default::default()
        };
        // The leader's own vote obeys the same lock rule as everyone else's.
        if self.safety_rule(block_hash, justify.as_ref()).is_ok() {
            self.voted[Phase::Prepare as usize] = Some(block_hash);
            let own_vote = self.vote_for(block_hash, Phase::Prepare);
            result.merge(self.collect_vote(own_vote, now));
        }
        result
    }

    /// The highest PRE_COMMIT certificate whose block body is available,
    /// taken from this node's own lock or from certificates carried by
    /// NewEpoch messages.
    fn reproposal_candidate(&mut self) -> Option<(QuorumCertificate, Block)> {
        let mut best: Option<QuorumCertificate> = None;
        let mut consider = |cert: &QuorumCertificate| {
            if cert.phase == Phase::PreCommit
                && best.as_ref().map(|b| cert.epoch > b.epoch).unwrap_or(true)
            {
                best = Some(cert.clone());
            }
        };
        if let Some(lock) = &self.locked {
            consider(lock);
        }
        if let Some(adopted) = &self.adopted_cert {
            consider(adopted);
        }
        let best = best?;
        let body = self
            .pending_blocks
            .get(&best.block_hash)
            .cloned()
            .or_else(|| {
                self.locked_block
                    .as_ref()
                    .filter(|b| b.hash() == best.block_hash)
                    .cloned()
            })?;
        // Only blocks that still extend the decided head can be re-proposed.
        if body.header.parent_hash != self.ledger.head_hash() {
            return None;
        }
        Some((best, body))
    }

    fn vote_for(&self, block_hash: Hash32, phase: Phase) -> Vote {
        let payload = Vote::signing_payload(&block_hash, phase, self.epoch);
        Vote {
            voter: self.me,
            block_hash,
            phase,
            epoch: self.epoch,
            signature: self.vault.sign(VaultKey::Node, &payload),
        }
    }

    fn remember_body(&mut self, block: Block) {
        let hash = block.hash();
        if self.pending_blocks.contains_key(&hash) {
            return;
        }
        if self.pending_order.len() >= PENDING_BODIES_CAP {
            if let Some(evicted) = self.pending_order.pop_front() {
                self.pending_blocks.remove(&evicted);
            }
        }
        self.pending_order.push_back(hash);
        self.pending_blocks.insert(hash, block);
    }

    fn verify_cert_cached(&mut self, cert: &QuorumCertificate) -> Result<(), CertError> {
        let key = cert.hash();
        if self.verified_certs.contains(&key) {
            return Ok(());
        }
        self.config.verify_cert(cert)?;
        self.verified_certs.insert(key);
        Ok(())
    }

    fn stash_message(&mut self, src: Address, msg: ConsensusMessage) {
        if self.stash.len() < STASH_CAP {
            self.stash.push((src, msg));
        }
    }

    fn replay_stash(&mut self, now: u64) -> StepResult {
        if self.stash.is_empty() {
            return StepResult::default();
        }
        let pending = std::mem::take(&mut self.stash);
        let mut result = StepResult::default();
        for (src, msg) in pending {
            result.merge(self.on_message(src, msg, now));
        }
        result
    }

    /// Dispatches one network input.
    pub fn on_message(&mut self, src: Address, msg: ConsensusMessage, now: u64) -> StepResult {
        match msg {
            ConsensusMessage::Proposal {
                epoch,
                block,
                justify,
            } => self.on_proposal(src, epoch, block, justify, now),
            ConsensusMessage::VoteMsg(vote) => self.on_vote(vote, now),
            ConsensusMessage::CertMsg(cert) => self.on_certificate(cert, now),
            ConsensusMessage::NewEpoch {
                epoch,
                highest_cert,
                sender,
                signature,
            } => self.on_new_epoch(epoch, highest_cert, sender, signature, now),
            ConsensusMessage::BlockRequest { block_hash } => self.on_block_request(src, block_hash),
            ConsensusMessage::BlockResponse { block } => self.on_block_response(block, now),
        }
    }

    /// Admits a client transaction into the mempool.
    pub fn on_transaction(&mut self, tx: Transaction, _now: u64) -> StepResult {
        let hash = tx.hash();
        match self.mempool.push(tx, self.ledger.state()) {
            Ok(()) => StepResult::default(),
            Err(reason) => StepResult::reject(reason, hash),
        }
    }

    fn on_proposal(
        &mut self,
        src: Address,
        epoch: u64,
        block: Block,
        justify: Option<QuorumCertificate>,
        now: u64,
    ) -> StepResult {
        let msg_hash = || {
            crypto::hash_of(&ConsensusMessage::Proposal {
                epoch,
                block: block.clone(),
                justify: justify.clone(),
            })
        };
        if epoch < self.epoch {
            return StepResult::reject(DropReason::Stale, block.hash());
        }
        if epoch > self.epoch || !self.entered {
            let h = block.hash();
            self.stash_message(src, ConsensusMessage::Proposal { epoch, block, justify });
            return StepResult {
                rejects: vec![(DropReason::Behind, h)],
                ..Default::default()
            };
        }
        if src != self.config.leader(epoch) {
            return StepResult::reject(DropReason::WrongLeader, msg_hash());
        }

        let head = self.ledger.chain().head();
        let expected_height = head.header.height + 1;
        if block.header.height > expected_height {
            // We are behind: stash the proposal and fetch the missing parent.
            let mut result = self.request_block(block.header.parent_hash, now);
            result.rejects.push((DropReason::Behind, block.hash()));
            self.stash_message(src, ConsensusMessage::Proposal { epoch, block, justify });
            return result;
        }
        if block.header.height < expected_height {
            return StepResult::reject(DropReason::BadHeight, block.hash());
        }
        if block.header.parent_hash != self.ledger.head_hash() {
            return StepResult::reject(DropReason::WrongParent, block.hash());
        }
        if block.transactions.len() > self.config.max_block_txs {
            return StepResult::reject(DropReason::TooManyTxs, block.hash());
        }
        if !block.tx_root_matches() {
            return StepResult::reject(DropReason::BadTxRoot, block.hash());
        }

        let block_hash = block.hash();
        self.remember_body(block.clone());

        if let Some(voted) = self.voted[Phase::Prepare as usize] {
            if voted == block_hash {
                return StepResult::default();
            }
            return StepResult::reject(DropReason::AlreadyVoted, block_hash);
        }

        if !self.transactions_valid(&block) {
            return StepResult::reject(DropReason::BadTx, block_hash);
        }

        if let Err(reason) = self.safety_rule(block_hash, justify.as_ref()) {
            return StepResult::reject(reason, block_hash);
        }

        self.proposal_hash = Some(block_hash);
        self.voted[Phase::Prepare as usize] = Some(block_hash);
        let vote = self.vote_for(block_hash, Phase::Prepare);
        self.send_vote(vote, now)
    }

    /// Signature and nonce-chain validation of every transaction in a
    /// proposed block. Signatures already admitted to the mempool are not
    /// re-verified.
    fn transactions_valid(&self, block: &Block) -> bool {
        let state = self.ledger.state();
        let mut next_nonce: HashMap<Address, u64> = HashMap::new();
        for tx in &block.transactions {
            let expected = *next_nonce
                .entry(tx.sender)
                .or_insert_with(|| state.expected_nonce(&tx.sender));
            if tx.nonce != expected {
                return false;
            }
            next_nonce.insert(tx.sender, expected + 1);
            if !self.mempool.contains(&tx.hash()) {
                let Some(key) = state.public_key(&tx.sender) else {
                    return false;
                };
                if !tx.verify(&key) {
                    return false;
                }
            }
        }
        true
    }

    /// Lock rule: vote only when unlocked, re-voting the locked block, or
    /// shown a strictly newer valid certificate for the proposed block
    /// itself.
    fn safety_rule(
        &mut self,
        block_hash: Hash32,
        justify: Option<&QuorumCertificate>,
    ) -> Result<(), DropReason> {
        let Some(lock) = self.locked.clone() else {
            return Ok(());
        };
        if lock.block_hash == block_hash {
            return Ok(());
        }
        let Some(justify) = justify else {
            return Err(DropReason::LockConflict);
        };
        if justify.block_hash != block_hash
            || justify.epoch <= lock.epoch
            || justify.phase == Phase::Commit
        {
            return Err(DropReason::LockConflict);
        }
        self.verify_cert_cached(justify)
            .map_err(|_| DropReason::BadCert)?;
        Ok(())
    }

    fn send_vote(&mut self, vote: Vote, now: u64) -> StepResult {
        let leader = self.config.leader(self.epoch);
        if leader == self.me {
            self.collect_vote(vote, now)
        } else {
            StepResult {
                outbound: vec![Outbound {
                    to: Destination::To(leader),
                    message: ConsensusMessage::VoteMsg(vote),
                }],
                ..Default::default()
            }
        }
    }

    fn on_vote(&mut self, vote: Vote, now: u64) -> StepResult {
        let vote_id = crypto::hash_of(&vote);
        if self.config.leader(self.epoch) != self.me {
            return StepResult::reject(DropReason::NotLeader, vote_id);
        }
        if vote.epoch != self.epoch {
            return StepResult::reject(DropReason::Stale, vote_id);
        }
        let Some(key) = self.config.committee.public_key(&vote.voter) else {
            return StepResult::reject(DropReason::NonMember, vote_id);
        };
        // Votes may reference either our own proposal or, for later phases,
        // the hash carried by the phase certificates.
        if self.proposal_hash != Some(vote.block_hash) {
            return StepResult::reject(DropReason::UnknownBlock, vote_id);
        }
        if !vote.verify(&key) {
            return StepResult::reject(DropReason::BadSig, vote_id);
        }
        self.collect_vote(vote, now)
    }

    /// Leader-side aggregation: deduplicate by `(voter, phase)`, and emit
    /// the certificate exactly once when the quorum threshold is reached.
    fn collect_vote(&mut self, vote: Vote, now: u64) -> StepResult {
        let vote_id = crypto::hash_of(&vote);
        if !self.vote_index.insert((vote.voter, vote.phase)) {
            return StepResult::reject(DropReason::DuplicateVote, vote_id);
        }
        let bucket = self
            .vote_buffer
            .entry((vote.block_hash, vote.phase))
            .or_default();
        bucket.insert(vote.voter, vote.signature);

        if bucket.len() < self.config.quorum() || self.cert_emitted.contains(&vote.phase) {
            return StepResult::default();
        }
        self.cert_emitted.insert(vote.phase);
        let voters: Vec<(Address, Signature)> =
            bucket.iter().map(|(a, s)| (*a, *s)).collect();
        let cert = QuorumCertificate {
            block_hash: vote.block_hash,
            phase: vote.phase,
            epoch: self.epoch,
            voters,
        };
        // Built from individually verified votes; seed the cache so the
        // self-delivery below does not re-verify.
        self.verified_certs.insert(cert.hash());

        let mut result = StepResult {
            outbound: vec![Outbound {
                to: Destination::Broadcast,
                message: ConsensusMessage::CertMsg(cert.clone()),
            }],
            ..Default::default()
        };
        result.merge(self.on_certificate(cert, now));
        result
    }

    fn on_certificate(&mut self, cert: QuorumCertificate, now: u64) -> StepResult {
        let cert_id = cert.hash();
        if self.verify_cert_cached(&cert).is_err() {
            return StepResult::reject(DropReason::BadCert, cert_id);
        }
        if cert.epoch > self.epoch || (cert.epoch == self.epoch && !self.entered) {
            self.stash_message(Address::ZERO, ConsensusMessage::CertMsg(cert));
            return StepResult::default();
        }

        match cert.phase {
            Phase::Commit => self.on_commit_certificate(cert, now),
            Phase::Prepare | Phase::PreCommit => {
                if cert.epoch < self.epoch {
                    // An old PRE_COMMIT certificate can still raise the lock.
                    if cert.phase == Phase::PreCommit {
                        self.adopt_lock(&cert);
                    }
                    return StepResult::reject(DropReason::Stale, cert_id);
                }
                self.advance_phase(cert, now)
            }
        }
    }

    fn adopt_lock(&mut self, cert: &QuorumCertificate) {
        debug_assert_eq!(cert.phase, Phase::PreCommit);
        let newer = self
            .locked
            .as_ref()
            .map(|l| cert.epoch > l.epoch)
            .unwrap_or(true);
        if newer {
            self.locked = Some(cert.clone());
            self.locked_block = self.pending_blocks.get(&cert.block_hash).cloned();
        }
    }

    /// PREPARE or PRE_COMMIT certificate for the current epoch: advance the
    /// phase, re-arm the pacemaker (certificates are progress), and send the
    /// next-phase vote to the leader.
    fn advance_phase(&mut self, cert: QuorumCertificate, now: u64) -> StepResult {
        let next = cert.phase.next().expect("commit handled separately");
        if self.phase > cert.phase {
            if cert.phase == Phase::PreCommit {
                self.adopt_lock(&cert);
            }
            return StepResult::reject(DropReason::Stale, cert.hash());
        }
        if cert.phase == Phase::PreCommit {
            self.adopt_lock(&cert);
        }
        self.phase = next;
        self.proposal_hash.get_or_insert(cert.block_hash);

        let mut result = StepResult {
            set_timer: Some(now + self.timeout_duration()),
            ..Default::default()
        };
        if self.voted[next as usize].is_none() {
            self.voted[next as usize] = Some(cert.block_hash);
            let vote = self.vote_for(cert.block_hash, next);
            result.merge(self.send_vote(vote, now));
        }
        result
    }

    fn on_commit_certificate(&mut self, cert: QuorumCertificate, now: u64) -> StepResult {
        if self.ledger.chain().contains(&cert.block_hash) {
            return StepResult::reject(DropReason::Stale, cert.hash());
        }
        let body = self
            .pending_blocks
            .get(&cert.block_hash)
            .cloned()
            .or_else(|| {
                self.locked_block
                    .as_ref()
                    .filter(|b| b.hash() == cert.block_hash)
                    .cloned()
            });
        match body {
            Some(block) => self.decide_block(block, cert, now),
            None => {
                let hash = cert.block_hash;
                self.pending_commit.insert(hash, cert);
                let mut result = self.request_block(hash, now);
                result.rejects.push((DropReason::MissingBody, hash));
                result
            }
        }
    }

    /// Hands a decided block to the ledger, clears the lock, and schedules
    /// entry into the next epoch.
    fn decide_block(&mut self, block: Block, cert: QuorumCertificate, now: u64) -> StepResult {
        let block_hash = block.hash();
        let height = block.header.height;
        match self.ledger.append_block(&block, &cert, &self.config.committee) {
            Ok(_outcome) => {}
            Err(_) => {
                return StepResult::reject(DropReason::BadCert, block_hash);
            }
        }
        let tx_hashes: Vec<Hash32> = block.transactions.iter().map(Transaction::hash).collect();
        self.mempool.remove_included(&tx_hashes);
        self.locked = None;
        self.locked_block = None;
        self.pending_blocks.clear();
        self.pending_order.clear();
        self.pending_commit.remove(&block_hash);
        self.requested.clear();
        self.verified_certs.clear();
        self.adopted_cert = None;
        self.consecutive_timeouts = 0;

        let mut result = StepResult {
            decided: vec![DecidedEntry {
                block_hash,
                height,
                epoch: cert.epoch,
            }],
            ..Default::default()
        };

        let target = self.epoch.max(cert.epoch + 1);
        if target > self.epoch || cert.epoch == self.epoch {
            self.epoch = target;
            self.entered = false;
            result.schedule_epoch = Some(target);
        }
        result.merge(self.try_apply_pending(now));
        result.merge(self.replay_stash(now));
        result
    }

    /// Applies queued commit certificates whose bodies have arrived and
    /// now extend the head.
    fn try_apply_pending(&mut self, now: u64) -> StepResult {
        let mut result = StepResult::default();
        loop {
            let head_hash = self.ledger.head_hash();
            let next = self.pending_commit.iter().find_map(|(hash, cert)| {
                self.pending_blocks
                    .get(hash)
                    .filter(|b| b.header.parent_hash == head_hash)
                    .map(|b| (b.clone(), cert.clone()))
            });
            match next {
                Some((block, cert)) => result.merge(self.decide_block(block, cert, now)),
                None => break,
            }
        }
        result
    }

    fn request_block(&mut self, block_hash: Hash32, now: u64) -> StepResult {
        let retry_after = self.config.base_timeout_ms / 4;
        match self.requested.get(&block_hash) {
            Some(last) if now.saturating_sub(*last) < retry_after => StepResult::default(),
            _ => {
                self.requested.insert(block_hash, now);
                StepResult {
                    outbound: vec![Outbound {
                        to: Destination::Broadcast,
                        message: ConsensusMessage::BlockRequest { block_hash },
                    }],
                    ..Default::default()
                }
            }
        }
    }

    fn on_block_request(&mut self, src: Address, block_hash: Hash32) -> StepResult {
        // Serve only decided blocks; they carry their commit certificate.
        match self.ledger.chain().get(&block_hash) {
            Some(block) => StepResult {
                outbound: vec![Outbound {
                    to: Destination::To(src),
                    message: ConsensusMessage::BlockResponse {
                        block: block.clone(),
                    },
                }],
                ..Default::default()
            },
            None => StepResult::default(),
        }
    }

    fn on_block_response(&mut self, block: Block, now: u64) -> StepResult {
        let hash = block.hash();
        if self.ledger.chain().contains(&hash) {
            return StepResult::default();
        }
        let embedded = block.header.commit_certificate.clone();
        let mut body = block;
        body.header.commit_certificate = None;
        if !body.tx_root_matches() {
            return StepResult::reject(DropReason::BadTxRoot, hash);
        }

        // Either we already hold a commit certificate for this block, or the
        // response carries one; junk responses fail verification.
        if !self.pending_commit.contains_key(&hash) {
            let Some(cert) = embedded else {
                return StepResult::reject(DropReason::BadCert, hash);
            };
            if cert.phase != Phase::Commit
                || cert.block_hash != hash
                || self.verify_cert_cached(&cert).is_err()
            {
                return StepResult::reject(DropReason::BadCert, hash);
            }
            self.pending_commit.insert(hash, cert);
        }
        self.remember_body(body.clone());

        let mut result = StepResult::default();
        // Walk further back when the fetched block still does not connect.
        if body.header.height > self.ledger.height() + 1 {
            result.merge(self.request_block(body.header.parent_hash, now));
        }
        result.merge(self.try_apply_pending(now));
        result.merge(self.replay_stash(now));
        result
    }

    fn on_new_epoch(
        &mut self,
        target: u64,
        highest_cert: Option<QuorumCertificate>,
        sender: Address,
        signature: Signature,
        now: u64,
    ) -> StepResult {
        let msg_id = crypto::hash_of(&ConsensusMessage::NewEpoch {
            epoch: target,
            highest_cert: highest_cert.clone(),
            sender,
            signature,
        });
        if target <= self.epoch {
            return StepResult::reject(DropReason::Stale, msg_id);
        }
        let Some(key) = self.config.committee.public_key(&sender) else {
            return StepResult::reject(DropReason::NonMember, msg_id);
        };
        let payload = ConsensusMessage::new_epoch_payload(target, &highest_cert);
        if !crypto::verify_signature(&key, &payload, &signature) {
            return StepResult::reject(DropReason::BadSig, msg_id);
        }
        if let Some(cert) = &highest_cert {
            if self.verify_cert_cached(cert).is_err() {
                return StepResult::reject(DropReason::BadCert, msg_id);
            }
        }
        self.new_epoch_votes
            .entry(target)
            .or_default()
            .insert(sender, highest_cert);
        self.maybe_advance_epoch(target, now)
    }

    fn maybe_advance_epoch(&mut self, target: u64, _now: u64) -> StepResult {
        let quorum = self.config.quorum();
        let Some(collector) = self.new_epoch_votes.get(&target) else {
            return StepResult::default();
        };
        if collector.len() < quorum || target <= self.epoch {
            return StepResult::default();
        }
        // Adopt the highest carried lock certificate for the new leader's
        // re-proposal decision.
        let mut best = self.adopted_cert.clone();
        for cert in collector.values().flatten() {
            if cert.phase == Phase::PreCommit
                && best.as_ref().map(|b| cert.epoch > b.epoch).unwrap_or(true)
            {
                best = Some(cert.clone());
            }
        }
        self.adopted_cert = best;
        self.consecutive_timeouts = self.consecutive_timeouts.saturating_add(1);
        self.epoch = target;
        self.entered = false;
        StepResult {
            schedule_epoch: Some(target),
            ..Default::default()
        }
    }

    /// Pacemaker expiry: broadcast a signed NewEpoch for `epoch + 1` and
    /// keep the current epoch until a quorum of peers agrees to move.
    pub fn on_timeout(&mut self, now: u64) -> StepResult {
        let target = self.epoch + 1;
        let highest_cert = self.locked.clone();
        let payload = ConsensusMessage::new_epoch_payload(target, &highest_cert);
        let signature = self.vault.sign(VaultKey::Node, &payload);
        self.new_epoch_votes
            .entry(target)
            .or_default()
            .insert(self.me, highest_cert.clone());

        let mut result = StepResult {
            outbound: vec![Outbound {
                to: Destination::Broadcast,
                message: ConsensusMessage::NewEpoch {
                    epoch: target,
                    highest_cert,
                    sender: self.me,
                    signature,
                },
            }],
            set_timer: Some(now + self.timeout_duration()),
            ..Default::default()
        };
        result.merge(self.maybe_advance_epoch(target, now));
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::WorldState;
    use crate::membership::{select_committee, StakeLedger};

    fn build_vault(i: usize) -> Vault {
        Vault::provision([i as u8 + 1; 32])
    }

    fn build_committee(n: usize) -> (ValidatorSet, WorldState) {
        let mut stake = StakeLedger::new();
        let mut state = WorldState::new();
        for i in 0..n {
            let vault = build_vault(i);
            stake.register(vault.node_public_key(), 1000 - i as u64);
            state.credit_account(vault.node_public_key(), 1_000_000);
        }
        let committee = select_committee(&stake, n).unwrap();
        for (i, (addr, _)) in committee.members().iter().enumerate() {
            assert_eq!(*addr, build_vault(i).address(), "committee follows vault order");
        }
        (committee, state)
    }

    fn make_core(i: usize, committee: &ValidatorSet, state: &WorldState, timeout: u64) -> ConsensusCore {
        ConsensusCore::new(
            ConsensusConfig::new(committee.clone(), timeout, 2000),
            build_vault(i),
            Ledger::genesis(state.clone()),
        )
    }

    fn sign_vote(i: usize, block_hash: Hash32, phase: Phase, epoch: u64) -> Vote {
        let vault = build_vault(i);
        let payload = Vote::signing_payload(&block_hash, phase, epoch);
        Vote {
            voter: vault.address(),
            block_hash,
            phase,
            epoch,
            signature: vault.sign(VaultKey::Node, &payload),
        }
    }

    fn make_cert(signers: &[usize], block_hash: Hash32, phase: Phase, epoch: u64) -> QuorumCertificate {
        let mut voters: Vec<(Address, Signature)> = signers
            .iter()
            .map(|&i| {
                let v = sign_vote(i, block_hash, phase, epoch);
                (v.voter, v.signature)
            })
            .collect();
        voters.sort_by_key(|(a, _)| *a);
        QuorumCertificate { block_hash, phase, epoch, voters }
    }

    fn new_epoch_msg(i: usize, target: u64) -> ConsensusMessage {
        let vault = build_vault(i);
        let payload = ConsensusMessage::new_epoch_payload(target, &None);
        ConsensusMessage::NewEpoch {
            epoch: target,
            highest_cert: None,
            sender: vault.address(),
            signature: vault.sign(VaultKey::Node, &payload),
        }
    }

    enum Work {
        Msg { dst: usize, src: Address, msg: ConsensusMessage },
        Entry { node: usize, epoch: u64 },
    }

    /// Zero-delay router: messages deliver instantly in FIFO order among the
    /// participating nodes. Timeouts fire only when a test asks.
    struct Net {
        cores: Vec<ConsensusCore>,
        live: Vec<bool>,
        now: u64,
        queue: VecDeque<Work>,
        decided: Vec<Vec<DecidedEntry>>,
        rejects: Vec<(usize, DropReason)>,
        deadlines: Vec<Option<u64>>,
        entry_log: Vec<(usize, u64, u64)>,
    }

    impl Net {
        fn new(n: usize, timeout: u64) -> Net {
            let (committee, state) = build_committee(n);
            let cores: Vec<ConsensusCore> = (0..n)
                .map(|i| make_core(i, &committee, &state, timeout))
                .collect();
            Net {
                cores,
                live: vec![true; n],
                now: 0,
                queue: VecDeque::new(),
                decided: vec![Vec::new(); n],
                rejects: Vec::new(),
                deadlines: vec![None; n],
                entry_log: Vec::new(),
            }
        }

        /// First proposal currently queued for delivery.
        fn first_proposal_hash(&self) -> Hash32 {
            self.queue
                .iter()
                .find_map(|w| match w {
                    Work::Msg { msg: ConsensusMessage::Proposal { block, .. }, .. } => {
                        Some(block.hash())
                    }
                    _ => None,
                })
                .expect("no proposal queued")
        }

        fn addr(&self, i: usize) -> Address {
            self.cores[i].address()
        }

        fn node_of(&self, addr: Address) -> Option<usize> {
            self.cores.iter().position(|c| c.address() == addr)
        }

        fn start_all(&mut self) {
            for i in 0..self.cores.len() {
                if self.live[i] {
                    self.queue.push_back(Work::Entry { node: i, epoch: 0 });
                }
            }
        }

        fn absorb(&mut self, node: usize, result: StepResult) {
            for (reason, _) in result.rejects {
                self.rejects.push((node, reason));
            }
            self.decided[node].extend(result.decided);
            if let Some(t) = result.set_timer {
                self.deadlines[node] = Some(t);
            }
            if let Some(e) = result.schedule_epoch {
                self.queue.push_back(Work::Entry { node, epoch: e });
            }
            let src = self.addr(node);
            for out in result.outbound {
                match out.to {
                    Destination::Broadcast => {
                        for dst in 0..self.cores.len() {
                            if dst != node && self.live[dst] {
                                self.queue.push_back(Work::Msg {
                                    dst,
                                    src,
                                    msg: out.message.clone(),
                                });
                            }
                        }
                    }
                    Destination::To(addr) => {
                        if let Some(dst) = self.node_of(addr) {
                            if dst != node && self.live[dst] {
                                self.queue.push_back(Work::Msg { dst, src, msg: out.message });
                            }
                        }
                    }
                }
            }
        }

        fn pump(&mut self, max_steps: usize) {
            for _ in 0..max_steps {
                let Some(work) = self.queue.pop_front() else {
                    return;
                };
                match work {
                    Work::Msg { dst, src, msg } => {
                        if !self.live[dst] {
                            continue;
                        }
                        let now = self.now;
                        let result = self.cores[dst].on_message(src, msg, now);
                        self.absorb(dst, result);
                    }
                    Work::Entry { node, epoch } => {
                        if !self.live[node] {
                            continue;
                        }
                        let now = self.now;
                        let result = self.cores[node].enter_epoch(epoch, now);
                        if let Some(deadline) = result.set_timer {
                            self.entry_log.push((node, epoch, deadline));
                        }
                        self.absorb(node, result);
                    }
                }
            }
        }

        fn fire_timeout(&mut self, node: usize) {
            let now = self.now;
            let result = self.cores[node].on_timeout(now);
            self.absorb(node, result);
        }

        fn deliver(&mut self, dst: usize, src: Address, msg: ConsensusMessage) -> StepResult {
            let now = self.now;
            self.cores[dst].on_message(src, msg, now)
        }

        fn min_height(&self) -> u64 {
            self.cores
                .iter()
                .enumerate()
                .filter(|(i, _)| self.live[*i])
                .map(|(_, c)| c.ledger().height())
                .min()
                .unwrap_or(0)
        }
    }

    #[test]
    fn four_validators_decide_empty_blocks() {
        let mut net = Net::new(4, 1000);
        net.start_all();
        net.pump(400);
        assert!(net.min_height() >= 3, "chain should grow: {}", net.min_height());
        // All honest nodes decided the same blocks.
        for h in 1..=3u64 {
            let hashes: HashSet<Hash32> = (0..4)
                .map(|i| net.cores[i].ledger().chain().at_height(h).unwrap().hash())
                .collect();
            assert_eq!(hashes.len(), 1, "conflicting decision at height {h}");
        }
        // Zero-load blocks are empty.
        let block = net.cores[0].ledger().chain().at_height(1).unwrap();
        assert!(block.transactions.is_empty());
        assert!(block.header.commit_certificate.is_some());
    }

    #[test]
    fn single_validator_chain_grows() {
        let mut net = Net::new(1, 1000);
        net.start_all();
        net.pump(40);
        assert!(net.cores[0].ledger().height() >= 5);
    }

    #[test]
    fn proposal_from_non_leader_is_rejected() {
        let mut net = Net::new(4, 1000);
        net.start_all();
        net.pump(1); // only leader 0 has entered and proposed
        // Node 2 (still pre-entry for others is fine; enter it first).
        let now = net.now;
        let r = net.cores[2].enter_epoch(0, now);
        net.absorb(2, r);
        let head = net.cores[2].ledger().chain().head().clone();
        let block = Block {
            header: BlockHeader {
                parent_hash: head.hash(),
                height: 1,
                epoch: 0,
                proposer: net.addr(1),
                tx_root: Block::compute_tx_root(&[]),
                state_root: head.header.state_root,
                commit_certificate: None,
            },
            transactions: Vec::new(),
        };
        let result = net.deliver(
            2,
            net.addr(1),
            ConsensusMessage::Proposal { epoch: 0, block, justify: None },
        );
        assert!(result.outbound.is_empty());
        assert!(matches!(result.rejects.as_slice(), [(DropReason::WrongLeader, _)]));
    }

    #[test]
    fn leader_deduplicates_votes_and_emits_cert_once() {
        let mut net = Net::new(5, 1000);
        net.start_all();
        net.pump(1); // leader proposed; only its own vote collected
        let proposal_hash = net.first_proposal_hash();

        // Feed votes directly to the leader.
        let v1 = sign_vote(1, proposal_hash, Phase::Prepare, 0);
        let r = net.deliver(0, net.addr(1), ConsensusMessage::VoteMsg(v1.clone()));
        assert!(r.outbound.is_empty());

        // Duplicate from the same voter changes nothing.
        let r = net.deliver(0, net.addr(1), ConsensusMessage::VoteMsg(v1));
        assert!(matches!(r.rejects.as_slice(), [(DropReason::DuplicateVote, _)]));

        let v2 = sign_vote(2, proposal_hash, Phase::Prepare, 0);
        let r = net.deliver(0, net.addr(2), ConsensusMessage::VoteMsg(v2));
        assert!(r.outbound.is_empty(), "3 of 5 votes is below quorum");

        // Fourth distinct vote reaches the threshold: exactly one PREPARE
        // certificate with 4 voters.
        let v3 = sign_vote(3, proposal_hash, Phase::Prepare, 0);
        let r = net.deliver(0, net.addr(3), ConsensusMessage::VoteMsg(v3));
        let certs: Vec<&ConsensusMessage> = r
            .outbound
            .iter()
            .filter(|o| matches!(o.message, ConsensusMessage::CertMsg(ref c) if c.phase == Phase::Prepare))
            .map(|o| &o.message)
            .collect();
        assert_eq!(certs.len(), 1);
        if let ConsensusMessage::CertMsg(cert) = certs[0] {
            assert_eq!(cert.voters.len(), 4);
            assert_eq!(cert.phase, Phase::Prepare);
        }

        // A fifth vote after emission must not produce a second certificate.
        let v4 = sign_vote(4, proposal_hash, Phase::Prepare, 0);
        let r = net.deliver(0, net.addr(4), ConsensusMessage::VoteMsg(v4));
        assert!(r.outbound.iter().all(|o| !matches!(
            o.message,
            ConsensusMessage::CertMsg(ref c) if c.phase == Phase::Prepare
        )));
    }

    #[test]
    fn vote_with_bad_signature_or_non_member_is_dropped() {
        let mut net = Net::new(4, 1000);
        net.start_all();
        net.pump(1);
        let proposal_hash = net.first_proposal_hash();
        let mut vote = sign_vote(1, proposal_hash, Phase::Prepare, 0);
        vote.signature.0[0] ^= 1;
        let r = net.deliver(0, net.addr(1), ConsensusMessage::VoteMsg(vote));
        assert!(matches!(r.rejects.as_slice(), [(DropReason::BadSig, _)]));

        let outsider = Vault::provision([99u8; 32]);
        let payload = Vote::signing_payload(&proposal_hash, Phase::Prepare, 0);
        let vote = Vote {
            voter: outsider.address(),
            block_hash: proposal_hash,
            phase: Phase::Prepare,
            epoch: 0,
            signature: outsider.sign(VaultKey::Node, &payload),
        };
        let r = net.deliver(0, outsider.address(), ConsensusMessage::VoteMsg(vote));
        assert!(matches!(r.rejects.as_slice(), [(DropReason::NonMember, _)]));
    }

    #[test]
    fn undersized_certificate_is_rejected() {
        let mut net = Net::new(5, 1000);
        net.start_all();
        net.pump(1);
        let proposal_hash = net.first_proposal_hash();
        // 3 of 5 voters, threshold is 4.
        let cert = make_cert(&[0, 1, 2], proposal_hash, Phase::Prepare, 0);
        let r = net.deliver(1, net.addr(0), ConsensusMessage::CertMsg(cert));
        assert!(matches!(r.rejects.as_slice(), [(DropReason::BadCert, _)]));
    }

    #[test]
    fn precommit_certificate_locks_and_lock_rule_gates_votes() {
        let mut net = Net::new(4, 1000);
        net.start_all();
        net.pump(2); // leader proposed; node 1 got it
        // Node 3 under test: make sure it entered and saw the proposal.
        net.pump(50);
        // Everyone decided block 1 by now in this fully-connected pump; use
        // a fresh scenario instead with manual control.
        let (committee, state) = build_committee(4);
        let mut core = make_core(2, &committee, &state, 1000);
        let r = core.enter_epoch(0, 0);
        assert!(r.set_timer.is_some());

        // Leader 0 proposes block A.
        let head = core.ledger().chain().head().clone();
        let block_a = Block {
            header: BlockHeader {
                parent_hash: head.hash(),
                height: 1,
                epoch: 0,
                proposer: committee.member(0).0,
                tx_root: Block::compute_tx_root(&[]),
                state_root: head.header.state_root,
                commit_certificate: None,
            },
            transactions: Vec::new(),
        };
        let hash_a = block_a.hash();
        let r = core.on_message(
            committee.member(0).0,
            ConsensusMessage::Proposal { epoch: 0, block: block_a.clone(), justify: None },
            1,
        );
        assert_eq!(r.outbound.len(), 1, "prepare vote expected");

        // PREPARE then PRE_COMMIT certificates arrive; the latter locks.
        let prep = make_cert(&[0, 1, 3], hash_a, Phase::Prepare, 0);
        core.on_message(committee.member(0).0, ConsensusMessage::CertMsg(prep), 2);
        assert!(core.locked_cert().is_none());
        let pc = make_cert(&[0, 1, 3], hash_a, Phase::PreCommit, 0);
        core.on_message(committee.member(0).0, ConsensusMessage::CertMsg(pc.clone()), 3);
        assert_eq!(core.locked_cert().map(|c| c.block_hash), Some(hash_a));
        assert_eq!(core.locked_cert().map(|c| c.phase), Some(Phase::PreCommit));

        // Advance to epoch 1 via a NewEpoch quorum (leader of 1 is member 1).
        for i in [0usize, 1, 3] {
            let r = core.on_message(committee.member(i).0, new_epoch_msg(i, 1), 4);
            if let Some(e) = r.schedule_epoch {
                let r2 = core.enter_epoch(e, 4);
                assert!(r2.set_timer.is_some());
            }
        }
        assert_eq!(core.epoch(), 1);

        // Conflicting block B without a justify: LOCK_CONFLICT.
        let mut block_b = block_a.clone();
        block_b.header.state_root.0[0] ^= 0xFF;
        block_b.header.epoch = 1;
        let r = core.on_message(
            committee.member(1).0,
            ConsensusMessage::Proposal { epoch: 1, block: block_b.clone(), justify: None },
            5,
        );
        assert!(matches!(r.rejects.as_slice(), [(DropReason::LockConflict, _)]));
        assert!(r.outbound.is_empty());

        // Conflicting block B with a justify for B from a NEWER epoch but
        // for a different block than the lock: allowed only because the
        // justify certifies B itself at a higher epoch than the lock.
        let justify_b = make_cert(&[0, 1, 3], block_b.hash(), Phase::Prepare, 1);
        let r = core.on_message(
            committee.member(1).0,
            ConsensusMessage::Proposal { epoch: 1, block: block_b.clone(), justify: Some(justify_b) },
            6,
        );
        assert_eq!(r.outbound.len(), 1, "unlock via newer same-block justify");

        // A justify with a stale epoch must not unlock. Fresh core replica
        // of the same state to retry the rejected path cleanly.
        let mut core2 = make_core(3, &committee, &state, 1000);
        core2.enter_epoch(0, 0);
        core2.on_message(
            committee.member(0).0,
            ConsensusMessage::Proposal { epoch: 0, block: block_a, justify: None },
            1,
        );
        core2.on_message(committee.member(0).0, ConsensusMessage::CertMsg(pc), 2);
        for i in [0usize, 1, 2] {
            if let Some(e) = core2
                .on_message(committee.member(i).0, new_epoch_msg(i, 1), 3)
                .schedule_epoch
            {
                core2.enter_epoch(e, 3);
            }
        }
        let stale_justify = make_cert(&[0, 1, 2], block_b.hash(), Phase::Prepare, 0);
        let r = core2.on_message(
            committee.member(1).0,
            ConsensusMessage::Proposal { epoch: 1, block: block_b, justify: Some(stale_justify) },
            4,
        );
        assert!(matches!(r.rejects.as_slice(), [(DropReason::LockConflict, _)]));

        // Re-proposing the locked block itself is always votable.
        let r = core2.on_message(
            committee.member(1).0,
            ConsensusMessage::Proposal {
                epoch: 1,
                block: {
                    let mut b = core2.ledger().chain().head().clone();
                    b.header.commit_certificate = None;
                    // head is genesis; rebuild A at height 1 as proposed
                    let _ = b;
                    Block {
                        header: BlockHeader {
                            parent_hash: core2.ledger().head_hash(),
                            height: 1,
                            epoch: 0,
                            proposer: committee.member(0).0,
                            tx_root: Block::compute_tx_root(&[]),
                            state_root: core2.ledger().chain().head().header.state_root,
                            commit_certificate: None,
                        },
                        transactions: Vec::new(),
                    }
                },
                justify: None,
            },
            5,
        );
        assert_eq!(r.outbound.len(), 1, "locked block re-proposal is votable");
    }

    #[test]
    fn silent_leader_recovers_via_new_epoch_quorum() {
        let mut net = Net::new(4, 100);
        net.live[0] = false; // epoch-0 leader is silent
        net.start_all();
        net.pump(50);
        assert_eq!(net.min_height(), 0, "no progress without the leader");

        // Pacemakers fire; the three live validators exchange NewEpoch and
        // enter epoch 1, whose leader is node 1.
        net.now = 100;
        for node in 1..4 {
            net.fire_timeout(node);
        }
        net.pump(300);
        assert!(net.min_height() >= 1, "pacemaker must restore progress");
        for node in 1..4 {
            assert!(net.cores[node].epoch() >= 1);
        }
        // Backoff: entering epoch 1 armed 2x the base timeout.
        assert!(
            net.entry_log.contains(&(2, 1, 100 + 200)),
            "epoch-1 entry must arm a doubled budget: {:?}",
            net.entry_log
        );
    }

    #[test]
    fn consecutive_timeouts_double_the_budget() {
        // Committee of 7: members 0 and 1 lead epochs 0 and 1; run only the
        // other five, so both epochs time out back to back.
        let mut net = Net::new(7, 100);
        net.live[0] = false;
        net.live[1] = false;
        net.start_all();
        net.pump(100);

        net.now = 100;
        for node in 2..7 {
            net.fire_timeout(node);
        }
        net.pump(200);
        for node in 2..7 {
            assert_eq!(net.cores[node].epoch(), 1);
        }
        // Second silent leader: timeout budget is now 200ms.
        assert!(net.entry_log.contains(&(3, 1, 100 + 200)), "{:?}", net.entry_log);

        net.now = 300;
        for node in 2..7 {
            net.fire_timeout(node);
        }
        net.pump(800);
        for node in 2..7 {
            assert!(net.cores[node].epoch() >= 2);
        }
        assert!(
            net.entry_log.contains(&(3, 2, 300 + 400)),
            "doubled again after second advance: {:?}",
            net.entry_log
        );

        // Leader of epoch 2 is live: the chain finally moves, and the next
        // entry resets the backoff to the base budget.
        net.pump(800);
        assert!(net.min_height() >= 1);
        let reset = net
            .entry_log
            .iter()
            .any(|(node, epoch, deadline)| *node == 3 && *epoch == 3 && deadline - 300 == 100);
        assert!(reset, "decision resets the backoff: {:?}", net.entry_log);
    }

    #[test]
    fn mempool_keeps_arrival_order_and_nonce_chains() {
        let (committee, state) = build_committee(2);
        let mut pool = Mempool::new(100);
        let client = Vault::provision([42u8; 32]);
        let mut client_state = state.clone();
        client_state.credit_account(client.node_public_key(), 50);

        let mk = |nonce: u64, amount: u64| {
            let kind = TxKind::Transfer { to: committee.member(0).0, amount };
            let payload = Transaction::signing_payload(&client.address(), nonce, &kind);
            Transaction {
                sender: client.address(),
                nonce,
                kind,
                signature: client.sign(VaultKey::Node, &payload),
            }
        };
        // Out-of-order arrival: nonce 2 first stays queued, not selected.
        pool.push(mk(2, 1), &client_state).unwrap();
        pool.push(mk(1, 2), &client_state).unwrap();
        let selected = pool.select(&client_state, 10);
        assert_eq!(selected.len(), 2);
        assert_eq!(selected[0].nonce, 1, "nonce chain starts at expected");
        assert_eq!(selected[1].nonce, 2);

        // Duplicate push is a no-op; bad signature is rejected.
        assert!(pool.push(mk(1, 2), &client_state).is_ok());
        assert_eq!(pool.len(), 2);
        let mut bad = mk(3, 1);
        bad.signature.0[5] ^= 0xAA;
        assert_eq!(pool.push(bad, &client_state), Err(DropReason::BadSig));
    }

    use crate::types::TxKind;
    use crate::codec::{Decode, Encode};

    #[test]
    fn consensus_messages_roundtrip_canonically() {
        let (committee, _state) = build_committee(3);
        let hash = Hash32([7u8; 32]);
        let cert = make_cert(&[0, 1, 2], hash, Phase::PreCommit, 4);
        let msgs = vec![
            ConsensusMessage::VoteMsg(sign_vote(1, hash, Phase::Commit, 9)),
            ConsensusMessage::CertMsg(cert.clone()),
            ConsensusMessage::NewEpoch {
                epoch: 12,
                highest_cert: Some(cert),
                sender: committee.member(1).0,
                signature: Signature([3u8; 64]),
            },
            ConsensusMessage::BlockRequest { block_hash: hash },
        ];
        for msg in msgs {
            let bytes = msg.encode();
            assert_eq!(ConsensusMessage::decode(&bytes).unwrap(), msg);
        }
    }
}
