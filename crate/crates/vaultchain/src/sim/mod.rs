//! Deterministic discrete-event network simulator.
//!
//! All validators, clients, links, timers, and Byzantine behaviors live in
//! one single-threaded event loop driven by simulated time. Events process
//! in `(deliver_at, sequence)` order, every random draw comes from a
//! structurally keyed ChaCha substream of the run seed, and node state
//! machines are invoked one event at a time, so identical inputs produce
//! bit-identical traces on every platform.

pub mod byzantine;
pub mod checks;
pub mod trace;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::consensus::{
    ConsensusConfig, ConsensusCore, ConsensusMessage, DecidedEntry, Destination, DropReason,
    StepResult,
};
use crate::crypto::{self, sha256};
use crate::ledger::{Ledger, WorldState};
use crate::membership::{select_committee, StakeLedger, ValidatorSet};
use crate::types::{Address, AttestationReport, Hash32, Transaction, TxKind};
use crate::vault::{Vault, VaultKey};

pub use byzantine::ByzantineStrategy;
pub use checks::{check_liveness, check_safety, LivenessVerdict, SafetyVerdict};
pub use trace::{NodeId, RecordKind, TraceLog, TraceRecord};

use byzantine::{EquivocatorNode, JunkNode};

/// Per-link delay and loss model. Delays are `base + uniform(0..=jitter)`
/// milliseconds drawn from a per-link substream of the run seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkModel {
    pub base_delay_ms: u64,
    pub jitter_ms: u64,
    pub drop_probability: f64,
}

impl Default for LinkModel {
    fn default() -> Self {
        LinkModel {
            base_delay_ms: 5,
            jitter_ms: 2,
            drop_probability: 0.0,
        }
    }
}

/// What travels on the wire.
#[derive(Clone, Debug)]
pub enum Payload {
    Consensus(ConsensusMessage),
    Tx(Transaction),
}

impl Payload {
    pub fn class(&self) -> &'static str {
        match self {
            Payload::Consensus(m) => m.kind(),
            Payload::Tx(_) => "tx",
        }
    }

    fn hash(&self) -> Hash32 {
        match self {
            Payload::Consensus(m) => crypto::hash_of(m),
            Payload::Tx(t) => t.hash(),
        }
    }
}

enum EventKind {
    Net { payload: Payload, hash: Hash32 },
    Pacemaker { generation: u64 },
    EpochEntry { epoch: u64 },
    SubmitTx { tx: Transaction },
}

struct SimEvent {
    at: u64,
    src: NodeId,
    dst: NodeId,
    kind: EventKind,
}

struct HeapEntry {
    key: Reverse<(u64, u64)>,
    event: SimEvent,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

/// A message send resolved to concrete destinations.
pub(crate) struct SendSpec {
    pub targets: Vec<NodeId>,
    pub payload: Payload,
}

/// Everything one node step asks the simulator to do.
#[derive(Default)]
pub(crate) struct Effects {
    pub sends: Vec<SendSpec>,
    pub rejects: Vec<(DropReason, Hash32)>,
    pub decided: Vec<DecidedEntry>,
    pub packaged: Vec<(Hash32, Vec<Hash32>)>,
    pub set_timer: Option<u64>,
    pub schedule_epoch: Option<u64>,
    pub entered: Option<(u64, u64)>,
    pub timeout_fired: bool,
}

pub(crate) struct Routing {
    pub validators: Vec<NodeId>,
    pub addresses: Vec<Address>,
    pub addr_to_node: HashMap<Address, NodeId>,
}

impl Routing {
    pub fn address_of(&self, id: NodeId) -> Address {
        self.addresses[id]
    }

    pub fn node_of(&self, addr: &Address) -> Option<NodeId> {
        self.addr_to_node.get(addr).copied()
    }
}

/// An honest validator: the consensus core plus pacemaker-generation
/// bookkeeping.
pub(crate) struct HonestNode {
    pub id: NodeId,
    pub core: ConsensusCore,
    pub timer_gen: u64,
}

impl HonestNode {
    pub(crate) fn to_effects(&mut self, result: StepResult, routing: &Routing) -> Effects {
        let mut effects = Effects {
            rejects: result.rejects,
            decided: result.decided,
            packaged: result.packaged.into_iter().collect(),
            schedule_epoch: result.schedule_epoch,
            ..Default::default()
        };
        if let Some(deadline) = result.set_timer {
            self.timer_gen += 1;
            effects.set_timer = Some(deadline);
        }
        for out in result.outbound {
            let targets: Vec<NodeId> = match out.to {
                Destination::Broadcast => routing
                    .validators
                    .iter()
                    .copied()
                    .filter(|id| *id != self.id)
                    .collect(),
                Destination::To(addr) => match routing.node_of(&addr) {
                    Some(id) if id != self.id => vec![id],
                    _ => continue,
                },
            };
            if targets.is_empty() {
                continue;
            }
            effects.sends.push(SendSpec {
                targets,
                payload: Payload::Consensus(out.message),
            });
        }
        effects
    }
}

enum Slot {
    Honest(Box<HonestNode>),
    /// Designated-faulty wrapper that never sends votes.
    Withhold(Box<HonestNode>),
    /// Designated-faulty wrapper whose sends are all delayed by the extra.
    Delayed(Box<HonestNode>),
    /// Absorbs everything, sends nothing.
    Mute,
    Junk(Box<JunkNode>),
    Equivocator(Box<EquivocatorNode>),
    Client,
    Vacant,
}

struct ClientState {
    vault: Vault,
    next_nonce: u64,
}

/// Per-transaction delay bookkeeping: submit, first packaging, and first
/// honest decision.
#[derive(Default)]
pub struct DelayBook {
    submit: HashMap<Hash32, u64>,
    packaged: HashMap<Hash32, (u64, Vec<Hash32>)>,
    decided: Vec<(Hash32, u64)>,
    decided_set: HashSet<Hash32>,
}

/// Timestamps for one confirmed transaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxTimes {
    pub tx: Hash32,
    pub submit_ms: u64,
    pub package_ms: u64,
    pub decide_ms: u64,
}

impl DelayBook {
    fn submit(&mut self, tx: Hash32, now: u64) {
        self.submit.entry(tx).or_insert(now);
    }

    fn package(&mut self, block: Hash32, txs: Vec<Hash32>, now: u64) {
        self.packaged.entry(block).or_insert((now, txs));
    }

    fn decide(&mut self, block: Hash32, now: u64) {
        if self.decided_set.insert(block) {
            self.decided.push((block, now));
        }
    }

    /// Confirmed client transactions in decision order, each carrying
    /// `submit <= package <= decide` timestamps.
    pub fn confirmed(&self) -> Vec<TxTimes> {
        let mut out = Vec::new();
        for (block, decide_ms) in &self.decided {
            let Some((package_ms, txs)) = self.packaged.get(block) else {
                continue;
            };
            for tx in txs {
                let Some(submit_ms) = self.submit.get(tx) else {
                    continue;
                };
                out.push(TxTimes {
                    tx: *tx,
                    submit_ms: *submit_ms,
                    package_ms: *package_ms,
                    decide_ms: *decide_ms,
                });
            }
        }
        out
    }

    pub fn submitted_count(&self) -> usize {
        self.submit.len()
    }
}

/// Static simulation parameters.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub validators: usize,
    pub clients: usize,
    pub link: LinkModel,
    pub byzantine: Vec<(NodeId, ByzantineStrategy)>,
    pub base_timeout_ms: u64,
    pub max_block_txs: usize,
    pub genesis_balance: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(validators: usize, clients: usize, seed: u64) -> Self {
        SimConfig {
            validators,
            clients,
            link: LinkModel::default(),
            byzantine: Vec::new(),
            base_timeout_ms: 250,
            max_block_txs: 2000,
            genesis_balance: 1_000_000_000,
            seed,
        }
    }
}

fn substream(seed: u64, tag: &[u8], a: u64, b: u64) -> [u8; 32] {
    let mut input = Vec::with_capacity(16 + tag.len() + 16);
    input.extend_from_slice(&seed.to_be_bytes());
    input.extend_from_slice(tag);
    input.extend_from_slice(&a.to_be_bytes());
    input.extend_from_slice(&b.to_be_bytes());
    sha256(&input).0
}

pub struct Simulation {
    cfg: SimConfig,
    now: u64,
    seq: u64,
    queue: BinaryHeap<HeapEntry>,
    slots: Vec<Slot>,
    routing: Routing,
    committee: ValidatorSet,
    genesis_state: WorldState,
    link_streams: HashMap<(NodeId, NodeId), ChaCha20Rng>,
    extra_delay: Vec<u64>,
    honest: Vec<NodeId>,
    clients: HashMap<NodeId, ClientState>,
    trace: TraceLog,
    delays: DelayBook,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Self {
        assert!(cfg.validators >= 1, "need at least one validator");
        let total = cfg.validators + cfg.clients;

        let vault_for = |id: usize| Vault::provision(substream(cfg.seed, b"device", id as u64, 0));

        // Distinct descending stakes make the committee order equal the
        // node-id order.
        let mut stake_ledger = StakeLedger::new();
        let mut state = WorldState::new();
        let mut addresses = Vec::with_capacity(total);
        for id in 0..total {
            let vault = vault_for(id);
            let pk = vault.node_public_key();
            let stake = if id < cfg.validators {
                1_000_000 - id as u64
            } else {
                0
            };
            stake_ledger.register(pk, stake);
            state.credit_account(pk, cfg.genesis_balance);
            addresses.push(vault.address());
        }
        let committee =
            select_committee(&stake_ledger, cfg.validators).expect("stakes seeded above");
        for (i, (addr, _)) in committee.members().iter().enumerate() {
            assert_eq!(*addr, addresses[i], "committee order follows node ids");
        }

        let addr_to_node: HashMap<Address, NodeId> = addresses
            .iter()
            .enumerate()
            .map(|(id, addr)| (*addr, id))
            .collect();
        let routing = Routing {
            validators: (0..cfg.validators).collect(),
            addresses: addresses.clone(),
            addr_to_node,
        };

        let strategy_of = |id: NodeId| {
            cfg.byzantine
                .iter()
                .find(|(n, _)| *n == id)
                .map(|(_, s)| *s)
        };
        let fellows: Vec<NodeId> = cfg.byzantine.iter().map(|(n, _)| *n).collect();

        let mut slots = Vec::with_capacity(total);
        let mut extra_delay = vec![0u64; total];
        let mut honest = Vec::new();
        for id in 0..cfg.validators {
            let consensus_config = ConsensusConfig::new(
                committee.clone(),
                cfg.base_timeout_ms,
                cfg.max_block_txs,
            );
            let make_honest = |id: NodeId| HonestNode {
                id,
                core: ConsensusCore::new(
                    consensus_config.clone(),
                    vault_for(id),
                    Ledger::genesis(state.clone()),
                ),
                timer_gen: 0,
            };
            match strategy_of(id) {
                None => {
                    honest.push(id);
                    slots.push(Slot::Honest(Box::new(make_honest(id))));
                }
                Some(ByzantineStrategy::Silent) => slots.push(Slot::Mute),
                Some(ByzantineStrategy::WithholdVotes) => {
                    slots.push(Slot::Withhold(Box::new(make_honest(id))))
                }
                Some(ByzantineStrategy::DelayAll(extra)) => {
                    extra_delay[id] = extra;
                    slots.push(Slot::Delayed(Box::new(make_honest(id))));
                }
                Some(ByzantineStrategy::RandomJunk) => slots.push(Slot::Junk(Box::new(
                    JunkNode::new(
                        id,
                        addresses[id],
                        vault_for(id),
                        substream(cfg.seed, b"junk", id as u64, 0),
                    ),
                ))),
                Some(ByzantineStrategy::Equivocate) => {
                    slots.push(Slot::Equivocator(Box::new(EquivocatorNode::new(
                        make_honest(id),
                        vault_for(id),
                        substream(cfg.seed, b"equiv", id as u64, 0),
                        fellows.clone(),
                    ))))
                }
            }
        }
        let mut clients = HashMap::new();
        for id in cfg.validators..total {
            slots.push(Slot::Client);
            clients.insert(
                id,
                ClientState {
                    vault: vault_for(id),
                    next_nonce: 1,
                },
            );
        }

        let mut sim = Simulation {
            cfg,
            now: 0,
            seq: 0,
            queue: BinaryHeap::new(),
            slots,
            routing,
            committee,
            genesis_state: state,
            link_streams: HashMap::new(),
            extra_delay,
            honest,
            clients,
            trace: TraceLog::default(),
            delays: DelayBook::default(),
        };
        for id in 0..sim.cfg.validators {
            if sim.has_core(id) {
                sim.push_event(0, id, id, EventKind::EpochEntry { epoch: 0 });
            }
        }
        sim
    }

    fn has_core(&self, id: NodeId) -> bool {
        matches!(
            self.slots[id],
            Slot::Honest(_) | Slot::Withhold(_) | Slot::Delayed(_) | Slot::Equivocator(_)
        )
    }

    pub fn committee(&self) -> &ValidatorSet {
        &self.committee
    }

    pub fn genesis_state(&self) -> &WorldState {
        &self.genesis_state
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn trace(&self) -> &TraceLog {
        &self.trace
    }

    pub fn take_trace(&mut self) -> TraceLog {
        std::mem::take(&mut self.trace)
    }

    pub fn delays(&self) -> &DelayBook {
        &self.delays
    }

    pub fn honest_validators(&self) -> &[NodeId] {
        &self.honest
    }

    pub fn address_of(&self, id: NodeId) -> Address {
        self.routing.address_of(id)
    }

    pub fn validator_ledger(&self, id: NodeId) -> Option<&Ledger> {
        match &self.slots[id] {
            Slot::Honest(n) | Slot::Withhold(n) | Slot::Delayed(n) => Some(n.core.ledger()),
            Slot::Equivocator(e) => Some(e.ledger()),
            _ => None,
        }
    }

    /// Smallest decided height among honest validators.
    pub fn min_honest_height(&self) -> u64 {
        self.honest
            .iter()
            .filter_map(|id| self.validator_ledger(*id).map(|l| l.height()))
            .min()
            .unwrap_or(0)
    }

    /// Builds a signed transfer from a client, assigning the next nonce.
    pub fn build_transfer(&mut self, client: NodeId, to: Address, amount: u64) -> Transaction {
        let state = self.clients.get_mut(&client).expect("not a client node");
        let sender = state.vault.address();
        let nonce = state.next_nonce;
        state.next_nonce += 1;
        let kind = TxKind::Transfer { to, amount };
        let payload = Transaction::signing_payload(&sender, nonce, &kind);
        Transaction {
            sender,
            nonce,
            kind,
            signature: state.vault.sign(VaultKey::Node, &payload),
        }
    }

    /// Attests `code` inside the client's vault.
    pub fn client_attest(&mut self, client: NodeId, code: &[u8]) -> AttestationReport {
        let state = self.clients.get_mut(&client).expect("not a client node");
        state.vault.attest_code(code)
    }

    /// Builds a signed report-publication transaction from a client.
    pub fn build_publish(&mut self, client: NodeId, report: AttestationReport) -> Transaction {
        let state = self.clients.get_mut(&client).expect("not a client node");
        let sender = state.vault.address();
        let nonce = state.next_nonce;
        state.next_nonce += 1;
        let kind = TxKind::PublishReport(report);
        let payload = Transaction::signing_payload(&sender, nonce, &kind);
        Transaction {
            sender,
            nonce,
            kind,
            signature: state.vault.sign(VaultKey::Node, &payload),
        }
    }

    /// Schedules a client to submit `tx` at `at_ms`.
    pub fn schedule_transaction(&mut self, client: NodeId, at_ms: u64, tx: Transaction) {
        self.push_event(at_ms, client, client, EventKind::SubmitTx { tx });
    }

    fn push_event(&mut self, at: u64, src: NodeId, dst: NodeId, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(HeapEntry {
            key: Reverse((at, seq)),
            event: SimEvent { at, src, dst, kind },
        });
    }

    fn link_stream(&mut self, src: NodeId, dst: NodeId) -> &mut ChaCha20Rng {
        let seed = self.cfg.seed;
        self.link_streams
            .entry((src, dst))
            .or_insert_with(|| {
                ChaCha20Rng::from_seed(substream(seed, b"link", src as u64, dst as u64))
            })
    }

    pub(crate) fn send_to_many(&mut self, src: NodeId, targets: &[NodeId], payload: Payload) {
        let hash = payload.hash();
        let class = payload.class();
        let base = self.cfg.link.base_delay_ms;
        let jitter_cfg = self.cfg.link.jitter_ms;
        let drop_p = self.cfg.link.drop_probability;
        let extra = self.extra_delay[src];
        for &dst in targets {
            if dst == src {
                continue;
            }
            self.trace.push(TraceRecord {
                time_ms: self.now,
                kind: RecordKind::Send { class },
                src: Some(src),
                dst: Some(dst),
                payload: hash,
            });
            let (dropped, jitter) = {
                let stream = self.link_stream(src, dst);
                let dropped = drop_p > 0.0 && stream.gen::<f64>() < drop_p;
                let jitter = if dropped || jitter_cfg == 0 {
                    0
                } else {
                    stream.gen_range(0..=jitter_cfg)
                };
                (dropped, jitter)
            };
            if dropped {
                self.trace.push(TraceRecord {
                    time_ms: self.now,
                    kind: RecordKind::LinkDrop { class },
                    src: Some(src),
                    dst: Some(dst),
                    payload: hash,
                });
                continue;
            }
            let at = self.now + base + jitter + extra;
            self.push_event(
                at,
                src,
                dst,
                EventKind::Net {
                    payload: payload.clone(),
                    hash,
                },
            );
        }
    }

    /// Processes events up to and including `until_ms` of simulated time.
    /// Later events stay queued, so runs can be extended incrementally.
    pub fn run(&mut self, until_ms: u64) {
        while let Some(entry) = self.queue.peek() {
            if entry.key.0 .0 > until_ms {
                break;
            }
            let entry = self.queue.pop().expect("peeked");
            let event = entry.event;
            self.now = event.at;
            self.dispatch(event);
        }
        self.now = self.now.max(until_ms);
    }

    fn dispatch(&mut self, event: SimEvent) {
        let SimEvent { src, dst, kind, .. } = event;
        match kind {
            EventKind::SubmitTx { tx } => {
                let hash = tx.hash();
                self.trace.push(TraceRecord {
                    time_ms: self.now,
                    kind: RecordKind::TxSubmit,
                    src: Some(dst),
                    dst: None,
                    payload: hash,
                });
                self.delays.submit(hash, self.now);
                let validators = self.routing.validators.clone();
                self.send_to_many(dst, &validators, Payload::Tx(tx));
            }
            EventKind::Net { payload, hash } => {
                self.trace.push(TraceRecord {
                    time_ms: self.now,
                    kind: RecordKind::Deliver {
                        class: payload.class(),
                    },
                    src: Some(src),
                    dst: Some(dst),
                    payload: hash,
                });
                self.step_node(dst, src, NodeInput::Net(payload));
            }
            EventKind::Pacemaker { generation } => {
                self.step_node(dst, src, NodeInput::Pacemaker { generation });
            }
            EventKind::EpochEntry { epoch } => {
                self.step_node(dst, src, NodeInput::EpochEntry { epoch });
            }
        }
    }

    fn step_node(&mut self, id: NodeId, src: NodeId, input: NodeInput) {
        let withholds_votes = matches!(self.slots[id], Slot::Withhold(_));
        let mut slot = std::mem::replace(&mut self.slots[id], Slot::Vacant);
        let effects = match &mut slot {
            Slot::Honest(node) | Slot::Withhold(node) | Slot::Delayed(node) => {
                let src_addr = self.routing.address_of(src);
                let mut effects = step_core(node, src_addr, input, self.now, &self.routing);
                if withholds_votes {
                    effects.sends.retain(|s| {
                        !matches!(
                            s.payload,
                            Payload::Consensus(ConsensusMessage::VoteMsg(_))
                        )
                    });
                }
                Some(effects)
            }
            Slot::Equivocator(node) => Some(node.handle(src, input, self.now, &self.routing)),
            Slot::Junk(node) => match input {
                NodeInput::Net(_) => Some(node.emit(&self.routing)),
                _ => None,
            },
            Slot::Mute | Slot::Client | Slot::Vacant => None,
        };
        self.slots[id] = slot;

        if let Some(effects) = effects {
            self.apply_effects(id, effects);
        }
    }

    fn apply_effects(&mut self, id: NodeId, effects: Effects) {
        if effects.timeout_fired {
            self.trace.push(TraceRecord {
                time_ms: self.now,
                kind: RecordKind::TimeoutFired,
                src: Some(id),
                dst: None,
                payload: Hash32::ZERO,
            });
        }
        if let Some((epoch, timeout_ms)) = effects.entered {
            self.trace.push(TraceRecord {
                time_ms: self.now,
                kind: RecordKind::EpochEnter { epoch, timeout_ms },
                src: Some(id),
                dst: None,
                payload: Hash32::ZERO,
            });
        }
        for (reason, payload) in effects.rejects {
            self.trace.push(TraceRecord {
                time_ms: self.now,
                kind: RecordKind::Reject {
                    reason: reason.code(),
                },
                src: Some(id),
                dst: None,
                payload,
            });
        }
        for (block, txs) in effects.packaged {
            for tx in &txs {
                self.trace.push(TraceRecord {
                    time_ms: self.now,
                    kind: RecordKind::TxPackage { block },
                    src: Some(id),
                    dst: None,
                    payload: *tx,
                });
            }
            self.delays.package(block, txs, self.now);
        }
        for entry in effects.decided {
            self.trace.push(TraceRecord {
                time_ms: self.now,
                kind: RecordKind::Decide {
                    height: entry.height,
                    epoch: entry.epoch,
                },
                src: Some(id),
                dst: None,
                payload: entry.block_hash,
            });
            if self.honest.contains(&id) {
                self.delays.decide(entry.block_hash, self.now);
            }
        }
        for send in effects.sends {
            self.send_to_many(id, &send.targets, send.payload);
        }
        if let Some(deadline) = effects.set_timer {
            let generation = match &self.slots[id] {
                Slot::Honest(n) | Slot::Withhold(n) | Slot::Delayed(n) => n.timer_gen,
                Slot::Equivocator(e) => e.timer_gen(),
                _ => 0,
            };
            self.push_event(deadline, id, id, EventKind::Pacemaker { generation });
        }
        if let Some(epoch) = effects.schedule_epoch {
            self.push_event(self.now, id, id, EventKind::EpochEntry { epoch });
        }
    }
}

pub(crate) enum NodeInput {
    Net(Payload),
    Pacemaker { generation: u64 },
    EpochEntry { epoch: u64 },
}

/// Drives one honest core with one input and translates the result.
pub(crate) fn step_core(
    node: &mut HonestNode,
    src_addr: Address,
    input: NodeInput,
    now: u64,
    routing: &Routing,
) -> Effects {
    match input {
        NodeInput::Net(Payload::Consensus(msg)) => {
            let result = node.core.on_message(src_addr, msg, now);
            node.to_effects(result, routing)
        }
        NodeInput::Net(Payload::Tx(tx)) => {
            let result = node.core.on_transaction(tx, now);
            node.to_effects(result, routing)
        }
        NodeInput::Pacemaker { generation } => {
            if generation != node.timer_gen {
                return Effects::default();
            }
            let result = node.core.on_timeout(now);
            let mut effects = node.to_effects(result, routing);
            effects.timeout_fired = true;
            effects
        }
        NodeInput::EpochEntry { epoch } => {
            let result = node.core.enter_epoch(epoch, now);
            let deadline = result.set_timer;
            let mut effects = node.to_effects(result, routing);
            if let Some(deadline) = deadline {
                effects.entered = Some((epoch, deadline.saturating_sub(now)));
            }
            effects
        }
    }
}

/// One-call runner matching the simulator's core contract: validators plus
/// designated Byzantine strategies under a link model, driven until
/// `until_ms`, returning the full trace.
pub fn run(
    validators: usize,
    link: LinkModel,
    strategies: &[(NodeId, ByzantineStrategy)],
    seed: u64,
    until_ms: u64,
) -> (TraceLog, Vec<NodeId>) {
    let mut cfg = SimConfig::new(validators, 0, seed);
    cfg.link = link;
    cfg.byzantine = strategies.to_vec();
    let mut sim = Simulation::new(cfg);
    sim.run(until_ms);
    let honest = sim.honest_validators().to_vec();
    (sim.trace, honest)
}
