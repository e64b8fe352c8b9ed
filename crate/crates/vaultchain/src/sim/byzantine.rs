//! Byzantine behavior models applied to designated faulty validators.
//!
//! `Silent`, `WithholdVotes`, and `DelayAll` are send-side filters over an
//! honest core and are implemented in the simulator's dispatch path. The two
//! active adversaries live here: `RandomJunk` floods structurally plausible
//! garbage, and `Equivocate` runs a colluding dual-track leader that
//! proposes conflicting blocks to disjoint halves of the committee,
//! double-votes as a follower, and delivers certificates selectively. With
//! at most `f` equivocators the protocol absorbs this; at `f + 1` it is the
//! canonical safety-violation construction.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{step_core, Effects, HonestNode, NodeId, NodeInput, Payload, Routing, SendSpec};
use crate::consensus::ConsensusMessage;
use crate::ledger::Ledger;
use crate::types::{
    Address, Block, BlockHeader, Hash32, Phase, QuorumCertificate, Signature, Vote,
};
use crate::vault::{Vault, VaultKey};

/// Fault injection menu. `DelayAll` carries the extra delay in milliseconds
/// applied to every send of the faulty node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ByzantineStrategy {
    Silent,
    Equivocate,
    WithholdVotes,
    DelayAll(u64),
    RandomJunk,
}

impl ByzantineStrategy {
    pub const DEFAULT_EXTRA_DELAY_MS: u64 = 300;

    pub fn name(&self) -> &'static str {
        match self {
            ByzantineStrategy::Silent => "silent",
            ByzantineStrategy::Equivocate => "equivocate",
            ByzantineStrategy::WithholdVotes => "withhold-votes",
            ByzantineStrategy::DelayAll(_) => "delay-all",
            ByzantineStrategy::RandomJunk => "random-junk",
        }
    }

    pub const ALL_NAMES: [&'static str; 5] = [
        "silent",
        "equivocate",
        "withhold-votes",
        "delay-all",
        "random-junk",
    ];
}

impl std::fmt::Display for ByzantineStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ByzantineStrategy::DelayAll(ms) => write!(f, "delay-all:{ms}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ByzantineStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "silent" => Ok(ByzantineStrategy::Silent),
            "equivocate" => Ok(ByzantineStrategy::Equivocate),
            "withhold-votes" => Ok(ByzantineStrategy::WithholdVotes),
            "random-junk" => Ok(ByzantineStrategy::RandomJunk),
            "delay-all" => Ok(ByzantineStrategy::DelayAll(Self::DEFAULT_EXTRA_DELAY_MS)),
            other => {
                if let Some(ms) = other.strip_prefix("delay-all:") {
                    let ms: u64 = ms
                        .parse()
                        .map_err(|_| format!("bad delay in strategy `{other}`"))?;
                    return Ok(ByzantineStrategy::DelayAll(ms));
                }
                Err(format!(
                    "unknown strategy `{other}` (expected one of: silent, equivocate, \
                     withhold-votes, delay-all[:ms], random-junk)"
                ))
            }
        }
    }
}

/// Emits structurally plausible garbage at every stimulus: votes with bad
/// signatures, undersized certificates, misdirected proposals, and random
/// epoch changes. Honest nodes must shed all of it via reason-coded drops.
pub(crate) struct JunkNode {
    id: NodeId,
    address: Address,
    vault: Vault,
    rng: ChaCha20Rng,
}

impl JunkNode {
    pub fn new(id: NodeId, address: Address, vault: Vault, seed: [u8; 32]) -> Self {
        JunkNode {
            id,
            address,
            vault,
            rng: ChaCha20Rng::from_seed(seed),
        }
    }

    fn random_hash(&mut self) -> Hash32 {
        let mut h = [0u8; 32];
        self.rng.fill_bytes(&mut h);
        Hash32(h)
    }

    fn random_signature(&mut self) -> Signature {
        let mut s = [0u8; 64];
        self.rng.fill_bytes(&mut s);
        Signature(s)
    }

    fn random_phase(&mut self) -> Phase {
        match self.rng.gen_range(0..3u8) {
            0 => Phase::Prepare,
            1 => Phase::PreCommit,
            _ => Phase::Commit,
        }
    }

    pub fn emit(&mut self, routing: &Routing) -> Effects {
        let mut effects = Effects::default();
        let count = self.rng.gen_range(1..=2);
        for _ in 0..count {
            let msg = match self.rng.gen_range(0..6u8) {
                0 => {
                    // Forged signature.
                    ConsensusMessage::VoteMsg(Vote {
                        voter: self.address,
                        block_hash: self.random_hash(),
                        phase: self.random_phase(),
                        epoch: self.rng.gen_range(0..64),
                        signature: self.random_signature(),
                    })
                }
                1 => {
                    // Validly signed vote for a block nobody proposed.
                    let block_hash = self.random_hash();
                    let phase = self.random_phase();
                    let epoch = self.rng.gen_range(0..64);
                    let payload = Vote::signing_payload(&block_hash, phase, epoch);
                    ConsensusMessage::VoteMsg(Vote {
                        voter: self.address,
                        block_hash,
                        phase,
                        epoch,
                        signature: self.vault.sign(VaultKey::Node, &payload),
                    })
                }
                2 => ConsensusMessage::CertMsg(QuorumCertificate {
                    block_hash: self.random_hash(),
                    phase: self.random_phase(),
                    epoch: self.rng.gen_range(0..64),
                    voters: vec![(self.address, self.random_signature())],
                }),
                3 => ConsensusMessage::NewEpoch {
                    epoch: self.rng.gen_range(0..64),
                    highest_cert: None,
                    sender: self.address,
                    signature: self.random_signature(),
                },
                4 => {
                    let txs = Vec::new();
                    ConsensusMessage::Proposal {
                        epoch: self.rng.gen_range(0..64),
                        block: Block {
                            header: BlockHeader {
                                parent_hash: self.random_hash(),
                                height: self.rng.gen_range(0..4),
                                epoch: self.rng.gen_range(0..64),
                                proposer: self.address,
                                tx_root: Block::compute_tx_root(&txs),
                                state_root: self.random_hash(),
                                commit_certificate: None,
                            },
                            transactions: txs,
                        },
                        justify: None,
                    }
                }
                _ => ConsensusMessage::BlockRequest {
                    block_hash: self.random_hash(),
                },
            };
            let candidates: Vec<NodeId> = routing
                .validators
                .iter()
                .copied()
                .filter(|id| *id != self.id)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let target = candidates[self.rng.gen_range(0..candidates.len())];
            effects.sends.push(SendSpec {
                targets: vec![target],
                payload: Payload::Consensus(msg),
            });
        }
        effects
    }
}

struct LeadState {
    epoch: u64,
    track_a: Hash32,
    half_a: Vec<NodeId>,
    half_b: Vec<NodeId>,
    votes: HashMap<(Hash32, Phase), BTreeMap<Address, Signature>>,
    emitted: HashSet<(Hash32, Phase)>,
}

/// Colluding equivocator. Runs an honest core to stay in sync with epochs
/// and its own ledger, but when leading it splits the committee into halves
/// and drives two conflicting blocks through parallel vote tracks, and when
/// following it votes for everything it sees.
pub(crate) struct EquivocatorNode {
    node: HonestNode,
    vault: Vault,
    _rng: ChaCha20Rng,
    fellows: Vec<NodeId>,
    lead: Option<LeadState>,
    bonus_voted: HashSet<(u64, Hash32, Phase)>,
}

impl EquivocatorNode {
    pub fn new(node: HonestNode, vault: Vault, seed: [u8; 32], fellows: Vec<NodeId>) -> Self {
        EquivocatorNode {
            node,
            vault,
            _rng: ChaCha20Rng::from_seed(seed),
            fellows,
            lead: None,
            bonus_voted: HashSet::new(),
        }
    }

    pub fn timer_gen(&self) -> u64 {
        self.node.timer_gen
    }

    pub fn ledger(&self) -> &Ledger {
        self.node.core.ledger()
    }

    fn me(&self) -> Address {
        self.node.core.address()
    }

    pub fn handle(
        &mut self,
        src: NodeId,
        input: NodeInput,
        now: u64,
        routing: &Routing,
    ) -> Effects {
        // The dual tracks keep collecting for their epoch even after the
        // internal core decided track A and moved on; a straggling track-B
        // quorum is exactly the attack.
        let mut effects = match input {
            NodeInput::Net(Payload::Consensus(ConsensusMessage::VoteMsg(vote)))
                if self
                    .lead
                    .as_ref()
                    .map(|l| l.epoch == vote.epoch)
                    .unwrap_or(false) =>
            {
                self.collect_dual(vote, now, routing)
            }
            NodeInput::Net(Payload::Consensus(msg)) => {
                let mut effects = self.bonus_votes(&msg, routing);
                let src_addr = routing.address_of(src);
                let core_effects = step_core(
                    &mut self.node,
                    src_addr,
                    NodeInput::Net(Payload::Consensus(msg)),
                    now,
                    routing,
                );
                merge_effects(&mut effects, core_effects);
                effects
            }
            other => step_core(&mut self.node, routing.address_of(src), other, now, routing),
        };
        self.intercept_proposals(&mut effects, routing);
        effects
    }

    /// Follower-side equivocation: sign a vote for every distinct proposal
    /// and echo a next-phase vote for every certificate, regardless of what
    /// the honest core would do.
    fn bonus_votes(&mut self, msg: &ConsensusMessage, routing: &Routing) -> Effects {
        let mut effects = Effects::default();
        let (block_hash, phase, epoch) = match msg {
            ConsensusMessage::Proposal { epoch, block, .. } => {
                (block.hash(), Phase::Prepare, *epoch)
            }
            ConsensusMessage::CertMsg(cert) => match cert.phase.next() {
                Some(next) => (cert.block_hash, next, cert.epoch),
                None => return effects,
            },
            _ => return effects,
        };
        let leader = self.node.core.config().leader(epoch);
        if leader == self.me() {
            return effects;
        }
        if !self.bonus_voted.insert((epoch, block_hash, phase)) {
            return effects;
        }
        if self.bonus_voted.len() > 1024 {
            self.bonus_voted.clear();
        }
        let payload = Vote::signing_payload(&block_hash, phase, epoch);
        let vote = Vote {
            voter: self.me(),
            block_hash,
            phase,
            epoch,
            signature: self.vault.sign(VaultKey::Node, &payload),
        };
        if let Some(target) = routing.node_of(&leader) {
            effects.sends.push(SendSpec {
                targets: vec![target],
                payload: Payload::Consensus(ConsensusMessage::VoteMsg(vote)),
            });
        }
        effects
    }

    /// Replaces the core's proposal broadcast with two conflicting proposals
    /// sent to disjoint halves (fellow faulty nodes see both), and opens the
    /// dual vote-aggregation tracks.
    fn intercept_proposals(&mut self, effects: &mut Effects, routing: &Routing) {
        let mut intercepted: Option<(u64, Block, Option<QuorumCertificate>)> = None;
        effects.sends.retain(|send| match &send.payload {
            Payload::Consensus(ConsensusMessage::Proposal {
                epoch,
                block,
                justify,
            }) => {
                intercepted = Some((*epoch, block.clone(), justify.clone()));
                false
            }
            _ => true,
        });
        let Some((epoch, block_a, justify)) = intercepted else {
            return;
        };

        let mut block_b = block_a.clone();
        block_b.header.state_root.0[0] ^= 0x01;
        let hash_a = block_a.hash();
        let hash_b = block_b.hash();

        let me = self.node.id;
        let others: Vec<NodeId> = routing
            .validators
            .iter()
            .copied()
            .filter(|id| *id != me && !self.fellows.contains(id))
            .collect();
        let split = others.len().div_ceil(2);
        let half_a: Vec<NodeId> = others[..split].to_vec();
        let half_b: Vec<NodeId> = others[split..].to_vec();
        let fellow_targets: Vec<NodeId> =
            self.fellows.iter().copied().filter(|id| *id != me).collect();

        let mut lead = LeadState {
            epoch,
            track_a: hash_a,
            half_a: half_a.clone(),
            half_b: half_b.clone(),
            votes: HashMap::new(),
            emitted: HashSet::new(),
        };
        // Sign our own votes for both tracks and all phases up front.
        for (hash, _) in [(hash_a, 0), (hash_b, 1)] {
            for phase in [Phase::Prepare, Phase::PreCommit, Phase::Commit] {
                let payload = Vote::signing_payload(&hash, phase, epoch);
                let sig = self.vault.sign(VaultKey::Node, &payload);
                lead.votes
                    .entry((hash, phase))
                    .or_default()
                    .insert(self.me(), sig);
            }
        }
        self.lead = Some(lead);

        let tx_hashes: Vec<Hash32> = block_a
            .transactions
            .iter()
            .map(|tx| tx.hash())
            .collect();
        effects.packaged.push((hash_b, tx_hashes));

        let mut targets_a = half_a;
        targets_a.extend(&fellow_targets);
        let mut targets_b = half_b;
        targets_b.extend(&fellow_targets);
        if !targets_a.is_empty() {
            effects.sends.push(SendSpec {
                targets: targets_a,
                payload: Payload::Consensus(ConsensusMessage::Proposal {
                    epoch,
                    block: block_a,
                    justify: justify.clone(),
                }),
            });
        }
        if !targets_b.is_empty() {
            effects.sends.push(SendSpec {
                targets: targets_b,
                payload: Payload::Consensus(ConsensusMessage::Proposal {
                    epoch,
                    block: block_b,
                    justify,
                }),
            });
        }
    }

    /// Dual-track leader aggregation: valid votes land in per-(block, phase)
    /// buckets; each bucket that reaches quorum yields a certificate sent
    /// only to that track's half (and fellows). Track-A certificates also
    /// feed the internal core so this node's own ledger keeps moving.
    fn collect_dual(&mut self, vote: Vote, now: u64, routing: &Routing) -> Effects {
        let mut effects = Effects::default();
        let quorum = self.node.core.config().quorum();
        let committee = self.node.core.config().committee.clone();
        let Some(lead) = self.lead.as_mut() else {
            return effects;
        };
        if vote.epoch != lead.epoch {
            return effects;
        }
        let Some(key) = committee.public_key(&vote.voter) else {
            return effects;
        };
        if !vote.verify(&key) {
            return effects;
        }
        let bucket = lead.votes.entry((vote.block_hash, vote.phase)).or_default();
        bucket.insert(vote.voter, vote.signature);
        if bucket.len() < quorum || lead.emitted.contains(&(vote.block_hash, vote.phase)) {
            return effects;
        }
        lead.emitted.insert((vote.block_hash, vote.phase));
        let cert = QuorumCertificate {
            block_hash: vote.block_hash,
            phase: vote.phase,
            epoch: lead.epoch,
            voters: bucket.iter().map(|(a, s)| (*a, *s)).collect(),
        };
        let on_track_a = vote.block_hash == lead.track_a;
        let mut targets: Vec<NodeId> = if on_track_a {
            lead.half_a.clone()
        } else {
            lead.half_b.clone()
        };
        let me = self.node.id;
        targets.extend(self.fellows.iter().copied().filter(|id| *id != me));
        if !targets.is_empty() {
            effects.sends.push(SendSpec {
                targets,
                payload: Payload::Consensus(ConsensusMessage::CertMsg(cert.clone())),
            });
        }
        if on_track_a {
            let src_addr = self.me();
            let core_effects = step_core(
                &mut self.node,
                src_addr,
                NodeInput::Net(Payload::Consensus(ConsensusMessage::CertMsg(cert))),
                now,
                routing,
            );
            merge_effects(&mut effects, core_effects);
            // The core's own echo votes route internally; the pre-signed
            // votes above already represent this node on both tracks.
        }
        effects
    }
}

fn merge_effects(into: &mut Effects, other: Effects) {
    into.sends.extend(other.sends);
    into.rejects.extend(other.rejects);
    into.decided.extend(other.decided);
    into.packaged.extend(other.packaged);
    if other.set_timer.is_some() {
        into.set_timer = other.set_timer;
    }
    if other.schedule_epoch.is_some() {
        into.schedule_epoch = other.schedule_epoch;
    }
    if other.entered.is_some() {
        into.entered = other.entered;
    }
    into.timeout_fired |= other.timeout_fired;
}
