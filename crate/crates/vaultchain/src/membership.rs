//! Stake accounting and proof-of-stake committee selection.
//!
//! The committee is the top-`n` stakers ordered by (stake descending,
//! address ascending), which makes selection deterministic for a given
//! ledger. Leaders rotate round-robin over the committee order.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::types::{Address, PublicKey};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MembershipError {
    #[error("committee size must be at least 1")]
    InvalidCommitteeSize,
    #[error("only {have} positive-stake addresses available, need {need}")]
    InsufficientStakers { have: usize, need: usize },
}

/// Stake and key registry seeded at genesis. Every staked address carries
/// the public key it was derived from.
#[derive(Clone, Debug, Default)]
pub struct StakeLedger {
    entries: BTreeMap<Address, StakeEntry>,
}

#[derive(Clone, Debug)]
struct StakeEntry {
    public_key: PublicKey,
    stake: u64,
}

impl StakeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a participant. The address is derived from the public key,
    /// which keeps the "every staked address has a registered key" invariant
    /// true by construction.
    pub fn register(&mut self, public_key: PublicKey, stake: u64) -> Address {
        let address = Address::from_public_key(&public_key);
        self.entries.insert(address, StakeEntry { public_key, stake });
        address
    }

    pub fn stake_of(&self, address: &Address) -> u64 {
        self.entries.get(address).map(|e| e.stake).unwrap_or(0)
    }

    pub fn public_key(&self, address: &Address) -> Option<PublicKey> {
        self.entries.get(address).map(|e| e.public_key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Address, &PublicKey, u64)> {
        self.entries
            .iter()
            .map(|(addr, e)| (addr, &e.public_key, e.stake))
    }
}

/// The selected consensus committee in canonical (round-robin) order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidatorSet {
    members: Vec<(Address, PublicKey)>,
}

impl ValidatorSet {
    pub fn new(members: Vec<(Address, PublicKey)>) -> Self {
        debug_assert!(!members.is_empty());
        ValidatorSet { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, address: &Address) -> bool {
        self.members.iter().any(|(a, _)| a == address)
    }

    pub fn public_key(&self, address: &Address) -> Option<PublicKey> {
        self.members
            .iter()
            .find(|(a, _)| a == address)
            .map(|(_, pk)| *pk)
    }

    pub fn member(&self, index: usize) -> &(Address, PublicKey) {
        &self.members[index]
    }

    pub fn members(&self) -> &[(Address, PublicKey)] {
        &self.members
    }

    pub fn index_of(&self, address: &Address) -> Option<usize> {
        self.members.iter().position(|(a, _)| a == address)
    }
}

/// Maximum number of Byzantine validators tolerated by a committee of `n`:
/// `f = floor((n - 1) / 3)`, the largest `f` with `n > 3f`.
pub fn max_faulty(n: usize) -> usize {
    assert!(n >= 1, "committee size must be at least 1");
    (n - 1) / 3
}

/// Votes required to form a quorum certificate: `n - f`.
pub fn quorum_threshold(n: usize) -> usize {
    n - max_faulty(n)
}

/// Selects the `n` highest-staked addresses, ties broken by ascending
/// address bytes. The result order (stake descending, address ascending) is
/// the canonical committee order.
pub fn select_committee(ledger: &StakeLedger, n: usize) -> Result<ValidatorSet, MembershipError> {
    if n == 0 {
        return Err(MembershipError::InvalidCommitteeSize);
    }
    let mut candidates: Vec<(Address, PublicKey, u64)> = ledger
        .iter()
        .filter(|(_, _, stake)| *stake > 0)
        .map(|(addr, pk, stake)| (*addr, *pk, stake))
        .collect();
    if candidates.len() < n {
        return Err(MembershipError::InsufficientStakers {
            have: candidates.len(),
            need: n,
        });
    }
    candidates.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
    candidates.truncate(n);
    Ok(ValidatorSet::new(
        candidates.into_iter().map(|(a, pk, _)| (a, pk)).collect(),
    ))
}

/// Round-robin leader for an epoch: `members[epoch mod n]`.
pub fn leader_for_epoch(epoch: u64, committee: &ValidatorSet) -> Address {
    assert!(!committee.is_empty(), "committee must be non-empty");
    let idx = (epoch % committee.len() as u64) as usize;
    committee.member(idx).0
}
