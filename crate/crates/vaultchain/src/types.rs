//! Core data model: hashes, addresses, transactions, blocks, votes, and
//! quorum certificates.
//!
//! All types are immutable values; the canonical encoding in [`crate::codec`]
//! is their wire and disk format. Block identity is the hash of the header
//! with the `commit_certificate` field excluded, so a block keeps the same
//! hash before and after its certificate is attached.

use std::fmt;

use crate::codec::{self, CodecError, Decode, Encode, Reader};
use crate::crypto::{self, domain, sha256};

pub const HASH_LEN: usize = 32;
pub const ADDRESS_LEN: usize = 20;
pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

/// 32-byte SHA-256 digest, the system's universal hash.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hash32(pub [u8; HASH_LEN]);

impl Hash32 {
    pub const ZERO: Hash32 = Hash32([0u8; HASH_LEN]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; HASH_LEN] = bytes.try_into().ok()?;
        Some(Hash32(arr))
    }
}

impl fmt::Debug for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash32({}..)", hex::encode(&self.0[..4]))
    }
}

impl fmt::Display for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// 20-byte account identifier: the trailing 20 bytes of the SHA-256 digest
/// of the account's public key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(pub [u8; ADDRESS_LEN]);

impl Address {
    pub const ZERO: Address = Address([0u8; ADDRESS_LEN]);

    pub fn from_public_key(pk: &PublicKey) -> Self {
        let digest = sha256(&pk.0);
        let mut out = [0u8; ADDRESS_LEN];
        out.copy_from_slice(&digest.0[HASH_LEN - ADDRESS_LEN..]);
        Address(out)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; ADDRESS_LEN] = bytes.try_into().ok()?;
        Some(Address(arr))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({}..)", hex::encode(&self.0[..4]))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// 32-byte Ed25519 public key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKey(pub [u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; PUBLIC_KEY_LEN] = bytes.try_into().ok()?;
        Some(PublicKey(arr))
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}..)", hex::encode(&self.0[..4]))
    }
}

/// 64-byte Ed25519 signature.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl Signature {
    pub const ZERO: Signature = Signature([0u8; SIGNATURE_LEN]);
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..4]))
    }
}

/// Signed attestation of a code binary, produced inside a vault and published
/// on chain. The signature binds `(code_hash, device, nonce)` under the
/// device's endorsement key; the nonce is drawn from the vault TRNG so
/// reports are not replayable across tasks.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AttestationReport {
    pub code_hash: Hash32,
    pub device: Address,
    pub endorsement_public_key: PublicKey,
    pub nonce: [u8; 8],
    pub signature: Signature,
}

impl AttestationReport {
    pub fn signing_payload(code_hash: &Hash32, device: &Address, nonce: &[u8; 8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + HASH_LEN + ADDRESS_LEN + 8);
        out.push(domain::ATTESTATION);
        out.extend_from_slice(&code_hash.0);
        out.extend_from_slice(&device.0);
        out.extend_from_slice(nonce);
        out
    }

    /// True iff the report signature verifies, and (when supplied) the
    /// endorsement key matches the expected one.
    pub fn verify(&self, expected_endorsement_key: Option<&PublicKey>) -> bool {
        if let Some(expected) = expected_endorsement_key {
            if expected != &self.endorsement_public_key {
                return false;
            }
        }
        let payload = Self::signing_payload(&self.code_hash, &self.device, &self.nonce);
        crypto::verify_signature(&self.endorsement_public_key, &payload, &self.signature)
    }
}

/// Transaction effect: a balance transfer or an attestation-report
/// publication.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum TxKind {
    Transfer { to: Address, amount: u64 },
    PublishReport(AttestationReport),
}

/// Signed state-machine operation. The signature covers the canonical
/// encoding of `(sender, nonce, kind)` under the sender's registered key.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    pub sender: Address,
    pub nonce: u64,
    pub kind: TxKind,
    pub signature: Signature,
}

impl Transaction {
    pub fn signing_payload(sender: &Address, nonce: u64, kind: &TxKind) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(domain::TRANSACTION);
        out.extend_from_slice(&sender.0);
        codec::put_u64(&mut out, nonce);
        kind.encode_into(&mut out);
        out
    }

    pub fn hash(&self) -> Hash32 {
        crypto::hash_of(self)
    }

    pub fn verify(&self, sender_key: &PublicKey) -> bool {
        let payload = Self::signing_payload(&self.sender, self.nonce, &self.kind);
        crypto::verify_signature(sender_key, &payload, &self.signature)
    }
}

/// Consensus phase within one epoch. The variant order is the protocol
/// order: PREPARE < PRE_COMMIT < COMMIT.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Phase {
    Prepare,
    PreCommit,
    Commit,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Prepare => "PREPARE",
            Phase::PreCommit => "PRE_COMMIT",
            Phase::Commit => "COMMIT",
        }
    }

    /// The phase a validator votes in after seeing a certificate for `self`.
    pub fn next(&self) -> Option<Phase> {
        match self {
            Phase::Prepare => Some(Phase::PreCommit),
            Phase::PreCommit => Some(Phase::Commit),
            Phase::Commit => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One validator's signed vote for `(block_hash, phase, epoch)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Vote {
    pub voter: Address,
    pub block_hash: Hash32,
    pub phase: Phase,
    pub epoch: u64,
    pub signature: Signature,
}

impl Vote {
    pub fn signing_payload(block_hash: &Hash32, phase: Phase, epoch: u64) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + HASH_LEN + 1 + 8);
        out.push(domain::VOTE);
        out.extend_from_slice(&block_hash.0);
        phase.encode_into(&mut out);
        codec::put_u64(&mut out, epoch);
        out
    }

    pub fn verify(&self, voter_key: &PublicKey) -> bool {
        let payload = Self::signing_payload(&self.block_hash, self.phase, self.epoch);
        crypto::verify_signature(voter_key, &payload, &self.signature)
    }
}

/// Aggregate of distinct validator votes proving completion of one phase for
/// one `(block, epoch)`. Voters are stored sorted by address so the encoding
/// is canonical.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QuorumCertificate {
    pub block_hash: Hash32,
    pub phase: Phase,
    pub epoch: u64,
    pub voters: Vec<(Address, Signature)>,
}

/// Reasons a quorum certificate fails verification. Each is checked
/// independently: duplicate voters, non-members, undersized quorums, and
/// invalid signatures are all rejected on their own.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CertError {
    BelowThreshold { have: usize, need: usize },
    DuplicateVoter(Address),
    UnknownVoter(Address),
    BadSignature(Address),
}

impl fmt::Display for CertError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertError::BelowThreshold { have, need } => {
                write!(f, "certificate has {have} voters, quorum needs {need}")
            }
            CertError::DuplicateVoter(a) => write!(f, "duplicate voter {a}"),
            CertError::UnknownVoter(a) => write!(f, "voter {a} is not a committee member"),
            CertError::BadSignature(a) => write!(f, "invalid signature from {a}"),
        }
    }
}

impl QuorumCertificate {
    pub fn hash(&self) -> Hash32 {
        crypto::hash_of(self)
    }

    /// Verifies the certificate against a committee: at least `threshold`
    /// pairwise-distinct voters, every voter resolvable to a committee key,
    /// and every signature valid for `(block_hash, phase, epoch)`.
    pub fn verify_with<F>(&self, threshold: usize, mut committee_key: F) -> Result<(), CertError>
    where
        F: FnMut(&Address) -> Option<PublicKey>,
    {
        if self.voters.len() < threshold {
            return Err(CertError::BelowThreshold {
                have: self.voters.len(),
                need: threshold,
            });
        }
        let mut seen: Vec<Address> = Vec::with_capacity(self.voters.len());
        let payload = Vote::signing_payload(&self.block_hash, self.phase, self.epoch);
        for (voter, signature) in &self.voters {
            if seen.contains(voter) {
                return Err(CertError::DuplicateVoter(*voter));
            }
            seen.push(*voter);
            let Some(key) = committee_key(voter) else {
                return Err(CertError::UnknownVoter(*voter));
            };
            if !crypto::verify_signature(&key, &payload, signature) {
                return Err(CertError::BadSignature(*voter));
            }
        }
        Ok(())
    }
}

/// Block header. `commit_certificate` is attached once the block is decided
/// and is excluded from the block hash.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BlockHeader {
    pub parent_hash: Hash32,
    pub height: u64,
    pub epoch: u64,
    pub proposer: Address,
    pub tx_root: Hash32,
    pub state_root: Hash32,
    pub commit_certificate: Option<QuorumCertificate>,
}

impl BlockHeader {
    /// Canonical bytes that define block identity: every header field except
    /// the commit certificate.
    pub fn id_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HASH_LEN * 3 + ADDRESS_LEN + 16);
        out.extend_from_slice(&self.parent_hash.0);
        codec::put_u64(&mut out, self.height);
        codec::put_u64(&mut out, self.epoch);
        out.extend_from_slice(&self.proposer.0);
        out.extend_from_slice(&self.tx_root.0);
        out.extend_from_slice(&self.state_root.0);
        out
    }

    pub fn hash(&self) -> Hash32 {
        sha256(&self.id_bytes())
    }
}

/// Header plus ordered transactions.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn hash(&self) -> Hash32 {
        self.header.hash()
    }

    /// Digest of the ordered list of transaction hashes.
    pub fn compute_tx_root(transactions: &[Transaction]) -> Hash32 {
        let hashes: Vec<Hash32> = transactions.iter().map(Transaction::hash).collect();
        crypto::hash_of(&hashes)
    }

    pub fn tx_root_matches(&self) -> bool {
        Self::compute_tx_root(&self.transactions) == self.header.tx_root
    }
}

// --- canonical encodings -------------------------------------------------

impl Encode for Hash32 {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
}

impl Decode for Hash32 {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Hash32(r.array()?))
    }
}

impl Encode for Address {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
}

impl Decode for Address {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Address(r.array()?))
    }
}

impl Encode for PublicKey {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
}

impl Decode for PublicKey {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(PublicKey(r.array()?))
    }
}

impl Encode for Signature {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
}

impl Decode for Signature {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Signature(r.array()?))
    }
}

impl Encode for AttestationReport {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.code_hash.encode_into(out);
        self.device.encode_into(out);
        self.endorsement_public_key.encode_into(out);
        out.extend_from_slice(&self.nonce);
        self.signature.encode_into(out);
    }
}

impl Decode for AttestationReport {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(AttestationReport {
            code_hash: Hash32::decode_from(r)?,
            device: Address::decode_from(r)?,
            endorsement_public_key: PublicKey::decode_from(r)?,
            nonce: r.array()?,
            signature: Signature::decode_from(r)?,
        })
    }
}

impl Encode for TxKind {
    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            TxKind::Transfer { to, amount } => {
                out.push(0);
                to.encode_into(out);
                codec::put_u64(out, *amount);
            }
            TxKind::PublishReport(report) => {
                out.push(1);
                report.encode_into(out);
            }
        }
    }
}

impl Decode for TxKind {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.u8()? {
            0 => Ok(TxKind::Transfer {
                to: Address::decode_from(r)?,
                amount: r.u64_be()?,
            }),
            1 => Ok(TxKind::PublishReport(AttestationReport::decode_from(r)?)),
            tag => Err(CodecError::InvalidTag {
                what: "transaction kind",
                tag,
            }),
        }
    }
}

impl Encode for Transaction {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.sender.encode_into(out);
        codec::put_u64(out, self.nonce);
        self.kind.encode_into(out);
        self.signature.encode_into(out);
    }
}

impl Decode for Transaction {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Transaction {
            sender: Address::decode_from(r)?,
            nonce: r.u64_be()?,
            kind: TxKind::decode_from(r)?,
            signature: Signature::decode_from(r)?,
        })
    }
}

impl Encode for Phase {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(match self {
            Phase::Prepare => 0,
            Phase::PreCommit => 1,
            Phase::Commit => 2,
        });
    }
}

impl Decode for Phase {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.u8()? {
            0 => Ok(Phase::Prepare),
            1 => Ok(Phase::PreCommit),
            2 => Ok(Phase::Commit),
            tag => Err(CodecError::InvalidTag { what: "phase", tag }),
        }
    }
}

impl Encode for Vote {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.voter.encode_into(out);
        self.block_hash.encode_into(out);
        self.phase.encode_into(out);
        codec::put_u64(out, self.epoch);
        self.signature.encode_into(out);
    }
}

impl Decode for Vote {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Vote {
            voter: Address::decode_from(r)?,
            block_hash: Hash32::decode_from(r)?,
            phase: Phase::decode_from(r)?,
            epoch: r.u64_be()?,
            signature: Signature::decode_from(r)?,
        })
    }
}

impl Encode for (Address, Signature) {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.0.encode_into(out);
        self.1.encode_into(out);
    }
}

impl Decode for (Address, Signature) {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok((Address::decode_from(r)?, Signature::decode_from(r)?))
    }
}

impl Encode for QuorumCertificate {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.block_hash.encode_into(out);
        self.phase.encode_into(out);
        codec::put_u64(out, self.epoch);
        self.voters.encode_into(out);
    }
}

impl Decode for QuorumCertificate {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(QuorumCertificate {
            block_hash: Hash32::decode_from(r)?,
            phase: Phase::decode_from(r)?,
            epoch: r.u64_be()?,
            voters: Vec::decode_from(r)?,
        })
    }
}

impl Encode for BlockHeader {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.parent_hash.encode_into(out);
        codec::put_u64(out, self.height);
        codec::put_u64(out, self.epoch);
        self.proposer.encode_into(out);
        self.tx_root.encode_into(out);
        self.state_root.encode_into(out);
        self.commit_certificate.encode_into(out);
    }
}

impl Decode for BlockHeader {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(BlockHeader {
            parent_hash: Hash32::decode_from(r)?,
            height: r.u64_be()?,
            epoch: r.u64_be()?,
            proposer: Address::decode_from(r)?,
            tx_root: Hash32::decode_from(r)?,
            state_root: Hash32::decode_from(r)?,
            commit_certificate: Option::decode_from(r)?,
        })
    }
}

impl Encode for Block {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.header.encode_into(out);
        self.transactions.encode_into(out);
    }
}

impl Decode for Block {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Block {
            header: BlockHeader::decode_from(r)?,
            transactions: Vec::decode_from(r)?,
        })
    }
}
