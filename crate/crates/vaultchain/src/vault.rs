//! Simulated trusted-hardware boundary: key vault, TRNG, and the code
//! attestation engine.
//!
//! A [`Vault`] models the security chip plus enclave of one device. Its two
//! signing keys never leave the struct: the endorsement key is derived from
//! the manufacturing-time device seed, the node key is drawn from the vault's
//! own entropy stream at first boot. Every observable output is a public key,
//! a signature, random bytes, or an attestation report.
//!
//! The entropy stream is a dedicated seeded ChaCha20 generator, never the
//! process-global or OS randomness, which models the TRNG's independence
//! from an attacker-controlled OS random source.

use ed25519_dalek::{Signer, SigningKey};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::crypto::sha256;
use crate::types::{Address, AttestationReport, PublicKey, Signature};

/// Selects which of the vault's two confined keys signs a message.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VaultKey {
    /// Per-device identity key, hardened in at manufacturing time.
    Endorsement,
    /// Blockchain node key, created at first boot.
    Node,
}

pub struct Vault {
    endorsement: SigningKey,
    node: SigningKey,
    entropy: ChaCha20Rng,
}

impl std::fmt::Debug for Vault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Secrets stay out of debug output.
        f.debug_struct("Vault")
            .field("endorsement_public_key", &self.endorsement_public_key())
            .field("node_public_key", &self.node_public_key())
            .finish()
    }
}

fn derive(tag: &[u8], seed: &[u8; 32]) -> [u8; 32] {
    let mut input = Vec::with_capacity(tag.len() + 32);
    input.extend_from_slice(tag);
    input.extend_from_slice(seed);
    sha256(&input).0
}

impl Vault {
    /// Provisions a vault from a 32-byte device seed. The endorsement key is
    /// derived from the seed (modeling manufacturing); the entropy stream is
    /// seeded from the same device seed; the node key is drawn from the
    /// entropy stream (modeling first boot). The same seed always yields the
    /// same vault.
    pub fn provision(device_seed: [u8; 32]) -> Self {
        let entropy_seed = derive(b"vaultchain/entropy", &device_seed);
        Self::provision_with_entropy(device_seed, entropy_seed)
    }

    /// Provisioning variant with an explicit entropy seed, for scenarios
    /// that model the TRNG source separately from the manufacturing seed.
    pub fn provision_with_entropy(device_seed: [u8; 32], entropy_seed: [u8; 32]) -> Self {
        let endorsement = SigningKey::from_bytes(&derive(b"vaultchain/endorsement", &device_seed));
        let mut entropy = ChaCha20Rng::from_seed(entropy_seed);
        let mut node_seed = [0u8; 32];
        entropy.fill_bytes(&mut node_seed);
        let node = SigningKey::from_bytes(&node_seed);
        Vault {
            endorsement,
            node,
            entropy,
        }
    }

    pub fn endorsement_public_key(&self) -> PublicKey {
        PublicKey(self.endorsement.verifying_key().to_bytes())
    }

    pub fn node_public_key(&self) -> PublicKey {
        PublicKey(self.node.verifying_key().to_bytes())
    }

    /// The device's blockchain address, derived from the node public key.
    pub fn address(&self) -> Address {
        Address::from_public_key(&self.node_public_key())
    }

    /// Deterministic signature by the selected confined key.
    pub fn sign(&self, key: VaultKey, message: &[u8]) -> Signature {
        let sk = match key {
            VaultKey::Endorsement => &self.endorsement,
            VaultKey::Node => &self.node,
        };
        Signature(sk.sign(message).to_bytes())
    }

    /// Draws `n` bytes from the vault's entropy stream.
    pub fn random(&mut self, n: usize) -> Vec<u8> {
        let mut out = vec![0u8; n];
        self.entropy.fill_bytes(&mut out);
        out
    }

    /// Hashes `code`, draws a fresh nonce, and signs the report with the
    /// endorsement key.
    pub fn attest_code(&mut self, code: &[u8]) -> AttestationReport {
        let code_hash = sha256(code);
        let device = self.address();
        let mut nonce = [0u8; 8];
        self.entropy.fill_bytes(&mut nonce);
        let payload = AttestationReport::signing_payload(&code_hash, &device, &nonce);
        let signature = self.sign(VaultKey::Endorsement, &payload);
        AttestationReport {
            code_hash,
            device,
            endorsement_public_key: self.endorsement_public_key(),
            nonce,
            signature,
        }
    }

    #[cfg(test)]
    pub(crate) fn secret_material(&self) -> ([u8; 32], [u8; 32]) {
        (self.endorsement.to_bytes(), self.node.to_bytes())
    }
}

/// Verifies an attestation report: signature over `(code_hash, device,
/// nonce)` under the report's endorsement key, and an optional match against
/// an expected endorsement key.
pub fn verify_report(report: &AttestationReport, expected: Option<&PublicKey>) -> bool {
    report.verify(expected)
}
