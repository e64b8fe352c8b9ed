//! Hashing and signature verification primitives.
//!
//! SHA-256 is the universal digest; signatures are deterministic Ed25519
//! (32-byte public keys, 64-byte signatures). Secret keys are handled
//! exclusively by [`crate::vault::Vault`]; this module only exposes the
//! public-key side.

use ed25519_dalek::{Signature as DalekSignature, Verifier, VerifyingKey};
use sha2::{Digest, Sha256};

use crate::codec::Encode;
use crate::types::{Hash32, PublicKey, Signature};

/// Domain-separation tags prepended to every signed payload so a signature
/// produced for one protocol artifact can never be replayed as another.
pub(crate) mod domain {
    pub const TRANSACTION: u8 = 1;
    pub const VOTE: u8 = 2;
    pub const NEW_EPOCH: u8 = 3;
    pub const ATTESTATION: u8 = 4;
}

pub fn sha256(bytes: &[u8]) -> Hash32 {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    Hash32(out)
}

/// SHA-256 digest of the canonical encoding of `value`.
pub fn hash_of<T: Encode>(value: &T) -> Hash32 {
    sha256(&value.encode())
}

/// Returns true iff `signature` is a valid Ed25519 signature on `message`
/// under `public_key`. Malformed keys or signatures yield `false`, never an
/// error.
pub fn verify_signature(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&public_key.0) else {
        return false;
    };
    let sig = DalekSignature::from_bytes(&signature.0);
    vk.verify(message, &sig).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vault::{Vault, VaultKey};

    /// Compact, self-contained SHA-256 used as an independent oracle for
    /// `hash_of`. Implemented from the FIPS 180-4 description; shares no code
    /// with the `sha2` crate.
    mod reference_sha256 {
        const K: [u32; 64] = [
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
            0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
            0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
            0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
            0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
            0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
            0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
            0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
            0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
            0xc67178f2,
        ];

        pub fn digest(input: &[u8]) -> [u8; 32] {
            let mut h: [u32; 8] = [
                0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab,
                0x5be0cd19,
            ];
            let mut msg = input.to_vec();
            let bit_len = (input.len() as u64) * 8;
            msg.push(0x80);
            while msg.len() % 64 != 56 {
                msg.push(0);
            }
            msg.extend_from_slice(&bit_len.to_be_bytes());

            for chunk in msg.chunks(64) {
                let mut w = [0u32; 64];
                for (i, word) in chunk.chunks(4).enumerate() {
                    w[i] = u32::from_be_bytes([word[0], word[1], word[2], word[3]]);
                }
                for i in 16..64 {
                    let s0 = w[i - 15].rotate_right(7) ^ w[i - 15].rotate_right(18) ^ (w[i - 15] >> 3);
                    let s1 = w[i - 2].rotate_right(17) ^ w[i - 2].rotate_right(19) ^ (w[i - 2] >> 10);
                    w[i] = w[i - 16]
                        .wrapping_add(s0)
                        .wrapping_add(w[i - 7])
                        .wrapping_add(s1);
                }
                let (mut a, mut b, mut c, mut d, mut e, mut f, mut g, mut hh) =
                    (h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7]);
                for i in 0..64 {
                    let s1 = e.rotate_right(6) ^ e.rotate_right(11) ^ e.rotate_right(25);
                    let ch = (e & f) ^ ((!e) & g);
                    let t1 = hh
                        .wrapping_add(s1)
                        .wrapping_add(ch)
                        .wrapping_add(K[i])
                        .wrapping_add(w[i]);
                    let s0 = a.rotate_right(2) ^ a.rotate_right(13) ^ a.rotate_right(22);
                    let maj = (a & b) ^ (a & c) ^ (b & c);
                    let t2 = s0.wrapping_add(maj);
                    hh = g;
                    g = f;
                    f = e;
                    e = d.wrapping_add(t1);
                    d = c;
                    c = b;
                    b = a;
                    a = t1.wrapping_add(t2);
                }
                h[0] = h[0].wrapping_add(a);
                h[1] = h[1].wrapping_add(b);
                h[2] = h[2].wrapping_add(c);
                h[3] = h[3].wrapping_add(d);
                h[4] = h[4].wrapping_add(e);
                h[5] = h[5].wrapping_add(f);
                h[6] = h[6].wrapping_add(g);
                h[7] = h[7].wrapping_add(hh);
            }

            let mut out = [0u8; 32];
            for (i, word) in h.iter().enumerate() {
                out[i * 4..i * 4 + 4].copy_from_slice(&word.to_be_bytes());
            }
            out
        }
    }

    #[test]
    fn sha256_of_empty_input_matches_standard_vector() {
        let expected = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
        assert_eq!(sha256(b"").to_hex(), expected);
        assert_eq!(hex::encode(reference_sha256::digest(b"")), expected);
    }

    #[test]
    fn reference_sha256_matches_abc_vector() {
        assert_eq!(
            hex::encode(reference_sha256::digest(b"abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn sha256_agrees_with_independent_implementation_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0x5eed);
        for _ in 0..64 {
            let len = rng.gen_range(0..512);
            let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            assert_eq!(sha256(&data).0, reference_sha256::digest(&data));
        }
    }

    #[test]
    fn signature_roundtrip_tamper_and_wrong_message() {
        let mut vault = Vault::provision([42u8; 32]);
        let pk = vault.node_public_key();
        let msg = b"state transition payload";
        let sig = vault.sign(VaultKey::Node, msg);
        assert!(verify_signature(&pk, msg, &sig));

        let mut flipped = sig;
        flipped.0[0] ^= 0x01;
        assert!(!verify_signature(&pk, msg, &flipped));

        assert!(!verify_signature(&pk, b"different payload", &sig));
        let _ = vault.random(1);
    }
}
