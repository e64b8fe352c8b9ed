//! The trusted-hardware boundary and the three-step remote attestation
//! protocol.
//!
//! Shows vault provisioning (endorsement key at manufacturing, node key at
//! first boot), hardware-style signing, the TRNG, report publication on the
//! chain, and tamper detection against the on-chain registry.
//!
//! Run with: `cargo run --example attestation`

use vaultchain::bench::{attest_demo, AttestVerdict};
use vaultchain::crypto::verify_signature;
use vaultchain::vault::{verify_report, Vault, VaultKey};

fn main() {
    // Manufacturing: the device seed determines the endorsement identity.
    let mut device = Vault::provision([7u8; 32]);
    println!("endorsement key: {}", device.endorsement_public_key().to_hex());
    println!("node key:        {}", device.node_public_key().to_hex());
    println!("chain address:   {}", device.address().to_hex());

    // Hardware signing: keys never leave the vault; callers only see
    // signatures.
    let msg = b"sensor reading #4411";
    let sig = device.sign(VaultKey::Node, msg);
    assert!(verify_signature(&device.node_public_key(), msg, &sig));
    assert!(!verify_signature(&device.endorsement_public_key(), msg, &sig));
    println!("\nnode-key signature verifies; endorsement key rejects it (key separation)");

    // TRNG draws come from the vault's own entropy, not the OS.
    let draw = device.random(16);
    println!("TRNG draw:       {}", hex::encode(&draw));

    // Local attestation of a task binary.
    let code = b"fn aggregate(models: &[Model]) -> Model { average(models) }";
    let report = device.attest_code(code);
    println!("\nattestation report:");
    println!("  code hash: {}", report.code_hash);
    println!("  device:    {}", report.device.to_hex());
    println!("  nonce:     {}", hex::encode(report.nonce));
    assert!(verify_report(&report, Some(&device.endorsement_public_key())));

    // A second device attesting the same code produces the same hash under
    // a different identity.
    let mut other = Vault::provision([8u8; 32]);
    let other_report = other.attest_code(code);
    assert_eq!(other_report.code_hash, report.code_hash);
    assert_ne!(other_report.signature, report.signature);
    println!("second device: same code hash, distinct endorsement signature");

    // End to end on a simulated network: publish on chain, re-attest
    // locally, compare.
    println!("\nthree-step protocol on a 4-validator network:");
    let intact = attest_demo(code, None, 99, 5_000);
    println!(
        "  untampered: verdict {} (decided at height {:?})",
        intact.verdict, intact.decided_height
    );
    assert_eq!(intact.verdict, AttestVerdict::Intact);

    let tampered = attest_demo(code, Some(17), 99, 5_000);
    println!(
        "  one flipped byte at offset 17: verdict {}",
        tampered.verdict
    );
    assert_eq!(tampered.verdict, AttestVerdict::Tampered);

    let pending = attest_demo(code, None, 99, 5);
    println!(
        "  checked before the publication decided: verdict {} (retriable)",
        pending.verdict
    );
    assert_eq!(pending.verdict, AttestVerdict::Pending);
}
