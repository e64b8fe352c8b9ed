//! Proof-of-stake committee selection and leader rotation.
//!
//! Builds a stake ledger, selects committees of several sizes, and shows the
//! deterministic ordering, the fault bound, and round-robin leadership.
//!
//! Run with: `cargo run --example committee`

use vaultchain::bench::{GenesisRecord, GenesisSpec, NodeRole};
use vaultchain::membership::{
    leader_for_epoch, max_faulty, quorum_threshold, select_committee, StakeLedger,
};
use vaultchain::vault::Vault;

fn main() {
    // Ten devices, each with a vault-held node key and a stake.
    let mut stakes = StakeLedger::new();
    let mut vaults = Vec::new();
    for i in 0u8..10 {
        let vault = Vault::provision([i + 1; 32]);
        let stake = match i {
            0..=2 => 500 - i as u64, // heavyweights
            3..=6 => 100,            // mid-tier, tie-broken by address
            _ => 10,
        };
        stakes.register(vault.node_public_key(), stake);
        println!(
            "device {i}: address {} stake {stake}",
            &vault.address().to_hex()[..12]
        );
        vaults.push(vault);
    }

    for n in [4usize, 7, 10] {
        let committee = select_committee(&stakes, n).expect("enough stakers");
        println!(
            "\ncommittee n={n}: f={} quorum={}",
            max_faulty(n),
            quorum_threshold(n)
        );
        for (i, (addr, _)) in committee.members().iter().enumerate() {
            println!("  seat {i}: {} (stake {})", &addr.to_hex()[..12], stakes.stake_of(addr));
        }
        print!("  leaders for epochs 0..{n}:");
        for epoch in 0..n as u64 {
            let leader = leader_for_epoch(epoch, &committee);
            print!(" {}", committee.index_of(&leader).unwrap());
        }
        println!(" (each seat leads exactly once per cycle)");
    }

    // The same data as a genesis file.
    let records: Vec<GenesisRecord> = vaults
        .iter()
        .enumerate()
        .map(|(i, vault)| GenesisRecord {
            address: vault.address(),
            public_key: vault.node_public_key(),
            stake: stakes.stake_of(&vault.address()),
            role: if i < 7 { NodeRole::Validator } else { NodeRole::Client },
        })
        .collect();
    let spec = GenesisSpec {
        initial_balance: 1_000_000,
        records,
    };
    let text = spec.to_text();
    println!("\ngenesis file ({} bytes of text):", text.len());
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    println!("  ...");
    let reparsed = GenesisSpec::from_text(&text).expect("round-trip");
    assert_eq!(reparsed, spec);
    println!("text round-trip OK; binary form is {} bytes", spec.to_binary().len());
}
