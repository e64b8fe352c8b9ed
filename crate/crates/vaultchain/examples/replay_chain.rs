//! Determinism and persistence: scenario replay is bit-identical, and a
//! chain file replayed on a fresh node reproduces the head hash and state
//! root exactly.
//!
//! Run with: `cargo run --example replay_chain`

use std::fs;

use vaultchain::bench::{replay, run_scenario, ScenarioConfig};
use vaultchain::ledger::Ledger;
use vaultchain::sim::ByzantineStrategy;

fn main() {
    let mut config = ScenarioConfig::new(4, 30, 2, 555);
    config.byzantine = 1;
    config.strategy = ByzantineStrategy::Silent;

    let first = run_scenario(&config).expect("valid config");
    let second = replay(&config).expect("valid config");

    let trace_a = first.trace.serialize();
    let trace_b = second.trace.serialize();
    assert_eq!(trace_a, trace_b);
    println!(
        "replay: {} trace records reproduced bit-identically",
        second.trace.len()
    );
    assert_eq!(
        first.metrics.records_csv(),
        second.metrics.records_csv()
    );
    println!("replay: per-transaction metrics identical");

    // Persist one validator's chain and replay it on a fresh node.
    let (node, ledger) = &first.ledgers[0];
    let bytes = ledger.chain_bytes();
    let path = std::env::temp_dir().join("vaultchain_example_chain.bin");
    fs::write(&path, &bytes).expect("write chain file");
    println!(
        "\nwrote validator {node}'s chain: {} blocks, {} bytes -> {}",
        ledger.height() + 1,
        bytes.len(),
        path.display()
    );

    let raw = fs::read(&path).expect("read chain file");
    let fresh = Ledger::replay_chain(first.genesis_state.clone(), &raw, &first.committee)
        .expect("chain replays cleanly");
    assert_eq!(fresh.head_hash(), ledger.head_hash());
    assert_eq!(fresh.state_root(), ledger.state_root());
    assert_eq!(fresh.height(), ledger.height());
    println!(
        "fresh node replayed to height {}: head {} and state root {} match",
        fresh.height(),
        &fresh.head_hash().to_hex()[..16],
        &fresh.state_root().to_hex()[..16]
    );

    // Every stored block still carries its commit certificate.
    for h in 1..=fresh.height() {
        let block = fresh.chain().at_height(h).unwrap();
        assert!(block.header.commit_certificate.is_some());
    }
    println!("all {} replayed blocks carry their commit certificates", fresh.height());

    let _ = fs::remove_file(&path);
}
