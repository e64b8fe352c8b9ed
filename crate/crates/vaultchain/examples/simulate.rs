//! A five-validator network deciding blocks under client load, end to end
//! inside the deterministic simulator.
//!
//! Run with: `cargo run --example simulate`

use vaultchain::sim::{check_liveness, check_safety, RecordKind, SimConfig, Simulation};

fn main() {
    // Five validators, two client nodes, default 5±2 ms links.
    let mut sim = Simulation::new(SimConfig::new(5, 2, 2024));

    // Clients submit a burst of signed transfers.
    let beneficiary = sim.address_of(0);
    for k in 0..40u64 {
        let client = 5 + (k % 2) as usize;
        let tx = sim.build_transfer(client, beneficiary, 5);
        sim.schedule_transaction(client, 25 * k, tx);
    }

    sim.run(3_000);

    println!("simulated 3.0 s, {} trace records", sim.trace().len());
    for id in sim.honest_validators() {
        let ledger = sim.validator_ledger(*id).unwrap();
        println!(
            "validator {id}: height {:3}  head {}  state root {}",
            ledger.height(),
            &ledger.head_hash().to_hex()[..16],
            &ledger.state_root().to_hex()[..16],
        );
    }

    let safety = check_safety(sim.trace(), sim.honest_validators());
    let liveness = check_liveness(sim.trace(), sim.honest_validators(), 500, 3_000);
    println!("safety:   {}", if safety.ok { "PASS" } else { "FAIL" });
    println!("liveness: {}", if liveness.ok { "PASS" } else { "FAIL" });
    assert!(safety.ok && liveness.ok);

    let confirmed = sim.delays().confirmed();
    println!("confirmed {} of 40 transactions", confirmed.len());
    let mean_conf: f64 = confirmed
        .iter()
        .map(|t| (t.decide_ms - t.submit_ms) as f64)
        .sum::<f64>()
        / confirmed.len() as f64;
    println!("mean confirmation delay: {mean_conf:.1} ms");

    // A peek at the wire: the first few protocol events.
    println!("\nfirst protocol events:");
    for record in sim
        .trace()
        .records
        .iter()
        .filter(|r| matches!(r.kind, RecordKind::Send { .. } | RecordKind::Decide { .. }))
        .take(8)
    {
        println!(
            "  t={:3}ms {:?} {} -> {}",
            record.time_ms,
            record.kind,
            record.src.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
            record.dst.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
        );
    }

    // The balance arrived on every replica.
    for id in sim.honest_validators() {
        let state = sim.validator_ledger(*id).unwrap().state().clone();
        assert_eq!(state.account(&beneficiary).unwrap().balance, 1_000_000_000 + 200);
    }
    println!("\nreplicated state agrees on all validators");
}
