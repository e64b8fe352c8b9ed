//! Offered-rate sweep: linear throughput below saturation, a plateau above
//! it, and the two delay metrics per cell.
//!
//! Run with: `cargo run --release --example throughput`

use vaultchain::bench::{sweep, ScenarioConfig, SUMMARY_HEADER};

fn main() {
    let rates = [25u64, 50, 100, 200, 300];
    let cells: Vec<ScenarioConfig> = rates
        .iter()
        .map(|&rate| ScenarioConfig::new(5, rate, 5, 1234))
        .collect();

    println!("5 validators, 4 clients, 5 simulated seconds per cell\n");
    let (csv, reports) = sweep(&cells).expect("valid configs");
    println!("{csv}");
    assert!(csv.starts_with(SUMMARY_HEADER));

    // Below saturation the chain keeps up with the offered rate; above it
    // the achieved rate pins to the block-size x epoch-rate capacity.
    let achieved: Vec<f64> = reports.iter().map(|r| r.summary.achieved_tps).collect();
    for pair in achieved.windows(2) {
        assert!(pair[1] >= pair[0] - 1.0, "throughput must not regress: {achieved:?}");
    }
    let last = *achieved.last().unwrap();
    let second_last = achieved[achieved.len() - 2];
    println!(
        "saturation plateau: {last:.1} tps (offered {} and {} achieve within {:.1}%)",
        rates[rates.len() - 2],
        rates[rates.len() - 1],
        (second_last - last).abs() / last * 100.0
    );
    println!(
        "capacity = max_block_txs ({}) x epoch rate; raise --max-block-txs to move the plateau",
        cells[0].max_block_txs
    );
}
