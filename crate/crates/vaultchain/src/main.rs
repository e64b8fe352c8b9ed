//! Benchmark and scenario CLI.
//!
//! Subcommands: `run` (one scenario), `sweep` (a validators x rates grid),
//! `replay` (re-run a scenario twice and verify bit-identical output), and
//! `attest-demo` (the three-step code-attestation protocol end to end).

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vaultchain::bench::{
    self, attest_demo, replay, run_scenario, ScenarioConfig, ScenarioRun, SUMMARY_HEADER,
};
use vaultchain::sim::{ByzantineStrategy, LinkModel};

#[derive(Parser)]
#[command(
    name = "vaultchain",
    about = "Deterministic consensus-network benchmark runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Total nodes (validators + non-consensus clients).
    #[arg(long)]
    nodes: Option<usize>,
    /// Consensus committee size.
    #[arg(long, default_value_t = 5)]
    validators: usize,
    /// Offered transaction rate in transactions per second.
    #[arg(long, default_value_t = 50)]
    rate: u64,
    /// Offered-load window in simulated seconds.
    #[arg(long, default_value_t = 10)]
    duration: u64,
    /// Number of designated Byzantine validators (at most floor((n-1)/3)).
    #[arg(long, default_value_t = 0)]
    byzantine: usize,
    /// Byzantine strategy: silent, equivocate, withhold-votes,
    /// delay-all[:ms], random-junk.
    #[arg(long, default_value = "silent")]
    strategy: ByzantineStrategy,
    /// Run seed; everything is deterministic in (seed, config).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fixed per-link delay in milliseconds.
    #[arg(long, default_value_t = 5)]
    base_delay_ms: u64,
    /// Uniform extra delay in 0..=jitter milliseconds per message.
    #[arg(long, default_value_t = 2)]
    jitter_ms: u64,
    /// Per-message drop probability in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    drop_prob: f64,
    /// Maximum transactions packaged per block.
    #[arg(long, default_value_t = 8)]
    max_block_txs: usize,
    /// Pacemaker base timeout in simulated milliseconds.
    #[arg(long, default_value_t = 250)]
    base_timeout_ms: u64,
}

impl ScenarioArgs {
    fn config(&self, rate: u64, validators: usize) -> ScenarioConfig {
        let mut config = ScenarioConfig::new(validators, rate, self.duration, self.seed);
        if let Some(nodes) = self.nodes {
            config.nodes = nodes;
        }
        config.byzantine = self.byzantine;
        config.strategy = self.strategy;
        config.link = LinkModel {
            base_delay_ms: self.base_delay_ms,
            jitter_ms: self.jitter_ms,
            drop_probability: self.drop_prob,
        };
        config.max_block_txs = self.max_block_txs;
        config.base_timeout_ms = self.base_timeout_ms;
        config
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its summary.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the summary CSV (header + one row) here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-transaction records CSV here.
        #[arg(long)]
        tx_out: Option<PathBuf>,
        /// Write the full event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the genesis file (text form) here.
        #[arg(long)]
        genesis_out: Option<PathBuf>,
    },
    /// Run a validators x rates grid and write one summary row per cell.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated committee sizes, e.g. 5,10,20.
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        validator_grid: Vec<usize>,
        /// Comma-separated offered rates, e.g. 5,10,50,100,200.
        #[arg(long, value_delimiter = ',', default_value = "5,10,50,100,200")]
        rate_grid: Vec<u64>,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario twice and verify the outputs are bit-identical.
    Replay {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the reproduced summary CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the reproduced trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Publish a code file's attestation on chain, then verify it locally.
    AttestDemo {
        /// Code file to attest.
        file: PathBuf,
        /// Flip one bit at this byte offset before the local re-attestation.
        #[arg(long)]
        tamper: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Simulated milliseconds to wait for the publication to decide.
        #[arg(long, default_value_t = 5000)]
        wait_ms: u64,
    },
}

fn print_summary(run: &ScenarioRun) {
    let s = &run.metrics.summary;
    println!("validators:          {}", s.validators);
    println!("offered rate:        {} tps", s.offered_tps);
    println!(
        "submitted/confirmed: {}/{}",
        run.metrics.submitted,
        run.metrics.confirmed()
    );
    println!("achieved throughput: {:.2} tps", s.achieved_tps);
    println!(
        "processing delay:    mean {:.2} ms, p50 {:.0} ms, p95 {:.0} ms",
        s.proc_mean_ms, s.proc_p50_ms, s.proc_p95_ms
    );
    println!(
        "confirmation delay:  mean {:.2} ms, p50 {:.0} ms, p95 {:.0} ms",
        s.conf_mean_ms, s.conf_p50_ms, s.conf_p95_ms
    );
    println!("consensus latency:   mean {:.2} ms", s.consensus_mean_ms);
    if let Some(node) = run.nodes.first() {
        println!(
            "chain:               height {}, head {}, state root {}",
            node.height,
            &node.head_hash.to_hex()[..16],
            &node.state_root.to_hex()[..16]
        );
    }
}

fn write_summary_csv(run: &ScenarioRun, path: &PathBuf) -> Result<()> {
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    csv.push_str(&run.metrics.summary_csv_row());
    csv.push('\n');
    fs::write(path, csv).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            tx_out,
            trace,
            genesis_out,
        } => {
            let config = scenario.config(scenario.rate, scenario.validators);
            if let Some(path) = &genesis_out {
                fs::write(path, config.genesis_spec().to_text())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let run = run_scenario(&config)?;
            print_summary(&run);
            if let Some(path) = &out {
                write_summary_csv(&run, path)?;
            }
            if let Some(path) = &tx_out {
                fs::write(path, run.metrics.records_csv())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(path) = &trace {
                fs::write(path, run.trace.serialize())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Sweep {
            scenario,
            validator_grid,
            rate_grid,
            out,
        } => {
            let mut cells = Vec::new();
            for &v in &validator_grid {
                for &r in &rate_grid {
                    cells.push(scenario.config(r, v));
                }
            }
            let (csv, _) = bench::sweep(&cells)?;
            match out {
                Some(path) => {
                    fs::write(&path, &csv)
                        .with_context(|| format!("writing {}", path.display()))?;
                    eprintln!("wrote {} rows to {}", cells.len(), path.display());
                }
                None => print!("{csv}"),
            }
        }
        Command::Replay {
            scenario,
            out,
            trace,
        } => {
            let config = scenario.config(scenario.rate, scenario.validators);
            let first = run_scenario(&config)?;
            let second = replay(&config)?;
            let traces_match = first.trace.serialize() == second.trace.serialize();
            let metrics_match = first.metrics.records_csv() == second.metrics.records_csv()
                && first.metrics.summary_csv_row() == second.metrics.summary_csv_row();
            if !traces_match || !metrics_match {
                bail!("replay diverged: traces_match={traces_match} metrics_match={metrics_match}");
            }
            println!(
                "replay OK: trace ({} records) and metrics reproduced bit-identically",
                second.trace.len()
            );
            print_summary(&second);
            if let Some(path) = &out {
                write_summary_csv(&second, path)?;
            }
            if let Some(path) = &trace {
                fs::write(path, second.trace.serialize())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::AttestDemo {
            file,
            tamper,
            seed,
            wait_ms,
        } => {
            let code =
                fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
            let report = attest_demo(&code, tamper, seed, wait_ms);
            println!("task code hash:  {}", report.task_code_hash);
            println!("local code hash: {}", report.local_code_hash);
            match report.decided_height {
                Some(h) => println!("on-chain report: decided (height {h})"),
                None => println!("on-chain report: not yet decided"),
            }
            println!("verdict: {}", report.verdict);
        }
    }
    Ok(())
}
