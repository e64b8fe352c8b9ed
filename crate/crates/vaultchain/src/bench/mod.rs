//! Scenario runner reproducing the delay/throughput evaluation methodology
//! at desk scale, plus the end-to-end attestation demo.
//!
//! A scenario drives a simulated network of validators and client nodes:
//! clients submit signed transfers at a fixed offered rate (evenly spaced,
//! seed-jittered), the run records per-transaction submit/package/decide
//! timestamps, and the report summarizes processing delay, confirmation
//! delay, consensus latency, and achieved throughput. Sweeps run a grid of
//! scenarios and emit one CSV row per cell. Everything is deterministic in
//! `(seed, config)`.

pub mod genesis;
pub mod metrics;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::crypto::sha256;
use crate::ledger::Ledger;
use crate::membership::{max_faulty, ValidatorSet};
use crate::sim::{ByzantineStrategy, LinkModel, NodeId, SimConfig, Simulation, TraceLog};
use crate::types::{AttestationReport, Hash32};
use crate::vault::verify_report;

pub use genesis::{GenesisError, GenesisRecord, GenesisSpec, NodeRole};
pub use metrics::{MetricsReport, Summary, TxRecord, SUMMARY_HEADER};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("validators must be at least 1")]
    NoValidators,
    #[error("validators ({validators}) exceed total nodes ({nodes})")]
    TooFewNodes { nodes: usize, validators: usize },
    #[error("byzantine count {byzantine} exceeds tolerated maximum {max} for {validators} validators")]
    TooManyByzantine {
        byzantine: usize,
        max: usize,
        validators: usize,
    },
    #[error("offered rate {0} tps needs at least one non-consensus client node")]
    NoClients(u64),
}

/// One benchmark cell: network size, offered load, fault injection, link
/// model, and seed.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub nodes: usize,
    pub validators: usize,
    pub rate_tps: u64,
    pub duration_s: u64,
    pub byzantine: usize,
    pub strategy: ByzantineStrategy,
    pub seed: u64,
    pub link: LinkModel,
    pub max_block_txs: usize,
    pub base_timeout_ms: u64,
}

impl ScenarioConfig {
    /// Desk-scale defaults: four client nodes, 5/2 ms links, no faults, and
    /// a block cap sized so saturation lands in the ~150-200 TPS range.
    pub fn new(validators: usize, rate_tps: u64, duration_s: u64, seed: u64) -> Self {
        ScenarioConfig {
            nodes: validators + 4,
            validators,
            rate_tps,
            duration_s,
            byzantine: 0,
            strategy: ByzantineStrategy::Silent,
            seed,
            link: LinkModel::default(),
            max_block_txs: 8,
            base_timeout_ms: 250,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.validators == 0 {
            return Err(ConfigError::NoValidators);
        }
        if self.validators > self.nodes {
            return Err(ConfigError::TooFewNodes {
                nodes: self.nodes,
                validators: self.validators,
            });
        }
        let max = max_faulty(self.validators);
        if self.byzantine > max {
            return Err(ConfigError::TooManyByzantine {
                byzantine: self.byzantine,
                max,
                validators: self.validators,
            });
        }
        if self.rate_tps > 0 && self.nodes == self.validators {
            return Err(ConfigError::NoClients(self.rate_tps));
        }
        Ok(())
    }

    /// Designated faulty validators: the last `byzantine` committee seats.
    fn byzantine_assignment(&self) -> Vec<(NodeId, ByzantineStrategy)> {
        (self.validators - self.byzantine..self.validators)
            .map(|id| (id, self.strategy))
            .collect()
    }

    fn sim_config(&self) -> SimConfig {
        let mut cfg = SimConfig::new(self.validators, self.nodes - self.validators, self.seed);
        cfg.link = self.link;
        cfg.byzantine = self.byzantine_assignment();
        cfg.base_timeout_ms = self.base_timeout_ms;
        cfg.max_block_txs = self.max_block_txs;
        cfg
    }

    /// Genesis description matching what the simulation seeds internally.
    pub fn genesis_spec(&self) -> GenesisSpec {
        let sim = Simulation::new(self.sim_config());
        let mut records = Vec::with_capacity(self.nodes);
        for id in 0..self.nodes {
            let role = if id < self.validators {
                NodeRole::Validator
            } else {
                NodeRole::Client
            };
            let address = sim.address_of(id);
            let public_key = sim
                .genesis_state()
                .public_key(&address)
                .expect("genesis accounts are keyed");
            let stake = if id < self.validators {
                1_000_000 - id as u64
            } else {
                0
            };
            records.push(GenesisRecord {
                address,
                public_key,
                stake,
                role,
            });
        }
        GenesisSpec {
            initial_balance: 1_000_000_000,
            records,
        }
    }
}

/// Snapshot of one honest validator's final chain position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSummary {
    pub node: NodeId,
    pub height: u64,
    pub head_hash: Hash32,
    pub state_root: Hash32,
}

/// Everything a finished scenario yields: metrics, the full trace, final
/// honest-validator ledgers, and the committee for replay verification.
pub struct ScenarioRun {
    pub metrics: MetricsReport,
    pub trace: TraceLog,
    pub nodes: Vec<NodeSummary>,
    pub ledgers: Vec<(NodeId, Ledger)>,
    pub committee: ValidatorSet,
    pub genesis_state: crate::ledger::WorldState,
}

/// Simulated-time grace after the offered-load window so in-flight
/// transactions can confirm before the report is cut.
const DRAIN_GRACE_MS: u64 = 2_000;

/// Runs one scenario to completion and builds its metrics report.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, ConfigError> {
    config.validate()?;
    let mut sim = Simulation::new(config.sim_config());

    let clients: Vec<NodeId> = (config.validators..config.nodes).collect();
    let total_txs = config.rate_tps * config.duration_s;
    if total_txs > 0 {
        let mut jitter =
            ChaCha20Rng::from_seed(sha256(format!("txsched:{}", config.seed).as_bytes()).0);
        for j in 0..total_txs {
            let client = clients[(j % clients.len() as u64) as usize];
            let to = sim.address_of((j % config.validators as u64) as usize);
            let tx = sim.build_transfer(client, to, 1);
            let at = j * 1000 / config.rate_tps + jitter.gen_range(0..=3);
            sim.schedule_transaction(client, at, tx);
        }
    }

    sim.run(config.duration_s * 1000 + DRAIN_GRACE_MS);

    let metrics = MetricsReport::from_times(
        &sim.delays().confirmed(),
        sim.delays().submitted_count(),
        config.validators,
        config.rate_tps,
        config.duration_s,
        config.seed,
    );
    let mut nodes = Vec::new();
    let mut ledgers = Vec::new();
    for &id in sim.honest_validators() {
        let ledger = sim
            .validator_ledger(id)
            .expect("honest validators have ledgers");
        nodes.push(NodeSummary {
            node: id,
            height: ledger.height(),
            head_hash: ledger.head_hash(),
            state_root: ledger.state_root(),
        });
        ledgers.push((id, ledger.clone()));
    }
    let committee = sim.committee().clone();
    let genesis_state = sim.genesis_state().clone();
    Ok(ScenarioRun {
        metrics,
        trace: sim.take_trace(),
        nodes,
        ledgers,
        committee,
        genesis_state,
    })
}

/// Re-runs a scenario from `(seed, config)`. Determinism makes the result
/// bit-identical to the original run.
pub fn replay(config: &ScenarioConfig) -> Result<ScenarioRun, ConfigError> {
    run_scenario(config)
}

/// Runs a grid of scenarios and renders one summary CSV row per cell.
pub fn sweep(configs: &[ScenarioConfig]) -> Result<(String, Vec<MetricsReport>), ConfigError> {
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    let mut reports = Vec::with_capacity(configs.len());
    for config in configs {
        let run = run_scenario(config)?;
        csv.push_str(&run.metrics.summary_csv_row());
        csv.push('\n');
        reports.push(run.metrics);
    }
    Ok((csv, reports))
}

/// Outcome of the three-step attestation check.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AttestVerdict {
    /// Local code hash matches the on-chain report and both verify.
    Intact,
    /// The code measured locally differs from the published report.
    Tampered,
    /// The publication transaction has not been decided yet; retry later.
    Pending,
}

impl std::fmt::Display for AttestVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttestVerdict::Intact => "INTACT",
            AttestVerdict::Tampered => "TAMPERED",
            AttestVerdict::Pending => "PENDING",
        })
    }
}

#[derive(Clone, Debug)]
pub struct AttestDemoReport {
    pub verdict: AttestVerdict,
    pub task_code_hash: Hash32,
    pub local_code_hash: Hash32,
    pub decided_height: Option<u64>,
}

/// Compares a locally produced attestation report with the on-chain one for
/// the same task.
pub fn attest_compare(
    onchain: Option<&AttestationReport>,
    local: &AttestationReport,
) -> AttestVerdict {
    match onchain {
        None => AttestVerdict::Pending,
        Some(report) => {
            if verify_report(report, None)
                && verify_report(local, None)
                && report.code_hash == local.code_hash
            {
                AttestVerdict::Intact
            } else {
                AttestVerdict::Tampered
            }
        }
    }
}

/// End-to-end attestation demo on a small simulated network.
///
/// Publishes the code's attestation report on chain via a transaction,
/// waits for the containing block to be decided, re-attests the (optionally
/// tampered) local copy, and compares the two reports. `run_ms` bounds the
/// simulated wait; a too-small budget yields `Pending`.
pub fn attest_demo(
    code: &[u8],
    tamper_offset: Option<usize>,
    seed: u64,
    run_ms: u64,
) -> AttestDemoReport {
    let mut cfg = SimConfig::new(4, 1, seed);
    cfg.max_block_txs = 8;
    let mut sim = Simulation::new(cfg);
    let device: NodeId = 4;

    // Step 1: publish the task's attestation report on the chain.
    let published = sim.client_attest(device, code);
    let task_code_hash = published.code_hash;
    let tx = sim.build_publish(device, published);
    sim.schedule_transaction(device, 10, tx);
    sim.run(run_ms);

    // Step 2: attest the local (possibly tampered) copy in the vault.
    let mut local_code = code.to_vec();
    if let Some(offset) = tamper_offset {
        if !local_code.is_empty() {
            let at = offset % local_code.len();
            local_code[at] ^= 0x01;
        }
    }
    let local = sim.client_attest(device, &local_code);

    // Step 3: fetch the on-chain report for the task and compare.
    let honest = sim.honest_validators()[0];
    let ledger = sim.validator_ledger(honest).expect("validator ledger");
    let onchain = ledger.state().lookup_report(&task_code_hash);
    let decided_height = onchain.map(|_| ledger.height());
    let verdict = attest_compare(onchain, &local);
    AttestDemoReport {
        verdict,
        task_code_hash,
        local_code_hash: local.code_hash,
        decided_height,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_invariants_are_enforced() {
        let mut cfg = ScenarioConfig::new(4, 10, 1, 1);
        cfg.byzantine = 2; // max_faulty(4) == 1
        assert_eq!(
            cfg.validate(),
            Err(ConfigError::TooManyByzantine {
                byzantine: 2,
                max: 1,
                validators: 4
            })
        );

        let mut cfg = ScenarioConfig::new(4, 10, 1, 1);
        cfg.nodes = 4;
        assert_eq!(cfg.validate(), Err(ConfigError::NoClients(10)));

        let mut cfg = ScenarioConfig::new(4, 0, 1, 1);
        cfg.nodes = 3;
        assert!(matches!(cfg.validate(), Err(ConfigError::TooFewNodes { .. })));
    }

    #[test]
    fn small_scenario_confirms_offered_load() {
        let config = ScenarioConfig::new(4, 20, 2, 11);
        let run = run_scenario(&config).unwrap();
        assert_eq!(run.metrics.submitted, 40);
        assert_eq!(run.metrics.confirmed(), 40, "ample capacity confirms all");
        let achieved = run.metrics.summary.achieved_tps;
        assert!((achieved - 20.0).abs() <= 1.0, "achieved {achieved}");
        for r in &run.metrics.records {
            assert!(r.submit_ms <= r.package_ms && r.package_ms <= r.decide_ms);
        }
        // Every honest validator ends on the same head.
        let heads: std::collections::HashSet<Hash32> =
            run.nodes.iter().map(|n| n.head_hash).collect();
        assert_eq!(heads.len(), 1);
    }

    #[test]
    fn zero_load_still_grows_the_chain() {
        let config = ScenarioConfig::new(4, 0, 2, 3);
        let run = run_scenario(&config).unwrap();
        assert_eq!(run.metrics.confirmed(), 0);
        assert_eq!(run.metrics.summary.achieved_tps, 0.0);
        assert!(run.nodes.iter().all(|n| n.height > 10));
    }

    #[test]
    fn replay_reproduces_reports_bit_identically() {
        let mut config = ScenarioConfig::new(4, 25, 1, 99);
        config.byzantine = 1;
        config.strategy = ByzantineStrategy::Equivocate;
        let a = run_scenario(&config).unwrap();
        let b = replay(&config).unwrap();
        assert_eq!(a.trace.serialize(), b.trace.serialize());
        assert_eq!(a.metrics.records_csv(), b.metrics.records_csv());
        assert_eq!(a.metrics.summary_csv_row(), b.metrics.summary_csv_row());
    }

    #[test]
    fn sweep_emits_one_row_per_cell() {
        let cells: Vec<ScenarioConfig> = [5u64, 10]
            .iter()
            .map(|rate| ScenarioConfig::new(4, *rate, 1, 5))
            .collect();
        let (csv, reports) = sweep(&cells).unwrap();
        assert_eq!(reports.len(), 2);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], SUMMARY_HEADER);
    }

    #[test]
    fn attest_demo_detects_tampering() {
        let code = b"task binary: matrix multiply kernel v2".to_vec();
        let intact = attest_demo(&code, None, 7, 3_000);
        assert_eq!(intact.verdict, AttestVerdict::Intact);
        assert!(intact.decided_height.is_some());

        let tampered = attest_demo(&code, Some(13), 7, 3_000);
        assert_eq!(tampered.verdict, AttestVerdict::Tampered);
        assert_ne!(tampered.local_code_hash, tampered.task_code_hash);

        // Not enough simulated time for the publication to decide.
        let pending = attest_demo(&code, None, 7, 5);
        assert_eq!(pending.verdict, AttestVerdict::Pending);
    }

    #[test]
    fn genesis_spec_matches_simulation_seeding() {
        let config = ScenarioConfig::new(3, 0, 1, 21);
        let spec = config.genesis_spec();
        assert_eq!(spec.records.len(), config.nodes);
        assert_eq!(spec.validator_count(), 3);
        let text = spec.to_text();
        let parsed = GenesisSpec::from_text(&text).unwrap();
        assert_eq!(parsed, spec);
        // The derived committee matches the scenario's.
        let run = run_scenario(&config).unwrap();
        let committee = crate::membership::select_committee(&spec.stake_ledger(), 3).unwrap();
        assert_eq!(committee, run.committee);
    }
}
