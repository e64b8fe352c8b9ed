//! Per-transaction delay records and run summaries.
//!
//! Two delays matter per confirmed transaction: *processing* (submit until a
//! leader packages it into the decided block) and *confirmation* (submit
//! until that block's COMMIT decision). Their difference is the consensus
//! latency of the containing block.

use std::fmt::Write as _;

use crate::sim::TxTimes;
use crate::types::Hash32;

/// One confirmed transaction with its three timestamps (simulated ms).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxRecord {
    pub tx: Hash32,
    pub submit_ms: u64,
    pub package_ms: u64,
    pub decide_ms: u64,
}

impl TxRecord {
    pub fn processing_ms(&self) -> u64 {
        self.package_ms - self.submit_ms
    }

    pub fn confirmation_ms(&self) -> u64 {
        self.decide_ms - self.submit_ms
    }

    pub fn consensus_ms(&self) -> u64 {
        self.decide_ms - self.package_ms
    }
}

/// Aggregate statistics over one scenario run.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub validators: usize,
    pub offered_tps: u64,
    pub achieved_tps: f64,
    pub proc_mean_ms: f64,
    pub proc_p50_ms: f64,
    pub proc_p95_ms: f64,
    pub conf_mean_ms: f64,
    pub conf_p50_ms: f64,
    pub conf_p95_ms: f64,
    pub consensus_mean_ms: f64,
    pub seed: u64,
}

/// Full metrics output of one scenario run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub records: Vec<TxRecord>,
    pub submitted: usize,
    pub summary: Summary,
}

pub const SUMMARY_HEADER: &str = "validators,offered_tps,achieved_tps,proc_mean_ms,proc_p95_ms,conf_mean_ms,conf_p95_ms,consensus_mean_ms,seed";

fn mean(values: &[u64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|v| *v as f64).sum::<f64>() / values.len() as f64
}

/// Nearest-rank percentile over a sorted slice.
fn percentile(sorted: &[u64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1] as f64
}

impl MetricsReport {
    /// Builds a report from confirmed-transaction timestamps. Every record
    /// must satisfy `submit <= package <= decide`; violations are a harness
    /// bug and panic here rather than skewing results.
    pub fn from_times(
        times: &[TxTimes],
        submitted: usize,
        validators: usize,
        offered_tps: u64,
        duration_s: u64,
        seed: u64,
    ) -> MetricsReport {
        let records: Vec<TxRecord> = times
            .iter()
            .map(|t| {
                assert!(
                    t.submit_ms <= t.package_ms && t.package_ms <= t.decide_ms,
                    "delay ordering violated for tx {}",
                    t.tx
                );
                TxRecord {
                    tx: t.tx,
                    submit_ms: t.submit_ms,
                    package_ms: t.package_ms,
                    decide_ms: t.decide_ms,
                }
            })
            .collect();

        let mut proc: Vec<u64> = records.iter().map(TxRecord::processing_ms).collect();
        let mut conf: Vec<u64> = records.iter().map(TxRecord::confirmation_ms).collect();
        let cons: Vec<u64> = records.iter().map(TxRecord::consensus_ms).collect();
        let proc_mean = mean(&proc);
        let conf_mean = mean(&conf);
        let cons_mean = mean(&cons);
        proc.sort_unstable();
        conf.sort_unstable();

        let achieved = if duration_s == 0 {
            0.0
        } else {
            records.len() as f64 / duration_s as f64
        };
        MetricsReport {
            summary: Summary {
                validators,
                offered_tps,
                achieved_tps: achieved,
                proc_mean_ms: proc_mean,
                proc_p50_ms: percentile(&proc, 0.50),
                proc_p95_ms: percentile(&proc, 0.95),
                conf_mean_ms: conf_mean,
                conf_p50_ms: percentile(&conf, 0.50),
                conf_p95_ms: percentile(&conf, 0.95),
                consensus_mean_ms: cons_mean,
                seed,
            },
            submitted,
            records,
        }
    }

    pub fn confirmed(&self) -> usize {
        self.records.len()
    }

    /// The summary as one CSV row in the stable column order.
    pub fn summary_csv_row(&self) -> String {
        let s = &self.summary;
        format!(
            "{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{}",
            s.validators,
            s.offered_tps,
            s.achieved_tps,
            s.proc_mean_ms,
            s.proc_p95_ms,
            s.conf_mean_ms,
            s.conf_p95_ms,
            s.consensus_mean_ms,
            s.seed
        )
    }

    /// Per-transaction records as CSV (tx_id, submit_ms, package_ms,
    /// decide_ms).
    pub fn records_csv(&self) -> String {
        let mut out = String::from("tx_id,submit_ms,package_ms,decide_ms\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.tx, r.submit_ms, r.package_ms, r.decide_ms
            );
        }
        out
    }
}
