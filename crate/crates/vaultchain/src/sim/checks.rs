//! Trace-level safety and liveness verdicts.

use std::collections::BTreeMap;

use super::trace::{NodeId, TraceLog};
use crate::types::Hash32;

/// Safety: no height at which two honest nodes decided different blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyVerdict {
    pub ok: bool,
    /// Violating heights with every distinct block hash decided there.
    pub violations: Vec<(u64, Vec<Hash32>)>,
}

pub fn check_safety(trace: &TraceLog, honest: &[NodeId]) -> SafetyVerdict {
    let mut by_height: BTreeMap<u64, Vec<Hash32>> = BTreeMap::new();
    for (node, height, _epoch, block, _t) in trace.decisions() {
        if !honest.contains(&node) {
            continue;
        }
        let hashes = by_height.entry(height).or_default();
        if !hashes.contains(&block) {
            hashes.push(block);
        }
    }
    let violations: Vec<(u64, Vec<Hash32>)> = by_height
        .into_iter()
        .filter(|(_, hashes)| hashes.len() > 1)
        .collect();
    SafetyVerdict {
        ok: violations.is_empty(),
        violations,
    }
}

/// Liveness: under synchrony, every honest node's decided height must grow
/// within every `window_ms` window of the run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LivenessVerdict {
    pub ok: bool,
    /// `(node, window_start_ms)` pairs with no decision inside the window.
    pub stalled: Vec<(NodeId, u64)>,
}

pub fn check_liveness(
    trace: &TraceLog,
    honest: &[NodeId],
    window_ms: u64,
    until_ms: u64,
) -> LivenessVerdict {
    assert!(window_ms > 0, "window must be positive");
    let mut stalled = Vec::new();
    for &node in honest {
        let mut decide_times: Vec<u64> = trace
            .decisions()
            .filter(|(n, ..)| *n == node)
            .map(|(.., t)| t)
            .collect();
        decide_times.sort_unstable();
        let mut window_start = 0u64;
        while window_start + window_ms <= until_ms {
            let end = window_start + window_ms;
            let hit = decide_times
                .iter()
                .any(|&t| t >= window_start && t < end);
            if !hit {
                stalled.push((node, window_start));
            }
            window_start = end;
        }
    }
    LivenessVerdict {
        ok: stalled.is_empty(),
        stalled,
    }
}
