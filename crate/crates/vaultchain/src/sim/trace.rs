//! Ordered event trace of a simulation run.
//!
//! Every record serializes to one line with a stable six-column schema:
//! `time_ms  kind  src  dst  payload-hash  reason`. Sends, deliveries, and
//! link drops reference the same payload hash, so every delivery in a trace
//! can be matched to exactly one send.

use std::fmt::Write as _;

use crate::types::Hash32;

pub type NodeId = usize;

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum RecordKind {
    /// A message handed to the network, one record per point-to-point send.
    Send { class: &'static str },
    /// A message delivered to its destination.
    Deliver { class: &'static str },
    /// A message dropped by the link model.
    LinkDrop { class: &'static str },
    /// An input dropped by a node's state machine, with the reason code.
    Reject { reason: &'static str },
    /// A node decided a block.
    Decide { height: u64, epoch: u64 },
    /// A pacemaker deadline fired.
    TimeoutFired,
    /// A node entered an epoch with the given pacemaker budget.
    EpochEnter { epoch: u64, timeout_ms: u64 },
    /// A client created and submitted a transaction.
    TxSubmit,
    /// A leader packaged a transaction into the referenced block.
    TxPackage { block: Hash32 },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TraceRecord {
    pub time_ms: u64,
    pub kind: RecordKind,
    pub src: Option<NodeId>,
    pub dst: Option<NodeId>,
    pub payload: Hash32,
}

impl TraceRecord {
    fn write_line(&self, out: &mut String) {
        let _ = write!(out, "{}\t", self.time_ms);
        let detail: String;
        let kind: String;
        match &self.kind {
            RecordKind::Send { class } => {
                kind = format!("send:{class}");
                detail = String::new();
            }
            RecordKind::Deliver { class } => {
                kind = format!("recv:{class}");
                detail = String::new();
            }
            RecordKind::LinkDrop { class } => {
                kind = format!("drop:{class}");
                detail = String::new();
            }
            RecordKind::Reject { reason } => {
                kind = "reject".to_string();
                detail = (*reason).to_string();
            }
            RecordKind::Decide { height, epoch } => {
                kind = "decide".to_string();
                detail = format!("h={height};e={epoch}");
            }
            RecordKind::TimeoutFired => {
                kind = "timeout".to_string();
                detail = String::new();
            }
            RecordKind::EpochEnter { epoch, timeout_ms } => {
                kind = "epoch".to_string();
                detail = format!("e={epoch};to={timeout_ms}");
            }
            RecordKind::TxSubmit => {
                kind = "submit".to_string();
                detail = String::new();
            }
            RecordKind::TxPackage { block } => {
                kind = "package".to_string();
                detail = format!("b={block}");
            }
        }
        let _ = write!(out, "{kind}\t");
        match self.src {
            Some(id) => {
                let _ = write!(out, "{id}\t");
            }
            None => out.push_str("-\t"),
        }
        match self.dst {
            Some(id) => {
                let _ = write!(out, "{id}\t");
            }
            None => out.push_str("-\t"),
        }
        let _ = write!(out, "{}\t{detail}\n", self.payload);
    }
}

/// Complete ordered record of one simulation run.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct TraceLog {
    pub records: Vec<TraceRecord>,
}

impl TraceLog {
    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Newline-delimited serialization; byte-identical across replays of the
    /// same scenario.
    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 64);
        for record in &self.records {
            record.write_line(&mut out);
        }
        out
    }

    /// Decide events as `(node, height, epoch, block, time)` tuples.
    pub fn decisions(&self) -> impl Iterator<Item = (NodeId, u64, u64, Hash32, u64)> + '_ {
        self.records.iter().filter_map(|r| match r.kind {
            RecordKind::Decide { height, epoch } => {
                Some((r.src.unwrap_or(usize::MAX), height, epoch, r.payload, r.time_ms))
            }
            _ => None,
        })
    }

    /// Number of consensus-protocol sends (transaction gossip excluded).
    pub fn consensus_send_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r.kind, RecordKind::Send { class } if class != "tx"))
            .count()
    }

    pub fn count_kind(&self, pred: impl Fn(&RecordKind) -> bool) -> usize {
        self.records.iter().filter(|r| pred(&r.kind)).count()
    }
}
