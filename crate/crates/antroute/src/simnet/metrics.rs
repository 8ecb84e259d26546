//! Run results: per-payment outcomes, network-wide message accounting and
//! per-node store statistics.
//!
//! Everything serializes with a stable field order so repeated runs of the
//! same configuration diff byte-for-byte.

use serde::Serialize;

use crate::protocol::NodeId;

use super::config::{FaultConfig, LatencySpec, SimParams};

/// Why a payment did not settle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentFailure {
    /// An endpoint had no channel that could carry the amount.
    Unroutable,
    /// No match ever reached the payer.
    NoRoute,
    /// Every delivered candidate was tried and failed.
    CandidatesExhausted,
    /// A channel on the route lacked balance at settlement time.
    SettleFailed,
    /// The run's horizon cut the payment short.
    HorizonReached,
}

/// One route candidate as it reached the payer, with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeliveredMatch {
    pub match_id: u64,
    pub total_counter: u8,
    pub total_fees: u32,
    /// Hop count the candidate advertises: intermediaries + 1.
    pub hops: u32,
    /// Seconds after the payment started that the candidate arrived.
    pub delivered_after_secs: f64,
    /// Sum of fees along the actual match path (simulator ground truth);
    /// `None` when the trace did not complete inside the run.
    pub ground_truth_fees: Option<u64>,
    /// Node count of the actual match path, when fully traced.
    pub ground_truth_path_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentMetrics {
    pub payment: usize,
    pub payer: NodeId,
    pub payee: NodeId,
    pub amount: u32,
    pub max_fees: u32,
    pub start_time_secs: f64,
    pub seed: u64,
    pub counter_start: u8,
    /// True if at least one match reached the payer.
    pub route_found: bool,
    pub settled: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<PaymentFailure>,
    /// Nodes on the settled path, endpoints included.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_length: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fees_paid: Option<u64>,
    /// Seconds from payment start to the first delivered match.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_match_latency_secs: Option<f64>,
    pub matches_delivered: usize,
    pub candidates_tried: u32,
    pub cheater_detections: u32,
    pub delivered: Vec<DeliveredMatch>,
}

/// Delivered wire messages by kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MessageCounts {
    pub pheromones: u64,
    pub matches: u64,
    pub confirmations: u64,
}

/// Every way a message can die, network-wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DropCounts {
    pub stale: u64,
    pub duplicate: u64,
    pub fee_exhausted: u64,
    pub counter_mismatch: u64,
    pub unknown_seed: u64,
    pub unknown_match: u64,
    pub check_mismatch: u64,
    pub counter_overflow: u64,
    pub decode_error: u64,
    pub link_loss: u64,
    pub cheater_refusals: u64,
    /// Counter-improving replacements that arrived after the conjugate;
    /// no second match is emitted for these.
    pub suppressed_rematches: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Totals {
    pub events_processed: u64,
    pub messages_delivered: MessageCounts,
    /// Sum of frame sizes over all delivered wire messages.
    pub bytes_sent: u64,
    /// Out-of-band payer/payee messages (not framed, not counted above).
    pub control_messages: u64,
    pub matches_created: u64,
    pub expired_records: u64,
    pub settle_failures: u64,
    pub cheater_detections: u64,
    pub drops: DropCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeMetrics {
    pub node: NodeId,
    pub peak_pheromone: usize,
    pub peak_match: usize,
    pub peak_confirmation: usize,
    pub pheromones_handled: u64,
    pub matches_handled: u64,
    pub confirmations_handled: u64,
}

/// Echo of everything that shaped the run, embedded for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveConfig {
    pub rng_seed: u64,
    pub latency_ms: LatencySpec,
    pub params: SimParams,
    pub faults: FaultConfig,
    pub horizon_secs: f64,
    pub nodes: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    /// Crate version that produced the report.
    pub version: String,
    pub config: EffectiveConfig,
    pub payments: Vec<PaymentMetrics>,
    pub totals: Totals,
    pub nodes: Vec<NodeMetrics>,
}

impl RunMetrics {
    /// Pretty JSON with a trailing newline; field order is declaration
    /// order, so output is byte-stable for a given configuration.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }

    /// One CSV row per payment. Column order is part of the interface:
    /// `payment,payer,payee,amount,max_fees,start_time_secs,route_found,settled,failure,path_length,fees_paid,first_match_ms,matches_delivered,candidates_tried,cheater_detections`
    pub fn payments_csv(&self) -> String {
        let mut out = String::from(
            "payment,payer,payee,amount,max_fees,start_time_secs,route_found,settled,failure,\
             path_length,fees_paid,first_match_ms,matches_delivered,candidates_tried,\
             cheater_detections\n",
        );
        for p in &self.payments {
            let failure = p
                .failure
                .map(|f| {
                    serde_json::to_value(f)
                        .expect("failure serializes")
                        .as_str()
                        .expect("failure is a string")
                        .to_string()
                })
                .unwrap_or_default();
            let path_length = p.path_length.map(|v| v.to_string()).unwrap_or_default();
            let fees_paid = p.fees_paid.map(|v| v.to_string()).unwrap_or_default();
            let first_match_ms = p
                .first_match_latency_secs
                .map(|v| format!("{:.3}", v * 1e3))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                p.payment,
                p.payer,
                p.payee,
                p.amount,
                p.max_fees,
                p.start_time_secs,
                p.route_found,
                p.settled,
                failure,
                path_length,
                fees_paid,
                first_match_ms,
                p.matches_delivered,
                p.candidates_tried,
                p.cheater_detections,
            ));
        }
        out
    }
}
