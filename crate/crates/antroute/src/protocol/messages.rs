//! The four wire payloads of the routing protocol and the payer-side types
//! built from them.

use serde::{Deserialize, Serialize};

use crate::seedstore::Direction;
use crate::time::{SimTime, WireTimestamp};

/// Identifies a node in the network graph.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A flooded discovery token: one direction of a seed, its hop counter,
/// the remaining fee budget, the amount and the seed timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PheromoneMessage {
    pub direction: Direction,
    pub seed: u64,
    pub counter: u8,
    pub remaining_fees: u32,
    pub amount: u32,
    pub timestamp: WireTimestamp,
}

/// A match retracing one seed direction hop by hop back to its originator.
///
/// `counter` decreases per hop and is checked against the stored pheromone
/// counter at every node; `total_counter` and `total_fees` ride along
/// unchanged for the payer's route selection. `total_counter` wraps modulo
/// 256 on the wire; the payer unwraps it against `2 * c0`, which is sound
/// while routes stay far shorter than 256 hops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchMessage {
    pub direction: Direction,
    pub seed: u64,
    pub match_id: u64,
    pub counter: u8,
    pub total_counter: u8,
    pub total_fees: u32,
    pub timestamp: WireTimestamp,
}

/// A confirmation (or counter-check) traveling payer-to-payee, carrying the
/// accumulating list of check integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfirmationMessage {
    pub match_id: u64,
    pub check_list: Vec<u64>,
    pub timestamp: WireTimestamp,
}

/// Any wire message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Pheromone(PheromoneMessage),
    Match(MatchMessage),
    Confirmation(ConfirmationMessage),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    Pheromone,
    Match,
    Confirmation,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Pheromone(_) => MessageKind::Pheromone,
            Message::Match(_) => MessageKind::Match,
            Message::Confirmation(_) => MessageKind::Confirmation,
        }
    }
}

/// One payment to route, as agreed between payer and payee before the
/// pheromone phase begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentRequest {
    pub payer: NodeId,
    pub payee: NodeId,
    /// Amount to transfer; ineligible channels are skipped during flooding.
    pub amount: u32,
    /// Fee budget each endpoint loads into its seed. The payer may end up
    /// owing up to twice this (both seeds spend fees), so it must stay
    /// below 2^31 for the wire's 4-byte fee fields.
    pub max_fees: u32,
    /// Shared hop-counter start, drawn uniformly from [64, 128) so that
    /// first-hop neighbors cannot tell they are adjacent to an endpoint.
    pub counter_start: u8,
    /// The shared random seed both endpoints derive their tokens from.
    pub seed: u64,
    pub start_time: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RequestError {
    #[error("payer and payee must differ")]
    SelfPayment,
    #[error("counter_start {0} outside [64, 128)")]
    CounterStart(u8),
    #[error("max_fees {0} exceeds 2^31 - 1")]
    FeeBudget(u32),
}

impl PaymentRequest {
    pub fn validate(&self) -> Result<(), RequestError> {
        if self.payer == self.payee {
            return Err(RequestError::SelfPayment);
        }
        if !(64..128).contains(&self.counter_start) {
            return Err(RequestError::CounterStart(self.counter_start));
        }
        if self.max_fees > i32::MAX as u32 {
            return Err(RequestError::FeeBudget(self.max_fees));
        }
        Ok(())
    }
}

/// A route proposal the payer can act on, read out of its special match
/// tree together with the derived quantities selection policies use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteCandidate {
    pub match_id: u64,
    /// First hop toward the payee.
    pub first_hop: NodeId,
    pub total_counter: u8,
    pub total_fees: u32,
    /// What the payer will actually pay: `2 * max_fees - total_fees`.
    pub fees_payable: u32,
    /// Number of intermediaries on the proposed route,
    /// `total_counter - 2 * counter_start` (mod 256).
    pub intermediary_count: u8,
}

/// How the payer picks among route candidates.
///
/// Both policies apply the privacy floor first: candidates with at least
/// two intermediaries win over shorter ones, falling back to everything
/// when none qualify. Ties break deterministically by match id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    /// Cheapest route: maximal remaining fees, then fewer hops.
    #[default]
    MaxRemainingFees,
    /// Shortest route: fewest hops, then maximal remaining fees.
    MinHops,
}

impl RouteCandidate {
    fn policy_key(&self, policy: SelectionPolicy) -> (u64, u64, u64) {
        match policy {
            // larger fees first, then smaller counter, then smaller id
            SelectionPolicy::MaxRemainingFees => (
                u64::from(u32::MAX - self.total_fees),
                u64::from(self.total_counter),
                self.match_id,
            ),
            SelectionPolicy::MinHops => (
                u64::from(self.intermediary_count),
                u64::from(u32::MAX - self.total_fees),
                self.match_id,
            ),
        }
    }
}

/// Picks the best candidate under `policy` with the privacy floor applied.
pub fn select_candidate(
    candidates: &[RouteCandidate],
    policy: SelectionPolicy,
) -> Option<RouteCandidate> {
    let floor: Vec<&RouteCandidate> = candidates
        .iter()
        .filter(|c| c.intermediary_count >= 2)
        .collect();
    let pool: Vec<&RouteCandidate> = if floor.is_empty() {
        candidates.iter().collect()
    } else {
        floor
    };
    pool.into_iter()
        .min_by_key(|c| c.policy_key(policy))
        .copied()
}
