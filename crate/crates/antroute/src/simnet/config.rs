//! Simulation input formats: network graph, workload and fault injection.
//!
//! Both file formats are TOML. A network file names the nodes, their flat
//! forwarding fees, the directed channel balances, the link latency model
//! and the run's RNG seed:
//!
//! ```toml
//! rng_seed = 42
//! latency_ms = 10.0            # or latency_ms = [5.0, 20.0] for uniform
//!
//! [[nodes]]
//! id = 1
//! fee = 10
//!
//! [[channels]]
//! a = 1
//! b = 2
//! balance_ab = 1000
//! balance_ba = 1000
//! ```
//!
//! A workload file lists payments explicitly or describes a Poisson
//! generator (see [`WorkloadConfig`]).

use serde::{Deserialize, Serialize};

use crate::protocol::{CheaterMode, NodeId, SelectionPolicy};
use crate::time::{SimTime, BUCKET_WIDTH};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("network has no nodes")]
    NoNodes,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("channel {index} ({a} <-> {b}) references unknown node {unknown}")]
    UnknownChannelEndpoint {
        index: usize,
        a: NodeId,
        b: NodeId,
        unknown: NodeId,
    },
    #[error("channel {index} connects node {node} to itself")]
    SelfChannel { index: usize, node: NodeId },
    #[error("duplicate channel between {a} and {b}")]
    DuplicateChannel { a: NodeId, b: NodeId },
    #[error("channel {index} capacity exceeds the 32-bit balance range")]
    ChannelCapacityOverflow { index: usize },
    #[error("node {node} has {count} channels; at most 255 are supported")]
    TooManyNeighbors { node: NodeId, count: usize },
    #[error("latency bounds must be non-negative and ordered")]
    BadLatency,
    #[error("seed lifetime must be a positive multiple of 0.1 s")]
    BadLifetime,
    #[error("payment {index} references unknown node {node}")]
    UnknownPaymentNode { index: usize, node: NodeId },
    #[error("payment {index} invalid: {reason}")]
    BadPayment { index: usize, reason: String },
    #[error("workload generator invalid: {0}")]
    BadGenerator(String),
    #[error("fault config references unknown node {0}")]
    UnknownFaultNode(NodeId),
}

/// Link delay model; milliseconds in the file, exact microseconds inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatencySpec {
    ConstantMs(f64),
    UniformMs([f64; 2]),
}

impl Default for LatencySpec {
    fn default() -> Self {
        LatencySpec::ConstantMs(10.0)
    }
}

impl LatencySpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match *self {
            LatencySpec::ConstantMs(ms) if ms.is_finite() && ms >= 0.0 => Ok(()),
            LatencySpec::UniformMs([lo, hi])
                if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi =>
            {
                Ok(())
            }
            _ => Err(ConfigError::BadLatency),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    /// Flat fee this node charges for forwarding a payment.
    #[serde(default)]
    pub fee: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub a: NodeId,
    pub b: NodeId,
    /// Spendable balance in the a -> b direction.
    pub balance_ab: u32,
    /// Spendable balance in the b -> a direction.
    pub balance_ba: u32,
}

/// The channel graph plus run-level settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub latency_ms: LatencySpec,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
}

impl NetworkConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: NetworkConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Structural checks; the graph may legitimately be disconnected.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes.is_empty() {
            return Err(ConfigError::NoNodes);
        }
        self.latency_ms.validate()?;
        let mut ids = std::collections::BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id) {
                return Err(ConfigError::DuplicateNode(node.id));
            }
        }
        let mut pairs = std::collections::BTreeSet::new();
        let mut degree = std::collections::BTreeMap::<NodeId, usize>::new();
        for (index, ch) in self.channels.iter().enumerate() {
            if ch.a == ch.b {
                return Err(ConfigError::SelfChannel { index, node: ch.a });
            }
            for endpoint in [ch.a, ch.b] {
                if !ids.contains(&endpoint) {
                    return Err(ConfigError::UnknownChannelEndpoint {
                        index,
                        a: ch.a,
                        b: ch.b,
                        unknown: endpoint,
                    });
                }
            }
            // Settlement moves value between the two directed balances;
            // their sum must stay representable.
            if u64::from(ch.balance_ab) + u64::from(ch.balance_ba) > u64::from(u32::MAX) {
                return Err(ConfigError::ChannelCapacityOverflow { index });
            }
            let key = (ch.a.min(ch.b), ch.a.max(ch.b));
            if !pairs.insert(key) {
                return Err(ConfigError::DuplicateChannel { a: key.0, b: key.1 });
            }
            *degree.entry(ch.a).or_default() += 1;
            *degree.entry(ch.b).or_default() += 1;
        }
        for (node, count) in degree {
            if count > 255 {
                return Err(ConfigError::TooManyNeighbors { node, count });
            }
        }
        Ok(())
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id).collect()
    }
}

/// One payment to schedule; seed and counter start are drawn from the
/// run's RNG when the workload is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaymentSpec {
    pub payer: NodeId,
    pub payee: NodeId,
    pub amount: u32,
    pub max_fees: u32,
    /// Seconds from simulation start.
    pub start_time: f64,
}

/// Poisson arrivals with uniformly random endpoint pairs and amounts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Mean arrivals per second.
    pub rate: f64,
    /// Seconds of arrivals to generate.
    pub duration: f64,
    /// Inclusive amount range.
    pub amount: [u32; 2],
    pub max_fees: u32,
}

/// Either an explicit payment list or a generator description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorkloadConfig {
    #[serde(default)]
    pub payments: Vec<PaymentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

impl WorkloadConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

/// Node misbehavior and link loss to inject into a run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultConfig {
    #[serde(default)]
    pub cheaters: Vec<CheaterSpec>,
    /// Probability that any single delivery is lost.
    #[serde(default)]
    pub drop_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheaterSpec {
    pub node: NodeId,
    pub mode: CheaterMode,
}

/// Protocol and payer-controller timing knobs, uniform across nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Seed lifetime in seconds; positive multiple of 0.1.
    pub lifetime_secs: f64,
    /// Length of the payer's initial check list.
    pub initial_checks: usize,
    /// Length of the fresh list appended for the counter check round.
    pub follow_up_checks: usize,
    pub policy: SelectionPolicy,
    /// How long the payer collects matches before selecting a route.
    pub match_wait_secs: f64,
    /// How long the payer waits for each payee response before moving on
    /// to the next candidate.
    pub response_timeout_secs: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            lifetime_secs: 2.0,
            initial_checks: 4,
            follow_up_checks: 4,
            policy: SelectionPolicy::default(),
            match_wait_secs: 1.0,
            response_timeout_secs: 0.5,
        }
    }
}

impl SimParams {
    pub fn lifetime(&self) -> SimTime {
        SimTime::from_secs_f64(self.lifetime_secs)
    }

    pub fn match_wait(&self) -> SimTime {
        SimTime::from_secs_f64(self.match_wait_secs)
    }

    pub fn response_timeout(&self) -> SimTime {
        SimTime::from_secs_f64(self.response_timeout_secs)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let lifetime = self.lifetime();
        if lifetime.as_micros() == 0 || !lifetime.is_bucket_aligned() {
            return Err(ConfigError::BadLifetime);
        }
        let _ = BUCKET_WIDTH;
        if self.follow_up_checks == 0 {
            return Err(ConfigError::BadGenerator(
                "follow_up_checks must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
