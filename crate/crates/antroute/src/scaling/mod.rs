//! Local workload, memory, bandwidth and collision models.
//!
//! The routing task costs a node tree operations whose duration grows with
//! the logarithm of the store size. With tasks arriving at `λ` per second
//! and records living `η` seconds spread over ten buckets per second, each
//! bucket tree holds about `λ/10` records; the models below turn measured
//! per-operation constants into the per-second workload and its ceiling.

pub mod bench;

use serde::{Deserialize, Serialize};

/// Reference constants measured on the original benchmark machine, used by
/// the `reproduce` report. Hardware-bound: your own numbers come from
/// [`bench::run_benchmarks`].
pub mod reference {
    /// Seconds per log2-unit of store size for one lookup.
    pub const ALPHA: f64 = 0.7e-6;
    /// Seconds per log2-unit of store size for one insertion.
    pub const BETA: f64 = 1.1e-6;
    /// Seconds per record for bulk tree deletion.
    pub const GAMMA: f64 = 8.2e-8;
    /// Worst-case lookups per routing task for a node of average degree.
    pub const LOOKUPS_PER_TASK: f64 = 8.0;
    /// Average matches received per routing task.
    pub const MATCHES_PER_TASK: f64 = 1.0;
    /// Probability that a node sees the confirmation of a given task.
    pub const CONFIRM_PROBABILITY: f64 = 0.0;
    /// The rate ceiling these constants produce.
    pub const LAMBDA_MAX: f64 = 12_500.0;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScalingError {
    #[error("rate must exceed 10 tx/s (got {0}); below that the per-bucket trees are empty")]
    RateTooLow(f64),
    #[error("{0} must be non-negative")]
    Negative(&'static str),
    #[error("confirm_probability {0} outside [0, 1]")]
    ProbabilityRange(f64),
}

/// Per-task cost model of one node.
///
/// `alpha`, `beta` and `gamma` are the measured per-operation constants;
/// `lookups_per_task` counts every tree lookup one routing task causes at
/// this node (the pheromone arrivals from its neighbors plus the single
/// match-tree lookup), `matches_per_task` the match insertions, and
/// `confirm_probability` how often the node sits on the confirmed route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadModel {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lookups_per_task: f64,
    pub matches_per_task: f64,
    pub confirm_probability: f64,
}

impl WorkloadModel {
    /// The reference-constant model.
    pub fn reference() -> Self {
        WorkloadModel {
            alpha: reference::ALPHA,
            beta: reference::BETA,
            gamma: reference::GAMMA,
            lookups_per_task: reference::LOOKUPS_PER_TASK,
            matches_per_task: reference::MATCHES_PER_TASK,
            confirm_probability: reference::CONFIRM_PROBABILITY,
        }
    }

    fn validate(&self) -> Result<(), ScalingError> {
        for (value, name) in [
            (self.alpha, "alpha"),
            (self.beta, "beta"),
            (self.gamma, "gamma"),
            (self.lookups_per_task, "lookups_per_task"),
            (self.matches_per_task, "matches_per_task"),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ScalingError::Negative(name));
            }
        }
        if !(0.0..=1.0).contains(&self.confirm_probability) {
            return Err(ScalingError::ProbabilityRange(self.confirm_probability));
        }
        Ok(())
    }

    /// Average seconds of local work one routing task costs at rate `rate`:
    ///
    /// ```text
    /// T(λ) = (p·α + β)·log2(λ/10)            pheromone lookups + 1 insert
    ///      + m·β·log2(m·λ/10)                match insertions
    ///      + c·(α + β)·log2(c·λ/10)          confirmation, when it comes
    /// ```
    ///
    /// with `p` = `lookups_per_task`, `m` = `matches_per_task` and `c` =
    /// `confirm_probability`; a term with zero weight contributes nothing
    /// (in particular `c = 0` removes the confirmation term entirely).
    pub fn task_time(&self, rate: f64) -> Result<f64, ScalingError> {
        self.validate()?;
        if !rate.is_finite() || rate <= 10.0 {
            return Err(ScalingError::RateTooLow(rate));
        }
        let per_bucket = rate / 10.0;
        let p = self.lookups_per_task;
        let m = self.matches_per_task;
        let c = self.confirm_probability;
        let mut t = (p * self.alpha + self.beta) * per_bucket.log2();
        if m > 0.0 {
            t += m * self.beta * (m * per_bucket).log2();
        }
        if c > 0.0 {
            t += c * (self.alpha + self.beta) * (c * per_bucket).log2();
        }
        Ok(t)
    }

    /// Seconds of work per second of wall time at rate `rate`:
    /// `T̂(λ) = λ·(T(λ) + γ·(1 + m + c))`, the task costs plus the rolling
    /// bucket cleanup of all three stores.
    pub fn total_time(&self, rate: f64) -> Result<f64, ScalingError> {
        let cleanup = self.gamma * (1.0 + self.matches_per_task + self.confirm_probability);
        Ok(rate * (self.task_time(rate)? + cleanup))
    }

    /// The largest rate a node keeps up with: the root of
    /// `total_time(λ) = 1`, found by bracketed bisection to a relative
    /// tolerance of 1e-6. `total_time` is strictly increasing on the model
    /// domain, so the root is unique.
    pub fn lambda_max(&self) -> Result<f64, LambdaMaxError> {
        self.validate().map_err(LambdaMaxError::InvalidModel)?;
        if self.alpha == 0.0 && self.beta == 0.0 && self.gamma == 0.0 {
            return Err(LambdaMaxError::ZeroCostModel);
        }
        let load = |rate: f64| self.total_time(rate).expect("domain pre-checked");

        let mut lo = 10.0 + 1e-9;
        if load(lo) >= 1.0 {
            return Err(LambdaMaxError::SaturatedBelowDomain);
        }
        let mut hi = 20.0;
        while load(hi) < 1.0 {
            hi *= 2.0;
            if hi > 1e9 {
                return Err(LambdaMaxError::Unbounded);
            }
        }
        while hi - lo > 1e-6 * hi {
            let mid = 0.5 * (lo + hi);
            if load(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LambdaMaxError {
    #[error(transparent)]
    InvalidModel(ScalingError),
    #[error("all per-operation costs are zero; the workload has no ceiling")]
    ZeroCostModel,
    #[error("no rate below 10^9 tx/s saturates the node; unbounded at this precision")]
    Unbounded,
    #[error("the node saturates below the model's 10 tx/s domain floor")]
    SaturatedBelowDomain,
}

/// Per-record sizes of the three stores, in bytes: a pheromone node keeps
/// the seed, both directions' counters/fees/senders, the amount and two
/// child pointers; match and confirmation nodes are smaller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordBytes {
    pub pheromone: u64,
    pub match_record: u64,
    pub confirmation: u64,
}

impl Default for RecordBytes {
    fn default() -> Self {
        RecordBytes {
            pheromone: 34,
            match_record: 25,
            confirmation: 33,
        }
    }
}

/// Inputs of the per-node memory bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryParams {
    /// Transactions per second.
    pub rate: f64,
    /// Seed lifetime in seconds.
    pub lifetime: f64,
    /// Matches received per routing task.
    pub matches_received: f64,
    pub record_bytes: RecordBytes,
}

/// Peak bytes a node dedicates to routing state:
/// `rate * lifetime * (pheromone + confirmation + match * matches_received)`.
///
/// One task leaves at most one pheromone record, one confirmation record
/// and `matches_received` match records alive, and `rate * lifetime` tasks
/// are alive at once.
pub fn memory_estimate(p: &MemoryParams) -> f64 {
    let per_task = p.record_bytes.pheromone as f64
        + p.record_bytes.confirmation as f64
        + p.record_bytes.match_record as f64 * p.matches_received;
    p.rate * p.lifetime * per_task
}

/// Inputs of the seed-collision estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionParams {
    /// Transactions per second.
    pub rate: f64,
    /// Seed lifetime in seconds.
    pub lifetime: f64,
    /// Width of the random seed in bits (8-byte seeds: 64).
    pub seed_bits: u32,
    /// Observation horizon in seconds.
    pub horizon_seconds: f64,
}

/// Result of [`collision_probability`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEstimate {
    /// Probability of at least one collision over the horizon.
    pub probability: f64,
    /// Birthday approximation of a collision among the live seeds at one
    /// instant: `n^2 / 2^(bits+1)` with `n = rate * lifetime`.
    pub instantaneous: f64,
    /// False when the live population is too large for the quadratic
    /// birthday approximation to be trusted.
    pub approximation_valid: bool,
}

/// Chance of two simultaneously live seeds colliding, compounded over a
/// horizon: `1 - (1 - p_inst)^horizon` with one independent trial per
/// second.
pub fn collision_probability(p: &CollisionParams) -> CollisionEstimate {
    let n = p.rate * p.lifetime;
    let instantaneous = n * n / 2f64.powi(p.seed_bits as i32 + 1);
    let horizon = p.horizon_seconds.max(0.0);
    // ln(1 - p) keeps precision where (1 - p) rounds to 1.
    let probability = 1.0 - (horizon * (-instantaneous).ln_1p()).exp();
    CollisionEstimate {
        probability,
        instantaneous,
        // Requires n well below 2^(bits/2): one percent of it here.
        approximation_valid: instantaneous <= 5e-5,
    }
}

/// Bytes per second a node spends relaying discovery traffic:
/// `rate * message_size`.
pub fn bandwidth_estimate(rate: f64, message_size_bytes: f64) -> f64 {
    rate * message_size_bytes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn task_time_reduces_to_the_shared_logarithm_form() {
        // With m = 1 and c = 0 both remaining terms share log2(rate/10),
        // so T(λ) = (p·α + 2β)·log2(λ/10).
        let model = WorkloadModel::reference();
        let rate = 12_500.0;
        let expected = (8.0 * 0.7e-6 + 2.0 * 1.1e-6) * (rate / 10.0_f64).log2();
        assert_relative_eq!(
            model.task_time(rate).unwrap(),
            expected,
            max_relative = 1e-12
        );
        assert_relative_eq!(expected, 8.03e-5, max_relative = 1e-2);
    }

    #[test]
    fn zero_confirm_probability_removes_the_third_term() {
        let with_c = WorkloadModel {
            confirm_probability: 0.5,
            ..WorkloadModel::reference()
        };
        let without_c = WorkloadModel::reference();
        assert!(with_c.task_time(1000.0).unwrap() > without_c.task_time(1000.0).unwrap());
        // c = 0 is the limit convention, not a singularity.
        assert!(without_c.task_time(1000.0).unwrap().is_finite());
    }

    #[test]
    fn reference_constants_saturate_near_twelve_and_a_half_thousand() {
        let model = WorkloadModel::reference();
        assert_relative_eq!(
            model.total_time(12_500.0).unwrap(),
            1.0,
            max_relative = 0.01
        );
        let lambda = model.lambda_max().unwrap();
        assert!(
            (11_875.0..=13_125.0).contains(&lambda),
            "lambda_max {lambda} outside the 5% window around 12500"
        );
        // Well below the ceiling the node idles.
        assert!(model.total_time(100.0).unwrap() < 0.05);
    }

    #[test]
    fn doubling_tree_costs_lowers_the_ceiling() {
        let base = WorkloadModel::reference();
        let doubled = WorkloadModel {
            alpha: 2.0 * base.alpha,
            beta: 2.0 * base.beta,
            ..base
        };
        assert!(doubled.lambda_max().unwrap() < base.lambda_max().unwrap());
    }

    #[test]
    fn cleanup_only_model_matches_closed_form() {
        // With α = β = 0: T̂(λ) = λ·γ·(1+m+c), so λ_max = 1/(γ·(1+m+c)).
        let model = WorkloadModel {
            alpha: 0.0,
            beta: 0.0,
            gamma: 8.2e-8,
            lookups_per_task: 8.0,
            matches_per_task: 1.0,
            confirm_probability: 0.5,
        };
        let closed_form = 1.0 / (8.2e-8 * 2.5);
        assert_relative_eq!(
            model.lambda_max().unwrap(),
            closed_form,
            max_relative = 1e-5
        );
    }

    #[test]
    fn total_time_is_strictly_increasing_on_the_domain() {
        let model = WorkloadModel::reference();
        let mut last = f64::MIN;
        let mut rate = 10.5;
        while rate < 1e7 {
            let t = model.total_time(rate).unwrap();
            assert!(t > last, "not increasing at rate {rate}");
            last = t;
            rate *= 1.5;
        }
    }

    #[test]
    fn domain_errors() {
        let model = WorkloadModel::reference();
        assert_eq!(model.task_time(10.0), Err(ScalingError::RateTooLow(10.0)));
        assert_eq!(model.task_time(3.0), Err(ScalingError::RateTooLow(3.0)));
        let bad = WorkloadModel {
            alpha: -1.0,
            ..model
        };
        assert_eq!(bad.task_time(100.0), Err(ScalingError::Negative("alpha")));
        let zero = WorkloadModel {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            lookups_per_task: 8.0,
            matches_per_task: 1.0,
            confirm_probability: 0.0,
        };
        assert_eq!(zero.lambda_max(), Err(LambdaMaxError::ZeroCostModel));
    }

    #[test]
    fn memory_estimate_endpoints() {
        let base = MemoryParams {
            rate: 10_000.0,
            lifetime: 2.0,
            matches_received: 0.0,
            record_bytes: RecordBytes::default(),
        };
        assert_relative_eq!(memory_estimate(&base), 1_340_000.0);
        let with_matches = MemoryParams {
            matches_received: 8.0,
            ..base
        };
        assert_relative_eq!(memory_estimate(&with_matches), 5_340_000.0);
    }

    #[test]
    fn memory_estimate_is_linear_in_each_argument() {
        let base = MemoryParams {
            rate: 10_000.0,
            lifetime: 2.0,
            matches_received: 4.0,
            record_bytes: RecordBytes::default(),
        };
        let double_rate = MemoryParams {
            rate: 20_000.0,
            ..base
        };
        assert_relative_eq!(memory_estimate(&double_rate), 2.0 * memory_estimate(&base));
        let double_lifetime = MemoryParams {
            lifetime: 4.0,
            ..base
        };
        assert_relative_eq!(
            memory_estimate(&double_lifetime),
            2.0 * memory_estimate(&base)
        );
    }

    #[test]
    fn large_match_counts_approach_half_a_megabyte_per_match() {
        // At 10000 tx/s and 2 s lifetime the match term is 500000·r bytes;
        // the fixed 67-byte overhead fades for large r.
        for r in [36.0, 50.0, 64.0, 100.0] {
            let p = MemoryParams {
                rate: 10_000.0,
                lifetime: 2.0,
                matches_received: r,
                record_bytes: RecordBytes::default(),
            };
            let exact = memory_estimate(&p);
            let rule_of_thumb = 500_000.0 * r;
            assert!(
                (exact - rule_of_thumb).abs() / exact <= 0.07,
                "r={r}: exact {exact}, rule {rule_of_thumb}"
            );
        }
    }

    #[test]
    fn collision_probability_headline_figures() {
        // 20000 live 64-bit seeds over a hundred 31-day-month years.
        let horizon = 3600.0 * 24.0 * 31.0 * 12.0 * 100.0;
        let p64 = collision_probability(&CollisionParams {
            rate: 10_000.0,
            lifetime: 2.0,
            seed_bits: 64,
            horizon_seconds: horizon,
        });
        assert!(p64.approximation_valid);
        assert!(
            p64.probability > 0.030 && p64.probability < 0.036,
            "64-bit horizon probability {} outside [3.0%, 3.6%]",
            p64.probability
        );
        // Widening the seed by one byte buys five orders of magnitude.
        let p72 = collision_probability(&CollisionParams {
            rate: 10_000.0,
            lifetime: 2.0,
            seed_bits: 72,
            horizon_seconds: horizon,
        });
        assert_relative_eq!(p72.probability, 1.36e-4, max_relative = 0.01);
    }

    #[test]
    fn collision_probability_edges() {
        let zero_horizon = collision_probability(&CollisionParams {
            rate: 10_000.0,
            lifetime: 2.0,
            seed_bits: 64,
            horizon_seconds: 0.0,
        });
        assert_eq!(zero_horizon.probability, 0.0);
        // A population near the birthday bound trips the warning flag.
        let crowded = collision_probability(&CollisionParams {
            rate: 1e9,
            lifetime: 2.0,
            seed_bits: 64,
            horizon_seconds: 1.0,
        });
        assert!(!crowded.approximation_valid);
    }

    #[test]
    fn bandwidth_is_a_plain_product() {
        assert_relative_eq!(bandwidth_estimate(10_000.0, 16.0), 160_000.0);
        assert_relative_eq!(bandwidth_estimate(10_000.0, 20.0), 200_000.0);
        assert_eq!(bandwidth_estimate(0.0, 1234.0), 0.0);
    }
}
