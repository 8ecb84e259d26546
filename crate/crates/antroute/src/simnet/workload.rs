//! Turning a workload description into concrete payment requests.
//!
//! Transaction creation is modeled as a Poisson process: exponential
//! inter-arrival times at the configured rate, endpoints drawn uniformly
//! among distinct node pairs. Seeds and counter starts are drawn here too,
//! from a dedicated RNG stream, so a workload is a pure function of the
//! run seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::protocol::{NodeId, PaymentRequest};
use crate::time::SimTime;

use super::config::{ConfigError, WorkloadConfig};
use super::derive_seed;

/// Expands a workload config into validated, schedulable requests.
///
/// Explicit payments keep their file order; generated ones are appended in
/// arrival order. Every request gets a fresh random seed and a counter
/// start in [64, 128).
pub fn build_workload(
    workload: &WorkloadConfig,
    node_ids: &[NodeId],
    rng_seed: u64,
) -> Result<Vec<PaymentRequest>, ConfigError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, 4, 0));
    let mut requests = Vec::new();
    let mut used_seeds = std::collections::BTreeSet::new();
    let mut fresh_seed = |rng: &mut ChaCha8Rng| loop {
        let s: u64 = rng.gen();
        if used_seeds.insert(s) {
            return s;
        }
    };

    for (index, p) in workload.payments.iter().enumerate() {
        for node in [p.payer, p.payee] {
            if !node_ids.contains(&node) {
                return Err(ConfigError::UnknownPaymentNode { index, node });
            }
        }
        if !(p.start_time.is_finite() && p.start_time >= 0.0) {
            return Err(ConfigError::BadPayment {
                index,
                reason: "start_time must be non-negative".into(),
            });
        }
        let request = PaymentRequest {
            payer: p.payer,
            payee: p.payee,
            amount: p.amount,
            max_fees: p.max_fees,
            counter_start: rng.gen_range(64..128),
            seed: fresh_seed(&mut rng),
            start_time: SimTime::from_secs_f64(p.start_time),
        };
        request.validate().map_err(|e| ConfigError::BadPayment {
            index,
            reason: e.to_string(),
        })?;
        requests.push(request);
    }

    if let Some(g) = workload.generator {
        if !(g.rate > 0.0 && g.rate.is_finite()) {
            return Err(ConfigError::BadGenerator("rate must be positive".into()));
        }
        if !(g.duration >= 0.0 && g.duration.is_finite()) {
            return Err(ConfigError::BadGenerator(
                "duration must be non-negative".into(),
            ));
        }
        if g.amount[0] > g.amount[1] || g.amount[0] == 0 {
            return Err(ConfigError::BadGenerator(
                "amount range must be ordered and positive".into(),
            ));
        }
        if node_ids.len() < 2 {
            return Err(ConfigError::BadGenerator(
                "generator needs at least two nodes".into(),
            ));
        }
        let mut t = 0.0f64;
        loop {
            // Exponential inter-arrival via inverse transform.
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            t += -u.ln() / g.rate;
            if t >= g.duration {
                break;
            }
            let payer = node_ids[rng.gen_range(0..node_ids.len())];
            let payee = loop {
                let candidate = node_ids[rng.gen_range(0..node_ids.len())];
                if candidate != payer {
                    break candidate;
                }
            };
            requests.push(PaymentRequest {
                payer,
                payee,
                amount: rng.gen_range(g.amount[0]..=g.amount[1]),
                max_fees: g.max_fees,
                counter_start: rng.gen_range(64..128),
                seed: fresh_seed(&mut rng),
                start_time: SimTime::from_secs_f64(t),
            });
        }
    }

    Ok(requests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::config::{GeneratorSpec, PaymentSpec};

    fn nodes(n: u32) -> Vec<NodeId> {
        (1..=n).map(NodeId).collect()
    }

    #[test]
    fn explicit_payments_keep_order_and_get_seeds() {
        let workload = WorkloadConfig {
            payments: vec![
                PaymentSpec {
                    payer: NodeId(1),
                    payee: NodeId(2),
                    amount: 5,
                    max_fees: 10,
                    start_time: 0.5,
                },
                PaymentSpec {
                    payer: NodeId(2),
                    payee: NodeId(3),
                    amount: 6,
                    max_fees: 10,
                    start_time: 0.0,
                },
            ],
            generator: None,
        };
        let reqs = build_workload(&workload, &nodes(3), 42).unwrap();
        assert_eq!(reqs.len(), 2);
        assert_eq!(reqs[0].payer, NodeId(1));
        assert_ne!(reqs[0].seed, reqs[1].seed);
        assert!((64..128).contains(&reqs[0].counter_start));
        assert_eq!(reqs[0].start_time, SimTime::from_millis(500));
    }

    #[test]
    fn workload_is_deterministic_in_the_run_seed() {
        let workload = WorkloadConfig {
            payments: vec![],
            generator: Some(GeneratorSpec {
                rate: 50.0,
                duration: 1.0,
                amount: [10, 100],
                max_fees: 50,
            }),
        };
        let a = build_workload(&workload, &nodes(10), 7).unwrap();
        let b = build_workload(&workload, &nodes(10), 7).unwrap();
        let c = build_workload(&workload, &nodes(10), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(!a.is_empty());
        // Arrival times ordered, endpoints distinct, amounts in range.
        for w in a.windows(2) {
            assert!(w[0].start_time <= w[1].start_time);
        }
        for r in &a {
            assert_ne!(r.payer, r.payee);
            assert!((10..=100).contains(&r.amount));
        }
    }

    #[test]
    fn poisson_arrival_count_is_near_rate_times_duration() {
        let workload = WorkloadConfig {
            payments: vec![],
            generator: Some(GeneratorSpec {
                rate: 200.0,
                duration: 5.0,
                amount: [1, 1],
                max_fees: 0,
            }),
        };
        let reqs = build_workload(&workload, &nodes(5), 3).unwrap();
        // Mean 1000, standard deviation ~31.6; five sigma margin.
        let n = reqs.len() as f64;
        assert!((n - 1000.0).abs() < 160.0, "got {n} arrivals");
    }

    #[test]
    fn unknown_payment_node_is_an_error() {
        let workload = WorkloadConfig {
            payments: vec![PaymentSpec {
                payer: NodeId(1),
                payee: NodeId(9),
                amount: 5,
                max_fees: 10,
                start_time: 0.0,
            }],
            generator: None,
        };
        assert_eq!(
            build_workload(&workload, &nodes(3), 42).unwrap_err(),
            ConfigError::UnknownPaymentNode {
                index: 0,
                node: NodeId(9)
            }
        );
    }
}
