//! Fully decentralized payment-route discovery by pheromone flooding,
//! plus the tooling to study it: a deterministic network simulator and
//! capacity / scaling / memory / collision models.
//!
//! Start with the guide in `book/` (`mdbook serve book`, or read the
//! markdown directly); its code listings double as this crate's
//! doc-tests, so they are always in sync with the API.
//!
//! The layers, bottom up:
//!
//! - [`seedstore`]: per-node storage, forests of AVL trees indexed by
//!   0.1 s timestamp buckets, expired wholesale.
//! - [`protocol`]: wire messages, binary framings, and the node state
//!   machine for the four routing phases.
//! - [`simnet`]: the discrete-event simulator and its ground-truth
//!   oracles.
//! - [`capacity`] and [`scaling`]: the throughput, workload-ceiling,
//!   memory, bandwidth and collision models.

pub mod capacity;
pub mod protocol;
pub mod scaling;
pub mod seedstore;
pub mod simnet;
pub mod time;

pub use protocol::NodeId;
pub use time::SimTime;

// Every code listing in the guide compiles and runs under `cargo test
// --doc`, keeping the book honest.
#[cfg(doctest)]
mod booktest {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(ch01_overview, "../../../book/src/ch01_overview.md");
    chapter!(ch02_seed_stores, "../../../book/src/ch02_seed_stores.md");
    chapter!(
        ch03_route_discovery,
        "../../../book/src/ch03_route_discovery.md"
    );
    chapter!(ch04_simulation, "../../../book/src/ch04_simulation.md");
    chapter!(
        ch05_capacity_and_scaling,
        "../../../book/src/ch05_capacity_and_scaling.md"
    );
}
