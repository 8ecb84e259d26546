//! Ground-truth shortest-path oracle.
//!
//! Breadth-first search over exactly the edges the flooding rule admits: a
//! directed edge `u -> v` is eligible when the spendable balance from `u`
//! to `v` covers the amount. Discovery must find a route of this hop count
//! whenever one exists, which makes the oracle the reference for the
//! equivalence tests.

use std::collections::{BTreeMap, VecDeque};

use crate::protocol::NodeId;

use super::ChannelTable;

/// Hop count of the shortest payer-to-payee path over eligible channels,
/// or `None` when the payee is unreachable at this amount.
pub fn shortest_path_hops(
    channels: &ChannelTable,
    payer: NodeId,
    payee: NodeId,
    amount: u32,
) -> Option<usize> {
    if payer == payee {
        return Some(0);
    }
    let mut dist: BTreeMap<NodeId, usize> = BTreeMap::new();
    dist.insert(payer, 0);
    let mut queue = VecDeque::from([payer]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        for (v, balance) in channels.outgoing(u) {
            if balance >= amount && !dist.contains_key(&v) {
                if v == payee {
                    return Some(d + 1);
                }
                dist.insert(v, d + 1);
                queue.push_back(v);
            }
        }
    }
    None
}
