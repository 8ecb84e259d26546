//! The event queue: a total, deterministic order over everything that
//! happens in a run.
//!
//! Events fire in `(due_time, insertion sequence)` order. The sequence
//! number breaks ties, so two runs that schedule the same events in the
//! same order replay identically, latencies included.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::protocol::{MessageKind, NodeId};
use crate::time::SimTime;

/// What an event does when it fires.
#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// A wire frame arrives at a node.
    Deliver {
        from: NodeId,
        to: NodeId,
        kind: MessageKind,
        bytes: Vec<u8>,
    },
    /// All stores advance their bucket windows.
    Rotate,
    /// Both endpoints of payment `.0` originate their seeds.
    StartPayment(usize),
    /// The payer of payment `.0` picks (or re-picks) a route.
    SelectRoute(usize),
    /// Out-of-band: the payee forwards the received check list.
    PayeeReport {
        payment: usize,
        match_id: u64,
        checks: Vec<u64>,
    },
    /// Out-of-band: the payee confirms the counter check round.
    Proceed { payment: usize, match_id: u64 },
    /// No payee report arrived for this confirmation attempt.
    ConfirmTimeout { payment: usize, match_id: u64 },
    /// No proceed signal arrived for this counter check round.
    CheckTimeout { payment: usize, match_id: u64 },
}

#[derive(Debug, Clone)]
pub struct Event {
    pub due: SimTime,
    seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.due == other.due && self.seq == other.seq
    }
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for earliest-first.
        (other.due, other.seq).cmp(&(self.due, self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        EventQueue::default()
    }

    pub fn schedule(&mut self, due: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { due, seq, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
