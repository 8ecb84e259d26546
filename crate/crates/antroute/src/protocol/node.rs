//! The per-node routing state machine.
//!
//! A node reacts to incoming messages and produces outgoing ones; it never
//! touches the clock or the network directly, so a handler's effect is
//! fully described by its [`HandlerOutput`]. The same code runs on every
//! node; payer and payee roles are just extra local state on top.
//!
//! Message handling follows the four protocol phases:
//!
//! 1. **Pheromone**: flooded seeds are stored once per (seed, direction)
//!    and forwarded with the counter incremented and the node's fee
//!    deducted; a later copy replaces the stored one only if it carries a
//!    strictly smaller counter.
//! 2. **Match**: where both directions of a seed meet, a match is created
//!    and retraced hop by hop toward each endpoint using the stored sender
//!    references, checking counter consistency at every hop.
//! 3. **Confirmation**: the payer commits to one match; every intermediary
//!    appends a random check integer on the way to the payee.
//! 4. **Counter check**: the payer sends the collected list back; each
//!    intermediary verifies and pops its own integer, proving nobody
//!    shortened the hop count.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::seedstore::{
    AvlTree, BucketedStore, ConfirmationEntry, Direction, InsertOutcome, MatchEntry,
    PheromoneEntry, PheromoneSide, Slot, SpecialMatchEntry,
};
use crate::time::{SimTime, WireTimestamp};

use super::messages::{
    select_candidate, ConfirmationMessage, MatchMessage, Message, NodeId, PaymentRequest,
    PheromoneMessage, RouteCandidate, SelectionPolicy,
};

/// Read access to the directed balances of this node's own channels.
///
/// A node knows both sides of every channel it participates in, and nothing
/// about any other channel, which is all the eligibility rule needs.
pub trait ChannelView {
    /// Spendable balance in the `from -> to` direction; 0 without a channel.
    fn balance(&self, from: NodeId, to: NodeId) -> u32;
}

/// Tuning knobs shared by every node of a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Seed lifetime; must be a positive multiple of 0.1 s.
    pub lifetime: SimTime,
    /// Length of the payer's initial check list (`l0`).
    pub initial_checks: usize,
    /// Length of the fresh list appended for the counter check round
    /// (`l1`); at least 1 so no node can spot the end of the route.
    pub follow_up_checks: usize,
    pub policy: SelectionPolicy,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            lifetime: SimTime::from_secs(2),
            initial_checks: 4,
            follow_up_checks: 4,
            policy: SelectionPolicy::default(),
        }
    }
}

/// Misbehavior a node can be configured with for fault injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheaterMode {
    /// Forward pheromones with the counter decremented instead of
    /// incremented, making downstream nodes believe the route is shorter.
    /// Match forwarding skips the local consistency check so the faked
    /// matches actually reach the payer.
    CounterDecrement,
    /// Participate honestly through the match phase, then silently drop
    /// confirmation and counter-check traffic.
    RefusePayment,
}

/// A message to hand to a neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: NodeId,
    pub message: Message,
}

/// Out-of-band traffic between payment endpoints. Payer and payee have a
/// direct communication channel (they agreed on the seed in the first
/// place), so these bypass the channel graph.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlOut {
    /// Payee reports the check list it received for a confirmed match.
    PayeeReport {
        payer: NodeId,
        seed: u64,
        match_id: u64,
        checks: Vec<u64>,
    },
    /// Payee signals that the counter check round completed.
    ProceedSignal {
        payer: NodeId,
        seed: u64,
        match_id: u64,
    },
}

/// Observations handlers emit for metrics; none of these affect protocol
/// state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Note {
    /// A match was created at this node.
    MatchCreated,
    /// A route candidate landed in this payer's special match tree.
    SpecialMatchStored,
    /// Message referenced a timestamp outside the live window.
    StaleDrop,
    /// Pheromone already stored with an equal or smaller counter.
    DuplicateDrop,
    /// Fee budget exhausted: stored, forwarded or matched nothing.
    FeeExhausted,
    /// A counter-improving replacement arrived after the conjugate was
    /// already present; no second match is emitted for it.
    MatchSuppressedOnReplacement,
    /// Match counter did not agree with the stored pheromone counter.
    CounterMismatchDrop,
    /// Match referenced a seed (direction) this node never stored.
    UnknownSeedDrop,
    /// Confirmation or counter check referenced an unknown match id.
    UnknownMatchDrop,
    /// Counter check head did not equal this node's stored check integer.
    CheckMismatchDrop,
    /// Hop counter reached its ceiling; flood not propagated further.
    CounterOverflowDrop,
    /// Frame failed to decode.
    DecodeError,
    /// A configured cheater refused to carry payment-phase traffic.
    CheaterRefusal,
}

/// Everything a handler wants the simulator to do or record.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct HandlerOutput {
    pub sends: Vec<Outbound>,
    pub controls: Vec<ControlOut>,
    pub notes: Vec<Note>,
}

impl HandlerOutput {
    fn note(note: Note) -> Self {
        HandlerOutput {
            notes: vec![note],
            ..Default::default()
        }
    }

    fn merge(&mut self, other: HandlerOutput) {
        self.sends.extend(other.sends);
        self.controls.extend(other.controls);
        self.notes.extend(other.notes);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NodeError {
    #[error("node {node} has {count} neighbors; at most 255 are addressable")]
    TooManyNeighbors { node: NodeId, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum OriginateError {
    #[error("node is neither the payer nor the payee of this request")]
    NotAParty,
    #[error("start time lies outside the node's live bucket window")]
    StaleStart,
    #[error("no neighbor channel can carry the amount")]
    UnroutableLocally,
}

/// Payer's verdict on the payee's reported check list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyOutcome {
    Pass,
    /// The number of appended checks disagrees with the match counter:
    /// some node on the route tampered with hop counting.
    CheaterDetected,
}

/// Peak store occupancy and handler counts, for workload accounting.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct NodeStats {
    pub peak_pheromone: usize,
    pub peak_match: usize,
    pub peak_confirmation: usize,
    pub pheromones_handled: u64,
    pub matches_handled: u64,
    pub confirmations_handled: u64,
}

/// Payer-side state for one in-flight payment; dropped wholesale once the
/// payment completes or is abandoned.
#[derive(Debug)]
struct PayerTask {
    request: PaymentRequest,
    special: AvlTree<SpecialMatchEntry>,
    /// `l0` of the current confirmation attempt.
    outstanding_checks: Vec<u64>,
}

#[derive(Debug, Clone, Copy)]
struct PayeeTask {
    payer: NodeId,
}

/// One routing node: stores, neighbor table and role state.
#[derive(Debug)]
pub struct AntNode {
    id: NodeId,
    fee: u32,
    /// Sorted; a neighbor's slot is its index + 1.
    neighbors: Vec<NodeId>,
    slot_by_node: BTreeMap<NodeId, Slot>,
    pheromones: BucketedStore<PheromoneEntry>,
    matches: BucketedStore<MatchEntry>,
    confirmations: BucketedStore<ConfirmationEntry>,
    payer_tasks: BTreeMap<u64, PayerTask>,
    payee_tasks: BTreeMap<u64, PayeeTask>,
    /// Payee-side map from match id back to the seed it belongs to.
    payee_match_ids: BTreeMap<u64, u64>,
    rng: ChaCha8Rng,
    cheat: Option<CheaterMode>,
    config: ProtocolConfig,
    stats: NodeStats,
}

impl AntNode {
    pub fn new(
        id: NodeId,
        fee: u32,
        mut neighbors: Vec<NodeId>,
        epoch_start: SimTime,
        config: ProtocolConfig,
        rng: ChaCha8Rng,
    ) -> Result<Self, NodeError> {
        neighbors.sort_unstable();
        neighbors.dedup();
        if neighbors.len() > 255 {
            return Err(NodeError::TooManyNeighbors {
                node: id,
                count: neighbors.len(),
            });
        }
        let slot_by_node = neighbors
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, Slot(i as u8 + 1)))
            .collect();
        Ok(AntNode {
            id,
            fee,
            neighbors,
            slot_by_node,
            pheromones: BucketedStore::new(epoch_start, config.lifetime),
            matches: BucketedStore::new(epoch_start, config.lifetime),
            confirmations: BucketedStore::new(epoch_start, config.lifetime),
            payer_tasks: BTreeMap::new(),
            payee_tasks: BTreeMap::new(),
            payee_match_ids: BTreeMap::new(),
            rng,
            cheat: None,
            config,
            stats: NodeStats::default(),
        })
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn fee(&self) -> u32 {
        self.fee
    }

    pub fn stats(&self) -> &NodeStats {
        &self.stats
    }

    pub fn set_cheat(&mut self, mode: Option<CheaterMode>) {
        self.cheat = mode;
    }

    fn slot_of(&self, node: NodeId) -> Option<Slot> {
        self.slot_by_node.get(&node).copied()
    }

    /// Resolves a slot back to the neighbor it names; `None` for
    /// [`Slot::SELF`].
    pub fn node_of_slot(&self, slot: Slot) -> Option<NodeId> {
        if slot.is_self() {
            None
        } else {
            self.neighbors.get(slot.0 as usize - 1).copied()
        }
    }

    /// Advances all three bucket forests; returns records expired.
    pub fn rotate(&mut self, now: SimTime) -> usize {
        self.pheromones.rotate(now) + self.matches.rotate(now) + self.confirmations.rotate(now)
    }

    pub fn store_sizes(&self) -> (usize, usize, usize) {
        (
            self.pheromones.len(),
            self.matches.len(),
            self.confirmations.len(),
        )
    }

    /// Validates every bucket tree of every store.
    pub fn validate_stores(&self) -> Result<(), crate::seedstore::InvariantViolation> {
        self.pheromones.validate()?;
        self.matches.validate()?;
        self.confirmations.validate()
    }

    fn track_peaks(&mut self) {
        let (p, m, c) = self.store_sizes();
        self.stats.peak_pheromone = self.stats.peak_pheromone.max(p);
        self.stats.peak_match = self.stats.peak_match.max(m);
        self.stats.peak_confirmation = self.stats.peak_confirmation.max(c);
    }

    fn eligible_neighbors(
        &self,
        direction: Direction,
        amount: u32,
        exclude: Option<NodeId>,
        channels: &impl ChannelView,
    ) -> Vec<NodeId> {
        self.neighbors
            .iter()
            .copied()
            .filter(|&n| Some(n) != exclude)
            .filter(|&n| {
                // The payment always flows payer -> payee, so a payer-side
                // seed needs our balance toward the neighbor while a
                // payee-side seed needs the neighbor's balance toward us.
                let balance = match direction {
                    Direction::FromPayer => channels.balance(self.id, n),
                    Direction::FromPayee => channels.balance(n, self.id),
                };
                balance >= amount
            })
            .collect()
    }

    /// Starts the pheromone phase for a payment this node is a party to.
    ///
    /// Stores the own-direction entry (sender slot 0), creates the role
    /// state, and floods the seed to every neighbor whose channel can carry
    /// the amount. If the conjugate direction already arrived, the match is
    /// created on the spot.
    pub fn originate(
        &mut self,
        request: &PaymentRequest,
        channels: &impl ChannelView,
    ) -> Result<HandlerOutput, OriginateError> {
        let direction = if request.payer == self.id {
            Direction::FromPayer
        } else if request.payee == self.id {
            Direction::FromPayee
        } else {
            return Err(OriginateError::NotAParty);
        };
        let t = request.start_time;
        let side = PheromoneSide {
            counter: request.counter_start,
            remaining_fees: request.max_fees,
            sender: Slot::SELF,
        };
        let inserted = self
            .pheromones
            .insert(
                request.seed,
                PheromoneEntry::with_side(request.amount, direction, side),
                t,
            )
            .map_err(|_| OriginateError::StaleStart)?;
        if inserted == InsertOutcome::AlreadyPresent {
            // The conjugate landed here first; attach our side to it.
            self.pheromones
                .update(request.seed, t, |entry| entry.set_side(direction, side))
                .expect("entry just found");
        }
        self.track_peaks();

        match direction {
            Direction::FromPayer => {
                self.payer_tasks.insert(
                    request.seed,
                    PayerTask {
                        request: *request,
                        special: AvlTree::new(),
                        outstanding_checks: Vec::new(),
                    },
                );
            }
            Direction::FromPayee => {
                self.payee_tasks.insert(
                    request.seed,
                    PayeeTask {
                        payer: request.payer,
                    },
                );
            }
        }

        let mut output = HandlerOutput::default();
        let conjugate_present = self
            .pheromones
            .lookup(request.seed, t)
            .ok()
            .flatten()
            .is_some_and(|e| e.has_both());
        if conjugate_present {
            output.merge(self.create_match(request.seed, t));
        }

        let message = Message::Pheromone(PheromoneMessage {
            direction,
            seed: request.seed,
            counter: request.counter_start,
            remaining_fees: request.max_fees,
            amount: request.amount,
            timestamp: WireTimestamp::from_time(t),
        });
        let recipients = self.eligible_neighbors(direction, request.amount, None, channels);
        if recipients.is_empty() && output.sends.is_empty() && output.notes.is_empty() {
            return Err(OriginateError::UnroutableLocally);
        }
        for to in recipients {
            output.sends.push(Outbound {
                to,
                message: message.clone(),
            });
        }
        Ok(output)
    }

    /// Decodes and dispatches one frame received from a neighbor.
    pub fn handle_frame(
        &mut self,
        from: NodeId,
        bytes: &[u8],
        now: SimTime,
        channels: &impl ChannelView,
    ) -> HandlerOutput {
        match Message::decode(bytes) {
            Ok(Message::Pheromone(m)) => self.handle_pheromone(from, &m, now, channels),
            Ok(Message::Match(m)) => self.handle_match(from, &m, now),
            Ok(Message::Confirmation(m)) => self.handle_confirmation(from, &m, now),
            Err(_) => HandlerOutput::note(Note::DecodeError),
        }
    }

    /// Pheromone phase: store-or-replace, then forward or match.
    pub fn handle_pheromone(
        &mut self,
        from: NodeId,
        msg: &PheromoneMessage,
        _now: SimTime,
        channels: &impl ChannelView,
    ) -> HandlerOutput {
        self.stats.pheromones_handled += 1;
        let Some(from_slot) = self.slot_of(from) else {
            return HandlerOutput::note(Note::DecodeError);
        };
        let Ok(t) = self.pheromones.resolve_wire_timestamp(msg.timestamp) else {
            return HandlerOutput::note(Note::StaleDrop);
        };
        // A node that cannot cover its own fee takes no part in this seed.
        if msg.remaining_fees < self.fee {
            return HandlerOutput::note(Note::FeeExhausted);
        }

        let side = PheromoneSide {
            counter: msg.counter,
            remaining_fees: msg.remaining_fees,
            sender: from_slot,
        };
        let existing = self.pheromones.lookup(msg.seed, t).expect("window checked");
        let mut replaced = false;
        match existing.and_then(|e| e.side(msg.direction)) {
            Some(stored) => {
                if stored.counter <= msg.counter {
                    return HandlerOutput::note(Note::DuplicateDrop);
                }
                self.pheromones
                    .update(msg.seed, t, |entry| entry.set_side(msg.direction, side))
                    .expect("entry present");
                replaced = true;
            }
            None => {
                if existing.is_some() {
                    self.pheromones
                        .update(msg.seed, t, |entry| entry.set_side(msg.direction, side))
                        .expect("entry present");
                } else {
                    self.pheromones
                        .insert(
                            msg.seed,
                            PheromoneEntry::with_side(msg.amount, msg.direction, side),
                            t,
                        )
                        .expect("window checked");
                }
            }
        }
        self.track_peaks();

        let conjugate_present = self
            .pheromones
            .lookup(msg.seed, t)
            .expect("window checked")
            .is_some_and(|e| e.side(msg.direction.conjugate()).is_some());
        if conjugate_present {
            if replaced {
                // Matches fire only on first conjugate contact; improved
                // counters after that point are stored but not re-matched.
                return HandlerOutput::note(Note::MatchSuppressedOnReplacement);
            }
            return self.create_match(msg.seed, t);
        }

        // Flood on: counter up, fee budget down.
        let Some(next_counter) = self.forward_counter(msg.counter) else {
            return HandlerOutput::note(Note::CounterOverflowDrop);
        };
        let forwarded = Message::Pheromone(PheromoneMessage {
            counter: next_counter,
            remaining_fees: msg.remaining_fees - self.fee,
            ..*msg
        });
        let sends = self
            .eligible_neighbors(msg.direction, msg.amount, Some(from), channels)
            .into_iter()
            .map(|to| Outbound {
                to,
                message: forwarded.clone(),
            })
            .collect();
        HandlerOutput {
            sends,
            ..Default::default()
        }
    }

    fn forward_counter(&mut self, counter: u8) -> Option<u8> {
        match self.cheat {
            Some(CheaterMode::CounterDecrement) => Some(counter.saturating_sub(1)),
            _ => counter.checked_add(1),
        }
    }

    /// Match phase start: both directions of `seed` are stored here.
    ///
    /// The end-to-end counter is the sum of both stored counters plus one
    /// for this node. When one side is this node's own seed (sender slot
    /// 0), its stored counter is one ahead of the hop count (the first
    /// hop stores the origin counter unchanged), so that side contributes
    /// `counter - 1`, and the node charges no fee since an endpoint is not
    /// an intermediary of its own payment.
    fn create_match(&mut self, seed: u64, t: SimTime) -> HandlerOutput {
        let entry = self
            .pheromones
            .lookup(seed, t)
            .expect("window checked")
            .expect("entry present")
            .clone();
        let payer_side = *entry
            .side(Direction::FromPayer)
            .expect("both sides present");
        let payee_side = *entry
            .side(Direction::FromPayee)
            .expect("both sides present");

        let endpoint_match = payer_side.sender.is_self() || payee_side.sender.is_self();
        let fee = if endpoint_match {
            0
        } else {
            u64::from(self.fee)
        };
        let budget = u64::from(payer_side.remaining_fees) + u64::from(payee_side.remaining_fees);
        if budget < fee {
            return HandlerOutput::note(Note::FeeExhausted);
        }
        let total_fees = u32::try_from(budget - fee).expect("fee budgets stay below 2^31");

        let effective = |side: &PheromoneSide| {
            if side.sender.is_self() {
                side.counter.wrapping_sub(1)
            } else {
                side.counter
            }
        };
        let total_counter = effective(&payer_side)
            .wrapping_add(effective(&payee_side))
            .wrapping_add(1);

        let match_id: u64 = self.rng.gen();
        self.matches
            .insert(
                match_id,
                MatchEntry {
                    target: payee_side.sender,
                },
                t,
            )
            .expect("window checked");
        self.track_peaks();

        let mut output = HandlerOutput::note(Note::MatchCreated);
        let timestamp = WireTimestamp::from_time(t);

        // Payer-direction match travels back along the payer seed's path.
        if payer_side.sender.is_self() {
            // This node is the payer: the match is delivered locally, with
            // the first hop toward the payee as its target.
            self.store_special_match(seed, match_id, payee_side.sender, total_counter, total_fees);
            output.notes.push(Note::SpecialMatchStored);
        } else {
            let to = self
                .node_of_slot(payer_side.sender)
                .expect("sender is a neighbor");
            output.sends.push(Outbound {
                to,
                message: Message::Match(MatchMessage {
                    direction: Direction::FromPayer,
                    seed,
                    match_id,
                    counter: payer_side.counter,
                    total_counter,
                    total_fees,
                    timestamp,
                }),
            });
        }

        // Payee-direction match travels back along the payee seed's path.
        if payee_side.sender.is_self() {
            // This node is the payee; remember the id so the confirmation
            // can be recognized when it arrives.
            self.payee_match_ids.insert(match_id, seed);
        } else {
            let to = self
                .node_of_slot(payee_side.sender)
                .expect("sender is a neighbor");
            output.sends.push(Outbound {
                to,
                message: Message::Match(MatchMessage {
                    direction: Direction::FromPayee,
                    seed,
                    match_id,
                    counter: payee_side.counter,
                    total_counter,
                    total_fees,
                    timestamp,
                }),
            });
        }
        output
    }

    fn store_special_match(
        &mut self,
        seed: u64,
        match_id: u64,
        target: Slot,
        total_counter: u8,
        total_fees: u32,
    ) {
        if let Some(task) = self.payer_tasks.get_mut(&seed) {
            task.special.insert(
                match_id,
                SpecialMatchEntry {
                    target,
                    total_counter,
                    total_fees,
                },
            );
        }
    }

    /// Match phase relay: retrace one hop toward the seed's originator.
    pub fn handle_match(
        &mut self,
        from: NodeId,
        msg: &MatchMessage,
        _now: SimTime,
    ) -> HandlerOutput {
        self.stats.matches_handled += 1;
        let Ok(t) = self.pheromones.resolve_wire_timestamp(msg.timestamp) else {
            return HandlerOutput::note(Note::StaleDrop);
        };
        let stored = self
            .pheromones
            .lookup(msg.seed, t)
            .expect("window checked")
            .and_then(|e| e.side(msg.direction).copied());
        let Some(side) = stored else {
            return HandlerOutput::note(Note::UnknownSeedDrop);
        };

        if side.sender.is_self() {
            // This node originated the seed direction the match retraces.
            // Its own stored counter equals the first hop's, so acceptance
            // here requires equality rather than the off-by-one of relays.
            if msg.counter != side.counter {
                return HandlerOutput::note(Note::CounterMismatchDrop);
            }
            return match msg.direction {
                Direction::FromPayer => {
                    let Some(from_slot) = self.slot_of(from) else {
                        return HandlerOutput::note(Note::DecodeError);
                    };
                    if self.payer_tasks.contains_key(&msg.seed) {
                        self.store_special_match(
                            msg.seed,
                            msg.match_id,
                            from_slot,
                            msg.total_counter,
                            msg.total_fees,
                        );
                        HandlerOutput::note(Note::SpecialMatchStored)
                    } else {
                        HandlerOutput::note(Note::UnknownMatchDrop)
                    }
                }
                Direction::FromPayee => {
                    // The payee keeps the match entry (target slot 0) so the
                    // confirmation can find it later.
                    let _ = self
                        .matches
                        .insert(msg.match_id, MatchEntry { target: Slot::SELF }, t);
                    self.payee_match_ids.insert(msg.match_id, msg.seed);
                    self.track_peaks();
                    HandlerOutput::default()
                }
            };
        }

        // Relay: the stored counter must be exactly one behind the carried
        // one, otherwise the pheromone was replaced after this match left
        // the match node and the message no longer describes a live path.
        let consistent = side.counter == msg.counter.wrapping_sub(1);
        let cheating = self.cheat == Some(CheaterMode::CounterDecrement);
        if !consistent && !cheating {
            return HandlerOutput::note(Note::CounterMismatchDrop);
        }

        let target = match msg.direction {
            // Toward the payer the next hop for the confirmation is the
            // node this match just came from.
            Direction::FromPayer => match self.slot_of(from) {
                Some(slot) => slot,
                None => return HandlerOutput::note(Note::DecodeError),
            },
            // Toward the payee it is the stored pheromone sender.
            Direction::FromPayee => side.sender,
        };
        let _ = self.matches.insert(msg.match_id, MatchEntry { target }, t);
        self.track_peaks();

        let to = self
            .node_of_slot(side.sender)
            .expect("relay sender is a neighbor");
        HandlerOutput {
            sends: vec![Outbound {
                to,
                // Forwarding with the own stored counter; for honest nodes
                // this equals msg.counter - 1.
                message: Message::Match(MatchMessage {
                    counter: side.counter,
                    ..*msg
                }),
            }],
            ..Default::default()
        }
    }

    /// Confirmation and counter-check phases share the wire frame; which
    /// one applies is decided by where the match id is found. A node that
    /// already holds a confirmation entry for the id is seeing the counter
    /// check round; otherwise the id is looked up in the match tree.
    pub fn handle_confirmation(
        &mut self,
        _from: NodeId,
        msg: &ConfirmationMessage,
        _now: SimTime,
    ) -> HandlerOutput {
        self.stats.confirmations_handled += 1;
        let Ok(t) = self.confirmations.resolve_wire_timestamp(msg.timestamp) else {
            return HandlerOutput::note(Note::StaleDrop);
        };

        if let Some(entry) = self
            .confirmations
            .lookup(msg.match_id, t)
            .expect("window checked")
        {
            let entry = *entry;
            return self.handle_counter_check(&entry, msg, t);
        }

        let stored = self
            .matches
            .lookup(msg.match_id, t)
            .expect("window checked")
            .copied();
        let Some(entry) = stored else {
            return HandlerOutput::note(Note::UnknownMatchDrop);
        };

        if entry.target.is_self() {
            // Payee: report the list to the payer out of band and leave a
            // marker so the next arrival of this id is treated as the
            // counter check round.
            let Some(&seed) = self.payee_match_ids.get(&msg.match_id) else {
                return HandlerOutput::note(Note::UnknownMatchDrop);
            };
            let payer = self
                .payee_tasks
                .get(&seed)
                .expect("payee task exists")
                .payer;
            let _ = self.confirmations.insert(
                msg.match_id,
                ConfirmationEntry {
                    target: Slot::SELF,
                    check: 0,
                },
                t,
            );
            self.track_peaks();
            return HandlerOutput {
                controls: vec![ControlOut::PayeeReport {
                    payer,
                    seed,
                    match_id: msg.match_id,
                    checks: msg.check_list.clone(),
                }],
                ..Default::default()
            };
        }

        if self.cheat == Some(CheaterMode::RefusePayment) {
            return HandlerOutput::note(Note::CheaterRefusal);
        }

        // Intermediary: contribute a check integer and pass it along.
        if msg.check_list.len() >= super::wire::MAX_CHECK_LIST_LEN {
            return HandlerOutput::note(Note::DecodeError);
        }
        let check: u64 = self.rng.gen();
        let _ = self.confirmations.insert(
            msg.match_id,
            ConfirmationEntry {
                target: entry.target,
                check,
            },
            t,
        );
        self.track_peaks();
        let mut list = msg.check_list.clone();
        list.push(check);
        let to = self
            .node_of_slot(entry.target)
            .expect("target is a neighbor");
        HandlerOutput {
            sends: vec![Outbound {
                to,
                message: Message::Confirmation(ConfirmationMessage {
                    match_id: msg.match_id,
                    check_list: list,
                    timestamp: msg.timestamp,
                }),
            }],
            ..Default::default()
        }
    }

    fn handle_counter_check(
        &mut self,
        entry: &ConfirmationEntry,
        msg: &ConfirmationMessage,
        _t: SimTime,
    ) -> HandlerOutput {
        if entry.target.is_self() {
            // Payee marker: the list made it back through every check.
            let Some(&seed) = self.payee_match_ids.get(&msg.match_id) else {
                return HandlerOutput::note(Note::UnknownMatchDrop);
            };
            let payer = self
                .payee_tasks
                .get(&seed)
                .expect("payee task exists")
                .payer;
            return HandlerOutput {
                controls: vec![ControlOut::ProceedSignal {
                    payer,
                    seed,
                    match_id: msg.match_id,
                }],
                ..Default::default()
            };
        }
        if self.cheat == Some(CheaterMode::RefusePayment) {
            return HandlerOutput::note(Note::CheaterRefusal);
        }
        if msg.check_list.first() != Some(&entry.check) {
            return HandlerOutput::note(Note::CheckMismatchDrop);
        }
        let to = self
            .node_of_slot(entry.target)
            .expect("target is a neighbor");
        HandlerOutput {
            sends: vec![Outbound {
                to,
                message: Message::Confirmation(ConfirmationMessage {
                    match_id: msg.match_id,
                    check_list: msg.check_list[1..].to_vec(),
                    timestamp: msg.timestamp,
                }),
            }],
            ..Default::default()
        }
    }

    /// Route candidates currently in the payer's special match tree,
    /// excluding any match ids already tried.
    pub fn route_candidates(&self, seed: u64, exclude: &[u64]) -> Vec<RouteCandidate> {
        let Some(task) = self.payer_tasks.get(&seed) else {
            return Vec::new();
        };
        let c0 = task.request.counter_start;
        let budget = 2 * u64::from(task.request.max_fees);
        task.special
            .iter()
            .filter(|(id, _)| !exclude.contains(id))
            .map(|(match_id, entry)| RouteCandidate {
                match_id,
                first_hop: self
                    .node_of_slot(entry.target)
                    .expect("special match target is a neighbor"),
                total_counter: entry.total_counter,
                total_fees: entry.total_fees,
                fees_payable: (budget - u64::from(entry.total_fees)) as u32,
                intermediary_count: entry.total_counter.wrapping_sub(c0.wrapping_mul(2)),
            })
            .collect()
    }

    /// Deterministic route choice under the configured policy.
    pub fn select_route(&self, seed: u64, exclude: &[u64]) -> Option<RouteCandidate> {
        select_candidate(&self.route_candidates(seed, exclude), self.config.policy)
    }

    /// Launches the confirmation phase for a selected route.
    pub fn confirm(&mut self, seed: u64, route: &RouteCandidate) -> Option<HandlerOutput> {
        let initial = self.config.initial_checks;
        let checks: Vec<u64> = (0..initial).map(|_| self.rng.gen()).collect();
        let task = self.payer_tasks.get_mut(&seed)?;
        task.outstanding_checks = checks.clone();
        let timestamp = WireTimestamp::from_time(task.request.start_time);
        Some(HandlerOutput {
            sends: vec![Outbound {
                to: route.first_hop,
                message: Message::Confirmation(ConfirmationMessage {
                    match_id: route.match_id,
                    check_list: checks,
                    timestamp,
                }),
            }],
            ..Default::default()
        })
    }

    /// Checks the payee's report: the number of checks appended along the
    /// route must equal the advertised intermediary count.
    pub fn verify_counter_report(
        &self,
        seed: u64,
        route: &RouteCandidate,
        reported: &[u64],
    ) -> VerifyOutcome {
        let Some(task) = self.payer_tasks.get(&seed) else {
            return VerifyOutcome::CheaterDetected;
        };
        let appended = reported.len() as i64 - task.outstanding_checks.len() as i64;
        if appended == i64::from(route.intermediary_count) {
            VerifyOutcome::Pass
        } else {
            VerifyOutcome::CheaterDetected
        }
    }

    /// Starts the counter check round: strip `l0`, append a fresh `l1` so
    /// that not even the last intermediary can tell where the list ends.
    pub fn counter_check_round(
        &mut self,
        seed: u64,
        route: &RouteCandidate,
        reported: &[u64],
    ) -> Option<HandlerOutput> {
        let follow_up = self.config.follow_up_checks.max(1);
        let fresh: Vec<u64> = (0..follow_up).map(|_| self.rng.gen()).collect();
        let task = self.payer_tasks.get_mut(&seed)?;
        let mut list = reported[task.outstanding_checks.len().min(reported.len())..].to_vec();
        list.extend(fresh);
        let timestamp = WireTimestamp::from_time(task.request.start_time);
        Some(HandlerOutput {
            sends: vec![Outbound {
                to: route.first_hop,
                message: Message::Confirmation(ConfirmationMessage {
                    match_id: route.match_id,
                    check_list: list,
                    timestamp,
                }),
            }],
            ..Default::default()
        })
    }

    /// Destroys the payer's special match tree and task state.
    pub fn complete_payer_task(&mut self, seed: u64) {
        self.payer_tasks.remove(&seed);
    }

    /// Clears the payee's bookkeeping for a finished payment.
    pub fn complete_payee_task(&mut self, seed: u64) {
        self.payee_tasks.remove(&seed);
        self.payee_match_ids.retain(|_, s| *s != seed);
    }
}
