//! Time-bucketed seed storage.
//!
//! Every node keeps its routing state in forests of AVL trees, one tree per
//! 0.1 s timestamp interval. Lookups and insertions address the tree named
//! by a record's timestamp; expiry never touches individual keys. Once a
//! bucket ages past the seed lifetime the whole tree is dropped at once and
//! a fresh one is appended at the young end of the window.

mod avl;

use std::collections::VecDeque;

use crate::time::{SimTime, WireTimestamp, BUCKET_WIDTH, TIMESTAMP_MODULUS};

pub use avl::{AvlTree, InsertOutcome, InvariantViolation, Iter};

/// Which endpoint a pheromone seed originated from.
///
/// Direction 0 seeds start at the payer, direction 1 seeds at the payee.
/// Both directions of one seed share a single stored record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Direction {
    FromPayer = 0,
    FromPayee = 1,
}

impl Direction {
    pub fn conjugate(self) -> Direction {
        match self {
            Direction::FromPayer => Direction::FromPayee,
            Direction::FromPayee => Direction::FromPayer,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_byte(b: u8) -> Option<Direction> {
        match b {
            0 => Some(Direction::FromPayer),
            1 => Some(Direction::FromPayee),
            _ => None,
        }
    }
}

/// A node's local alias for one of its neighbors (1-based); slot 0 means
/// "no sender": the record originated at this node itself.
///
/// One byte suffices because a node talks only to its direct neighbors and
/// even the largest nodes have on the order of a hundred channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot(pub u8);

impl Slot {
    pub const SELF: Slot = Slot(0);

    pub fn is_self(self) -> bool {
        self.0 == 0
    }
}

/// One direction's share of a stored pheromone record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PheromoneSide {
    /// Hop counter as received (incremented by forwarders, not on store).
    pub counter: u8,
    /// Fee budget still available when the seed reached this node.
    pub remaining_fees: u32,
    /// Neighbor the seed arrived from; [`Slot::SELF`] at the originator.
    pub sender: Slot,
}

/// Stored pheromone state for one seed, both directions in one record.
///
/// A side is `None` until the corresponding direction has been received;
/// the transaction amount is shared because both directions of a seed
/// advertise the same payment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PheromoneEntry {
    pub amount: u32,
    sides: [Option<PheromoneSide>; 2],
}

impl PheromoneEntry {
    pub fn new(amount: u32) -> Self {
        PheromoneEntry {
            amount,
            sides: [None, None],
        }
    }

    pub fn with_side(amount: u32, direction: Direction, side: PheromoneSide) -> Self {
        let mut entry = PheromoneEntry::new(amount);
        entry.sides[direction.index()] = Some(side);
        entry
    }

    pub fn side(&self, direction: Direction) -> Option<&PheromoneSide> {
        self.sides[direction.index()].as_ref()
    }

    pub fn set_side(&mut self, direction: Direction, side: PheromoneSide) {
        self.sides[direction.index()] = Some(side);
    }

    pub fn has_both(&self) -> bool {
        self.sides[0].is_some() && self.sides[1].is_some()
    }
}

/// Stored match state: the next hop toward the payee for this match id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchEntry {
    pub target: Slot,
}

/// A route candidate in the payer's special match tree.
///
/// Unlike the general match tree this also keeps the end-to-end counter and
/// the remaining-fee total, which only the payer needs for route selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialMatchEntry {
    pub target: Slot,
    pub total_counter: u8,
    pub total_fees: u32,
}

/// Stored confirmation state: next hop plus the check integer this node
/// contributed, to be verified during the counter check round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfirmationEntry {
    pub target: Slot,
    pub check: u64,
}

/// Signals a timestamp outside the live bucket window; the caller discards
/// the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("timestamp outside the live bucket window")]
pub struct Stale;

/// Outcome of an in-place record update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Updated,
    Absent,
}

/// A forest of `k + 1` AVL trees indexed by 0.1 s timestamp buckets, where
/// `k` is the seed lifetime in bucket widths (20 for the default 2 s).
///
/// Bucket `i` holds records timestamped in
/// `[epoch_start + i*0.1s, epoch_start + (i+1)*0.1s)`. Rotation drops the
/// oldest tree wholesale and appends an empty one, so no record survives
/// longer than the lifetime plus one bucket width.
#[derive(Debug, Clone)]
pub struct BucketedStore<R> {
    buckets: VecDeque<AvlTree<R>>,
    epoch_start: SimTime,
    lifetime: SimTime,
}

impl<R> BucketedStore<R> {
    /// Creates a store whose window starts at `epoch_start`.
    ///
    /// `lifetime` must be a positive multiple of the bucket width and short
    /// enough that the window stays unambiguous under the 20 s wire
    /// timestamp (callers validate config; this asserts the contract).
    pub fn new(epoch_start: SimTime, lifetime: SimTime) -> Self {
        let width = BUCKET_WIDTH.as_micros();
        assert!(
            lifetime.as_micros() > 0 && lifetime.as_micros().is_multiple_of(width),
            "seed lifetime must be a positive multiple of 0.1s"
        );
        assert!(
            epoch_start.is_bucket_aligned(),
            "epoch must start on a bucket boundary"
        );
        let k = (lifetime.as_micros() / width) as usize;
        assert!(
            (k as u64 + 1) < TIMESTAMP_MODULUS,
            "seed lifetime must stay below the 20s timestamp modulus"
        );
        let mut buckets = VecDeque::with_capacity(k + 1);
        buckets.resize_with(k + 1, AvlTree::new);
        BucketedStore {
            buckets,
            epoch_start,
            lifetime,
        }
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn lifetime(&self) -> SimTime {
        self.lifetime
    }

    /// Half-open interval of timestamps the store currently accepts.
    pub fn live_window(&self) -> (SimTime, SimTime) {
        let end = self.epoch_start + BUCKET_WIDTH.mul(self.buckets.len() as u64);
        (self.epoch_start, end)
    }

    fn bucket_index(&self, timestamp: SimTime) -> Result<usize, Stale> {
        let (start, end) = self.live_window();
        if timestamp < start || timestamp >= end {
            return Err(Stale);
        }
        Ok(((timestamp - start).as_micros() / BUCKET_WIDTH.as_micros()) as usize)
    }

    /// Maps a one-byte wire timestamp to the unique bucket-aligned instant
    /// inside the live window, if any. The window spans fewer than 200
    /// intervals, so at most one candidate exists.
    pub fn resolve_wire_timestamp(&self, ts: WireTimestamp) -> Result<SimTime, Stale> {
        let first_interval = self.epoch_start.bucket_interval();
        let offset = (ts.as_byte() as u64 + TIMESTAMP_MODULUS - first_interval % TIMESTAMP_MODULUS)
            % TIMESTAMP_MODULUS;
        if offset < self.buckets.len() as u64 {
            Ok(BUCKET_WIDTH.mul(first_interval + offset))
        } else {
            Err(Stale)
        }
    }

    /// Finds the record stored under `key` in the bucket `timestamp` names.
    pub fn lookup(&self, key: u64, timestamp: SimTime) -> Result<Option<&R>, Stale> {
        let i = self.bucket_index(timestamp)?;
        Ok(self.buckets[i].get(key))
    }

    /// Inserts a record; an existing record under the same key is kept
    /// (protocol replacement goes through [`BucketedStore::update`]).
    pub fn insert(
        &mut self,
        key: u64,
        record: R,
        timestamp: SimTime,
    ) -> Result<InsertOutcome, Stale> {
        let i = self.bucket_index(timestamp)?;
        Ok(self.buckets[i].insert(key, record))
    }

    /// Mutates the record under `key` in place; the tree shape is unchanged.
    pub fn update(
        &mut self,
        key: u64,
        timestamp: SimTime,
        mutate: impl FnOnce(&mut R),
    ) -> Result<UpdateOutcome, Stale> {
        let i = self.bucket_index(timestamp)?;
        match self.buckets[i].get_mut(key) {
            Some(record) => {
                mutate(record);
                Ok(UpdateOutcome::Updated)
            }
            None => Ok(UpdateOutcome::Absent),
        }
    }

    /// Drops expired buckets until `now` lies inside the live window again.
    /// Returns the number of records erased; a no-op if nothing is due.
    pub fn rotate(&mut self, now: SimTime) -> usize {
        let mut expired = 0;
        while now >= self.live_window().1 {
            if let Some(mut oldest) = self.buckets.pop_front() {
                expired += oldest.clear();
            }
            self.buckets.push_back(AvlTree::new());
            self.epoch_start += BUCKET_WIDTH;
        }
        expired
    }

    /// Record count per bucket, oldest first.
    pub fn bucket_sizes(&self) -> Vec<usize> {
        self.buckets.iter().map(|b| b.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Validates every bucket tree; see [`AvlTree::validate`].
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        self.buckets.iter().try_for_each(|b| b.validate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    fn store() -> BucketedStore<u32> {
        BucketedStore::new(SimTime::ZERO, SimTime::from_secs(2))
    }

    #[test]
    fn default_lifetime_yields_twenty_one_buckets() {
        let s = store();
        assert_eq!(s.bucket_count(), 21);
        assert_eq!(
            s.live_window(),
            (SimTime::ZERO, SimTime::from_millis(2_100))
        );
        assert_eq!(s.bucket_sizes(), vec![0; 21]);
    }

    #[test]
    fn lookup_on_empty_store_is_absent() {
        assert_eq!(store().lookup(42, SimTime::ZERO), Ok(None));
    }

    #[test]
    fn read_your_write() {
        let mut s = store();
        assert_eq!(s.insert(42, 7, SimTime::ZERO), Ok(InsertOutcome::Inserted));
        assert_eq!(s.lookup(42, SimTime::ZERO), Ok(Some(&7)));
    }

    #[test]
    fn stale_timestamps_are_signalled() {
        let mut s = store();
        assert_eq!(s.lookup(1, SimTime::from_millis(2_100)), Err(Stale));
        assert_eq!(s.insert(1, 1, SimTime::from_millis(2_100)), Err(Stale));
        assert_eq!(s.update(1, SimTime::from_millis(2_100), |_| {}), Err(Stale));
        // Rotating moves the window; what was bucket 0 becomes stale.
        s.insert(1, 1, SimTime::ZERO).unwrap();
        s.rotate(SimTime::from_millis(2_100));
        assert_eq!(s.lookup(1, SimTime::ZERO), Err(Stale));
    }

    #[test]
    fn bucket_membership_follows_timestamp() {
        let mut s = store();
        s.insert(10, 1, SimTime::from_millis(99)).unwrap(); // bucket 0
        s.insert(11, 1, SimTime::from_millis(100)).unwrap(); // bucket 1
        s.insert(12, 1, SimTime::from_millis(350)).unwrap(); // bucket 3
        let sizes = s.bucket_sizes();
        assert_eq!(sizes[0], 1);
        assert_eq!(sizes[1], 1);
        assert_eq!(sizes[3], 1);
        // Same key in a different bucket is a distinct record.
        assert_eq!(s.lookup(12, SimTime::from_millis(50)), Ok(None));
        assert_eq!(s.lookup(12, SimTime::from_millis(399)), Ok(Some(&1)));
    }

    #[test]
    fn rotate_on_empty_store_advances_window_one_step() {
        let mut s = store();
        assert_eq!(s.rotate(SimTime::from_millis(2_100)), 0);
        assert_eq!(
            s.live_window(),
            (SimTime::from_millis(100), SimTime::from_millis(2_200))
        );
    }

    #[test]
    fn rotate_counts_expired_records() {
        let mut s = store();
        for k in 0..50u64 {
            s.insert(k, 0, SimTime::from_millis(50)).unwrap();
        }
        assert_eq!(s.rotate(SimTime::from_millis(2_100)), 50);
        assert_eq!(s.len(), 0);
        assert_eq!(s.lookup(0, SimTime::from_millis(50)), Err(Stale));
    }

    #[test]
    fn record_is_gone_after_lifetime_plus_one_bucket() {
        let mut s = store();
        let t = SimTime::from_millis(250);
        s.insert(5, 5, t).unwrap();
        // Repeated rotation past t + lifetime + one bucket width.
        let mut now = SimTime::from_millis(2_100);
        while now <= t + SimTime::from_secs(2) + BUCKET_WIDTH {
            s.rotate(now);
            now += BUCKET_WIDTH;
        }
        assert_eq!(s.len(), 0);
        assert_eq!(s.lookup(5, t), Err(Stale));
    }

    #[test]
    fn rotate_catches_up_over_large_gaps() {
        let mut s = store();
        s.insert(1, 1, SimTime::from_millis(300)).unwrap();
        assert_eq!(s.rotate(SimTime::from_secs(60)), 1);
        let (start, end) = s.live_window();
        assert!(SimTime::from_secs(60) >= start && SimTime::from_secs(60) < end);
        assert!(start.is_bucket_aligned());
    }

    #[test]
    fn update_mutates_in_place() {
        let mut s = store();
        assert_eq!(
            s.update(9, SimTime::ZERO, |_| {}),
            Ok(UpdateOutcome::Absent)
        );
        s.insert(9, 7, SimTime::ZERO).unwrap();
        assert_eq!(
            s.update(9, SimTime::ZERO, |v| *v = 5),
            Ok(UpdateOutcome::Updated)
        );
        assert_eq!(s.lookup(9, SimTime::ZERO), Ok(Some(&5)));
    }

    #[test]
    fn wire_timestamp_resolution_is_window_relative() {
        let mut s = store();
        // Window [0, 2.1): byte 5 names 0.5s, byte 73 (7.3s) is outside.
        assert_eq!(
            s.resolve_wire_timestamp(WireTimestamp::from_byte(5).unwrap()),
            Ok(SimTime::from_millis(500))
        );
        assert_eq!(
            s.resolve_wire_timestamp(WireTimestamp::from_byte(73).unwrap()),
            Err(Stale)
        );
        // Advance the window to [6.0, 8.1): byte 73 now resolves.
        s.rotate(SimTime::from_millis(8_050));
        assert_eq!(s.live_window().0, SimTime::from_millis(6_000));
        assert_eq!(
            s.resolve_wire_timestamp(WireTimestamp::from_byte(73).unwrap()),
            Ok(SimTime::from_millis(7_300))
        );
        // A window straddling the 20s wrap still resolves uniquely.
        s.rotate(SimTime::from_millis(20_950));
        assert_eq!(s.live_window().0, SimTime::from_millis(18_900));
        assert_eq!(
            s.resolve_wire_timestamp(WireTimestamp::from_byte(3).unwrap()),
            Ok(SimTime::from_millis(20_300))
        );
        assert_eq!(
            s.resolve_wire_timestamp(WireTimestamp::from_byte(195).unwrap()),
            Ok(SimTime::from_millis(19_500))
        );
    }

    #[test]
    fn mixed_workload_matches_map_replay_oracle() {
        // Oracle: replay the same operations against a HashMap per bucket.
        let mut rng = StdRng::seed_from_u64(3);
        let mut s = store();
        let mut oracle: HashMap<(u64, u64), u32> = HashMap::new();
        for _ in 0..100 {
            let key = rng.gen_range(0..40u64);
            let t = SimTime::from_millis(rng.gen_range(0..21) * 100);
            let bucket = t.bucket_interval();
            if rng.gen_bool(0.5) {
                let v = rng.gen::<u32>();
                if s.insert(key, v, t).unwrap() == InsertOutcome::Inserted {
                    oracle.insert((bucket, key), v);
                }
            } else {
                let v = rng.gen::<u32>();
                let outcome = s.update(key, t, |r| *r = v).unwrap();
                match oracle.get_mut(&(bucket, key)) {
                    Some(slot) => {
                        assert_eq!(outcome, UpdateOutcome::Updated);
                        *slot = v;
                    }
                    None => assert_eq!(outcome, UpdateOutcome::Absent),
                }
            }
        }
        assert_eq!(s.len(), oracle.len());
        for ((bucket, key), v) in &oracle {
            let t = BUCKET_WIDTH.mul(*bucket);
            assert_eq!(s.lookup(*key, t).unwrap(), Some(v));
        }
        s.validate().unwrap();
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// One step of a store workload: insert or update at a bucket
        /// offset inside the live window, or advance the clock a bucket.
        #[derive(Debug, Clone, Copy)]
        enum Op {
            Insert { key: u64, offset: u64 },
            Update { key: u64, offset: u64 },
            Advance,
        }

        fn arb_op() -> impl Strategy<Value = Op> {
            prop_oneof![
                (0u64..48, 0u64..21).prop_map(|(key, offset)| Op::Insert { key, offset }),
                (0u64..48, 0u64..21).prop_map(|(key, offset)| Op::Update { key, offset }),
                Just(Op::Advance),
            ]
        }

        proptest! {
            /// Any operation sequence leaves every bucket tree valid and
            /// the store in lockstep with a plain map replay.
            #[test]
            fn any_sequence_preserves_invariants(ops in proptest::collection::vec(arb_op(), 1..240)) {
                let mut store: BucketedStore<u64> =
                    BucketedStore::new(SimTime::ZERO, SimTime::from_secs(2));
                let mut model = std::collections::BTreeMap::new();
                let mut now = SimTime::ZERO;
                for (serial, op) in ops.into_iter().enumerate() {
                    let value = serial as u64;
                    match op {
                        Op::Insert { key, offset } => {
                            let t = store.live_window().0 + BUCKET_WIDTH.mul(offset);
                            if store.insert(key, value, t).unwrap() == InsertOutcome::Inserted {
                                model.insert((t.bucket_interval(), key), value);
                            }
                        }
                        Op::Update { key, offset } => {
                            let t = store.live_window().0 + BUCKET_WIDTH.mul(offset);
                            let outcome = store.update(key, t, |v| *v = value).unwrap();
                            match model.get_mut(&(t.bucket_interval(), key)) {
                                Some(slot) => {
                                    prop_assert_eq!(outcome, UpdateOutcome::Updated);
                                    *slot = value;
                                }
                                None => prop_assert_eq!(outcome, UpdateOutcome::Absent),
                            }
                        }
                        Op::Advance => {
                            now += BUCKET_WIDTH;
                            let expired = store.rotate(now);
                            let cutoff = store.live_window().0.bucket_interval();
                            let before = model.len();
                            model.retain(|&(interval, _), _| interval >= cutoff);
                            prop_assert_eq!(before - model.len(), expired);
                        }
                    }
                }
                store.validate().unwrap();
                prop_assert_eq!(store.len(), model.len());
                for (&(interval, key), &value) in &model {
                    let t = BUCKET_WIDTH.mul(interval);
                    prop_assert_eq!(store.lookup(key, t).unwrap(), Some(&value));
                }
            }
        }
    }

    #[test]
    fn uniform_inserts_spread_evenly_across_buckets() {
        let mut rng = StdRng::seed_from_u64(17);
        let mut s = store();
        let per_bucket = 200usize;
        let total = per_bucket * 21;
        for _ in 0..total {
            let t = SimTime::from_micros(rng.gen_range(0..2_100_000));
            while s.insert(rng.gen(), 0, t) != Ok(InsertOutcome::Inserted) {}
        }
        for (i, size) in s.bucket_sizes().iter().enumerate() {
            let deviation = (*size as f64 - per_bucket as f64).abs();
            // 5 sigma of a binomial with p = 1/21.
            assert!(
                deviation < 5.0 * (total as f64 * (1.0 / 21.0) * (20.0 / 21.0)).sqrt(),
                "bucket {i} holds {size}, expected about {per_bucket}"
            );
        }
    }
}
