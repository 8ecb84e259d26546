//! Simulation clock and the one-byte wire timestamp.
//!
//! All protocol timing is expressed in [`SimTime`], an integer count of
//! microseconds since simulation start. Integer time keeps event ordering
//! and bucket arithmetic exact, which the deterministic simulator relies on.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Width of one seed-store bucket: 0.1 s.
pub const BUCKET_WIDTH: SimTime = SimTime::from_millis(100);

/// Number of 0.1 s intervals the wire timestamp distinguishes (20 s worth).
pub const TIMESTAMP_MODULUS: u64 = 200;

/// A point on the simulation clock, in microseconds since simulation start.
///
/// The same type doubles as a duration/offset; the arithmetic below is all
/// the simulator needs and keeps the module free of unit juggling.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    /// Rounds to the nearest microsecond. Negative and non-finite inputs
    /// clamp to zero; config validation rejects those before they get here.
    pub fn from_secs_f64(s: f64) -> Self {
        if !s.is_finite() || s <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((s * 1e6).round() as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub const fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Integer multiple of a duration-like value.
    pub const fn mul(self, n: u64) -> SimTime {
        SimTime(self.0 * n)
    }

    /// Index of the 0.1 s interval this instant falls in.
    pub const fn bucket_interval(self) -> u64 {
        self.0 / BUCKET_WIDTH.0
    }

    /// True if this instant is an exact bucket boundary.
    pub const fn is_bucket_aligned(self) -> bool {
        self.0.is_multiple_of(BUCKET_WIDTH.0)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs_f64())
    }
}

/// The one-byte timestamp carried by every wire message.
///
/// It names a 0.1 s interval modulo 20 s: 200 distinct values, so a single
/// byte suffices. Receivers resolve it back to an absolute bucket through
/// their live store window, which is far narrower than 20 s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WireTimestamp(u8);

impl WireTimestamp {
    /// Encodes an absolute instant: 0.1 s units, modulo 20 s.
    pub fn from_time(t: SimTime) -> Self {
        WireTimestamp((t.bucket_interval() % TIMESTAMP_MODULUS) as u8)
    }

    /// Accepts a raw byte if it names one of the 200 valid intervals.
    pub fn from_byte(b: u8) -> Option<Self> {
        if (b as u64) < TIMESTAMP_MODULUS {
            Some(WireTimestamp(b))
        } else {
            None
        }
    }

    pub const fn as_byte(self) -> u8 {
        self.0
    }
}

impl fmt::Display for WireTimestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_timestamp_is_tenths_mod_twenty_seconds() {
        // 7.35 s lies in the interval starting at 7.3 s: byte 73.
        assert_eq!(
            WireTimestamp::from_time(SimTime::from_millis(7_350)).as_byte(),
            73
        );
        // 20 s wraps back to 0, 21.5 s to 15.
        assert_eq!(
            WireTimestamp::from_time(SimTime::from_secs(20)).as_byte(),
            0
        );
        assert_eq!(
            WireTimestamp::from_time(SimTime::from_millis(21_500)).as_byte(),
            15
        );
    }

    #[test]
    fn wire_timestamp_rejects_out_of_range_bytes() {
        assert!(WireTimestamp::from_byte(199).is_some());
        assert!(WireTimestamp::from_byte(200).is_none());
        assert!(WireTimestamp::from_byte(255).is_none());
    }

    #[test]
    fn sim_time_round_trips_seconds() {
        let t = SimTime::from_secs_f64(1.234567);
        assert_eq!(t.as_micros(), 1_234_567);
        assert!((t.as_secs_f64() - 1.234567).abs() < 1e-9);
    }
}
