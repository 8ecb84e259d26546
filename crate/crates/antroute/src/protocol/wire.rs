//! Fixed binary framings for the wire messages.
//!
//! All integers are most-significant-byte first. Frames:
//!
//! ```text
//! pheromone     [kind=0x01][direction:1][seed:8][counter:1][fees:4][amount:4][timestamp:1]  = 20 B
//! match         [kind=0x02][direction:1][seed:8][match_id:8][counter:1][total_counter:1][total_fees:4][timestamp:1] = 25 B
//! confirmation  [kind=0x03][match_id:8][list_len:1][checks:8*len][timestamp:1]
//! ```

use crate::seedstore::Direction;
use crate::time::WireTimestamp;

use super::messages::{ConfirmationMessage, MatchMessage, Message, PheromoneMessage};

pub const PHEROMONE_FRAME_LEN: usize = 20;
pub const MATCH_FRAME_LEN: usize = 25;
/// Confirmation frames are 11 bytes plus 8 per check integer.
pub const CONFIRMATION_BASE_LEN: usize = 11;
/// A single length byte caps the check list.
pub const MAX_CHECK_LIST_LEN: usize = 255;

const KIND_PHEROMONE: u8 = 0x01;
const KIND_MATCH: u8 = 0x02;
const KIND_CONFIRMATION: u8 = 0x03;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("buffer too short: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("{extra} trailing bytes after a complete frame")]
    TrailingBytes { extra: usize },
    #[error("unknown message kind 0x{0:02x}")]
    UnknownKind(u8),
    #[error("invalid direction byte 0x{0:02x}")]
    InvalidDirection(u8),
    #[error("timestamp byte {0} out of range (must be < 200)")]
    InvalidTimestamp(u8),
    #[error("check list of {0} entries exceeds the 255-entry frame limit")]
    CheckListTooLong(usize),
}

impl Message {
    /// Size of the encoded frame in bytes.
    pub fn frame_len(&self) -> usize {
        match self {
            Message::Pheromone(_) => PHEROMONE_FRAME_LEN,
            Message::Match(_) => MATCH_FRAME_LEN,
            Message::Confirmation(m) => CONFIRMATION_BASE_LEN + 8 * m.check_list.len(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let mut buf = Vec::with_capacity(self.frame_len());
        match self {
            Message::Pheromone(m) => {
                buf.push(KIND_PHEROMONE);
                buf.push(m.direction as u8);
                buf.extend_from_slice(&m.seed.to_be_bytes());
                buf.push(m.counter);
                buf.extend_from_slice(&m.remaining_fees.to_be_bytes());
                buf.extend_from_slice(&m.amount.to_be_bytes());
                buf.push(m.timestamp.as_byte());
            }
            Message::Match(m) => {
                buf.push(KIND_MATCH);
                buf.push(m.direction as u8);
                buf.extend_from_slice(&m.seed.to_be_bytes());
                buf.extend_from_slice(&m.match_id.to_be_bytes());
                buf.push(m.counter);
                buf.push(m.total_counter);
                buf.extend_from_slice(&m.total_fees.to_be_bytes());
                buf.push(m.timestamp.as_byte());
            }
            Message::Confirmation(m) => {
                if m.check_list.len() > MAX_CHECK_LIST_LEN {
                    return Err(CodecError::CheckListTooLong(m.check_list.len()));
                }
                buf.push(KIND_CONFIRMATION);
                buf.extend_from_slice(&m.match_id.to_be_bytes());
                buf.push(m.check_list.len() as u8);
                for check in &m.check_list {
                    buf.extend_from_slice(&check.to_be_bytes());
                }
                buf.push(m.timestamp.as_byte());
            }
        }
        debug_assert_eq!(buf.len(), self.frame_len());
        Ok(buf)
    }

    pub fn decode(bytes: &[u8]) -> Result<Message, CodecError> {
        let mut r = Reader { bytes, pos: 0 };
        let kind = r.u8()?;
        let message = match kind {
            KIND_PHEROMONE => {
                let direction = r.direction()?;
                let seed = r.u64()?;
                let counter = r.u8()?;
                let remaining_fees = r.u32()?;
                let amount = r.u32()?;
                let timestamp = r.timestamp()?;
                Message::Pheromone(PheromoneMessage {
                    direction,
                    seed,
                    counter,
                    remaining_fees,
                    amount,
                    timestamp,
                })
            }
            KIND_MATCH => {
                let direction = r.direction()?;
                let seed = r.u64()?;
                let match_id = r.u64()?;
                let counter = r.u8()?;
                let total_counter = r.u8()?;
                let total_fees = r.u32()?;
                let timestamp = r.timestamp()?;
                Message::Match(MatchMessage {
                    direction,
                    seed,
                    match_id,
                    counter,
                    total_counter,
                    total_fees,
                    timestamp,
                })
            }
            KIND_CONFIRMATION => {
                let match_id = r.u64()?;
                let len = r.u8()? as usize;
                let mut check_list = Vec::with_capacity(len);
                for _ in 0..len {
                    check_list.push(r.u64()?);
                }
                let timestamp = r.timestamp()?;
                Message::Confirmation(ConfirmationMessage {
                    match_id,
                    check_list,
                    timestamp,
                })
            }
            other => return Err(CodecError::UnknownKind(other)),
        };
        if r.pos != bytes.len() {
            return Err(CodecError::TrailingBytes {
                extra: bytes.len() - r.pos,
            });
        }
        Ok(message)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CodecError> {
        if self.pos + n > self.bytes.len() {
            return Err(CodecError::Truncated {
                need: self.pos + n,
                have: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn direction(&mut self) -> Result<Direction, CodecError> {
        let b = self.u8()?;
        Direction::from_byte(b).ok_or(CodecError::InvalidDirection(b))
    }

    fn timestamp(&mut self) -> Result<WireTimestamp, CodecError> {
        let b = self.u8()?;
        WireTimestamp::from_byte(b).ok_or(CodecError::InvalidTimestamp(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;
    use proptest::prelude::*;

    fn ts(b: u8) -> WireTimestamp {
        WireTimestamp::from_byte(b).unwrap()
    }

    #[test]
    fn frame_sizes_match_the_declared_layout() {
        let p = Message::Pheromone(PheromoneMessage {
            direction: Direction::FromPayer,
            seed: 1,
            counter: 64,
            remaining_fees: 100,
            amount: 50,
            timestamp: ts(0),
        });
        assert_eq!(p.encode().unwrap().len(), 20);
        let m = Message::Match(MatchMessage {
            direction: Direction::FromPayee,
            seed: 1,
            match_id: 2,
            counter: 64,
            total_counter: 130,
            total_fees: 60,
            timestamp: ts(0),
        });
        assert_eq!(m.encode().unwrap().len(), 25);
        let c = Message::Confirmation(ConfirmationMessage {
            match_id: 2,
            check_list: vec![1, 2, 3],
            timestamp: ts(0),
        });
        assert_eq!(c.encode().unwrap().len(), 11 + 24);
    }

    #[test]
    fn timestamp_byte_is_tenths_of_seconds() {
        let m = Message::Pheromone(PheromoneMessage {
            direction: Direction::FromPayer,
            seed: 9,
            counter: 70,
            remaining_fees: 10,
            amount: 1,
            timestamp: WireTimestamp::from_time(SimTime::from_millis(7_350)),
        });
        let bytes = m.encode().unwrap();
        assert_eq!(bytes[19], 73);
    }

    #[test]
    fn decode_rejects_malformed_frames() {
        let good = Message::Match(MatchMessage {
            direction: Direction::FromPayer,
            seed: 1,
            match_id: 2,
            counter: 64,
            total_counter: 130,
            total_fees: 60,
            timestamp: ts(5),
        })
        .encode()
        .unwrap();
        assert!(matches!(
            Message::decode(&good[..good.len() - 1]),
            Err(CodecError::Truncated { .. })
        ));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(
            Message::decode(&long),
            Err(CodecError::TrailingBytes { extra: 1 })
        ));
        let mut bad_kind = good.clone();
        bad_kind[0] = 0x7f;
        assert_eq!(
            Message::decode(&bad_kind),
            Err(CodecError::UnknownKind(0x7f))
        );
        let mut bad_dir = good.clone();
        bad_dir[1] = 2;
        assert_eq!(
            Message::decode(&bad_dir),
            Err(CodecError::InvalidDirection(2))
        );
        let mut bad_ts = good;
        *bad_ts.last_mut().unwrap() = 200;
        assert_eq!(
            Message::decode(&bad_ts),
            Err(CodecError::InvalidTimestamp(200))
        );
    }

    #[test]
    fn oversized_check_list_fails_to_encode() {
        let c = Message::Confirmation(ConfirmationMessage {
            match_id: 1,
            check_list: vec![0; 256],
            timestamp: ts(0),
        });
        assert_eq!(c.encode(), Err(CodecError::CheckListTooLong(256)));
    }

    prop_compose! {
        fn arb_message()(
            kind in 0u8..3,
            direction in 0u8..2,
            seed in any::<u64>(),
            match_id in any::<u64>(),
            counter in any::<u8>(),
            total_counter in any::<u8>(),
            fees in any::<u32>(),
            amount in any::<u32>(),
            ts_byte in 0u8..200,
            checks in proptest::collection::vec(any::<u64>(), 0..12),
        ) -> Message {
            let direction = Direction::from_byte(direction).unwrap();
            let timestamp = WireTimestamp::from_byte(ts_byte).unwrap();
            match kind {
                0 => Message::Pheromone(PheromoneMessage {
                    direction, seed, counter, remaining_fees: fees, amount, timestamp,
                }),
                1 => Message::Match(MatchMessage {
                    direction, seed, match_id, counter, total_counter, total_fees: fees, timestamp,
                }),
                _ => Message::Confirmation(ConfirmationMessage {
                    match_id, check_list: checks, timestamp,
                }),
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_identity(message in arb_message()) {
            let bytes = message.encode().unwrap();
            prop_assert_eq!(bytes.len(), message.frame_len());
            let decoded = Message::decode(&bytes).unwrap();
            prop_assert_eq!(decoded, message);
        }
    }
}
