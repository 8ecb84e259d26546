//! Message formats, wire codecs and the per-node routing state machine.

pub mod messages;
mod node;
pub mod wire;

pub use messages::{
    select_candidate, ConfirmationMessage, MatchMessage, Message, MessageKind, NodeId,
    PaymentRequest, PheromoneMessage, RequestError, RouteCandidate, SelectionPolicy,
};
pub use node::{
    AntNode, ChannelView, CheaterMode, ControlOut, HandlerOutput, NodeError, NodeStats, Note,
    OriginateError, Outbound, ProtocolConfig, VerifyOutcome,
};
pub use wire::{CodecError, CONFIRMATION_BASE_LEN, MATCH_FRAME_LEN, PHEROMONE_FRAME_LEN};
