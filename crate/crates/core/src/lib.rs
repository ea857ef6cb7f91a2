//! Round-accurate simulation of deterministic broadcast algorithms on a
//! synchronous multiple access channel under adversarial packet injection.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`]: feedback semantics, packets, the per-round event loop and
//!   cloneable simulation snapshots.
//! * [`adversary`]: window and leaky-bucket injection constraints, an
//!   incremental feasibility checker and non-adaptive injection sources.
//! * [`algorithms`]: station automata for every broadcast protocol, plus a
//!   centralized scheduler and the round-reservation wrapper.
//! * [`search`]: adaptive adversaries that probe cloned states to force void
//!   rounds, and an exhaustive reachable-state explorer.
//! * [`metrics`]: quality-of-service extraction and named bound checks.

pub mod adversary;
pub mod algorithms;
pub mod channel;
pub mod metrics;
pub mod search;

pub use adversary::{AdversaryType, InjectionScript, Rate, Violation};
pub use algorithms::{AlgorithmClass, ClassKind, Protocol, StationAutomaton};
pub use channel::{
    ChannelConfig, Control, Feedback, Message, Packet, PacketId, Round, RoundRecord,
    SimulationState, StationId, Trace,
};
pub use metrics::{Bound, BoundCheck, QoSReport};
