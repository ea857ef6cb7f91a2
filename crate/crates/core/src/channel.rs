//! Channel semantics, packets and the per-round event loop.
//!
//! A round proceeds in four steps: every station decides to transmit or
//! pause, the channel computes one feedback value heard by everybody, the
//! round's injections are enqueued, and finally every station transitions.
//! Injections made at round `t` can therefore first influence a transmission
//! at round `t + 1`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversaryType, FeasibilityTracker, Violation};
use crate::algorithms::{AlgorithmError, Protocol};

/// Round ordinal. The first round of every execution is round 1.
pub type Round = u64;

/// Station name in `1..=n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationId(pub u32);

impl StationId {
    /// Zero-based index into per-station vectors.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Self {
        StationId(i as u32 + 1)
    }

    /// The station after `self` in the cyclic order `1, 2, .., n, 1`.
    pub fn next(self, n: usize) -> Self {
        StationId(self.0 % n as u32 + 1)
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Execution-unique packet ordinal, assigned in injection order from 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PacketId(pub u64);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Packet {
    pub id: PacketId,
    pub injected_round: Round,
    pub station: StationId,
    /// Placeholder created by the reservation wrapper. Never injected.
    pub dummy: bool,
}

/// Up to 64 algorithm-defined control bits, read in push order.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Control {
    len: u8,
    bits: u64,
}

impl Control {
    pub const EMPTY: Control = Control { len: 0, bits: 0 };

    pub fn flag(bit: bool) -> Self {
        Control::EMPTY.push(bit)
    }

    pub fn len(self) -> usize {
        self.len as usize
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    pub fn push(self, bit: bool) -> Self {
        assert!(self.len < 64, "control payload limited to 64 bits");
        Control {
            len: self.len + 1,
            bits: self.bits | (u64::from(bit) << self.len),
        }
    }

    /// Appends the low `width` bits of `value`, least significant first.
    pub fn push_uint(self, value: u64, width: u32) -> Self {
        (0..width).fold(self, |c, k| c.push(value >> k & 1 == 1))
    }

    pub fn append(self, other: Control) -> Self {
        (0..other.len()).fold(self, |c, k| c.push(other.bit(k)))
    }

    /// Bit `k`, or `false` past the end.
    pub fn bit(self, k: usize) -> bool {
        k < self.len() && self.bits >> k & 1 == 1
    }

    pub fn uint(self, from: usize, width: u32) -> u64 {
        (0..width as usize).fold(0, |acc, k| acc | (u64::from(self.bit(from + k)) << k))
    }

    /// Splits into the first `k` bits and the rest.
    pub fn split_at(self, k: usize) -> (Control, Control) {
        let head = (0..k.min(self.len())).fold(Control::EMPTY, |c, j| c.push(self.bit(j)));
        let tail = (k..self.len()).fold(Control::EMPTY, |c, j| c.push(self.bit(j)));
        (head, tail)
    }
}

impl fmt::Debug for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Control(")?;
        for k in 0..self.len() {
            write!(f, "{}", u8::from(self.bit(k)))?;
        }
        write!(f, ")")
    }
}

/// A transmission. Never empty: a message without packet carries control bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    packet: Option<Packet>,
    control: Control,
}

impl Message {
    pub fn new(packet: Option<Packet>, control: Control) -> Option<Self> {
        if packet.is_none() && control.is_empty() {
            None
        } else {
            Some(Message { packet, control })
        }
    }

    pub fn with_packet(packet: Packet) -> Self {
        Message {
            packet: Some(packet),
            control: Control::EMPTY,
        }
    }

    pub fn packet_with(packet: Packet, control: Control) -> Self {
        Message {
            packet: Some(packet),
            control,
        }
    }

    /// Control-only message. Panics on an empty payload.
    pub fn control_only(control: Control) -> Self {
        assert!(
            !control.is_empty(),
            "a message needs a packet or control bits"
        );
        Message {
            packet: None,
            control,
        }
    }

    pub fn packet(&self) -> Option<&Packet> {
        self.packet.as_ref()
    }

    pub fn control(&self) -> Control {
        self.control
    }

    pub fn with_control(mut self, control: Control) -> Self {
        self.control = control;
        self
    }
}

/// What every station hears at the end of a round.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feedback {
    Heard(Message),
    Silence,
    /// Delivered only on channels with collision detection.
    Collision,
}

impl Feedback {
    pub fn message(&self) -> Option<&Message> {
        match self {
            Feedback::Heard(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_heard(&self) -> bool {
        matches!(self, Feedback::Heard(_))
    }

    /// The real (non-dummy) packet heard this round, if any.
    pub fn heard_packet(&self) -> Option<&Packet> {
        self.message()
            .and_then(Message::packet)
            .filter(|p| !p.dummy)
    }

    /// Void rounds carry no real packet: silence, collision, control-only or
    /// dummy messages.
    pub fn is_void(&self) -> bool {
        self.heard_packet().is_none()
    }

    pub fn label(&self) -> &'static str {
        match self {
            Feedback::Heard(_) => "heard",
            Feedback::Silence => "silence",
            Feedback::Collision => "collision",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub n: usize,
    pub collision_detection: bool,
}

/// Per-round injection counts, as `(station, count)` pairs.
pub type RoundInjections = Vec<(StationId, u32)>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: Round,
    pub injections: RoundInjections,
    /// Id of the first packet injected this round; later ones follow in
    /// injection order.
    pub first_packet_id: u64,
    /// Sorted.
    pub transmitters: Vec<StationId>,
    pub feedback: Feedback,
    /// Stored packets per station at the end of the round, pending included,
    /// dummies excluded.
    pub queue_sizes: Vec<u32>,
    pub heard_packet: Option<PacketId>,
}

impl RoundRecord {
    pub fn injected_total(&self) -> u64 {
        self.injections.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    pub fn total_stored(&self) -> u64 {
        self.queue_sizes.iter().map(|&c| u64::from(c)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub config: ChannelConfig,
    pub adversary_type: AdversaryType,
    pub algorithm: String,
    pub records: Vec<RoundRecord>,
}

impl Trace {
    pub fn horizon(&self) -> u64 {
        self.records.len() as u64
    }

    /// Per-round injections, suitable for replay.
    pub fn injections(&self) -> Vec<RoundInjections> {
        self.records.iter().map(|r| r.injections.clone()).collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("injection names station {station} but the channel has {n} stations")]
    UnknownStation { station: StationId, n: usize },
    #[error("algorithm {algorithm} requires a channel with collision detection")]
    NeedsCollisionDetection { algorithm: String },
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RunError {
    #[error("infeasible injection: {0}")]
    Infeasible(Violation),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Full system snapshot. Cloning yields an independent copy.
pub struct SimulationState {
    round: Round,
    protocol: Box<dyn Protocol>,
    config: ChannelConfig,
    next_packet: u64,
}

impl Clone for SimulationState {
    fn clone(&self) -> Self {
        SimulationState {
            round: self.round,
            protocol: self.protocol.clone_box(),
            config: self.config,
            next_packet: self.next_packet,
        }
    }
}

impl fmt::Debug for SimulationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimulationState")
            .field("round", &self.round)
            .field("algorithm", &self.protocol.name())
            .field("config", &self.config)
            .field("stored", &self.stored())
            .finish()
    }
}

impl SimulationState {
    pub fn new(protocol: Box<dyn Protocol>, collision_detection: bool) -> Result<Self, SimError> {
        if protocol.class().requires_collision_detection && !collision_detection {
            return Err(SimError::NeedsCollisionDetection {
                algorithm: protocol.name(),
            });
        }
        let config = ChannelConfig {
            n: protocol.n(),
            collision_detection,
        };
        Ok(SimulationState {
            round: 0,
            protocol,
            config,
            next_packet: 0,
        })
    }

    /// Number of completed rounds.
    pub fn round(&self) -> Round {
        self.round
    }

    pub fn config(&self) -> ChannelConfig {
        self.config
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn protocol(&self) -> &dyn Protocol {
        self.protocol.as_ref()
    }

    pub fn algorithm(&self) -> String {
        self.protocol.name()
    }

    /// Stored packets per station, pending included.
    pub fn stored(&self) -> Vec<u32> {
        (0..self.n())
            .map(|i| self.protocol.stored(StationId::from_index(i)) as u32)
            .collect()
    }

    pub fn total_stored(&self) -> u64 {
        self.stored().iter().map(|&c| u64::from(c)).sum()
    }

    /// Stations that would transmit next round if nothing else changed.
    pub fn next_transmitters(&self) -> Vec<StationId> {
        self.protocol
            .decide(self.round + 1)
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_some())
            .map(|(i, _)| StationId::from_index(i))
            .collect()
    }

    /// Hash of the complete state, for detecting accidental mutation.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.round.hash(&mut h);
        self.next_packet.hash(&mut h);
        self.config.hash(&mut h);
        self.protocol.fingerprint().hash(&mut h);
        h.finish()
    }

    /// Hash that ignores absolute time and packet ids: two states with the
    /// same key behave identically under time-shifted injections.
    pub fn canonical_key(&self) -> u64 {
        self.protocol.canonical_key(self.round)
    }

    /// Executes one round with the given injections.
    pub fn step(&mut self, injections: &[(StationId, u32)]) -> Result<RoundRecord, SimError> {
        let n = self.n();
        if let Some(&(station, _)) = injections
            .iter()
            .find(|&&(s, _)| s.0 == 0 || s.index() >= n)
        {
            return Err(SimError::UnknownStation { station, n });
        }
        let round = self.round + 1;

        let decisions = self.protocol.decide(round);
        let transmitters: Vec<StationId> = decisions
            .iter()
            .enumerate()
            .filter(|(_, m)| m.is_some())
            .map(|(i, _)| StationId::from_index(i))
            .collect();
        let feedback = match transmitters.len() {
            1 => Feedback::Heard(
                decisions
                    .into_iter()
                    .flatten()
                    .next()
                    .expect("one transmitter"),
            ),
            0 => Feedback::Silence,
            _ if self.config.collision_detection => Feedback::Collision,
            _ => Feedback::Silence,
        };

        let first_packet_id = self.next_packet;
        let mut injected: Vec<Vec<Packet>> = vec![Vec::new(); n];
        for &(station, count) in injections {
            for _ in 0..count {
                injected[station.index()].push(Packet {
                    id: PacketId(self.next_packet),
                    injected_round: round,
                    station,
                    dummy: false,
                });
                self.next_packet += 1;
            }
        }

        let mut sent = vec![false; n];
        for s in &transmitters {
            sent[s.index()] = true;
        }
        self.protocol
            .transition(round, &feedback, &sent, injected)?;
        self.round = round;

        Ok(RoundRecord {
            round,
            injections: injections
                .iter()
                .filter(|&&(_, c)| c > 0)
                .copied()
                .collect(),
            first_packet_id,
            transmitters,
            heard_packet: feedback.heard_packet().map(|p| p.id),
            feedback,
            queue_sizes: self.stored(),
        })
    }
}

/// Executes one round. See [`SimulationState::step`].
pub fn step_round(
    state: &mut SimulationState,
    injections: &[(StationId, u32)],
) -> Result<RoundRecord, SimError> {
    state.step(injections)
}

pub fn clone_state(state: &SimulationState) -> SimulationState {
    state.clone()
}

/// Decides the injections of the next round, possibly by inspecting the
/// current state.
pub trait InjectionSource {
    fn next_injections(&mut self, state: &SimulationState) -> RoundInjections;
}

/// Runs `horizon` rounds, checking every injection online against `ty`.
pub fn run(
    mut state: SimulationState,
    source: &mut dyn InjectionSource,
    ty: AdversaryType,
    horizon: u64,
) -> Result<Trace, RunError> {
    let mut tracker = FeasibilityTracker::new(ty);
    let mut records = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        let injections = source.next_injections(&state);
        let total = injections.iter().map(|&(_, c)| u64::from(c)).sum();
        tracker.push(total).map_err(RunError::Infeasible)?;
        records.push(state.step(&injections)?);
    }
    Ok(Trace {
        config: state.config(),
        adversary_type: ty,
        algorithm: state.algorithm(),
        records,
    })
}
