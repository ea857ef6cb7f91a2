//! Station automata and the protocol interface driven by the event loop.
//!
//! Every distributed algorithm is a vector of [`StationAutomaton`]s wrapped
//! in [`Distributed`]. The centralized scheduler implements [`Protocol`]
//! directly because its stations share a control unit.

use std::any::Any;
use std::collections::hash_map::DefaultHasher;
use std::collections::VecDeque;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Feedback, Message, Packet, Round, StationId};

mod ack_primes;
mod all_ones;
mod centralized;
mod delay;
mod mbtf;
mod reservation;
mod round_robin;
mod three_adaptive;
mod token_ring;
mod two_full_sensing;

pub use ack_primes::{ack_primes, ack_primes_schedule, AckPrimesStation, PrimeSchedule};
pub use all_ones::{all_ones, AllOnesStation};
pub use centralized::{centralized, Centralized};
pub use mbtf::{move_big_to_front, MbtfStation};
pub use reservation::{reservation_wrap, Reservation, ReservationStation};
pub use round_robin::{round_robin, RoundRobinStation};
pub use three_adaptive::{
    three_adaptive, three_adaptive_col_det, three_adaptive_window, ThreeAdaptiveStation,
};
pub use token_ring::{token_ring, two_adaptive, TokenRingStation};
pub use two_full_sensing::{two_full_sensing, two_full_sensing_i, TwoFullSensingStation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKind {
    /// Transmits according to a fixed sequence indexed by the rounds spent
    /// on the current packet.
    AckBased,
    /// Listens every round but sends no control bits.
    FullSensing,
    /// May attach control bits.
    Adaptive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlgorithmClass {
    pub kind: ClassKind,
    pub withholds_channel: bool,
    pub queue_size_oblivious: bool,
    pub requires_collision_detection: bool,
}

impl AlgorithmClass {
    pub const fn new(kind: ClassKind) -> Self {
        AlgorithmClass {
            kind,
            withholds_channel: false,
            queue_size_oblivious: false,
            requires_collision_detection: false,
        }
    }

    /// Ack-based automata also satisfy the full-sensing restriction.
    pub fn is_full_sensing(self) -> bool {
        matches!(self.kind, ClassKind::AckBased | ClassKind::FullSensing)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AlgorithmError {
    #[error("round {round}: station {station}: {detail}")]
    Invariant {
        round: Round,
        station: StationId,
        detail: String,
    },
    #[error("{0}")]
    Config(String),
}

/// FIFO queue plus the pending packet held outside it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Mailbox {
    pending: Option<Packet>,
    queue: VecDeque<Packet>,
}

impl Mailbox {
    pub fn pending(&self) -> Option<&Packet> {
        self.pending.as_ref()
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    pub fn queue(&self) -> &VecDeque<Packet> {
        &self.queue
    }

    /// Real packets stored, pending included.
    pub fn stored(&self) -> usize {
        self.pending.iter().filter(|p| !p.dummy).count() + self.queue.len()
    }

    pub fn enqueue(&mut self, packets: impl IntoIterator<Item = Packet>) {
        self.queue.extend(packets);
    }

    pub fn take_pending(&mut self) -> Option<Packet> {
        self.pending.take()
    }

    pub fn set_pending(&mut self, packet: Packet) {
        debug_assert!(self.pending.is_none());
        self.pending = Some(packet);
    }

    pub fn pop_queue(&mut self) -> Option<Packet> {
        self.queue.pop_front()
    }

    /// Moves the queue head into the empty pending slot.
    pub fn refill(&mut self) {
        if self.pending.is_none() {
            self.pending = self.queue.pop_front();
        }
    }

    /// End-of-round bookkeeping: a heard pending packet is discarded,
    /// injections are enqueued and the pending slot refilled.
    pub fn settle(&mut self, heard_own: bool, injected: Vec<Packet>) {
        if heard_own {
            self.pending = None;
        }
        self.queue.extend(injected);
        self.refill();
    }

    /// Replaces ids and injection rounds by ages relative to `now`.
    pub fn relativize(&mut self, now: Round) {
        let rel = |p: &mut Packet| {
            p.injected_round = now - p.injected_round;
            p.id = crate::channel::PacketId(0);
        };
        self.pending.iter_mut().for_each(rel);
        self.queue.iter_mut().for_each(rel);
    }
}

/// A deterministic per-station state machine.
pub trait StationAutomaton: Clone + fmt::Debug + Hash + Send + Sync + 'static {
    fn id(&self) -> StationId;

    /// Transmission for `round`. Pure in the current state.
    fn decide(&self, round: Round) -> Option<Message>;

    /// Applies the round's outcome. `sent` tells whether this station
    /// transmitted; `injected` holds the packets injected into it.
    fn transition(
        &mut self,
        round: Round,
        feedback: &Feedback,
        sent: bool,
        injected: Vec<Packet>,
    ) -> Result<(), AlgorithmError>;

    fn mailbox(&self) -> &Mailbox;

    fn mailbox_mut(&mut self) -> &mut Mailbox;

    fn class(&self) -> AlgorithmClass;

    fn stored(&self) -> usize {
        self.mailbox().stored()
    }

    /// Whether `round` is claimed by a reservation. Only the reservation
    /// wrapper has such rounds.
    fn is_reserved(&self, _round: Round) -> bool {
        false
    }

    /// Hash of the state with packet ids and absolute times removed.
    fn canonical_hash(&self, now: Round, h: &mut DefaultHasher) {
        let mut c = self.clone();
        c.mailbox_mut().relativize(now);
        c.hash(h);
    }
}

/// The system-wide interface driven by the event loop.
pub trait Protocol: Send + Sync {
    fn name(&self) -> String;

    fn n(&self) -> usize;

    fn class(&self) -> AlgorithmClass;

    /// One entry per station, station 1 first.
    fn decide(&self, round: Round) -> Vec<Option<Message>>;

    fn transition(
        &mut self,
        round: Round,
        feedback: &Feedback,
        sent: &[bool],
        injected: Vec<Vec<Packet>>,
    ) -> Result<(), AlgorithmError>;

    /// Real packets stored at `station`, pending included.
    fn stored(&self, station: StationId) -> usize;

    fn pending(&self, station: StationId) -> Option<&Packet>;

    /// See [`StationAutomaton::is_reserved`].
    fn is_reserved(&self, _round: Round) -> bool {
        false
    }

    fn clone_box(&self) -> Box<dyn Protocol>;

    fn fingerprint(&self) -> u64;

    /// See [`crate::channel::SimulationState::canonical_key`].
    fn canonical_key(&self, now: Round) -> u64;

    fn as_any(&self) -> &dyn Any;
}

/// Independent stations that communicate only through the channel.
#[derive(Clone, Debug, Hash)]
pub struct Distributed<A> {
    name: String,
    stations: Vec<A>,
}

impl<A: StationAutomaton> Distributed<A> {
    pub fn new(name: impl Into<String>, stations: Vec<A>) -> Self {
        assert!(!stations.is_empty(), "at least one station");
        for (i, s) in stations.iter().enumerate() {
            assert_eq!(s.id(), StationId::from_index(i), "stations in name order");
        }
        Distributed {
            name: name.into(),
            stations,
        }
    }

    pub fn stations(&self) -> &[A] {
        &self.stations
    }

    pub fn station(&self, id: StationId) -> &A {
        &self.stations[id.index()]
    }

    pub fn into_stations(self) -> Vec<A> {
        self.stations
    }
}

impl<A: StationAutomaton> Protocol for Distributed<A> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn n(&self) -> usize {
        self.stations.len()
    }

    fn class(&self) -> AlgorithmClass {
        self.stations[0].class()
    }

    fn decide(&self, round: Round) -> Vec<Option<Message>> {
        self.stations.iter().map(|s| s.decide(round)).collect()
    }

    fn transition(
        &mut self,
        round: Round,
        feedback: &Feedback,
        sent: &[bool],
        injected: Vec<Vec<Packet>>,
    ) -> Result<(), AlgorithmError> {
        for ((s, &sent), inj) in self.stations.iter_mut().zip(sent).zip(injected) {
            s.transition(round, feedback, sent, inj)?;
        }
        Ok(())
    }

    fn stored(&self, station: StationId) -> usize {
        self.stations[station.index()].stored()
    }

    fn pending(&self, station: StationId) -> Option<&Packet> {
        self.stations[station.index()].mailbox().pending()
    }

    fn is_reserved(&self, round: Round) -> bool {
        self.stations[0].is_reserved(round)
    }

    fn clone_box(&self) -> Box<dyn Protocol> {
        Box::new(self.clone())
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }

    fn canonical_key(&self, now: Round) -> u64 {
        let mut h = DefaultHasher::new();
        for s in &self.stations {
            s.canonical_hash(now, &mut h);
        }
        h.finish()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Whether this station's packet was heard: it transmitted alone and its
/// message carried a packet.
pub(crate) fn heard_own(feedback: &Feedback, sent: bool) -> bool {
    sent && feedback.message().is_some_and(|m| m.packet().is_some())
}
