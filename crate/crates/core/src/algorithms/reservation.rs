//! Round-reservation wrapper that makes a queue-size oblivious algorithm
//! retaining.
//!
//! Every station keeps an identical table of reserved future rounds. Rounds
//! not in the table are *regular*: the inner algorithm runs on them alone,
//! numbering them consecutively. In a reserved round only its owner
//! transmits, sending its pending packet. Every transmission carries a
//! reservation action chosen from the sender's remaining packets: with
//! packets left it reserves the second unreserved round ahead, dropping any
//! earlier reservation of its own; with none left it cancels its
//! reservation. The earliest unreserved round is thus never taken, so
//! regular rounds keep occurring.
//!
//! Injections during reserved rounds wait in a buffer and reach the inner
//! algorithm at the next regular round. When a reserved transmission leaves
//! a station with nothing to send, a dummy pending packet stands in for the
//! inner algorithm; it is dropped when heard and replaced as soon as a real
//! packet arrives.

use std::collections::{BTreeMap, VecDeque};

use crate::channel::{Control, Feedback, Message, Packet, PacketId, Round, StationId};

use super::{
    heard_own, AlgorithmClass, AlgorithmError, ClassKind, Distributed, Mailbox, StationAutomaton,
};

/// Action bits carried in front of every wrapped message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reservation {
    Keep,
    Reserve,
    Cancel,
}

const SENDER_BITS: u32 = 8;
const PREFIX_BITS: usize = 2 + SENDER_BITS as usize;

impl Reservation {
    fn code(self) -> u64 {
        match self {
            Reservation::Keep => 0,
            Reservation::Reserve => 1,
            Reservation::Cancel => 2,
        }
    }

    fn from_code(c: u64) -> Self {
        match c {
            1 => Reservation::Reserve,
            2 => Reservation::Cancel,
            _ => Reservation::Keep,
        }
    }
}

#[derive(Clone, Debug, Hash)]
pub struct ReservationStation<A> {
    inner: A,
    /// Reserved round to owner; identical at every station.
    table: BTreeMap<Round, StationId>,
    buffer: VecDeque<Packet>,
    /// Completed regular rounds.
    regular: Round,
}

impl<A: StationAutomaton> ReservationStation<A> {
    pub fn inner(&self) -> &A {
        &self.inner
    }

    pub fn reservations(&self) -> &BTreeMap<Round, StationId> {
        &self.table
    }

    pub fn own_reservation(&self) -> Option<Round> {
        let me = self.inner.id();
        self.table.iter().find(|(_, &s)| s == me).map(|(&r, _)| r)
    }

    /// Real packets waiting behind the pending one.
    fn has_more(&self) -> bool {
        !self.inner.mailbox().queue().is_empty() || !self.buffer.is_empty()
    }

    fn action(&self, round: Round) -> Reservation {
        if self.has_more() {
            Reservation::Reserve
        } else if self.own_reservation().is_some_and(|r| r != round) {
            Reservation::Cancel
        } else {
            Reservation::Keep
        }
    }

    fn prefix(&self, round: Round) -> Control {
        Control::EMPTY
            .push_uint(self.action(round).code(), 2)
            .push_uint(u64::from(self.inner.id().0), SENDER_BITS)
    }

    fn apply(&mut self, round: Round, sender: StationId, action: Reservation) {
        if action == Reservation::Keep {
            return;
        }
        self.table.retain(|_, s| *s != sender);
        if action == Reservation::Reserve {
            let slot = (round + 1..)
                .filter(|r| !self.table.contains_key(r))
                .nth(1)
                .expect("unbounded rounds");
            self.table.insert(slot, sender);
        }
    }

    fn dummy(&self, round: Round) -> Packet {
        Packet {
            id: PacketId(u64::MAX),
            injected_round: round,
            station: self.inner.id(),
            dummy: true,
        }
    }

    /// Replaces a dummy pending packet once a real one is stored.
    fn evict_dummy(&mut self) {
        let mb = self.inner.mailbox_mut();
        if mb.pending().is_some_and(|p| p.dummy) && !mb.queue().is_empty() {
            mb.take_pending();
            mb.refill();
        }
    }
}

/// Wraps an algorithm flagged queue-size oblivious.
pub fn reservation_wrap<A: StationAutomaton>(
    inner: Distributed<A>,
) -> Result<Distributed<ReservationStation<A>>, AlgorithmError> {
    use super::Protocol;
    if !inner.class().queue_size_oblivious {
        return Err(AlgorithmError::Config(format!(
            "{} is not queue-size oblivious",
            inner.name()
        )));
    }
    let name = format!("reserved-{}", inner.name());
    Ok(Distributed::new(
        name,
        inner
            .into_stations()
            .into_iter()
            .map(|a| ReservationStation {
                inner: a,
                table: BTreeMap::new(),
                buffer: VecDeque::new(),
                regular: 0,
            })
            .collect(),
    ))
}

impl<A: StationAutomaton> StationAutomaton for ReservationStation<A> {
    fn id(&self) -> StationId {
        self.inner.id()
    }

    fn decide(&self, round: Round) -> Option<Message> {
        match self.table.get(&round) {
            Some(&owner) if owner == self.id() => {
                let p = self.inner.mailbox().pending()?.clone();
                Some(Message::packet_with(p, self.prefix(round)))
            }
            Some(_) => None,
            None => {
                let m = self.inner.decide(self.regular + 1)?;
                let control = self.prefix(round).append(m.control());
                Message::new(m.packet().cloned(), control)
            }
        }
    }

    fn transition(
        &mut self,
        round: Round,
        feedback: &Feedback,
        sent: bool,
        injected: Vec<Packet>,
    ) -> Result<(), AlgorithmError> {
        let reserved = self.table.remove(&round).is_some();
        let mut inner_feedback = feedback.clone();
        if let Feedback::Heard(m) = feedback {
            let (prefix, rest) = m.control().split_at(PREFIX_BITS);
            let action = Reservation::from_code(prefix.uint(0, 2));
            let sender = StationId(prefix.uint(2, SENDER_BITS) as u32);
            self.apply(round, sender, action);
            inner_feedback = match Message::new(m.packet().cloned(), rest) {
                Some(inner) => Feedback::Heard(inner),
                None => Feedback::Silence,
            };
        }
        if reserved {
            self.buffer.extend(injected);
            if heard_own(feedback, sent) {
                let next = self
                    .inner
                    .mailbox_mut()
                    .pop_queue()
                    .or_else(|| self.buffer.pop_front())
                    .unwrap_or_else(|| self.dummy(round));
                let mb = self.inner.mailbox_mut();
                mb.take_pending();
                mb.set_pending(next);
            }
        } else {
            let mut arriving: Vec<Packet> = self.buffer.drain(..).collect();
            arriving.extend(injected);
            self.regular += 1;
            self.inner
                .transition(self.regular, &inner_feedback, sent, arriving)?;
            self.evict_dummy();
        }
        Ok(())
    }

    fn mailbox(&self) -> &Mailbox {
        self.inner.mailbox()
    }

    fn mailbox_mut(&mut self) -> &mut Mailbox {
        self.inner.mailbox_mut()
    }

    fn stored(&self) -> usize {
        self.inner.stored() + self.buffer.len()
    }

    fn is_reserved(&self, round: Round) -> bool {
        self.table.contains_key(&round)
    }

    fn class(&self) -> AlgorithmClass {
        AlgorithmClass {
            kind: ClassKind::Adaptive,
            ..self.inner.class()
        }
    }
}
