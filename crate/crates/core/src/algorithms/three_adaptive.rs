//! Adaptive algorithms for three stations with cyclic order `1, 2, 3`.
//!
//! Phases last `i` rounds, except the first phase of an invocation which
//! lasts `i + 1`. Virtual rounds are grouped into aligned windows of `i`;
//! a window completes one round before the last round of a phase, and its
//! packets are available in the next phase. Under a feasible window
//! adversary of size `i` a phase never has more than `i` available packets.
//!
//! One station is *last*: at the last round of every phase it transmits
//! its name and the number of packets it has available for the next phase.
//! Let `g` be that station, `a` its count, `k = i - a`, and `g'`, `g''` its
//! successors. In the next phase:
//!
//! * rounds `1..=k` belong to `g'` and `g''`. A station holding exactly `k`
//!   available packets sends them back to back. Otherwise `g'` sends its
//!   packets from round 1 and flags the last one with `over`, and `g''`
//!   sends its packets after the first `over` or void round;
//! * rounds `k+1..=i` belong to `g`, which stays last;
//! * if `a = 0`, `g''` becomes last and transmits at round `i`, unless
//!   `g'` turned out to hold exactly `k` packets (it then sent through
//!   round `i - 1` without `over`) and is last itself.
//!
//! With `i = 1` the last round may be silent because nobody holds a packet;
//! the last station is then unknown and every holder transmits in the next
//! phase, which is collision-free under a feasible adversary.
//!
//! A station that still holds available packets at the last round of a
//! phase was overloaded. It transmits at the last round, which collides
//! with the last station, and the last station itself raises an overload
//! bit in its status. Neither happens under a feasible adversary.
//!
//! The escalating variants react to collisions by unloading all stored
//! packets in the order `1, 2, 3`, each unloader closing with `over`, and
//! restarting with `i + 1`; injection counts of the unloading rounds go
//! through a delay line. With collision detection the escalation starts
//! right after the colliding round. Without it, a station that collided
//! pauses until the last round of the phase and transmits there, which
//! makes that round void for everybody.

use crate::channel::{Control, Feedback, Message, Packet, Round, StationId};

use super::delay::DelayLine;
use super::{
    heard_own, AlgorithmClass, AlgorithmError, ClassKind, Distributed, Mailbox, StationAutomaton,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Variant {
    /// Fixed `i`, no escalation.
    Window,
    /// Escalates on collision feedback.
    ColDet,
    /// Escalates after a void last round.
    Silence,
}

/// Last station of the previous phase and its announced count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Lead {
    station: StationId,
    count: u32,
}

/// Width of the count field in a status message.
const COUNT_BITS: u32 = 16;

/// Status layout: station name (2 bits), overload flag, count.
fn encode_status(station: StationId, overload: bool, count: u32) -> Control {
    Control::EMPTY
        .push_uint(u64::from(station.0), 2)
        .push(overload)
        .push_uint(u64::from(count.min((1 << COUNT_BITS) - 1)), COUNT_BITS)
}

fn decode_status(c: Control) -> (Lead, bool) {
    let lead = Lead {
        station: StationId(c.uint(0, 2) as u32),
        count: c.uint(3, COUNT_BITS) as u32,
    };
    (lead, c.bit(2))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Phase {
    /// Virtual index of the next round in the invocation, from 1.
    v: u64,
    window_acc: u32,
    /// Count of the latest completed window.
    next_avail: u32,
    /// Own available packets not yet heard in this phase.
    avail: u32,
    /// Own available packets at the start of this phase.
    initial: u32,
    /// `None` in the first phase and after a void last round.
    lead: Option<Lead>,
    /// An `over` or void round occurred within rounds `1..=k`.
    took_over: bool,
    /// This station collided in the current phase.
    poisoned: bool,
}

impl Phase {
    fn fresh() -> Self {
        Phase {
            v: 1,
            window_acc: 0,
            next_avail: 0,
            avail: 0,
            initial: 0,
            lead: None,
            took_over: false,
            poisoned: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Mode {
    Phases(Phase),
    /// `turn` unloads its `old` packets; `old` is this station's own count.
    Unload {
        turn: StationId,
        old: u32,
    },
}

/// Where a virtual round sits in its phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Slot {
    first: bool,
    pos: u32,
    len: u32,
}

impl Slot {
    fn of(i: u32, v: u64) -> Self {
        if v <= u64::from(i) + 1 {
            Slot {
                first: true,
                pos: v as u32,
                len: i + 1,
            }
        } else {
            Slot {
                first: false,
                pos: ((v - u64::from(i) - 2) % u64::from(i)) as u32 + 1,
                len: i,
            }
        }
    }

    fn is_last(self) -> bool {
        self.pos == self.len
    }
}

#[derive(Clone, Debug, Hash)]
pub struct ThreeAdaptiveStation {
    id: StationId,
    i: u32,
    variant: Variant,
    mode: Mode,
    delay: DelayLine,
    mailbox: Mailbox,
}

const FIRST: StationId = StationId(1);
const N: usize = 3;

impl ThreeAdaptiveStation {
    pub fn phase_length(&self) -> u32 {
        self.i
    }

    pub fn is_unloading(&self) -> bool {
        matches!(self.mode, Mode::Unload { .. })
    }

    fn build(i: u32, variant: Variant, name: String) -> Distributed<Self> {
        assert!(i >= 1);
        Distributed::new(
            name,
            (0..N)
                .map(|k| ThreeAdaptiveStation {
                    id: StationId::from_index(k),
                    i,
                    variant,
                    mode: Mode::Phases(Phase::fresh()),
                    delay: DelayLine::default(),
                    mailbox: Mailbox::default(),
                })
                .collect(),
        )
    }

    /// Whether this station transmits in `slot` of a non-first phase.
    fn transmits(&self, ph: &Phase, slot: Slot) -> bool {
        let last = slot.is_last();
        if ph.poisoned || (last && ph.avail > 0) {
            return last;
        }
        let Some(lead) = ph.lead else {
            return ph.avail > 0;
        };
        let k = self.i.saturating_sub(lead.count);
        let g1 = lead.station.next(N);
        let in_region = slot.pos <= k;
        if self.id == lead.station {
            !in_region && ph.avail > 0
        } else if self.id == g1 {
            in_region && ph.avail > 0
        } else {
            let full = ph.initial == k && k > 0;
            let may = full || ph.took_over;
            (in_region && ph.avail > 0 && may) || (lead.count == 0 && last && may)
        }
    }

    fn message(&self, ph: &Phase, slot: Slot) -> Option<Message> {
        let packet = if ph.avail > 0 {
            self.mailbox.pending().cloned()
        } else {
            None
        };
        debug_assert!(
            ph.avail == 0 || packet.is_some(),
            "available packets are stored"
        );
        let control = if slot.is_last() {
            let leftover = ph.avail.saturating_sub(u32::from(packet.is_some()));
            encode_status(self.id, leftover > 0, ph.next_avail)
        } else {
            let g1 = ph.lead.map(|l| l.station.next(N));
            let full = ph
                .lead
                .is_some_and(|l| ph.initial == self.i.saturating_sub(l.count));
            Control::flag(Some(self.id) == g1 && !full && ph.avail == 1)
        };
        Message::new(packet, control)
    }

    fn start_invocation(&mut self) {
        self.i += 1;
        let mut ph = Phase::fresh();
        let (consumed, sum) = self.delay.drain_up_to(self.i as usize);
        ph.v = consumed as u64 + 1;
        if consumed == self.i as usize {
            ph.next_avail = sum;
        } else {
            ph.window_acc = sum;
        }
        self.mode = Mode::Phases(ph);
    }

    fn escalate(&mut self) {
        self.delay.clear();
        self.mode = Mode::Unload {
            turn: FIRST,
            old: self.mailbox.stored() as u32,
        };
    }
}

/// Fixed phase length `i`.
pub fn three_adaptive_window(i: u32) -> Distributed<ThreeAdaptiveStation> {
    ThreeAdaptiveStation::build(i, Variant::Window, format!("three-adaptive-window-{i}"))
}

/// Starts at `i = 1`; needs a channel with collision detection.
pub fn three_adaptive_col_det() -> Distributed<ThreeAdaptiveStation> {
    ThreeAdaptiveStation::build(1, Variant::ColDet, "three-adaptive-col-det".into())
}

/// Detects collisions through void last rounds. Starts at `i = 2` because
/// with single-round phases a void last round is a normal event.
pub fn three_adaptive() -> Distributed<ThreeAdaptiveStation> {
    ThreeAdaptiveStation::build(2, Variant::Silence, "three-adaptive".into())
}

impl StationAutomaton for ThreeAdaptiveStation {
    fn id(&self) -> StationId {
        self.id
    }

    fn decide(&self, _round: Round) -> Option<Message> {
        match &self.mode {
            Mode::Phases(ph) => {
                let slot = Slot::of(self.i, ph.v);
                if slot.first {
                    return (slot.is_last() && self.id == FIRST).then(|| {
                        Message::control_only(encode_status(self.id, false, ph.next_avail))
                    });
                }
                if !self.transmits(ph, slot) {
                    return None;
                }
                self.message(ph, slot)
            }
            Mode::Unload { turn, old } => {
                if *turn != self.id {
                    return None;
                }
                let over = Control::flag(true);
                if *old == 0 {
                    return Some(Message::control_only(over));
                }
                let p = self.mailbox.pending().cloned()?;
                Some(Message::packet_with(p, Control::flag(*old == 1)))
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
        let real = injected.len() as u32;
        let heard = heard_own(feedback, sent);
        let i = self.i;
        let variant = self.variant;
        match &mut self.mode {
            Mode::Phases(_) if variant == Variant::ColDet && *feedback == Feedback::Collision => {
                self.mailbox.settle(false, injected);
                self.escalate();
            }
            Mode::Phases(ph) => {
                let slot = Slot::of(i, ph.v);
                if heard {
                    ph.avail =
                        ph.avail
                            .checked_sub(1)
                            .ok_or_else(|| AlgorithmError::Invariant {
                                round,
                                station: self.id,
                                detail: "heard a packet with nothing available".into(),
                            })?;
                }
                if variant == Variant::Silence && sent && !feedback.is_heard() {
                    ph.poisoned = true;
                }
                if let Some(lead) = ph.lead.filter(|_| !slot.first && !slot.is_last()) {
                    let over = feedback.message().is_some_and(|m| m.control().bit(0));
                    if slot.pos <= i.saturating_sub(lead.count) && (over || !feedback.is_heard()) {
                        ph.took_over = true;
                    }
                }
                let mut escalate = false;
                if slot.is_last() {
                    let status = feedback.message().map(|m| decode_status(m.control()));
                    escalate = match (variant, status) {
                        (Variant::Window, _) => false,
                        (Variant::Silence, None) => true,
                        (Variant::ColDet, None) => false,
                        (_, Some((lead, overload))) => overload || lead.count > i,
                    };
                    ph.lead = status.map(|(lead, _)| lead);
                    ph.avail = ph.next_avail;
                    ph.initial = ph.avail;
                    ph.took_over = false;
                    ph.poisoned = false;
                }
                ph.window_acc += self.delay.shift(real);
                if ph.v % u64::from(i) == 0 {
                    ph.next_avail = ph.window_acc;
                    ph.window_acc = 0;
                }
                ph.v += 1;
                self.mailbox.settle(heard, injected);
                if escalate {
                    self.escalate();
                }
            }
            Mode::Unload { turn, old } => {
                self.delay.record(real);
                if heard {
                    *old -= 1;
                }
                let over = feedback.message().is_some_and(|m| m.control().bit(0));
                self.mailbox.settle(heard, injected);
                if over {
                    if turn.index() + 1 == N {
                        self.start_invocation();
                    } else {
                        *turn = turn.next(N);
                    }
                }
            }
        }
        Ok(())
    }

    fn mailbox(&self) -> &Mailbox {
        &self.mailbox
    }

    fn mailbox_mut(&mut self) -> &mut Mailbox {
        &mut self.mailbox
    }

    fn class(&self) -> AlgorithmClass {
        AlgorithmClass {
            requires_collision_detection: self.variant == Variant::ColDet,
            ..AlgorithmClass::new(ClassKind::Adaptive)
        }
    }
}
