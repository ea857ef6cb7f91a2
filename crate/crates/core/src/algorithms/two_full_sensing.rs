//! Full-sensing algorithms for two stations, `p = 1` and `q = 2`.
//!
//! Time is cut into phases of `i` rounds. Packets injected during a phase
//! become available in the next one, so a feasible window adversary of size
//! `i` never makes more than `i` packets available per phase. Within a
//! phase `p` transmits its available packets back to back from the first
//! round; `q` starts after the first silent round, or as soon as its
//! available count reaches the number of rounds left, and then keeps going.
//!
//! The escalating variant starts with `i = 1`. When both stations transmit
//! at once (each transmitter hears nothing, so both learn it), `p` unloads
//! every packet stored at that moment, a silent round follows, `q` does the
//! same, and the algorithm restarts with `i + 1`. Injection counts of the
//! unloading rounds go to a delay line that feeds the new invocation.

use crate::channel::{Feedback, Message, Packet, Round, StationId};

use super::delay::DelayLine;
use super::{
    heard_own, AlgorithmClass, AlgorithmError, ClassKind, Distributed, Mailbox, StationAutomaton,
};

const P: StationId = StationId(1);
const Q: StationId = StationId(2);

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
struct Phase {
    /// Position of the next round in the phase, from 1.
    pos: u32,
    /// Own injections of this phase, as seen through the delay line.
    collected: u32,
    /// Own available packets not yet heard in this phase.
    avail: u32,
    /// `q` has started transmitting in this phase.
    started: bool,
    /// A silent round has occurred in this phase.
    silence_seen: bool,
}

impl Phase {
    fn fresh() -> Self {
        Phase {
            pos: 1,
            ..Phase::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Mode {
    Phases(Phase),
    /// `turn` unloads; `old` is this station's count of unsent old packets.
    Unload {
        turn: StationId,
        old: u32,
    },
}

#[derive(Clone, Debug, Hash)]
pub struct TwoFullSensingStation {
    id: StationId,
    i: u32,
    escalating: bool,
    mode: Mode,
    delay: DelayLine,
    mailbox: Mailbox,
}

impl TwoFullSensingStation {
    /// Current phase length.
    pub fn phase_length(&self) -> u32 {
        self.i
    }

    pub fn is_unloading(&self) -> bool {
        matches!(self.mode, Mode::Unload { .. })
    }

    /// Available packets left for the current phase.
    pub fn available(&self) -> u32 {
        match &self.mode {
            Mode::Phases(ph) => ph.avail,
            Mode::Unload { .. } => 0,
        }
    }

    fn build(i: u32, escalating: bool) -> Distributed<Self> {
        assert!(i >= 1);
        let name = if escalating {
            "two-full-sensing".to_string()
        } else {
            format!("two-full-sensing-{i}")
        };
        Distributed::new(
            name,
            [P, Q]
                .into_iter()
                .map(|id| TwoFullSensingStation {
                    id,
                    i,
                    escalating,
                    mode: Mode::Phases(Phase::fresh()),
                    delay: DelayLine::default(),
                    mailbox: Mailbox::default(),
                })
                .collect(),
        )
    }

    /// Leftover available packets carry over: they only exist when the
    /// adversary exceeds window `i`, and then a collision must follow.
    fn close_phase_if_done(i: u32, ph: &mut Phase) {
        if ph.pos > i {
            *ph = Phase {
                avail: ph.collected + ph.avail,
                ..Phase::fresh()
            };
        }
    }

    fn escalate(&mut self) {
        self.i += 1;
        let (consumed, sum) = self.delay.drain_up_to(self.i as usize);
        let mut ph = Phase {
            pos: consumed as u32 + 1,
            collected: sum,
            ..Phase::fresh()
        };
        Self::close_phase_if_done(self.i, &mut ph);
        self.mode = Mode::Phases(ph);
    }
}

/// Fixed phase length `i`, no escalation.
pub fn two_full_sensing_i(i: u32) -> Distributed<TwoFullSensingStation> {
    TwoFullSensingStation::build(i, false)
}

/// Starts with phase length 1 and escalates on every collision.
pub fn two_full_sensing() -> Distributed<TwoFullSensingStation> {
    TwoFullSensingStation::build(1, true)
}

impl StationAutomaton for TwoFullSensingStation {
    fn id(&self) -> StationId {
        self.id
    }

    fn decide(&self, _round: Round) -> Option<Message> {
        let go = match &self.mode {
            Mode::Phases(ph) if ph.avail == 0 => false,
            Mode::Phases(_) if self.id == P => true,
            Mode::Phases(ph) => {
                let remaining = self.i - ph.pos + 1;
                ph.started || ph.silence_seen || ph.avail >= remaining
            }
            Mode::Unload { turn, old } => *turn == self.id && *old > 0,
        };
        if !go {
            return None;
        }
        let p = self.mailbox.pending();
        debug_assert!(p.is_some(), "available packets are always stored");
        p.cloned().map(Message::with_packet)
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
        let silent = !feedback.is_heard();
        let i = self.i;
        match &mut self.mode {
            Mode::Phases(ph) => {
                if sent && silent && self.escalating {
                    self.mailbox.settle(false, injected);
                    let old = self.mailbox.stored() as u32;
                    self.delay.clear();
                    self.mode = Mode::Unload { turn: P, old };
                    return Ok(());
                }
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
                ph.started |= sent;
                ph.silence_seen |= silent && !sent;
                ph.collected += self.delay.shift(real);
                ph.pos += 1;
                Self::close_phase_if_done(i, ph);
                self.mailbox.settle(heard, injected);
            }
            Mode::Unload { turn, old } => {
                self.delay.record(real);
                if heard {
                    *old -= 1;
                }
                self.mailbox.settle(heard, injected);
                if silent {
                    if *turn == P {
                        *turn = Q;
                    } else {
                        self.escalate();
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
        AlgorithmClass::new(ClassKind::FullSensing)
    }
}
