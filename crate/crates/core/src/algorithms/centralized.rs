//! Scheduler with a control unit that knows every injection one round late.
//!
//! At the end of each round the unit enqueues one token per packet reported
//! for the previous round, records the current round's counts, and pops one
//! token to designate the transmitter of the next round. A packet injected
//! at round `t` is therefore heard no earlier than `t + 2`, and tokens leave
//! in injection order.

use std::any::Any;
use std::collections::hash_map::DefaultHasher;
use std::collections::VecDeque;
use std::hash::{Hash, Hasher};

use crate::channel::{Feedback, Message, Packet, Round, StationId};

use super::{AlgorithmClass, AlgorithmError, ClassKind, Protocol};

#[derive(Clone, Debug, Hash)]
pub struct Centralized {
    queues: Vec<VecDeque<Packet>>,
    /// Injection counts of the current round, reported next round.
    reported: Vec<u32>,
    tokens: VecDeque<StationId>,
    designated: Option<StationId>,
}

pub fn centralized(n: usize) -> Centralized {
    assert!(n >= 1);
    Centralized {
        queues: vec![VecDeque::new(); n],
        reported: vec![0; n],
        tokens: VecDeque::new(),
        designated: None,
    }
}

impl Centralized {
    pub fn tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn designated(&self) -> Option<StationId> {
        self.designated
    }
}

impl Protocol for Centralized {
    fn name(&self) -> String {
        "centralized".into()
    }

    fn n(&self) -> usize {
        self.queues.len()
    }

    fn class(&self) -> AlgorithmClass {
        AlgorithmClass::new(ClassKind::Adaptive)
    }

    fn decide(&self, _round: Round) -> Vec<Option<Message>> {
        let mut out = vec![None; self.n()];
        if let Some(s) = self.designated {
            out[s.index()] = self.queues[s.index()]
                .front()
                .cloned()
                .map(Message::with_packet);
        }
        out
    }

    fn transition(
        &mut self,
        round: Round,
        feedback: &Feedback,
        sent: &[bool],
        injected: Vec<Vec<Packet>>,
    ) -> Result<(), AlgorithmError> {
        if let Some(s) = self.designated.take() {
            if sent[s.index()] && feedback.is_heard() {
                self.queues[s.index()].pop_front();
            }
        }
        for (i, &c) in self.reported.iter().enumerate() {
            self.tokens
                .extend(std::iter::repeat_n(StationId::from_index(i), c as usize));
        }
        for (i, packets) in injected.into_iter().enumerate() {
            self.reported[i] = packets.len() as u32;
            self.queues[i].extend(packets);
        }
        if let Some(s) = self.tokens.pop_front() {
            if self.queues[s.index()].is_empty() {
                return Err(AlgorithmError::Invariant {
                    round,
                    station: s,
                    detail: "designated station has an empty queue".into(),
                });
            }
            self.designated = Some(s);
        }
        Ok(())
    }

    fn stored(&self, station: StationId) -> usize {
        self.queues[station.index()].len()
    }

    fn pending(&self, station: StationId) -> Option<&Packet> {
        self.queues[station.index()].front()
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
        let mut c = self.clone();
        for q in &mut c.queues {
            for p in q.iter_mut() {
                p.injected_round = now - p.injected_round;
                p.id = crate::channel::PacketId(0);
            }
        }
        let mut h = DefaultHasher::new();
        c.hash(&mut h);
        h.finish()
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
