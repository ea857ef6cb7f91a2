use std::hash::Hash;

use crate::channel::{Feedback, Message, Packet, Round, StationId};

use super::{
    heard_own, AlgorithmClass, AlgorithmError, ClassKind, Distributed, Mailbox, StationAutomaton,
};

/// Station `i` owns the rounds congruent to `i` modulo `n`.
#[derive(Clone, Debug, Hash)]
pub struct RoundRobinStation {
    id: StationId,
    n: u64,
    mailbox: Mailbox,
}

pub fn round_robin(n: usize) -> Distributed<RoundRobinStation> {
    assert!(n >= 1);
    Distributed::new(
        "round-robin",
        (0..n)
            .map(|i| RoundRobinStation {
                id: StationId::from_index(i),
                n: n as u64,
                mailbox: Mailbox::default(),
            })
            .collect(),
    )
}

impl StationAutomaton for RoundRobinStation {
    fn id(&self) -> StationId {
        self.id
    }

    fn decide(&self, round: Round) -> Option<Message> {
        if round % self.n != u64::from(self.id.0) % self.n {
            return None;
        }
        self.mailbox.pending().cloned().map(Message::with_packet)
    }

    fn transition(
        &mut self,
        _round: Round,
        feedback: &Feedback,
        sent: bool,
        injected: Vec<Packet>,
    ) -> Result<(), AlgorithmError> {
        self.mailbox.settle(heard_own(feedback, sent), injected);
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

    /// The schedule depends on the round modulo `n` only.
    fn canonical_hash(&self, now: Round, h: &mut std::collections::hash_map::DefaultHasher) {
        let mut c = self.clone();
        c.mailbox.relativize(now);
        c.hash(h);
        (now % self.n).hash(h);
    }
}
