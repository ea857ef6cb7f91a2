//! Token passing with an end-of-burst signal.
//!
//! A single token circulates in name order, starting at station 1. The
//! holder transmits while it has packets and marks its last stored packet
//! with an `over` bit. The token moves on after an `over` message or a
//! silent round. With two stations this is the two-station adaptive
//! algorithm; with more it serves as a sample algorithm that withholds the
//! channel and ignores queue sizes beyond emptiness.

use crate::channel::{Control, Feedback, Message, Packet, Round, StationId};

use super::{
    heard_own, AlgorithmClass, AlgorithmError, ClassKind, Distributed, Mailbox, StationAutomaton,
};

#[derive(Clone, Debug, Hash)]
pub struct TokenRingStation {
    id: StationId,
    n: usize,
    holder: StationId,
    mailbox: Mailbox,
}

impl TokenRingStation {
    pub fn holder(&self) -> StationId {
        self.holder
    }
}

pub fn token_ring(n: usize) -> Distributed<TokenRingStation> {
    assert!(n >= 2);
    let name = if n == 2 {
        "two-adaptive".to_string()
    } else {
        format!("token-ring-{n}")
    };
    Distributed::new(
        name,
        (0..n)
            .map(|i| TokenRingStation {
                id: StationId::from_index(i),
                n,
                holder: StationId(1),
                mailbox: Mailbox::default(),
            })
            .collect(),
    )
}

pub fn two_adaptive() -> Distributed<TokenRingStation> {
    token_ring(2)
}

impl StationAutomaton for TokenRingStation {
    fn id(&self) -> StationId {
        self.id
    }

    fn decide(&self, _round: Round) -> Option<Message> {
        if self.holder != self.id {
            return None;
        }
        let p = self.mailbox.pending()?;
        let over = self.mailbox.queue().is_empty();
        Some(Message::packet_with(
            p.clone(),
            if over {
                Control::flag(true)
            } else {
                Control::EMPTY
            },
        ))
    }

    fn transition(
        &mut self,
        _round: Round,
        feedback: &Feedback,
        sent: bool,
        injected: Vec<Packet>,
    ) -> Result<(), AlgorithmError> {
        let pass = match feedback {
            Feedback::Heard(m) => m.control().bit(0),
            Feedback::Silence | Feedback::Collision => true,
        };
        if pass {
            self.holder = self.holder.next(self.n);
        }
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
        AlgorithmClass {
            withholds_channel: true,
            queue_size_oblivious: true,
            ..AlgorithmClass::new(ClassKind::Adaptive)
        }
    }
}
