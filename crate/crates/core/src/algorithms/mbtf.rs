//! Token passing over a shared list in which big stations jump to the front.
//!
//! Every station keeps an identical copy of the list, initially in name
//! order, and a token position into it. The holder transmits when it has a
//! pending packet and marks the message when it stores at least `n`
//! packets. A marked holder moves to the front and keeps the token; in any
//! other case the token advances to the next list entry.

use crate::channel::{Control, Feedback, Message, Packet, Round, StationId};

use super::{
    heard_own, AlgorithmClass, AlgorithmError, ClassKind, Distributed, Mailbox, StationAutomaton,
};

#[derive(Clone, Debug, Hash)]
pub struct MbtfStation {
    id: StationId,
    list: Vec<StationId>,
    token: usize,
    mailbox: Mailbox,
}

impl MbtfStation {
    pub fn list(&self) -> &[StationId] {
        &self.list
    }

    pub fn holder(&self) -> StationId {
        self.list[self.token]
    }

    fn is_big(&self) -> bool {
        self.mailbox.stored() >= self.list.len()
    }
}

pub fn move_big_to_front(n: usize) -> Distributed<MbtfStation> {
    assert!(n >= 1);
    let list: Vec<StationId> = (0..n).map(StationId::from_index).collect();
    Distributed::new(
        "move-big-to-front",
        list.iter()
            .map(|&id| MbtfStation {
                id,
                list: list.clone(),
                token: 0,
                mailbox: Mailbox::default(),
            })
            .collect(),
    )
}

impl StationAutomaton for MbtfStation {
    fn id(&self) -> StationId {
        self.id
    }

    fn decide(&self, _round: Round) -> Option<Message> {
        if self.holder() != self.id {
            return None;
        }
        let p = self.mailbox.pending()?;
        let control = if self.is_big() {
            Control::flag(true)
        } else {
            Control::EMPTY
        };
        Some(Message::packet_with(p.clone(), control))
    }

    fn transition(
        &mut self,
        round: Round,
        feedback: &Feedback,
        sent: bool,
        injected: Vec<Packet>,
    ) -> Result<(), AlgorithmError> {
        if matches!(feedback, Feedback::Collision) {
            return Err(AlgorithmError::Invariant {
                round,
                station: self.id,
                detail: "collision under a single token".into(),
            });
        }
        let big = feedback.message().is_some_and(|m| m.control().bit(0));
        if big {
            let holder = self.list.remove(self.token);
            self.list.insert(0, holder);
            self.token = 0;
        } else {
            self.token = (self.token + 1) % self.list.len();
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
        AlgorithmClass::new(ClassKind::Adaptive)
    }
}
