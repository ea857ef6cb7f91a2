use crate::channel::{Feedback, Message, Packet, Round, StationId};

use super::{
    heard_own, AlgorithmClass, AlgorithmError, ClassKind, Distributed, Mailbox, StationAutomaton,
};

/// Acknowledgment-based station whose transmission sequence is all ones:
/// it transmits in every round in which it holds a pending packet.
#[derive(Clone, Debug, Hash)]
pub struct AllOnesStation {
    id: StationId,
    mailbox: Mailbox,
}

pub fn all_ones(n: usize) -> Distributed<AllOnesStation> {
    assert!(n >= 1);
    Distributed::new(
        "all-ones",
        (0..n)
            .map(|i| AllOnesStation {
                id: StationId::from_index(i),
                mailbox: Mailbox::default(),
            })
            .collect(),
    )
}

impl StationAutomaton for AllOnesStation {
    fn id(&self) -> StationId {
        self.id
    }

    fn decide(&self, _round: Round) -> Option<Message> {
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
        AlgorithmClass::new(ClassKind::AckBased)
    }
}
