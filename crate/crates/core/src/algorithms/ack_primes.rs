//! Acknowledgment-based fair schedule built from distinct primes.
//!
//! Station `p` transmits its pending packet at positions
//! `offset + k * x_p` (`k >= 0`), where a position counts the rounds spent
//! on the current packet from 1 and `x_p` is the `p`-th prime above
//! `m ln m`. Two stations processing single packets can collide at most once
//! per `x_p * x_q` positions, which leaves every packet a collision-free
//! slot within twice the offset.

use crate::channel::{Feedback, Message, Packet, Round, StationId};

use super::{
    heard_own, AlgorithmClass, AlgorithmError, ClassKind, Distributed, Mailbox, StationAutomaton,
};

/// Smallest system size for which the prime construction is sound; smaller
/// systems run it as if the missing stations never had packets.
pub const MIN_STATIONS: usize = 21;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeSchedule {
    /// Effective system size `max(n, 21)`.
    pub m: usize,
    /// First transmitting position, `ceil(3 m^2 ln m)`.
    pub offset: u64,
    /// `periods[p - 1]` is the prime of station `p`.
    pub periods: Vec<u64>,
}

/// Primes in `[lo, hi)` by the sieve of Eratosthenes.
fn primes_in(lo: f64, hi: f64) -> Vec<u64> {
    let top = hi.ceil() as usize;
    let mut composite = vec![false; top + 1];
    let mut out = Vec::new();
    for k in 2..=top {
        if composite[k] {
            continue;
        }
        let mut j = k * k;
        while j <= top {
            composite[j] = true;
            j += k;
        }
        let x = k as f64;
        if x >= lo && x < hi {
            out.push(k as u64);
        }
    }
    out
}

pub fn ack_primes_schedule(n: usize) -> Result<PrimeSchedule, AlgorithmError> {
    let m = n.max(MIN_STATIONS);
    let mf = m as f64;
    let ln = mf.ln();
    let primes = primes_in(mf * ln, 3.0 * mf * ln);
    if primes.len() < m {
        return Err(AlgorithmError::Config(format!(
            "only {} primes in [m ln m, 3m ln m) for m = {m}",
            primes.len()
        )));
    }
    Ok(PrimeSchedule {
        m,
        offset: (3.0 * mf * mf * ln).ceil() as u64,
        periods: primes[..m].to_vec(),
    })
}

#[derive(Clone, Debug, Hash)]
pub struct AckPrimesStation {
    id: StationId,
    offset: u64,
    period: u64,
    /// Completed rounds spent on the current pending packet.
    age: u64,
    mailbox: Mailbox,
}

impl AckPrimesStation {
    /// Whether the transmission sequence has a 1 at `position` (1-based).
    pub fn fires_at(&self, position: u64) -> bool {
        position >= self.offset && (position - self.offset).is_multiple_of(self.period)
    }

    pub fn age(&self) -> u64 {
        self.age
    }
}

pub fn ack_primes(n: usize) -> Result<Distributed<AckPrimesStation>, AlgorithmError> {
    assert!(n >= 1);
    let schedule = ack_primes_schedule(n)?;
    Ok(Distributed::new(
        "ack-primes",
        (0..n)
            .map(|i| AckPrimesStation {
                id: StationId::from_index(i),
                offset: schedule.offset,
                period: schedule.periods[i],
                age: 0,
                mailbox: Mailbox::default(),
            })
            .collect(),
    ))
}

impl StationAutomaton for AckPrimesStation {
    fn id(&self) -> StationId {
        self.id
    }

    fn decide(&self, _round: Round) -> Option<Message> {
        let p = self.mailbox.pending()?;
        self.fires_at(self.age + 1)
            .then(|| Message::with_packet(p.clone()))
    }

    fn transition(
        &mut self,
        _round: Round,
        feedback: &Feedback,
        sent: bool,
        injected: Vec<Packet>,
    ) -> Result<(), AlgorithmError> {
        let had = self.mailbox.has_pending();
        let heard = heard_own(feedback, sent);
        self.mailbox.settle(heard, injected);
        self.age = if had && !heard { self.age + 1 } else { 0 };
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
