//! Stage/pivot adversary forcing a quadratic number of stored packets.
//!
//! A stage is a stretch of rounds without void rounds during which every
//! station transmits at least once while only one station, the pivot,
//! receives packets. Non-pivot stations must therefore hold their stage
//! packets from the start. After `floor(n/2)` consecutive stages at least
//! `floor(n/2) - 1` non-pivot stations each transmit once per stage, so at
//! least `(floor(n/2) - 1)^2` packets were stored when the stages began.
//! Void rounds found along the way become milestones instead, each adding
//! one stored packet, and restart the stage count.

use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryType;
use crate::channel::{RoundInjections, SimulationState, StationId, Trace};

use super::{peek_void, total, Committed, Milestone, MilestoneKind, SearchError};
use crate::adversary::InjectionScript;

/// Milestones that count as the unbounded branch of the dichotomy.
pub const DICHOTOMY_MILESTONES: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaStatus {
    /// Stored packets reached the target.
    Reached,
    /// The target was missed but enough milestones were banked.
    Dichotomy,
    /// Neither; a longer horizon is needed.
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct OmegaOutcome {
    pub script: InjectionScript,
    pub milestones: Vec<Milestone>,
    /// Consecutive stages completed at the end.
    pub stages: u64,
    pub max_stored: u64,
    /// `(floor(n/2) - 1)^2`.
    pub target: u64,
    pub status: OmegaStatus,
    pub trace: Trace,
}

enum Step {
    Milestone {
        prefix: Vec<RoundInjections>,
        last: RoundInjections,
        kind: MilestoneKind,
    },
    Stage(Vec<RoundInjections>),
    Stuck,
}

/// Catch-up injection for a void round reached after `prefix`, if feasible.
fn milestone_at(
    run: &Committed,
    state: &SimulationState,
    prefix: &[RoundInjections],
    target: StationId,
) -> Option<(RoundInjections, MilestoneKind)> {
    let kind = peek_void(state)?;
    let injected = run.injected + prefix.iter().map(|r| total(r)).sum::<u64>();
    let m = (state.round() + 1) as i64 - injected as i64;
    if !(0..=2).contains(&m) {
        return None;
    }
    let mut tracker = run.tracker.clone();
    for r in prefix {
        tracker.push(total(r)).ok()?;
    }
    tracker.check(m as u64).ok()?;
    let last = if m == 0 {
        Vec::new()
    } else {
        vec![(target, m as u32)]
    };
    Some((last, kind))
}

/// Single, double and paired injections into any stations.
fn branches(n: usize) -> Vec<RoundInjections> {
    let ids: Vec<StationId> = (1..=n as u32).map(StationId).collect();
    let mut out = Vec::new();
    for &p in &ids {
        out.push(vec![(p, 1)]);
    }
    for (i, &p) in ids.iter().enumerate() {
        out.push(vec![(p, 2)]);
        for &q in &ids[i + 1..] {
            out.push(vec![(p, 1), (q, 1)]);
        }
    }
    out
}

fn next_step(run: &Committed, cap: u64, horizon: u64) -> Result<Step, SearchError> {
    let n = run.state.n();
    let all = branches(n);
    let mut pivot = StationId(1);
    let mut len = 0u64;
    loop {
        // Plain run: one packet per round into the pivot candidate.
        let mut state = run.state.clone();
        let mut prefix: Vec<RoundInjections> = Vec::new();
        let mut tracker = run.tracker.clone();
        let mut transmitters = vec![false; n];
        for _ in 0..=len {
            if state.round() >= horizon {
                return Ok(Step::Stuck);
            }
            if let Some((last, kind)) = milestone_at(run, &state, &prefix, pivot) {
                return Ok(Step::Milestone { prefix, last, kind });
            }
            let inj = vec![(pivot, 1)];
            if tracker.push(1).is_err() {
                return Ok(Step::Stuck);
            }
            let rec = state.step(&inj)?;
            if rec.heard_packet.is_none() {
                // A void round that cannot be a milestone spoils the stage.
                return Ok(Step::Stuck);
            }
            for s in &rec.transmitters {
                transmitters[s.index()] = true;
            }
            prefix.push(inj);
        }
        // Branches: replace the last injection and look one round further.
        let base = {
            let mut s = run.state.clone();
            for inj in &prefix[..prefix.len() - 1] {
                s.step(inj)?;
            }
            s
        };
        for b in &all {
            if base.round() + 2 > horizon {
                break;
            }
            let mut s = base.clone();
            s.step(b)?;
            let mut branch_prefix = prefix[..prefix.len() - 1].to_vec();
            branch_prefix.push(b.clone());
            if let Some((last, kind)) = milestone_at(run, &s, &branch_prefix, b[0].0) {
                return Ok(Step::Milestone {
                    prefix: branch_prefix,
                    last,
                    kind,
                });
            }
        }
        match transmitters.iter().position(|&t| !t) {
            None => return Ok(Step::Stage(prefix)),
            Some(i) => pivot = StationId::from_index(i),
        }
        len += 1;
        if len > cap {
            return Ok(Step::Stuck);
        }
    }
}

/// Runs the stage/pivot construction against a leaky bucket of burstiness
/// 2 until `floor(n/2)` consecutive stages complete or the horizon ends.
pub fn omega_n2_adversary(
    system: SimulationState,
    horizon: u64,
) -> Result<OmegaOutcome, SearchError> {
    let n = system.n();
    if n < 2 {
        return Err(SearchError::Precondition("at least two stations".into()));
    }
    let half = (n / 2) as u64;
    let target = half.saturating_sub(1).pow(2);
    let cap = (horizon / 10).max(1);
    let mut run = Committed::new(system, AdversaryType::leaky_bucket(1))?;
    let mut stages = 0u64;
    while stages < half && run.round() < horizon {
        match next_step(&run, cap, horizon)? {
            Step::Milestone { prefix, last, kind } => {
                for inj in prefix {
                    run.commit(inj)?;
                }
                run.commit_milestone(last, kind)?;
                stages = 0;
            }
            Step::Stage(rounds) => {
                for inj in rounds {
                    run.commit(inj)?;
                }
                stages += 1;
            }
            Step::Stuck => break,
        }
    }
    let max_stored = run
        .records
        .iter()
        .map(|r| r.total_stored())
        .max()
        .unwrap_or(0);
    let status = if max_stored >= target {
        OmegaStatus::Reached
    } else if run.milestones.len() >= DICHOTOMY_MILESTONES {
        OmegaStatus::Dichotomy
    } else {
        OmegaStatus::Inconclusive
    };
    let milestones = run.milestones.clone();
    let outcome = run.into_outcome(false);
    Ok(OmegaOutcome {
        script: outcome.script,
        milestones,
        stages,
        max_stored,
        target,
        status,
        trace: outcome.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_set_size() {
        // n singles, n doubles, n(n-1)/2 pairs
        assert_eq!(branches(4).len(), 4 + 4 + 6);
    }
}
