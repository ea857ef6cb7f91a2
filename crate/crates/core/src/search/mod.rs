//! Adaptive adversaries that look ahead on cloned system states.
//!
//! Every search keeps one committed run (state, feasibility tracker and the
//! injections so far). Probes run on clones and never touch it. A
//! *milestone* is a committed void round at which cumulative injections are
//! caught up to the round number, so after milestone `i` at least `i + 1`
//! packets are stored: at most `t - (i + 1)` of the `t` injected packets can
//! have been heard.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversaryType, FeasibilityTracker, InjectionScript, Violation};
use crate::channel::{
    Round, RoundInjections, RoundRecord, SimError, SimulationState, StationId, Trace,
};

mod exhaustive;
mod omega;
mod void_forcer;

pub use exhaustive::{explore, ExploreConfig, ExploreReport};
pub use omega::{omega_n2_adversary, OmegaOutcome, OmegaStatus};
pub use void_forcer::{retaining_breaker, void_forcer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MilestoneKind {
    Silence,
    Collision,
}

impl fmt::Display for MilestoneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MilestoneKind::Silence => "silence",
            MilestoneKind::Collision => "collision",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub round: Round,
    pub kind: MilestoneKind,
    /// Total stored at the end of the round.
    pub queued: u64,
}

impl fmt::Display for Milestone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "milestone round={} kind={} queued={}",
            self.round, self.kind, self.queued
        )
    }
}

/// Limits on the lookahead of one search step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioBudget {
    /// Rounds a single probe may run. Further capped at `horizon / 10`.
    pub max_branch_depth: u64,
    /// Scenarios tried per step.
    pub max_scenarios: usize,
}

impl Default for ScenarioBudget {
    fn default() -> Self {
        ScenarioBudget {
            max_branch_depth: u64::MAX,
            max_scenarios: 64,
        }
    }
}

impl ScenarioBudget {
    pub(crate) fn depth(self, horizon: u64) -> u64 {
        self.max_branch_depth.min((horizon / 10).max(1))
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("committed injection is infeasible: {0}")]
    Infeasible(Violation),
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub script: InjectionScript,
    pub milestones: Vec<Milestone>,
    /// The search gave up and finished with a saturating continuation.
    pub fallback: bool,
    pub trace: Trace,
}

impl SearchOutcome {
    /// One line per milestone.
    pub fn milestone_report(&self) -> String {
        self.milestones.iter().map(|m| format!("{m}\n")).collect()
    }

    /// Milestone `i` has at least `i + 1` packets stored.
    pub fn milestones_accounted(&self) -> bool {
        self.milestones
            .iter()
            .enumerate()
            .all(|(i, m)| m.queued > i as u64)
    }
}

/// How the next round would turn out without any change to the state.
/// `None` means a real packet will be heard.
pub fn peek_void(state: &SimulationState) -> Option<MilestoneKind> {
    let decisions = state.protocol().decide(state.round() + 1);
    let mut senders = decisions.iter().flatten();
    match (senders.next(), senders.next()) {
        (None, _) => Some(MilestoneKind::Silence),
        (Some(_), Some(_)) => Some(MilestoneKind::Collision),
        (Some(m), None) => match m.packet() {
            Some(p) if !p.dummy => None,
            _ => Some(MilestoneKind::Silence),
        },
    }
}

/// The run built so far.
#[derive(Clone, Debug)]
pub(crate) struct Committed {
    pub state: SimulationState,
    pub tracker: FeasibilityTracker,
    pub script: InjectionScript,
    pub records: Vec<RoundRecord>,
    pub milestones: Vec<Milestone>,
    pub injected: u64,
}

impl Committed {
    pub fn new(state: SimulationState, ty: AdversaryType) -> Result<Self, SearchError> {
        if state.round() != 0 {
            return Err(SearchError::Precondition(
                "searches start from a fresh system".into(),
            ));
        }
        Ok(Committed {
            state,
            tracker: FeasibilityTracker::new(ty),
            script: InjectionScript::new(),
            records: Vec::new(),
            milestones: Vec::new(),
            injected: 0,
        })
    }

    pub fn round(&self) -> Round {
        self.state.round()
    }

    pub fn commit(&mut self, injections: RoundInjections) -> Result<&RoundRecord, SearchError> {
        let total = total(&injections);
        self.tracker.push(total).map_err(SearchError::Infeasible)?;
        let rec = self.state.step(&injections)?;
        self.injected += total;
        self.script.push_round(injections);
        self.records.push(rec);
        Ok(self.records.last().expect("just pushed"))
    }

    /// Commits a round that is known to be void and records it.
    pub fn commit_milestone(
        &mut self,
        injections: RoundInjections,
        kind: MilestoneKind,
    ) -> Result<(), SearchError> {
        let rec = self.commit(injections)?;
        debug_assert!(rec.heard_packet.is_none());
        let m = Milestone {
            round: rec.round,
            kind,
            queued: rec.total_stored(),
        };
        self.milestones.push(m);
        Ok(())
    }

    /// One packet per round into station 1 where the type allows it.
    pub fn saturate_until(&mut self, horizon: u64) -> Result<(), SearchError> {
        while self.round() < horizon {
            let inj = if self.tracker.headroom() > 0 {
                vec![(StationId(1), 1)]
            } else {
                Vec::new()
            };
            self.commit(inj)?;
        }
        Ok(())
    }

    pub fn into_outcome(self, fallback: bool) -> SearchOutcome {
        let trace = Trace {
            config: self.state.config(),
            adversary_type: self.tracker.adversary_type(),
            algorithm: self.state.algorithm(),
            records: self.records,
        };
        SearchOutcome {
            script: self.script,
            milestones: self.milestones,
            fallback,
            trace,
        }
    }
}

pub(crate) fn total(injections: &[(StationId, u32)]) -> u64 {
    injections.iter().map(|&(_, c)| u64::from(c)).sum()
}
