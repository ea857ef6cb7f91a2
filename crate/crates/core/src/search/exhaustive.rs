//! Exhaustive exploration of every feasible injection sequence.
//!
//! Depth-first over rounds; at each round every split of every feasible
//! total among the target stations is tried. Two nodes are merged when the
//! system is equal up to a time shift and packet renaming and the
//! feasibility tracker is in the same state: their futures are identical,
//! including all latencies measured from then on. A node is skipped when an
//! equivalent one was already explored with at least as many rounds left.
//! Every expanded node, not only leaves, is followed by a drain phase
//! without injections, so a skipped node's drain is covered by its twin.

use std::collections::HashMap;

use num_rational::Ratio;

use crate::adversary::{AdversaryType, FeasibilityTracker, InjectionScript};
use crate::channel::{RoundInjections, RoundRecord, SimError, SimulationState, StationId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExploreConfig {
    /// Rounds with injections.
    pub horizon: u64,
    /// Rounds without injections after each leaf.
    pub drain: u64,
    /// Stations that may receive packets.
    pub targets: Vec<StationId>,
    /// Per-round total cap on top of the adversary type.
    pub max_per_round: u64,
    /// Abort once this many distinct nodes were expanded.
    pub max_states: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExploreReport {
    /// Distinct nodes expanded.
    pub states: usize,
    pub leaves: u64,
    pub max_latency: u64,
    pub max_stored: u64,
    /// Largest number of packets still stored after a drain from any
    /// expanded node.
    pub max_left_after_drain: u64,
    /// A script that attains `max_latency`.
    pub worst: InjectionScript,
    /// The state limit was hit; results are partial.
    pub truncated: bool,
}

type Key = (u64, Vec<u64>, Ratio<i64>);

struct Explorer<'a> {
    ty: AdversaryType,
    cfg: &'a ExploreConfig,
    seen: HashMap<Key, u64>,
    path: Vec<RoundInjections>,
    report: ExploreReport,
}

/// All ways to place `total` packets on `targets`, in lexicographic order.
fn splits(total: u64, targets: &[StationId]) -> Vec<RoundInjections> {
    fn rec(
        total: u64,
        targets: &[StationId],
        acc: &mut RoundInjections,
        out: &mut Vec<RoundInjections>,
    ) {
        match targets {
            [] => {
                if total == 0 {
                    out.push(acc.clone());
                }
            }
            [last] => {
                if total > 0 {
                    acc.push((*last, total as u32));
                }
                out.push(acc.clone());
                if total > 0 {
                    acc.pop();
                }
            }
            [first, rest @ ..] => {
                for c in (0..=total).rev() {
                    if c > 0 {
                        acc.push((*first, c as u32));
                    }
                    rec(total - c, rest, acc, out);
                    if c > 0 {
                        acc.pop();
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(total, targets, &mut Vec::new(), &mut out);
    out
}

impl Explorer<'_> {
    fn observe(&mut self, rec: &RoundRecord) {
        if let Some(p) = rec.feedback.heard_packet() {
            let latency = rec.round - p.injected_round;
            if latency > self.report.max_latency {
                self.report.max_latency = latency;
                self.report.worst = InjectionScript::from_rounds(self.path.iter().cloned());
            }
        }
        self.report.max_stored = self.report.max_stored.max(rec.total_stored());
    }

    fn drain(&mut self, state: &SimulationState) -> Result<(), SimError> {
        let mut s = state.clone();
        for _ in 0..self.cfg.drain {
            let rec = s.step(&[])?;
            self.observe(&rec);
        }
        self.report.max_left_after_drain = self.report.max_left_after_drain.max(s.total_stored());
        Ok(())
    }

    fn visit(
        &mut self,
        state: &SimulationState,
        tracker: &FeasibilityTracker,
        left: u64,
    ) -> Result<(), SimError> {
        let (window, excess) = tracker.state_key();
        let key = (state.canonical_key(), window, excess);
        if self.seen.get(&key).is_some_and(|&done| done >= left) {
            return Ok(());
        }
        if self.seen.len() >= self.cfg.max_states {
            self.report.truncated = true;
            return Ok(());
        }
        self.seen.insert(key, left);
        self.report.states += 1;
        self.drain(state)?;
        if left == 0 {
            self.report.leaves += 1;
            return Ok(());
        }
        let top = tracker.headroom().min(self.cfg.max_per_round);
        for total in 0..=top {
            for inj in splits(total, &self.cfg.targets) {
                let mut t = tracker.clone();
                if t.push(total).is_err() {
                    continue;
                }
                let mut s = state.clone();
                self.path.push(inj.clone());
                let rec = s.step(&inj)?;
                self.observe(&rec);
                self.visit(&s, &t, left - 1)?;
                self.path.pop();
            }
        }
        Ok(())
    }
}

/// Explores all feasible injection sequences of length `cfg.horizon` from
/// `system` under `ty`.
pub fn explore(
    system: &SimulationState,
    ty: AdversaryType,
    cfg: &ExploreConfig,
) -> Result<ExploreReport, SimError> {
    let mut ex = Explorer {
        ty,
        cfg,
        seen: HashMap::new(),
        path: Vec::new(),
        report: ExploreReport::default(),
    };
    let tracker = FeasibilityTracker::new(ex.ty);
    ex.visit(system, &tracker, cfg.horizon)?;
    Ok(ex.report)
}
