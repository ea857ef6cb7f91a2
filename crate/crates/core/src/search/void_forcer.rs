//! Milestone hunting by greedy scenario probes.

use crate::adversary::{burstiness, AdversaryType};
use crate::channel::{RoundInjections, SimulationState, StationId};

use super::{
    peek_void, total, Committed, MilestoneKind, ScenarioBudget, SearchError, SearchOutcome,
};

/// A conceptual continuation of the committed run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Scenario {
    /// One packet per round into one station.
    Steady(StationId),
    /// One packet into each of two stations every other round. `phase` 0
    /// starts with the double round.
    Pair {
        a: StationId,
        b: StationId,
        phase: u64,
    },
}

impl Scenario {
    fn injections(self, k: u64) -> RoundInjections {
        match self {
            Scenario::Steady(s) => vec![(s, 1)],
            Scenario::Pair { a, b, phase } if (k + phase).is_multiple_of(2) => vec![(a, 1), (b, 1)],
            Scenario::Pair { .. } => Vec::new(),
        }
    }

    /// Injections that bring the cumulative count back to the round count.
    fn catch_up(self, m: u32) -> RoundInjections {
        match (self, m) {
            (_, 0) => Vec::new(),
            (Scenario::Pair { a, b, .. }, 2) => vec![(a, 1), (b, 1)],
            (Scenario::Steady(s), m) | (Scenario::Pair { a: s, .. }, m) => vec![(s, m)],
        }
    }
}

struct Found {
    prefix: Vec<RoundInjections>,
    last: RoundInjections,
    kind: MilestoneKind,
}

/// Runs `scenario` on clones until the first round that is void and can
/// serve as a milestone, for at most `depth` rounds.
fn probe(base: &Committed, scenario: Scenario, depth: u64) -> Option<Found> {
    let mut state: SimulationState = base.state.clone();
    let mut tracker = base.tracker.clone();
    let mut injected = base.injected;
    let mut prefix = Vec::new();
    for k in 0..depth {
        let round = state.round() + 1;
        if let Some(kind) = peek_void(&state) {
            let m = round as i64 - injected as i64;
            if (0..=2).contains(&m) && tracker.check(m as u64).is_ok() {
                return Some(Found {
                    prefix,
                    last: scenario.catch_up(m as u32),
                    kind,
                });
            }
        }
        let inj = scenario.injections(k);
        let t = total(&inj);
        tracker.push(t).ok()?;
        state.step(&inj).ok()?;
        injected += t;
        prefix.push(inj);
    }
    None
}

/// Repeatedly commits the scenario that reaches a milestone soonest.
fn force<F>(
    mut run: Committed,
    budget: ScenarioBudget,
    horizon: u64,
    scenarios: F,
) -> Result<SearchOutcome, SearchError>
where
    F: Fn(&Committed) -> Vec<Scenario>,
{
    let cap = budget.depth(horizon);
    while run.round() < horizon {
        let mut best: Option<Found> = None;
        for sc in scenarios(&run).into_iter().take(budget.max_scenarios) {
            let limit = best
                .as_ref()
                .map_or(cap, |b| b.prefix.len() as u64)
                .min(horizon - run.round());
            if let Some(found) = probe(&run, sc, limit) {
                if best
                    .as_ref()
                    .is_none_or(|b| found.prefix.len() < b.prefix.len())
                {
                    best = Some(found);
                }
            }
        }
        let Some(found) = best else {
            run.saturate_until(horizon)?;
            return Ok(run.into_outcome(true));
        };
        for inj in found.prefix {
            run.commit(inj)?;
        }
        run.commit_milestone(found.last, found.kind)?;
    }
    Ok(run.into_outcome(false))
}

fn distinguished(n: usize) -> Vec<StationId> {
    (1..=n.min(4) as u32).map(StationId).collect()
}

fn pairs(stations: &[StationId]) -> Vec<Scenario> {
    let mut out = Vec::new();
    for phase in 0..2 {
        for (i, &a) in stations.iter().enumerate() {
            for &b in &stations[i + 1..] {
                out.push(Scenario::Pair { a, b, phase });
            }
        }
    }
    out
}

/// Greedy void-round search against a rate-1 adversary type.
///
/// Scenarios are steady injection into one of the first four stations and
/// alternating double injections into two of them. Each step commits the
/// scenario whose first usable void round comes soonest and injects at that
/// round whatever restores one packet per round on average. When no probe
/// finds a void round within the depth cap, the rest of the horizon is
/// filled with a saturating continuation and `fallback` is set.
pub fn void_forcer(
    system: SimulationState,
    ty: AdversaryType,
    budget: ScenarioBudget,
    horizon: u64,
) -> Result<SearchOutcome, SearchError> {
    if ty.rate() != crate::adversary::Rate::ONE {
        return Err(SearchError::Precondition("rate must be 1".into()));
    }
    if burstiness(ty) < 1 {
        return Err(SearchError::Precondition(
            "burstiness must be at least 1".into(),
        ));
    }
    let stations = distinguished(system.n());
    let run = Committed::new(system, ty)?;
    force(run, budget, horizon, |_| {
        let mut out: Vec<Scenario> = stations.iter().map(|&s| Scenario::Steady(s)).collect();
        out.extend(pairs(&stations));
        out
    })
}

/// Void-round search against retaining algorithms under `window(2)`.
///
/// The station `p` heard most recently receives nothing. The three other
/// distinguished stations take turns in pairs with alternating double
/// injections, so that `p` eventually empties its pending slot and must
/// pause while the pair contends.
pub fn retaining_breaker(
    system: SimulationState,
    budget: ScenarioBudget,
    horizon: u64,
) -> Result<SearchOutcome, SearchError> {
    let n = system.n();
    if n < 4 {
        return Err(SearchError::Precondition("at least four stations".into()));
    }
    let run = Committed::new(system, AdversaryType::window(2))?;
    force(run, budget, horizon, move |run| {
        let p = run
            .records
            .iter()
            .rev()
            .find_map(|r| r.feedback.heard_packet().map(|pk| pk.station))
            .unwrap_or(StationId(1));
        let others: Vec<StationId> = (1..=n as u32)
            .map(StationId)
            .filter(|&s| s != p)
            .take(3)
            .collect();
        pairs(&others)
    })
}
