//! Injection constraints, an incremental feasibility checker and the
//! non-adaptive injection sources.
//!
//! A window adversary of type `(rho, w)` may inject at most `floor(rho * w)`
//! packets in any `w` consecutive rounds. A leaky-bucket adversary of type
//! `(rho, b)` may inject at most `rho * t + b` packets in any `t`
//! consecutive rounds. Rounds outside a script carry no injections, so a
//! window constraint also caps every shorter segment.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::channel::{InjectionSource, Round, RoundInjections, SimulationState, StationId};

/// Injection rate in `(0, 1]`, kept as an exact fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rate(Ratio<i64>);

impl Rate {
    pub const ONE: Rate = Rate(Ratio::new_raw(1, 1));

    pub fn new(num: i64, den: i64) -> Result<Self, AdversaryError> {
        if den <= 0 || num <= 0 || num > den {
            return Err(AdversaryError::BadRate(format!("{num}/{den}")));
        }
        Ok(Rate(Ratio::new(num, den)))
    }

    pub fn ratio(self) -> Ratio<i64> {
        self.0
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.to_integer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Rate {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AdversaryError::BadRate(s.to_string());
        let (num, den) = match s.trim().split_once('/') {
            Some((a, b)) => (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ),
            None => (s.trim().parse().map_err(|_| bad())?, 1),
        };
        Rate::new(num, den)
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversaryType {
    Window { rate: Rate, w: u64 },
    LeakyBucket { rate: Rate, b: u64 },
}

impl AdversaryType {
    /// Rate-1 window adversary. `w` must be positive.
    pub fn window(w: u64) -> Self {
        assert!(w >= 1, "window size must be positive");
        AdversaryType::Window { rate: Rate::ONE, w }
    }

    /// Rate-1 leaky-bucket adversary.
    pub fn leaky_bucket(b: u64) -> Self {
        AdversaryType::LeakyBucket { rate: Rate::ONE, b }
    }

    pub fn rate(self) -> Rate {
        match self {
            AdversaryType::Window { rate, .. } | AdversaryType::LeakyBucket { rate, .. } => rate,
        }
    }
}

impl fmt::Display for AdversaryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryType::Window { rate, w } => write!(f, "window({rate},{w})"),
            AdversaryType::LeakyBucket { rate, b } => write!(f, "leaky-bucket({rate},{b})"),
        }
    }
}

/// Maximum number of packets injectable in a single round.
pub fn burstiness(ty: AdversaryType) -> u64 {
    match ty {
        AdversaryType::Window { rate, w } => (rate.ratio() * w as i64).floor().to_integer() as u64,
        AdversaryType::LeakyBucket { rate, b } => {
            (rate.ratio() + b as i64).floor().to_integer() as u64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("rate must be a fraction in (0, 1], got {0}")]
    BadRate(String),
    #[error("pattern pair needs two distinct stations, got {0} twice")]
    SameStation(StationId),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("script names station {station} but the channel has {n} stations")]
    UnknownStation { station: StationId, n: usize },
}

/// The earliest-ending segment that breaks the constraint; among segments
/// ending at the same round, the shortest.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Violation {
    pub round: Round,
    pub segment: (Round, Round),
    pub injected: u64,
    pub allowed: Ratio<i64>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rounds {}..={} carry {} packets, at most {} allowed",
            self.segment.0, self.segment.1, self.injected, self.allowed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum TrackerState {
    /// Totals of the last `w - 1` rounds, oldest first.
    Window { cap: u64, recent: VecDeque<u64> },
    /// `excess` is the maximum over segments ending now of
    /// `injected - rho * len`. `tail` holds the totals since the excess was
    /// last non-positive; no shortest witness can start earlier.
    Bucket {
        rate: Ratio<i64>,
        b: i64,
        excess: Ratio<i64>,
        tail: Vec<u64>,
    },
}

/// Online feasibility checker. `push` is O(w) for windows and amortized
/// O(1) for leaky buckets except when reporting a violation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeasibilityTracker {
    ty: AdversaryType,
    round: Round,
    state: TrackerState,
}

impl FeasibilityTracker {
    pub fn new(ty: AdversaryType) -> Self {
        let state = match ty {
            AdversaryType::Window { w, .. } => TrackerState::Window {
                cap: burstiness(ty),
                recent: VecDeque::with_capacity(w as usize),
            },
            AdversaryType::LeakyBucket { rate, b } => TrackerState::Bucket {
                rate: rate.ratio(),
                b: b as i64,
                excess: Ratio::from_integer(0),
                tail: Vec::new(),
            },
        };
        FeasibilityTracker {
            ty,
            round: 0,
            state,
        }
    }

    pub fn adversary_type(&self) -> AdversaryType {
        self.ty
    }

    /// Rounds checked so far.
    pub fn round(&self) -> Round {
        self.round
    }

    /// Largest total that the next round may carry.
    pub fn headroom(&self) -> u64 {
        match &self.state {
            TrackerState::Window { cap, recent } => cap.saturating_sub(recent.iter().sum()),
            TrackerState::Bucket {
                rate, b, excess, ..
            } => {
                let room = *rate + *b - excess.max(&Ratio::from_integer(0));
                room.floor().to_integer().max(0) as u64
            }
        }
    }

    /// Key that determines all future feasibility decisions.
    pub fn state_key(&self) -> (Vec<u64>, Ratio<i64>) {
        match &self.state {
            TrackerState::Window { recent, .. } => {
                (recent.iter().copied().collect(), Ratio::from_integer(0))
            }
            TrackerState::Bucket { excess, .. } => {
                (Vec::new(), (*excess).max(Ratio::from_integer(0)))
            }
        }
    }

    /// Checks and records the total of the next round. On violation the
    /// tracker is left unchanged.
    pub fn push(&mut self, total: u64) -> Result<(), Violation> {
        let e = self.round + 1;
        match &mut self.state {
            TrackerState::Window { cap, recent } => {
                let w = match self.ty {
                    AdversaryType::Window { w, .. } => w as usize,
                    AdversaryType::LeakyBucket { .. } => unreachable!(),
                };
                let sum: u64 = recent.iter().sum::<u64>() + total;
                if sum > *cap {
                    let mut acc = total;
                    let mut s = e;
                    for &x in recent.iter().rev() {
                        if acc > *cap {
                            break;
                        }
                        acc += x;
                        s -= 1;
                    }
                    return Err(Violation {
                        round: e,
                        segment: (s, e),
                        injected: acc,
                        allowed: Ratio::from_integer(*cap as i64),
                    });
                }
                if w > 1 {
                    if recent.len() == w - 1 {
                        recent.pop_front();
                    }
                    recent.push_back(total);
                }
            }
            TrackerState::Bucket {
                rate,
                b,
                excess,
                tail,
            } => {
                let zero = Ratio::from_integer(0);
                let next = (*excess).max(zero) + total as i64 - *rate;
                if next > Ratio::from_integer(*b) {
                    let mut acc = total;
                    let mut s = e;
                    let mut k = tail.len();
                    while Ratio::from_integer(acc as i64) <= *rate * (e - s + 1) as i64 + *b {
                        k -= 1;
                        acc += tail[k];
                        s -= 1;
                    }
                    return Err(Violation {
                        round: e,
                        segment: (s, e),
                        injected: acc,
                        allowed: *rate * (e - s + 1) as i64 + *b,
                    });
                }
                *excess = next;
                if next <= zero {
                    tail.clear();
                } else {
                    tail.push(total);
                }
            }
        }
        self.round = e;
        Ok(())
    }

    /// Like `push` but leaves the tracker untouched.
    pub fn check(&self, total: u64) -> Result<(), Violation> {
        self.clone().push(total)
    }
}

/// Checks per-round totals against `ty`.
pub fn validate_totals(totals: &[u64], ty: AdversaryType) -> Result<(), Violation> {
    let mut tracker = FeasibilityTracker::new(ty);
    totals.iter().try_for_each(|&t| tracker.push(t))
}

pub fn validate(script: &InjectionScript, ty: AdversaryType) -> Result<(), Violation> {
    validate_totals(&script.totals(), ty)
}

/// Injections per round, round 1 first. Counts are positive.
#[derive(Clone, Debug, Default, Eq, Serialize, Deserialize)]
pub struct InjectionScript {
    rounds: Vec<RoundInjections>,
}

impl PartialEq for InjectionScript {
    /// Trailing empty rounds are insignificant.
    fn eq(&self, other: &Self) -> bool {
        self.trimmed_rounds() == other.trimmed_rounds()
    }
}

impl InjectionScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rounds<I>(rounds: I) -> Self
    where
        I: IntoIterator<Item = RoundInjections>,
    {
        let mut script = Self::new();
        for r in rounds {
            script.push_round(r);
        }
        script
    }

    /// Builds a script that puts each round's total into one station.
    pub fn from_totals(totals: &[u64], station: StationId) -> Self {
        Self::from_rounds(totals.iter().map(|&t| vec![(station, t as u32)]))
    }

    /// Appends one round; zero counts are dropped.
    pub fn push_round(&mut self, injections: RoundInjections) {
        self.rounds
            .push(injections.into_iter().filter(|&(_, c)| c > 0).collect());
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Injections of `round` (1-based); empty past the end.
    pub fn round(&self, round: Round) -> &[(StationId, u32)] {
        round
            .checked_sub(1)
            .and_then(|r| self.rounds.get(r as usize))
            .map_or(&[], Vec::as_slice)
    }

    pub fn rounds(&self) -> &[RoundInjections] {
        &self.rounds
    }

    pub fn totals(&self) -> Vec<u64> {
        self.rounds
            .iter()
            .map(|r| r.iter().map(|&(_, c)| u64::from(c)).sum())
            .collect()
    }

    fn trimmed_rounds(&self) -> &[RoundInjections] {
        let end = self
            .rounds
            .iter()
            .rposition(|r| !r.is_empty())
            .map_or(0, |k| k + 1);
        &self.rounds[..end]
    }

    pub fn check_stations(&self, n: usize) -> Result<(), AdversaryError> {
        for r in &self.rounds {
            for &(station, _) in r {
                if station.0 == 0 || station.index() >= n {
                    return Err(AdversaryError::UnknownStation { station, n });
                }
            }
        }
        Ok(())
    }

    /// Line-oriented form: one `round station count` triple per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, r) in self.rounds.iter().enumerate() {
            for &(s, c) in r {
                out.push_str(&format!("{} {} {}\n", k + 1, s.0, c));
            }
        }
        out
    }

    /// Parses the line format. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, AdversaryError> {
        let mut rounds: Vec<RoundInjections> = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| AdversaryError::Parse {
                line: k + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err("expected `round station count`"));
            }
            let round: usize = fields[0].parse().map_err(|_| err("bad round"))?;
            let station: u32 = fields[1].parse().map_err(|_| err("bad station"))?;
            let count: u32 = fields[2].parse().map_err(|_| err("bad count"))?;
            if round == 0 || station == 0 || count == 0 {
                return Err(err("round, station and count must be positive"));
            }
            if round < rounds.len() {
                return Err(err("rounds must be non-decreasing"));
            }
            rounds.resize_with(round, Vec::new);
            rounds[round - 1].push((StationId(station), count));
        }
        Ok(InjectionScript { rounds })
    }
}

impl fmt::Display for InjectionScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl<S: InjectionSource + ?Sized> InjectionSource for Box<S> {
    fn next_injections(&mut self, state: &SimulationState) -> RoundInjections {
        (**self).next_injections(state)
    }
}

/// Injects nothing.
#[derive(Clone, Debug, Default)]
pub struct Silent;

impl InjectionSource for Silent {
    fn next_injections(&mut self, _: &SimulationState) -> RoundInjections {
        Vec::new()
    }
}

#[derive(Clone, Debug)]
pub enum SaturationTarget {
    Station(StationId),
    /// Stations `1..=n` in turn, one per round.
    Cycling {
        n: usize,
    },
}

/// One packet per round, feasible for every rate-1 type.
#[derive(Clone, Debug)]
pub struct Saturating {
    target: SaturationTarget,
    emitted: u64,
}

pub fn saturating(target: SaturationTarget) -> Saturating {
    Saturating { target, emitted: 0 }
}

impl InjectionSource for Saturating {
    fn next_injections(&mut self, _: &SimulationState) -> RoundInjections {
        let station = match self.target {
            SaturationTarget::Station(s) => s,
            SaturationTarget::Cycling { n } => {
                StationId::from_index((self.emitted % n as u64) as usize)
            }
        };
        self.emitted += 1;
        vec![(station, 1)]
    }
}

/// One packet into each of `a` and `b` at odd rounds of activation.
#[derive(Clone, Debug)]
pub struct PatternPair {
    a: StationId,
    b: StationId,
    t: u64,
}

pub fn pattern_pair(a: StationId, b: StationId) -> Result<PatternPair, AdversaryError> {
    if a == b {
        return Err(AdversaryError::SameStation(a));
    }
    Ok(PatternPair { a, b, t: 0 })
}

impl InjectionSource for PatternPair {
    fn next_injections(&mut self, _: &SimulationState) -> RoundInjections {
        self.t += 1;
        if self.t % 2 == 1 {
            vec![(self.a, 1), (self.b, 1)]
        } else {
            Vec::new()
        }
    }
}

/// Replays a script from round 1, then injects nothing.
#[derive(Clone, Debug)]
pub struct Scripted {
    script: InjectionScript,
    next: Round,
}

pub fn scripted(script: InjectionScript) -> Scripted {
    Scripted { script, next: 1 }
}

impl InjectionSource for Scripted {
    fn next_injections(&mut self, _: &SimulationState) -> RoundInjections {
        let out = self.script.round(self.next).to_vec();
        self.next += 1;
        out
    }
}

/// Random feasible injections: every round draws a total no larger than the
/// remaining allowance and scatters it over `targets`.
#[derive(Clone, Debug)]
pub struct RandomFeasible {
    tracker: FeasibilityTracker,
    targets: Vec<StationId>,
    rng: ChaCha8Rng,
    /// Probability of injecting the full allowance rather than a uniform
    /// draw below it.
    greed: f64,
}

pub fn random_feasible(ty: AdversaryType, n: usize, seed: u64) -> RandomFeasible {
    RandomFeasible {
        tracker: FeasibilityTracker::new(ty),
        targets: (0..n).map(StationId::from_index).collect(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        greed: 0.5,
    }
}

impl RandomFeasible {
    pub fn with_targets(mut self, targets: Vec<StationId>) -> Self {
        assert!(!targets.is_empty());
        self.targets = targets;
        self
    }

    pub fn with_greed(mut self, greed: f64) -> Self {
        self.greed = greed.clamp(0.0, 1.0);
        self
    }

    /// Draws the next round without needing a simulation state.
    pub fn draw(&mut self) -> RoundInjections {
        let room = self.tracker.headroom();
        let total = if self.rng.gen_bool(self.greed) {
            room
        } else {
            self.rng.gen_range(0..=room)
        };
        self.tracker
            .push(total)
            .expect("draw stays within headroom");
        let mut counts = vec![0u32; self.targets.len()];
        for _ in 0..total {
            counts[self.rng.gen_range(0..self.targets.len())] += 1;
        }
        self.targets
            .iter()
            .zip(counts)
            .filter(|&(_, c)| c > 0)
            .map(|(&s, c)| (s, c))
            .collect()
    }

    pub fn script(mut self, horizon: u64) -> InjectionScript {
        InjectionScript::from_rounds((0..horizon).map(|_| self.draw()))
    }
}

impl InjectionSource for RandomFeasible {
    fn next_injections(&mut self, _: &SimulationState) -> RoundInjections {
        self.draw()
    }
}

/// Trims another source's injections so that every round stays feasible.
/// Packets are dropped from the end of the round's list.
#[derive(Clone, Debug)]
pub struct Clipped<S> {
    inner: S,
    tracker: FeasibilityTracker,
}

pub fn clipped<S: InjectionSource>(inner: S, ty: AdversaryType) -> Clipped<S> {
    Clipped {
        inner,
        tracker: FeasibilityTracker::new(ty),
    }
}

impl<S: InjectionSource> InjectionSource for Clipped<S> {
    fn next_injections(&mut self, state: &SimulationState) -> RoundInjections {
        let mut room = self.tracker.headroom();
        let mut out = Vec::new();
        for (s, c) in self.inner.next_injections(state) {
            let take = u64::from(c).min(room);
            room -= take;
            if take > 0 {
                out.push((s, take as u32));
            }
        }
        let total = out.iter().map(|&(_, c)| u64::from(c)).sum();
        self.tracker.push(total).expect("clipped to headroom");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(k: u32) -> StationId {
        StationId(k)
    }

    #[test]
    fn alternating_pairs_fit_small_window() {
        assert!(validate_totals(&[2, 0, 2, 0], AdversaryType::window(2)).is_ok());
    }

    #[test]
    fn empty_script_is_feasible() {
        assert!(validate(&InjectionScript::new(), AdversaryType::window(1)).is_ok());
        assert!(validate(&InjectionScript::new(), AdversaryType::leaky_bucket(0)).is_ok());
    }

    #[test]
    fn triple_burst_breaks_bucket_of_one() {
        let v = validate_totals(&[3], AdversaryType::leaky_bucket(1)).unwrap_err();
        assert_eq!(v.round, 1);
        assert_eq!(v.segment, (1, 1));
        assert_eq!(v.injected, 3);
        assert_eq!(v.allowed, Ratio::from_integer(2));
    }

    #[test]
    fn alternating_pairs_fit_bucket_of_one() {
        let totals: Vec<u64> = (0..10).map(|k| if k % 2 == 0 { 2 } else { 0 }).collect();
        assert!(validate_totals(&totals, AdversaryType::leaky_bucket(1)).is_ok());
    }

    #[test]
    fn window_witness_is_shortest() {
        let v = validate_totals(&[0, 1, 0, 3], AdversaryType::window(3)).unwrap_err();
        assert_eq!(v.round, 4);
        assert_eq!(v.segment, (2, 4));
        assert_eq!(v.injected, 4);
        let v = validate_totals(&[0, 2, 2], AdversaryType::window(2)).unwrap_err();
        assert_eq!(v.segment, (2, 3));
    }

    #[test]
    fn bucket_witness_spans_the_accumulated_excess() {
        // Excess climbs by one per round and overflows b = 1 at round 2.
        let v = validate_totals(&[2, 2, 2], AdversaryType::leaky_bucket(1)).unwrap_err();
        assert_eq!(v.round, 2);
        assert_eq!(v.segment, (1, 2));
        assert_eq!(v.injected, 4);
    }

    #[test]
    fn burstiness_matches_type() {
        assert_eq!(burstiness(AdversaryType::window(5)), 5);
        assert_eq!(burstiness(AdversaryType::leaky_bucket(1)), 2);
        assert_eq!(burstiness(AdversaryType::leaky_bucket(0)), 1);
        let half = AdversaryType::Window {
            rate: Rate::new(1, 2).unwrap(),
            w: 5,
        };
        assert_eq!(burstiness(half), 2);
    }

    #[test]
    fn fractional_window_caps_each_segment() {
        let ty = AdversaryType::Window {
            rate: Rate::new(2, 3).unwrap(),
            w: 3,
        };
        assert!(validate_totals(&[1, 0, 1, 0, 0, 2], ty).is_ok());
        assert!(validate_totals(&[0, 1, 1, 1], ty).is_err());
    }

    #[test]
    fn headroom_is_the_largest_feasible_total() {
        for ty in [AdversaryType::window(3), AdversaryType::leaky_bucket(2)] {
            let mut t = FeasibilityTracker::new(ty);
            for x in [1, 0, 2, 0, 0, 1] {
                let room = t.headroom();
                assert!(t.check(room).is_ok());
                assert!(t.check(room + 1).is_err());
                if x <= room {
                    t.push(x).unwrap();
                }
            }
        }
    }

    #[test]
    fn rate_parsing() {
        assert_eq!("1".parse::<Rate>().unwrap(), Rate::ONE);
        assert_eq!("2/4".parse::<Rate>().unwrap().to_string(), "1/2");
        assert!("3/2".parse::<Rate>().is_err());
        assert!("0".parse::<Rate>().is_err());
    }

    #[test]
    fn script_text_round_trip() {
        let script = InjectionScript::from_rounds(vec![
            vec![(s(1), 2)],
            vec![],
            vec![(s(2), 1), (s(1), 1)],
            vec![],
        ]);
        let text = script.to_text();
        assert_eq!(text, "1 1 2\n3 2 1\n3 1 1\n");
        let back = InjectionScript::parse(&text).unwrap();
        assert_eq!(back, script);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn script_parse_rejects_disorder() {
        assert!(InjectionScript::parse("2 1 1\n1 1 1\n").is_err());
        assert!(InjectionScript::parse("1 1 0\n").is_err());
        assert!(InjectionScript::parse("1 1\n").is_err());
    }

    #[test]
    fn pattern_pair_rejects_equal_stations() {
        assert_eq!(
            pattern_pair(s(2), s(2)).unwrap_err(),
            AdversaryError::SameStation(s(2))
        );
    }
}
