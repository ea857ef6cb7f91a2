use macsim_core::adversary::{
    burstiness, clipped, pattern_pair, random_feasible, saturating, scripted, validate,
    validate_totals, FeasibilityTracker, SaturationTarget, Silent,
};
use macsim_core::algorithms::round_robin;
use macsim_core::channel::{run, InjectionSource};
use macsim_core::{AdversaryType, InjectionScript, Rate, SimulationState, StationId};
use num_rational::Ratio;
use proptest::prelude::*;

/// Earliest-ending, then shortest, violating segment by exhaustive search.
fn oracle(totals: &[u64], ty: AdversaryType) -> Option<(u64, u64, u64)> {
    let (rate, w, b) = match ty {
        AdversaryType::Window { rate, w } => (rate.ratio(), Some(w), 0),
        AdversaryType::LeakyBucket { rate, b } => (rate.ratio(), None, b as i64),
    };
    for e in 1..=totals.len() {
        let mut acc = 0;
        for s in (1..=e).rev() {
            acc += totals[s - 1];
            let len = (e - s + 1) as i64;
            let allowed = match w {
                Some(w) if len as u64 > w => break,
                Some(w) => (rate * w as i64).floor(),
                None => rate * len + b,
            };
            if Ratio::from_integer(acc as i64) > allowed {
                return Some((s as u64, e as u64, acc));
            }
        }
    }
    None
}

fn rate_1() -> impl Strategy<Value = Rate> {
    (1i64..=4).prop_flat_map(|den| (1..=den).prop_map(move |num| Rate::new(num, den).unwrap()))
}

fn any_type() -> impl Strategy<Value = AdversaryType> {
    prop_oneof![
        (rate_1(), 1u64..6).prop_map(|(rate, w)| AdversaryType::Window { rate, w }),
        (rate_1(), 0u64..4).prop_map(|(rate, b)| AdversaryType::LeakyBucket { rate, b }),
    ]
}

#[test]
fn saturating_a_single_station() {
    let mut src = saturating(SaturationTarget::Station(StationId(1)));
    let s = SimulationState::new(Box::new(round_robin(2)), false).unwrap();
    let totals: Vec<u64> = (0..5)
        .map(|_| {
            src.next_injections(&s)
                .iter()
                .map(|&(_, c)| u64::from(c))
                .sum()
        })
        .collect();
    assert_eq!(totals, vec![1; 5]);
}

#[test]
fn saturated_round_robin_backs_up_at_the_target() {
    // Station 1 gets 300 packets and at most one turn in three.
    let s = SimulationState::new(Box::new(round_robin(3)), false).unwrap();
    let mut src = saturating(SaturationTarget::Station(StationId(1)));
    let t = run(s, &mut src, AdversaryType::leaky_bucket(0), 300).unwrap();
    let last = t.records.last().unwrap();
    assert!(last.queue_sizes[0] >= 197, "{:?}", last.queue_sizes);
    assert_eq!(&last.queue_sizes[1..], &[0, 0]);
}

#[test]
fn cycling_visits_every_station() {
    let s = SimulationState::new(Box::new(round_robin(3)), false).unwrap();
    let mut src = saturating(SaturationTarget::Cycling { n: 3 });
    let t = run(s, &mut src, AdversaryType::window(1), 6).unwrap();
    let order: Vec<u32> = t.injections().iter().map(|r| r[0].0 .0).collect();
    assert_eq!(order, vec![1, 2, 3, 1, 2, 3]);
}

#[test]
fn pattern_pair_alternates_pairs_and_gaps() {
    let s = SimulationState::new(Box::new(round_robin(3)), false).unwrap();
    let mut src = pattern_pair(StationId(1), StationId(3)).unwrap();
    let t = run(s, &mut src, AdversaryType::window(2), 4).unwrap();
    let pair = vec![(StationId(1), 1), (StationId(3), 1)];
    assert_eq!(t.injections(), vec![pair.clone(), vec![], pair, vec![]]);
    assert!(pattern_pair(StationId(2), StationId(2)).is_err());
}

#[test]
fn pattern_pair_is_clipped_to_a_tight_window() {
    let s = SimulationState::new(Box::new(round_robin(2)), false).unwrap();
    let src = pattern_pair(StationId(1), StationId(2)).unwrap();
    let ty = AdversaryType::window(1);
    let t = run(s, &mut clipped(src, ty), ty, 6).unwrap();
    let totals: Vec<u64> = t.records.iter().map(|r| r.injected_total()).collect();
    assert_eq!(totals, vec![1, 0, 1, 0, 1, 0]);
}

#[test]
fn empty_script_and_silent_source_inject_nothing() {
    for source in 0..2 {
        let s = SimulationState::new(Box::new(round_robin(2)), false).unwrap();
        let t = if source == 0 {
            run(s, &mut Silent, AdversaryType::window(1), 10).unwrap()
        } else {
            run(
                s,
                &mut scripted(InjectionScript::new()),
                AdversaryType::window(1),
                10,
            )
            .unwrap()
        };
        assert!(t.records.iter().all(|r| r.injected_total() == 0));
    }
}

#[test]
fn script_rejects_unknown_stations() {
    let script = InjectionScript::from_rounds(vec![vec![(StationId(4), 1)]]);
    assert!(script.check_stations(4).is_ok());
    assert!(script.check_stations(3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn validation_matches_exhaustive_search(
        ty in any_type(),
        totals in prop::collection::vec(0u64..4, 0..24),
    ) {
        let got = validate_totals(&totals, ty).err().map(|v| (v.segment.0, v.segment.1, v.injected));
        prop_assert_eq!(got, oracle(&totals, ty));
    }

    #[test]
    fn larger_buckets_accept_more(totals in prop::collection::vec(0u64..4, 0..30), b in 0u64..4) {
        if validate_totals(&totals, AdversaryType::leaky_bucket(b)).is_ok() {
            prop_assert!(validate_totals(&totals, AdversaryType::leaky_bucket(b + 1)).is_ok());
        }
    }

    #[test]
    fn multiples_of_a_window_accept_more(
        totals in prop::collection::vec(0u64..4, 0..30),
        w in 1u64..5,
        k in 2u64..4,
    ) {
        // Not monotone in w itself, see below.
        if validate_totals(&totals, AdversaryType::window(w)).is_ok() {
            prop_assert!(validate_totals(&totals, AdversaryType::window(k * w)).is_ok());
        }
    }

    #[test]
    fn windows_are_not_monotone(w in 2u64..6) {
        // Two full rounds just too far apart to share a window of w.
        let mut totals = vec![0; w as usize + 1];
        totals[0] = w;
        totals[w as usize] = w;
        prop_assert!(validate_totals(&totals, AdversaryType::window(w)).is_ok());
        prop_assert!(validate_totals(&totals, AdversaryType::window(w + 1)).is_err());
    }

    #[test]
    fn window_is_a_special_bucket(totals in prop::collection::vec(0u64..4, 0..30), w in 1u64..6) {
        if validate_totals(&totals, AdversaryType::window(w)).is_ok() {
            prop_assert!(validate_totals(&totals, AdversaryType::leaky_bucket(w)).is_ok());
        }
    }

    #[test]
    fn random_sources_stay_feasible(
        ty in any_type(),
        n in 1usize..6,
        seed: u64,
        greed in 0.0f64..=1.0,
    ) {
        let script = random_feasible(ty, n, seed).with_greed(greed).script(200);
        prop_assert!(validate(&script, ty).is_ok());
        prop_assert!(script.check_stations(n).is_ok());
        prop_assert!(script.totals().iter().all(|&t| t <= burstiness(ty)));
    }

    #[test]
    fn headroom_is_tight(ty in any_type(), totals in prop::collection::vec(0u64..4, 0..30)) {
        let mut t = FeasibilityTracker::new(ty);
        for x in totals {
            let room = t.headroom();
            prop_assert!(t.check(room).is_ok());
            prop_assert!(t.check(room + 1).is_err());
            t.push(x.min(room)).unwrap();
        }
    }

    #[test]
    fn script_text_round_trips(ty in any_type(), n in 1usize..5, seed: u64) {
        let script = random_feasible(ty, n, seed).script(60);
        let back = InjectionScript::parse(&script.to_text()).unwrap();
        // The text form drops trailing empty rounds.
        prop_assert_eq!(&back.totals()[..], &script.totals()[..back.len()]);
        prop_assert!(script.totals()[back.len()..].iter().all(|&t| t == 0));
        prop_assert_eq!(back, script);
    }
}
