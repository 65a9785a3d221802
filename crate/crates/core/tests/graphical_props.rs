use std::collections::BTreeSet;

use cpqsd_core::breakpoint::{
    favorable_intervals, first_break_point, is_break_point, rightmost_path, rightmost_surviving_source, tail_event_on_log,
};
use cpqsd_core::graphical::{
    evolve, reach_forward, sample_event_log, thin_arrows, Configuration, EventLog, Mark, MarkKind, SiteWindow,
    SpaceTimePoint,
};
use proptest::prelude::*;

const LO: i64 = -3;
const HI: i64 = 3;

/// Small logs on [−3, 3] × [0, 1] with distinct, evenly spread times.
fn small_log() -> impl Strategy<Value = EventLog> {
    let kind = prop_oneof![
        (LO..=HI).prop_map(|site| (site, 0i64)),
        (LO..HI).prop_map(|x| (x, 1)),
        ((LO + 1)..=HI).prop_map(|x| (x, -1)),
    ];
    prop::collection::vec(kind, 0..=12).prop_map(|kinds| {
        let n = kinds.len() as f64;
        let marks = kinds
            .into_iter()
            .enumerate()
            .map(|(i, (x, d))| {
                let time = (i as f64 + 1.0) / (n + 1.0);
                if d == 0 { Mark::recovery(x, time) } else { Mark::arrow(x, x + d, time) }
            })
            .collect();
        EventLog::from_marks(SiteWindow::new(LO, HI, 1.0).unwrap(), marks).unwrap()
    })
}

fn subset() -> impl Strategy<Value = Configuration> {
    prop::collection::btree_set(LO..=HI, 0..=7).prop_map(|s| s.into_iter().collect())
}

/// Sites reachable at time `t` by open paths from (x, s), by recursion over
/// the marks: the path lives at x until the first recovery there and may
/// take every arrow out of x before it.
fn oracle(x: i64, s: f64, t: f64, marks: &[Mark], out: &mut BTreeSet<i64>) {
    let death = marks
        .iter()
        .filter(|m| m.time > s && m.time <= t && m.kind == MarkKind::Recovery { site: x })
        .map(|m| m.time)
        .next();
    let alive_until = death.unwrap_or(f64::INFINITY);
    for m in marks {
        if let MarkKind::Arrow { from, to } = m.kind {
            if from == x && m.time > s && m.time <= t && m.time < alive_until {
                oracle(to, m.time, t, marks, out);
            }
        }
    }
    if death.is_none() {
        out.insert(x);
    }
}

fn set(c: &Configuration) -> BTreeSet<i64> {
    c.iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn evolve_matches_path_enumeration(log in small_log(), a in subset(), s in 0.0f64..1.0, dt in 0.0f64..1.0) {
        let t = (s + dt).min(1.0);
        let mut expect = BTreeSet::new();
        for x in a.iter() {
            oracle(x, s, t, log.marks(), &mut expect);
        }
        let got = evolve(&a, &log, s, t).unwrap().configuration;
        prop_assert_eq!(set(&got), expect);
    }

    #[test]
    fn evolve_is_monotone_and_additive(log in small_log(), a in subset(), b in subset()) {
        let union: Configuration = set(&a).union(&set(&b)).copied().collect();
        let ea = set(&evolve(&a, &log, 0.0, 1.0).unwrap().configuration);
        let eb = set(&evolve(&b, &log, 0.0, 1.0).unwrap().configuration);
        let eu = set(&evolve(&union, &log, 0.0, 1.0).unwrap().configuration);
        prop_assert!(ea.is_subset(&eu));
        prop_assert_eq!(eu, ea.union(&eb).copied().collect::<BTreeSet<_>>());
    }

    #[test]
    fn evolve_has_the_flow_property(log in small_log(), a in subset(), s in 0.0f64..1.0) {
        let mid = evolve(&a, &log, 0.0, s).unwrap().configuration;
        let two_step = evolve(&mid, &log, s, 1.0).unwrap().configuration;
        prop_assert_eq!(two_step, evolve(&a, &log, 0.0, 1.0).unwrap().configuration);
    }

    #[test]
    fn forward_trace_agrees_with_evolve(log in small_log(), a in subset(), u in 0.0f64..1.0) {
        let sources: Vec<SpaceTimePoint> = a.iter().map(|x| SpaceTimePoint::new(x, 0.0)).collect();
        let trace = reach_forward(&sources, &log, 1.0).unwrap();
        prop_assert_eq!(trace.at(u), evolve(&a, &log, 0.0, u).unwrap().configuration);
    }

    #[test]
    fn thinning_extremes(log in small_log(), seed in any::<u64>()) {
        let all = thin_arrows(&log, 1.0, seed).unwrap();
        prop_assert_eq!(all.marks(), log.marks());
        let none = thin_arrows(&log, 0.0, seed).unwrap();
        let only_recoveries = none.marks().iter().all(|m| matches!(m.kind, MarkKind::Recovery { .. }));
        prop_assert!(only_recoveries);
    }

    #[test]
    fn tail_event_is_monotone_in_t(seed in any::<u64>()) {
        let log = sample_event_log(SiteWindow::new(-6, 6, 6.0).unwrap(), 0.5, seed, 0).unwrap();
        let hits: Vec<bool> = (0..=6).map(|t| tail_event_on_log(&log, t as f64 * 0.5, 6.0).unwrap()).collect();
        prop_assert!(hits.windows(2).all(|w| w[0] >= w[1]), "{:?}", hits);
    }

    #[test]
    fn favorable_count_lemma(
        t in prop::sample::select(vec![64.0f64, 100.0, 400.0]),
        beta in prop::sample::select(vec![1.0f64, 18.0]),
        raw in prop::collection::vec(0.0f64..1.0, 0..=1200),
        squeeze in 0.0f64..1.0,
    ) {
        let cap = (beta * t).ceil() as usize;
        let mut times: Vec<f64> = raw.iter().take(cap).map(|u| u * squeeze * t).collect();
        times.sort_by(f64::total_cmp);
        let fav = favorable_intervals(&times, beta, t).unwrap();
        let need = (t.sqrt() / 4.0 - 1.0).ceil() as usize;
        prop_assert!(fav.len() >= need, "{} < {}", fav.len(), need);
        for w in fav.windows(2) {
            prop_assert!(w[1].1 <= w[0].0 + 1e-9);
        }
        for &(a, b) in &fav {
            prop_assert!(a >= -1e-9 && b <= t / 2.0 + 1e-9);
            prop_assert!((b - a - t.sqrt()).abs() < 1e-9);
        }
    }
}

/// Rightmost path and break point checked against `evolve` on sampled logs.
#[test]
fn rightmost_path_and_break_point_properties() {
    let (t, beta) = (4.0, 0.5);
    let window = SiteWindow::new(-10, 10, t).unwrap();
    let a = Configuration::interval(-10, 0);
    let mut with_break = 0;
    for stream in 0..300 {
        let log = sample_event_log(window, 0.5, 42, stream).unwrap();
        let Some(x) = rightmost_surviving_source(&a, &log, t).unwrap() else { continue };
        let gamma = rightmost_path(x, &log, t).unwrap();
        gamma.validate(&log).unwrap();
        let mut times: Vec<f64> = log.marks().iter().map(|m| m.time).filter(|&u| u <= t).collect();
        times.insert(0, 0.0);
        for &u in &times {
            let y = gamma.at(u);
            let from_x = evolve(&Configuration::singleton(x), &log, 0.0, u).unwrap().configuration;
            assert!(from_x.contains(y), "Γ leaves η^x at {u}");
            let from_a = evolve(&a, &log, 0.0, u).unwrap().configuration;
            assert!(y <= from_a.max().unwrap());
            // Γ is the rightmost point of η^x_u that still reaches time t.
            for z in from_x.iter().filter(|&z| z >= y) {
                let lives = !evolve(&Configuration::singleton(z), &log, u, t).unwrap().configuration.is_empty();
                assert_eq!(lives, z == y, "stream {stream} u {u} z {z} y {y}");
            }
        }
        let search = first_break_point(&gamma, &log, beta, t).unwrap();
        if let Some((r, y)) = search.found {
            with_break += 1;
            assert_eq!(gamma.at(r), y);
            assert!(is_break_point(y, r, &log, beta, t).unwrap());
            for &u in times.iter().filter(|&&u| u < r) {
                assert!(!is_break_point(gamma.at(u), u, &log, beta, t).unwrap(), "earlier break at {u} < {r}");
            }
        }
    }
    assert!(with_break > 0);
}
