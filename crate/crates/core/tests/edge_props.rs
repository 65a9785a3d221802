use cpqsd_core::edge::{
    cylinder_restrict, recenter, simulate_edge_trajectory, tv_distance, Backend, CanonicalKey, EdgeConfiguration,
    EmpiricalDistribution, InitialCondition, TrajectoryOptions,
};
use cpqsd_core::graphical::Configuration;
use cpqsd_core::spectral::{build_generator, point_mass, transient, Policy};
use proptest::prelude::*;

fn configuration() -> impl Strategy<Value = Configuration> {
    prop::collection::btree_set(-40i64..40, 1..=12).prop_map(|s| s.into_iter().collect())
}

fn distribution(depth: u32) -> impl Strategy<Value = EmpiricalDistribution> {
    let key = (0u64..1 << (depth - 1)).prop_map(|i| (i << 1) | 1);
    prop::collection::vec((key, 0.01f64..5.0), 1..=10)
        .prop_map(move |pairs| EmpiricalDistribution::from_probabilities(depth, pairs).unwrap())
}

proptest! {
    #[test]
    fn encode_decode_roundtrip(eta in configuration(), depth in 1u32..=63) {
        let (zeta, _) = recenter(&eta);
        let (key, clipped) = CanonicalKey::encode(&zeta, depth).unwrap();
        prop_assert!(key.is_valid());
        let kept: Vec<i64> = zeta.offsets().iter().filter(|&x| x > -(depth as i64)).collect();
        prop_assert_eq!(clipped, zeta.len() - kept.len());
        let decoded = key.decode();
        prop_assert_eq!(decoded.offsets().sites(), &kept[..]);
        if clipped == 0 {
            prop_assert_eq!(key.decode(), zeta);
        }
    }

    #[test]
    fn recenter_is_idempotent_and_translation_invariant(eta in configuration(), by in -1000i64..1000) {
        let (zeta, shift) = recenter(&eta);
        prop_assert_eq!(Some(shift), eta.max());
        prop_assert_eq!(zeta.offsets().max(), Some(0));
        prop_assert_eq!(recenter(zeta.offsets()), (zeta.clone(), 0));
        prop_assert_eq!(recenter(&eta.shifted(by)).0, zeta);
    }

    #[test]
    fn tv_is_a_metric(p in distribution(6), q in distribution(6), r in distribution(6)) {
        let pq = tv_distance(&p, &q).unwrap();
        prop_assert!((0.0..=1.0).contains(&pq));
        prop_assert!(tv_distance(&p, &p).unwrap() < 1e-12);
        prop_assert!((pq - tv_distance(&q, &p).unwrap()).abs() < 1e-12);
        let via = tv_distance(&p, &r).unwrap() + tv_distance(&r, &q).unwrap();
        prop_assert!(pq <= via + 1e-12);
    }

    #[test]
    fn cylinder_restriction_keeps_mass_and_contracts(p in distribution(8), q in distribution(8), m in 1u32..=8) {
        let pm = cylinder_restrict(&p, m).unwrap();
        prop_assert!((pm.total() - p.total()).abs() < 1e-9);
        let mass: f64 = pm.weights().values().sum();
        prop_assert!((mass - p.total()).abs() < 1e-9);
        let qm = cylinder_restrict(&q, m).unwrap();
        prop_assert!(tv_distance(&pm, &qm).unwrap() <= tv_distance(&p, &q).unwrap() + 1e-12);
    }

    #[test]
    fn edge_configuration_requires_pinned_maximum(eta in configuration()) {
        let pinned = eta.max() == Some(0);
        prop_assert_eq!(EdgeConfiguration::new(eta).is_ok(), pinned);
    }
}

fn endpoint_law(backend: Backend, t: f64, depth: u32, n: usize, seed: u64) -> (EmpiricalDistribution, usize) {
    let init = InitialCondition::Finite(Configuration::singleton(0));
    let opts = TrajectoryOptions { backend, ..TrajectoryOptions::new(0.5) };
    let mut dist = EmpiricalDistribution::new(depth).unwrap();
    let mut alive = 0;
    for i in 0..n {
        let r = simulate_edge_trajectory(&init, 0.5, t, depth, seed, i as u64, opts).unwrap();
        assert!(!r.censored);
        alive += r.survived as usize;
        dist.record(r.key, r.clipped, 1.0);
    }
    (dist, alive)
}

#[test]
fn lattice_and_event_log_backends_agree_in_law() {
    let n = 6000;
    let (a, alive_a) = endpoint_law(Backend::Lattice, 2.0, 6, n, 11);
    let (b, alive_b) = endpoint_law(Backend::EventLog, 2.0, 6, n, 12);
    let (pa, pb) = (alive_a as f64 / n as f64, alive_b as f64 / n as f64);
    let se = (pa * (1.0 - pa) / n as f64 + pb * (1.0 - pb) / n as f64).sqrt();
    assert!((pa - pb).abs() < 4.0 * se, "{pa} vs {pb}");
    let tv = tv_distance(&a.without_empty(), &b.without_empty()).unwrap();
    assert!(tv < 0.05, "tv {tv}");
}

/// At t = 1 almost no mass reaches depth 12, so the clipped generator's
/// transient law (with the absorbed mass on ∅) is the simulated law.
#[test]
fn simulated_edge_law_matches_generator_transient() {
    let (depth, t, n) = (12, 1.0, 40_000);
    let gen = build_generator(depth, 0.5, Policy::Clip).unwrap();
    let v = transient(&gen, &point_mass(&gen, CanonicalKey { key: 1, depth }).unwrap(), t).unwrap();
    let absorbed = 1.0 - v.iter().sum::<f64>();
    let exact = EmpiricalDistribution::from_probabilities(
        depth,
        v.iter().enumerate().map(|(i, &p)| (gen.key(i).key, p)).chain([(0, absorbed)]),
    )
    .unwrap();
    let (sim, _) = endpoint_law(Backend::Lattice, t, depth, n, 5);
    let tv = tv_distance(&sim, &exact).unwrap();
    assert!(tv < 0.03, "tv {tv}");
}
