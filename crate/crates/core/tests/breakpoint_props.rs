use cpqsd_core::breakpoint::{
    break_probability, break_probability_by_rejection, estimate_p_beta_coupled, not_good_probability, BreakSetup,
    Crossing,
};
use cpqsd_core::parallel::Parallelism;

fn par() -> Parallelism {
    Parallelism::from_env()
}

/// With no arrows a source site x reaches time √t iff it has no recovery
/// after the end of its source segment.
fn arrowless_crossing(geo: &Crossing) -> f64 {
    let root = geo.window.horizon;
    let mut last_source = std::collections::BTreeMap::new();
    for seg in &geo.staircase {
        last_source.insert(seg.site, seg.to);
    }
    for x in geo.half_line..=geo.window.hi {
        last_source.insert(x, 0.0);
    }
    let miss: f64 = last_source
        .iter()
        .filter(|(&x, _)| (1..=geo.target).contains(&x))
        .map(|(_, &to)| 1.0 - (-(root - to)).exp())
        .product();
    1.0 - miss
}

#[test]
fn crossing_without_arrows_matches_product_formula() {
    for (beta, t) in [(1.0, 4.0), (0.5, 9.0)] {
        let geo = Crossing::new(beta, t).unwrap();
        let exact = arrowless_crossing(&geo);
        let est = estimate_p_beta_coupled(beta, t, &[0.0, 0.5], 20_000, 3, &par()).unwrap();
        let e = est[0].estimate;
        let se = (exact * (1.0 - exact) / 20_000.0).sqrt();
        assert!((e.value - exact).abs() < 4.0 * se.max(1e-4), "β {beta} t {t}: {} vs {exact}", e.value);
        assert!(est[1].successes >= est[0].successes);
    }
}

#[test]
fn coupled_crossing_is_monotone_in_lambda() {
    let lambdas = [0.1, 0.3, 0.5, 0.8];
    let est = estimate_p_beta_coupled(1.0, 16.0, &lambdas, 2_000, 7, &par()).unwrap();
    for w in est.windows(2) {
        assert!(w[0].successes <= w[1].successes, "{} > {}", w[0].successes, w[1].successes);
    }
    for (e, &l) in est.iter().zip(&lambdas) {
        assert_eq!(e.lambda, l);
        assert!(e.upper95 >= e.estimate.value, "{e:?}");
    }
}

#[test]
fn break_estimator_agrees_with_rejection() {
    let setup = BreakSetup::new(0.5, 1.0, 6.0).unwrap();
    let (rej, accepted) = break_probability_by_rejection(setup, 100_000, 5, &par()).unwrap();
    assert!(accepted > 500, "only {accepted} accepted logs");
    let est = break_probability(setup, 20_000, 10, 6, &par()).unwrap();
    let p = est.probability;
    let se = (p.stderr * p.stderr + rej.stderr * rej.stderr).sqrt();
    assert!((p.value - rej.value).abs() < 4.0 * se, "splitting {} ± {} vs rejection {} ± {}", p.value, p.stderr, rej.value, rej.stderr);
}

#[test]
fn not_good_probability_decreases_in_t() {
    let logs: Vec<f64> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&t| not_good_probability(0.5, 18.0, t, 2_000, 2, &par()).unwrap().log_p.value)
        .collect();
    assert!(logs.windows(2).all(|w| w[1] < w[0]), "{logs:?}");
    assert!(logs.iter().all(|&l| l < 0.0));
}
