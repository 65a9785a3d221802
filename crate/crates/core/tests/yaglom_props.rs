use cpqsd_core::edge::{tv_distance, CanonicalKey};
use cpqsd_core::graphical::Configuration;
use cpqsd_core::parallel::Parallelism;
use cpqsd_core::spectral::{build_generator, point_mass, solve, survival_curve, vector_distribution, yaglom_exact, Policy};
use cpqsd_core::yaglom::{alpha_estimate, h_estimate, q_process_simulate, yaglom_estimate, Dynamics, McConfig, Strategy};

const DEPTH: u32 = 6;

fn par() -> Parallelism {
    Parallelism::from_env()
}

#[test]
fn generator_dynamics_match_exact_survival_and_law() {
    let gen = build_generator(DEPTH, 0.5, Policy::Clip).unwrap();
    let start = point_mass(&gen, CanonicalKey { key: 1, depth: DEPTH }).unwrap();
    let init = Configuration::singleton(0);
    for (strategy, t, replicas) in [
        (Strategy::Rejection, 2.0, 20_000),
        (Strategy::Splitting { checkpoint_dt: 1.0 }, 2.0, 20_000),
        (Strategy::Splitting { checkpoint_dt: 1.0 }, 8.0, 20_000),
    ] {
        let est = yaglom_estimate(&init, Dynamics::Generator(&gen), t, strategy, DEPTH, McConfig::new(replicas, 9), &par())
            .unwrap();
        let exact = survival_curve(&gen, &start, &[t]).unwrap()[0];
        let s = est.survival;
        assert!((s.value - exact).abs() < 4.0 * s.stderr, "{strategy:?} t = {t}: {} ± {} vs {exact}", s.value, s.stderr);
        let law = vector_distribution(&gen, &yaglom_exact(&gen, &start, t).unwrap());
        let tv = tv_distance(&est.distribution, &law).unwrap();
        assert!(tv < 0.03, "{strategy:?} t = {t}: tv {tv}");
    }
}

#[test]
fn lattice_splitting_agrees_with_rejection() {
    let init = Configuration::singleton(0);
    let dynamics = Dynamics::Lattice { lambda: 0.5 };
    let rej = yaglom_estimate(&init, dynamics, 3.0, Strategy::Rejection, 10, McConfig::new(5_000, 3), &par()).unwrap();
    let spl = yaglom_estimate(
        &init,
        dynamics,
        3.0,
        Strategy::Splitting { checkpoint_dt: 1.0 },
        10,
        McConfig::new(20_000, 4),
        &par(),
    )
    .unwrap();
    let (a, b) = (rej.survival, spl.survival);
    let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    assert!((a.value - b.value).abs() < 4.0 * se, "{} vs {}", a.value, b.value);
    let tv = tv_distance(&rej.distribution, &spl.distribution).unwrap();
    assert!(tv < 0.08, "tv {tv}");
}

#[test]
fn h_estimate_tracks_spectral_h() {
    let gen = build_generator(DEPTH, 0.5, Policy::Clip).unwrap();
    let s = solve(&gen).unwrap();
    let keys = [1u64, 0b11, 0b101, 0b111111];
    let states: Vec<Configuration> = keys.iter().map(|&k| CanonicalKey { key: k, depth: DEPTH }.decode().offsets().clone()).collect();
    let t = 12.0;
    let est = h_estimate(&states, Dynamics::Generator(&gen), s.alpha, t, 1.0, McConfig::new(20_000, 21), &par()).unwrap();
    for (&k, e) in keys.iter().zip(&est) {
        let i = gen.state_of(CanonicalKey { key: k, depth: DEPTH }).unwrap();
        let finite = (s.alpha * t).exp() * survival_curve(&gen, &point_mass(&gen, gen.key(i)).unwrap(), &[t]).unwrap()[0];
        // The finite-t value has converged to h by t = 12.
        assert!((finite - s.h[i]).abs() < 1e-3 * s.h[i], "key {k}: {finite} vs {}", s.h[i]);
        assert!((e.value - finite).abs() < 4.0 * e.stderr, "key {k}: {} ± {} vs {finite}", e.value, e.stderr);
    }
}

#[test]
fn alpha_fit_recovers_generator_alpha() {
    let gen = build_generator(DEPTH, 0.5, Policy::Clip).unwrap();
    let alpha = solve(&gen).unwrap().alpha;
    let grid = [4.0, 6.0, 8.0, 10.0, 12.0];
    let fit = alpha_estimate(
        &Configuration::singleton(0),
        Dynamics::Generator(&gen),
        &grid,
        1.0,
        McConfig::new(20_000, 5),
        &par(),
    )
    .unwrap();
    assert!((fit.alpha_hat - alpha).abs() < 4.0 * fit.stderr + 0.005, "{} ± {} vs {alpha}", fit.alpha_hat, fit.stderr);
}

#[test]
fn q_process_occupation_approaches_nu_h() {
    let gen = build_generator(DEPTH, 0.5, Policy::Clip).unwrap();
    let s = solve(&gen).unwrap();
    let run = q_process_simulate(&s, &gen, 400_000, 8).unwrap();
    let tv = tv_distance(&run.occupation, &s.nu_h_distribution()).unwrap();
    assert!(tv < 0.02, "tv {tv}");
    assert_eq!(run.jumps, 400_000);
}
