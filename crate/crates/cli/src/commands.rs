//! One function per subcommand; each writes its artifacts and a manifest to
//! the output directory and returns the lines to print.

use std::time::Instant;

use cpqsd_core::artifacts::ArtifactWriter;
use cpqsd_core::breakpoint::{self, BreakSetup};
use cpqsd_core::criteria::{self, AuditOptions};
use cpqsd_core::edge::{self, EmpiricalDistribution, InitialCondition, TrajectoryOptions};
use cpqsd_core::graphical::{self, ceil_beta_t, Configuration, SiteWindow, SpaceTimePoint};
use cpqsd_core::parallel::Parallelism;
use cpqsd_core::rng;
use cpqsd_core::spectral;
use cpqsd_core::verify::{self, VerifyConfig};
use cpqsd_core::yaglom::{self, Dynamics, McConfig, Strategy};
use cpqsd_core::{Error, Result};
use serde_json::json;

use crate::config::{Command, RunConfig};

pub struct Outcome {
    pub lines: Vec<String>,
    /// False when a verification ran but did not pass.
    pub pass: bool,
}

fn ok(lines: Vec<String>) -> Result<Outcome> {
    Ok(Outcome { lines, pass: true })
}

fn single_time(cfg: &RunConfig) -> Result<f64> {
    cfg.t.ok_or_else(|| Error::Parameter { field: "t", message: "this command needs a single --t".into() })
}

fn initial(cfg: &RunConfig) -> InitialCondition {
    match cfg.m {
        Some(m) => InitialCondition::FullInterval { m },
        None => InitialCondition::Finite(Configuration::singleton(0)),
    }
}

pub fn run(cfg: &RunConfig, par: &Parallelism) -> Result<Outcome> {
    let start = Instant::now();
    if cfg.command == Command::VerifyAll {
        return verify_all(cfg, par);
    }
    let mut out = ArtifactWriter::create(&cfg.output_dir, cfg)?;
    let outcome = match cfg.command {
        Command::Simulate => simulate(cfg, par, &mut out),
        Command::Spectral => spectral_cmd(cfg, &mut out),
        Command::Yaglom => yaglom_cmd(cfg, par, &mut out),
        Command::Breakpoints => breakpoints(cfg, par, &mut out),
        Command::Criteria => criteria_cmd(cfg, par, &mut out),
        Command::VerifyAll => unreachable!(),
    }?;
    out.finish(start.elapsed().as_secs_f64())?;
    Ok(outcome)
}

fn simulate(cfg: &RunConfig, par: &Parallelism, out: &mut ArtifactWriter) -> Result<Outcome> {
    let t = single_time(cfg)?;
    let init = initial(cfg);
    let opts = TrajectoryOptions { beta: cfg.beta, ..TrajectoryOptions::new(cfg.lambda) };
    let seed = rng::derive_seed(cfg.seed, rng::job_id("simulate"));
    let results: Vec<Result<edge::EdgeOutcome>> =
        par.map(cfg.replicas, |i| edge::simulate_edge_trajectory(&init, cfg.lambda, t, cfg.l, seed, i as u64, opts));
    let mut dist = EmpiricalDistribution::new(cfg.l)?;
    let (mut survived, mut censored) = (0usize, 0usize);
    for r in results {
        let r = r?;
        survived += r.survived as usize;
        censored += r.censored as usize;
        dist.record(r.key, r.clipped, 1.0);
    }
    out.csv("endpoints.csv", &dist.to_csv(cfg.lambda, t, cfg.seed))?;
    let summary = json!({
        "replicas": cfg.replicas,
        "survived": survived,
        "censored": censored,
        "survival_fraction": survived as f64 / cfg.replicas.max(1) as f64,
    });
    out.json("simulate.json", &summary)?;
    ok(vec![format!("{survived} of {} replicas alive at t = {t} ({censored} censored)", cfg.replicas)])
}

fn spectral_cmd(cfg: &RunConfig, out: &mut ArtifactWriter) -> Result<Outcome> {
    let gen = spectral::build_generator(cfg.l, cfg.lambda, cfg.policy)?;
    let res = spectral::solve(&gen)?;
    out.json("spectral.json", &serde_json::from_str::<serde_json::Value>(&res.to_json())?)?;
    out.csv("nu.csv", &res.nu_distribution().to_csv(cfg.lambda, f64::INFINITY, cfg.seed))?;
    let mut lines = vec![format!(
        "alpha = {:.12} at L = {}, residuals {:.2e} / {:.2e}, nu.h = {:.15}",
        res.alpha,
        cfg.l,
        res.residuals.left,
        res.residuals.right,
        res.nu_dot_h()
    )];
    if !cfg.times().is_empty() {
        let surv = spectral::survival_curve(&gen, &res.nu, &cfg.times())?;
        lines.push(format!("P(tau^nu > t) = {surv:?}"));
    }
    ok(lines)
}

fn yaglom_cmd(cfg: &RunConfig, par: &Parallelism, out: &mut ArtifactWriter) -> Result<Outcome> {
    let init = initial(cfg).configuration();
    let mc = McConfig::new(cfg.replicas, cfg.seed);
    let strategy = Strategy::Splitting { checkpoint_dt: 1.0 };
    let dynamics = Dynamics::Lattice { lambda: cfg.lambda };
    let mut lines = Vec::new();
    for t in cfg.times() {
        let est = yaglom::yaglom_estimate(&init, dynamics, t, strategy, cfg.l, mc, par)?;
        out.csv(&format!("yaglom_t{t}.csv"), &est.distribution.to_csv(cfg.lambda, t, cfg.seed))?;
        out.json(&format!("diagnostics_t{t}.json"), &est.diagnostics)?;
        lines.push(format!(
            "t = {t}: P(tau > t) = {:.6e} ± {:.1e}, ESS {:.0}",
            est.survival.value, est.survival.stderr, est.diagnostics.ess
        ));
    }
    if let Some(grid) = cfg.t_grid.as_ref().filter(|g| g.len() >= 3 && g[0] > 0.0) {
        let fit = yaglom::alpha_estimate(&init, dynamics, grid, 1.0, mc, par)?;
        lines.push(format!("alpha_hat = {:.5} ± {:.5}", fit.alpha_hat, fit.stderr));
        out.json("alpha.json", &fit)?;
    }
    ok(lines)
}

fn breakpoints(cfg: &RunConfig, par: &Parallelism, out: &mut ArtifactWriter) -> Result<Outcome> {
    let t = single_time(cfg)?;
    if t <= 0.0 || t.is_nan() {
        return Err(Error::Parameter { field: "t", message: "must be positive".into() });
    }
    let k = ceil_beta_t(cfg.beta, t) as i64;
    let m = cfg.m.map(|m| m as i64).unwrap_or(4 * k);
    let a = Configuration::interval(-m, 0);
    let window = SiteWindow::new(-m - 2 * k, 2 * k, t)?;
    let seed = rng::derive_seed(cfg.seed, rng::job_id("breakpoints"));
    let reports: Vec<Result<breakpoint::BreakPointReport>> = par.map(cfg.replicas.max(1), |i| {
        let log = graphical::sample_event_log(window, cfg.lambda, seed, i as u64)?;
        breakpoint::break_point_report(&a, &log, cfg.beta, t)
    });
    let reports: Vec<breakpoint::BreakPointReport> = reports.into_iter().collect::<Result<_>>()?;
    let lines: Vec<String> = reports.iter().map(|r| r.to_json_line()).collect::<Result<_>>()?;
    out.json_lines("breakpoints.jsonl", &lines)?;
    // Space-time picture of the first realization.
    let log = graphical::sample_event_log(window, cfg.lambda, seed, 0)?;
    let sources: Vec<SpaceTimePoint> = a.iter().map(|x| SpaceTimePoint::new(x, 0.0)).collect();
    let trace = graphical::reach_forward(&sources, &log, t)?;
    let first = &reports[0];
    let gamma = match first.x {
        Some(x) => Some(breakpoint::rightmost_path(x, &log, t)?),
        None => None,
    };
    let brk = first.break_time.zip(first.y);
    out.csv("space_time.csv", &breakpoint::space_time_csv(&trace, gamma.as_ref(), brk))?;
    let early = reports.iter().filter(|r| r.break_time.is_some_and(|s| s <= t / 2.0)).count();
    let mut lines = vec![format!(
        "{} realizations from [-{m}, 0]: {} with a break point, {early} with break_time <= t/2",
        reports.len(),
        reports.iter().filter(|r| r.break_time.is_some()).count()
    )];
    if let Some(population) = cfg.target_survivors {
        let est = breakpoint::break_probability(BreakSetup::new(cfg.lambda, cfg.beta, t)?, population, 10, cfg.seed, par)?;
        out.json("break_probability.json", &est)?;
        lines.push(format!(
            "P(break_time <= t/2) = {:.4} ± {:.4} (splitting estimator)",
            est.probability.value, est.probability.stderr
        ));
    }
    ok(lines)
}

fn criteria_cmd(cfg: &RunConfig, par: &Parallelism, out: &mut ArtifactWriter) -> Result<Outcome> {
    let alpha = spectral::solve(&spectral::build_generator(cfg.l, cfg.lambda, cfg.policy)?)?.alpha;
    let opts = AuditOptions {
        lambda: cfg.lambda,
        alpha,
        rho_fraction: 0.9,
        q_max: 40,
        n_max: 10,
        replicas: cfg.replicas,
        h2_replicas: 5 * cfg.replicas,
        seed: cfg.seed,
    };
    let audit = criteria::audit(opts, par)?;
    let reports = audit.reports();
    let lines: Vec<String> = reports.iter().map(serde_json::to_string).collect::<std::result::Result<_, _>>()?;
    out.json_lines("criteria.jsonl", &lines)?;
    let mut printed: Vec<String> = reports.iter().map(|r| format!("{:<7} {}", r.criterion, if r.pass { "PASS" } else { "FAIL" })).collect();
    let c = audit.config;
    printed.push(format!("psi = {}, q = {}, K = {}, rho = {:.4}, M = {:.3}, epsilon = {:.3e}", c.psi, c.q, c.k, c.rho, c.m, c.epsilon));
    Ok(Outcome { lines: printed, pass: audit.pass })
}

fn verify_all(cfg: &RunConfig, par: &Parallelism) -> Result<Outcome> {
    let summary = verify::verify_suite(&cfg.output_dir, VerifyConfig { seed: cfg.seed }, par, |r| {
        log::info!("{}", r.line());
    })?;
    Ok(Outcome { lines: summary.table().lines().map(String::from).collect(), pass: summary.all_pass() })
}
