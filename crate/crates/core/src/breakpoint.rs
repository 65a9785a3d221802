//! Rightmost paths, break points and the estimators built around them.
//!
//! The exact tools work on a sampled [`EventLog`]. The Monte Carlo estimators
//! use the lazy engine, except `estimate_p_beta`, which thins one log per
//! replica so that different λ share the same randomness.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::edge::EdgeConfiguration;
use crate::error::{Error, Result};
use crate::graphical::{
    self, ceil_beta_t, evolve, evolve_with_segments, reach_backward, Configuration, EventLog, Mark, MarkKind,
    ReachTrace, SiteWindow, SourceSegment, SpaceTimePoint,
};
use crate::lattice::{Contact, DenseSites, Fire, Flip, SiteSet, SparseSites};
use crate::parallel::Parallelism;
use crate::rng::{self, SimRng};
use crate::splitting::{self, SplitConfig, Walker};
use crate::stats::{self, Estimate};

/// Γ(s) = max{y : (X,0) ⇝ (y,s) ⇝ L_t}, piecewise constant and
/// right-continuous: `sites[i]` holds on `[times[i], times[i+1])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RightmostPath {
    pub source: SpaceTimePoint,
    pub t: f64,
    times: Vec<f64>,
    sites: Vec<i64>,
    /// The forward set from the source touched a window boundary.
    pub censored: bool,
}

impl RightmostPath {
    pub fn at(&self, s: f64) -> i64 {
        let k = self.times.partition_point(|&u| u <= s);
        self.sites[k.saturating_sub(1)]
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times[1..]
    }

    /// (time, site) at the start and after every jump.
    pub fn samples(&self) -> impl Iterator<Item = (f64, i64)> + '_ {
        self.times.iter().copied().zip(self.sites.iter().copied())
    }

    pub fn jumps(&self) -> usize {
        self.times.len() - 1
    }

    /// Checks that every change is a unit step along an arrow of `log`.
    pub fn validate(&self, log: &EventLog) -> Result<()> {
        for k in 1..self.times.len() {
            let (u, a, b) = (self.times[k], self.sites[k - 1], self.sites[k]);
            let marks = log.marks();
            let i = marks.partition_point(|m| m.time < u);
            let ok = (a - b).abs() == 1
                && marks[i..]
                    .iter()
                    .take_while(|m| m.time == u)
                    .any(|m| m.kind == MarkKind::Arrow { from: a, to: b });
            if !ok {
                return Err(Error::Precondition(format!("rightmost path step {a} -> {b} at {u} is not an arrow")));
            }
        }
        Ok(())
    }
}

/// X = max{x ∈ A : (x,0) ⇝ L_t}.
pub fn rightmost_surviving_source(a: &Configuration, log: &EventLog, t: f64) -> Result<Option<i64>> {
    let back = reach_backward(log, t)?;
    Ok(a.sites().iter().rev().copied().find(|&x| back.contains(x, 0.0)))
}

pub fn rightmost_path(x: i64, log: &EventLog, t: f64) -> Result<RightmostPath> {
    let w = *log.window();
    let back = reach_backward(log, t)?;
    if !back.contains(x, 0.0) {
        return Err(Error::Precondition(format!("(x = {x}, 0) does not reach L_t")));
    }
    let mut fwd = vec![false; w.width()];
    fwd[w.index(x)] = true;
    let mut censored = w.is_boundary(x);
    let mut gamma = x;
    let mut times = vec![0.0];
    let mut sites = vec![x];
    for m in log.between(0.0, t) {
        let u = m.time;
        let touched: [Option<i64>; 2] = match m.kind {
            MarkKind::Recovery { site } => {
                fwd[w.index(site)] = false;
                [Some(site), None]
            }
            MarkKind::Arrow { from, to } => {
                if fwd[w.index(from)] && !fwd[w.index(to)] {
                    fwd[w.index(to)] = true;
                    censored |= w.is_boundary(to);
                }
                [Some(from), Some(to)]
            }
        };
        let member = |y: i64| fwd[w.index(y)] && back.contains(y, u);
        if !touched.iter().flatten().any(|&y| y >= gamma) {
            continue;
        }
        let top = touched.iter().flatten().copied().fold(gamma, i64::max);
        let next = (w.lo..=top)
            .rev()
            .find(|&y| member(y))
            .ok_or_else(|| Error::Precondition("rightmost path lost its support".into()))?;
        if next != gamma {
            gamma = next;
            times.push(u);
            sites.push(gamma);
        }
    }
    Ok(RightmostPath { source: SpaceTimePoint::new(x, 0.0), t, times, sites, censored })
}

/// Outcome of scanning Γ for its first break point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BreakSearch {
    /// (R, Y) if some break point lies on Γ.
    pub found: Option<(f64, i64)>,
    /// Γ(s) + 2⌈βt⌉ passed the right edge of the window before R.
    pub censored: bool,
}

fn l0_count(dense: &[bool], w: &SiteWindow, lo: i64, hi: i64) -> usize {
    let (a, b) = (lo.max(w.lo), hi.min(w.hi));
    if a > b {
        return 0;
    }
    dense[w.index(a)..=w.index(b)].iter().filter(|&&v| v).count()
}

/// R = first event time s with L₀ ̸⇝ (w, s) for every w ∈ (Γ(s), Γ(s)+2⌈βt⌉];
/// L₀ is the fully occupied window at time 0.
pub fn first_break_point(gamma: &RightmostPath, log: &EventLog, beta: f64, t: f64) -> Result<BreakSearch> {
    let w = *log.window();
    let k = 2 * ceil_beta_t(beta, t) as i64;
    let mut l0 = vec![true; w.width()];
    let mut g = gamma.at(0.0);
    let mut count = l0_count(&l0, &w, g + 1, g + k);
    let mut censored = g + k > w.hi;
    if count == 0 {
        return Ok(BreakSearch { found: Some((0.0, g)), censored });
    }
    let changes: Vec<(f64, i64)> = gamma.samples().skip(1).collect();
    let mut next = 0;
    for m in log.between(0.0, t) {
        let changed = match m.kind {
            MarkKind::Recovery { site } => std::mem::replace(&mut l0[w.index(site)], false).then_some((site, false)),
            MarkKind::Arrow { from, to } => {
                (l0[w.index(from)] && !std::mem::replace(&mut l0[w.index(to)], true)).then_some((to, true))
            }
        };
        if let Some((y, added)) = changed {
            if y > g && y <= g + k {
                if added {
                    count += 1;
                } else {
                    count -= 1;
                }
            }
        }
        if next < changes.len() && changes[next].0 <= m.time {
            while next < changes.len() && changes[next].0 <= m.time {
                g = changes[next].1;
                next += 1;
            }
            count = l0_count(&l0, &w, g + 1, g + k);
            censored |= g + k > w.hi;
        }
        if count == 0 {
            return Ok(BreakSearch { found: Some((m.time, g)), censored });
        }
    }
    Ok(BreakSearch { found: None, censored })
}

/// The break predicate at (y, s), recomputed from the raw log.
pub fn is_break_point(y: i64, s: f64, log: &EventLog, beta: f64, t: f64) -> Result<bool> {
    let w = log.window();
    let k = 2 * ceil_beta_t(beta, t) as i64;
    let l0 = evolve(&Configuration::interval(w.lo, w.hi), log, 0.0, s)?;
    let hit = l0.configuration.iter().any(|x| x > y && x <= y + k);
    Ok(!hit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakPointReport {
    pub x: Option<i64>,
    pub break_time: Option<f64>,
    pub y: Option<i64>,
    /// 𝒜 = {x ≤ 0 : A × {0} ⇝ (Y + x, R)}.
    pub a_script: Option<EdgeConfiguration>,
    pub censored: bool,
    pub beta: f64,
    pub t: f64,
    /// Width of the break window, 2⌈βt⌉.
    pub break_width: u64,
    pub jumps: Option<usize>,
}

impl BreakPointReport {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn break_point_report(a: &Configuration, log: &EventLog, beta: f64, t: f64) -> Result<BreakPointReport> {
    let mut report = BreakPointReport {
        x: None,
        break_time: None,
        y: None,
        a_script: None,
        censored: false,
        beta,
        t,
        break_width: 2 * ceil_beta_t(beta, t),
        jumps: None,
    };
    let Some(x) = rightmost_surviving_source(a, log, t)? else {
        return Ok(report);
    };
    let gamma = rightmost_path(x, log, t)?;
    let search = first_break_point(&gamma, log, beta, t)?;
    report.x = Some(x);
    report.jumps = Some(gamma.jumps());
    report.censored = gamma.censored || search.censored;
    if let Some((r, y)) = search.found {
        let eta = evolve(a, log, 0.0, r)?;
        let offsets: Configuration = eta.configuration.iter().filter(|&z| z <= y).map(|z| z - y).collect();
        report.break_time = Some(r);
        report.y = Some(y);
        report.a_script = Some(EdgeConfiguration::new(offsets)?);
    }
    Ok(report)
}

/// Space-time diagram rows `kind,site,time`: every change of a forward
/// trace (`infect` / `recover`), the samples of Γ (`gamma`) and the break
/// point (`break`).
pub fn space_time_csv(trace: &ReachTrace, gamma: Option<&RightmostPath>, brk: Option<(f64, i64)>) -> String {
    let mut out = String::from("kind,site,time\n");
    for c in trace.changes() {
        let kind = if c.added { "infect" } else { "recover" };
        out.push_str(&format!("{kind},{},{:.16e}\n", c.site, c.time));
    }
    if let Some(g) = gamma {
        for (u, y) in g.samples() {
            out.push_str(&format!("gamma,{y},{u:.16e}\n"));
        }
        out.push_str(&format!("gamma,{},{:.16e}\n", g.at(g.t), g.t));
    }
    if let Some((r, y)) = brk {
        out.push_str(&format!("break,{y},{r:.16e}\n"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub from: f64,
    pub to: f64,
    pub favorable: bool,
}

/// The top-down split of [0, t/2) into favorable intervals of length √t and
/// skipped stretches, every interval reported.
pub fn interval_decomposition(jump_times: &[f64], beta: f64, t: f64) -> Result<Vec<Interval>> {
    if !(beta > 0.0) || !(t >= 0.0) {
        return Err(Error::param("beta", "beta must be positive and t nonnegative"));
    }
    if jump_times.windows(2).any(|p| p[0] > p[1]) || jump_times.iter().any(|&u| !(0.0..=t).contains(&u)) {
        return Err(Error::param("jump_times", "must be sorted and lie in [0, t]"));
    }
    let root = t.sqrt();
    let mut out = Vec::new();
    let mut ti = t / 2.0;
    while ti >= root * (1.0 - 1e-12) && ti > 0.0 {
        // Jumps in [ti - u, ti), scanned from the latest one backwards.
        let end = jump_times.partition_point(|&u| u < ti);
        let mut v = f64::INFINITY;
        let mut j = end;
        while j > 0 {
            j -= 1;
            if j > 0 && jump_times[j - 1] == jump_times[j] {
                continue;
            }
            let u = ti - jump_times[j];
            if u > root {
                break;
            }
            if (end - j) as f64 > 4.0 * beta * u {
                v = u;
                break;
            }
        }
        if v > root {
            out.push(Interval { from: ti - root, to: ti, favorable: true });
            ti -= root;
        } else {
            out.push(Interval { from: ti - v, to: ti, favorable: false });
            ti -= v;
        }
    }
    Ok(out)
}

/// Disjoint favorable intervals in [0, t/2].
pub fn favorable_intervals(jump_times: &[f64], beta: f64, t: f64) -> Result<Vec<(f64, f64)>> {
    Ok(interval_decomposition(jump_times, beta, t)?
        .into_iter()
        .filter(|i| i.favorable)
        .map(|i| (i.from, i.to))
        .collect())
}

/// Geometry of the crossing event D_t ⇝ C_t, in shifted time T ∈ [0, √t]
/// (T = √t is the original time 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub window: SiteWindow,
    /// Sites x ≥ `half_line` are sources at T = 0.
    pub half_line: i64,
    pub staircase: Vec<SourceSegment>,
    /// C_t = {1, …, target} at T = √t.
    pub target: i64,
}

impl Crossing {
    pub fn new(beta: f64, t: f64) -> Result<Self> {
        if !(beta > 0.0) || !(t > 0.0) {
            return Err(Error::param("t", "beta and t must be positive"));
        }
        let root = t.sqrt();
        let k = ceil_beta_t(beta, t) as i64;
        let reach = 4.0 * beta * root;
        let last = (reach + 1e-9).floor() as i64;
        let half_line = (reach - 1e-9).ceil() as i64;
        let staircase = (0..=last)
            .map(|x| SourceSegment {
                site: x,
                from: (root - (x + 1) as f64 / (4.0 * beta)).max(0.0),
                to: (root - x as f64 / (4.0 * beta)).max(0.0),
            })
            .collect();
        let window = SiteWindow::new(-2 * k, half_line.max(2 * k) + 2 * k, root)?;
        Ok(Crossing { window, half_line, staircase, target: 2 * k })
    }

    pub fn crosses(&self, log: &EventLog) -> Result<bool> {
        let start = Configuration::interval(self.half_line, self.window.hi);
        let end = evolve_with_segments(&start, &self.staircase, log, 0.0, self.window.horizon)?;
        let hit = end.configuration.iter().any(|x| (1..=self.target).contains(&x));
        Ok(hit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PBetaEstimate {
    pub lambda: f64,
    pub estimate: Estimate,
    pub upper95: f64,
    pub successes: u64,
    pub replicas: u64,
}

/// Monte Carlo estimate of P(D_t ⇝ C_t).
pub fn estimate_p_beta(beta: f64, t: f64, lambda: f64, replicas: u64, seed: u64, par: &Parallelism) -> Result<PBetaEstimate> {
    Ok(estimate_p_beta_coupled(beta, t, &[lambda], replicas, seed, par)?.remove(0))
}

/// P(D_t ⇝ C_t) at several λ on coupled logs: each replica samples one log at
/// the largest λ and thins its arrows with shared uniforms, so the crossing
/// indicator is monotone in λ replica by replica.
pub fn estimate_p_beta_coupled(
    beta: f64,
    t: f64,
    lambdas: &[f64],
    replicas: u64,
    seed: u64,
    par: &Parallelism,
) -> Result<Vec<PBetaEstimate>> {
    let top = lambdas.iter().copied().fold(0.0, f64::max);
    if lambdas.is_empty() || !(top > 0.0) || lambdas.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::param("lambda", "need at least one positive λ and none negative"));
    }
    if replicas == 0 {
        return Err(Error::param("replicas", "must be positive"));
    }
    let geo = Crossing::new(beta, t)?;
    let job = rng::job_id("p-beta");
    let hits: Vec<Result<Vec<bool>>> = par.map(replicas as usize, |i| {
        let log = graphical::sample_event_log(geo.window, top, rng::derive_seed(seed, job), i as u64)?;
        lambdas
            .iter()
            .map(|&l| geo.crosses(&graphical::thin_arrows(&log, l / top, rng::derive_seed(seed, i as u64))?))
            .collect()
    });
    let hits: Vec<Vec<bool>> = hits.into_iter().collect::<Result<_>>()?;
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let successes = hits.iter().filter(|h| h[j]).count() as u64;
            PBetaEstimate {
                lambda,
                estimate: stats::proportion(successes, replicas),
                upper95: stats::wilson_upper(successes, replicas, stats::Z95),
                successes,
                replicas,
            }
        })
        .collect())
}

/// Whether L₀ ⇝ (0, s) for some event time s ∈ [t, horizon] on a log.
pub fn tail_event_on_log(log: &EventLog, t: f64, horizon: f64) -> Result<bool> {
    let w = *log.window();
    if !w.contains(0) {
        return Err(Error::Precondition("site 0 outside window".into()));
    }
    let mut dense = vec![true; w.width()];
    let o = w.index(0);
    let mut checked_t = false;
    for m in log.between(0.0, horizon) {
        if !checked_t && m.time > t {
            if dense[o] {
                return Ok(true);
            }
            checked_t = true;
        }
        match m.kind {
            MarkKind::Recovery { site } => dense[w.index(site)] = false,
            MarkKind::Arrow { from, to } => {
                if dense[w.index(from)] {
                    dense[w.index(to)] = true
                }
            }
        }
        if m.time > t && dense[o] {
            return Ok(true);
        }
    }
    Ok(dense[o])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub t: f64,
    pub estimate: Estimate,
    pub upper95: f64,
    /// Replicas still alive but away from 0 at the horizon 2t.
    pub censored_fraction: f64,
}

/// P(L₀ ⇝ (0, s) for some s ≥ t), from the fully occupied window
/// [−2⌈βt⌉, 2⌈βt⌉] observed up to 2t.
pub fn tail_survival_estimate(
    lambda: f64,
    beta: f64,
    t: f64,
    replicas: u64,
    seed: u64,
    par: &Parallelism,
) -> Result<TailEstimate> {
    if !(lambda > 0.0) || !(t >= 0.0) || replicas == 0 {
        return Err(Error::param("lambda", "need λ > 0, t ≥ 0 and replicas > 0"));
    }
    let k = 2 * ceil_beta_t(beta, t.max(1.0)) as i64;
    let window = SiteWindow::new(-k, k, (2.0 * t).max(1.0))?;
    let full = Configuration::interval(-k, k);
    let contact = Contact::new(lambda);
    let job = rng::job_id("tail-survival");
    // 0 = miss, 1 = hit, 2 = censored.
    let outcomes: Vec<u8> = par.map(replicas as usize, |i| {
        let mut r = rng::stream_rng(seed, job, i as u64);
        let mut sites = DenseSites::new(&window, &full);
        if contact.advance(&mut sites, 0.0, t, &mut r).is_some() {
            return 0;
        }
        if sites.contains(0) {
            return 1;
        }
        match contact.advance_observed(&mut sites, t, 2.0 * t, &mut r, |s, _| s.contains(0)) {
            crate::lattice::Advance::Stopped(_) => 1,
            crate::lattice::Advance::Extinct(_) => 0,
            crate::lattice::Advance::Reached => 2,
        }
    });
    let hits = outcomes.iter().filter(|&&o| o == 1).count() as u64;
    let cens = outcomes.iter().filter(|&&o| o == 2).count() as f64;
    Ok(TailEstimate {
        t,
        estimate: stats::proportion(hits, replicas),
        upper95: stats::wilson_upper(hits, replicas, stats::Z95),
        censored_fraction: cens / replicas as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NotGoodEstimate {
    pub t: f64,
    pub threshold: u64,
    /// ln P(origin not good), with a delta-method standard error.
    pub log_p: Estimate,
    pub hits: u64,
    pub replicas: u64,
}

/// ln P(some λ-path from (0,0) makes ≥ ⌈βt⌉ jumps in [0, t]) by importance
/// sampling. Under the proposal the arrows leaving the current site of a
/// spine particle have rate λθ with θ = β/(2λ), and the spine follows every
/// one of them, so it is a random walk with jump rate β. The spine is
/// stopped when it has made ⌈βt⌉ jumps. The likelihood ratio is
/// θ^{−K} e^{2λ(θ−1)τ} for K spine jumps up to the stopping time τ.
/// Replicas whose spine falls short are decided by the jump-count dynamic
/// program on the full proposal log.
pub fn not_good_probability(
    lambda: f64,
    beta: f64,
    t: f64,
    replicas: u64,
    seed: u64,
    par: &Parallelism,
) -> Result<NotGoodEstimate> {
    if !(lambda > 0.0) || !(t > 0.0) || replicas < 2 {
        return Err(Error::param("t", "need λ > 0, t > 0 and at least two replicas"));
    }
    let theta = beta / (2.0 * lambda);
    if theta < 1.0 {
        return Err(Error::param("beta", format!("importance sampling needs β ≥ 2λ, got β = {beta}")));
    }
    let n = ceil_beta_t(beta, t);
    let edge = n as i64 + 1;
    let window = SiteWindow::new(-edge, edge, t)?;
    let job = rng::job_id("not-good");
    let logw: Vec<Result<f64>> = par.map(replicas as usize, |i| {
        let mut r = rng::stream_rng(seed, job, i as u64);
        // Spine: (time, from, to) for each jump.
        let mut spine: Vec<(f64, i64, i64)> = Vec::new();
        let (mut now, mut pos) = (0.0, 0i64);
        loop {
            let gap: f64 = r.sample(Exp1);
            let next = now + gap / beta;
            if next > t || spine.len() as u64 >= n {
                break;
            }
            let to = if r.random::<bool>() { pos + 1 } else { pos - 1 };
            spine.push((next, pos, to));
            now = next;
            pos = to;
        }
        let k = spine.len() as f64;
        let stop = if spine.len() as u64 >= n { now } else { t };
        let lw = -k * theta.ln() + 2.0 * lambda * (theta - 1.0) * stop;
        if spine.len() as u64 >= n {
            return Ok(lw);
        }
        // Base arrows everywhere except out of the spine's site while it sits there.
        let mut marks: Vec<Mark> = spine.iter().map(|&(u, a, b)| Mark::arrow(a, b, u)).collect();
        let mut stays: Vec<(i64, f64, f64)> = Vec::with_capacity(spine.len() + 1);
        let mut last = (0.0, 0i64);
        for &(u, a, b) in &spine {
            stays.push((a, last.0, u));
            last = (u, b);
        }
        stays.push((last.1, last.0, t));
        for x in window.sites() {
            for y in [x - 1, x + 1] {
                if !window.contains(y) {
                    continue;
                }
                for m in graphical::poisson_line(&mut r, lambda, t, |u| Mark::arrow(x, y, u)) {
                    if !stays.iter().any(|&(z, a, b)| z == x && a <= m.time && m.time < b) {
                        marks.push(m);
                    }
                }
            }
        }
        let log = EventLog::from_marks(window, marks)?;
        let jc = graphical::max_jump_count(0, 0.0, &log, t)?;
        Ok(if jc.max >= n || jc.censored { lw } else { f64::NEG_INFINITY })
    });
    let logw: Vec<f64> = logw.into_iter().collect::<Result<_>>()?;
    let hits = logw.iter().filter(|w| w.is_finite()).count() as u64;
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_p = if hits == 0 {
        Estimate::new(f64::NEG_INFINITY, f64::INFINITY)
    } else {
        let scaled: Vec<f64> = logw.iter().map(|&w| (w - m).exp()).collect();
        let est = stats::mean_estimate(&scaled);
        Estimate::new(m + est.value.ln(), est.stderr / est.value)
    };
    Ok(NotGoodEstimate { t, threshold: n, log_p, hits, replicas })
}

/// Setup of the break-time estimator. The rightmost surviving source is
/// placed at 0: the walker conditions on (0,0) ⇝ L_t by splitting and on
/// every site of (0, 2⌈βt⌉] dying by time t by rejection at the end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BreakSetup {
    pub lambda: f64,
    pub beta: f64,
    pub t: f64,
    pub window: SiteWindow,
    /// Keep both window boundary columns infected at all times, so that L₀
    /// is over-approximated instead of cut off at the window edges, and
    /// censor runs where that inflow gets near the origin's cluster.
    pub boundary_sources: bool,
}

impl BreakSetup {
    /// Window [−2⌈βt⌉, 4⌈βt⌉] with boundary sources.
    pub fn new(lambda: f64, beta: f64, t: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(beta > 0.0) || !(t > 0.0) {
            return Err(Error::param("t", "λ, β and t must be positive"));
        }
        let k = ceil_beta_t(beta, t) as i64;
        Ok(BreakSetup { lambda, beta, t, window: SiteWindow::new(-2 * k, 4 * k, t)?, boundary_sources: true })
    }

    fn width(&self) -> i64 {
        2 * ceil_beta_t(self.beta, self.t) as i64
    }
}

/// One replica of the break-time estimator.
///
/// `master` is the fully occupied window (plus the boundary inflow) and
/// drives every clock; the other sets are subsets of it. A break point on Γ
/// at time s ≤ t/2 sits at r_s = max η⁰_s whenever (0,0) is good, because
/// then η⁰_s spans fewer than 2⌈βt⌉ sites. So each time the window
/// (r_s, r_s + 2⌈βt⌉] of `master` is empty, (r_s, s) joins the source set
/// of `cand`, and R ≤ t/2 exactly when `cand` survives to t.
#[derive(Debug, Clone)]
pub struct BreakWalker {
    setup: BreakSetup,
    master: DenseSites,
    inflow: Vec<bool>,
    inflow_left: i64,
    inflow_right: i64,
    eta0: SparseSites,
    gap: SparseSites,
    cand: SparseSites,
    right: i64,
    /// Occupied `master` sites in (right, right + width].
    ahead: usize,
    pub censored: bool,
    /// η⁰ spread over ≥ 2⌈βt⌉ sites before t/2, where the reduction above
    /// can miss a break point left of r_s.
    pub wide: bool,
}

impl BreakWalker {
    pub fn new(setup: BreakSetup) -> Result<Self> {
        let w = setup.window;
        let k = setup.width();
        if !(w.lo < 0 && w.hi > k) {
            return Err(Error::param("window", format!("must contain [0, {}] in its interior", k + 1)));
        }
        let mut inflow = vec![false; w.width()];
        if setup.boundary_sources {
            inflow[0] = true;
            inflow[w.width() - 1] = true;
        }
        let mut walker = BreakWalker {
            setup,
            master: DenseSites::new(&w, &Configuration::interval(w.lo, w.hi)),
            inflow,
            inflow_left: w.lo,
            inflow_right: w.hi,
            eta0: SparseSites::new(&Configuration::singleton(0)),
            gap: SparseSites::new(&Configuration::interval(1, k)),
            cand: SparseSites::default(),
            right: 0,
            ahead: 0,
            censored: false,
            wide: false,
        };
        walker.ahead = walker.count_ahead(0);
        Ok(walker)
    }

    fn count_ahead(&self, r: i64) -> usize {
        let w = self.setup.window;
        ((r + 1).max(w.lo)..=(r + self.setup.width()).min(w.hi)).filter(|&x| self.master.contains(x)).count()
    }

    fn move_right(&mut self, r: i64) {
        let k = self.setup.width();
        let old = self.right;
        if (r - old).abs() >= k {
            self.ahead = self.count_ahead(r);
        } else if r > old {
            let lost = (old + 1..=r).filter(|&x| self.master.contains(x)).count();
            let won = (old + k + 1..=r + k).filter(|&x| self.master.contains(x)).count();
            self.ahead = self.ahead + won - lost;
        } else if r < old {
            let won = (r + 1..=old).filter(|&x| self.master.contains(x)).count();
            let lost = (r + k + 1..=old + k).filter(|&x| self.master.contains(x)).count();
            self.ahead = self.ahead + won - lost;
        }
        self.right = r;
    }

    fn in_ahead(&self, x: i64) -> bool {
        x > self.right && x <= self.right + self.setup.width()
    }

    fn apply(&mut self, flip: Flip, now: f64) {
        let w = self.setup.window;
        let early = now <= self.setup.t / 2.0;
        match flip {
            Flip::Recover(x) => {
                if self.setup.boundary_sources && w.is_boundary(x) {
                    return;
                }
                self.master.remove(x);
                self.inflow[w.index(x)] = false;
                self.eta0.remove(x);
                self.gap.remove(x);
                self.cand.remove(x);
                if early && self.in_ahead(x) {
                    self.ahead -= 1;
                }
            }
            Flip::Infect { from, to } => {
                if !w.contains(to) {
                    return;
                }
                if !self.master.contains(to) {
                    self.master.insert(to);
                    if early && self.in_ahead(to) {
                        self.ahead += 1;
                    }
                }
                let (i, j) = (w.index(from), w.index(to));
                if self.inflow[i] && !self.inflow[j] {
                    self.inflow[j] = true;
                    if to < (w.lo + w.hi) / 2 {
                        self.inflow_left = self.inflow_left.max(to);
                    } else {
                        self.inflow_right = self.inflow_right.min(to);
                    }
                }
                for set in [&mut self.eta0, &mut self.gap, &mut self.cand] {
                    if set.contains(from) {
                        set.insert(to);
                    }
                }
            }
        }
        let Some(r) = self.eta0.max() else { return };
        if !early {
            return;
        }
        if r != self.right {
            self.move_right(r);
        }
        let k = self.setup.width();
        let lo = self.eta0.get(0);
        self.wide |= r - lo >= k;
        self.censored |= r + k + 1 > w.hi;
        if self.setup.boundary_sources {
            self.censored |= self.inflow_left >= lo - 1 || self.inflow_right <= r + k + 1;
        }
        if self.ahead == 0 && !self.cand.contains(r) {
            self.cand.insert(r);
        }
    }

    /// A break point before t/2 whose forward path survives to t.
    pub fn has_break(&self) -> bool {
        !self.cand.is_empty()
    }

    /// Every site of (0, 2⌈βt⌉] has died.
    pub fn accepted(&self) -> bool {
        self.gap.is_empty()
    }
}

impl Walker for BreakWalker {
    fn advance(&mut self, from: f64, to: f64, rng: &mut SimRng) -> bool {
        let contact = Contact::new(self.setup.lambda);
        let mut now = from;
        loop {
            match contact.fire(&self.master, now, to, rng) {
                Fire::Extinct | Fire::Beyond => break,
                Fire::Event { time, flip } => {
                    now = time;
                    self.apply(flip, now);
                    if self.eta0.is_empty() {
                        return false;
                    }
                }
            }
        }
        !self.eta0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BreakEstimate {
    pub t: f64,
    pub beta: f64,
    /// P(R ≤ t/2 | X = 0).
    pub probability: Estimate,
    /// P((0,0) ⇝ L_t).
    pub survival: Estimate,
    /// P((0, 2⌈βt⌉] dies by t | (0,0) ⇝ L_t).
    pub acceptance: Estimate,
    pub censored_fraction: f64,
    pub wide_fraction: f64,
    pub ess: f64,
    pub survivors: usize,
}

/// Estimates P(R ≤ t/2) for an infinite initial set, read from the rightmost
/// surviving source.
pub fn break_probability(setup: BreakSetup, population: usize, groups: usize, seed: u64, par: &Parallelism) -> Result<BreakEstimate> {
    let init = BreakWalker::new(setup)?;
    let cfg = SplitConfig { population, groups, dt: 1.0, seed, job: rng::job_id("break-time") };
    let run = splitting::run(&init, &[setup.t], cfg, par)?;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let probability = run.pooled_ratio(|w| flag(w.accepted() && w.has_break()), |w| flag(w.accepted()));
    let acceptance = run.pooled(|w| flag(w.accepted()));
    if !(acceptance.value > 0.0) {
        return Err(Error::Resolution(format!(
            "no replica had (0, {}] die out by t = {}; increase the population",
            setup.width(),
            setup.t
        )));
    }
    let censored_fraction = run.pooled(|w| flag(w.censored)).value;
    let wide_fraction = run.pooled_ratio(|w| flag(w.accepted() && w.wide), |w| flag(w.accepted())).value;
    Ok(BreakEstimate {
        t: setup.t,
        beta: setup.beta,
        probability,
        survival: run.final_survival(),
        acceptance,
        censored_fraction,
        wide_fraction,
        ess: run.kish_ess(),
        survivors: run.survivor_count(),
    })
}

/// The same probability by brute force on event logs: keep the logs whose
/// rightmost surviving source in [lo, 2⌈βt⌉] is 0 and run the exact
/// rightmost-path and break-point search on them.
pub fn break_probability_by_rejection(setup: BreakSetup, replicas: u64, seed: u64, par: &Parallelism) -> Result<(Estimate, u64)> {
    let w = setup.window;
    let a = Configuration::interval(w.lo, setup.width());
    let job = rng::job_id("break-time-rejection");
    let out: Vec<Result<Option<bool>>> = par.map(replicas as usize, |i| {
        let log = graphical::sample_event_log(w, setup.lambda, rng::derive_seed(seed, job), i as u64)?;
        if rightmost_surviving_source(&a, &log, setup.t)? != Some(0) {
            return Ok(None);
        }
        let gamma = rightmost_path(0, &log, setup.t)?;
        let search = first_break_point(&gamma, &log, setup.beta, setup.t)?;
        Ok(Some(search.found.is_some_and(|(r, _)| r <= setup.t / 2.0)))
    });
    let out: Vec<Option<bool>> = out.into_iter().collect::<Result<_>>()?;
    let accepted = out.iter().flatten().count() as u64;
    let hits = out.iter().flatten().filter(|&&b| b).count() as u64;
    if accepted == 0 {
        return Err(Error::Resolution("no log had its rightmost surviving source at 0".into()));
    }
    Ok((stats::proportion(hits, accepted), accepted))
}
