//! Monte Carlo estimation of conditioned laws ℒ(ζ_t | τ > t), the decay
//! rate α, the right eigenfunction h and the h-transformed Q-process.

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::edge::{cylinder_restrict, recenter, tv_distance, CanonicalKey, EdgeConfiguration, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::graphical::Configuration;
use crate::lattice::{Contact, SiteSet, SparseSites};
use crate::parallel::Parallelism;
use crate::rng::{self, SimRng};
use crate::spectral::{SpectralResult, TruncatedGenerator};
use crate::splitting::{self, SplitConfig, SplitRun, Walker};
use crate::stats::{self, Estimate};

/// Which process the estimators simulate.
#[derive(Debug, Clone, Copy)]
pub enum Dynamics<'a> {
    /// The contact process on ℤ, seen from its rightmost particle.
    Lattice { lambda: f64 },
    /// Gillespie simulation of a truncated generator.
    Generator(&'a TruncatedGenerator),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Strategy {
    Rejection,
    /// Multilevel splitting with the given initial checkpoint spacing.
    Splitting { checkpoint_dt: f64 },
}

#[derive(Debug, Clone)]
pub struct LatticeWalker {
    pub sites: SparseSites,
    contact: Contact,
}

impl Walker for LatticeWalker {
    fn advance(&mut self, from: f64, to: f64, rng: &mut SimRng) -> bool {
        self.contact.advance(&mut self.sites, from, to, rng);
        !self.sites.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorWalker<'a> {
    gen: &'a TruncatedGenerator,
    pub state: Option<usize>,
}

/// One Gillespie step from `state`; None on absorption.
fn generator_jump(gen: &TruncatedGenerator, state: usize, rng: &mut SimRng) -> Option<usize> {
    let (cols, rates) = gen.row(state);
    let mut u = rng.random::<f64>() * gen.exit_rate(state);
    for (&j, &r) in cols.iter().zip(rates) {
        if u < r {
            return Some(j as usize);
        }
        u -= r;
    }
    if gen.absorption(state) > 0.0 {
        None
    } else {
        cols.last().map(|&j| j as usize)
    }
}

impl Walker for GeneratorWalker<'_> {
    fn advance(&mut self, from: f64, to: f64, rng: &mut SimRng) -> bool {
        let mut now = from;
        while let Some(s) = self.state {
            let gap: f64 = rng.sample(Exp1);
            now += gap / self.gen.exit_rate(s);
            if now > to {
                break;
            }
            self.state = generator_jump(self.gen, s, rng);
        }
        self.state.is_some()
    }
}

/// A replica of either dynamics.
#[derive(Debug, Clone)]
pub enum AnyWalker<'a> {
    Lattice(LatticeWalker),
    Generator(GeneratorWalker<'a>),
}

impl Walker for AnyWalker<'_> {
    fn advance(&mut self, from: f64, to: f64, rng: &mut SimRng) -> bool {
        match self {
            AnyWalker::Lattice(w) => w.advance(from, to, rng),
            AnyWalker::Generator(w) => w.advance(from, to, rng),
        }
    }
}

impl<'a> AnyWalker<'a> {
    pub fn new(dynamics: Dynamics<'a>, init: &Configuration) -> Result<Self> {
        if init.is_empty() {
            return Err(Error::param("init", "initial configuration must be nonempty"));
        }
        Ok(match dynamics {
            Dynamics::Lattice { lambda } => {
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
                }
                AnyWalker::Lattice(LatticeWalker { sites: SparseSites::new(init), contact: Contact::new(lambda) })
            }
            Dynamics::Generator(gen) => {
                let (edge, _) = recenter(init);
                let (key, clipped) = CanonicalKey::encode(&edge, gen.depth())?;
                if clipped > 0 {
                    return Err(Error::param("init", format!("configuration deeper than L = {}", gen.depth())));
                }
                AnyWalker::Generator(GeneratorWalker { gen, state: Some(gen.state_of(key)?) })
            }
        })
    }

    pub fn edge(&self) -> EdgeConfiguration {
        match self {
            AnyWalker::Lattice(w) => recenter(&w.sites.configuration()).0,
            AnyWalker::Generator(w) => match w.state {
                Some(s) => w.gen.key(s).decode(),
                None => EdgeConfiguration::empty(),
            },
        }
    }

    pub fn size(&self) -> usize {
        match self {
            AnyWalker::Lattice(w) => w.sites.len(),
            AnyWalker::Generator(w) => w.state.map_or(0, |s| w.gen.key(s).count() as usize),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub strategy: Strategy,
    pub stages: usize,
    /// Per group, survivors after every stage.
    pub survivor_counts: Vec<Vec<usize>>,
    pub weight: f64,
    pub weight_stderr: f64,
    pub ess: f64,
    pub survivors: usize,
    pub alpha_hat: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct YaglomEstimate {
    pub distribution: EmpiricalDistribution,
    /// Estimate of P(τ > t).
    pub survival: Estimate,
    pub diagnostics: Diagnostics,
    /// Per group: (weight, conditioned law); pooled law is the weighted mix.
    pub groups: Vec<(f64, EmpiricalDistribution)>,
}

impl YaglomEstimate {
    /// TV to a reference law restricted to depth `m`, with a delete-one-group
    /// jackknife standard error.
    pub fn tv_to(&self, reference: &EmpiricalDistribution, m: u32) -> Result<Estimate> {
        let target = cylinder_restrict(reference, m)?;
        let pooled = cylinder_restrict(&self.distribution, m)?;
        let value = tv_distance(&pooled, &target)?;
        if self.groups.len() < 2 {
            return Ok(Estimate::new(value, f64::INFINITY));
        }
        let mut loo = Vec::with_capacity(self.groups.len());
        for skip in 0..self.groups.len() {
            let mut mix = EmpiricalDistribution::new(m)?;
            for (g, (w, law)) in self.groups.iter().enumerate() {
                if g != skip && law.total() > 0.0 {
                    let r = cylinder_restrict(law, m)?;
                    let scaled = EmpiricalDistribution::from_probabilities(
                        m,
                        r.weights().iter().map(|(k, v)| (*k, v / r.total() * w)),
                    )?;
                    mix.merge(&scaled)?;
                }
            }
            loo.push(tv_distance(&mix, &target)?);
        }
        Ok(Estimate::new(value, stats::jackknife_stderr(&loo)))
    }

    pub fn diagnostics_json(&self) -> String {
        serde_json::to_string_pretty(&self.diagnostics).expect("serializable")
    }
}

/// Parameters shared by the Monte Carlo estimators.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    /// Survivors for rejection; population for splitting.
    pub replicas: usize,
    pub groups: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(replicas: usize, seed: u64) -> Self {
        McConfig { replicas, groups: 10, seed }
    }
}

const MAX_REJECTION_ATTEMPTS: u64 = 2_000_000_000;

pub fn yaglom_estimate(
    init: &Configuration,
    dynamics: Dynamics<'_>,
    t: f64,
    strategy: Strategy,
    depth: u32,
    mc: McConfig,
    par: &Parallelism,
) -> Result<YaglomEstimate> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    let walker = AnyWalker::new(dynamics, init)?;
    EmpiricalDistribution::new(depth)?;
    let job = rng::job_id("yaglom");
    match strategy {
        Strategy::Rejection => rejection(&walker, t, depth, mc, job, par),
        Strategy::Splitting { checkpoint_dt } => {
            let cfg = SplitConfig { population: mc.replicas, groups: mc.groups, dt: checkpoint_dt, seed: mc.seed, job };
            let run = splitting::run(&walker, &[t], cfg, par)?;
            from_split(&run, depth, strategy, t)
        }
    }
}

fn from_split(run: &SplitRun<AnyWalker<'_>>, depth: u32, strategy: Strategy, t: f64) -> Result<YaglomEstimate> {
    let mut groups = Vec::with_capacity(run.groups.len());
    let mut pooled = EmpiricalDistribution::new(depth)?;
    for g in &run.groups {
        let mut law = EmpiricalDistribution::new(depth)?;
        let w = g.final_weight / g.survivors.len().max(1) as f64;
        for s in &g.survivors {
            law.record_edge(&s.edge(), 1.0);
            pooled.record_edge(&s.edge(), w);
        }
        groups.push((g.final_weight, law));
    }
    let survival = run.final_survival();
    let (alpha_hat, stderr) = rough_alpha(survival, t);
    let diagnostics = Diagnostics {
        strategy,
        stages: run.groups.iter().map(|g| g.stage_times.len()).max().unwrap_or(0),
        survivor_counts: run.groups.iter().map(|g| g.survivor_counts.clone()).collect(),
        weight: survival.value,
        weight_stderr: survival.stderr,
        ess: run.kish_ess(),
        survivors: run.survivor_count(),
        alpha_hat,
        stderr,
    };
    Ok(YaglomEstimate { distribution: pooled, survival, diagnostics, groups })
}

/// −log P̂(τ > t)/t with a delta-method error; a rough single-time rate.
fn rough_alpha(survival: Estimate, t: f64) -> (f64, f64) {
    if t > 0.0 && survival.value > 0.0 {
        (-survival.value.ln() / t, survival.stderr / survival.value / t)
    } else {
        (f64::NAN, f64::NAN)
    }
}

fn rejection(
    walker: &AnyWalker<'_>,
    t: f64,
    depth: u32,
    mc: McConfig,
    job: u64,
    par: &Parallelism,
) -> Result<YaglomEstimate> {
    let target = mc.replicas;
    let batch = (4 * target).clamp(1024, 1 << 20);
    let mut survivors: Vec<EdgeConfiguration> = Vec::with_capacity(target);
    let mut attempts: u64 = 0;
    while survivors.len() < target {
        if attempts >= MAX_REJECTION_ATTEMPTS {
            return Err(Error::Resolution(format!(
                "rejection reached {attempts} attempts with {} survivors", survivors.len()
            )));
        }
        let base = attempts;
        let outcome = par.map(batch, |i| {
            let mut w = walker.clone();
            let mut r = rng::stream_rng(mc.seed, job, base + i as u64);
            w.advance(0.0, t, &mut r).then(|| w.edge())
        });
        for o in outcome {
            attempts += 1;
            if let Some(e) = o {
                survivors.push(e);
                if survivors.len() == target {
                    break;
                }
            }
        }
    }
    let groups_n = mc.groups.max(1).min(target.max(1));
    let mut groups: Vec<(f64, EmpiricalDistribution)> = Vec::with_capacity(groups_n);
    let mut pooled = EmpiricalDistribution::new(depth)?;
    for g in 0..groups_n {
        let mut law = EmpiricalDistribution::new(depth)?;
        for e in survivors.iter().skip(g).step_by(groups_n) {
            law.record_edge(e, 1.0);
            pooled.record_edge(e, 1.0);
        }
        groups.push((law.total(), law));
    }
    let survival = stats::proportion(target as u64, attempts);
    let (alpha_hat, stderr) = rough_alpha(survival, t);
    let diagnostics = Diagnostics {
        strategy: Strategy::Rejection,
        stages: 1,
        survivor_counts: vec![vec![target]],
        weight: survival.value,
        weight_stderr: survival.stderr,
        ess: target as f64,
        survivors: target,
        alpha_hat,
        stderr,
    };
    Ok(YaglomEstimate { distribution: pooled, survival, diagnostics, groups })
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaFit {
    pub alpha_hat: f64,
    pub stderr: f64,
    pub times: Vec<f64>,
    pub survival: Vec<Estimate>,
}

fn fit_slope(times: &[f64], survival: &[f64], stderr: &[f64]) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for ((&t, &p), &se) in times.iter().zip(survival).zip(stderr) {
        if p > 0.0 {
            xs.push(t);
            ys.push(-p.ln());
            let rel = (se / p).max(1e-12);
            ws.push(1.0 / (rel * rel));
        }
    }
    if xs.len() < 2 {
        return None;
    }
    stats::weighted_line(&xs, &ys, &ws).map(|(_, b, _)| b)
}

/// α̂ as the weighted least-squares slope of −log P̂(τ > t) over `t_grid`,
/// all grid times taken from one splitting run; jackknife over groups.
pub fn alpha_estimate(
    init: &Configuration,
    dynamics: Dynamics<'_>,
    t_grid: &[f64],
    checkpoint_dt: f64,
    mc: McConfig,
    par: &Parallelism,
) -> Result<AlphaFit> {
    if t_grid.len() < 3 || t_grid.windows(2).any(|w| w[0] >= w[1]) || t_grid[0] <= 0.0 {
        return Err(Error::param("t_grid", "need at least 3 increasing positive times"));
    }
    let walker = AnyWalker::new(dynamics, init)?;
    let cfg = SplitConfig {
        population: mc.replicas,
        groups: mc.groups,
        dt: checkpoint_dt,
        seed: mc.seed,
        job: rng::job_id("alpha"),
    };
    let run = splitting::run(&walker, t_grid, cfg, par)?;
    let survival: Vec<Estimate> = (0..t_grid.len()).map(|k| run.survival(k)).collect();
    let values: Vec<f64> = survival.iter().map(|e| e.value).collect();
    let errs: Vec<f64> = survival.iter().map(|e| e.stderr).collect();
    let alpha_hat = fit_slope(t_grid, &values, &errs)
        .ok_or_else(|| Error::Resolution("fewer than 2 usable survival points".into()))?;
    let g = run.groups.len();
    let mut loo = Vec::with_capacity(g);
    for skip in 0..g {
        let vals: Vec<f64> = (0..t_grid.len())
            .map(|k| {
                run.groups.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, gr)| gr.weights_at[k]).sum::<f64>()
                    / (g - 1) as f64
            })
            .collect();
        if let Some(s) = fit_slope(t_grid, &vals, &errs) {
            loo.push(s);
        }
    }
    let stderr = if loo.len() > 1 { stats::jackknife_stderr(&loo) } else { f64::INFINITY };
    Ok(AlphaFit { alpha_hat, stderr, times: t_grid.to_vec(), survival })
}

/// ĥ(A) = e^{αt}·P̂(τ^A > t) for each start, by splitting.
pub fn h_estimate(
    states: &[Configuration],
    dynamics: Dynamics<'_>,
    alpha: f64,
    t: f64,
    checkpoint_dt: f64,
    mc: McConfig,
    par: &Parallelism,
) -> Result<Vec<Estimate>> {
    states
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if t == 0.0 {
                return Ok(Estimate::new(1.0, 0.0));
            }
            let walker = AnyWalker::new(dynamics, a)?;
            let cfg = SplitConfig {
                population: mc.replicas,
                groups: mc.groups,
                dt: checkpoint_dt,
                seed: mc.seed,
                job: rng::derive_seed(rng::job_id("h"), i as u64),
            };
            let s = splitting::run(&walker, &[t], cfg, par)?.final_survival();
            let f = (alpha * t).exp();
            Ok(Estimate::new(f * s.value, f * s.stderr))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct QProcessRun {
    /// Occupation measure (Rao-Blackwellized holding times).
    pub occupation: EmpiricalDistribution,
    pub jumps: u64,
}

/// Transformed off-diagonal rates q(x, y) = Q(x, y)h(y)/h(x) in CSR order.
pub fn h_transform(spectral: &SpectralResult, gen: &TruncatedGenerator) -> Result<(Vec<Vec<(usize, f64)>>, Vec<f64>)> {
    let n = gen.state_count();
    if spectral.h.len() != n || spectral.depth != gen.depth() {
        return Err(Error::param("spectral", "eigenpair does not match the generator"));
    }
    let mut rows = Vec::with_capacity(n);
    let mut totals = Vec::with_capacity(n);
    for x in 0..n {
        let (cols, rates) = gen.row(x);
        let hx = spectral.h[x];
        let mut row = Vec::with_capacity(cols.len());
        let mut total = 0.0;
        for (&y, &r) in cols.iter().zip(rates) {
            let q = r * spectral.h[y as usize] / hx;
            if !(q >= 0.0) {
                return Err(Error::NegativeRate { from: gen.key(x).key, to: gen.key(y as usize).key, rate: q });
            }
            total += q;
            row.push((y as usize, q));
        }
        rows.push(row);
        totals.push(total);
    }
    Ok((rows, totals))
}

/// Long run of the honest h-transformed chain; occupation of state x
/// accrues the expected holding time 1/q(x) on every visit.
pub fn q_process_simulate(
    spectral: &SpectralResult,
    gen: &TruncatedGenerator,
    n_steps: u64,
    seed: u64,
) -> Result<QProcessRun> {
    if spectral.residuals.left.max(spectral.residuals.right) > 1e-8 {
        return Err(Error::Precondition(format!(
            "spectral residuals {:?} exceed 1e-8", spectral.residuals
        )));
    }
    let (rows, totals) = h_transform(spectral, gen)?;
    let mut occ = vec![0.0; gen.state_count()];
    let mut rng = rng::stream_rng(seed, rng::job_id("q-process"), 0);
    let mut x = 0usize;
    for _ in 0..n_steps {
        occ[x] += 1.0 / totals[x];
        let mut u = rng.random::<f64>() * totals[x];
        let mut next = rows[x].last().map(|p| p.0).expect("Q-process rows are nonempty");
        for &(y, q) in &rows[x] {
            if u < q {
                next = y;
                break;
            }
            u -= q;
        }
        x = next;
    }
    let occupation = EmpiricalDistribution::from_probabilities(
        gen.depth(),
        occ.iter().enumerate().map(|(i, &w)| (gen.key(i).key, w)),
    )?;
    Ok(QProcessRun { occupation, jumps: n_steps })
}
