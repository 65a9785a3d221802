//! Statistical audits of the R-positivity criteria for the discrete-time
//! chain ξ_n = ζ_{nψ}: the choice of ψ, the moment order q, the size cutoff
//! K of Λ′ = {A : |A| ≤ K}, and the three conditions (H1), (H2), (H3), each
//! with a confidence band.

use rand::seq::index::sample;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::graphical::Configuration;
use crate::lattice::{Contact, Fire, Flip, SiteSet, SparseSites};
use crate::parallel::Parallelism;
use crate::rng::{self, SimRng};
use crate::stats::{self, Estimate, Z95_ONE_SIDED};

/// Replicas are split into this many contiguous groups for jackknife errors.
pub const JACKKNIFE_GROUPS: usize = 10;
/// Distance between the points of a spaced start.
pub const SPACING: i64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriteriaConfig {
    pub psi: f64,
    /// Λ′ = {A : |A| ≤ k}.
    pub k: usize,
    pub q: u32,
    pub rho: f64,
    /// Constant of (H1) and (H2).
    pub m: f64,
    /// Lower bound of (H3).
    pub epsilon: f64,
    /// R = e^{αψ}.
    pub decay_r: f64,
}

impl CriteriaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.psi > 0.0) {
            return Err(Error::param("psi", format!("must be positive, got {}", self.psi)));
        }
        if self.k == 0 || self.q == 0 {
            return Err(Error::param("k", "K and q must be at least 1"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::param("rho", format!("must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.decay_r >= 1.0) {
            return Err(Error::param("decay_r", format!("must be at least 1, got {}", self.decay_r)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StartClass {
    Singleton,
    /// [−(n−1), 0].
    Block,
    /// {0, −SPACING, …}.
    Spaced,
    /// n distinct sites drawn uniformly from [−(2n−1), 0].
    Random,
}

impl StartClass {
    pub fn start(self, size: usize, seed: u64) -> Configuration {
        let n = size as i64;
        match self {
            StartClass::Singleton => Configuration::singleton(0),
            StartClass::Block => Configuration::interval(-(n - 1), 0),
            StartClass::Spaced => (0..n).map(|i| -SPACING * i).collect(),
            StartClass::Random => {
                let mut r = rng::stream_rng(seed, rng::job_id("random-start"), size as u64);
                sample(&mut r, 2 * size, size).into_iter().map(|i| -(i as i64)).collect()
            }
        }
    }
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < JACKKNIFE_GROUPS {
        return Err(Error::param("replicas", format!("need at least {JACKKNIFE_GROUPS}, got {replicas}")));
    }
    Ok(())
}

/// |η^A_{nψ}| for n = 1..=steps, one row per replica.
fn size_paths(
    a: &Configuration,
    lambda: f64,
    psi: f64,
    steps: usize,
    replicas: usize,
    seed: u64,
    job: u64,
    par: &Parallelism,
) -> Vec<Vec<u32>> {
    let contact = Contact::new(lambda);
    par.map(replicas, |i| {
        let mut r = rng::stream_rng(seed, job, i as u64);
        let mut sites = SparseSites::new(a);
        let mut out = Vec::with_capacity(steps);
        for n in 0..steps {
            if !sites.is_empty() {
                contact.advance(&mut sites, n as f64 * psi, (n + 1) as f64 * psi, &mut r);
            }
            out.push(sites.len() as u32);
        }
        out
    })
}

fn size_job(label: &str, psi: f64, class: StartClass, size: usize) -> u64 {
    let base = rng::derive_seed(rng::job_id(label), psi.to_bits());
    rng::derive_seed(rng::derive_seed(base, class as u64), size as u64)
}

/// Mean of per-replica values with a delete-one-group jackknife error.
pub fn grouped_mean(values: &[f64]) -> Estimate {
    let n = values.len();
    let g = JACKKNIFE_GROUPS.min(n);
    let total: f64 = values.iter().sum();
    let mean = total / n as f64;
    if g < 2 {
        return Estimate::new(mean, f64::INFINITY);
    }
    let loo: Vec<f64> = (0..g)
        .map(|j| {
            let (a, b) = (j * n / g, (j + 1) * n / g);
            let part: f64 = values[a..b].iter().sum();
            (total - part) / (n - (b - a)) as f64
        })
        .collect();
    Estimate::new(mean, stats::jackknife_stderr(&loo))
}

/// Σ num / Σ den over replicas with a delete-one-group jackknife error.
fn grouped_ratio(num: &[f64], den: &[f64]) -> Estimate {
    let n = num.len();
    let g = JACKKNIFE_GROUPS.min(n);
    let (a, b): (f64, f64) = (num.iter().sum(), den.iter().sum());
    let loo: Vec<f64> = (0..g)
        .map(|j| {
            let (lo, hi) = (j * n / g, (j + 1) * n / g);
            let pa: f64 = num[lo..hi].iter().sum();
            let pb: f64 = den[lo..hi].iter().sum();
            (a - pa) / (b - pb)
        })
        .collect();
    Estimate::new(a / b, stats::jackknife_stderr(&loo))
}

/// 𝔼|η⁰_ψ|^q by plain Monte Carlo.
pub fn moment_estimate(lambda: f64, q: f64, psi: f64, replicas: usize, seed: u64, par: &Parallelism) -> Result<Estimate> {
    if !(q >= 0.0) || !(psi > 0.0) || !(lambda > 0.0) {
        return Err(Error::param("q", "need q ≥ 0, ψ > 0 and λ > 0"));
    }
    check_replicas(replicas)?;
    if q == 0.0 {
        return Ok(Estimate::new(1.0, 0.0));
    }
    let job = size_job("size-moment", psi, StartClass::Singleton, 1);
    let paths = size_paths(&Configuration::singleton(0), lambda, psi, 1, replicas, seed, job, par);
    let values: Vec<f64> = paths.iter().map(|p| (p[0] as f64).powf(q)).collect();
    Ok(grouped_mean(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiRow {
    pub psi: f64,
    pub mean: Estimate,
    pub upper95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiChoice {
    pub psi: f64,
    pub mean: Estimate,
    pub upper95: f64,
    pub grid: Vec<PsiRow>,
}

/// First ψ of the grid 1, 2, 4, …, 64 whose one-sided 95% upper bound on
/// 𝔼|η⁰_ψ| is below 1.
pub fn choose_psi(lambda: f64, replicas: usize, seed: u64, par: &Parallelism) -> Result<PsiChoice> {
    let mut grid: Vec<PsiRow> = Vec::new();
    let mut rising = 0;
    for k in 0..=6 {
        let psi = (1u64 << k) as f64;
        let mean = moment_estimate(lambda, 1.0, psi, replicas, seed, par)?;
        let row = PsiRow { psi, mean, upper95: mean.upper(Z95_ONE_SIDED) };
        if let Some(prev) = grid.last() {
            let grew = row.mean.value - prev.mean.value > 3.0 * (row.mean.stderr.hypot(prev.mean.stderr));
            rising = if grew { rising + 1 } else { 0 };
            if rising >= 2 {
                return Err(Error::Resolution(format!("mean size grows along the ψ grid at λ = {lambda}; supercritical?")));
            }
        }
        grid.push(row);
        if row.upper95 < 1.0 {
            return Ok(PsiChoice { psi, mean, upper95: row.upper95, grid });
        }
    }
    Err(Error::Resolution(format!("no ψ ≤ 64 has 𝔼|η_ψ| < 1 with confidence at λ = {lambda}")))
}

/// Smallest q ≥ 1 with `mean_upper`^q < ρ.
pub fn choose_q(mean_upper: f64, rho: f64, q_max: u32) -> Option<u32> {
    (1..=q_max).find(|&q| mean_upper.powi(q as i32) < rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionRow {
    pub class: StartClass,
    pub size: usize,
    /// 𝔼(|η^A_ψ| / |A|)^q.
    pub estimate: Estimate,
    pub upper95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KChoice {
    pub q: u32,
    pub k: usize,
    /// sup over the tested starts of the moment upper bound.
    pub c: f64,
    pub rows: Vec<ContractionRow>,
}

/// Sizes tried when looking for K.
pub const CONTRACTION_SIZES: [usize; 10] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512];

/// Smallest q ≥ `q_start` for which some size s of the grid has
/// 𝔼(|η^A_ψ|/|A|)^q ≤ ρ (upper bound) for every tested start with |A| ≥ s;
/// then K = s − 1.
pub fn choose_k(
    lambda: f64,
    psi: f64,
    rho: f64,
    q_start: u32,
    q_max: u32,
    replicas: usize,
    seed: u64,
    par: &Parallelism,
) -> Result<KChoice> {
    check_replicas(replicas)?;
    let classes = [StartClass::Block, StartClass::Spaced];
    let mut samples: Vec<(StartClass, usize, Vec<f64>)> = Vec::new();
    for &size in &CONTRACTION_SIZES {
        for &class in &classes {
            let job = size_job("contraction", psi, class, size);
            let paths = size_paths(&class.start(size, seed), lambda, psi, 1, replicas, seed, job, par);
            samples.push((class, size, paths.iter().map(|p| p[0] as f64 / size as f64).collect()));
        }
    }
    for q in q_start.max(1)..=q_max {
        let rows: Vec<ContractionRow> = samples
            .iter()
            .map(|(class, size, xs)| {
                let v: Vec<f64> = xs.iter().map(|x| x.powi(q as i32)).collect();
                let estimate = grouped_mean(&v);
                ContractionRow { class: *class, size: *size, estimate, upper95: estimate.upper(Z95_ONE_SIDED) }
            })
            .collect();
        let first = CONTRACTION_SIZES
            .iter()
            .position(|&s| rows.iter().filter(|r| r.size >= s).all(|r| r.upper95 <= rho));
        if let Some(j) = first {
            let k = CONTRACTION_SIZES[j].saturating_sub(1).max(1);
            let c = rows.iter().map(|r| r.upper95).fold(0.0, f64::max);
            return Ok(KChoice { q, k, c, rows });
        }
    }
    Err(Error::Resolution(format!("no size up to {} contracts below ρ = {rho} for q ≤ {q_max}", CONTRACTION_SIZES[9])))
}

/// One JSON report per criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub params: serde_json::Value,
    pub table: serde_json::Value,
    pub fit: serde_json::Value,
    pub pass: bool,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcursionRow {
    pub class: StartClass,
    pub size: usize,
    pub n: usize,
    pub hits: u64,
    /// P(|ξ_1| > K, …, |ξ_n| > K).
    pub probability: Estimate,
    pub upper95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcursionFit {
    pub class: StartClass,
    pub size: usize,
    /// Fitted per-step decay, if at least two points were resolved.
    pub decay: Option<f64>,
    /// One-sided 95% upper bound on the per-step decay.
    pub decay_upper: f64,
    /// Only bounded by resolution (fewer than two resolved points).
    pub resolution_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H1Report {
    pub rows: Vec<ExcursionRow>,
    pub fits: Vec<ExcursionFit>,
    pub target: f64,
    pub pass: bool,
}

/// Minimum count for a point of the excursion table to enter the fit.
pub const MIN_RESOLVED_HITS: u64 = 5;

fn excursion_fit(class: StartClass, size: usize, rows: &[ExcursionRow], replicas: u64) -> ExcursionFit {
    let resolved: Vec<&ExcursionRow> = rows.iter().filter(|r| r.n >= 1 && r.hits >= MIN_RESOLVED_HITS).collect();
    if resolved.len() >= 2 {
        let xs: Vec<f64> = resolved.iter().map(|r| r.n as f64).collect();
        let ys: Vec<f64> = resolved.iter().map(|r| r.probability.value.ln()).collect();
        let ws: Vec<f64> = resolved.iter().map(|r| r.hits as f64).collect();
        if let Some((_, b, se)) = stats::weighted_line(&xs, &ys, &ws) {
            return ExcursionFit {
                class,
                size,
                decay: Some(b.exp()),
                decay_upper: (b + Z95_ONE_SIDED * se).exp(),
                resolution_bound: false,
            };
        }
    }
    // Last resolved point (n = 0 has probability 1) against the upper bound
    // at the first unresolved one.
    let last = rows.iter().rfind(|r| r.hits >= MIN_RESOLVED_HITS).unwrap_or(&rows[0]);
    let next = rows.iter().find(|r| r.n > last.n);
    let decay_upper = match next {
        Some(r) => {
            let up = stats::wilson_upper(r.hits, replicas, stats::Z95);
            (up / last.probability.value).powf(1.0 / (r.n - last.n) as f64).min(1.0)
        }
        None => 1.0,
    };
    ExcursionFit { class, size, decay: None, decay_upper, resolution_bound: true }
}

/// (H1): joint excursion probabilities above K from starts with |A| ≤ K,
/// with a log-linear fit of the per-step decay; passes when every decay
/// upper bound is below 1/R.
pub fn h1_check(lambda: f64, cfg: &CriteriaConfig, n_max: usize, replicas: usize, seed: u64, par: &Parallelism) -> Result<H1Report> {
    cfg.validate()?;
    check_replicas(replicas)?;
    let starts = [
        (StartClass::Singleton, 1),
        (StartClass::Block, cfg.k),
        (StartClass::Spaced, cfg.k),
        (StartClass::Random, cfg.k),
    ];
    let k = cfg.k as u32;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (class, size) in starts {
        let job = size_job("h1", cfg.psi, class, size);
        let paths = size_paths(&class.start(size, seed), lambda, cfg.psi, n_max, replicas, seed, job, par);
        let mut local = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let hits = paths.iter().filter(|p| p[..n].iter().all(|&s| s > k)).count() as u64;
            local.push(ExcursionRow {
                class,
                size,
                n,
                hits,
                probability: if n == 0 { Estimate::new(1.0, 0.0) } else { stats::proportion(hits, replicas as u64) },
                upper95: if n == 0 { 1.0 } else { stats::wilson_upper(hits, replicas as u64, stats::Z95) },
            });
        }
        fits.push(excursion_fit(class, size, &local, replicas as u64));
        rows.extend(local);
    }
    let target = 1.0 / cfg.decay_r;
    let pass = fits.iter().all(|f| f.decay_upper < target);
    Ok(H1Report { rows, fits, target, pass })
}

impl H1Report {
    pub fn to_report(&self, lambda: f64, cfg: &CriteriaConfig) -> CriterionReport {
        CriterionReport {
            criterion: "H1".into(),
            params: json!({ "lambda": lambda, "psi": cfg.psi, "K": cfg.k, "rho": cfg.rho, "decay_R": cfg.decay_r }),
            table: json!(self.rows),
            fit: json!({ "fits": self.fits, "target": self.target }),
            pass: self.pass,
            confidence: 0.95,
        }
    }
}

/// A start together with each of its points' own descendants, all driven by
/// the same marks, so that 1[τ^A > n] ≤ Σ_x 1[τ^x > n] path by path.
#[derive(Debug, Clone)]
struct UnionWalker {
    union: SparseSites,
    parts: Vec<SparseSites>,
}

impl UnionWalker {
    fn new(a: &Configuration) -> Self {
        UnionWalker {
            union: SparseSites::new(a),
            parts: a.iter().map(|x| SparseSites::new(&Configuration::singleton(x))).collect(),
        }
    }

    fn advance(&mut self, contact: &Contact, from: f64, to: f64, rng: &mut SimRng) {
        let mut now = from;
        while let Fire::Event { time, flip } = contact.fire(&self.union, now, to, rng) {
            now = time;
            flip.apply(&mut self.union);
            for p in self.parts.iter_mut().filter(|p| !p.is_empty()) {
                match flip {
                    Flip::Recover(x) => p.remove(x),
                    Flip::Infect { from, to } => {
                        if p.contains(from) {
                            p.insert(to)
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H2Row {
    pub class: StartClass,
    pub size: usize,
    pub n: usize,
    /// P(τ^A > nψ) / (|A| · P(τ⁰ > nψ)).
    pub ratio: Estimate,
    pub upper95: f64,
    pub numerator_hits: u64,
    pub denominator_hits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Report {
    pub rows: Vec<H2Row>,
    pub worst_upper: f64,
    /// Steps kept after dropping under-resolved denominators.
    pub n_used: usize,
    pub pass: bool,
}

/// Denominator survivors needed before a step enters the (H2) table.
pub const MIN_DENOMINATOR_HITS: u64 = 200;

/// (H2) with A′ = {0}: the ratio P(τ^A > nψ) / (|A| P(τ⁰ > nψ)), where the
/// denominator counts surviving single-point descendants on the same
/// graphical construction (each has the law of τ⁰).
pub fn h2_check(lambda: f64, k: usize, psi: f64, n_max: usize, replicas: usize, seed: u64, par: &Parallelism) -> Result<H2Report> {
    check_replicas(replicas)?;
    if k == 0 || !(psi > 0.0) {
        return Err(Error::param("k", "need K ≥ 1 and ψ > 0"));
    }
    let mut starts = vec![(StartClass::Singleton, 1)];
    for size in [2, k] {
        if size >= 2 {
            starts.push((StartClass::Block, size));
            starts.push((StartClass::Spaced, size));
        }
    }
    starts.dedup();
    let contact = Contact::new(lambda);
    let mut rows = Vec::new();
    let mut n_used = n_max;
    for (class, size) in starts {
        let a = class.start(size, seed);
        let job = size_job("h2", psi, class, size);
        // Per replica and step: (union alive, number of surviving parts).
        let runs: Vec<Vec<(bool, u32)>> = par.map(replicas, |i| {
            let mut r = rng::stream_rng(seed, job, i as u64);
            let mut w = UnionWalker::new(&a);
            (0..n_max)
                .map(|n| {
                    if !w.union.is_empty() {
                        w.advance(&contact, n as f64 * psi, (n + 1) as f64 * psi, &mut r);
                    }
                    (!w.union.is_empty(), w.parts.iter().filter(|p| !p.is_empty()).count() as u32)
                })
                .collect()
        });
        for n in 1..=n_max {
            let num: Vec<f64> = runs.iter().map(|r| r[n - 1].0 as u8 as f64).collect();
            let den: Vec<f64> = runs.iter().map(|r| r[n - 1].1 as f64).collect();
            let denominator_hits = den.iter().sum::<f64>() as u64;
            if denominator_hits < MIN_DENOMINATOR_HITS {
                n_used = n_used.min(n - 1);
                break;
            }
            let ratio = if class == StartClass::Singleton { Estimate::new(1.0, 0.0) } else { grouped_ratio(&num, &den) };
            rows.push(H2Row {
                class,
                size,
                n,
                ratio,
                upper95: ratio.upper(Z95_ONE_SIDED),
                numerator_hits: num.iter().sum::<f64>() as u64,
                denominator_hits,
            });
        }
    }
    rows.retain(|r| r.n <= n_used);
    let worst_upper = rows.iter().map(|r| r.upper95).fold(0.0, f64::max);
    Ok(H2Report { pass: !rows.is_empty() && worst_upper <= 1.0, rows, worst_upper, n_used })
}

impl H2Report {
    pub fn to_report(&self, lambda: f64, k: usize, psi: f64) -> CriterionReport {
        CriterionReport {
            criterion: "H2".into(),
            params: json!({ "lambda": lambda, "psi": psi, "K": k, "A_prime": [0] }),
            table: json!(self.rows),
            fit: json!({ "worst_upper": self.worst_upper, "n_used": self.n_used, "M": 1.0 }),
            pass: self.pass,
            confidence: 0.95,
        }
    }
}

/// e^{−ψ} e^{−2λnψ} (1 − e^{−ψ})^{n−1}: one point keeps its infection and
/// sends no arrow while every other point recovers and none sends an arrow.
pub fn h3_bound(lambda: f64, psi: f64, n: usize) -> f64 {
    let n = n as f64;
    (-psi - 2.0 * lambda * n * psi + (n - 1.0) * (-(-psi).exp()).ln_1p()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H3Row {
    pub class: StartClass,
    pub size: usize,
    /// P(ζ^A_ψ = {0}).
    pub estimate: Estimate,
    /// estimate + 3σ.
    pub band_upper: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H3Report {
    pub rows: Vec<H3Row>,
    /// The bound at |A| = K.
    pub epsilon: f64,
    pub pass: bool,
}

/// Sizes 1, 2, 3, 4, 6, 8, 12, … up to K, and K itself.
pub fn h3_sizes(k: usize) -> Vec<usize> {
    let mut out = vec![];
    let mut s = 1usize;
    while s <= k {
        out.push(s);
        s = if s < 4 { s + 1 } else if s.is_power_of_two() { s + s / 2 } else { (s / 3) * 4 };
    }
    if out.last() != Some(&k) {
        out.push(k);
    }
    out
}

/// (H3) with A′ = {0} and one step: P(ζ^A_ψ = {0}) against the product
/// lower bound, for blocks, spaced and random starts of size ≤ K.
pub fn h3_check(lambda: f64, k: usize, psi: f64, replicas: usize, seed: u64, par: &Parallelism) -> Result<H3Report> {
    check_replicas(replicas)?;
    if k == 0 || !(psi > 0.0) {
        return Err(Error::param("k", "need K ≥ 1 and ψ > 0"));
    }
    let mut rows = Vec::new();
    for size in h3_sizes(k) {
        let classes: &[StartClass] =
            if size == 1 { &[StartClass::Singleton] } else { &[StartClass::Block, StartClass::Spaced, StartClass::Random] };
        for &class in classes {
            let job = size_job("h3", psi, class, size);
            let paths = size_paths(&class.start(size, seed), lambda, psi, 1, replicas, seed, job, par);
            let hits = paths.iter().filter(|p| p[0] == 1).count() as u64;
            let estimate = stats::proportion(hits, replicas as u64);
            let bound = h3_bound(lambda, psi, size);
            let band_upper = estimate.upper(3.0);
            rows.push(H3Row { class, size, estimate, band_upper, bound, pass: band_upper >= bound });
        }
    }
    let epsilon = h3_bound(lambda, psi, k);
    Ok(H3Report { pass: rows.iter().all(|r| r.pass), rows, epsilon })
}

impl H3Report {
    pub fn to_report(&self, lambda: f64, k: usize, psi: f64) -> CriterionReport {
        CriterionReport {
            criterion: "H3".into(),
            params: json!({ "lambda": lambda, "psi": psi, "K": k, "A_prime": [0], "steps": 1 }),
            table: json!(self.rows),
            fit: json!({ "epsilon": self.epsilon }),
            pass: self.pass,
            confidence: 0.997,
        }
    }
}

/// Settings of the full audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditOptions {
    pub lambda: f64,
    /// Spectral α used for R = e^{αψ}.
    pub alpha: f64,
    /// ρ = rho_fraction / R.
    pub rho_fraction: f64,
    pub q_max: u32,
    pub n_max: usize,
    pub replicas: usize,
    /// (H2) ratios approach 1 for spread-out starts and need more replicas.
    pub h2_replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Audit {
    pub options: AuditOptions,
    pub psi: PsiChoice,
    pub q_min: u32,
    pub k_choice: KChoice,
    pub config: CriteriaConfig,
    pub h1: H1Report,
    pub h2: H2Report,
    pub h3: H3Report,
    /// (UCB of 𝔼|η⁰_ψ|)^q < ρ for the final q.
    pub moment_pass: bool,
    pub pass: bool,
}

/// ψ → ρ → q → K → (H1), (H2), (H3).
pub fn audit(opts: AuditOptions, par: &Parallelism) -> Result<Audit> {
    if !(opts.rho_fraction > 0.0 && opts.rho_fraction < 1.0) || !(opts.alpha > 0.0) {
        return Err(Error::param("rho_fraction", "need 0 < rho_fraction < 1 and α > 0"));
    }
    let psi = choose_psi(opts.lambda, opts.replicas, opts.seed, par)?;
    let decay_r = (opts.alpha * psi.psi).exp();
    let rho = opts.rho_fraction / decay_r;
    let q_min = choose_q(psi.upper95, rho, opts.q_max)
        .ok_or_else(|| Error::Resolution(format!("no q ≤ {} with (𝔼|η_ψ|)^q < ρ", opts.q_max)))?;
    let k_choice = choose_k(opts.lambda, psi.psi, rho, q_min, opts.q_max, opts.replicas, opts.seed, par)?;
    let k = k_choice.k;
    let config = CriteriaConfig {
        psi: psi.psi,
        k,
        q: k_choice.q,
        rho,
        m: k_choice.c / rho,
        epsilon: h3_bound(opts.lambda, psi.psi, k),
        decay_r,
    };
    let h1 = h1_check(opts.lambda, &config, opts.n_max, opts.replicas, opts.seed, par)?;
    let h2 = h2_check(opts.lambda, k, psi.psi, opts.n_max, opts.h2_replicas, opts.seed, par)?;
    let h3 = h3_check(opts.lambda, k, psi.psi, opts.replicas, opts.seed, par)?;
    let moment_pass = psi.upper95.powi(config.q as i32) < rho;
    let pass = psi.upper95 < 1.0 && moment_pass && h1.pass && h2.pass && h3.pass;
    Ok(Audit { options: opts, psi, q_min, k_choice, config, h1, h2, h3, moment_pass, pass })
}

impl Audit {
    pub fn reports(&self) -> Vec<CriterionReport> {
        let o = &self.options;
        let psi = CriterionReport {
            criterion: "psi".into(),
            params: json!({ "lambda": o.lambda, "replicas": o.replicas }),
            table: json!(self.psi.grid),
            fit: json!({ "psi": self.psi.psi, "mean": self.psi.mean, "upper95": self.psi.upper95 }),
            pass: self.psi.upper95 < 1.0,
            confidence: 0.95,
        };
        let moments = CriterionReport {
            criterion: "moment".into(),
            params: json!({ "psi": self.config.psi, "rho": self.config.rho, "decay_R": self.config.decay_r }),
            table: json!(self.k_choice.rows),
            fit: json!({ "q_min": self.q_min, "q": self.config.q, "K": self.config.k, "C": self.k_choice.c, "M": self.config.m }),
            pass: self.moment_pass,
            confidence: 0.95,
        };
        vec![
            psi,
            moments,
            self.h1.to_report(o.lambda, &self.config),
            self.h2.to_report(o.lambda, self.config.k, self.config.psi),
            self.h3.to_report(o.lambda, self.config.k, self.config.psi),
        ]
    }
}
