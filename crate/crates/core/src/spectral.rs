//! Exact finite-state surrogate of the edge process and its Perron triple.
//!
//! States are the 2^{L−1} nonempty edge configurations of depth L, indexed
//! by `key >> 1`. The empty configuration is the absorbing cemetery and is
//! not stored; its inflow is the per-state absorption rate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::edge::{CanonicalKey, EmpiricalDistribution};
use crate::error::{Error, Result};

pub const MAX_GENERATOR_DEPTH: u32 = 26;

/// What to do with an infection that lands below the truncation depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Drop the deep site.
    #[default]
    Clip,
    /// Send the whole transition to ∅.
    Kill,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Clip => "clip",
            Policy::Kill => "kill",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clip" => Ok(Policy::Clip),
            "kill" => Ok(Policy::Kill),
            _ => Err(Error::param("policy", format!("expected clip or kill, got {s:?}"))),
        }
    }
}

/// Sparse rate matrix of the depth-L edge process (CSR, no self loops).
#[derive(Debug, Clone)]
pub struct TruncatedGenerator {
    depth: u32,
    lambda: f64,
    policy: Policy,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    absorption: Vec<f64>,
    exit: Vec<f64>,
}

impl TruncatedGenerator {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn state_count(&self) -> usize {
        self.absorption.len()
    }

    pub fn key(&self, state: usize) -> CanonicalKey {
        CanonicalKey::from_state_index(state, self.depth)
    }

    pub fn state_of(&self, key: CanonicalKey) -> Result<usize> {
        if key.depth != self.depth || !key.is_valid() || key.is_empty() {
            return Err(Error::param("start", format!("key {} is not a nonempty depth-{} state", key.key, self.depth)));
        }
        Ok(key.state_index().expect("nonempty"))
    }

    /// Off-diagonal transitions out of `state`.
    pub fn row(&self, state: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[state]..self.row_ptr[state + 1];
        (&self.cols[r.clone()], &self.rates[r])
    }

    pub fn absorption(&self, state: usize) -> f64 {
        self.absorption[state]
    }

    /// Total exit rate, i.e. −Q(x, x).
    pub fn exit_rate(&self, state: usize) -> f64 {
        self.exit[state]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    /// y = xQ for a row vector x.
    pub fn left_apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = -self.exit[i] * x[i];
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, rates) = self.row(i);
            for (&j, &r) in cols.iter().zip(rates) {
                y[j as usize] += xi * r;
            }
        }
    }

    /// y = Qx for a column vector x.
    pub fn right_apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, rates) = self.row(i);
            let mut acc = -self.exit[i] * x[i];
            for (&j, &r) in cols.iter().zip(rates) {
                acc += r * x[j as usize];
            }
            *yi = acc;
        }
    }

    /// y = xP with P = I + Q/σ.
    fn left_uniformized(&self, sigma: f64, x: &[f64], y: &mut [f64]) {
        self.left_apply(x, y);
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi = xi + *yi / sigma;
        }
    }

    fn right_uniformized(&self, sigma: f64, x: &[f64], y: &mut [f64]) {
        self.right_apply(x, y);
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi = xi + *yi / sigma;
        }
    }
}

/// Off-diagonal targets of the edge process from `key` at depth L.
/// Targets equal to 0 are absorption; self loops are omitted.
pub fn edge_transitions(key: u64, depth: u32, lambda: f64, policy: Policy) -> Vec<(u64, f64)> {
    let l = depth as u64;
    let full = if depth >= 64 { u64::MAX } else { (1u64 << depth) - 1 };
    let mut out = Vec::with_capacity(2 * depth as usize + 2);
    // Recovery of a site other than the origin.
    let mut rest = key & !1;
    while rest != 0 {
        let b = rest & rest.wrapping_neg();
        out.push((key & !b, 1.0));
        rest &= !b;
    }
    // Recovery of the origin: recenter at the next survivor.
    let below = key & !1;
    out.push((if below == 0 { 0 } else { below >> below.trailing_zeros() }, 1.0));
    // Infection of a healthy site −d, d ≥ 1.
    for d in 1..=l {
        if key >> d & 1 == 1 && d < l {
            continue;
        }
        let k = (key >> (d - 1) & 1) + if d + 1 < l { key >> (d + 1) & 1 } else { 0 };
        if k == 0 {
            continue;
        }
        let rate = k as f64 * lambda;
        if d < l {
            out.push((key | 1 << d, rate));
        } else if policy == Policy::Kill {
            out.push((0, rate));
        }
    }
    // Infection of +1: the maximum moves right.
    let shifted = (key << 1) | 1;
    if shifted & !full == 0 {
        out.push((shifted, lambda));
    } else {
        match policy {
            Policy::Clip => out.push((shifted & full, lambda)),
            Policy::Kill => out.push((0, lambda)),
        }
    }
    out.retain(|&(to, _)| to != key);
    out
}

pub fn build_generator(depth: u32, lambda: f64, policy: Policy) -> Result<TruncatedGenerator> {
    if depth == 0 || depth > MAX_GENERATOR_DEPTH {
        return Err(Error::param("L", format!("must lie in 1..={MAX_GENERATOR_DEPTH}, got {depth}")));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    let n = 1usize << (depth - 1);
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut rates = Vec::new();
    let mut absorption = vec![0.0; n];
    let mut exit = vec![0.0; n];
    row_ptr.push(0);
    for i in 0..n {
        let key = ((i as u64) << 1) | 1;
        let mut row = edge_transitions(key, depth, lambda, policy);
        row.sort_by_key(|&(to, _)| to);
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(row.len());
        for (to, r) in row {
            match merged.last_mut() {
                Some(last) if last.0 == to => last.1 += r,
                _ => merged.push((to, r)),
            }
        }
        for (to, r) in merged {
            exit[i] += r;
            if to == 0 {
                absorption[i] += r;
            } else {
                cols.push((to >> 1) as u32);
                rates.push(r);
            }
        }
        row_ptr.push(cols.len());
    }
    Ok(TruncatedGenerator { depth, lambda, policy, row_ptr, cols, rates, absorption, exit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub left: f64,
    pub right: f64,
}

/// (α, ν, h) with ν a probability vector, h > 0 and ν·h = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub lambda: f64,
    pub depth: u32,
    pub policy: Policy,
    pub alpha: f64,
    pub nu: Vec<f64>,
    pub h: Vec<f64>,
    pub residuals: Residuals,
    pub iterations: usize,
}

#[derive(Serialize)]
struct SpectralJson {
    lambda: f64,
    #[serde(rename = "L")]
    depth: u32,
    policy: Policy,
    alpha: f64,
    residuals: Residuals,
    iterations: usize,
    nu_dot_h: f64,
    nu: Vec<(u64, f64)>,
    h: Vec<(u64, f64)>,
}

impl SpectralResult {
    pub fn key(&self, state: usize) -> u64 {
        ((state as u64) << 1) | 1
    }

    pub fn nu_dot_h(&self) -> f64 {
        self.nu.iter().zip(&self.h).map(|(a, b)| a * b).sum()
    }

    pub fn nu_distribution(&self) -> EmpiricalDistribution {
        EmpiricalDistribution::from_probabilities(self.depth, self.nu.iter().enumerate().map(|(i, &p)| (self.key(i), p)))
            .expect("valid depth")
    }

    /// The stationary law ν·h of the Q-process.
    pub fn nu_h_distribution(&self) -> EmpiricalDistribution {
        let z = self.nu_dot_h();
        EmpiricalDistribution::from_probabilities(
            self.depth,
            self.nu.iter().zip(&self.h).enumerate().map(|(i, (a, b))| (self.key(i), a * b / z)),
        )
        .expect("valid depth")
    }

    pub fn to_json(&self) -> String {
        let view = SpectralJson {
            lambda: self.lambda,
            depth: self.depth,
            policy: self.policy,
            alpha: self.alpha,
            residuals: self.residuals,
            iterations: self.iterations,
            nu_dot_h: self.nu_dot_h(),
            nu: self.nu.iter().enumerate().map(|(i, &p)| (self.key(i), p)).collect(),
            h: self.h.iter().enumerate().map(|(i, &v)| (self.key(i), v)).collect(),
        };
        serde_json::to_string_pretty(&view).expect("serializable")
    }
}

fn normalize_l1(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    s
}

fn normalize_max(v: &mut [f64]) -> f64 {
    let m = v.iter().copied().fold(0.0, f64::max);
    v.iter_mut().for_each(|x| *x /= m);
    m
}

fn sup_norm_residual(q_apply: impl Fn(&[f64], &mut [f64]), v: &[f64], alpha: f64, buf: &mut [f64]) -> f64 {
    q_apply(v, buf);
    buf.iter().zip(v).map(|(a, b)| (a + alpha * b).abs()).fold(0.0, f64::max)
}

/// Uniformization rate for power iteration. Padding the maximal exit rate
/// keeps a positive diagonal everywhere, so P is aperiodic even when every
/// state has the same exit rate.
fn power_sigma(gen: &TruncatedGenerator) -> f64 {
    1.0625 * gen.max_exit_rate()
}

/// Left and right Perron vectors of the uniformized kernel by power
/// iteration; α = σ(1 − μ).
pub fn dominant_eigenpair(gen: &TruncatedGenerator, tol: f64, max_iters: usize) -> Result<SpectralResult> {
    let n = gen.state_count();
    let sigma = power_sigma(gen);
    let mut nu = vec![1.0 / n as f64; n];
    let mut h = vec![1.0; n];
    let mut buf = vec![0.0; n];
    let (mut left, mut right) = (f64::INFINITY, f64::INFINITY);
    let mut alpha = 0.0;
    let check_every = 16;
    let mut iters = 0;
    while iters < max_iters {
        for _ in 0..check_every {
            gen.left_uniformized(sigma, &nu, &mut buf);
            std::mem::swap(&mut nu, &mut buf);
            normalize_l1(&mut nu);
            gen.right_uniformized(sigma, &h, &mut buf);
            std::mem::swap(&mut h, &mut buf);
            normalize_max(&mut h);
        }
        iters += check_every;
        // μ from the left vector: ‖νP‖₁ with ‖ν‖₁ = 1.
        gen.left_uniformized(sigma, &nu, &mut buf);
        let mu: f64 = buf.iter().sum();
        alpha = sigma * (1.0 - mu);
        left = sup_norm_residual(|x, y| gen.left_apply(x, y), &nu, alpha, &mut buf);
        let hmax = h.iter().copied().fold(0.0, f64::max);
        right = sup_norm_residual(|x, y| gen.right_apply(x, y), &h, alpha, &mut buf) / hmax;
        if left <= tol && right <= tol {
            break;
        }
    }
    if !(left <= tol && right <= tol) {
        return Err(Error::NotConverged { iterations: iters, residual: left.max(right) });
    }
    let nh: f64 = nu.iter().zip(&h).map(|(a, b)| a * b).sum();
    h.iter_mut().for_each(|x| *x /= nh);
    right = sup_norm_residual(|x, y| gen.right_apply(x, y), &h, alpha, &mut buf);
    Ok(SpectralResult {
        lambda: gen.lambda(),
        depth: gen.depth(),
        policy: gen.policy(),
        alpha,
        nu,
        h,
        residuals: Residuals { left, right },
        iterations: iters,
    })
}

/// Default tolerance and iteration cap for the eigensolver.
pub fn solve(gen: &TruncatedGenerator) -> Result<SpectralResult> {
    dominant_eigenpair(gen, 1e-10, 2_000_000)
}

pub fn point_mass(gen: &TruncatedGenerator, key: CanonicalKey) -> Result<Vec<f64>> {
    let s = gen.state_of(key)?;
    let mut v = vec![0.0; gen.state_count()];
    v[s] = 1.0;
    Ok(v)
}

const SERIES_REL_TOL: f64 = 1e-12;

/// Row vector start·e^{Qt} by uniformization. The Poisson tail is cut once
/// it can change the total mass by less than a relative 1e−12.
pub fn transient(gen: &TruncatedGenerator, start: &[f64], t: f64) -> Result<Vec<f64>> {
    if start.len() != gen.state_count() {
        return Err(Error::param("start", format!("length {} != state count {}", start.len(), gen.state_count())));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(start.to_vec());
    }
    let sigma = gen.max_exit_rate();
    let m = sigma * t;
    let poisson = Poisson::new(m).map_err(|e| Error::Precondition(e.to_string()))?;
    let mut v = start.to_vec();
    let mut buf = vec![0.0; v.len()];
    let mut out = vec![0.0; v.len()];
    let mut acc = 0.0;
    let mut k: u64 = 0;
    loop {
        let w = (-m + k as f64 * m.ln() - ln_gamma(k as f64 + 1.0)).exp();
        let mass: f64 = v.iter().sum();
        if w > 0.0 {
            for (o, &x) in out.iter_mut().zip(&v) {
                *o += w * x;
            }
            acc += w * mass;
        }
        if k as f64 >= m && mass * poisson.sf(k) <= SERIES_REL_TOL * acc {
            break;
        }
        if mass == 0.0 {
            break;
        }
        gen.left_uniformized(sigma, &v, &mut buf);
        std::mem::swap(&mut v, &mut buf);
        k += 1;
    }
    Ok(out)
}

/// P(τ > t) started from `start` (a probability vector) at each time.
pub fn survival_curve(gen: &TruncatedGenerator, start: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    times.iter().map(|&t| Ok(transient(gen, start, t)?.iter().sum())).collect()
}

/// ℒ(ζ_t | τ > t) on the truncated chain, as a probability vector.
pub fn yaglom_exact(gen: &TruncatedGenerator, start: &[f64], t: f64) -> Result<Vec<f64>> {
    let mut v = transient(gen, start, t)?;
    let s = normalize_l1(&mut v);
    if !(s > 0.0) {
        return Err(Error::Precondition("start has no mass".into()));
    }
    Ok(v)
}

pub fn vector_distribution(gen: &TruncatedGenerator, v: &[f64]) -> EmpiricalDistribution {
    EmpiricalDistribution::from_probabilities(gen.depth(), v.iter().enumerate().map(|(i, &p)| (gen.key(i).key, p)))
        .expect("valid depth")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_one_chain() {
        let g = build_generator(1, 0.5, Policy::Clip).unwrap();
        assert_eq!(g.state_count(), 1);
        assert_eq!(g.absorption(0), 1.0);
        assert_eq!(g.exit_rate(0), 1.0);
        let r = solve(&g).unwrap();
        assert!((r.alpha - 1.0).abs() < 1e-12);
        let times = [0.0, 1.0, 3.0];
        let s = survival_curve(&g, &[1.0], &times).unwrap();
        for (t, p) in times.iter().zip(s) {
            assert!((p - (-t).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn depth_two_closed_form() {
        let g = build_generator(2, 0.5, Policy::Clip).unwrap();
        assert_eq!(g.row(0), (&[1u32][..], &[1.0][..]));
        assert_eq!(g.row(1), (&[0u32][..], &[2.0][..]));
        assert_eq!(g.exit_rate(0), 2.0);
        assert_eq!(g.exit_rate(1), 2.0);
        let r = solve(&g).unwrap();
        let a = 2.0 - 2f64.sqrt();
        assert!((r.alpha - a).abs() < 1e-10);
        assert!((r.nu[0] - (2f64.sqrt() - 1.0) * 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn kill_policy_adds_absorption() {
        let g = build_generator(1, 0.5, Policy::Kill).unwrap();
        assert_eq!(g.absorption(0), 2.0);
        assert!(build_generator(0, 0.5, Policy::Clip).is_err());
        assert!(build_generator(27, 0.5, Policy::Clip).is_err());
        assert!(build_generator(3, -1.0, Policy::Clip).is_err());
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("kill".parse::<Policy>().unwrap(), Policy::Kill);
        assert!("other".parse::<Policy>().is_err());
    }
}
