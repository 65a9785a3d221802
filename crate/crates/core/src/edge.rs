//! The contact process seen from its rightmost infected site.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphical::{self, ceil_beta_t, Configuration, SiteWindow};
use crate::lattice::{Contact, DenseSites, SiteSet, SparseSites};
use crate::rng;

/// Largest supported truncation depth for canonical keys.
pub const MAX_DEPTH: u32 = 63;

/// Finite set of offsets ≤ 0 containing 0, or the empty configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct EdgeConfiguration(Configuration);

impl EdgeConfiguration {
    pub fn empty() -> Self {
        EdgeConfiguration(Configuration::empty())
    }

    pub fn origin() -> Self {
        EdgeConfiguration(Configuration::singleton(0))
    }

    /// Checks the pinned-maximum invariant.
    pub fn new(offsets: Configuration) -> Result<Self> {
        match offsets.max() {
            None | Some(0) => Ok(EdgeConfiguration(offsets)),
            Some(m) => Err(Error::param("offsets", format!("maximum must be 0, got {m}"))),
        }
    }

    pub fn offsets(&self) -> &Configuration {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Deepest offset, as a nonnegative depth.
    pub fn extent(&self) -> u64 {
        self.0.min().map_or(0, |m| (-m) as u64)
    }
}

/// ζ = η − max η.
pub fn recenter(eta: &Configuration) -> (EdgeConfiguration, i64) {
    match eta.max() {
        None => (EdgeConfiguration::empty(), 0),
        Some(m) => (EdgeConfiguration(eta.shifted(-m)), m),
    }
}

/// Bit i set ⇔ site −i infected; 0 encodes ∅.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalKey {
    pub key: u64,
    pub depth: u32,
}

impl CanonicalKey {
    pub fn empty(depth: u32) -> Self {
        CanonicalKey { key: 0, depth }
    }

    /// Encodes ζ keeping offsets in [−(depth−1), 0]; returns the key and the
    /// number of offsets that fell below the depth.
    pub fn encode(zeta: &EdgeConfiguration, depth: u32) -> Result<(Self, usize)> {
        check_depth(depth)?;
        let mut key = 0u64;
        let mut clipped = 0;
        for x in zeta.offsets().iter() {
            let d = (-x) as u64;
            if d < depth as u64 {
                key |= 1 << d;
            } else {
                clipped += 1;
            }
        }
        Ok((CanonicalKey { key, depth }, clipped))
    }

    pub fn decode(&self) -> EdgeConfiguration {
        EdgeConfiguration(
            (0..self.depth)
                .filter(|i| self.key >> i & 1 == 1)
                .map(|i| -(i as i64))
                .collect(),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.key == 0
    }

    pub fn is_valid(&self) -> bool {
        self.depth >= 1
            && self.depth <= MAX_DEPTH
            && (self.key == 0 || (self.key & 1 == 1 && self.key >> self.depth == 0))
    }

    /// Index among the 2^{depth−1} nonempty keys.
    pub fn state_index(&self) -> Option<usize> {
        (self.key & 1 == 1).then_some((self.key >> 1) as usize)
    }

    pub fn from_state_index(index: usize, depth: u32) -> Self {
        CanonicalKey { key: ((index as u64) << 1) | 1, depth }
    }

    pub fn count(&self) -> u32 {
        self.key.count_ones()
    }
}

fn check_depth(depth: u32) -> Result<()> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(Error::param("L", format!("depth must lie in 1..={MAX_DEPTH}, got {depth}")));
    }
    Ok(())
}

/// Weighted counts over canonical keys of one depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    depth: u32,
    weights: BTreeMap<u64, f64>,
    total: f64,
    replica_count: u64,
    /// Weight of recorded configurations that had offsets below the depth.
    beyond_depth: f64,
}

impl EmpiricalDistribution {
    pub fn new(depth: u32) -> Result<Self> {
        check_depth(depth)?;
        Ok(EmpiricalDistribution { depth, weights: BTreeMap::new(), total: 0.0, replica_count: 0, beyond_depth: 0.0 })
    }

    /// Probability vector over a key set, e.g. a spectral ν.
    pub fn from_probabilities(depth: u32, probs: impl IntoIterator<Item = (u64, f64)>) -> Result<Self> {
        let mut d = Self::new(depth)?;
        for (k, p) in probs {
            if p > 0.0 {
                *d.weights.entry(k).or_insert(0.0) += p;
                d.total += p;
            }
        }
        Ok(d)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn replica_count(&self) -> u64 {
        self.replica_count
    }

    pub fn beyond_depth(&self) -> f64 {
        self.beyond_depth
    }

    /// Share of the total weight carried by configurations clipped at depth.
    pub fn beyond_depth_fraction(&self) -> f64 {
        if self.total > 0.0 { self.beyond_depth / self.total } else { 0.0 }
    }

    pub fn weights(&self) -> &BTreeMap<u64, f64> {
        &self.weights
    }

    pub fn record(&mut self, key: CanonicalKey, clipped: usize, weight: f64) {
        debug_assert_eq!(key.depth, self.depth);
        *self.weights.entry(key.key).or_insert(0.0) += weight;
        self.total += weight;
        self.replica_count += 1;
        if clipped > 0 {
            self.beyond_depth += weight;
        }
    }

    pub fn record_edge(&mut self, zeta: &EdgeConfiguration, weight: f64) {
        let (key, clipped) = CanonicalKey::encode(zeta, self.depth).expect("depth checked at construction");
        self.record(key, clipped, weight);
    }

    /// Associative, commutative aggregation.
    pub fn merge(&mut self, other: &EmpiricalDistribution) -> Result<()> {
        if other.depth != self.depth {
            return Err(Error::param("depth", format!("cannot merge depth {} into {}", other.depth, self.depth)));
        }
        for (k, w) in &other.weights {
            *self.weights.entry(*k).or_insert(0.0) += w;
        }
        self.total += other.total;
        self.replica_count += other.replica_count;
        self.beyond_depth += other.beyond_depth;
        Ok(())
    }

    pub fn probability(&self, key: u64) -> f64 {
        if self.total > 0.0 { self.weights.get(&key).copied().unwrap_or(0.0) / self.total } else { 0.0 }
    }

    /// Drops the ∅ entry, if any.
    pub fn without_empty(&self) -> EmpiricalDistribution {
        let mut d = self.clone();
        if let Some(w) = d.weights.remove(&0) {
            d.total -= w;
        }
        d
    }

    /// Key/count CSV with a `#` metadata line.
    pub fn to_csv(&self, lambda: f64, t: f64, seed: u64) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# depth={},lambda={},t={},replicas={},seed={},beyond_depth={}",
            self.depth, lambda, t, self.replica_count, seed, self.beyond_depth
        );
        out.push_str("key,count\n");
        for (k, w) in &self.weights {
            let _ = writeln!(out, "{k},{w}");
        }
        out
    }
}

/// Total variation distance between two normalized distributions.
pub fn tv_distance(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> Result<f64> {
    if p.depth != q.depth {
        return Err(Error::param("depth", format!("depth mismatch: {} vs {}", p.depth, q.depth)));
    }
    if p.total <= 0.0 || q.total <= 0.0 {
        return Err(Error::Precondition("tv_distance of an empty distribution".into()));
    }
    let mut sum = 0.0;
    let mut keys: Vec<u64> = p.weights.keys().chain(q.weights.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    for k in keys {
        sum += (p.probability(k) - q.probability(k)).abs();
    }
    Ok((0.5 * sum).min(1.0))
}

/// Pushforward under masking the bits ≥ m.
pub fn cylinder_restrict(dist: &EmpiricalDistribution, m: u32) -> Result<EmpiricalDistribution> {
    if m == 0 || m > dist.depth {
        return Err(Error::param("m", format!("need 1 <= m <= {}, got {m}", dist.depth)));
    }
    let mask = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let mut out = EmpiricalDistribution::new(m)?;
    for (k, w) in &dist.weights {
        *out.weights.entry(k & mask).or_insert(0.0) += w;
    }
    out.total = dist.total;
    out.replica_count = dist.replica_count;
    out.beyond_depth = dist.beyond_depth;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    Finite(Configuration),
    /// The interval [−M, 0], standing in for an infinite configuration.
    FullInterval { m: u64 },
}

impl InitialCondition {
    pub fn configuration(&self) -> Configuration {
        match self {
            InitialCondition::Finite(c) => c.clone(),
            InitialCondition::FullInterval { m } => Configuration::interval(-(*m as i64), 0),
        }
    }

    /// Default depth for the infinite-configuration surrogate.
    pub fn default_full_interval(beta: f64, t: f64) -> Self {
        InitialCondition::FullInterval { m: 4 * ceil_beta_t(beta, t) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Backend {
    /// Lazy event-driven simulation (marks generated only where needed).
    #[default]
    Lattice,
    /// Sample the whole event log on the window and call `evolve`.
    EventLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub beta: f64,
    pub backend: Backend,
}

impl TrajectoryOptions {
    pub fn new(lambda: f64) -> Self {
        TrajectoryOptions { beta: graphical::default_beta(lambda), backend: Backend::Lattice }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeOutcome {
    pub edge: EdgeConfiguration,
    pub key: CanonicalKey,
    /// Offsets below the depth, dropped from `key`.
    pub clipped: usize,
    pub shift: i64,
    pub survived: bool,
    pub censored: bool,
}

/// Window sized with a guard band of 2⌈βt⌉ sites on each side of `start`.
pub fn auto_window(start: &Configuration, beta: f64, t: f64) -> SiteWindow {
    let guard = 2 * ceil_beta_t(beta, t) as i64 + 1;
    let (lo, hi) = (start.min().unwrap_or(0), start.max().unwrap_or(0));
    SiteWindow { lo: lo - guard, hi: hi + guard, horizon: t.max(f64::MIN_POSITIVE) }
}

pub fn simulate_edge_trajectory(
    init: &InitialCondition,
    lambda: f64,
    t: f64,
    depth: u32,
    seed: u64,
    stream: u64,
    opts: TrajectoryOptions,
) -> Result<EdgeOutcome> {
    check_depth(depth)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("must be nonnegative, got {t}")));
    }
    let start = init.configuration();
    let window = auto_window(&start, opts.beta, t);
    let (eta, censored) = match opts.backend {
        Backend::EventLog if t > 0.0 => {
            let log = graphical::sample_event_log(window, lambda, seed, stream)?;
            let ev = graphical::evolve(&start, &log, 0.0, t)?;
            (ev.configuration, ev.censored)
        }
        _ => {
            let mut rng = rng::stream_rng(seed, rng::job_id("edge-trajectory"), stream);
            let contact = Contact::new(lambda);
            match init {
                InitialCondition::Finite(_) => {
                    let mut s = SparseSites::new(&start);
                    contact.advance(&mut s, 0.0, t, &mut rng);
                    (s.configuration(), false)
                }
                InitialCondition::FullInterval { .. } => {
                    let mut s = DenseSites::new(&window, &start);
                    contact.advance(&mut s, 0.0, t, &mut rng);
                    (s.configuration(), s.censored())
                }
            }
        }
    };
    let (edge, shift) = recenter(&eta);
    let (key, clipped) = CanonicalKey::encode(&edge, depth)?;
    Ok(EdgeOutcome { survived: !edge.is_empty(), edge, key, clipped, shift, censored })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recenter_examples() {
        let (z, s) = recenter(&Configuration::from(vec![3, 5, 9]));
        assert_eq!(z.offsets(), &Configuration::from(vec![-6, -4, 0]));
        assert_eq!(s, 9);
        assert_eq!(recenter(&Configuration::empty()), (EdgeConfiguration::empty(), 0));
        assert_eq!(recenter(z.offsets()), (z.clone(), 0));
    }

    #[test]
    fn encode_decode() {
        let z = EdgeConfiguration::new(Configuration::from(vec![-3, 0])).unwrap();
        let (k, c) = CanonicalKey::encode(&z, 6).unwrap();
        assert_eq!((k.key, c), (0b1001, 0));
        assert_eq!(k.decode(), z);
        let (k2, c2) = CanonicalKey::encode(&z, 2).unwrap();
        assert_eq!((k2.key, c2), (1, 1));
        assert_eq!(CanonicalKey::encode(&EdgeConfiguration::empty(), 4).unwrap().0.key, 0);
        assert!(EdgeConfiguration::new(Configuration::from(vec![-1, 2])).is_err());
        assert_eq!(CanonicalKey::from_state_index(3, 4).key, 0b111);
    }

    #[test]
    fn tv_examples() {
        let p = EmpiricalDistribution::from_probabilities(4, [(1, 0.5), (3, 0.5)]).unwrap();
        let q = EmpiricalDistribution::from_probabilities(4, [(1, 1.0)]).unwrap();
        let r = EmpiricalDistribution::from_probabilities(4, [(5, 2.0)]).unwrap();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert!((tv_distance(&p, &q).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(tv_distance(&q, &r).unwrap(), 1.0);
        let other = EmpiricalDistribution::from_probabilities(5, [(1, 1.0)]).unwrap();
        assert!(tv_distance(&p, &other).is_err());
    }

    #[test]
    fn cylinder_examples() {
        let p = EmpiricalDistribution::from_probabilities(6, [(0b1001, 1.0), (0b11, 2.0)]).unwrap();
        assert_eq!(cylinder_restrict(&p, 6).unwrap().weights(), p.weights());
        let r = cylinder_restrict(&p, 2).unwrap();
        assert_eq!(r.probability(1), 1.0 / 3.0);
        assert_eq!(r.total(), p.total());
    }

    #[test]
    fn trivial_trajectories() {
        let opts = TrajectoryOptions::new(0.5);
        let o = simulate_edge_trajectory(&InitialCondition::Finite(Configuration::singleton(0)), 0.5, 0.0, 4, 1, 0, opts)
            .unwrap();
        assert!(o.survived && !o.censored);
        assert_eq!(o.edge, EdgeConfiguration::origin());
        let e = simulate_edge_trajectory(&InitialCondition::Finite(Configuration::empty()), 0.5, 3.0, 4, 1, 0, opts)
            .unwrap();
        assert!(!e.survived && !e.censored);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut d = EmpiricalDistribution::new(3).unwrap();
        d.record_edge(&EdgeConfiguration::origin(), 1.0);
        let csv = d.to_csv(0.5, 2.0, 9);
        assert!(csv.starts_with("# depth=3,lambda=0.5,t=2,replicas=1,seed=9"));
        assert!(csv.contains("key,count\n1,1\n"));
    }
}
