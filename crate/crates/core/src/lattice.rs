//! Event-driven simulation of the contact process on ℤ.
//!
//! Only occupied sites carry clocks: every infected site fires at rate
//! 1 + 2λ and the event is a recovery, a left arrow or a right arrow in
//! proportion 1 : λ : λ. Arrows onto infected sites are no-ops. This is the
//! graphical construction generated lazily, so the law of the trajectory is
//! the same as `evolve` on a sampled event log.

use rand::Rng;
use rand_distr::Exp1;

use crate::graphical::{Configuration, SiteWindow};
use crate::rng::SimRng;

/// Set of infected sites supporting O(1) uniform selection.
pub trait SiteSet: Clone + Send + Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// The i-th occupied site in the set's internal order.
    fn get(&self, i: usize) -> i64;
    fn contains(&self, x: i64) -> bool;
    /// Infects `x`; arrows leaving a bounded set are dropped.
    fn insert(&mut self, x: i64);
    fn remove(&mut self, x: i64);
    fn configuration(&self) -> Configuration;
    fn max(&self) -> Option<i64>;
    /// A boundary site has been occupied at some point.
    fn censored(&self) -> bool {
        false
    }
}

/// Sorted vector of sites, unbounded. Good for small populations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseSites {
    sites: Vec<i64>,
}

impl SparseSites {
    pub fn new(start: &Configuration) -> Self {
        SparseSites { sites: start.sites().to_vec() }
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }
}

impl SiteSet for SparseSites {
    fn len(&self) -> usize {
        self.sites.len()
    }

    fn get(&self, i: usize) -> i64 {
        self.sites[i]
    }

    fn contains(&self, x: i64) -> bool {
        self.sites.binary_search(&x).is_ok()
    }

    fn insert(&mut self, x: i64) {
        if let Err(i) = self.sites.binary_search(&x) {
            self.sites.insert(i, x);
        }
    }

    fn remove(&mut self, x: i64) {
        if let Ok(i) = self.sites.binary_search(&x) {
            self.sites.remove(i);
        }
    }

    fn configuration(&self) -> Configuration {
        Configuration::from(self.sites.clone())
    }

    fn max(&self) -> Option<i64> {
        self.sites.last().copied()
    }
}

const VACANT: u32 = u32::MAX;

/// Occupied list plus position table over a fixed window.
#[derive(Debug, Clone)]
pub struct DenseSites {
    lo: i64,
    hi: i64,
    occupied: Vec<i64>,
    slot: Vec<u32>,
    censored: bool,
}

impl DenseSites {
    pub fn new(window: &SiteWindow, start: &Configuration) -> Self {
        let mut d = DenseSites {
            lo: window.lo,
            hi: window.hi,
            occupied: Vec::with_capacity(start.len()),
            slot: vec![VACANT; window.width()],
            censored: false,
        };
        for x in start.iter() {
            d.insert(x);
        }
        d
    }
}

impl SiteSet for DenseSites {
    fn len(&self) -> usize {
        self.occupied.len()
    }

    fn get(&self, i: usize) -> i64 {
        self.occupied[i]
    }

    fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi && self.slot[(x - self.lo) as usize] != VACANT
    }

    fn insert(&mut self, x: i64) {
        if x < self.lo || x > self.hi {
            return;
        }
        let i = (x - self.lo) as usize;
        if self.slot[i] == VACANT {
            self.slot[i] = self.occupied.len() as u32;
            self.occupied.push(x);
            self.censored |= x == self.lo || x == self.hi;
        }
    }

    fn remove(&mut self, x: i64) {
        if !self.contains(x) {
            return;
        }
        let i = (x - self.lo) as usize;
        let k = self.slot[i] as usize;
        self.slot[i] = VACANT;
        let last = self.occupied.pop().expect("nonempty");
        if k < self.occupied.len() {
            self.occupied[k] = last;
            self.slot[(last - self.lo) as usize] = k as u32;
        }
    }

    fn configuration(&self) -> Configuration {
        Configuration::from(self.occupied.clone())
    }

    fn max(&self) -> Option<i64> {
        self.occupied.iter().copied().max()
    }

    fn censored(&self) -> bool {
        self.censored
    }
}

/// Contact-process dynamics with infection rate λ.
#[derive(Debug, Clone, Copy)]
pub struct Contact {
    lambda: f64,
}

impl Contact {
    pub fn new(lambda: f64) -> Self {
        Contact { lambda }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Draws the next clock ring of `sites` after `now`, or reports that
    /// none happens before `to`.
    pub fn fire<S: SiteSet>(&self, sites: &S, now: f64, to: f64, rng: &mut SimRng) -> Fire {
        let n = sites.len();
        if n == 0 {
            return Fire::Extinct;
        }
        let per_site = 1.0 + 2.0 * self.lambda;
        let gap: f64 = rng.sample(Exp1);
        let time = now + gap / (per_site * n as f64);
        if time > to {
            return Fire::Beyond;
        }
        let x = sites.get(rng.random_range(0..n));
        let u = rng.random::<f64>() * per_site;
        let flip = if u < 1.0 {
            Flip::Recover(x)
        } else if u < 1.0 + self.lambda {
            Flip::Infect { from: x, to: x - 1 }
        } else {
            Flip::Infect { from: x, to: x + 1 }
        };
        Fire::Event { time, flip }
    }

    /// Runs `sites` from time `from` to time `to`; returns the time of
    /// extinction if it happens first.
    pub fn advance<S: SiteSet>(&self, sites: &mut S, from: f64, to: f64, rng: &mut SimRng) -> Option<f64> {
        match self.advance_observed(sites, from, to, rng, |_, _| false) {
            Advance::Extinct(u) => Some(u),
            _ => None,
        }
    }

    /// Like [`Contact::advance`], calling `stop` after every event; a true
    /// return ends the run at that event.
    pub fn advance_observed<S: SiteSet, F: FnMut(&S, f64) -> bool>(
        &self,
        sites: &mut S,
        from: f64,
        to: f64,
        rng: &mut SimRng,
        mut stop: F,
    ) -> Advance {
        let mut now = from;
        loop {
            match self.fire(sites, now, to, rng) {
                Fire::Extinct => return Advance::Extinct(now),
                Fire::Beyond => return Advance::Reached,
                Fire::Event { time, flip } => {
                    now = time;
                    flip.apply(sites);
                    if stop(sites, now) {
                        return Advance::Stopped(now);
                    }
                }
            }
        }
    }
}

/// Effect of one clock ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flip {
    Recover(i64),
    Infect { from: i64, to: i64 },
}

impl Flip {
    pub fn apply<S: SiteSet>(self, sites: &mut S) {
        match self {
            Flip::Recover(x) => sites.remove(x),
            Flip::Infect { to, .. } => sites.insert(to),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fire {
    Extinct,
    /// The next ring falls after the horizon.
    Beyond,
    Event { time: f64, flip: Flip },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Advance {
    Extinct(f64),
    Reached,
    Stopped(f64),
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn dense_set_bookkeeping() {
        let w = SiteWindow::new(-3, 3, 1.0).unwrap();
        let mut d = DenseSites::new(&w, &Configuration::from(vec![0, 1]));
        d.insert(-1);
        d.remove(0);
        d.insert(5);
        assert_eq!(d.configuration(), Configuration::from(vec![-1, 1]));
        assert!(!d.censored());
        d.insert(3);
        assert!(d.censored());
        assert_eq!(d.max(), Some(3));
    }

    #[test]
    fn zero_lambda_single_site_is_exponential() {
        let c = Contact::new(0.0);
        let n = 20_000;
        let survived = (0..n)
            .filter(|&i| {
                let mut rng = stream_rng(1, 2, i);
                let mut s = SparseSites::new(&Configuration::singleton(0));
                c.advance(&mut s, 0.0, 1.0, &mut rng).is_none()
            })
            .count();
        let p = survived as f64 / n as f64;
        let e = (-1.0f64).exp();
        assert!((p - e).abs() < 4.0 * (e * (1.0 - e) / n as f64).sqrt(), "p = {p}");
    }

    #[test]
    fn empty_configuration_stays_empty() {
        let mut rng = stream_rng(0, 0, 0);
        let mut s = SparseSites::default();
        assert_eq!(Contact::new(1.0).advance(&mut s, 0.0, 1.0, &mut rng), Some(0.0));
    }
}
