//! Graphical construction of the contact process on a finite window of ℤ.
//!
//! An [`EventLog`] is a realisation of the space-time Poisson process:
//! recovery marks at rate 1 on every site line and infection arrows at rate
//! λ on every directed neighbour line. All process quantities (evolution,
//! forward and backward reachability, λ-path jump counts) are read-only
//! queries against a log.
//!
//! Time conventions: a state "at time u" is the right limit, i.e. it has
//! absorbed every mark with time ≤ u. Sources placed at time s are not
//! affected by marks at exactly s, so `evolve(A, log, s, t)` sweeps (s, t].

use std::cmp::Ordering;
use std::fmt::Write as _;

use itertools::Itertools;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteWindow {
    pub lo: i64,
    pub hi: i64,
    pub horizon: f64,
}

impl SiteWindow {
    pub fn new(lo: i64, hi: i64, horizon: f64) -> Result<Self> {
        if lo > hi {
            return Err(Error::param("window", format!("lo = {lo} exceeds hi = {hi}")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::param("horizon", format!("must be positive and finite, got {horizon}")));
        }
        Ok(SiteWindow { lo, hi, horizon })
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }

    #[inline]
    pub fn index(&self, x: i64) -> usize {
        (x - self.lo) as usize
    }

    pub fn is_boundary(&self, x: i64) -> bool {
        x == self.lo || x == self.hi
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkKind {
    Recovery { site: i64 },
    Arrow { from: i64, to: i64 },
}

impl MarkKind {
    fn site(&self) -> i64 {
        match *self {
            MarkKind::Recovery { site } => site,
            MarkKind::Arrow { from, .. } => from,
        }
    }

    fn rank(&self) -> u8 {
        match *self {
            MarkKind::Recovery { .. } => 0,
            MarkKind::Arrow { from, to } if to < from => 1,
            MarkKind::Arrow { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub time: f64,
    pub kind: MarkKind,
}

impl Mark {
    pub fn recovery(site: i64, time: f64) -> Self {
        Mark { time, kind: MarkKind::Recovery { site } }
    }

    pub fn arrow(from: i64, to: i64, time: f64) -> Self {
        Mark { time, kind: MarkKind::Arrow { from, to } }
    }

    /// Total order used to break (measure-zero) time ties: time, site, kind.
    fn order(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.site().cmp(&other.kind.site()))
            .then(self.kind.rank().cmp(&other.kind.rank()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub stream: u64,
}

/// Immutable, strictly time-ordered record of the marks in a window.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    window: SiteWindow,
    marks: Vec<Mark>,
    seed_record: Option<SeedRecord>,
    tie_perturbed: bool,
}

impl EventLog {
    /// Builds a log from explicit marks (hand-built cases, parsed files).
    pub fn from_marks(window: SiteWindow, mut marks: Vec<Mark>) -> Result<Self> {
        for m in &marks {
            if !(m.time >= 0.0 && m.time <= window.horizon) {
                return Err(Error::param("mark", format!("time {} outside [0, {}]", m.time, window.horizon)));
            }
            match m.kind {
                MarkKind::Recovery { site } if !window.contains(site) => {
                    return Err(Error::param("mark", format!("recovery site {site} outside window")));
                }
                MarkKind::Arrow { from, to } => {
                    if (from - to).abs() != 1 {
                        return Err(Error::param("mark", format!("arrow {from}->{to} is not between neighbours")));
                    }
                    if !window.contains(from) || !window.contains(to) {
                        return Err(Error::param("mark", format!("arrow {from}->{to} leaves the window")));
                    }
                }
                _ => {}
            }
        }
        marks.sort_by(Mark::order);
        Ok(Self::finish(window, marks, None))
    }

    fn finish(window: SiteWindow, mut marks: Vec<Mark>, seed_record: Option<SeedRecord>) -> Self {
        let mut tie_perturbed = false;
        for i in 1..marks.len() {
            if marks[i].time <= marks[i - 1].time {
                marks[i].time = marks[i - 1].time.next_up();
                tie_perturbed = true;
            }
        }
        if tie_perturbed {
            log::warn!("simultaneous marks in event log; perturbed by stable order");
        }
        EventLog { window, marks, seed_record, tie_perturbed }
    }

    pub fn window(&self) -> &SiteWindow {
        &self.window
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn seed_record(&self) -> Option<SeedRecord> {
        self.seed_record
    }

    pub fn tie_perturbed(&self) -> bool {
        self.tie_perturbed
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// Index of the first mark with time strictly greater than `s`.
    pub fn first_after(&self, s: f64) -> usize {
        self.marks.partition_point(|m| m.time <= s)
    }

    /// Marks with time in (s, t].
    pub fn between(&self, s: f64, t: f64) -> &[Mark] {
        let a = self.first_after(s);
        let b = self.first_after(t).max(a);
        &self.marks[a..b]
    }

    /// Line-oriented text form: `R <site> <time>` and `A <from> <to> <time>`,
    /// times with 17 significant digits, preceded by `#` metadata lines.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(32 * self.marks.len() + 64);
        let w = &self.window;
        let _ = writeln!(out, "# window {} {} {:.16e}", w.lo, w.hi, w.horizon);
        if let Some(s) = self.seed_record {
            let _ = writeln!(out, "# seed {} {}", s.seed, s.stream);
        }
        for m in &self.marks {
            match m.kind {
                MarkKind::Recovery { site } => {
                    let _ = writeln!(out, "R {} {:.16e}", site, m.time);
                }
                MarkKind::Arrow { from, to } => {
                    let _ = writeln!(out, "A {} {} {:.16e}", from, to, m.time);
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut window = None;
        let mut seed_record = None;
        let mut marks = Vec::new();
        let bad = |line: usize, message: &str| Error::Parse { line, message: message.to_string() };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let fields: Vec<&str> = raw.split_whitespace().collect();
            match fields.as_slice() {
                [] => {}
                ["#", "window", lo, hi, horizon] => {
                    let lo = lo.parse().map_err(|_| bad(line, "bad lo"))?;
                    let hi = hi.parse().map_err(|_| bad(line, "bad hi"))?;
                    let horizon = horizon.parse().map_err(|_| bad(line, "bad horizon"))?;
                    window = Some(SiteWindow::new(lo, hi, horizon)?);
                }
                ["#", "seed", seed, stream] => {
                    seed_record = Some(SeedRecord {
                        seed: seed.parse().map_err(|_| bad(line, "bad seed"))?,
                        stream: stream.parse().map_err(|_| bad(line, "bad stream"))?,
                    });
                }
                ["#", ..] => {}
                ["R", site, time] => marks.push(Mark::recovery(
                    site.parse().map_err(|_| bad(line, "bad site"))?,
                    time.parse().map_err(|_| bad(line, "bad time"))?,
                )),
                ["A", from, to, time] => marks.push(Mark::arrow(
                    from.parse().map_err(|_| bad(line, "bad site"))?,
                    to.parse().map_err(|_| bad(line, "bad site"))?,
                    time.parse().map_err(|_| bad(line, "bad time"))?,
                )),
                _ => return Err(bad(line, "unrecognised record")),
            }
        }
        let window = window.ok_or_else(|| bad(0, "missing `# window` header"))?;
        let mut log = Self::from_marks(window, marks)?;
        log.seed_record = seed_record;
        Ok(log)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub site: i64,
    pub time: f64,
}

impl SpaceTimePoint {
    pub fn new(site: i64, time: f64) -> Self {
        SpaceTimePoint { site, time }
    }
}

/// Finite set of infected sites, kept sorted and without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Configuration(Vec<i64>);

impl Configuration {
    pub fn empty() -> Self {
        Configuration(Vec::new())
    }

    pub fn singleton(x: i64) -> Self {
        Configuration(vec![x])
    }

    pub fn interval(lo: i64, hi: i64) -> Self {
        Configuration((lo..=hi).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn max(&self) -> Option<i64> {
        self.0.last().copied()
    }

    pub fn min(&self) -> Option<i64> {
        self.0.first().copied()
    }

    pub fn contains(&self, x: i64) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn sites(&self) -> &[i64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &Configuration) -> bool {
        self.0.iter().all(|x| other.contains(*x))
    }

    pub fn shifted(&self, by: i64) -> Configuration {
        Configuration(self.0.iter().map(|x| x + by).collect())
    }

    fn from_dense(window: &SiteWindow, dense: &[bool]) -> Self {
        Configuration(
            dense
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| window.lo + i as i64)
                .collect(),
        )
    }
}

impl FromIterator<i64> for Configuration {
    fn from_iter<I: IntoIterator<Item = i64>>(iter: I) -> Self {
        let mut v: Vec<i64> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Configuration(v)
    }
}

impl From<Vec<i64>> for Configuration {
    fn from(v: Vec<i64>) -> Self {
        v.into_iter().collect()
    }
}

/// The paper's `βt` convention: the smallest integer ≥ β·t (with a guard
/// against floating-point products such as 0.1·30 = 3.0000000000000004).
pub fn ceil_beta_t(beta: f64, t: f64) -> u64 {
    let x = beta * t;
    let r = x.round();
    let c = if (x - r).abs() <= 1e-9 * r.abs().max(1.0) { r } else { x.ceil() };
    (c as u64).max(1)
}

/// Default β: ⌈12λe⌉ + 1, the good-point threshold.
pub fn default_beta(lambda: f64) -> f64 {
    (12.0 * lambda * std::f64::consts::E).ceil() + 1.0
}

/// Samples the graphical construction restricted to `window`.
///
/// One recovery line per site (rate 1) and one arrow line per ordered
/// neighbour pair inside the window (rate λ); each line is generated from
/// exponential gaps and the lines are k-way merged in time order.
pub fn sample_event_log(window: SiteWindow, lambda: f64, seed: u64, stream: u64) -> Result<EventLog> {
    let window = SiteWindow::new(window.lo, window.hi, window.horizon)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    let mut rng = rng::stream_rng(seed, rng::job_id("event-log"), stream);
    let mut lines: Vec<Vec<Mark>> = Vec::with_capacity(3 * window.width());
    for x in window.sites() {
        lines.push(poisson_line(&mut rng, 1.0, window.horizon, |t| Mark::recovery(x, t)));
        if x > window.lo {
            lines.push(poisson_line(&mut rng, lambda, window.horizon, |t| Mark::arrow(x, x - 1, t)));
        }
        if x < window.hi {
            lines.push(poisson_line(&mut rng, lambda, window.horizon, |t| Mark::arrow(x, x + 1, t)));
        }
    }
    let marks: Vec<Mark> = lines
        .into_iter()
        .kmerge_by(|a, b| a.order(b) == Ordering::Less)
        .collect();
    Ok(EventLog::finish(window, marks, Some(SeedRecord { seed, stream })))
}

pub(crate) fn poisson_line(rng: &mut SimRng, rate: f64, horizon: f64, make: impl Fn(f64) -> Mark) -> Vec<Mark> {
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let gap: f64 = rng.sample(Exp1);
        t += gap / rate;
        if t > horizon {
            return out;
        }
        out.push(make(t));
    }
}

/// Result of a forward evolution: the reachable set plus the censoring flag
/// (the set occupied a window boundary site at some time).
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub configuration: Configuration,
    pub censored: bool,
}

fn check_sites(window: &SiteWindow, sites: impl IntoIterator<Item = i64>) -> Result<()> {
    for x in sites {
        if !window.contains(x) {
            return Err(Error::Precondition(format!("site {x} outside window [{}, {}]", window.lo, window.hi)));
        }
    }
    Ok(())
}

fn check_times(window: &SiteWindow, s: f64, t: f64) -> Result<()> {
    if !(0.0 <= s && s <= t && t <= window.horizon) {
        return Err(Error::Precondition(format!(
            "need 0 <= s <= t <= horizon, got s = {s}, t = {t}, horizon = {}",
            window.horizon
        )));
    }
    Ok(())
}

/// η^A_{s,t} = { x : (A × {s}) ⇝ (x, t) }.
pub fn evolve(start: &Configuration, log: &EventLog, s: f64, t: f64) -> Result<Evolution> {
    let w = log.window();
    check_times(w, s, t)?;
    check_sites(w, start.iter())?;
    let mut dense = vec![false; w.width()];
    let mut count = 0usize;
    let mut censored = false;
    for x in start.iter() {
        dense[w.index(x)] = true;
        count += 1;
        censored |= w.is_boundary(x);
    }
    for m in log.between(s, t) {
        if count == 0 {
            break;
        }
        match m.kind {
            MarkKind::Recovery { site } => {
                let i = w.index(site);
                if dense[i] {
                    dense[i] = false;
                    count -= 1;
                }
            }
            MarkKind::Arrow { from, to } => {
                if dense[w.index(from)] && !dense[w.index(to)] {
                    dense[w.index(to)] = true;
                    count += 1;
                    censored |= w.is_boundary(to);
                }
            }
        }
    }
    Ok(Evolution { configuration: Configuration::from_dense(w, &dense), censored })
}

/// A site held infected (as a source) during the closed time interval
/// [from, to]: every point of the segment starts open paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSegment {
    pub site: i64,
    pub from: f64,
    pub to: f64,
}

/// Sites reachable at time `t` from `start × {s}` together with every
/// point of the given vertical source segments.
pub fn evolve_with_segments(
    start: &Configuration,
    segments: &[SourceSegment],
    log: &EventLog,
    s: f64,
    t: f64,
) -> Result<Evolution> {
    let w = log.window();
    check_times(w, s, t)?;
    check_sites(w, start.iter().chain(segments.iter().map(|g| g.site)))?;
    let mut segs = segments.to_vec();
    segs.sort_by(|a, b| a.from.total_cmp(&b.from));
    let mut forced: Vec<Vec<(f64, f64)>> = vec![Vec::new(); w.width()];
    for g in &segs {
        forced[w.index(g.site)].push((g.from, g.to));
    }
    let covered = |x: i64, u: f64| forced[w.index(x)].iter().any(|&(a, b)| a <= u && u <= b);
    let mut dense = vec![false; w.width()];
    let mut censored = false;
    for x in start.iter() {
        dense[w.index(x)] = true;
        censored |= w.is_boundary(x);
    }
    let mut next_seg = 0;
    let activate = |dense: &mut Vec<bool>, upto: f64, next_seg: &mut usize| {
        let mut hit = false;
        while *next_seg < segs.len() && segs[*next_seg].from < upto {
            let g = segs[*next_seg];
            if g.to >= s {
                dense[w.index(g.site)] = true;
                hit |= w.is_boundary(g.site);
            }
            *next_seg += 1;
        }
        hit
    };
    for m in log.between(s, t) {
        censored |= activate(&mut dense, m.time, &mut next_seg);
        match m.kind {
            MarkKind::Recovery { site } => {
                if !covered(site, m.time) {
                    dense[w.index(site)] = false;
                }
            }
            MarkKind::Arrow { from, to } => {
                if dense[w.index(from)] && !dense[w.index(to)] {
                    dense[w.index(to)] = true;
                    censored |= w.is_boundary(to);
                }
            }
        }
    }
    censored |= activate(&mut dense, f64::INFINITY, &mut next_seg);
    for g in &segs {
        if g.from <= t && t <= g.to {
            dense[w.index(g.site)] = true;
        }
    }
    Ok(Evolution { configuration: Configuration::from_dense(w, &dense), censored })
}

/// Keeps every arrow independently with probability `keep`, using one
/// uniform per mark derived from `seed`. Logs thinned from the same parent
/// with the same seed are monotone in `keep`, which couples different λ.
pub fn thin_arrows(log: &EventLog, keep: f64, seed: u64) -> Result<EventLog> {
    if !(0.0..=1.0).contains(&keep) {
        return Err(Error::param("keep", format!("must lie in [0, 1], got {keep}")));
    }
    let job = rng::job_id("thinning");
    let marks = log
        .marks
        .iter()
        .enumerate()
        .filter(|(i, m)| match m.kind {
            MarkKind::Recovery { .. } => true,
            MarkKind::Arrow { .. } => {
                let u = (rng::derive_seed(rng::derive_seed(seed, job), *i as u64) >> 11) as f64
                    * (1.0 / (1u64 << 53) as f64);
                u < keep
            }
        })
        .map(|(_, m)| *m)
        .collect();
    Ok(EventLog { window: log.window, marks, seed_record: log.seed_record, tie_perturbed: log.tie_perturbed })
}

/// A change in a forward-reachable set: at `time`, `site` entered or left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachChange {
    pub time: f64,
    pub site: i64,
    pub added: bool,
}

/// Time-indexed forward-reachable sets, stored as a change list.
#[derive(Debug, Clone)]
pub struct ReachTrace {
    window: SiteWindow,
    t_end: f64,
    changes: Vec<ReachChange>,
    censored: bool,
}

impl ReachTrace {
    pub fn window(&self) -> &SiteWindow {
        &self.window
    }

    pub fn changes(&self) -> &[ReachChange] {
        &self.changes
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// The set ever contained a boundary site.
    pub fn censored(&self) -> bool {
        self.censored
    }

    /// {x : some source ⇝ (x, u)}.
    pub fn at(&self, u: f64) -> Configuration {
        let mut cursor = self.cursor();
        cursor.advance_to(u);
        cursor.configuration()
    }

    /// One slice per distinct change time, each the set right after that time.
    pub fn slices(&self) -> Vec<(f64, Configuration)> {
        let mut cursor = self.cursor();
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.changes.len() {
            let time = self.changes[i].time;
            cursor.advance_to(time);
            while i < self.changes.len() && self.changes[i].time <= time {
                i += 1;
            }
            out.push((time, cursor.configuration()));
        }
        out
    }

    pub fn cursor(&self) -> ReachCursor<'_> {
        ReachCursor {
            trace: self,
            next: 0,
            dense: vec![false; self.window.width()],
            count: 0,
        }
    }
}

/// Incremental replay of a [`ReachTrace`] in increasing time.
pub struct ReachCursor<'a> {
    trace: &'a ReachTrace,
    next: usize,
    dense: Vec<bool>,
    count: usize,
}

impl ReachCursor<'_> {
    /// Applies every change with time ≤ u.
    pub fn advance_to(&mut self, u: f64) {
        let w = self.trace.window;
        while let Some(c) = self.trace.changes.get(self.next) {
            if c.time > u {
                break;
            }
            let i = w.index(c.site);
            if self.dense[i] != c.added {
                self.dense[i] = c.added;
                if c.added {
                    self.count += 1;
                } else {
                    self.count -= 1;
                }
            }
            self.next += 1;
        }
    }

    pub fn contains(&self, x: i64) -> bool {
        let w = &self.trace.window;
        w.contains(x) && self.dense[w.index(x)]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::from_dense(&self.trace.window, &self.dense)
    }

    /// True if no site of `lo..=hi` is currently reachable.
    pub fn none_in(&self, lo: i64, hi: i64) -> bool {
        let w = &self.trace.window;
        let a = lo.max(w.lo);
        let b = hi.min(w.hi);
        (a..=b).all(|x| !self.dense[w.index(x)])
    }

    /// Largest reachable site, if any.
    pub fn max(&self) -> Option<i64> {
        let w = &self.trace.window;
        self.dense.iter().rposition(|&b| b).map(|i| w.lo + i as i64)
    }
}

/// Forward reachability from a set of space-time sources up to `t_end`.
pub fn reach_forward(sources: &[SpaceTimePoint], log: &EventLog, t_end: f64) -> Result<ReachTrace> {
    let w = *log.window();
    check_times(&w, 0.0, t_end)?;
    check_sites(&w, sources.iter().map(|p| p.site))?;
    if let Some(p) = sources.iter().find(|p| !(p.time >= 0.0 && p.time <= t_end)) {
        return Err(Error::Precondition(format!("source time {} outside [0, {t_end}]", p.time)));
    }
    let mut sources = sources.to_vec();
    sources.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.site.cmp(&b.site)));
    let mut dense = vec![false; w.width()];
    let mut changes = Vec::new();
    let mut censored = false;
    let mut src = sources.iter().peekable();
    let insert = |dense: &mut Vec<bool>, changes: &mut Vec<ReachChange>, p: &SpaceTimePoint| {
        let i = w.index(p.site);
        if !dense[i] {
            dense[i] = true;
            changes.push(ReachChange { time: p.time, site: p.site, added: true });
        }
        w.is_boundary(p.site)
    };
    for m in log.between(0.0, t_end).iter().chain(std::iter::once(&Mark::recovery(w.lo, f64::INFINITY))) {
        while let Some(p) = src.next_if(|p| p.time < m.time) {
            censored |= insert(&mut dense, &mut changes, p);
        }
        if m.time == f64::INFINITY {
            break;
        }
        match m.kind {
            MarkKind::Recovery { site } => {
                let i = w.index(site);
                if dense[i] {
                    dense[i] = false;
                    changes.push(ReachChange { time: m.time, site, added: false });
                }
            }
            MarkKind::Arrow { from, to } => {
                if dense[w.index(from)] && !dense[w.index(to)] {
                    dense[w.index(to)] = true;
                    changes.push(ReachChange { time: m.time, site: to, added: true });
                    censored |= w.is_boundary(to);
                }
            }
        }
    }
    // Sources at times equal to t_end sit after every mark ≤ t_end; nothing
    // left to insert once the sentinel drained them.
    Ok(ReachTrace { window: w, t_end, changes, censored })
}

/// Backward reachability to the line L_t.
#[derive(Debug, Clone)]
pub struct BackwardReach {
    window: SiteWindow,
    t: f64,
    toggles: Vec<Vec<f64>>,
    boundary_toggles: Vec<Vec<f64>>,
}

impl BackwardReach {
    fn state(toggles: &[Vec<f64>], w: &SiteWindow, x: i64, s: f64) -> bool {
        // Toggle times are stored in decreasing order; a toggle at u flips
        // the state for every s < u.
        let ts = &toggles[w.index(x)];
        let flips = ts.partition_point(|&u| u > s);
        flips % 2 == 0
    }

    /// (x, s) ⇝ L_t inside the window, using marks in (s, t].
    pub fn contains(&self, x: i64, s: f64) -> bool {
        self.window.contains(x) && s <= self.t && Self::state(&self.toggles, &self.window, x, s)
    }

    /// (x, s) can reach a boundary column of the window before time t, so the
    /// windowed answer might differ from the one on all of ℤ.
    pub fn uncertain(&self, x: i64, s: f64) -> bool {
        self.window.contains(x) && Self::boundary_state(&self.boundary_toggles, &self.window, x, s)
    }

    fn boundary_state(toggles: &[Vec<f64>], w: &SiteWindow, x: i64, s: f64) -> bool {
        let ts = &toggles[w.index(x)];
        let flips = ts.partition_point(|&u| u > s);
        let initial = w.is_boundary(x);
        initial ^ (flips % 2 == 1)
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

/// Reversed-time sweep: recovery marks kill backward reachability below
/// them, arrows x→y propagate it from y to x.
pub fn reach_backward(log: &EventLog, t: f64) -> Result<BackwardReach> {
    let w = *log.window();
    check_times(&w, 0.0, t)?;
    let n = w.width();
    let mut live = vec![true; n];
    let mut toggles = vec![Vec::new(); n];
    // Points that can reach a boundary column strictly before time t.
    let mut hit = vec![false; n];
    hit[0] = true;
    hit[n - 1] = true;
    let mut boundary_toggles = vec![Vec::new(); n];
    for m in log.between(0.0, t).iter().rev() {
        match m.kind {
            MarkKind::Recovery { site } => {
                let i = w.index(site);
                if live[i] {
                    live[i] = false;
                    toggles[i].push(m.time);
                }
                if hit[i] && !w.is_boundary(site) {
                    hit[i] = false;
                    boundary_toggles[i].push(m.time);
                }
            }
            MarkKind::Arrow { from, to } => {
                let (i, j) = (w.index(from), w.index(to));
                if !live[i] && live[j] {
                    live[i] = true;
                    toggles[i].push(m.time);
                }
                if !hit[i] && hit[j] {
                    hit[i] = true;
                    boundary_toggles[i].push(m.time);
                }
            }
        }
    }
    Ok(BackwardReach { window: w, t, toggles, boundary_toggles })
}

/// Maximum number of jumps of a λ-path started at (z, s) during [s, s+t].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct JumpCount {
    pub max: u64,
    /// A site with a positive jump count sat on the window boundary.
    pub censored: bool,
}

pub fn max_jump_count(z: i64, s: f64, log: &EventLog, t: f64) -> Result<JumpCount> {
    let w = log.window();
    check_times(w, s, s + t)?;
    check_sites(w, [z])?;
    let mut jumps: Vec<i64> = vec![-1; w.width()];
    jumps[w.index(z)] = 0;
    let mut best = 0;
    let mut censored = false;
    for m in log.between(s, s + t) {
        if let MarkKind::Arrow { from, to } = m.kind {
            let jf = jumps[w.index(from)];
            if jf >= 0 {
                let j = &mut jumps[w.index(to)];
                if jf + 1 > *j {
                    *j = jf + 1;
                    best = best.max(*j);
                    censored |= w.is_boundary(to);
                }
            }
        }
    }
    Ok(JumpCount { max: best as u64, censored })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Goodness {
    Good,
    NotGood,
    /// The window was too small to decide.
    Censored,
}

impl Goodness {
    pub fn is_good(self) -> bool {
        self == Goodness::Good
    }
}

/// G^s_z: every λ-path from (z, s) makes fewer than ⌈βt⌉ jumps in [s, s+t].
pub fn is_good(z: i64, s: f64, log: &EventLog, beta: f64, t: f64) -> Result<Goodness> {
    if !(beta > 0.0) {
        return Err(Error::param("beta", format!("must be positive, got {beta}")));
    }
    let jc = max_jump_count(z, s, log, t)?;
    let threshold = ceil_beta_t(beta, t);
    Ok(if jc.max >= threshold {
        Goodness::NotGood
    } else if jc.censored {
        Goodness::Censored
    } else {
        Goodness::Good
    })
}

/// Ĝ^s_z = G^s_z ∩ G^s_{z+2⌈βt⌉}.
pub fn is_good_pair(z: i64, s: f64, log: &EventLog, beta: f64, t: f64) -> Result<Goodness> {
    let partner = z + 2 * ceil_beta_t(beta, t) as i64;
    let a = is_good(z, s, log, beta, t)?;
    let b = is_good(partner, s, log, beta, t)?;
    Ok(match (a, b) {
        (Goodness::NotGood, _) | (_, Goodness::NotGood) => Goodness::NotGood,
        (Goodness::Censored, _) | (_, Goodness::Censored) => Goodness::Censored,
        _ => Goodness::Good,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn win(lo: i64, hi: i64, h: f64) -> SiteWindow {
        SiteWindow::new(lo, hi, h).unwrap()
    }

    #[test]
    fn window_validation() {
        assert!(SiteWindow::new(1, 0, 1.0).is_err());
        assert!(SiteWindow::new(0, 0, 0.0).is_err());
        assert!(sample_event_log(win(0, 3, 1.0), 0.0, 1, 0).is_err());
    }

    #[test]
    fn single_site_window_has_only_recoveries() {
        let log = sample_event_log(win(0, 0, 50.0), 2.0, 11, 0).unwrap();
        assert!(log.marks().iter().all(|m| matches!(m.kind, MarkKind::Recovery { site: 0 })));
        assert!(!log.is_empty());
    }

    #[test]
    fn sampled_logs_are_deterministic_and_sorted() {
        let a = sample_event_log(win(-4, 4, 3.0), 0.7, 5, 2).unwrap();
        let b = sample_event_log(win(-4, 4, 3.0), 0.7, 5, 2).unwrap();
        let c = sample_event_log(win(-4, 4, 3.0), 0.7, 5, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.marks().windows(2).all(|p| p[0].time < p[1].time));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let log = sample_event_log(win(-3, 2, 2.5), 0.9, 42, 1).unwrap();
        let back = EventLog::from_text(&log.to_text()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn ties_are_perturbed_and_flagged() {
        let log = EventLog::from_marks(
            win(0, 1, 1.0),
            vec![Mark::arrow(0, 1, 0.5), Mark::recovery(0, 0.5)],
        )
        .unwrap();
        assert!(log.tie_perturbed());
        assert!(matches!(log.marks()[0].kind, MarkKind::Recovery { site: 0 }));
        assert!(log.marks()[1].time > log.marks()[0].time);
    }

    #[test]
    fn bad_marks_are_rejected() {
        assert!(EventLog::from_marks(win(0, 2, 1.0), vec![Mark::arrow(0, 2, 0.1)]).is_err());
        assert!(EventLog::from_marks(win(0, 2, 1.0), vec![Mark::arrow(2, 3, 0.1)]).is_err());
        assert!(EventLog::from_marks(win(0, 2, 1.0), vec![Mark::recovery(1, 1.5)]).is_err());
    }

    #[test]
    fn evolve_hand_cases() {
        let w = win(-2, 2, 1.0);
        let empty = EventLog::from_marks(w, vec![]).unwrap();
        assert!(evolve(&Configuration::empty(), &empty, 0.0, 1.0).unwrap().configuration.is_empty());
        assert_eq!(
            evolve(&Configuration::singleton(0), &empty, 0.0, 1.0).unwrap().configuration,
            Configuration::singleton(0)
        );
        let log = EventLog::from_marks(w, vec![Mark::arrow(0, 1, 0.2), Mark::recovery(0, 0.5)]).unwrap();
        let out = evolve(&Configuration::singleton(0), &log, 0.0, 1.0).unwrap();
        assert_eq!(out.configuration, Configuration::singleton(1));
        assert!(!out.censored);
        // marks at exactly s are not applied
        assert_eq!(
            evolve(&Configuration::singleton(0), &log, 0.2, 1.0).unwrap().configuration,
            Configuration::empty()
        );
    }

    #[test]
    fn boundary_contact_is_censored() {
        let log = EventLog::from_marks(win(0, 2, 1.0), vec![Mark::arrow(1, 2, 0.3)]).unwrap();
        assert!(evolve(&Configuration::singleton(1), &log, 0.0, 1.0).unwrap().censored);
    }

    #[test]
    fn reach_forward_full_line_at_zero_is_whole_window() {
        let log = sample_event_log(win(-5, 5, 2.0), 0.5, 3, 0).unwrap();
        let sources: Vec<_> = (-5..=5).map(|x| SpaceTimePoint::new(x, 0.0)).collect();
        let trace = reach_forward(&sources, &log, 2.0).unwrap();
        assert_eq!(trace.at(0.0), Configuration::interval(-5, 5));
    }

    #[test]
    fn reach_backward_with_one_recovery() {
        let log = EventLog::from_marks(win(-2, 2, 1.0), vec![Mark::recovery(0, 0.4)]).unwrap();
        let b = reach_backward(&log, 1.0).unwrap();
        assert!(!b.contains(0, 0.1));
        assert!(b.contains(0, 0.4));
        assert!(b.contains(0, 0.7));
        assert!(b.contains(1, 0.1) && b.contains(-1, 0.0));
    }

    #[test]
    fn jump_count_hand_chain() {
        let log = EventLog::from_marks(
            win(-3, 3, 1.0),
            vec![Mark::arrow(0, 1, 0.1), Mark::arrow(1, 2, 0.2), Mark::arrow(1, 0, 0.3)],
        )
        .unwrap();
        let jc = max_jump_count(0, 0.0, &log, 1.0).unwrap();
        assert_eq!(jc, JumpCount { max: 2, censored: false });
        let none = EventLog::from_marks(win(-3, 3, 1.0), vec![Mark::recovery(0, 0.5)]).unwrap();
        assert_eq!(max_jump_count(0, 0.0, &none, 1.0).unwrap().max, 0);
    }

    #[test]
    fn goodness_saturation() {
        // β = 3, t = 1: threshold 3 jumps.
        let chain = EventLog::from_marks(
            win(-6, 6, 1.0),
            vec![Mark::arrow(0, 1, 0.1), Mark::arrow(1, 2, 0.2), Mark::arrow(2, 3, 0.3)],
        )
        .unwrap();
        assert_eq!(is_good(0, 0.0, &chain, 3.0, 1.0).unwrap(), Goodness::NotGood);
        assert_eq!(is_good(0, 0.0, &chain, 3.5, 1.0).unwrap(), Goodness::Good);
        let empty = EventLog::from_marks(win(-6, 12, 1.0), vec![]).unwrap();
        assert_eq!(is_good_pair(0, 0.0, &empty, 3.0, 1.0).unwrap(), Goodness::Good);
    }

    #[test]
    fn ceil_convention() {
        assert_eq!(ceil_beta_t(0.1, 30.0), 3);
        assert_eq!(ceil_beta_t(18.0, 2.0), 36);
        assert_eq!(ceil_beta_t(1.5, 3.1), 5);
        assert_eq!(default_beta(0.5), 18.0);
    }
}
