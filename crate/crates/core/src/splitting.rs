//! Checkpointed multilevel splitting for survival events.
//!
//! A population of replicas is advanced stage by stage. After every stage
//! the dead replicas are replaced by uniform draws (with replacement) from
//! the survivors and the group weight is multiplied by survivors/population,
//! so the weight is an unbiased estimate of the survival probability.
//! Independent groups give jackknife standard errors.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::Parallelism;
use crate::rng::{self, SimRng};
use crate::stats::{self, Estimate};

/// A replica whose survival is the event being split on.
pub trait Walker: Clone + Send + Sync {
    /// Runs from `from` to `to`; false if the replica is dead at `to`.
    fn advance(&mut self, from: f64, to: f64, rng: &mut SimRng) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitConfig {
    pub population: usize,
    pub groups: usize,
    /// Initial checkpoint spacing.
    pub dt: f64,
    pub seed: u64,
    pub job: u64,
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.population < self.groups {
            return Err(Error::param("population", format!(
                "need population >= groups >= 1, got {} and {}", self.population, self.groups
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("checkpoint_dt", format!("must be positive, got {}", self.dt)));
        }
        Ok(())
    }

    fn group_size(&self) -> usize {
        self.population.div_ceil(self.groups)
    }
}

/// Survivor fraction below which the spacing is halved for the next stage.
pub const MIN_SURVIVOR_FRACTION: f64 = 0.2;
const GROW_FRACTION: f64 = 0.6;

#[derive(Debug, Clone)]
pub struct GroupRun<W> {
    /// Weight (survival estimate) at every requested checkpoint.
    pub weights_at: Vec<f64>,
    /// Final survivors; each carries weight `final_weight / survivors.len()`.
    pub survivors: Vec<W>,
    pub stage_times: Vec<f64>,
    pub survivor_counts: Vec<usize>,
    pub final_weight: f64,
}

#[derive(Debug, Clone)]
pub struct SplitRun<W> {
    pub config: SplitConfig,
    pub checkpoints: Vec<f64>,
    pub groups: Vec<GroupRun<W>>,
}

const RESAMPLE_STREAM: u64 = u64::MAX;

fn group_job(job: u64, group: usize) -> u64 {
    rng::derive_seed(job, group as u64 + 1)
}

fn run_group<W: Walker>(init: &W, checkpoints: &[f64], cfg: &SplitConfig, group: usize, par: &Parallelism) -> Result<GroupRun<W>> {
    let n = cfg.group_size();
    let job = group_job(cfg.job, group);
    let mut pop: Vec<W> = vec![init.clone(); n];
    let mut alive = vec![true; n];
    let mut resample_rng = rng::stream_rng(cfg.seed, job, RESAMPLE_STREAM);
    let mut weight = 1.0;
    let mut now = 0.0;
    let mut dt = cfg.dt;
    let mut next_cp = 0;
    let mut out = GroupRun {
        weights_at: Vec::with_capacity(checkpoints.len()),
        survivors: Vec::new(),
        stage_times: Vec::new(),
        survivor_counts: Vec::new(),
        final_weight: 0.0,
    };
    while next_cp < checkpoints.len() && checkpoints[next_cp] <= now {
        out.weights_at.push(weight);
        next_cp += 1;
    }
    let horizon = checkpoints.last().copied().unwrap_or(0.0);
    let mut stage = 0usize;
    while now < horizon {
        let target = (now + dt).min(checkpoints[next_cp]);
        let stage_id = stage as u64;
        let mut slots: Vec<(&mut W, &mut bool)> = pop.iter_mut().zip(alive.iter_mut()).collect();
        par.for_each_mut(&mut slots, |i, (w, a)| {
            let mut r = rng::stream_rng(cfg.seed, job, (stage_id << 32) | i as u64);
            **a = w.advance(now, target, &mut r);
        });
        let survivors: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
        let s = survivors.len();
        out.stage_times.push(target);
        out.survivor_counts.push(s);
        if s == 0 {
            return Err(Error::PopulationCollapse { stage, time: target });
        }
        weight *= s as f64 / n as f64;
        now = target;
        while next_cp < checkpoints.len() && checkpoints[next_cp] <= now {
            out.weights_at.push(weight);
            next_cp += 1;
        }
        let frac = s as f64 / n as f64;
        if now >= horizon {
            out.survivors = survivors.iter().map(|&i| pop[i].clone()).collect();
            break;
        }
        // Only dead slots are overwritten, so every source is still a survivor.
        for i in 0..n {
            if !alive[i] {
                let src = survivors[resample_rng.random_range(0..s)];
                pop[i] = pop[src].clone();
            }
        }
        alive.iter_mut().for_each(|a| *a = true);
        if frac < MIN_SURVIVOR_FRACTION {
            dt *= 0.5;
        } else if frac > GROW_FRACTION && dt < 4.0 * cfg.dt {
            dt *= 1.5;
        }
        stage += 1;
    }
    if out.stage_times.is_empty() {
        out.survivors = pop;
    }
    out.final_weight = weight;
    Ok(out)
}

/// Runs `cfg.groups` independent populations through every checkpoint
/// (sorted, positive; the last one is the horizon).
pub fn run<W: Walker>(init: &W, checkpoints: &[f64], cfg: SplitConfig, par: &Parallelism) -> Result<SplitRun<W>> {
    cfg.validate()?;
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] > w[1]) || checkpoints[0] < 0.0 {
        return Err(Error::param("t_grid", "checkpoints must be nonempty, nonnegative and sorted"));
    }
    let mut groups = Vec::with_capacity(cfg.groups);
    for g in 0..cfg.groups {
        groups.push(run_group(init, checkpoints, &cfg, g, par)?);
    }
    Ok(SplitRun { config: cfg, checkpoints: checkpoints.to_vec(), groups })
}

impl<W> SplitRun<W> {
    /// Survival probability at checkpoint `k`, averaged over groups.
    pub fn survival(&self, k: usize) -> Estimate {
        let ws: Vec<f64> = self.groups.iter().map(|g| g.weights_at[k]).collect();
        stats::mean_estimate(&ws)
    }

    pub fn final_survival(&self) -> Estimate {
        self.survival(self.checkpoints.len() - 1)
    }

    pub fn survivor_count(&self) -> usize {
        self.groups.iter().map(|g| g.survivors.len()).sum()
    }

    /// Kish effective sample size of the pooled final survivors.
    pub fn kish_ess(&self) -> f64 {
        let (mut s1, mut s2) = (0.0, 0.0);
        for g in &self.groups {
            let k = g.survivors.len() as f64;
            if k > 0.0 {
                let w = g.final_weight / k;
                s1 += g.final_weight;
                s2 += k * w * w;
            }
        }
        if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 }
    }

    /// Weighted average of a per-survivor statistic, pooled by ratio
    /// estimator, with a delete-one-group jackknife standard error.
    pub fn pooled<F: Fn(&W) -> f64>(&self, f: F) -> Estimate {
        self.pooled_ratio(f, |_| 1.0)
    }

    /// E[num | survival] / E[den | survival], each pooled over groups, with a
    /// delete-one-group jackknife standard error.
    pub fn pooled_ratio<F: Fn(&W) -> f64, G: Fn(&W) -> f64>(&self, num: F, den: G) -> Estimate {
        let per: Vec<(f64, f64)> = self
            .groups
            .iter()
            .map(|g| {
                let k = g.survivors.len() as f64;
                if k == 0.0 {
                    return (0.0, 0.0);
                }
                let a = g.survivors.iter().map(&num).sum::<f64>() / k;
                let b = g.survivors.iter().map(&den).sum::<f64>() / k;
                (g.final_weight * a, g.final_weight * b)
            })
            .collect();
        let (a, b) = per.iter().fold((0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
        let value = a / b;
        let loo: Vec<f64> = per.iter().map(|(ga, gb)| (a - ga) / (b - gb)).collect();
        Estimate::new(value, if per.len() > 1 { stats::jackknife_stderr(&loo) } else { f64::INFINITY })
    }
}
