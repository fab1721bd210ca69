//! Speed estimates with uncertainty, and the regeneration-based
//! quantities (regeneration density, visit counts, site times).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::walk_engine::WalkRun;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

/// Floor on the theoretical speed when forming a relative error.
pub const REL_ERR_FLOOR: f64 = 1e-12;

/// Minimum resolved window for regeneration statistics.
pub const MIN_RESOLVED_SITES: u64 = 100_000;

/// Largest tolerated fraction of unresolved sites in a scan window.
pub const MAX_UNRESOLVED_FRACTION: f64 = 0.01;

pub const MIN_REGENERATIONS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedEstimate {
    pub v_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicas: usize,
    pub steps_per_replica: u64,
    pub v_theory: Option<f64>,
    pub rel_err: Option<f64>,
}

impl SpeedEstimate {
    /// Mean and normal-quantile 95% interval of independent samples.
    pub fn from_samples(samples: &[f64], steps_per_replica: u64) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::TooFewReplicas { needed: 2, got: n });
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let half = Z_95 * (var / n as f64).sqrt();
        Ok(SpeedEstimate {
            v_hat: mean,
            ci_low: mean - half,
            ci_high: mean + half,
            replicas: n,
            steps_per_replica,
            v_theory: None,
            rel_err: None,
        })
    }

    pub fn with_theory(mut self, v_theory: f64) -> Self {
        self.v_theory = Some(v_theory);
        self.rel_err = Some((self.v_hat - v_theory).abs() / v_theory.max(REL_ERR_FLOOR));
        self
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    pub fn covers(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }

    /// Whether two estimates differ by less than the sum of their half-widths.
    pub fn consistent_with(&self, other: &SpeedEstimate) -> bool {
        (self.v_hat - other.v_hat).abs() < self.half_width() + other.half_width()
    }
}

/// Mean over replicas of `X_T / T` with an across-replica 95% interval.
pub fn estimate_speed(runs: &[WalkRun]) -> Result<SpeedEstimate> {
    if let Some(bad) = runs.iter().find(|r| !(r.elapsed_clock > 0.0)) {
        return Err(crate::error::invalid(
            "runs",
            format!("replica with non-positive clock {}", bad.elapsed_clock),
        ));
    }
    let speeds: Vec<f64> = runs.iter().map(WalkRun::speed).collect();
    let steps = runs.first().map(|r| r.steps).unwrap_or(0);
    SpeedEstimate::from_samples(&speeds, steps)
}

/// Within-trace batch means over the run's recorded equal-width blocks.
pub fn batch_means_speed(run: &WalkRun) -> Result<SpeedEstimate> {
    let mut prev = (0i64, 0.0f64);
    let mut speeds = Vec::with_capacity(run.batch_marks.len());
    for m in &run.batch_marks {
        let dt = m.clock - prev.1;
        if dt > 0.0 {
            speeds.push((m.position - prev.0) as f64 / dt);
        }
        prev = (m.position, m.clock);
    }
    SpeedEstimate::from_samples(&speeds, run.steps)
}

fn check_window(run: &WalkRun, min_sites: u64) -> Result<()> {
    let scan = &run.regenerations;
    let resolved = scan.resolved();
    if resolved < min_sites.max(1) {
        return Err(Error::Unresolved(format!(
            "{resolved} resolved sites, need {min_sites}"
        )));
    }
    let frac = scan.unresolved as f64 / (resolved + scan.unresolved) as f64;
    if frac > MAX_UNRESOLVED_FRACTION {
        return Err(Error::Unresolved(format!(
            "{:.3}% of the window is unresolved",
            100.0 * frac
        )));
    }
    Ok(())
}

/// Fraction of resolved sites that are regeneration points.
pub fn estimate_regeneration_density(run: &WalkRun) -> Result<f64> {
    check_window(run, MIN_RESOLVED_SITES)?;
    let scan = &run.regenerations;
    Ok(scan.sites.len() as f64 / scan.resolved() as f64)
}

/// Site averages of visit counts `N_x` and occupation times `Z_x` over the
/// resolved windows `[0, resolved_end)` of all runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VisitStats {
    pub sites: u64,
    pub mean_visits: f64,
    pub mean_site_time: f64,
    /// Fraction of sites with `N_x ≥ 2`.
    pub frac_revisited: f64,
}

pub fn estimate_visits_and_site_time(runs: &[WalkRun]) -> Result<VisitStats> {
    let mut sites = 0u64;
    let mut visits = 0u64;
    let mut revisited = 0u64;
    let mut time = 0.0;
    for run in runs {
        check_window(run, 1)?;
        for x in 0..run.regenerations.resolved_end {
            let n = run.visit_counts.value(x);
            visits += n as u64;
            if n >= 2 {
                revisited += 1;
            }
            time += run.site_time.value(x);
        }
        sites += run.regenerations.resolved();
    }
    if sites == 0 {
        return Err(Error::Unresolved("no runs".into()));
    }
    Ok(VisitStats {
        sites,
        mean_visits: visits as f64 / sites as f64,
        mean_site_time: time / sites as f64,
        frac_revisited: revisited as f64 / sites as f64,
    })
}

/// `R / ϱ(R)` for the last resolved regeneration point `R`, where the
/// arrival time `ϱ(R)` is the total time spent at sites left of `R`.
pub fn estimate_speed_regenerative(run: &WalkRun) -> Result<f64> {
    let regs = &run.regenerations.sites;
    if regs.len() < MIN_REGENERATIONS {
        return Err(Error::Unresolved(format!(
            "{} regeneration points, need {MIN_REGENERATIONS}",
            regs.len()
        )));
    }
    let last = *regs.last().unwrap();
    let arrival: f64 = run
        .site_time
        .iter()
        .take_while(|&(x, _)| x < last)
        .map(|(_, t)| t)
        .sum();
    Ok(last as f64 / arrival)
}

/// Ratio of the pooled `X_T / T` at the final horizon to its value at the
/// first probe. Speeds that vanish in the limit show a ratio well below 1.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sublinearity {
    pub early_clock: f64,
    pub early_speed: f64,
    pub late_speed: f64,
    pub ratio: f64,
}

pub fn sublinearity(runs: &[WalkRun]) -> Result<Sublinearity> {
    if runs.is_empty() {
        return Err(Error::TooFewReplicas { needed: 1, got: 0 });
    }
    let mut early = 0.0;
    let mut early_clock = 0.0;
    for run in runs {
        let p = run
            .probes
            .first()
            .ok_or_else(|| crate::error::invalid("runs", "no probe recorded"))?;
        early += p.position as f64 / p.clock;
        early_clock += p.clock;
    }
    let n = runs.len() as f64;
    let early_speed = early / n;
    let late_speed = runs.iter().map(WalkRun::speed).sum::<f64>() / n;
    Ok(Sublinearity {
        early_clock: early_clock / n,
        early_speed,
        late_speed,
        ratio: late_speed / early_speed,
    })
}
