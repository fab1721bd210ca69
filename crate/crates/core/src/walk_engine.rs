//! Trajectory simulators: the time-changed backbone walk (reduced model)
//! and the explicit comb and ladder trap graphs.

use std::io::{self, Write};

use crate::environment::{EnvKind, TrapEnvironment};
use crate::error::{invalid, Error, Result};
use crate::holding_times::HoldingTimeModel;
use crate::rng_streams::{Channel, RandomStream, StreamFamily};
use crate::site_table::SiteTable;
use crate::trap_formulas::{p_esc, p_left, p_right};

/// Per-replica seed material for the walk's STEP, HOLD and TRAP channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkSeeds {
    pub master_seed: u64,
    pub replica: u64,
}

impl WalkSeeds {
    pub fn new(master_seed: u64, replica: u64) -> Self {
        WalkSeeds { master_seed, replica }
    }

    pub fn family(&self, channel: Channel) -> StreamFamily {
        StreamFamily::new(self.master_seed, self.replica, channel)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Stop on the n-th arrival of the backbone walk; the sojourn at the
    /// final site is still drawn and counted.
    Steps(u64),
    /// Stop when the clock reaches the given time, truncating the current
    /// sojourn.
    Clock(f64),
}

impl StopRule {
    fn horizon(&self) -> f64 {
        match *self {
            StopRule::Steps(n) => n as f64,
            StopRule::Clock(t) => t,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub stop: StopRule,
    /// Extra progress values (steps or clock, matching `stop`) at which the
    /// state is recorded.
    pub probes: Vec<f64>,
    /// Number of equal-width progress blocks recorded for batch means; 0 = off.
    pub batches: usize,
    /// Keep the full backbone path `Y_0, …, Y_n`.
    pub record_path: bool,
}

impl RunOptions {
    pub fn steps(n: u64) -> Self {
        RunOptions {
            stop: StopRule::Steps(n),
            probes: Vec::new(),
            batches: 0,
            record_path: false,
        }
    }

    pub fn clock(t: f64) -> Self {
        RunOptions {
            stop: StopRule::Clock(t),
            ..RunOptions::steps(0)
        }
    }

    pub fn with_probes(mut self, probes: Vec<f64>) -> Self {
        self.probes = probes;
        self
    }

    pub fn with_batches(mut self, batches: usize) -> Self {
        self.batches = batches;
        self
    }

    pub fn with_path(mut self) -> Self {
        self.record_path = true;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub step: u64,
    pub clock: f64,
    pub position: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelTag {
    Reduced,
    CombGraph,
    LadderGraph,
}

/// Sites that the walk, once there, never fell back to or below.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegenerationScan {
    /// Regeneration points in `[0, resolved_end)`, increasing.
    pub sites: Vec<i64>,
    /// Exclusive end of the resolved part of the scan window.
    pub resolved_end: i64,
    /// Visited sites at or beyond `resolved_end` whose status is undecided.
    pub unresolved: u64,
}

impl RegenerationScan {
    pub fn resolved(&self) -> u64 {
        self.resolved_end.max(0) as u64
    }
}

#[derive(Clone, Debug)]
pub struct WalkRun {
    pub model: ModelTag,
    pub lambda: f64,
    /// Backbone coordinate at the end of the run.
    pub final_position: i64,
    pub elapsed_clock: f64,
    /// Backbone steps taken.
    pub steps: u64,
    /// Arrivals per backbone site (the start counts as the first visit to 0).
    pub visit_counts: SiteTable<u32>,
    /// Total time spent at (or inside the trap of) each backbone site.
    pub site_time: SiteTable<f64>,
    pub regenerations: RegenerationScan,
    /// State at progress 1, 2, 4, 8, …
    pub trace: Vec<TracePoint>,
    pub probes: Vec<TracePoint>,
    pub batch_marks: Vec<TracePoint>,
    pub path: Option<Vec<i64>>,
}

impl WalkRun {
    /// `X_T / T`.
    pub fn speed(&self) -> f64 {
        self.final_position as f64 / self.elapsed_clock
    }

    pub fn total_visits(&self) -> u64 {
        self.visit_counts.iter().map(|(_, c)| c as u64).sum()
    }

    pub fn total_site_time(&self) -> f64 {
        self.site_time.iter().map(|(_, t)| t).sum()
    }

    /// Writes the log-spaced trace as `step<TAB>clock<TAB>position` lines.
    pub fn write_trace<W: Write>(&self, mut out: W) -> io::Result<()> {
        for p in &self.trace {
            writeln!(out, "{}\t{}\t{}", p.step, p.clock, p.position)?;
        }
        Ok(())
    }
}

/// Progress thresholds at which the state is recorded.
#[derive(Clone, Debug)]
struct Marks {
    at: Vec<f64>,
    next: usize,
    hits: Vec<TracePoint>,
}

impl Marks {
    fn new(mut at: Vec<f64>) -> Self {
        at.retain(|v| v.is_finite());
        at.sort_by(|a, b| a.partial_cmp(b).unwrap());
        at.dedup();
        Marks {
            at,
            next: 0,
            hits: Vec::new(),
        }
    }

    fn upcoming(&self) -> f64 {
        self.at.get(self.next).copied().unwrap_or(f64::INFINITY)
    }

    /// Records every threshold `≤ progress`; `clock` of `None` stamps the
    /// threshold itself as the clock value.
    fn take(&mut self, progress: f64, step: u64, clock: Option<f64>, position: i64) {
        while self.next < self.at.len() && self.at[self.next] <= progress {
            let c = clock.unwrap_or(self.at[self.next]);
            self.hits.push(TracePoint {
                step,
                clock: c,
                position,
            });
            self.next += 1;
        }
    }
}

struct Recorder {
    trace: Marks,
    probes: Marks,
    batches: Marks,
    upcoming: f64,
}

impl Recorder {
    fn new(opts: &RunOptions) -> Self {
        let horizon = opts.stop.horizon();
        let mut log = Vec::new();
        let mut t = 1.0;
        while t <= horizon {
            log.push(t);
            t *= 2.0;
        }
        let batches = (1..=opts.batches)
            .map(|i| horizon * i as f64 / opts.batches as f64)
            .collect();
        let mut r = Recorder {
            trace: Marks::new(log),
            probes: Marks::new(opts.probes.clone()),
            batches: Marks::new(batches),
            upcoming: 0.0,
        };
        r.refresh();
        r
    }

    fn refresh(&mut self) {
        self.upcoming = self
            .trace
            .upcoming()
            .min(self.probes.upcoming())
            .min(self.batches.upcoming());
    }

    #[inline]
    fn observe(&mut self, progress: f64, step: u64, clock: Option<f64>, position: i64) {
        if progress >= self.upcoming {
            self.trace.take(progress, step, clock, position);
            self.probes.take(progress, step, clock, position);
            self.batches.take(progress, step, clock, position);
            self.refresh();
        }
    }
}

/// One backbone step from `position` using the site/visit stream: left iff
/// `U ≤ e^{−λ}/(e^λ + e^{−λ})`.
pub fn step_backbone(position: i64, lambda: f64, stream: &mut RandomStream) -> i64 {
    step_with(position, p_left(lambda), stream.next_uniform())
}

#[inline(always)]
fn step_with(position: i64, p_left: f64, u: f64) -> i64 {
    if u <= p_left {
        position - 1
    } else {
        position + 1
    }
}

fn check_run(lambda: f64, opts: &RunOptions) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    match opts.stop {
        StopRule::Clock(t) if !(t.is_finite() && t > 0.0) => {
            Err(invalid("stop", format!("clock horizon must be > 0, got {t}")))
        }
        _ => Ok(()),
    }
}

/// Simulates `X_t`: the backbone walk `Y` with a sojourn of mean `w_x`
/// drawn at every arrival. The k-th arrival at `x` uses the STEP and HOLD
/// streams addressed by `(x, k)`.
pub fn run_reduced(
    env: &mut TrapEnvironment,
    hold: HoldingTimeModel,
    lambda: f64,
    opts: &RunOptions,
    seeds: WalkSeeds,
) -> Result<WalkRun> {
    check_run(lambda, opts)?;
    let step_fam = seeds.family(Channel::Step);
    let hold_fam = seeds.family(Channel::Hold);
    let sampler = hold.sampler();
    let p_left = p_left(lambda);
    let mut rec = Recorder::new(opts);
    let mut visits: SiteTable<u32> = SiteTable::new();
    let mut site_time: SiteTable<f64> = SiteTable::new();
    let mut path = opts.record_path.then(Vec::new);

    let mut pos = 0i64;
    let mut steps = 0u64;
    let mut clock = 0.0f64;
    loop {
        let k = {
            let slot = visits.slot(pos);
            *slot += 1;
            *slot as u64
        };
        if let Some(p) = path.as_mut() {
            p.push(pos);
        }
        let site = env.site(pos);
        let tau = sampler.sample(site, &mut hold_fam.stream(pos, k));
        match opts.stop {
            StopRule::Steps(n) => {
                rec.observe(steps as f64, steps, Some(clock), pos);
                clock += tau;
                *site_time.slot(pos) += tau;
                if steps >= n {
                    break;
                }
            }
            StopRule::Clock(t) => {
                if clock + tau >= t {
                    *site_time.slot(pos) += t - clock;
                    clock = t;
                    rec.observe(clock, steps, None, pos);
                    break;
                }
                clock += tau;
                *site_time.slot(pos) += tau;
                rec.observe(clock, steps, None, pos);
            }
        }
        if !clock.is_finite() {
            return Err(Error::ClockOverflow { steps });
        }
        let u = step_fam.stream(pos, k).next_uniform();
        pos = step_with(pos, p_left, u);
        steps += 1;
    }
    if !clock.is_finite() {
        return Err(Error::ClockOverflow { steps });
    }
    Ok(finish(
        ModelTag::Reduced,
        lambda,
        pos,
        clock,
        steps,
        visits,
        site_time,
        rec,
        path,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    model: ModelTag,
    lambda: f64,
    pos: i64,
    clock: f64,
    steps: u64,
    visit_counts: SiteTable<u32>,
    site_time: SiteTable<f64>,
    rec: Recorder,
    path: Option<Vec<i64>>,
) -> WalkRun {
    let mut run = WalkRun {
        model,
        lambda,
        final_position: pos,
        elapsed_clock: clock,
        steps,
        visit_counts,
        site_time,
        regenerations: RegenerationScan::default(),
        trace: rec.trace.hits,
        probes: rec.probes.hits,
        batch_marks: rec.batches.hits,
        path,
    };
    run.regenerations = detect_regenerations(&run, lambda);
    run
}

/// Full walk on the comb: backbone plus a vertical trap of length
/// `trap_len(x)` below every site. Each graph step advances the clock by 1
/// and the run stops after `horizon` graph steps.
pub fn run_comb_graph(
    env: &mut TrapEnvironment,
    lambda: f64,
    q: f64,
    horizon: u64,
    opts: &RunOptions,
    seeds: WalkSeeds,
) -> Result<WalkRun> {
    if !matches!(env.kind(), EnvKind::CombGeometric { .. } | EnvKind::Flat { .. }) {
        return Err(Error::ModelMismatch(format!(
            "comb graph needs a comb environment, got {}",
            env.kind().name()
        )));
    }
    run_trap_graph(env, lambda, q, horizon, opts, seeds, ModelTag::CombGraph)
}

/// Full walk on the ladder: the trap rooted at `x` occupies the cells below
/// `x, x+1, …, x+ℓ−1` and is entered only from `x`. Inside, moving right
/// (deeper) has probability `p_λ`; the dead end forces a left move and the
/// leftmost cell's left move returns to backbone site `x`. While inside a
/// trap the backbone coordinate is reported as the root `x`.
pub fn run_ladder_graph(
    env: &mut TrapEnvironment,
    lambda: f64,
    q: f64,
    horizon: u64,
    opts: &RunOptions,
    seeds: WalkSeeds,
) -> Result<WalkRun> {
    if !matches!(env.kind(), EnvKind::LadderMarkov { .. } | EnvKind::Flat { .. }) {
        return Err(Error::ModelMismatch(format!(
            "ladder graph needs a ladder environment, got {}",
            env.kind().name()
        )));
    }
    run_trap_graph(env, lambda, q, horizon, opts, seeds, ModelTag::LadderGraph)
}

/// Shared explicit trap-graph dynamics. `opts.stop` is ignored; progress
/// marks are in graph steps. All moves made during the k-th stay at
/// backbone site `x` draw from the TRAP stream `(x, k)`.
fn run_trap_graph(
    env: &mut TrapEnvironment,
    lambda: f64,
    q: f64,
    horizon: u64,
    opts: &RunOptions,
    seeds: WalkSeeds,
    model: ModelTag,
) -> Result<WalkRun> {
    check_run(lambda, opts)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid("q", format!("must lie in (0,1), got {q}")));
    }
    let opts = RunOptions {
        stop: StopRule::Clock(horizon as f64),
        ..opts.clone()
    };
    let trap_fam = seeds.family(Channel::Trap);
    let p_deeper = p_right(lambda);
    let p_left = p_left(lambda);
    let enter = 1.0 - q;
    let leave_left = enter + q * p_left;
    let mut rec = Recorder::new(&opts);
    let mut visits: SiteTable<u32> = SiteTable::new();
    let mut site_time: SiteTable<f64> = SiteTable::new();
    let mut path = opts.record_path.then(Vec::new);

    let mut pos = 0i64;
    let mut steps = 0u64;
    let mut clock = 0u64;
    'walk: loop {
        let k = {
            let slot = visits.slot(pos);
            *slot += 1;
            *slot as u64
        };
        if let Some(p) = path.as_mut() {
            p.push(pos);
        }
        let len = env.site(pos).trap_len;
        let mut s = trap_fam.stream(pos, k);
        let arrived = clock;
        let dir = loop {
            if clock >= horizon {
                *site_time.slot(pos) += (clock - arrived) as f64;
                break 'walk;
            }
            let u = s.next_uniform();
            clock += 1;
            rec.observe(clock as f64, steps, None, pos);
            if len == 0 {
                break if u <= p_left { -1 } else { 1 };
            }
            if u >= enter {
                break if u < leave_left { -1 } else { 1 };
            }
            // inside the trap, at depth 1
            let mut depth = 1u32;
            while depth > 0 {
                if clock >= horizon {
                    *site_time.slot(pos) += (clock - arrived) as f64;
                    break 'walk;
                }
                if depth < len && s.next_uniform() < p_deeper {
                    depth += 1;
                } else {
                    depth -= 1;
                }
                clock += 1;
                rec.observe(clock as f64, steps, None, pos);
            }
        };
        *site_time.slot(pos) += (clock - arrived) as f64;
        pos += dir;
        steps += 1;
    }
    Ok(finish(
        model,
        lambda,
        pos,
        clock as f64,
        steps,
        visits,
        site_time,
        rec,
        path,
    ))
}

/// Distance to the right of the walk's final position beyond which a
/// site's regeneration status is treated as final: the return probability
/// from there is `e^{−128 λ / tanh λ} < 1e−12`.
pub fn regeneration_margin(lambda: f64) -> i64 {
    if lambda <= 0.0 {
        return i64::MAX / 4;
    }
    (64.0 / p_esc(lambda)).ceil() as i64
}

/// Regeneration points of the backbone walk in `[0, final − margin]`.
///
/// The walk is nearest-neighbour and starts at 0, so for `x ≥ 0` it never
/// goes back to `≤ x` after first reaching `x` exactly when `x` is visited
/// once.
pub fn detect_regenerations(run: &WalkRun, lambda: f64) -> RegenerationScan {
    let margin = regeneration_margin(lambda);
    let max_visited = run.visit_counts.range().end - 1;
    let resolved_end = (run.final_position.saturating_sub(margin) + 1).clamp(0, max_visited + 1);
    let sites = (0..resolved_end)
        .filter(|&x| run.visit_counts.value(x) == 1)
        .collect();
    let unresolved = (max_visited + 1 - resolved_end).max(0) as u64;
    RegenerationScan {
        sites,
        resolved_end,
        unresolved,
    }
}
