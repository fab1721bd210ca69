//! Parameter grids, parallel replica runs and result emission.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::environment::{gen_comb_geometric, gen_ladder_markov, gen_pareto_iid, TrapEnvironment};
use crate::error::Error;
use crate::estimators::{estimate_speed, sublinearity, SpeedEstimate};
use crate::holding_times::HoldingTimeModel;
use crate::rng_streams::{Channel, StreamFamily};
use crate::trap_formulas::{speed_example1, speed_example2, speed_example2_crit, speed_example3};
use crate::walk_engine::{run_comb_graph, run_ladder_graph, run_reduced, RunOptions, WalkRun, WalkSeeds};

/// Bit-exact CSV header of the results table.
pub const CSV_HEADER: &str = "model,lambda,alpha,q,lambda_crit,steps,replicas,seed,v_hat,ci_low,ci_high,v_theory,rel_err,regime,wallclock_ms";

/// The early horizon of the sublinearity diagnostic is `steps / SUBLINEAR_SPAN`.
pub const SUBLINEAR_SPAN: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Bouchaud,
    CombReduced,
    CombGraph,
    LadderReduced,
    LadderGraph,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Bouchaud => "bouchaud",
            Model::CombReduced => "comb_reduced",
            Model::CombGraph => "comb_graph",
            Model::LadderReduced => "ladder_reduced",
            Model::LadderGraph => "ladder_graph",
        }
    }

    fn uses_q(&self) -> bool {
        !matches!(self, Model::Bouchaud)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.trim() {
            "bouchaud" => Model::Bouchaud,
            "comb_reduced" => Model::CombReduced,
            "comb_graph" => Model::CombGraph,
            "ladder_reduced" => Model::LadderReduced,
            "ladder_graph" => Model::LadderGraph,
            other => return Err(format!("unknown model `{other}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" | "jsonlines" => Ok(OutputFormat::Jsonl),
            other => Err(format!("unknown format `{other}` (csv|jsonl)")),
        }
    }
}

/// A configuration problem, pointing at the offending field and, for
/// config files, the line.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{}{field}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(line: Option<usize>, field: &str, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// A simulation failure attributed to the grid point that produced it.
#[derive(Debug, thiserror::Error)]
#[error("grid point {point}: {source}")]
pub struct RunError {
    pub point: GridPoint,
    pub source: Error,
}

/// Parses a grid: `a,b,c` or the inclusive range `start:stop:step`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty grid".into());
    }
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range `{text}` must be start:stop:step"));
        }
        let nums = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || stop < start {
            return Err(format!("range `{text}` needs step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as u64 + 1;
        if count > 1_000_000 {
            return Err(format!("range `{text}` has {count} points"));
        }
        Ok((0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect())
    } else {
        text.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
            .collect()
    }
}

/// Integer that may be written in scientific notation (`1e7`).
fn parse_count(text: &str) -> Result<u64, String> {
    let t = text.trim();
    if let Ok(v) = t.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = t.parse().map_err(|_| format!("`{t}` is not a count"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
        Ok(f as u64)
    } else {
        Err(format!("`{t}` is not a non-negative integer"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub models: Vec<Model>,
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub qs: Vec<f64>,
    pub lambda_crit: Option<f64>,
    pub steps: u64,
    pub replicas: usize,
    pub seed: u64,
    pub format: OutputFormat,
    /// Worker threads; `None` lets the pool pick.
    pub threads: Option<usize>,
    /// Fill the `wallclock_ms` column. Off by default so that output is a
    /// pure function of the configuration.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            models: vec![Model::Bouchaud],
            lambdas: vec![0.5],
            alphas: vec![2.0],
            qs: vec![0.5],
            lambda_crit: None,
            steps: 1_000_000,
            replicas: 16,
            seed: 1,
            format: OutputFormat::Csv,
            threads: None,
            timing: false,
        }
    }
}

/// Raw `key = value` settings with the line each came from (`None` for
/// command-line overrides).
#[derive(Clone, Debug, Default)]
pub struct Settings {
    entries: BTreeMap<String, (String, Option<usize>)>,
}

pub const CONFIG_KEYS: &[&str] = &[
    "model",
    "lambda",
    "alpha",
    "q",
    "lambda_crit",
    "steps",
    "replicas",
    "seed",
    "threads",
    "format",
    "out",
    "timing",
];

impl Settings {
    /// Parses a flat `key = value` file; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::new(Some(i + 1), line, "expected `key = value`"))?;
            let key = key.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::new(Some(i + 1), &key, "unknown key"));
            }
            s.entries.insert(key, (value.trim().to_string(), Some(i + 1)));
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.replace('-', "_"), (value.into(), None));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn field<T>(
        &self,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => parse(v).map(Some).map_err(|m| ConfigError::new(*line, key, m)),
        }
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|(_, l)| *l)
    }

    pub fn into_config(self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(models) = self.field("model", |v| {
            v.split(',').map(Model::from_str).collect::<Result<Vec<_>, _>>()
        })? {
            cfg.models = models;
        }
        if let Some(l) = self.field("lambda", parse_grid)? {
            cfg.lambdas = l;
        }
        let alpha = self.field("alpha", parse_grid)?;
        if let Some(q) = self.field("q", parse_grid)? {
            cfg.qs = q;
        }
        cfg.lambda_crit = self.field("lambda_crit", |v| {
            v.trim().parse::<f64>().map_err(|e| e.to_string())
        })?;
        if let Some(n) = self.field("steps", parse_count)? {
            cfg.steps = n;
        }
        if let Some(n) = self.field("replicas", parse_count)? {
            cfg.replicas = n as usize;
        }
        if let Some(n) = self.field("seed", parse_count)? {
            cfg.seed = n;
        }
        if let Some(f) = self.field("format", OutputFormat::from_str)? {
            cfg.format = f;
        }
        cfg.threads = self
            .field("threads", |v| {
                if v.trim() == "auto" {
                    Ok(None)
                } else {
                    parse_count(v).map(|n| Some(n as usize))
                }
            })?
            .flatten();
        if let Some(t) = self.field("timing", |v| v.trim().parse::<bool>().map_err(|e| e.to_string()))? {
            cfg.timing = t;
        }
        match (alpha, cfg.lambda_crit) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(
                    self.line("alpha"),
                    "alpha",
                    "give either alpha or lambda_crit, not both",
                ))
            }
            (Some(a), None) => cfg.alphas = a,
            (None, Some(_)) => cfg.alphas = Vec::new(),
            (None, None) => {}
        }
        cfg.validate_with(&self)?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with(&Settings::default())
    }

    fn validate_with(&self, s: &Settings) -> Result<(), ConfigError> {
        let err = |key: &str, msg: String| Err(ConfigError::new(s.line(key), key, msg));
        if self.models.is_empty() {
            return err("model", "no model given".into());
        }
        if self.lambdas.is_empty() {
            return err("lambda", "empty grid".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return err("lambda", format!("{l} is not > 0"));
        }
        if let Some(c) = self.lambda_crit {
            if !(c.is_finite() && c > 0.0) {
                return err("lambda_crit", format!("{c} is not > 0"));
            }
            if self.models.iter().any(|m| *m != Model::Bouchaud) {
                return err("lambda_crit", "only the bouchaud model takes lambda_crit".into());
            }
        } else {
            if self.alphas.is_empty() {
                return err("alpha", "empty grid".into());
            }
            if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
                return err("alpha", format!("{a} is not > 0"));
            }
        }
        if self.models.iter().any(Model::uses_q) {
            if self.qs.is_empty() {
                return err("q", "empty grid".into());
            }
            if let Some(q) = self.qs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
                return err("q", format!("{q} is not in (0,1)"));
            }
        }
        if self.steps < SUBLINEAR_SPAN {
            return err("steps", format!("need at least {SUBLINEAR_SPAN} steps"));
        }
        if self.replicas < 2 {
            return err("replicas", "need at least 2 replicas".into());
        }
        if self.threads == Some(0) {
            return err("threads", "must be >= 1 or auto".into());
        }
        Ok(())
    }

    /// Grid points in output order: model, then λ, α, q.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &model in &self.models {
            for &lambda in &self.lambdas {
                let alphas: Vec<f64> = match self.lambda_crit {
                    Some(c) => vec![c / lambda],
                    None => self.alphas.clone(),
                };
                for alpha in alphas {
                    let qs: Vec<Option<f64>> = if model.uses_q() {
                        self.qs.iter().copied().map(Some).collect()
                    } else {
                        vec![None]
                    };
                    for q in qs {
                        out.push(GridPoint {
                            model,
                            lambda,
                            alpha,
                            q,
                            lambda_crit: self.lambda_crit,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub model: Model,
    pub lambda: f64,
    pub alpha: f64,
    pub q: Option<f64>,
    pub lambda_crit: Option<f64>,
}

impl fmt::Display for GridPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} lambda={} alpha={}", self.model, self.lambda, self.alpha)?;
        if let Some(q) = self.q {
            write!(f, " q={q}")?;
        }
        Ok(())
    }
}

impl GridPoint {
    pub fn v_theory(&self) -> f64 {
        let q = self.q.unwrap_or(0.5);
        match self.model {
            Model::Bouchaud => match self.lambda_crit {
                Some(c) => speed_example2_crit(self.lambda, c),
                None => speed_example2(self.lambda, self.alpha),
            },
            Model::CombReduced | Model::CombGraph => speed_example1(self.lambda, self.alpha, q),
            Model::LadderReduced | Model::LadderGraph => speed_example3(self.lambda, self.alpha, q),
        }
    }

    pub fn zero_speed(&self) -> bool {
        match self.model {
            Model::Bouchaud => self.alpha <= 1.0,
            _ => self.lambda >= self.alpha / 2.0,
        }
    }

    /// Environment of one replica, seeded by `(seed, replica)` alone.
    pub fn environment(&self, seed: u64, replica: u64) -> Result<TrapEnvironment, Error> {
        let fam = StreamFamily::new(seed, replica, Channel::Env);
        let q = self.q.unwrap_or(0.5);
        match self.model {
            Model::Bouchaud => gen_pareto_iid(self.alpha, 0..1, fam),
            Model::CombReduced | Model::CombGraph => gen_comb_geometric(self.alpha, q, self.lambda, 0..1, fam),
            Model::LadderReduced | Model::LadderGraph => gen_ladder_markov(self.alpha, q, self.lambda, 0..1, fam),
        }
    }

    /// Runs replica `replica` for `steps` (backbone steps for the reduced
    /// models, graph steps for the explicit graphs) and returns the run with
    /// its environment.
    pub fn simulate(
        &self,
        steps: u64,
        seed: u64,
        replica: u64,
        opts: &RunOptions,
    ) -> Result<(WalkRun, TrapEnvironment), Error> {
        let mut env = self.environment(seed, replica)?;
        let seeds = WalkSeeds::new(seed, replica);
        let q = self.q.unwrap_or(0.5);
        let opts = RunOptions {
            stop: crate::walk_engine::StopRule::Steps(steps),
            ..opts.clone()
        };
        let run = match self.model {
            Model::Bouchaud => run_reduced(&mut env, HoldingTimeModel::Exponential, self.lambda, &opts, seeds)?,
            Model::CombReduced | Model::LadderReduced => {
                let hold = HoldingTimeModel::trap_compound(self.lambda, q)?;
                run_reduced(&mut env, hold, self.lambda, &opts, seeds)?
            }
            Model::CombGraph => run_comb_graph(&mut env, self.lambda, q, steps, &opts, seeds)?,
            Model::LadderGraph => run_ladder_graph(&mut env, self.lambda, q, steps, &opts, seeds)?,
        };
        Ok((run, env))
    }

    /// Replicas `0..replicas` in parallel, returned in replica order.
    pub fn replicas(&self, steps: u64, replicas: usize, seed: u64, opts: &RunOptions) -> Result<Vec<WalkRun>, Error> {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| self.simulate(steps, seed, r, opts).map(|(run, _)| run))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub model: Model,
    pub lambda: f64,
    pub alpha: f64,
    pub q: Option<f64>,
    pub lambda_crit: Option<f64>,
    pub steps: u64,
    pub replicas: usize,
    pub seed: u64,
    pub v_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub v_theory: f64,
    /// Relative error for positive-speed rows; the sublinearity ratio
    /// `v̂(T) / v̂(T/100)` for zero-speed rows.
    pub rel_err: f64,
    pub regime: &'static str,
    pub wallclock_ms: Option<u64>,
}

impl ResultRow {
    pub fn estimate(&self) -> SpeedEstimate {
        SpeedEstimate {
            v_hat: self.v_hat,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
            replicas: self.replicas,
            steps_per_replica: self.steps,
            v_theory: Some(self.v_theory),
            rel_err: Some(self.rel_err),
        }
    }
}

/// Simulates one grid point and summarises it as a row.
pub fn run_point(point: &GridPoint, cfg: &ExperimentConfig) -> Result<ResultRow, RunError> {
    let start = Instant::now();
    let opts = RunOptions::steps(cfg.steps).with_probes(vec![(cfg.steps / SUBLINEAR_SPAN) as f64]);
    let wrap = |source| RunError { point: *point, source };
    let runs = point.replicas(cfg.steps, cfg.replicas, cfg.seed, &opts).map_err(wrap)?;
    let v_theory = point.v_theory();
    let est = estimate_speed(&runs).map_err(wrap)?.with_theory(v_theory);
    let (regime, rel_err) = if point.zero_speed() {
        ("zero_speed", sublinearity(&runs).map_err(wrap)?.ratio)
    } else {
        ("positive_speed", est.rel_err.unwrap_or(f64::NAN))
    };
    Ok(ResultRow {
        model: point.model,
        lambda: point.lambda,
        alpha: point.alpha,
        q: point.q,
        lambda_crit: point.lambda_crit,
        steps: cfg.steps,
        replicas: cfg.replicas,
        seed: cfg.seed,
        v_hat: est.v_hat,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
        v_theory,
        rel_err,
        regime,
        wallclock_ms: cfg.timing.then(|| start.elapsed().as_millis() as u64),
    })
}

/// Runs every grid point, all replicas in one worker pool, rows in grid order.
pub fn run_experiments(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    let grid = cfg.grid();
    let work = || grid.par_iter().map(|p| run_point(p, cfg)).collect();
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(work),
        None => work(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_rows<W: Write>(rows: &[ResultRow], format: OutputFormat, mut out: W) -> io::Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.model,
                    r.lambda,
                    r.alpha,
                    opt(r.q),
                    opt(r.lambda_crit),
                    r.steps,
                    r.replicas,
                    r.seed,
                    r.v_hat,
                    r.ci_low,
                    r.ci_high,
                    r.v_theory,
                    r.rel_err,
                    r.regime,
                    r.wallclock_ms.map(|m| m.to_string()).unwrap_or_default(),
                )?;
            }
        }
        OutputFormat::Jsonl => {
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

/// One point of the drift-dependent Bouchaud speed curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub v_theory: f64,
    pub empirical: Option<SpeedEstimate>,
}

/// Simulation settings for the empirical column of the curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSimulation {
    /// Curve abscissae to simulate; other grid values get no empirical point.
    pub lambdas: Vec<f64>,
    pub steps: u64,
    pub replicas: usize,
    pub seed: u64,
}

impl CurveSimulation {
    fn wants(&self, lambda: f64) -> bool {
        self.lambdas.iter().any(|l| (l - lambda).abs() < 1e-9)
    }
}

/// `λ ↦ tanh(λ)(λ_crit − λ)⁺/λ_crit` on `grid`, optionally with simulated
/// Bouchaud speeds at `α = λ_crit/λ` for the requested positive-speed points.
pub fn speed_curve(
    lambda_crit: f64,
    grid: &[f64],
    sim: Option<&CurveSimulation>,
) -> Result<Vec<CurvePoint>, RunError> {
    grid.par_iter()
        .map(|&lambda| {
            let v_theory = speed_example2_crit(lambda, lambda_crit);
            let empirical = match sim {
                Some(s) if lambda > 0.0 && lambda < lambda_crit && s.wants(lambda) => {
                    let point = GridPoint {
                        model: Model::Bouchaud,
                        lambda,
                        alpha: lambda_crit / lambda,
                        q: None,
                        lambda_crit: Some(lambda_crit),
                    };
                    let wrap = |source| RunError { point, source };
                    let runs = point
                        .replicas(s.steps, s.replicas, s.seed, &RunOptions::steps(s.steps))
                        .map_err(wrap)?;
                    Some(estimate_speed(&runs).map_err(wrap)?.with_theory(v_theory))
                }
                _ => None,
            };
            Ok(CurvePoint {
                lambda,
                v_theory,
                empirical,
            })
        })
        .collect()
}

pub const CURVE_HEADER: &str = "lambda,v_theory,v_hat,ci_low,ci_high";

pub fn write_curve<W: Write>(points: &[CurvePoint], format: OutputFormat, mut out: W) -> io::Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(out, "{CURVE_HEADER}")?;
            for p in points {
                let e = p.empirical.as_ref();
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    p.lambda,
                    p.v_theory,
                    opt(e.map(|e| e.v_hat)),
                    opt(e.map(|e| e.ci_low)),
                    opt(e.map(|e| e.ci_high)),
                )?;
            }
        }
        OutputFormat::Jsonl => {
            for p in points {
                serde_json::to_writer(&mut out, p)?;
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.1, 0.2,0.5").unwrap(), vec![0.1, 0.2, 0.5]);
        let g = parse_grid("0:1:0.01").unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[7], 0.07);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(parse_grid("0.25:0.75:0.25").unwrap(), vec![0.25, 0.5, 0.75]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn counts_accept_scientific() {
        assert_eq!(parse_count("1e7").unwrap(), 10_000_000);
        assert_eq!(parse_count("250").unwrap(), 250);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn config_file_round() {
        let text = "# demo\nmodel = bouchaud, comb_graph\nlambda = 0.25:0.5:0.25\nalpha = 2\nq=0.5\nsteps = 1e4\nreplicas = 4\nseed = 9 # trailing\n";
        let cfg = Settings::parse(text).unwrap().into_config().unwrap();
        assert_eq!(cfg.models, vec![Model::Bouchaud, Model::CombGraph]);
        assert_eq!(cfg.lambdas, vec![0.25, 0.5]);
        assert_eq!(cfg.steps, 10_000);
        assert_eq!(cfg.seed, 9);
        let grid = cfg.grid();
        assert_eq!(grid.len(), 4);
        assert_eq!(grid[0].q, None);
        assert_eq!(grid[2].q, Some(0.5));
    }

    #[test]
    fn config_errors_name_line_and_field() {
        let e = Settings::parse("model = bouchaud\nlambda = 0.5\nwat = 3\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert_eq!(e.field, "wat");
        let e = Settings::parse("lambda = 0.5\nq = 1.5\nmodel = comb_graph\n")
            .unwrap()
            .into_config()
            .unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (Some(2), "q"));
        let e = Settings::parse("steps = many\n").unwrap().into_config().unwrap_err();
        assert_eq!(e.field, "steps");
        assert!(e.to_string().starts_with("line 1: steps:"));
        let e = Settings::parse("alpha = 2\nlambda_crit = 1\n").unwrap().into_config().unwrap_err();
        assert_eq!(e.field, "alpha");
        let e = Settings::parse("model = comb_graph\nlambda_crit = 1\n")
            .unwrap()
            .into_config()
            .unwrap_err();
        assert_eq!(e.field, "lambda_crit");
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut s = Settings::parse("lambda = 0.5\nreplicas = 4\n").unwrap();
        s.set("replicas", "8");
        s.set("lambda-crit", "1");
        let cfg = s.into_config().unwrap();
        assert_eq!(cfg.replicas, 8);
        assert_eq!(cfg.lambda_crit, Some(1.0));
        assert_eq!(cfg.grid()[0].alpha, 2.0);
    }

    #[test]
    fn theory_and_regime_per_model() {
        let p = GridPoint {
            model: Model::Bouchaud,
            lambda: 0.5,
            alpha: 2.0,
            q: None,
            lambda_crit: None,
        };
        assert!((p.v_theory() - 0.231_058_578_630_004_9).abs() < 1e-12);
        assert!(!p.zero_speed());
        let z = GridPoint {
            model: Model::CombGraph,
            lambda: 1.25,
            alpha: 2.0,
            q: Some(0.5),
            lambda_crit: None,
        };
        assert!(z.zero_speed());
        assert_eq!(z.v_theory(), 0.0);
    }

    #[test]
    fn small_grid_rows_and_formats() {
        let cfg = ExperimentConfig {
            models: vec![Model::Bouchaud, Model::CombGraph],
            lambdas: vec![0.5, 1.25],
            steps: 20_000,
            replicas: 3,
            ..ExperimentConfig::default()
        };
        let rows = run_experiments(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3].regime, "zero_speed");
        assert_eq!(rows[0].regime, "positive_speed");
        let mut csv = Vec::new();
        write_rows(&rows, OutputFormat::Csv, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        for line in text.lines() {
            assert_eq!(line.split(',').count(), 15);
        }
        assert!(text.lines().nth(1).unwrap().starts_with("bouchaud,0.5,2,,,20000,3,1,"));
        let mut jl = Vec::new();
        write_rows(&rows, OutputFormat::Jsonl, &mut jl).unwrap();
        let first: serde_json::Value = serde_json::from_str(String::from_utf8(jl).unwrap().lines().next().unwrap()).unwrap();
        assert_eq!(first["model"], "bouchaud");
        assert_eq!(first["q"], serde_json::Value::Null);
    }

    #[test]
    fn curve_endpoints() {
        let grid = parse_grid("0:1.2:0.1").unwrap();
        let pts = speed_curve(1.0, &grid, None).unwrap();
        assert_eq!(pts[0].v_theory, 0.0);
        assert!((pts[5].v_theory - 0.231_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(pts[10].v_theory, 0.0);
        assert_eq!(pts[12].v_theory, 0.0);
        let mut buf = Vec::new();
        write_curve(&pts, OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "0,0,,,");
    }
}
