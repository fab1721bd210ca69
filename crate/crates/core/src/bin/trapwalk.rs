use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use trapwalk::experiment::{
    parse_grid, run_experiments, speed_curve, write_curve, write_rows, ConfigError, CurveSimulation,
    ExperimentConfig, Settings,
};
use trapwalk::walk_engine::RunOptions;

/// Biased random walks in random trapping environments: simulate parameter
/// grids and compare empirical speeds with the closed forms.
#[derive(Parser, Debug)]
#[command(name = "trapwalk", version)]
struct Cli {
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bouchaud, comb_reduced, comb_graph, ladder_reduced, ladder_graph (comma list).
    #[arg(long)]
    model: Option<String>,
    /// Drift grid: `a,b,c` or `start:stop:step`.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// Bouchaud only: α = λ_crit / λ.
    #[arg(long = "lambda-crit")]
    lambda_crit: Option<String>,
    /// Steps per replica (backbone steps, or graph steps for *_graph).
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads, or `auto`.
    #[arg(long, env = "TRAPWALK_THREADS")]
    threads: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or jsonl.
    #[arg(long)]
    format: Option<String>,
    /// Emit the speed curve λ ↦ v̄(λ) for the given λ_crit over the λ grid.
    #[arg(long)]
    curve: bool,
    /// With --curve: λ values at which to add a simulated Bouchaud speed.
    #[arg(long)]
    overlay: Option<String>,
    /// Write the environment of replica 0 at the first grid point.
    #[arg(long = "dump-env")]
    dump_env: Option<PathBuf>,
    /// Write the log-spaced trace of replica 0 at the first grid point.
    #[arg(long = "dump-trace")]
    dump_trace: Option<PathBuf>,
    /// Fill the wallclock_ms column.
    #[arg(long)]
    timing: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn settings(cli: &Cli) -> Result<Settings, Failure> {
    let mut s = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            Settings::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => Settings::default(),
    };
    let flags = [
        ("model", &cli.model),
        ("lambda", &cli.lambda),
        ("alpha", &cli.alpha),
        ("q", &cli.q),
        ("lambda_crit", &cli.lambda_crit),
        ("steps", &cli.steps),
        ("replicas", &cli.replicas),
        ("seed", &cli.seed),
        ("threads", &cli.threads),
        ("format", &cli.format),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            s.set(key, v.clone());
        }
    }
    if let Some(out) = &cli.out {
        s.set("out", out.display().to_string());
    }
    if cli.timing {
        s.set("timing", "true");
    }
    Ok(s)
}

fn open(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(e: io::Error) -> Failure {
    Failure::Runtime(format!("write failed: {e}"))
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Failure::Runtime(e.to_string())),
        None => Ok(f()),
    }
}

fn curve(cli: &Cli, s: &Settings, out: Option<&Path>) -> Result<(), Failure> {
    let crit_text = s.get("lambda_crit").unwrap_or("1");
    let lambda_crit: f64 = crit_text
        .trim()
        .parse()
        .ok()
        .filter(|c: &f64| c.is_finite() && *c > 0.0)
        .ok_or_else(|| Failure::Config(format!("lambda_crit: `{crit_text}` is not > 0")))?;
    let grid = match s.get("lambda") {
        Some(g) => parse_grid(g).map_err(|m| Failure::Config(format!("lambda: {m}")))?,
        None => parse_grid(&format!("0:{}:0.01", 2.0 * lambda_crit)).expect("default grid"),
    };
    // Reuse the experiment parser for steps, replicas, seed, format, threads.
    let mut base = s.clone();
    base.set("lambda", "1");
    base.set("lambda_crit", lambda_crit.to_string());
    base.set("model", "bouchaud");
    let cfg = base.into_config()?;
    let sim = match &cli.overlay {
        Some(o) => Some(CurveSimulation {
            lambdas: parse_grid(o).map_err(|m| Failure::Config(format!("overlay: {m}")))?,
            steps: cfg.steps,
            replicas: cfg.replicas,
            seed: cfg.seed,
        }),
        None => None,
    };
    let points = with_pool(cfg.threads, || speed_curve(lambda_crit, &grid, sim.as_ref()))?
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut w = open(out)?;
    write_curve(&points, cfg.format, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn dumps(cli: &Cli, cfg: &ExperimentConfig) -> Result<(), Failure> {
    if cli.dump_env.is_none() && cli.dump_trace.is_none() {
        return Ok(());
    }
    let point = cfg.grid()[0];
    let (run, env) = point
        .simulate(cfg.steps, cfg.seed, 0, &RunOptions::steps(cfg.steps))
        .map_err(|e| Failure::Runtime(format!("grid point {point}: {e}")))?;
    if let Some(p) = &cli.dump_env {
        let mut w = open(Some(p))?;
        env.dump(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
    }
    if let Some(p) = &cli.dump_trace {
        let mut w = open(Some(p))?;
        run.write_trace(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let s = settings(&cli)?;
    let out = s.get("out").map(PathBuf::from);
    if cli.curve {
        return curve(&cli, &s, out.as_deref());
    }
    let cfg = s.into_config()?;
    let rows = run_experiments(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut w = open(out.as_deref())?;
    write_rows(&rows, cfg.format, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)?;
    with_pool(cfg.threads, || dumps(&cli, &cfg))?
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("trapwalk: config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("trapwalk: {m}");
            ExitCode::from(3)
        }
    }
}
