//! Command line front end. Three modes over a scenario (built-in name or
//! TOML file): `bounds` computes the sharpest lower and upper bounds on the
//! scenario's event, `rbdo` runs the design loop, and `check` validates the
//! document and reports diagnostics.
//!
//! Exit codes: 0 on success, 2 when a design run proves infeasible at the
//! given budget, 1 for every error. Results are a single JSON document on
//! stdout (or `--out`); the timestamp is the only volatile key, so two runs
//! with equal inputs produce byte-identical output once that key is masked.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use polyuq::bounds::{sharpest_bound, BoundResult, BoundSide};
use polyuq::model::UQProblem;
use polyuq::optimizer::{OptimizerConfig, Strategy};
use polyuq::rbdo::{self, DesignEvaluation, DesignProblem, InnerConfigs, VariableKind};
use polyuq::sampling::{mix_seed, EstimatorConfig};
use polyuq::scenario::Scenario;

/// Bisection depth of the automatic scalar outer loop: resolves the design
/// domain to width / 2^18 (for the column benchmark, below a micrometre).
const BISECTION_DEPTH: usize = 18;

#[derive(Parser)]
#[command(
    name = "polyuq",
    version,
    about = "Bounds on failure probabilities under mixed uncertainty, and design optimization against them",
    after_help = "Run without --scenario to list the built-in scenarios."
)]
struct Cli {
    /// Built-in scenario name or path to a scenario TOML file.
    #[arg(long)]
    scenario: Option<String>,

    /// What to compute for the scenario.
    #[arg(long, value_enum, default_value_t = Mode::Bounds)]
    mode: Mode,

    /// Master seed; each repetition derives its own seeds from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Repetitions, run sequentially (each repetition parallelizes inside).
    #[arg(long, default_value_t = 1)]
    reps: usize,

    /// Switch the estimator to crude Monte Carlo with this many samples.
    #[arg(long, conflicts_with = "lines")]
    samples: Option<usize>,

    /// Line count for the line-sampling estimator (the default, 50 lines).
    #[arg(long)]
    lines: Option<usize>,

    /// Population size of the measure-search optimizer.
    #[arg(long, default_value_t = 50)]
    pop: usize,

    /// Generations of the measure-search optimizer.
    #[arg(long, default_value_t = 100)]
    iters: usize,

    /// Design vector, comma separated. Required for `bounds` on a scenario
    /// that has a design layer; optional override otherwise.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,

    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Write the JSON document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Bounds,
    Rbdo,
    Check,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Bounds => "bounds",
            Mode::Rbdo => "rbdo",
            Mode::Check => "check",
        }
    }
}

#[derive(Serialize)]
struct Document {
    meta: Meta,
    config: ConfigEcho,
    results: serde_json::Value,
    spread: BTreeMap<String, Spread>,
}

#[derive(Serialize)]
struct Meta {
    tool: &'static str,
    version: &'static str,
    /// The only key that varies between otherwise identical runs: start
    /// time and wall-clock duration live together here so masking this one
    /// key makes equal runs byte-identical.
    timestamp: Timestamp,
}

#[derive(Serialize)]
struct Timestamp {
    started: String,
    elapsed_seconds: f64,
}

#[derive(Serialize)]
struct ConfigEcho {
    scenario: String,
    mode: &'static str,
    seed: u64,
    reps: usize,
    estimator: &'static str,
    n: usize,
    pop: usize,
    iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<Vec<f64>>,
}

/// Across-repetition range of one headline number.
#[derive(Serialize)]
struct Spread {
    min: f64,
    max: f64,
    spread: f64,
}

impl Spread {
    fn over(values: impl IntoIterator<Item = f64>) -> Option<Spread> {
        let mut it = values.into_iter();
        let first = it.next()?;
        let (mut min, mut max) = (first, first);
        for v in it {
            min = min.min(v);
            max = max.max(v);
        }
        Some(Spread { min, max, spread: max - min })
    }
}

#[derive(Serialize)]
struct BoundsRep {
    rep: usize,
    seed: u64,
    lower: BoundResult,
    upper: BoundResult,
}

#[derive(Serialize)]
struct RbdoRep {
    rep: usize,
    seed: u64,
    feasible: bool,
    best: Option<DesignEvaluation>,
    candidates: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap would exit with its own code 2, which is reserved here
            // for infeasible design runs
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let started = iso8601_utc_now();
    let clock = std::time::Instant::now();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().ok();
    }

    let Some(spec) = cli.scenario.as_deref() else {
        for name in Scenario::builtin_names() {
            let s = Scenario::builtin(name).expect("built-in resolves");
            println!("{name:<22} {}", s.description);
        }
        return Ok(ExitCode::SUCCESS);
    };
    let scenario = load_scenario(spec)?;

    if cli.reps == 0 {
        anyhow::bail!("--reps must be at least 1");
    }

    let estimator_kind = if cli.samples.is_some() { "crude_monte_carlo" } else { "line_sampling" };
    let n = cli.samples.or(cli.lines).unwrap_or(50);
    let config = ConfigEcho {
        scenario: scenario.name.clone(),
        mode: cli.mode.name(),
        seed: cli.seed,
        reps: cli.reps,
        estimator: estimator_kind,
        n,
        pop: cli.pop,
        iters: cli.iters,
        theta: cli.theta.clone(),
    };

    let (results, spread, code) = match cli.mode {
        Mode::Check => run_check(&scenario)?,
        Mode::Bounds => run_bounds(&cli, &scenario)?,
        Mode::Rbdo => run_rbdo(&cli, &scenario)?,
    };

    let document = Document {
        meta: Meta {
            tool: "polyuq",
            version: env!("CARGO_PKG_VERSION"),
            timestamp: Timestamp {
                started,
                elapsed_seconds: clock.elapsed().as_secs_f64(),
            },
        },
        config,
        results,
        spread,
    };
    let mut text = serde_json::to_string_pretty(&document)?;
    text.push('\n');
    match &cli.out {
        Some(path) => {
            std::fs::write(path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(code)
}

fn load_scenario(spec: &str) -> anyhow::Result<Scenario> {
    if let Some(s) = Scenario::builtin(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if path.exists() {
        return Ok(Scenario::load(path)?);
    }
    anyhow::bail!(
        "`{spec}` is neither a built-in scenario nor an existing file; built-ins: {}",
        Scenario::builtin_names().join(", ")
    )
}

type ModeOutput = (serde_json::Value, BTreeMap<String, Spread>, ExitCode);

fn run_check(scenario: &Scenario) -> anyhow::Result<ModeOutput> {
    let diagnostics = match scenario.design_problem() {
        Some(design) => rbdo::validate_design(&design),
        None => polyuq::model::validate(&scenario.uq_problem()),
    };
    let clean = diagnostics.is_empty();
    let results = serde_json::json!({ "diagnostics": diagnostics, "clean": clean });
    let code = if clean { ExitCode::SUCCESS } else { ExitCode::from(1) };
    Ok((results, BTreeMap::new(), code))
}

/// Per-repetition seeds: the master seed is mixed with the repetition index,
/// then split into one stream for the measure search and one for the
/// estimator.
fn rep_seeds(master: u64, rep: usize) -> (u64, u64, u64) {
    let rep_seed = mix_seed(master, rep as u64);
    (rep_seed, mix_seed(rep_seed, 1), mix_seed(rep_seed, 2))
}

fn estimator_config(cli: &Cli, seed: u64) -> EstimatorConfig {
    match cli.samples {
        Some(n) => EstimatorConfig::crude_mc(n, seed),
        None => EstimatorConfig::line_sampling(cli.lines.unwrap_or(50), seed),
    }
}

fn bounds_target(cli: &Cli, scenario: &Scenario) -> anyhow::Result<UQProblem> {
    match (scenario.design_problem(), &cli.theta) {
        (Some(design), Some(theta)) => Ok(rbdo::resolve_coupling(&design, theta)?),
        (Some(_), None) => anyhow::bail!(
            "scenario `{}` has a design layer; pass --theta to fix the design point",
            scenario.name
        ),
        (None, theta) => {
            let mut uq = scenario.uq_problem();
            if let Some(theta) = theta {
                uq.response.theta = theta.clone();
            }
            Ok(uq)
        }
    }
}

fn run_bounds(cli: &Cli, scenario: &Scenario) -> anyhow::Result<ModeOutput> {
    let uq = bounds_target(cli, scenario)?;
    let mut reps = Vec::with_capacity(cli.reps);
    for rep in 0..cli.reps {
        let (rep_seed, opt_seed, est_seed) = rep_seeds(cli.seed, rep);
        let opt = OptimizerConfig::self_adaptive(cli.pop, cli.iters, opt_seed, vec![(0.0, 1.0)]);
        let est = estimator_config(cli, est_seed);
        let lower = sharpest_bound(&uq, BoundSide::Lower, &opt, &est)?;
        let upper = sharpest_bound(&uq, BoundSide::Upper, &opt, &est)?;
        reps.push(BoundsRep { rep, seed: rep_seed, lower, upper });
    }
    let mut spread = BTreeMap::new();
    if let Some(s) = Spread::over(reps.iter().map(|r| r.lower.value)) {
        spread.insert("lower".into(), s);
    }
    if let Some(s) = Spread::over(reps.iter().map(|r| r.upper.value)) {
        spread.insert("upper".into(), s);
    }
    Ok((serde_json::to_value(&reps)?, spread, ExitCode::SUCCESS))
}

/// Outer strategy: a single continuous design variable bisects on the
/// feasibility threshold; anything else searches with the population
/// optimizer under an infeasibility penalty.
fn outer_config(design: &DesignProblem, cli: &Cli, seed: u64) -> OptimizerConfig {
    match design.variables.as_slice() {
        [v] => {
            if let VariableKind::Continuous { lower, upper } = v.kind {
                return OptimizerConfig {
                    population: 1,
                    max_iterations: BISECTION_DEPTH,
                    seed,
                    bounds: vec![(lower, upper)],
                    strategy: Strategy::Bisection,
                };
            }
            OptimizerConfig::self_adaptive(cli.pop, cli.iters, seed, vec![(0.0, 1.0)])
        }
        _ => OptimizerConfig::self_adaptive(cli.pop, cli.iters, seed, vec![(0.0, 1.0)]),
    }
}

fn run_rbdo(cli: &Cli, scenario: &Scenario) -> anyhow::Result<ModeOutput> {
    let Some(design) = scenario.design_problem() else {
        anyhow::bail!("scenario `{}` has no design layer; use --mode bounds", scenario.name);
    };
    let mut reps = Vec::with_capacity(cli.reps);
    for rep in 0..cli.reps {
        let (rep_seed, opt_seed, est_seed) = rep_seeds(cli.seed, rep);
        let outer = outer_config(&design, cli, mix_seed(rep_seed, 3));
        let cfgs = InnerConfigs {
            optimizer: OptimizerConfig::self_adaptive(
                cli.pop,
                cli.iters,
                opt_seed,
                vec![(0.0, 1.0)],
            ),
            estimator: estimator_config(cli, est_seed),
        };
        let report = rbdo::solve(&design, &outer, &cfgs)?;
        reps.push(RbdoRep {
            rep,
            seed: rep_seed,
            feasible: report.best.is_some(),
            best: report.best,
            candidates: report.history.len(),
        });
    }

    let mut spread = BTreeMap::new();
    let solved: Vec<&DesignEvaluation> = reps.iter().filter_map(|r| r.best.as_ref()).collect();
    if let Some(first) = solved.first() {
        for i in 0..first.theta.len() {
            if let Some(s) = Spread::over(solved.iter().map(|b| b.theta[i])) {
                spread.insert(format!("theta[{i}]"), s);
            }
        }
        if let Some(s) = Spread::over(solved.iter().map(|b| b.cost_value)) {
            spread.insert("cost_value".into(), s);
        }
        if let Some(s) = Spread::over(solved.iter().map(|b| b.pof_upper)) {
            spread.insert("pof_upper".into(), s);
        }
    }
    let code = if reps.iter().all(|r| r.feasible) { ExitCode::SUCCESS } else { ExitCode::from(2) };
    Ok((serde_json::to_value(&reps)?, spread, code))
}

/// RFC 3339 UTC timestamp from the system clock, via the days-from-civil
/// inverse (no external time dependency).
fn iso8601_utc_now() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let days = (secs / 86_400) as i64;
    let (h, m, s) = ((secs / 3600) % 24, (secs / 60) % 60, secs % 60);
    // civil-from-days, Gregorian calendar
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let mo = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = if mo <= 2 { y + 1 } else { y };
    format!("{y:04}-{mo:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps_are_rfc3339_shaped() {
        let t = iso8601_utc_now();
        assert_eq!(t.len(), 20);
        assert_eq!(&t[4..5], "-");
        assert_eq!(&t[10..11], "T");
        assert!(t.ends_with('Z'));
        let year: i32 = t[0..4].parse().unwrap();
        assert!(year >= 2024);
    }

    #[test]
    fn spread_tracks_min_and_max() {
        let s = Spread::over([3.0, 1.0, 2.5]).unwrap();
        assert_eq!((s.min, s.max, s.spread), (1.0, 3.0, 2.0));
        assert!(Spread::over([]).is_none());
    }

    #[test]
    fn rep_seeds_differ_between_repetitions() {
        let a = rep_seeds(7, 0);
        let b = rep_seeds(7, 1);
        assert_ne!(a.0, b.0);
        assert_ne!(a.1, a.2);
    }
}
