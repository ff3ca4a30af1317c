//! `fjv` command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fj_core::abstraction::{
    admissible_delta, cover_set, snap, theorem1_certificate, AbstractGrid, BoxEvidence, SearchSpace,
};
use fj_core::dynamics::{ModelConfig, StubbornnessVector};
use fj_core::observation::ObservationSpec;
use fj_core::rational::{self, Rational};
use fj_core::verify::{
    count_solutions, count_with_enumeration, count_with_solver, verify_box, CountEngine, EngineChoice,
    EnumerationOptions, Status, ToleranceMode, TransferReport, VerificationProblem,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{load_experiment, load_run, EngineSelection, RunConfig};
use crate::error::{HarnessError, Result};
use crate::experiments;
use crate::report::write_text;

/// Exit status for errors; verdicts use 0, 1 and 2.
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fjv", version, about = "Friedkin-Johnsen abstraction and observation-consistency checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Solver command line, e.g. "z3 -in -smt2".
    #[arg(long)]
    pub solver: Option<String>,
    /// Directory for output files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one concrete configuration and print its trajectory.
    Simulate(#[command(flatten)] Common),
    /// Snap a concrete configuration to the grid and print its certificate.
    Abstract(#[command(flatten)] Common),
    /// Decide whether observations are consistent with a parameter box.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Observation CSV: one row per step, one 0/1 column per agent.
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, value_enum, default_value = "enum")]
        engine: EngineSelection,
    },
    /// Count abstract configurations consistent with observations.
    Count {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, value_enum, default_value = "enum")]
        engine: EngineSelection,
    },
    /// Run a seeded experiment.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        engine: Option<EngineSelection>,
    },
}

/// Parses arguments, runs the command, prints to stdout/stderr and returns
/// the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok((text, code)) => {
            print!("{text}");
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Output text and exit code of a command.
pub fn run(cli: &Cli) -> Result<(String, i32)> {
    match &cli.command {
        Command::Simulate(c) => simulate_cmd(c),
        Command::Abstract(c) => abstract_cmd(c),
        Command::Verify { common, obs, engine } => verify_cmd(common, obs, *engine),
        Command::Count { common, obs, engine } => count_cmd(common, obs, *engine),
        Command::Experiment { common, engine } => experiment_cmd(common, *engine),
    }
}

fn concrete(cfg: &RunConfig) -> Result<(Vec<f64>, StubbornnessVector)> {
    let x = RunConfig::require(&cfg.x_init, "x_init")?.clone();
    let l = RunConfig::require(&cfg.lambda, "lambda")?.clone();
    Ok((x, StubbornnessVector::new(l)?))
}

fn grid(cfg: &RunConfig) -> Result<AbstractGrid> {
    let g = RunConfig::require(&cfg.grid, "grid")?;
    let w = cfg.w()?;
    Ok(AbstractGrid::measured(g.d_x, g.d_lambda, cfg.w_ab()?, &w)?)
}

fn simulate_cmd(c: &Common) -> Result<(String, i32)> {
    let cfg = load_run(&c.config)?;
    let (x, lambda) = concrete(&cfg)?;
    let horizon = *RunConfig::require(&cfg.horizon, "horizon")?;
    let model = ModelConfig::new(x, lambda, cfg.w()?)?;
    let traj = model.simulate(horizon, cfg.gamma.f64())?;
    let n = model.dim();
    let mut csv = String::from("t");
    for i in 0..n {
        write!(csv, ",x_{i}").unwrap();
    }
    for i in 0..n {
        write!(csv, ",y_{i}").unwrap();
    }
    csv.push('\n');
    for t in 0..=horizon {
        write!(csv, "{t}").unwrap();
        for v in traj.opinions(t) {
            write!(csv, ",{v}").unwrap();
        }
        for &b in traj.outputs[t].bits() {
            write!(csv, ",{}", u8::from(b)).unwrap();
        }
        csv.push('\n');
    }
    if let Some(dir) = &c.out {
        write_text(&dir.join("trajectory.csv"), &csv)?;
    }
    Ok((csv, 0))
}

fn abstract_cmd(c: &Common) -> Result<(String, i32)> {
    let cfg = load_run(&c.config)?;
    let (x, lambda) = concrete(&cfg)?;
    let grid = grid(&cfg)?;
    let horizon = *RunConfig::require(&cfg.horizon, "horizon")?;
    let delta = RunConfig::require(&cfg.delta, "delta")?.f64();
    let ab = snap(&x, &lambda, &grid)?;
    let model = ModelConfig::new(x, lambda, cfg.w()?)?;
    let cert = theorem1_certificate(&model, &grid, delta, horizon, cfg.gamma.f64())?;
    let out = serde_json::json!({
        "abstraction": ab.decoded(&grid),
        "certificate": cert,
    });
    let text = serde_json::to_string_pretty(&out)? + "\n";
    if let Some(dir) = &c.out {
        write_text(&dir.join("abstraction.json"), &text)?;
    }
    Ok((text, 0))
}

fn solver_config(cfg: &RunConfig, c: &Common) -> fj_core::verify::SolverConfig {
    let mut s = fj_core::verify::SolverConfig::default();
    if let Some(cmd) = &c.solver {
        s.command = cmd.clone();
    }
    s.timeout_secs = cfg.solver_timeout_secs;
    s
}

fn enum_options(cfg: &RunConfig) -> EnumerationOptions {
    let mut opts = EnumerationOptions::default();
    if let Some(cap) = cfg.enumeration_cap {
        opts.cap = cap as u128;
    }
    opts
}

fn engine_choices(cfg: &RunConfig, c: &Common, sel: EngineSelection) -> Vec<EngineChoice> {
    let mut out = Vec::new();
    if sel.uses_enumeration() {
        out.push(EngineChoice::Enumeration(enum_options(cfg)));
    }
    if sel.uses_smt() {
        out.push(EngineChoice::Smt(solver_config(cfg, c)));
    }
    out
}

fn load_obs(path: &Path, kappa: Rational) -> Result<ObservationSpec> {
    Ok(ObservationSpec::load_csv(path, kappa)?)
}

fn pass(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "fails"
    }
}

fn evidence_lines(ev: &BoxEvidence, delta: f64, d_x: u32, out: &mut String) {
    writeln!(out, "sampled evidence over {} configurations (not a proof):", ev.samples).unwrap();
    writeln!(out, "  rho in [{:.6}, {:.6}], ||W|| = {:.6}, eps_x = {:.6}", ev.min_rho, ev.max_rho, ev.norm_w, ev.eps_x).unwrap();
    writeln!(out, "  d_x >= 1/(2 delta): {}", pass(ev.grid_resolution)).unwrap();
    writeln!(out, "  contraction rho < 1: {}/{}", ev.contractive, ev.samples).unwrap();
    writeln!(out, "  eps_x <= (1 - rho) delta: {}/{}", ev.budget_ok, ev.samples).unwrap();
    writeln!(out, "  near-threshold bound: {}/{}", ev.near_threshold_ok, ev.samples).unwrap();
    writeln!(out, "  eps_w < (1 - min rho) delta: {}", pass(ev.weight_budget_ok)).unwrap();
    match admissible_delta(ev.max_rho, ev.eps_x, d_x) {
        Some(iv) => writeln!(
            out,
            "  admissible delta for the worst sampled rho: [{:.6}, inf); delta = {delta} is {}",
            iv.lower,
            if iv.contains(delta) { "inside" } else { "outside" }
        )
        .unwrap(),
        None => writeln!(out, "  no admissible delta: a sampled configuration is not contractive").unwrap(),
    }
}

fn render_report(report: &TransferReport, problem_grid: &AbstractGrid, delta: f64, engine: &str) -> String {
    let mut s = String::new();
    let v = &report.verdict;
    writeln!(s, "engine: {engine}").unwrap();
    writeln!(s, "verdict: {}", v.status).unwrap();
    writeln!(s, "kappa+delta: {}", report.plus.status).unwrap();
    match &report.minus {
        Some(m) => writeln!(s, "kappa-delta: {}", m.status).unwrap(),
        None => writeln!(s, "kappa-delta: not run").unwrap(),
    }
    if let Some(c) = v.solution_count {
        writeln!(s, "solutions at kappa-delta: {c}").unwrap();
    }
    for n in &v.notices {
        writeln!(s, "notice: {n}").unwrap();
    }
    for w in v.witnesses.iter().take(10) {
        writeln!(s, "witness: {}", serde_json::to_string(&w.decoded(problem_grid)).unwrap_or_default()).unwrap();
    }
    if v.witnesses.len() > 10 {
        writeln!(s, "... {} more witnesses", v.witnesses.len() - 10).unwrap();
    }
    if let Some(ev) = &v.evidence {
        evidence_lines(ev, delta, problem_grid.d_x, &mut s);
    }
    s
}

fn verify_cmd(c: &Common, obs: &Path, sel: EngineSelection) -> Result<(String, i32)> {
    let cfg = load_run(&c.config)?;
    let kappa = RunConfig::require(&cfg.kappa, "kappa")?.0.clone();
    let delta = RunConfig::require(&cfg.delta, "delta")?.0.clone();
    let spec = load_obs(obs, kappa)?;
    let grid = grid(&cfg)?;
    let w = cfg.w()?;
    let pi_star = RunConfig::require(&cfg.config_box, "box")?.build(w.dim())?;
    let seed = c.seed.unwrap_or(cfg.seed);
    let mut text = String::new();
    let mut reports = Vec::new();
    for engine in engine_choices(&cfg, c, sel) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let report = verify_box(
            &pi_star,
            &w,
            &grid,
            spec.clone(),
            delta.clone(),
            cfg.gamma.0.clone(),
            &engine,
            cfg.evidence_samples,
            &mut rng,
        )?;
        text.push_str(&render_report(&report, &grid, rational::to_f64(&delta), &engine.engine().to_string()));
        reports.push(report);
    }
    if let Some(dir) = &c.out {
        write_text(&dir.join("verify.json"), &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    }
    let statuses: Vec<Status> = reports.iter().map(|r| r.verdict.status).collect();
    if statuses.windows(2).any(|p| p[0] != p[1]) {
        let plus_agree = reports.windows(2).all(|p| p[0].plus.status == p[1].plus.status);
        if !plus_agree {
            return Err(HarnessError::Check(format!(
                "engines disagree at kappa+delta:\n{text}"
            )));
        }
        // Witness search on the minus side is bounded differently per
        // engine; a disagreement there is not a contradiction.
        text.push_str("notice: engines reached different transfer verdicts; reporting the weaker one\n");
        return Ok((text, Status::Inconclusive.exit_code()));
    }
    Ok((text, statuses[0].exit_code()))
}

fn count_cmd(c: &Common, obs: &Path, sel: EngineSelection) -> Result<(String, i32)> {
    let cfg = load_run(&c.config)?;
    let kappa = RunConfig::require(&cfg.kappa, "kappa")?.0.clone();
    let spec = load_obs(obs, kappa)?;
    let grid = grid(&cfg)?;
    let space = match &cfg.config_box {
        Some(b) => cover_set(&b.build(grid.dim())?, &grid)?,
        None => SearchSpace::full(&grid),
    };
    let delta = cfg.delta.as_ref().map_or_else(|| rational::ratio(1, 10), |d| d.0.clone());
    let problem = VerificationProblem::new(spec, grid, space, delta, cfg.gamma.0.clone())?;
    let mut text = String::new();
    let mut counts = Vec::new();
    for engine in engine_choices(&cfg, c, sel) {
        let (name, ce) = match engine {
            EngineChoice::Enumeration(o) => ("enumeration", CountEngine::Enumeration(o)),
            EngineChoice::Smt(s) => ("smt", CountEngine::Smt(s)),
        };
        let count = match (&cfg.lambda_hat, &cfg.eps_lambda) {
            (Some(hat), Some(eps)) => {
                let hat: Vec<Rational> = hat.iter().map(|v| v.0.clone()).collect();
                count_solutions(&problem, &hat, &eps.0, &ce)?
            }
            (None, None) => match &ce {
                CountEngine::Enumeration(o) => count_with_enumeration(&problem, ToleranceMode::Kappa, o)?,
                CountEngine::Smt(s) => count_with_solver(&problem, ToleranceMode::Kappa, s)?,
            },
            _ => {
                return Err(HarnessError::Config(
                    "lambda_hat and eps_lambda must be given together".into(),
                ))
            }
        };
        writeln!(text, "{name}: {count}").unwrap();
        counts.push(count);
    }
    if counts.windows(2).any(|p| p[0] != p[1]) {
        return Err(HarnessError::Check(format!("engines disagree on the count:\n{text}")));
    }
    Ok((text, 0))
}

fn experiment_cmd(c: &Common, engine: Option<EngineSelection>) -> Result<(String, i32)> {
    let mut cfg = load_experiment(&c.config)?;
    if let Some(s) = &c.solver {
        cfg.solver = s.clone();
    }
    if let Some(e) = engine {
        cfg.engine = e;
    }
    if let Some(seed) = c.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    let outcome = experiments::run(&cfg, &cfg.output_dir)?;
    let code = if outcome.failures.is_empty() { 0 } else { 1 };
    Ok((outcome.render(), code))
}
