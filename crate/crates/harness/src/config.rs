//! JSON configuration files. Every file carries `schema_version`; unknown
//! keys are rejected.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use fj_core::abstraction::ConfigBox;
use fj_core::dynamics::InfluenceMatrix;
use fj_core::network::{
    block_weighted_adjacency, expected_adjacency, read_csv_rows, read_json_rows, row_normalize, sbm_generate,
    Communities, SbmParams, SelfLoopPolicy,
};
use fj_core::rational::{self, Rational};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A rational parameter written either as a JSON number (read as its
/// shortest decimal, so `0.1` is `1/10`) or as a string such as `"1/3"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Num(pub Rational);

impl Num {
    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn f64(&self) -> f64 {
        rational::to_f64(&self.0)
    }
}

impl From<Rational> for Num {
    fn from(r: Rational) -> Self {
        Num(r)
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&rational::format_rational(&self.0))
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&rational::format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        let value = match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(rational::int(v)),
            Raw::Float(v) => rational::from_f64_decimal(v),
            Raw::Text(s) => rational::parse_rational(&s),
        };
        value.map(Num).map_err(serde::de::Error::custom)
    }
}

fn num(n: i64, d: i64) -> Num {
    Num(rational::ratio(n, d))
}

/// Where the influence matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InfluenceSpec {
    /// Explicit row-stochastic rows.
    Rows { rows: Vec<Vec<Num>> },
    /// JSON rows of `"p/q"` strings (`.json`) or decimal CSV (anything else),
    /// relative to the config file.
    File { path: PathBuf },
    Uniform { n: usize },
    /// Row-normalized stochastic block model sample, two equal communities.
    Sbm {
        n: usize,
        p_in: f64,
        p_out: f64,
        seed: u64,
        #[serde(default)]
        self_loops: SelfLoopPolicy,
    },
    /// Row-normalized expected adjacency of the same model.
    ExpectedSbm {
        n: usize,
        p_in: f64,
        p_out: f64,
        #[serde(default)]
        self_loops: SelfLoopPolicy,
    },
    /// Row-normalized block weights, two equal communities.
    Block { n: usize, w_in: Num, w_out: Num },
}

impl InfluenceSpec {
    pub fn build(&self, base: &Path) -> Result<InfluenceMatrix> {
        Ok(match self {
            InfluenceSpec::Rows { rows } => {
                InfluenceMatrix::from_rationals(rows.iter().map(|r| r.iter().map(|v| v.0.clone()).collect()).collect())?
            }
            InfluenceSpec::File { path } => {
                let full = base.join(path);
                let file = fs::File::open(&full).map_err(|e| HarnessError::Input(format!("{}: {e}", full.display())))?;
                let rows = if full.extension().is_some_and(|e| e == "json") {
                    read_json_rows(file)?
                } else {
                    read_csv_rows(file)?
                };
                InfluenceMatrix::from_rationals(rows)?
            }
            InfluenceSpec::Uniform { n } => InfluenceMatrix::uniform(*n),
            InfluenceSpec::Sbm {
                n,
                p_in,
                p_out,
                seed,
                self_loops,
            } => {
                let params = SbmParams::two_communities(*n, *p_in, *p_out, *seed);
                row_normalize(&sbm_generate(&params)?.with_policy(*self_loops))?
            }
            InfluenceSpec::ExpectedSbm {
                n,
                p_in,
                p_out,
                self_loops,
            } => {
                let params = SbmParams::two_communities(*n, *p_in, *p_out, 0);
                row_normalize(&expected_adjacency(&params)?.with_policy(*self_loops))?
            }
            InfluenceSpec::Block { n, w_in, w_out } => {
                let adj = block_weighted_adjacency(*n, &w_in.0, &w_out.0, &Communities::two_halves(*n))?;
                row_normalize(&adj)?
            }
        })
    }
}

/// One interval for every agent, or one per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Intervals {
    All([f64; 2]),
    PerAgent(Vec<[f64; 2]>),
}

impl Intervals {
    pub fn expand(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        match self {
            Intervals::All([lo, hi]) => Ok(vec![(*lo, *hi); n]),
            Intervals::PerAgent(v) if v.len() == n => Ok(v.iter().map(|[lo, hi]| (*lo, *hi)).collect()),
            Intervals::PerAgent(v) => Err(HarnessError::Config(format!(
                "box lists {} intervals for {n} agents",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub init: Intervals,
    pub lambda: Intervals,
}

impl BoxSpec {
    pub fn build(&self, n: usize) -> Result<ConfigBox> {
        Ok(ConfigBox::new(self.init.expand(n)?, self.lambda.expand(n)?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d_x: u32,
    pub d_lambda: u32,
}

fn half() -> Num {
    num(1, 2)
}

fn default_evidence_samples() -> usize {
    100
}

fn default_timeout() -> u64 {
    fj_core::verify::DEFAULT_TIMEOUT_SECS
}

/// Configuration for `simulate`, `abstract`, `verify` and `count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub influence: InfluenceSpec,
    /// `W^ab`; defaults to `influence`.
    #[serde(default)]
    pub abstract_influence: Option<InfluenceSpec>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "half")]
    pub gamma: Num,
    #[serde(default)]
    pub x_init: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub delta: Option<Num>,
    #[serde(default)]
    pub kappa: Option<Num>,
    #[serde(default, rename = "box")]
    pub config_box: Option<BoxSpec>,
    #[serde(default = "default_evidence_samples")]
    pub evidence_samples: usize,
    #[serde(default)]
    pub enumeration_cap: Option<u64>,
    #[serde(default = "default_timeout")]
    pub solver_timeout_secs: u64,
    #[serde(default)]
    pub lambda_hat: Option<Vec<Num>>,
    #[serde(default)]
    pub eps_lambda: Option<Num>,
    #[serde(default)]
    pub seed: u64,
    /// Directory relative paths are resolved against; set by [`load_run`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn require<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| HarnessError::Config(format!("missing required field `{name}`")))
    }

    pub fn w(&self) -> Result<InfluenceMatrix> {
        self.influence.build(&self.base_dir)
    }

    pub fn w_ab(&self) -> Result<InfluenceMatrix> {
        match &self.abstract_influence {
            Some(spec) => spec.build(&self.base_dir),
            None => self.w(),
        }
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(HarnessError::Config(format!(
            "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        HarnessError::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

pub fn load_run(path: &Path) -> Result<RunConfig> {
    let mut cfg: RunConfig = parse_json(&read(path)?, path)?;
    check_version(cfg.schema_version)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    ApproxError,
    Interpolation,
    CountSolutions,
    StructuralRuntime,
    Verify,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentId::ApproxError => "approx-error",
            ExperimentId::Interpolation => "interpolation",
            ExperimentId::CountSolutions => "count-solutions",
            ExperimentId::StructuralRuntime => "structural-runtime",
            ExperimentId::Verify => "verify",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EngineSelection {
    #[value(name = "enum")]
    #[serde(rename = "enum")]
    Enumeration,
    Smt,
    Both,
}

impl EngineSelection {
    pub fn uses_enumeration(self) -> bool {
        matches!(self, EngineSelection::Enumeration | EngineSelection::Both)
    }

    pub fn uses_smt(self) -> bool {
        matches!(self, EngineSelection::Smt | EngineSelection::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmSection {
    pub p_in: f64,
    pub p_out: f64,
    #[serde(default)]
    pub self_loops: SelfLoopPolicy,
}

/// Experiment file as written; absent fields take per-experiment defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    schema_version: u32,
    experiment: ExperimentId,
    n: Option<usize>,
    horizon: Option<usize>,
    d_x: Option<Vec<u32>>,
    d_lambda: Option<Vec<u32>>,
    sbm: Option<SbmSection>,
    gamma: Option<Num>,
    kappa: Option<Num>,
    delta: Option<Num>,
    eps_lambda: Option<Vec<Num>>,
    alpha: Option<Vec<f64>>,
    seeds: Option<Vec<u64>>,
    output_dir: Option<PathBuf>,
    stubborn_fraction: Option<f64>,
    block_weights: Option<[Num; 2]>,
    lambda_window: Option<Num>,
    box_radius: Option<f64>,
    evidence_samples: Option<usize>,
    engine: Option<EngineSelection>,
    solver: Option<String>,
    solver_timeout_secs: Option<u64>,
    enumeration_cap: Option<u64>,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub n: usize,
    pub horizon: usize,
    pub d_x: Vec<u32>,
    pub d_lambda: Vec<u32>,
    pub sbm: SbmSection,
    pub gamma: Num,
    pub kappa: Num,
    pub delta: Num,
    pub eps_lambda: Vec<Num>,
    pub alpha: Vec<f64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub stubborn_fraction: f64,
    pub block_weights: [Num; 2],
    pub lambda_window: Num,
    pub box_radius: f64,
    pub evidence_samples: usize,
    pub engine: EngineSelection,
    pub solver: String,
    pub solver_timeout_secs: u64,
    pub enumeration_cap: u64,
}

impl ExperimentConfig {
    /// Settings used when a field is absent from the file.
    pub fn defaults(id: ExperimentId) -> Self {
        let base = ExperimentConfig {
            experiment: id,
            n: 40,
            horizon: 9,
            d_x: vec![2, 4, 6, 8],
            d_lambda: vec![2, 4, 6, 8],
            sbm: SbmSection {
                p_in: 0.3,
                p_out: 0.1,
                self_loops: SelfLoopPolicy::AddUnitSelfLoop,
            },
            gamma: half(),
            kappa: num(0, 1),
            delta: num(1, 10),
            eps_lambda: vec![num(0, 1), num(1, 4), num(1, 2), num(3, 4), num(1, 1)],
            alpha: vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0],
            seeds: (0..20).collect(),
            output_dir: PathBuf::from("out"),
            stubborn_fraction: 0.2,
            block_weights: [num(5, 1), num(3, 1)],
            lambda_window: num(1, 2),
            box_radius: 0.05,
            evidence_samples: 100,
            engine: EngineSelection::Enumeration,
            solver: fj_core::verify::DEFAULT_SOLVER_COMMAND.into(),
            solver_timeout_secs: fj_core::verify::DEFAULT_TIMEOUT_SECS,
            enumeration_cap: fj_core::verify::DEFAULT_ENUMERATION_CAP as u64,
        };
        match id {
            ExperimentId::ApproxError => base,
            ExperimentId::Interpolation => ExperimentConfig {
                d_x: vec![2],
                d_lambda: vec![3],
                seeds: (0..5).collect(),
                ..base
            },
            ExperimentId::CountSolutions => ExperimentConfig {
                n: 10,
                d_x: vec![2],
                d_lambda: vec![3],
                seeds: vec![0],
                engine: EngineSelection::Both,
                ..base
            },
            ExperimentId::StructuralRuntime => ExperimentConfig {
                n: 200,
                horizon: 3,
                d_x: vec![2],
                d_lambda: vec![3],
                seeds: (0..10).collect(),
                engine: EngineSelection::Smt,
                ..base
            },
            ExperimentId::Verify => ExperimentConfig {
                n: 8,
                horizon: 5,
                d_x: vec![100],
                d_lambda: vec![100],
                kappa: num(1, 8),
                delta: num(1, 20),
                box_radius: 0.004,
                seeds: (0..5).collect(),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.seeds.is_empty() {
            return fail("seed list is empty".into());
        }
        if self.n == 0 {
            return fail("n must be positive".into());
        }
        if self.d_x.is_empty() || self.d_lambda.is_empty() {
            return fail("grid resolution lists must be nonempty".into());
        }
        if self.d_x.iter().chain(&self.d_lambda).any(|&d| d == 0) {
            return fail("grid resolutions must be positive".into());
        }
        for (name, p) in [("sbm.p_in", self.sbm.p_in), ("sbm.p_out", self.sbm.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} = {p} not in [0, 1]"));
            }
        }
        let g = self.gamma.f64();
        if !(g > 0.0 && g < 1.0) {
            return fail(format!("gamma = {} not in (0, 1)", self.gamma));
        }
        if self.kappa.f64() < 0.0 {
            return fail("kappa must be >= 0".into());
        }
        if self.delta.f64() <= 0.0 {
            return fail("delta must be > 0".into());
        }
        if self.alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return fail("alpha values must lie in [0, 1]".into());
        }
        if self.eps_lambda.iter().any(|e| e.f64() < 0.0) {
            return fail("eps_lambda values must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.stubborn_fraction) {
            return fail("stubborn_fraction must lie in [0, 1]".into());
        }
        if self.block_weights.iter().any(|w| w.f64() <= 0.0) {
            return fail("block weights must be positive".into());
        }
        if self.box_radius < 0.0 || !self.box_radius.is_finite() {
            return fail("box_radius must be finite and >= 0".into());
        }
        if self.solver.split_whitespace().next().is_none() {
            return fail("solver command is empty".into());
        }
        Ok(())
    }

    pub fn solver_config(&self) -> fj_core::verify::SolverConfig {
        fj_core::verify::SolverConfig::new(self.solver.clone(), self.solver_timeout_secs)
    }
}

pub fn parse_experiment(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let f: ExperimentFile = parse_json(text, path)?;
    check_version(f.schema_version)?;
    let d = ExperimentConfig::defaults(f.experiment);
    let cfg = ExperimentConfig {
        experiment: f.experiment,
        n: f.n.unwrap_or(d.n),
        horizon: f.horizon.unwrap_or(d.horizon),
        d_x: f.d_x.unwrap_or(d.d_x),
        d_lambda: f.d_lambda.unwrap_or(d.d_lambda),
        sbm: f.sbm.unwrap_or(d.sbm),
        gamma: f.gamma.unwrap_or(d.gamma),
        kappa: f.kappa.unwrap_or(d.kappa),
        delta: f.delta.unwrap_or(d.delta),
        eps_lambda: f.eps_lambda.unwrap_or(d.eps_lambda),
        alpha: f.alpha.unwrap_or(d.alpha),
        seeds: f.seeds.unwrap_or(d.seeds),
        output_dir: f.output_dir.unwrap_or(d.output_dir),
        stubborn_fraction: f.stubborn_fraction.unwrap_or(d.stubborn_fraction),
        block_weights: f.block_weights.unwrap_or(d.block_weights),
        lambda_window: f.lambda_window.unwrap_or(d.lambda_window),
        box_radius: f.box_radius.unwrap_or(d.box_radius),
        evidence_samples: f.evidence_samples.unwrap_or(d.evidence_samples),
        engine: f.engine.unwrap_or(d.engine),
        solver: f.solver.unwrap_or(d.solver),
        solver_timeout_secs: f.solver_timeout_secs.unwrap_or(d.solver_timeout_secs),
        enumeration_cap: f.enumeration_cap.unwrap_or(d.enumeration_cap),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    parse_experiment(&read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_experiment(text, Path::new("test.json"))
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg = parse(r#"{"schema_version": 1, "experiment": "count-solutions"}"#).unwrap();
        assert_eq!(cfg.n, 10);
        assert_eq!(cfg.d_lambda, vec![3]);
        assert_eq!(cfg.eps_lambda.len(), 5);
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        assert!(parse(r#"{"schema_version": 1, "experiment": "verify", "bogus": 3}"#).is_err());
        assert!(parse(r#"{"schema_version": 2, "experiment": "verify"}"#).is_err());
        assert!(parse(r#"{"schema_version": 1, "experiment": "verify", "seeds": []}"#).is_err());
        assert!(parse(r#"{"schema_version": 1, "experiment": "verify", "alpha": [1.5]}"#).is_err());
    }

    #[test]
    fn numbers_accept_decimals_and_fractions() {
        let cfg = parse(r#"{"schema_version": 1, "experiment": "verify", "kappa": 0.1, "delta": "1/30"}"#).unwrap();
        assert_eq!(cfg.kappa.0, rational::ratio(1, 10));
        assert_eq!(cfg.delta.0, rational::ratio(1, 30));
    }

    #[test]
    fn errors_carry_line_and_column() {
        let err = parse("{\n  \"schema_version\": 1,\n  \"experiment\": \"nope\"\n}").unwrap_err();
        assert!(err.to_string().contains("test.json:3:"), "{err}");
    }

    #[test]
    fn influence_specs_reject_unknown_fields() {
        let ok: InfluenceSpec = serde_json::from_str(r#"{"kind": "uniform", "n": 3}"#).unwrap();
        assert_eq!(ok.build(Path::new(".")).unwrap().dim(), 3);
        assert!(serde_json::from_str::<InfluenceSpec>(r#"{"kind": "uniform", "n": 3, "x": 1}"#).is_err());
        let block: InfluenceSpec = serde_json::from_str(r#"{"kind": "block", "n": 4, "w_in": 5, "w_out": 3}"#).unwrap();
        let w = block.build(Path::new(".")).unwrap();
        assert_eq!(w.exact(0, 1), &rational::ratio(5, 11));
    }
}
