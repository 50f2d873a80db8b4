//! Scenario files: a TOML description of one run, executed into a report.
//!
//! ```toml
//! seed = 7
//!
//! [metric]
//! family = "bump"
//! params = { eta = 0.1 }
//!
//! [grid]
//! size = 1001
//!
//! [class]
//! volume = 40.0
//! diameter = 10.0
//! mbar = 1.0
//! lambda = 1.0
//!
//! [suites]
//! run = ["identity", "global", "polar", "goodset"]
//!
//! [output]
//! dir = "out"
//! formats = ["json", "csv"]
//! ```
//!
//! Unknown keys anywhere are errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checks::{CheckContext, SuiteRegistry};
use crate::error::{LabError, Result};
use crate::families::{FamilyRegistry, FamilySpec, ParamMap};
use crate::functionals;
use crate::grid::RadialGrid;
use crate::ledger::ConstantLedger;
use crate::metric::{membership_from, ClassParams, WarpedMetric};
use crate::potential::{Linearization, SolverConfig, SolverRegistry};
use crate::report::{self, Format, Report};
use crate::sequence::{self, Schedule, SequenceSpec};

/// Suite name that runs the sequence experiment instead of a check suite.
pub const SEQUENCE_SUITE: &str = "sequence";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seed for randomized parameter draws; recorded in the report.
    #[serde(default)]
    pub seed: u64,
    pub metric: MetricSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default = "default_class")]
    pub class: ClassParams,
    #[serde(default)]
    pub suites: SuitesSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_class() -> ClassParams {
    ClassParams {
        volume: 40.0,
        diameter: 10.0,
        mbar: 1.0,
        lambda: 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    /// Named family; exclusive with `profile`.
    pub family: Option<String>,
    #[serde(default)]
    pub params: ParamMap,
    /// Sampled profile table with columns `theta phi f`.
    pub profile: Option<PathBuf>,
    /// Parameters drawn uniformly from `[lo, hi]` with the scenario seed.
    #[serde(default)]
    pub random: BTreeMap<String, [f64; 2]>,
    /// Schedule for the sequence experiment.
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridSpacing {
    /// The family's preferred spacing, refined to resolve its features.
    #[default]
    Family,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub size: usize,
    pub spacing: GridSpacing,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            size: 1001,
            spacing: GridSpacing::Family,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Registered solver name; `quadrature` when absent.
    pub method: Option<String>,
    pub epsilon: Option<f64>,
    pub max_iterations: Option<usize>,
    pub picard_tolerance: Option<f64>,
    pub damping: Option<f64>,
    pub residual_tolerance: Option<f64>,
    pub pole_band: Option<f64>,
    pub linearization: Option<Linearization>,
}

impl SolverSection {
    pub fn method(&self) -> &str {
        self.method.as_deref().unwrap_or("quadrature")
    }

    pub fn config(&self) -> Result<SolverConfig> {
        let d = SolverConfig::default();
        let cfg = SolverConfig {
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            picard_tolerance: self.picard_tolerance.unwrap_or(d.picard_tolerance),
            damping: self.damping.unwrap_or(d.damping),
            residual_tolerance: self.residual_tolerance.unwrap_or(d.residual_tolerance),
            pole_band: self.pole_band.unwrap_or(d.pole_band),
            linearization: self.linearization.unwrap_or(d.linearization),
        };
        cfg.check()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuitesSection {
    pub run: Vec<String>,
    /// Fixed margin tolerance replacing the grid-dependent default.
    pub tolerance: Option<f64>,
    pub pointpick_radii: Vec<f64>,
}

impl Default for SuitesSection {
    fn default() -> Self {
        Self {
            run: ["identity", "global", "polar", "goodset"].map(String::from).to_vec(),
            tolerance: None,
            pointpick_radii: vec![0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Directory for report files; nothing is written when absent.
    pub dir: Option<PathBuf>,
    /// File stem of the report files.
    pub name: String,
    pub formats: Vec<Format>,
    /// Also write the potential profile and sequence tables as CSV.
    pub tables: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            name: "report".into(),
            formats: vec![Format::Json],
            tables: false,
        }
    }
}

/// Exit status of a run.
pub mod exit {
    pub const OK: i32 = 0;
    pub const MARGIN_FAILURE: i32 = 1;
    pub const INVALID_INPUT: i32 = 2;
    pub const NO_CONVERGENCE: i32 = 3;
}

/// Exit code for a run that stopped on `err`.
pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::NoConvergence { .. }
        | LabError::Solver(_)
        | LabError::ResidualTooLarge { .. }
        | LabError::Refinement(_) => exit::NO_CONVERGENCE,
        _ => exit::INVALID_INPUT,
    }
}

fn config_err(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        let suites = SuiteRegistry::builtin();
        for name in &self.suites.run {
            if name != SEQUENCE_SUITE && suites.get(name).is_err() {
                return Err(config_err(format!(
                    "unknown suite `{name}` (known: {}, {SEQUENCE_SUITE})",
                    suites.names().join(", ")
                )));
            }
        }
        let m = &self.metric;
        match (&m.family, &m.profile) {
            (Some(_), Some(_)) => return Err(config_err("[metric] takes either `family` or `profile`, not both")),
            (None, None) => return Err(config_err("[metric] needs `family` or `profile`")),
            (Some(name), None) => {
                let reg = FamilyRegistry::builtin();
                reg.get(name)?;
                for (k, [lo, hi]) in &m.random {
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                        return Err(config_err(format!("random range for `{k}` must satisfy lo <= hi")));
                    }
                    if m.params.contains_key(k) {
                        return Err(config_err(format!("`{k}` is both fixed and random")));
                    }
                }
                reg.resolve(&self.primary_spec()?)?;
            }
            (None, Some(p)) => {
                if !m.random.is_empty() || !m.params.is_empty() {
                    return Err(config_err("`params` and `random` apply to families only"));
                }
                let path = base_dir.join(p);
                if !path.is_file() {
                    return Err(config_err(format!("profile {} does not exist", path.display())));
                }
            }
        }
        if self.runs(SEQUENCE_SUITE) {
            let s = m
                .schedule
                .as_ref()
                .ok_or_else(|| config_err("the sequence suite needs [metric] schedule"))?;
            if m.family.is_none() {
                return Err(config_err("the sequence suite needs a metric family"));
            }
            if s.values.is_empty() || s.values.iter().any(|v| !v.is_finite()) {
                return Err(config_err("schedule values must be finite and nonempty"));
            }
        }
        if self.grid.size < crate::grid::MIN_NODES {
            return Err(config_err(format!("grid size must be at least {}", crate::grid::MIN_NODES)));
        }
        SolverRegistry::default().get(self.solver.method())?;
        self.solver.config()?;
        self.class.check()?;
        if let Some(t) = self.suites.tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(config_err("suite tolerance must be finite and nonnegative"));
            }
        }
        if self.suites.pointpick_radii.iter().any(|r| !(0.0..=std::f64::consts::PI).contains(r)) {
            return Err(config_err("point-pick radii must lie in [0, pi]"));
        }
        if self.output.formats.is_empty() || self.output.name.is_empty() {
            return Err(config_err("[output] needs a name and at least one format"));
        }
        Ok(())
    }

    pub fn runs(&self, suite: &str) -> bool {
        self.suites.run.iter().any(|s| s == suite)
    }

    /// Family spec with the fixed parameters and the seeded random draws.
    pub fn family_spec(&self) -> Result<FamilySpec> {
        let name = self
            .metric
            .family
            .as_ref()
            .ok_or_else(|| config_err("no metric family"))?;
        let mut spec = FamilySpec::new(name);
        spec.params = self.metric.params.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for (k, [lo, hi]) in &self.metric.random {
            let v = if lo == hi { *lo } else { rng.gen_range(*lo..*hi) };
            spec.params.insert(k.clone(), v);
        }
        Ok(spec)
    }

    /// The metric the geometry and check suites run on: the family spec,
    /// with the schedule's first member filling parameters left open.
    pub fn primary_spec(&self) -> Result<FamilySpec> {
        let mut spec = self.family_spec()?;
        if let Some(s) = &self.metric.schedule {
            if let (false, Some(&v)) = (spec.params.contains_key(&s.param), s.values.first()) {
                spec.params.insert(s.param.clone(), v);
                for (k, factor) in &s.ties {
                    spec.params.entry(k.clone()).or_insert(factor * v);
                }
            }
        }
        Ok(spec)
    }

    /// Hash of the parsed configuration and any profile it reads.
    pub fn hash(&self, profile: Option<&str>) -> Result<String> {
        let mut canonical = serde_json::to_string(self).map_err(|e| config_err(e.to_string()))?;
        if let Some(p) = profile {
            canonical.push('\n');
            canonical.push_str(p);
        }
        Ok(report::sha256_hex(canonical.as_bytes()))
    }
}

/// A finished run: the report, its exit code and the files written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub exit_code: i32,
    pub written: Vec<PathBuf>,
}

/// Loads, validates and runs a scenario file. Relative paths inside it are
/// resolved against its directory.
pub fn run_scenario(path: &Path) -> Result<Outcome> {
    let config = ScenarioConfig::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    run_config(&config, &base)
}

/// Runs a parsed scenario. Nothing is written unless every step succeeds.
pub fn run_config(config: &ScenarioConfig, base_dir: &Path) -> Result<Outcome> {
    config.validate(base_dir)?;
    let families = FamilyRegistry::builtin();
    let profile_text = match &config.metric.profile {
        Some(p) => Some(fs::read_to_string(base_dir.join(p))?),
        None => None,
    };
    let mut report = Report::new(&config.hash(profile_text.as_deref())?, config.seed);

    let metric = match (&profile_text, &config.metric.profile) {
        (Some(text), Some(p)) => WarpedMetric::from_table(text, p.display().to_string())?,
        _ => {
            let spec = config.primary_spec()?;
            let grid = match config.grid.spacing {
                GridSpacing::Family => families.grid_for(&spec, config.grid.size)?,
                GridSpacing::Uniform => RadialGrid::uniform(config.grid.size)?,
            };
            families.make_metric(&spec, grid)?
        }
    };
    let validation = metric.validate();
    let summary = metric.summary()?;
    report.metric = Some(metric.label().to_string());
    report.membership = Some(membership_from(&validation, &summary, &config.class));
    report.geometry = Some(summary);
    let ledger = ConstantLedger::new(&config.class)?;

    let check_suites: Vec<String> = config
        .suites
        .run
        .iter()
        .filter(|s| *s != SEQUENCE_SUITE)
        .cloned()
        .collect();
    let mut potential = None;
    if !check_suites.is_empty() {
        let solver_cfg = config.solver.config()?;
        let pot = SolverRegistry::default()
            .get(config.solver.method())?
            .solve(&metric, &solver_cfg)?;
        let mut ctx = CheckContext::new(&metric, &pot, &ledger, solver_cfg.residual_tolerance)?;
        if let Some(t) = config.suites.tolerance {
            ctx.tol = t;
        }
        ctx.pointpick_radii = config.suites.pointpick_radii.clone();
        report.checks = SuiteRegistry::builtin().run(&check_suites, &ctx)?;
        if config.runs("pointpick") {
            if let Some(&r) = config.suites.pointpick_radii.first() {
                report.pointpick = Some(functionals::point_pick(&metric, r, config.class.volume)?);
            }
        }
        potential = Some(pot);
    }
    report.ledger = Some(ledger);

    if config.runs(SEQUENCE_SUITE) {
        let schedule = config.metric.schedule.clone().expect("validated");
        let mut base = config.family_spec()?;
        base.params.remove(&schedule.param);
        for k in schedule.ties.keys() {
            base.params.remove(k);
        }
        let spec = SequenceSpec {
            base,
            schedule,
            grid_size: config.grid.size,
        };
        report.sequence = Some(sequence::run_sequence_with(&families, &spec, &config.class)?);
    }

    let exit_code = if report.failures() > 0 {
        exit::MARGIN_FAILURE
    } else {
        exit::OK
    };
    let mut written = Vec::new();
    if let Some(dir) = &config.output.dir {
        let dir = base_dir.join(dir);
        let stem = &config.output.name;
        let mut files: Vec<(PathBuf, String)> = Vec::new();
        for f in &config.output.formats {
            match f {
                Format::Json => files.push((dir.join(format!("{stem}.json")), report.to_json()?)),
                Format::Csv => files.push((dir.join(format!("{stem}.csv")), report.checks_csv()?)),
            }
        }
        if config.output.tables {
            if let Some(pot) = &potential {
                files.push((dir.join(format!("{stem}_potential.csv")), report::potential_csv(&metric, pot)?));
            }
            if let Some(seq) = &report.sequence {
                files.push((dir.join(format!("{stem}_sequence.csv")), report::sequence_csv(seq)?));
            }
        }
        for (path, contents) in files {
            report::write_atomic(&path, &contents)?;
            written.push(path);
        }
    }
    Ok(Outcome {
        report,
        exit_code,
        written,
    })
}
