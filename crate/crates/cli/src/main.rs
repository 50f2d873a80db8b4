use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use llarull_core::families::FamilyRegistry;
use llarull_core::report::{self, Format};
use llarull_core::scenario::{self, exit, ScenarioConfig, SEQUENCE_SUITE};
use llarull_core::sequence::{Schedule, SequenceSpec};
use llarull_core::{ClassParams, LabError, Result};

#[derive(Parser)]
#[command(name = "llarull", version, about = "Llarull potentials on warped-product 3-spheres")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Geometry summary and class membership, no potential.
    Analyze(RunArgs),
    /// Solve the potential and run the check suites.
    Verify(RunArgs),
    /// Sweep a family along a schedule and check the convergence hypotheses.
    Sequence {
        #[command(flatten)]
        run: RunArgs,
        /// Swept parameter and its values, e.g. `eta=0.5,0.25,0.125`.
        #[arg(long)]
        sweep: Option<String>,
        /// Parameter tied to the swept value, e.g. `theta0=2`.
        #[arg(long)]
        tie: Vec<String>,
    },
    /// Antipodal ball-volume certificate.
    Pointpick {
        #[command(flatten)]
        run: RunArgs,
        /// Ball radius; repeat for several.
        #[arg(long)]
        radius: Vec<f64>,
    },
    /// List metric families with their parameters.
    Families,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Metric family, when no scenario file names one.
    #[arg(long)]
    family: Option<String>,
    /// Family parameter `name=value`; repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long)]
    grid_size: Option<usize>,
    /// Regularization radius of the boundary-value solver.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fixed margin tolerance for the checks.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Output directory; without it the report goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Class bounds `V,D,mbar,Lambda`.
    #[arg(long)]
    class: Option<String>,
    /// Potential solver (`quadrature` or `bvp`).
    #[arg(long)]
    solver: Option<String>,
    /// Also write the potential and sequence tables.
    #[arg(long)]
    tables: bool,
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

fn parse_pair(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| bad(format!("expected name=value, got `{s}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| bad(format!("not a number: `{s}`")))
}

impl RunArgs {
    fn build(&self) -> Result<(ScenarioConfig, PathBuf)> {
        let (mut cfg, base) = match &self.config {
            Some(path) => (
                ScenarioConfig::load(path)?,
                path.parent().map(Path::to_path_buf).unwrap_or_default(),
            ),
            None => {
                let family = self
                    .family
                    .as_ref()
                    .ok_or_else(|| bad("give --config or --family"))?;
                (ScenarioConfig::parse(&format!("[metric]\nfamily = {family:?}\n"))?, PathBuf::new())
            }
        };
        if let (Some(f), Some(_)) = (&self.family, &self.config) {
            cfg.metric.family = Some(f.clone());
            cfg.metric.profile = None;
        }
        for p in &self.params {
            let (k, v) = parse_pair(p)?;
            cfg.metric.params.insert(k, parse_f64(&v)?);
        }
        if let Some(n) = self.grid_size {
            cfg.grid.size = n;
        }
        if let Some(e) = self.epsilon {
            cfg.solver.epsilon = Some(e);
        }
        if let Some(t) = self.tolerance {
            cfg.suites.tolerance = Some(t);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = &self.solver {
            cfg.solver.method = Some(s.clone());
        }
        if let Some(c) = &self.class {
            let v: Vec<f64> = c.split(',').map(|x| parse_f64(x.trim())).collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(bad("--class takes V,D,mbar,Lambda"));
            }
            cfg.class = ClassParams::new(v[0], v[1], v[2], v[3])?;
        }
        if let Some(f) = self.format {
            cfg.output.formats = vec![match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            }];
        }
        if let Some(dir) = &self.output {
            cfg.output.dir = Some(std::env::current_dir()?.join(dir));
        }
        cfg.output.tables |= self.tables;
        Ok((cfg, base))
    }
}

/// The built-in sequence for families that have one.
fn preset(family: &str) -> Option<SequenceSpec> {
    match family {
        "bump" => Some(SequenceSpec::bump(10, 0)),
        "tendril" => Some(SequenceSpec::tendril(1.0, 3, 10, 0)),
        "bubble" => Some(SequenceSpec::bubble(0.05, 6, 0)),
        _ => None,
    }
}

fn run(command: Command) -> Result<i32> {
    let (cfg, base, stdout_kind) = match command {
        Command::Families => {
            print!("{}", FamilyRegistry::builtin().catalog());
            return Ok(exit::OK);
        }
        Command::Analyze(args) => {
            let (mut cfg, base) = args.build()?;
            cfg.suites.run.clear();
            (cfg, base, "analyze")
        }
        Command::Verify(args) => {
            let (mut cfg, base) = args.build()?;
            cfg.suites.run.retain(|s| s != SEQUENCE_SUITE);
            (cfg, base, "verify")
        }
        Command::Sequence { run, sweep, tie } => {
            let (mut cfg, base) = run.build()?;
            cfg.suites.run = vec![SEQUENCE_SUITE.into()];
            if let Some(s) = sweep {
                let (param, values) = parse_pair(&s)?;
                let values = values.split(',').map(|v| parse_f64(v.trim())).collect::<Result<_>>()?;
                let mut schedule = Schedule {
                    param,
                    values,
                    ties: Default::default(),
                };
                for t in &tie {
                    let (k, v) = parse_pair(t)?;
                    schedule = schedule.tie(&k, parse_f64(&v)?);
                }
                cfg.metric.schedule = Some(schedule);
            }
            if cfg.metric.schedule.is_none() {
                let family = cfg.metric.family.clone().unwrap_or_default();
                let spec = preset(&family)
                    .ok_or_else(|| bad(format!("no built-in schedule for `{family}`; pass --sweep")))?;
                for (k, v) in spec.base.params {
                    cfg.metric.params.entry(k).or_insert(v);
                }
                cfg.metric.schedule = Some(spec.schedule);
            }
            (cfg, base, "sequence")
        }
        Command::Pointpick { run, radius } => {
            let (mut cfg, base) = run.build()?;
            cfg.suites.run = vec!["pointpick".into()];
            if !radius.is_empty() {
                cfg.suites.pointpick_radii = radius;
            }
            (cfg, base, "pointpick")
        }
    };
    let outcome = scenario::run_config(&cfg, &base)?;
    if outcome.written.is_empty() {
        let r = &outcome.report;
        let text = match (cfg.output.formats.first(), stdout_kind) {
            (Some(Format::Csv), "sequence") => match &r.sequence {
                Some(seq) => report::sequence_csv(seq)?,
                None => String::new(),
            },
            (Some(Format::Csv), _) => r.checks_csv()?,
            _ => r.to_json()?,
        };
        print!("{text}");
    } else {
        for p in &outcome.written {
            println!("{}", p.display());
        }
    }
    let failures = outcome.report.failures();
    if failures > 0 {
        eprintln!("{failures} check(s) failed");
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(scenario::exit_code(&e) as u8)
        }
    }
}
