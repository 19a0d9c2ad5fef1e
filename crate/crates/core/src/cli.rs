//! The `regwatch` command line: one subcommand per pipeline stage, each
//! reading and writing plain files, plus `pipeline` which runs them all.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analysis::{analyze, decode_analysis, encode_analysis, static_check, Analysis, AnalysisError};
use crate::lang::{call_graph, parse_program, run_suite, ExecError, Program, Scenario, ScenarioError};
use crate::miner::{self, MineError, DEFAULT_K, DEFAULT_MIN_SUPPORT};
use crate::property::{decode_properties, encode_properties, Property, PropertyStatus};
use crate::report::{render_html, render_text, Report};
use crate::scope::{build_plan, DEFAULT_DISTANCE};
use crate::trace::{decode_plan, decode_traces, encode_plan, encode_traces, MonitorPlan, TestVerdict, Trace, Version};
use crate::verify::{self, Limits, Mode, VerifyError, DEFAULT_ENUM_CAP, DEFAULT_STEP_BUDGET};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, missing files, or inputs of the wrong kind for a stage.
    #[error("{0}")]
    Usage(String),
    /// Inputs that do not parse or do not fit together.
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Invalid(_) => EXIT_INVALID,
        }
    }
}

fn invalid(path: &Path, e: impl Display) -> CliError {
    CliError::Invalid(format!("{}: {e}", path.display()))
}

impl From<MineError> for CliError {
    fn from(e: MineError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Status { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Usage(m) => CliError::Usage(m),
            AnalysisError::Check(e) => CliError::Invalid(e.to_string()),
            AnalysisError::Verify(e) => e.into(),
        }
    }
}

/// Whether a stage found anomalies or faults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Findings {
    None,
    Some,
}

impl Findings {
    fn from_clean(clean: bool) -> Self {
        if clean {
            Findings::None
        } else {
            Findings::Some
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Findings::None => EXIT_CLEAN,
            Findings::Some => EXIT_FINDINGS,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let fail = |e: &dyn Display| CliError::Usage(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}

fn load_program(path: &Path) -> Result<Program, CliError> {
    parse_program(&read(path)?).map_err(|e| invalid(path, e))
}

fn load_scenario(path: &Path, p: &Program) -> Result<Scenario, CliError> {
    let s = Scenario::parse(&read(path)?).map_err(|e| invalid(path, e))?;
    s.validate(p).map_err(|e: ScenarioError| invalid(path, e))?;
    Ok(s)
}

fn load_plan(path: &Path) -> Result<MonitorPlan, CliError> {
    decode_plan(&read(path)?).map_err(|e| invalid(path, e))
}

fn load_traces(path: &Path) -> Result<Vec<Trace>, CliError> {
    decode_traces(&read(path)?).map_err(|e| invalid(path, e))
}

fn load_properties(path: &Path) -> Result<Vec<Property>, CliError> {
    decode_properties(&read(path)?).map_err(|e| invalid(path, e))
}

fn only_upgraded(traces: Vec<Trace>, path: &Path, verdict: TestVerdict) -> Result<Vec<Trace>, CliError> {
    if let Some(t) = traces.iter().find(|t| t.version != Version::Upgraded) {
        return Err(CliError::Usage(format!(
            "{}: trace {} is from the {} version, expected upgraded traces",
            path.display(),
            t.test_id,
            t.version
        )));
    }
    Ok(traces.into_iter().filter(|t| t.verdict == verdict).collect())
}

pub fn plan_stage(base: &Path, upgraded: &Path, distance: u32, out: &Path) -> Result<(), CliError> {
    let plan = build_plan(&load_program(base)?, &load_program(upgraded)?, distance);
    write_atomic(out, &encode_plan(&plan))
}

pub fn run_stage(
    program: &Path,
    scenario: &Path,
    plan: &Path,
    version: Version,
    budget: u64,
    out: &Path,
) -> Result<(), CliError> {
    let p = load_program(program)?;
    let s = load_scenario(scenario, &p)?;
    let traces = run_suite(&p, &s, &load_plan(plan)?, version, budget)?;
    write_atomic(out, &encode_traces(&traces))
}

pub fn mine_stage(traces: &Path, plan: &Path, min_support: usize, k: usize, out: &Path) -> Result<(), CliError> {
    let props = miner::mine(&load_traces(traces)?, &load_plan(plan)?, min_support, k)?;
    write_atomic(out, &encode_properties(&props))
}

pub fn prune_stage(
    properties: &Path,
    program: &Path,
    scenario: &Path,
    mode: Mode,
    limits: Limits,
    out: &Path,
) -> Result<(), CliError> {
    let p = load_program(program)?;
    let s = load_scenario(scenario, &p)?;
    let pruned = verify::prune(&load_properties(properties)?, &p, &s, limits)?;
    let kept = verify::survivors(&pruned, mode).len();
    eprintln!("{kept} of {} properties survive {mode} pruning", pruned.len());
    write_atomic(out, &encode_properties(&pruned))
}

/// Classifies the survivors of `mode`; everything else is written back
/// unchanged.
pub fn classify_stage(properties: &Path, traces: &Path, mode: Mode, out: &Path) -> Result<(), CliError> {
    let all = load_properties(properties)?;
    if let Some(p) = all.iter().find(|p| p.status == PropertyStatus::Mined) {
        return Err(CliError::Usage(format!("property {} has not been pruned", p.id)));
    }
    let passing = only_upgraded(load_traces(traces)?, traces, TestVerdict::Pass)?;
    let survivors = verify::survivors(&all, mode);
    let c = crate::analysis::classify_obsolete(&survivors, &passing)?;
    let mut merged: Vec<Property> = all.into_iter().filter(|p| !mode.survives(p.status)).collect();
    merged.extend(c.obsolete);
    merged.extend(c.uptodate);
    write_atomic(out, &encode_properties(&merged))
}

fn uptodate(props: Vec<Property>) -> Vec<Property> {
    props
        .into_iter()
        .filter(|p| matches!(p.status, PropertyStatus::UpToDate(_)))
        .collect()
}

pub fn analyze_stage(properties: &Path, traces: &Path, upgraded: &Path, out: &Path) -> Result<Findings, CliError> {
    let props = uptodate(load_properties(properties)?);
    let failing = only_upgraded(load_traces(traces)?, traces, TestVerdict::Fail)?;
    let cg = call_graph(&load_program(upgraded)?);
    let a = analyze(&props, &failing, &cg)?;
    write_atomic(out, &encode_analysis(&a))?;
    Ok(Findings::from_clean(a.is_clean()))
}

pub fn check_stage(
    properties: &Path,
    upgraded: &Path,
    scenario: &Path,
    limits: Limits,
    out: &Path,
) -> Result<Findings, CliError> {
    let props = uptodate(load_properties(properties)?);
    let p = load_program(upgraded)?;
    let s = load_scenario(scenario, &p)?;
    let a = Analysis {
        faults: static_check(&props, &p, &s, limits)?,
        ..Analysis::default()
    };
    write_atomic(out, &encode_analysis(&a))?;
    Ok(Findings::from_clean(a.is_clean()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Html,
}

/// Builds a report from any mix of property, trace and analysis files,
/// told apart by their header line.
pub fn report_stage(inputs: &[PathBuf], format: Format, out: Option<&Path>) -> Result<Findings, CliError> {
    let mut props: Vec<Property> = Vec::new();
    let mut traces = Vec::new();
    let mut analysis = Analysis::default();
    for path in inputs {
        let text = read(path)?;
        match text.lines().next().unwrap_or("") {
            "#properties" => {
                for p in decode_properties(&text).map_err(|e| invalid(path, e))? {
                    if props.iter().any(|q| q.id == p.id) {
                        return Err(invalid(path, format!("property {} appears in more than one input", p.id)));
                    }
                    props.push(p);
                }
            }
            "#traces" => traces.extend(decode_traces(&text).map_err(|e| invalid(path, e))?),
            "#analysis" => analysis = analysis.merge(decode_analysis(&text).map_err(|e| invalid(path, e))?),
            other => return Err(invalid(path, format!("unrecognized file header {other:?}"))),
        }
    }
    let report = Report::new(&props, &traces, &analysis);
    let rendered = match format {
        Format::Text => render_text(&report),
        Format::Html => render_html(&report),
    };
    match out {
        Some(path) => write_atomic(path, &rendered)?,
        None => print!("{rendered}"),
    }
    Ok(Findings::from_clean(report.is_clean()))
}

#[derive(Debug, Clone, Args)]
pub struct Shared {
    /// Call-graph radius around changed functions
    #[arg(long, default_value_t = DEFAULT_DISTANCE)]
    pub distance: u32,
    /// Samples a program point needs before invariants are mined there
    #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
    pub min_support: usize,
    /// Tail length for automaton state merging
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// strict keeps proved properties, lenient also keeps unknown ones
    #[arg(long, default_value = "strict", value_parser = parse_mode)]
    pub mode: Mode,
    /// Step budget per execution
    #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
    pub budget: u64,
    /// Largest input-domain product verification enumerates
    #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
    pub enum_cap: u64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

impl Shared {
    fn limits(&self) -> Limits {
        Limits {
            step_budget: self.budget,
            enum_cap: self.enum_cap,
        }
    }
}

impl Default for Shared {
    fn default() -> Self {
        Self {
            distance: DEFAULT_DISTANCE,
            min_support: DEFAULT_MIN_SUPPORT,
            k: DEFAULT_K,
            mode: Mode::Strict,
            budget: DEFAULT_STEP_BUDGET,
            enum_cap: DEFAULT_ENUM_CAP,
            format: Format::Text,
        }
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_version(s: &str) -> Result<Version, String> {
    s.parse()
}

/// Files the pipeline writes into its output directory, in stage order.
pub const PIPELINE_FILES: [&str; 9] = [
    "plan.txt",
    "base.traces",
    "mined.props",
    "pruned.props",
    "upgraded.traces",
    "classified.props",
    "anomalies.txt",
    "faults.txt",
    "report.txt",
];

/// All stages in order, every artifact written into `out_dir`. With the
/// html format the report is `report.html` instead of `report.txt`.
pub fn pipeline_stage(
    base: &Path,
    upgraded: &Path,
    scenario_base: &Path,
    scenario_upgraded: &Path,
    out_dir: &Path,
    flags: &Shared,
) -> Result<Findings, CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let f = |name: &str| out_dir.join(name);
    plan_stage(base, upgraded, flags.distance, &f("plan.txt"))?;
    run_stage(base, scenario_base, &f("plan.txt"), Version::Base, flags.budget, &f("base.traces"))?;
    mine_stage(&f("base.traces"), &f("plan.txt"), flags.min_support, flags.k, &f("mined.props"))?;
    prune_stage(&f("mined.props"), base, scenario_base, flags.mode, flags.limits(), &f("pruned.props"))?;
    run_stage(
        upgraded,
        scenario_upgraded,
        &f("plan.txt"),
        Version::Upgraded,
        flags.budget,
        &f("upgraded.traces"),
    )?;
    classify_stage(&f("pruned.props"), &f("upgraded.traces"), flags.mode, &f("classified.props"))?;
    let anomalies = analyze_stage(&f("classified.props"), &f("upgraded.traces"), upgraded, &f("anomalies.txt"))?;
    let faults = check_stage(&f("classified.props"), upgraded, scenario_upgraded, flags.limits(), &f("faults.txt"))?;
    let report_name = match flags.format {
        Format::Text => "report.txt",
        Format::Html => "report.html",
    };
    let inputs: Vec<PathBuf> = ["classified.props", "base.traces", "upgraded.traces", "anomalies.txt", "faults.txt"]
        .iter()
        .map(|n| f(n))
        .collect();
    report_stage(&inputs, flags.format, Some(&f(report_name)))?;
    Ok(Findings::from_clean(anomalies == Findings::None && faults == Findings::None))
}

#[derive(Debug, Parser)]
#[command(name = "regwatch", version, about = "Explain regression failures with properties mined from the base version")]
pub struct Cli {
    /// Worker threads for verification and checking (default: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the monitor plan from the two program versions
    Plan {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        upgraded: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DISTANCE)]
        distance: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a test suite under a monitor plan and record traces
    Run {
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, value_parser = parse_version)]
        version: Version,
        #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
        budget: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine invariants and call automata from base traces
    Mine {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
        min_support: usize,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify mined properties against the base program
    Prune {
        #[arg(long)]
        properties: PathBuf,
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// strict keeps proved properties, lenient also keeps unknown ones
        #[arg(long, default_value = "strict", value_parser = parse_mode)]
        mode: Mode,
        #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
        enum_cap: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split surviving properties into obsolete and up-to-date using passing upgraded runs
    Classify {
        #[arg(long)]
        properties: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        /// strict keeps proved properties, lenient also keeps unknown ones
        #[arg(long, default_value = "strict", value_parser = parse_mode)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find anomalies in failing upgraded runs and chain them
    Analyze {
        #[arg(long)]
        properties: PathBuf,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        upgraded: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify up-to-date properties against the upgraded program
    Check {
        #[arg(long)]
        properties: PathBuf,
        #[arg(long)]
        upgraded: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = DEFAULT_ENUM_CAP)]
        enum_cap: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render property, trace and analysis files as a report
    Report {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Standard output when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage in order
    Pipeline {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        upgraded: PathBuf,
        #[arg(long)]
        scenario_base: PathBuf,
        #[arg(long)]
        scenario_upgraded: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        shared: Shared,
    },
}

fn dispatch(command: Command) -> Result<Findings, CliError> {
    let none = |r: Result<(), CliError>| r.map(|()| Findings::None);
    match command {
        Command::Plan {
            base,
            upgraded,
            distance,
            out,
        } => none(plan_stage(&base, &upgraded, distance, &out)),
        Command::Run {
            program,
            scenario,
            plan,
            version,
            budget,
            out,
        } => none(run_stage(&program, &scenario, &plan, version, budget, &out)),
        Command::Mine {
            traces,
            plan,
            min_support,
            k,
            out,
        } => none(mine_stage(&traces, &plan, min_support, k, &out)),
        Command::Prune {
            properties,
            program,
            scenario,
            mode,
            budget,
            enum_cap,
            out,
        } => none(prune_stage(
            &properties,
            &program,
            &scenario,
            mode,
            Limits {
                step_budget: budget,
                enum_cap,
            },
            &out,
        )),
        Command::Classify {
            properties,
            traces,
            mode,
            out,
        } => none(classify_stage(&properties, &traces, mode, &out)),
        Command::Analyze {
            properties,
            traces,
            upgraded,
            out,
        } => analyze_stage(&properties, &traces, &upgraded, &out),
        Command::Check {
            properties,
            upgraded,
            scenario,
            budget,
            enum_cap,
            out,
        } => check_stage(
            &properties,
            &upgraded,
            &scenario,
            Limits {
                step_budget: budget,
                enum_cap,
            },
            &out,
        ),
        Command::Report { inputs, format, out } => report_stage(&inputs, format, out.as_deref()),
        Command::Pipeline {
            base,
            upgraded,
            scenario_base,
            scenario_upgraded,
            out_dir,
            shared,
        } => pipeline_stage(&base, &upgraded, &scenario_base, &scenario_upgraded, &out_dir, &shared),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_CLEAN };
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} worker threads: {e}"))),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok(findings) => findings.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
