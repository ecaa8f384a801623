//! Command-line front end: `gexpect run --scenario NAME|all [options]`.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::scenarios::{run_named, ScenarioError, ScenarioOutcome, ScenarioParams, SCENARIO_NAMES};

/// Environment variable capping solver threads (`0` = automatic).
pub const THREADS_ENV: &str = "GEXPECT_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("unknown scenario {name:?}; valid names: all, {}", valid.join(", "))]
    UnknownScenario { name: String, valid: Vec<String> },
    #[error("config file {path}: line {line}: {message}")]
    Config { path: PathBuf, line: usize, message: String },
    #[error("invalid value for {key}: {message}")]
    InvalidValue { key: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Md,
}

#[derive(Debug, Parser)]
#[command(name = "gexpect", version, about = "Sublinear expectations of G-normal and sequentially independent vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario or all of them.
    Run(Box<RunArgs>),
    /// List scenario names.
    List,
}

#[derive(Debug, Args, Default)]
#[command(allow_negative_numbers = true)]
struct RunArgs {
    /// Scenario name, or `all`.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long = "sigma-low-sq")]
    sigma_low_sq: Option<f64>,
    #[arg(long = "sigma-high-sq")]
    sigma_high_sq: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Grid spacing on every axis.
    #[arg(long)]
    h: Option<f64>,
    /// Half-width of the truncated domain on every axis.
    #[arg(long = "L")]
    half_width: Option<f64>,
    /// Time step; must respect the monotonicity limit.
    #[arg(long)]
    dt: Option<f64>,
    /// Time horizon.
    #[arg(long)]
    t: Option<f64>,
    /// Solver tolerance used for domain truncation.
    #[arg(long)]
    tol: Option<f64>,
    /// Output file for the report.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    report: Option<ReportFormat>,
    /// Re-run at h/2, ..., h/2^k and append refinement deltas.
    #[arg(long)]
    refine: Option<usize>,
    /// Key-value file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenarios: Vec<String>,
    pub params: ScenarioParams,
    pub out: Option<PathBuf>,
    pub report: ReportFormat,
    pub refine: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Run(RunConfig),
    List,
}

const CONFIG_KEYS: &[&str] = &[
    "scenario", "sigma-low-sq", "sigma-high-sq", "alpha", "h", "L", "dt", "t", "tol", "out", "report", "refine",
];

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<HashMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| CliError::Config {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(err(format!("unknown key {key:?}")));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn from_file<T: std::str::FromStr>(file: &HashMap<String, String>, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    file.get(key)
        .map(|v| {
            v.parse::<T>().map_err(|e| CliError::InvalidValue {
                key: key.to_string(),
                message: format!("{v:?}: {e}"),
            })
        })
        .transpose()
}

fn positive(key: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::InvalidValue {
            key: key.into(),
            message: format!("must be positive, got {x}"),
        }),
        other => Ok(other),
    }
}

fn resolve(args: RunArgs) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(p) => read_config_file(p)?,
        None => HashMap::new(),
    };
    let scenario = match args.scenario.or(from_file(&file, "scenario")?) {
        Some(s) => s,
        None => return Err(CliError::Usage("missing --scenario (a name or `all`)".into())),
    };
    let scenarios = if scenario == "all" {
        SCENARIO_NAMES.iter().map(|s| s.to_string()).collect()
    } else if SCENARIO_NAMES.contains(&scenario.as_str()) {
        vec![scenario]
    } else {
        return Err(CliError::UnknownScenario {
            name: scenario,
            valid: SCENARIO_NAMES.iter().map(|s| s.to_string()).collect(),
        });
    };
    let mut params = ScenarioParams::default();
    if let Some(v) = args.sigma_low_sq.or(from_file(&file, "sigma-low-sq")?) {
        params.sigma_low_sq = v;
    }
    if let Some(v) = args.sigma_high_sq.or(from_file(&file, "sigma-high-sq")?) {
        params.sigma_high_sq = v;
    }
    if !(params.sigma_low_sq >= 0.0 && params.sigma_low_sq <= params.sigma_high_sq && params.sigma_high_sq.is_finite()) {
        return Err(CliError::InvalidValue {
            key: "sigma-low-sq/sigma-high-sq".into(),
            message: format!("need 0 <= low <= high, got [{}, {}]", params.sigma_low_sq, params.sigma_high_sq),
        });
    }
    if let Some(v) = positive("alpha", args.alpha.or(from_file(&file, "alpha")?))? {
        params.alpha = v;
    }
    let solver = &mut params.solver;
    solver.spacing = positive("h", args.h.or(from_file(&file, "h")?))?;
    solver.half_width = positive("L", args.half_width.or(from_file(&file, "L")?))?;
    solver.dt = positive("dt", args.dt.or(from_file(&file, "dt")?))?;
    if let Some(t) = positive("t", args.t.or(from_file(&file, "t")?))? {
        solver.time_horizon = t;
    }
    if let Some(tol) = positive("tol", args.tol.or(from_file(&file, "tol")?))? {
        solver.tolerance = tol;
    }
    let report = match args.report {
        Some(r) => r,
        None => match file.get("report").map(String::as_str) {
            None | Some("csv") => ReportFormat::Csv,
            Some("md") => ReportFormat::Md,
            Some(other) => {
                return Err(CliError::InvalidValue {
                    key: "report".into(),
                    message: format!("expected csv or md, got {other:?}"),
                })
            }
        },
    };
    Ok(RunConfig {
        scenarios,
        params,
        out: args.out.or(from_file(&file, "out")?),
        report,
        refine: args.refine.or(from_file(&file, "refine")?).unwrap_or(0),
    })
}

/// Parses `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<Invocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| CliError::Usage(e.render().to_string()))?;
    match cli.command {
        Command::List => Ok(Invocation::List),
        Command::Run(args) => Ok(Invocation::Run(resolve(*args)?)),
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub label: String,
    pub value: f64,
    pub error_estimate: f64,
    pub assertion: String,
    pub pass: Option<bool>,
    pub margin: Option<f64>,
    pub refinement_deltas: Vec<f64>,
}

pub const HEADER: [&str; 7] = ["scenario", "label", "value", "error_estimate", "assertion", "pass", "margin"];

/// Flattens outcomes: one row per quantity, or one per assertion attached to it.
pub fn rows(outcomes: &[ScenarioOutcome]) -> Vec<Row> {
    let mut out = Vec::new();
    for o in outcomes {
        for (i, q) in o.quantities.iter().enumerate() {
            let base = Row {
                scenario: o.name.clone(),
                label: q.label.clone(),
                value: q.value,
                error_estimate: q.error_estimate,
                assertion: String::new(),
                pass: None,
                margin: None,
                refinement_deltas: Vec::new(),
            };
            let attached: Vec<_> = o.assertions.iter().filter(|a| a.quantity == i).collect();
            if attached.is_empty() {
                out.push(base.clone());
            }
            for a in attached {
                let assertion = match a.tag {
                    Some(tag) => format!("{} [{tag}]", a.description),
                    None => a.description.clone(),
                };
                out.push(Row {
                    assertion,
                    pass: Some(a.pass),
                    margin: Some(a.margin),
                    ..base.clone()
                });
            }
        }
    }
    out
}

fn cells(row: &Row) -> Vec<String> {
    let mut c = vec![
        row.scenario.clone(),
        row.label.clone(),
        format!("{}", row.value),
        format!("{}", row.error_estimate),
        row.assertion.clone(),
        row.pass.map_or(String::new(), |p| p.to_string()),
        row.margin.map_or(String::new(), |m| format!("{m}")),
    ];
    c.extend(row.refinement_deltas.iter().map(|d| format!("{d}")));
    c
}

fn header(refine: usize) -> Vec<String> {
    let mut h: Vec<String> = HEADER.iter().map(|s| s.to_string()).collect();
    h.extend((1..=refine).map(|k| format!("refinement_delta_{k}")));
    h
}

pub fn write_csv<W: Write>(w: W, rows: &[Row], refine: usize) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header(refine))?;
    for r in rows {
        wtr.write_record(cells(r))?;
    }
    wtr.flush().map_err(|source| CliError::Io {
        path: PathBuf::from("<csv>"),
        source,
    })?;
    Ok(())
}

pub fn markdown(rows: &[Row], refine: usize) -> String {
    let h = header(refine);
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", h.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(h.len()));
    for r in rows {
        let c: Vec<String> = cells(r).into_iter().map(|x| x.replace('|', "\\|")).collect();
        let _ = writeln!(s, "| {} |", c.join(" | "));
    }
    s
}

fn summary(outcomes: &[ScenarioOutcome]) -> String {
    let mut s = String::new();
    for o in outcomes {
        let passed = o.assertions.iter().filter(|a| a.pass).count();
        let verdict = if o.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{verdict} {} ({passed}/{} assertions, {} ms)", o.name, o.assertions.len(), o.runtime_ms);
        for a in o.failures() {
            let q = &o.quantities[a.quantity];
            let _ = writeln!(s, "    failed: {} [{} = {}, margin {}]", a.description, q.label, q.value, a.margin);
        }
    }
    s
}

fn configure_threads() {
    let n = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    if n > 0 {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run_all_named(config: &RunConfig, params: &ScenarioParams) -> Result<Vec<ScenarioOutcome>, CliError> {
    let mut outcomes = Vec::new();
    for name in &config.scenarios {
        outcomes.extend(run_named(name, params)?);
    }
    Ok(outcomes)
}

/// Runs the configured scenarios, writes the report and returns the exit code.
pub fn execute(config: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    configure_threads();
    let outcomes = run_all_named(config, &config.params)?;
    let mut table = rows(&outcomes);
    let mut previous: Vec<f64> = table.iter().map(|r| r.value).collect();
    for k in 1..=config.refine {
        let mut params = config.params.clone();
        params.solver = params.solver.with_spacing_scaled(0.5_f64.powi(k as i32));
        let finer = rows(&run_all_named(config, &params)?);
        if finer.len() != table.len() {
            return Err(CliError::Usage("refined run produced a different row layout".into()));
        }
        for ((row, f), prev) in table.iter_mut().zip(&finer).zip(previous.iter_mut()) {
            row.refinement_deltas.push((f.value - *prev).abs());
            *prev = f.value;
        }
    }
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    // Without --out the report owns stdout, so the summary moves to stderr.
    if config.out.is_some() {
        write!(stdout, "{}", summary(&outcomes)).map_err(io_err(Path::new("<stdout>")))?;
    } else {
        eprint!("{}", summary(&outcomes));
    }
    match (&config.out, config.report) {
        (Some(path), ReportFormat::Csv) => {
            let f = fs::File::create(path).map_err(io_err(path))?;
            write_csv(io::BufWriter::new(f), &table, config.refine)?;
        }
        (Some(path), ReportFormat::Md) => fs::write(path, markdown(&table, config.refine)).map_err(io_err(path))?,
        (None, ReportFormat::Csv) => write_csv(&mut *stdout, &table, config.refine)?,
        (None, ReportFormat::Md) => write!(stdout, "{}", markdown(&table, config.refine)).map_err(io_err(Path::new("<stdout>")))?,
    }
    Ok(if outcomes.iter().all(ScenarioOutcome::passed) { 0 } else { 1 })
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match parse_args(argv) {
        Ok(Invocation::List) => {
            for name in SCENARIO_NAMES {
                let _ = writeln!(out, "{name}");
            }
            0
        }
        Ok(Invocation::Run(cfg)) => match execute(&cfg, &mut out) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(CliError::Usage(msg)) => {
            eprintln!("{msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Result<RunConfig, CliError> {
        let mut v = vec!["gexpect", "run"];
        v.extend_from_slice(args);
        match parse_args(v)? {
            Invocation::Run(c) => Ok(c),
            Invocation::List => unreachable!(),
        }
    }

    #[test]
    fn defaults() {
        let c = run(&["--scenario", "linear-combination"]).unwrap();
        assert_eq!(c.scenarios, vec!["linear-combination"]);
        assert_eq!(c.params, ScenarioParams::default());
        assert_eq!(c.report, ReportFormat::Csv);
        assert_eq!(c.refine, 0);
    }

    #[test]
    fn overrides() {
        let c = run(&["--scenario", "all", "--h", "0.01", "--out", "results.csv"]).unwrap();
        assert_eq!(c.scenarios.len(), SCENARIO_NAMES.len());
        assert_eq!(c.params.solver.spacing, Some(0.01));
        assert_eq!(c.out, Some(PathBuf::from("results.csv")));
    }

    #[test]
    fn rejects_bad_input() {
        let e = run(&["--scenario", "bogus"]).unwrap_err();
        assert!(e.to_string().contains("linear-combination"), "{e}");
        assert!(matches!(run(&["--scenario", "all", "--alpha", "x"]), Err(CliError::Usage(_))));
        assert!(matches!(run(&["--scenario", "all", "--bogus"]), Err(CliError::Usage(_))));
        assert!(matches!(run(&[]), Err(CliError::Usage(_))));
        assert!(matches!(run(&["--scenario", "all", "--h", "-1"]), Err(CliError::InvalidValue { .. })));
        assert!(matches!(
            run(&["--scenario", "all", "--sigma-low-sq", "5"]),
            Err(CliError::InvalidValue { .. })
        ));
    }

    #[test]
    fn markdown_escapes_pipes() {
        let r = Row {
            scenario: "s".into(),
            label: "|x|".into(),
            value: 1.0,
            error_estimate: 0.0,
            assertion: String::new(),
            pass: Some(true),
            margin: Some(0.5),
            refinement_deltas: vec![],
        };
        let md = markdown(&[r], 0);
        assert!(md.contains("\\|x\\|"));
        assert!(md.lines().next().unwrap().starts_with("| scenario | label"));
    }
}
