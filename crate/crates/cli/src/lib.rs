//! Command-line front end for the `coldplasma` library.
//!
//! Exit codes: 0 success, 2 argument or parse error, 3 doping profile not
//! positive, 4 integration failure on a single-characteristic command.
//! Sweeps always exit 0 and record per-point failures in the report.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use coldplasma::analysis::{
    constant_criterion, instability_measure, measure_period, monodromy, AnalysisError,
};
use coldplasma::characteristics::{
    conserved_rhs, derived_at, trace, trace_damped, CharacteristicError, CharacteristicRun,
};
use coldplasma::profiles::{check_positive, PositivityViolation, ProfileError};
use coldplasma::sweep::{blowup_map, crossing_oracle, write_report, ReportFormat};
use coldplasma::{
    fmt17, DampingConfig, DopingProfile, InitialData, Interval, ProfileKind, SweepConfig,
    Tolerances,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_POSITIVITY: i32 = 3;
pub const EXIT_INTEGRATION: i32 = 4;
const EXIT_IO: i32 = 1;

/// Version tag accepted in `--config` files.
pub const CONFIG_SCHEMA_VERSION: u64 = 1;

/// Samples used when checking custom profiles for positivity.
const POSITIVITY_SAMPLES: usize = 4001;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Positivity(#[from] PositivityViolation),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("{0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Positivity(_) => EXIT_POSITIVITY,
            CliError::Integration(_) => EXIT_INTEGRATION,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::Positivity(v) => CliError::Positivity(v),
            other => CliError::Usage(format!("--profile: {other}")),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "coldplasma",
    version,
    about = "Blow-up of cold plasma oscillations along characteristics"
)]
pub struct Cli {
    /// JSON file whose keys mirror the long flags (with `schema_version: 1`);
    /// flags given on the command line take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel sweeps [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Blow-up map over a grid of starting points
    Sweep(SweepArgs),
    /// Trace one characteristic and dump `t,x,V,E,Q,dQ,v,e,n`
    Trace(TraceArgs),
    /// Smoothness criterion for a constant background
    Criterion(CriterionArgs),
    /// Measured vs asymptotic period of small oscillations
    Period(PeriodArgs),
    /// Instability measure m(x) and its local maxima
    Instability(InstabilityArgs),
    /// Floquet multipliers of the Hill equation along a periodic orbit
    Monodromy(MonodromyArgs),
    /// Trace one characteristic of the damped system
    DampedTrace(DampedTraceArgs),
    /// Earliest collision of neighbouring characteristics
    Crossings(CrossingsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    /// Absolute and relative error tolerance of the integrator
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Accepted integrator steps allowed per characteristic
    #[arg(long, default_value_t = 1_000_000)]
    pub max_steps: usize,
}

impl ToleranceArgs {
    fn get(&self) -> Result<Tolerances, CliError> {
        let t = Tolerances {
            max_steps: self.max_steps,
            ..Tolerances::uniform(self.tol)
        };
        if t.is_valid() {
            Ok(t)
        } else {
            Err(usage(format!(
                "--tol and --max-steps must be positive, got {} and {}",
                self.tol, self.max_steps
            )))
        }
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct SweepArgs {
    /// Doping profile: constant:C | lorentz:A | cosine:A,K | invsq:K | powerlaw:C1,C2 | expr:<e>
    #[arg(long)]
    pub profile: String,
    /// Initial data: laser:A | expr:V=<e>;E=<e>
    #[arg(long)]
    pub data: String,
    #[arg(long)]
    pub x_min: f64,
    #[arg(long)]
    pub x_max: f64,
    /// Grid step
    #[arg(long)]
    pub dx: f64,
    /// Integration horizon
    #[arg(long, default_value_t = 300.0)]
    pub t_max: f64,
    /// Report file
    #[arg(long)]
    pub out: PathBuf,
    /// Report format [default: json for *.json, csv otherwise]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also write a gnuplot script plotting the CSV report
    #[arg(long, value_name = "FILE")]
    pub plot_script: Option<PathBuf>,
    /// Keep grid points where the profile has a kink
    #[arg(long)]
    pub include_kinks: bool,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct TraceArgs {
    /// Doping profile: constant:C | lorentz:A | cosine:A,K | invsq:K | powerlaw:C1,C2 | expr:<e>
    #[arg(long)]
    pub profile: String,
    /// Initial data: laser:A | expr:V=<e>;E=<e>
    #[arg(long)]
    pub data: String,
    /// Starting point of the characteristic
    #[arg(long)]
    pub x0: f64,
    /// Integration horizon
    #[arg(long, default_value_t = 300.0)]
    pub t_max: f64,
    /// Trajectory CSV (summary only when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a gnuplot script plotting Q(t) from the CSV
    #[arg(long, value_name = "FILE")]
    pub plot_script: Option<PathBuf>,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct DampedTraceArgs {
    #[command(flatten)]
    pub trace: TraceArgs,
    /// Friction coefficient q >= 0
    #[arg(long)]
    pub q: f64,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct CriterionArgs {
    /// Constant background density C > 0
    #[arg(long)]
    pub c: f64,
    /// Initial data: laser:A | expr:V=<e>;E=<e>
    #[arg(long)]
    pub data: String,
    #[arg(long)]
    pub x_min: f64,
    #[arg(long)]
    pub x_max: f64,
    /// Grid step
    #[arg(long)]
    pub dx: f64,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct PeriodArgs {
    /// Doping profile: constant:C | lorentz:A | cosine:A,K | invsq:K | powerlaw:C1,C2 | expr:<e>
    #[arg(long)]
    pub profile: String,
    /// Equilibrium point
    #[arg(long)]
    pub x0: f64,
    /// Comma-separated amplitudes eps = V(0)
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps_list: Vec<f64>,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct InstabilityArgs {
    /// Doping profile: constant:C | lorentz:A | cosine:A,K | invsq:K | powerlaw:C1,C2 | expr:<e>
    #[arg(long)]
    pub profile: String,
    #[arg(long)]
    pub x_min: f64,
    #[arg(long)]
    pub x_max: f64,
    /// Grid step
    #[arg(long)]
    pub dx: f64,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct MonodromyArgs {
    /// Doping profile: constant:C | lorentz:A | cosine:A,K | invsq:K | powerlaw:C1,C2 | expr:<e>
    #[arg(long)]
    pub profile: String,
    /// Equilibrium point
    #[arg(long)]
    pub x0: f64,
    /// Amplitude eps = V(0)
    #[arg(long)]
    pub eps: f64,
    /// Output CSV (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct CrossingsArgs {
    /// Doping profile: constant:C | lorentz:A | cosine:A,K | invsq:K | powerlaw:C1,C2 | expr:<e>
    #[arg(long)]
    pub profile: String,
    /// Initial data: laser:A | expr:V=<e>;E=<e>
    #[arg(long)]
    pub data: String,
    #[arg(long)]
    pub x_min: f64,
    #[arg(long)]
    pub x_max: f64,
    /// Grid step
    #[arg(long)]
    pub dx: f64,
    /// Integration horizon
    #[arg(long, default_value_t = 300.0)]
    pub t_max: f64,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

/// The clap command tree, for help rendering.
pub fn command() -> clap::Command {
    Cli::command()
}

const SUBCOMMANDS: [&str; 8] = [
    "sweep",
    "trace",
    "criterion",
    "period",
    "instability",
    "monodromy",
    "damped-trace",
    "crossings",
];

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Flag tokens from a JSON config object.
pub fn config_tokens(text: &str) -> Result<Vec<String>, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| usage(format!("--config: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| usage("--config: expected a JSON object"))?;
    match obj.get("schema_version").and_then(|v| v.as_u64()) {
        Some(CONFIG_SCHEMA_VERSION) => {}
        Some(v) => return Err(usage(format!("--config: unsupported schema_version {v}"))),
        None => return Err(usage("--config: missing schema_version")),
    }
    let mut tokens = Vec::new();
    for (key, v) in obj {
        if key == "schema_version" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &serde_json::Value| match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            other => Err(usage(format!(
                "--config: unsupported value for `{key}`: {other}"
            ))),
        };
        match v {
            serde_json::Value::Bool(true) => tokens.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::Array(items) => {
                let parts = items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?;
                tokens.push(flag);
                tokens.push(parts.join(","));
            }
            other => {
                tokens.push(flag);
                tokens.push(scalar(other)?);
            }
        }
    }
    Ok(tokens)
}

/// Splices config-file flags in front of the user's own, right after the
/// subcommand, so explicit flags override them.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
    let tokens = config_tokens(&text)?;
    let at = argv
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(argv.len(), |i| i + 1);
    let mut out = argv[..at].to_vec();
    out.extend(tokens.into_iter().map(OsString::from));
    out.extend_from_slice(&argv[at..]);
    Ok(out)
}

/// Parses `argv` (including the program name) and runs the subcommand,
/// writing results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_with(argv: Vec<OsString>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(argv: Vec<OsString>) -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let pool = match cli.threads {
        Some(0) => return Err(usage("--threads must be at least 1")),
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| usage(format!("--threads: {e}")))?,
        ),
        None => None,
    };
    let go = |out: &mut dyn Write, err: &mut dyn Write| match cli.command {
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Trace(a) => cmd_trace(a, None, out),
        Command::DampedTrace(a) => {
            let damping = DampingConfig::new(a.q).map_err(usage)?;
            cmd_trace(a.trace, Some(damping), out)
        }
        Command::Criterion(a) => cmd_criterion(a, out),
        Command::Period(a) => cmd_period(a, out),
        Command::Instability(a) => cmd_instability(a, out, err),
        Command::Monodromy(a) => cmd_monodromy(a, out),
        Command::Crossings(a) => cmd_crossings(a, out),
    };
    match pool {
        Some(p) => {
            let (mut o, mut e) = (Vec::new(), Vec::new());
            let result = p.install(|| go(&mut o, &mut e));
            out.write_all(&o)?;
            err.write_all(&e)?;
            result
        }
        None => go(out, err),
    }
}

fn parse_profile(spec: &str) -> Result<DopingProfile, CliError> {
    Ok(DopingProfile::from_spec(spec)?)
}

fn parse_data(spec: &str) -> Result<InitialData, CliError> {
    InitialData::from_spec(spec).map_err(|e| usage(format!("--data: {e}")))
}

/// Builtins are positive on their whole domain by construction; custom
/// expressions are sampled on `[lo, hi]`.
fn ensure_positive(profile: &DopingProfile, lo: f64, hi: f64) -> Result<(), CliError> {
    if profile.kind() != ProfileKind::Custom {
        return Ok(());
    }
    if lo == hi {
        let value = profile.c(lo);
        return if value > 0.0 {
            Ok(())
        } else {
            Err(PositivityViolation { x: lo, value }.into())
        };
    }
    check_positive(profile, Interval::new(lo, hi), POSITIVITY_SAMPLES)?;
    Ok(())
}

fn range_config(x_min: f64, x_max: f64, dx: f64, horizon: f64) -> Result<SweepConfig, CliError> {
    let cfg = SweepConfig::new(x_min, x_max, dx, horizon);
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn write_text(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn gnuplot_script(csv: &Path, x_col: usize, y_col: usize, xlabel: &str, ylabel: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel '{xlabel}'\n\
         set ylabel '{ylabel}'\n\
         set grid\n\
         plot '{}' using {x_col}:{y_col} with linespoints pt 7 ps 0.5\n\
         pause -1\n",
        csv.display()
    )
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let profile = parse_profile(&a.profile)?;
    let data = parse_data(&a.data)?;
    let mut cfg = range_config(a.x_min, a.x_max, a.dx, a.t_max)?;
    cfg.tolerances = a.tol.get()?;
    cfg.exclude_kinks = !a.include_kinks;
    ensure_positive(&profile, a.x_min, a.x_max)?;
    let format = a
        .format
        .unwrap_or(match a.out.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Csv,
        });
    if a.plot_script.is_some() && format == Format::Json {
        return Err(usage("--plot-script needs a CSV report"));
    }

    let report = blowup_map(&profile, &data, &cfg).map_err(usage)?;
    let fmt = match format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    };
    write_report(&report, fmt, &a.out)
        .map_err(|e| CliError::Io(io::Error::other(e.to_string())))?;
    if let Some(script) = &a.plot_script {
        fs::write(script, gnuplot_script(&a.out, 1, 3, "x0", "t*"))?;
    }

    use coldplasma::BlowupStatus::*;
    writeln!(out, "points = {}", report.records.len())?;
    for (name, status) in [
        ("blewup", BlewUp),
        ("survived", SurvivedHorizon),
        ("equilibrium", Equilibrium),
        ("failed", Failed),
    ] {
        writeln!(out, "{name} = {}", report.count(status))?;
    }
    match report.global_min {
        Some(g) => writeln!(
            out,
            "global_min = t* {} at x0 {}",
            fmt17(g.t_star),
            fmt17(g.x0)
        )?,
        None => writeln!(out, "global_min = none")?,
    }
    Ok(())
}

fn trace_error(e: CharacteristicError) -> CliError {
    match e {
        CharacteristicError::IntegrationFailure { .. } => CliError::Integration(e.to_string()),
        other => usage(other),
    }
}

/// Trajectory CSV with header `t,x,V,E,Q,dQ,v,e,n`; gradient columns are
/// empty where `|Q| < 1e-12`.
pub fn trajectory_csv(
    run: &CharacteristicRun,
    profile: &DopingProfile,
    data: &InitialData,
) -> String {
    let r = conserved_rhs(profile, &data.sample(run.x0()));
    let mut text = String::from("t,x,V,E,Q,dQ,v,e,n\n");
    for i in 0..run.trajectory.len() {
        let s = run.augmented(i);
        let t = run.trajectory.times()[i];
        let cols = [t, s.x, s.velocity, s.field, s.q, s.dq]
            .map(fmt17)
            .join(",");
        let derived = derived_at(run, profile, r, i)
            .map(|d| [d.v, d.e, d.n].map(fmt17).join(","))
            .unwrap_or_else(|| ",,".to_string());
        text.push_str(&cols);
        text.push(',');
        text.push_str(&derived);
        text.push('\n');
    }
    text
}

fn cmd_trace(
    a: TraceArgs,
    damping: Option<DampingConfig>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let profile = parse_profile(&a.profile)?;
    let data = parse_data(&a.data)?;
    let tol = a.tol.get()?;
    ensure_positive(&profile, a.x0, a.x0)?;
    let run = match damping {
        None => trace(&profile, &data, a.x0, a.t_max, &tol),
        Some(d) => trace_damped(&profile, &data, d, a.x0, a.t_max, &tol),
    }
    .map_err(trace_error)?;
    let (lo, hi) = run
        .trajectory
        .component(0)
        .fold((a.x0, a.x0), |(lo, hi), x| (lo.min(x), hi.max(x)));
    ensure_positive(&profile, lo, hi)?;

    if let Some(path) = &a.out {
        fs::write(path, trajectory_csv(&run, &profile, &data))?;
        if let Some(script) = &a.plot_script {
            fs::write(script, gnuplot_script(path, 1, 5, "t", "Q"))?;
        }
    } else if a.plot_script.is_some() {
        return Err(usage("--plot-script needs --out"));
    }
    let rec = run.record;
    writeln!(out, "x0 = {}", fmt17(rec.x0))?;
    writeln!(out, "status = {}", rec.status.as_str())?;
    match rec.t_star {
        Some(t) => writeln!(out, "t_star = {}", fmt17(t))?,
        None => writeln!(out, "t_star = none")?,
    }
    writeln!(out, "q_min = {}", fmt17(rec.q_min))?;
    writeln!(out, "horizon = {}", fmt17(rec.horizon))?;
    Ok(())
}

fn cmd_criterion(a: CriterionArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.c > 0.0) {
        return Err(PositivityViolation {
            x: a.x_min,
            value: a.c,
        }
        .into());
    }
    let data = parse_data(&a.data)?;
    let grid = range_config(a.x_min, a.x_max, a.dx, 1.0)?.grid();
    let mut text = String::from("x0,margin,safe\n");
    for p in constant_criterion(a.c, &data, &grid) {
        text.push_str(&format!("{},{},{}\n", fmt17(p.x0), fmt17(p.margin), p.safe));
    }
    write_text(a.out.as_deref(), &text, out)
}

fn analysis_error(e: AnalysisError) -> CliError {
    match e {
        AnalysisError::NonPositive { x0, value } => PositivityViolation { x: x0, value }.into(),
        AnalysisError::Integration(_) => CliError::Integration(e.to_string()),
        other => usage(other),
    }
}

/// Window around `x0` covering small orbits of amplitude `eps`.
fn orbit_window(profile: &DopingProfile, x0: f64, eps: f64) -> (f64, f64) {
    let c = profile.c(x0).abs().max(1e-12);
    let r = (4.0 * eps.abs() / c.sqrt()).max(1e-3);
    (x0 - r, x0 + r)
}

fn cmd_period(a: PeriodArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let profile = parse_profile(&a.profile)?;
    let tol = a.tol.get()?;
    let mut text = String::from("eps,T_measured,T_asymptotic\n");
    for &eps in &a.eps_list {
        let (lo, hi) = orbit_window(&profile, a.x0, eps);
        ensure_positive(&profile, lo, hi)?;
        let est = measure_period(&profile, a.x0, eps, &tol).map_err(analysis_error)?;
        text.push_str(&format!(
            "{},{},{}\n",
            fmt17(eps),
            fmt17(est.t_measured),
            fmt17(est.t_asymptotic)
        ));
    }
    write_text(a.out.as_deref(), &text, out)
}

fn cmd_instability(
    a: InstabilityArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let profile = parse_profile(&a.profile)?;
    let grid = range_config(a.x_min, a.x_max, a.dx, 1.0)?.grid();
    ensure_positive(&profile, a.x_min, a.x_max)?;
    let scan = instability_measure(&profile, &grid);
    let mut text = String::from("x,m\n");
    for (x, m) in scan.x.iter().zip(&scan.m) {
        let m = if m.is_finite() {
            fmt17(*m)
        } else {
            String::new()
        };
        text.push_str(&format!("{},{m}\n", fmt17(*x)));
    }
    write_text(a.out.as_deref(), &text, out)?;
    let maxima: Vec<String> = scan.maxima.iter().map(|x| fmt17(*x)).collect();
    let line = format!(
        "maxima = {}\n",
        if maxima.is_empty() {
            "none".into()
        } else {
            maxima.join(",")
        }
    );
    // keep stdout a clean CSV when the table goes there
    if a.out.is_some() {
        out.write_all(line.as_bytes())?;
    } else {
        err.write_all(line.as_bytes())?;
    }
    Ok(())
}

fn cmd_monodromy(a: MonodromyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let profile = parse_profile(&a.profile)?;
    let tol = a.tol.get()?;
    let (lo, hi) = orbit_window(&profile, a.x0, a.eps);
    ensure_positive(&profile, lo, hi)?;
    let m = monodromy(&profile, a.x0, a.eps, &tol).map_err(analysis_error)?;
    let mut text = String::from("x0,eps,T,lambda_re,lambda_im,max_abs\n");
    for l in m.multipliers {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt17(m.x0),
            fmt17(m.eps),
            fmt17(m.period),
            fmt17(l.re),
            fmt17(l.im),
            fmt17(m.max_abs_multiplier)
        ));
    }
    write_text(a.out.as_deref(), &text, out)
}

fn cmd_crossings(a: CrossingsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let profile = parse_profile(&a.profile)?;
    let data = parse_data(&a.data)?;
    let tol = a.tol.get()?;
    let grid = range_config(a.x_min, a.x_max, a.dx, a.t_max)?.grid();
    ensure_positive(&profile, a.x_min, a.x_max)?;
    match crossing_oracle(&profile, &data, &grid, a.t_max, &tol).map_err(usage)? {
        Some(c) => writeln!(
            out,
            "crossing = t {} between x0 {} and {}",
            fmt17(c.t),
            fmt17(c.left),
            fmt17(c.right)
        )?,
        None => writeln!(out, "crossing = none")?,
    }
    Ok(())
}
