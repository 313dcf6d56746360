//! Command-line driver: configuration, experiment dispatch and report files.
//!
//! Every global flag can also be set through an environment variable with the
//! `ONPLUS_` prefix (`ONPLUS_N`, `ONPLUS_BACKEND`, `ONPLUS_TOL`, `ONPLUS_SEED`,
//! `ONPLUS_L_MAX`, `ONPLUS_B_MAX`, `ONPLUS_K_MAX`, `ONPLUS_TENSOR_CAP`,
//! `ONPLUS_COUPLED_CAP`, `ONPLUS_OUT`, `ONPLUS_FORMAT`); flags win over the
//! environment.

pub mod report;
pub mod suite;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use onplus::rep::Caps;

use crate::report::{render_checks, write_report, Cell, Format, Report, Table};
use crate::suite::{Backends, Suite, CRITERIA};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Cap(String),
    Compute(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Cap(m) => write!(f, "cap exhausted: {m}"),
            CliError::Compute(m) => write!(f, "computation failed: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<onplus::Error> for CliError {
    fn from(e: onplus::Error) -> Self {
        use onplus::Error as E;
        match e {
            E::CapExceeded { .. } => CliError::Cap(e.to_string()),
            E::InvalidN(_) | E::Precondition(_) | E::OutOfRange(_) => CliError::Config(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendChoice {
    Tensor,
    Coupled,
    CrossCheck,
}

impl BackendChoice {
    fn name(&self) -> &'static str {
        match self {
            BackendChoice::Tensor => "tensor",
            BackendChoice::Coupled => "coupled",
            BackendChoice::CrossCheck => "cross-check",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "onplus", version, about = "Representation calculus experiments for O_N^+")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Matrix size N of O_N^+ (N >= 3).
    #[arg(long = "N", global = true, default_value_t = 3, env = "ONPLUS_N")]
    pub big_n: usize,
    #[arg(long, global = true, value_enum, default_value_t = BackendChoice::Coupled, env = "ONPLUS_BACKEND")]
    pub backend: BackendChoice,
    /// Agreement tolerance for backend cross-checks, in (0, 1e-4].
    #[arg(long, global = true, default_value_t = 1e-8, env = "ONPLUS_TOL")]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 42, env = "ONPLUS_SEED")]
    pub seed: u64,
    #[arg(long = "l-max", global = true, default_value_t = 6, env = "ONPLUS_L_MAX")]
    pub l_max: usize,
    #[arg(long = "b-max", global = true, default_value_t = 6, env = "ONPLUS_B_MAX")]
    pub b_max: usize,
    #[arg(long = "k-max", global = true, default_value_t = 5, env = "ONPLUS_K_MAX")]
    pub k_max: usize,
    /// Largest ambient dimension N^n of the tensor backend.
    #[arg(long = "tensor-cap", global = true, default_value_t = 59_049, env = "ONPLUS_TENSOR_CAP")]
    pub tensor_cap: u64,
    /// Largest d_l d_k of a fusion decomposition.
    #[arg(long = "coupled-cap", global = true, default_value_t = 100_000, env = "ONPLUS_COUPLED_CAP")]
    pub coupled_cap: u64,
    /// Directory for report files.
    #[arg(long, global = true, default_value = "reports", env = "ONPLUS_OUT")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv, env = "ONPLUS_FORMAT")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct KeyArgs {
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Number of seeded random orthonormal pairs besides e1,e2.
    #[arg(long, default_value_t = 5)]
    pub random: usize,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Quantum dimension table with closed-form and trace checks.
    Dims {
        #[arg(long, default_value_t = 8)]
        max: usize,
    },
    /// Wenzl recursion forms and backend invariants.
    JwVerify {
        #[arg(long, default_value_t = 6)]
        max: usize,
        #[arg(long, default_value_t = 20)]
        vectors: usize,
    },
    /// Rotation trace formula, HS contraction and the trace-zero corollary.
    TraceRotation {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        a: usize,
        #[arg(long, default_value_t = 1)]
        c: usize,
    },
    /// Convergence of x_{a,b,c} to a scalar.
    PartialTrace {
        #[arg(long, default_value_t = 1)]
        a: usize,
        #[arg(long, default_value_t = 1)]
        c: usize,
    },
    /// Proportionality constants alpha_{p,q}^n.
    Alpha {
        /// Largest n for (p,q) in {(1,2),(2,1),(2,2)} and alpha_{0,q}.
        #[arg(long, default_value_t = 6)]
        max: usize,
        /// Largest n for alpha_{1,1}.
        #[arg(long = "max-11", default_value_t = 8)]
        max_11: usize,
    },
    /// Product of Jones-Wenzl projections: defect and cross terms.
    ProjectionDefect {
        #[arg(long, default_value_t = 1)]
        x: usize,
        #[arg(long, default_value_t = 1)]
        z: usize,
        /// Largest middle label y.
        #[arg(long, default_value_t = 5)]
        max: usize,
    },
    /// Scalars kappa of the cup intertwiners, for l = k <= l-max.
    Kappa {
        #[arg(long = "a-max", default_value_t = 2)]
        a_max: usize,
    },
    /// The two evaluation paths of S(l,l') and its decay.
    KeyEstimate(KeyArgs),
    /// Partial sums of |S(l,l')|^2.
    MixingSum(KeyArgs),
    /// Chebyshev partial sums of the spectral density.
    SpectralDensity {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Grid points per axis on [-2, 2].
        #[arg(long, default_value_t = 21)]
        grid: usize,
        /// Allowed factor on q for the increment ratio.
        #[arg(long, default_value_t = 1.2)]
        slack: f64,
    },
    /// Haar moments in the generators: Fourier model vs Weingarten oracle.
    HaarOracle {
        #[arg(long, default_value_t = 8)]
        max: usize,
    },
    /// The full acceptance suite.
    All,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Dims { .. } => "dims",
            Command::JwVerify { .. } => "jw-verify",
            Command::TraceRotation { .. } => "trace-rotation",
            Command::PartialTrace { .. } => "partial-trace",
            Command::Alpha { .. } => "alpha",
            Command::ProjectionDefect { .. } => "projection-defect",
            Command::Kappa { .. } => "kappa",
            Command::KeyEstimate(_) => "key-estimate",
            Command::MixingSum(_) => "mixing-sum",
            Command::SpectralDensity { .. } => "spectral-density",
            Command::HaarOracle { .. } => "haar-oracle",
            Command::All => "all",
        }
    }

    fn params(&self) -> Vec<(String, String)> {
        let kv = |k: &str, v: &dyn ToString| (k.to_string(), v.to_string());
        match self {
            Command::Dims { max } | Command::HaarOracle { max } => vec![kv("max", max)],
            Command::JwVerify { max, vectors } => vec![kv("max", max), kv("vectors", vectors)],
            Command::TraceRotation { trials, a, c } => vec![kv("trials", trials), kv("a", a), kv("c", c)],
            Command::PartialTrace { a, c } => vec![kv("a", a), kv("c", c)],
            Command::Alpha { max, max_11 } => vec![kv("max", max), kv("max_11", max_11)],
            Command::ProjectionDefect { x, z, max } => vec![kv("x", x), kv("z", z), kv("max", max)],
            Command::Kappa { a_max } => vec![kv("a_max", a_max)],
            Command::KeyEstimate(k) | Command::MixingSum(k) => {
                vec![kv("n", &k.n), kv("k", &k.k), kv("random", &k.random)]
            }
            Command::SpectralDensity { n, k, grid, slack } => {
                vec![kv("n", n), kv("k", k), kv("grid", grid), kv("slack", slack)]
            }
            Command::All => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub big_n: usize,
    pub backend: BackendChoice,
    pub tol: f64,
    pub seed: u64,
    pub caps: Caps,
    pub l_max: usize,
    pub b_max: usize,
    pub k_max: usize,
    pub out: PathBuf,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            big_n: 3,
            backend: BackendChoice::Coupled,
            tol: 1e-8,
            seed: 42,
            caps: Caps::default(),
            l_max: 6,
            b_max: 6,
            k_max: 5,
            out: PathBuf::from("reports"),
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn from_args(g: &GlobalArgs) -> RunConfig {
        RunConfig {
            big_n: g.big_n,
            backend: g.backend,
            tol: g.tol,
            seed: g.seed,
            caps: Caps { tensor_dim: g.tensor_cap as u128, coupled_dim: g.coupled_cap as u128, ..Caps::default() },
            l_max: g.l_max,
            b_max: g.b_max,
            k_max: g.k_max,
            out: g.out.clone(),
            format: g.format,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.big_n < 3 {
            return Err(CliError::Config(format!("N must be at least 3, got {}", self.big_n)));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-4) {
            return Err(CliError::Config(format!("tol must lie in (0, 1e-4], got {}", self.tol)));
        }
        if self.caps.tensor_dim == 0 || self.caps.coupled_dim == 0 {
            return Err(CliError::Config("caps must be positive".into()));
        }
        if self.l_max < 2 || self.b_max < 2 || self.k_max < 1 {
            return Err(CliError::Config("need l-max >= 2, b-max >= 2, k-max >= 1".into()));
        }
        Ok(())
    }

    /// Echo for reports; the output directory is left out so reports do not
    /// depend on where they are written.
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("N".into(), self.big_n.to_string()),
            ("backend".into(), self.backend.name().into()),
            ("tol".into(), format!("{:e}", self.tol)),
            ("seed".into(), self.seed.to_string()),
            ("tensor_cap".into(), self.caps.tensor_dim.to_string()),
            ("coupled_cap".into(), self.caps.coupled_dim.to_string()),
            ("l_max".into(), self.l_max.to_string()),
            ("b_max".into(), self.b_max.to_string()),
            ("k_max".into(), self.k_max.to_string()),
            ("format".into(), self.format.name().into()),
        ]
    }
}

/// Runs one subcommand and returns its report.
pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let bk = Backends::new(cfg)?;
    let mut r = match cmd {
        Command::Dims { max } => suite::dims(&[cfg.big_n], *max, cfg.caps)?,
        Command::JwVerify { max, vectors } => {
            let others: Vec<&dyn onplus::rep::RepBackend<f64>> = match cfg.backend {
                BackendChoice::Tensor => vec![],
                _ => vec![&bk.coupled],
            };
            suite::jw(&bk.tensor, &others, *max, *vectors, cfg.seed)?
        }
        Command::TraceRotation { trials, a, c } => {
            suite::on_backends(cfg, &bk, |b| suite::rotation(b, cfg.k_max, *trials, *a, *c, cfg.b_max, cfg.seed))?
        }
        Command::PartialTrace { a, c } => suite::on_backends(cfg, &bk, |b| suite::partial_trace(b, *a, *c, cfg.b_max))?,
        Command::Alpha { max, max_11 } => suite::on_backends(cfg, &bk, |b| suite::alpha(b, *max, *max_11, cfg.seed))?,
        Command::ProjectionDefect { x, z, max } => suite::on_backends(cfg, &bk, |b| suite::projection(b, *x, *z, *max))?,
        Command::Kappa { a_max } => suite::on_backends(cfg, &bk, |b| suite::kappa(&bk.tensor, b, *a_max, cfg.l_max))?,
        Command::KeyEstimate(k) => suite::on_backends(cfg, &bk, |b| {
            let runs = suite::key_runs(b, k.n, k.k, cfg.l_max, k.random, cfg.seed)?;
            Ok(suite::key_report(&runs, b.params().q()))
        })?,
        Command::MixingSum(k) => suite::on_backends(cfg, &bk, |b| {
            let runs = suite::key_runs(b, k.n, k.k, cfg.l_max, k.random, cfg.seed)?;
            Ok(suite::mixing_report(&runs, b.params().q()))
        })?,
        Command::SpectralDensity { n, k, grid, slack } => {
            suite::on_backends(cfg, &bk, |b| suite::spectral(b, *n, *k, cfg.l_max, *grid, *slack))?
        }
        Command::HaarOracle { max } => suite::on_backends(cfg, &bk, |b| suite::haar(b, *max, cfg.seed))?,
        Command::All => return Err(CliError::Config("use run_all for the full suite".into())),
    };
    r.config = cfg.echo();
    r.config.extend(cmd.params());
    Ok(r)
}

/// Verdict of one criterion of the full suite.
pub struct CriterionOutcome {
    pub id: usize,
    pub title: &'static str,
    pub report: Option<Report>,
    pub error: Option<CliError>,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn pass(&self) -> bool {
        self.error.is_none() && self.report.as_ref().is_some_and(Report::pass)
    }
}

/// Runs the selected criteria in order; errors are recorded, not propagated.
pub fn run_criteria(cfg: &RunConfig, ids: &[usize]) -> Result<Vec<CriterionOutcome>, CliError> {
    cfg.validate()?;
    let suite = Suite::new(cfg.clone())?;
    let mut out = Vec::new();
    for &id in ids {
        let t = Instant::now();
        let res = suite.run(id);
        let seconds = t.elapsed().as_secs_f64();
        let title = CRITERIA[id - 1].title;
        let (report, error) = match res {
            Ok(mut r) => {
                r.config = cfg.echo();
                (Some(r), None)
            }
            Err(e) => (None, Some(e)),
        };
        out.push(CriterionOutcome { id, title, report, error, seconds });
    }
    Ok(out)
}

pub fn summary_report(outcomes: &[CriterionOutcome], cfg: &RunConfig) -> Report {
    let mut t = Table::new("criteria", 1, &["criterion", "title", "pass", "failing"], false);
    let mut r = Report::new("summary");
    for o in outcomes {
        let failing = match (&o.report, &o.error) {
            (_, Some(e)) => e.to_string(),
            (Some(rep), None) => rep.failing().iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join("; "),
            (None, None) => String::new(),
        };
        t.push(vec![o.id.into(), o.title.into(), o.pass().into(), Cell::Text(failing.clone())]);
        r.checks.push(onplus::estimates::Check::new(
            &format!("criterion {}: {}", o.id, o.title),
            o.pass(),
            if failing.is_empty() { "all assertions pass".into() } else { format!("failing: {failing}") },
        ));
    }
    r.tables.push(t);
    r.config = cfg.echo();
    r
}

fn emit(out: &mut impl Write, s: &str) {
    let _ = out.write_all(s.as_bytes());
}

/// Parses `args`, runs, writes reports and returns the exit code.
pub fn main_with<I, S>(args: I, stdout: &mut impl Write, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                emit(stdout, &rendered);
            } else {
                emit(stderr, &rendered);
            }
            return code;
        }
    };
    let cfg = RunConfig::from_args(&cli.global);
    if let Err(e) = cfg.validate() {
        emit(stderr, &format!("{e}\n"));
        return e.exit_code();
    }
    let start = Instant::now();
    let code = match &cli.command {
        Command::All => run_all(&cfg, stdout, stderr),
        cmd => match execute(cmd, &cfg) {
            Ok(r) => finish(&r, &cfg, stdout, stderr),
            Err(e) => {
                emit(stderr, &format!("{}: {e}\n", cmd.name()));
                e.exit_code()
            }
        },
    };
    emit(stderr, &format!("elapsed {:.2} s\n", start.elapsed().as_secs_f64()));
    code
}

fn finish(r: &Report, cfg: &RunConfig, stdout: &mut impl Write, stderr: &mut impl Write) -> i32 {
    emit(stdout, &render_checks(r));
    if let Err(e) = write_report(r, cfg.format, &cfg.out) {
        emit(stderr, &format!("{e}\n"));
        return e.exit_code();
    }
    if r.pass() {
        emit(stdout, &format!("{}: PASS\n", r.command));
        0
    } else {
        let names: Vec<&str> = r.failing().iter().map(|c| c.name.as_str()).collect();
        emit(stdout, &format!("{}: FAIL ({})\n", r.command, names.join("; ")));
        emit(stderr, &format!("failing invariant: {}\n", names.join("; ")));
        1
    }
}

fn run_all(cfg: &RunConfig, stdout: &mut impl Write, stderr: &mut impl Write) -> i32 {
    let ids: Vec<usize> = CRITERIA.iter().map(|c| c.id).collect();
    let outcomes = match run_criteria(cfg, &ids) {
        Ok(o) => o,
        Err(e) => {
            emit(stderr, &format!("{e}\n"));
            return e.exit_code();
        }
    };
    let mut io_error = None;
    for o in &outcomes {
        emit(stderr, &format!("criterion {} took {:.2} s\n", o.id, o.seconds));
        emit(stdout, &format!("== criterion {}: {}\n", o.id, o.title));
        if let Some(r) = &o.report {
            emit(stdout, &render_checks(r));
            if let Err(e) = write_report(r, cfg.format, &cfg.out) {
                io_error.get_or_insert(e);
            }
        }
        if let Some(e) = &o.error {
            emit(stdout, &format!("[FAIL] {e}\n"));
        }
    }
    let summary = summary_report(&outcomes, cfg);
    if let Err(e) = write_report(&summary, cfg.format, &cfg.out) {
        io_error.get_or_insert(e);
    }
    for o in &outcomes {
        emit(stdout, &format!("criterion {:>2} {} {}\n", o.id, if o.pass() { "PASS" } else { "FAIL" }, o.title));
    }
    if let Some(e) = io_error {
        emit(stderr, &format!("{e}\n"));
        return e.exit_code();
    }
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass()).map(|o| format!("criterion {}", o.id)).collect();
    if outcomes.iter().any(|o| matches!(o.error, Some(CliError::Cap(_)))) {
        emit(stderr, "cap exhausted in at least one criterion\n");
        3
    } else if failed.is_empty() {
        0
    } else {
        emit(stderr, &format!("failing: {}\n", failed.join(", ")));
        1
    }
}
