//! Command-line front end: configuration files, subcommands and reports.

pub mod config;
pub mod error;
pub mod report;
pub mod tables;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use branchpde::analysis::{supersolution_radius, threshold_report, CubeFamily, DeltaMethod};
use branchpde::{
    admissible_radius, estimate_gradient_1d, estimate_value, extinction_radius, run_kernel_suite,
    Registry,
};
use clap::{Parser, Subcommand};

pub use config::{Format, RunConfig};
pub use error::{CliError, CliResult};
use report::{Report, Row};

#[derive(Debug, Parser)]
#[command(
    name = "branchpde",
    version,
    about = "Branching Monte Carlo solver for semi-linear elliptic PDEs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Falls back to BRANCHPDE_SEED, then to the config, then to 0.
    #[arg(long, global = true, env = "BRANCHPDE_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Overrides the sample count of the config or table.
    #[arg(long, global = true)]
    pub samples: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate u at every configured point.
    Solve,
    /// Estimate u' at every configured point (d = 1).
    Gradient,
    /// Validity thresholds for the configured problem.
    Analyze,
    /// Reproduce a named benchmark table.
    Table {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(tables::TABLE_NAMES))]
        name: String,
    },
    /// Deterministic and statistical checks of the exit-time samplers.
    KernelTest,
}

/// Parses `argv` and runs; returns the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Invalid("--threads must be positive".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
        return pool.install(|| dispatch(cli));
    }
    dispatch(cli)
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Table { name } => {
            let def = tables::table(name)
                .ok_or_else(|| CliError::Invalid(format!("unknown table `{name}`")))?;
            check_samples(cli.samples)?;
            let seed = cli.seed.unwrap_or(0);
            let report = def.run(cli.samples, seed)?;
            let format = cli.format.unwrap_or_default();
            write_out(cli.out.as_deref(), |w| report::emit(&report, format, w))
        }
        Command::KernelTest => {
            check_samples(cli.samples)?;
            let seed = cli.seed.unwrap_or(0);
            let checks = run_kernel_suite(seed, cli.samples.unwrap_or(200_000))?;
            let pairs: Vec<(String, String)> = checks
                .iter()
                .map(|c| {
                    (
                        c.name.to_string(),
                        format!("{} ({})", if c.passed { "PASS" } else { "FAIL" }, c.detail),
                    )
                })
                .collect();
            let format = cli.format.unwrap_or_default();
            write_out(cli.out.as_deref(), |w| {
                report::emit_pairs("Kernel checks", &pairs, format, w)
            })?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::KernelChecks(failed));
            }
            Ok(())
        }
        cmd => {
            let path = cli
                .config
                .as_deref()
                .ok_or_else(|| CliError::Invalid("--config FILE is required".into()))?;
            let mut cfg = RunConfig::load(path)?;
            if let Some(n) = cli.samples {
                cfg.run.n = n;
                cfg = RunConfig::parse(&cfg.to_toml()?)?;
            }
            let seed = cli.seed.or(cfg.run.seed).unwrap_or(0);
            let format = cli.format.or(cfg.run.format).unwrap_or_default();
            let out = cli
                .out
                .clone()
                .or_else(|| cfg.run.output.as_ref().map(PathBuf::from));
            let registry = Registry::new();
            match cmd {
                Command::Solve | Command::Gradient => {
                    let report = solve(&cfg, &registry, seed, matches!(cmd, Command::Gradient))?;
                    write_out(out.as_deref(), |w| report::emit(&report, format, w))
                }
                Command::Analyze => {
                    let pairs = analyze(&cfg, &registry, seed)?;
                    write_out(out.as_deref(), |w| {
                        report::emit_pairs("Threshold analysis", &pairs, format, w)
                    })
                }
                Command::Table { .. } | Command::KernelTest => unreachable!(),
            }
        }
    }
}

fn check_samples(n: Option<u64>) -> CliResult<()> {
    match n {
        Some(n) if n < 2 => Err(CliError::Invalid(format!(
            "--samples must be at least 2, got {n}"
        ))),
        _ => Ok(()),
    }
}

fn write_out<F>(path: Option<&Path>, f: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> CliResult<()>,
{
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| CliError::io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}

/// Value or gradient rows for every configured point.
pub fn solve(cfg: &RunConfig, registry: &Registry, seed: u64, gradient: bool) -> CliResult<Report> {
    let spec = cfg.spec(registry)?;
    let mut rows = Vec::new();
    for x in cfg.points() {
        let (res, exact) = if gradient {
            let res = estimate_gradient_1d(&spec, &x, cfg.run.n, seed)?;
            (res, spec.exact.as_ref().and_then(|f| f.partial(&x, 0)))
        } else {
            let res = estimate_value(&spec, &x, cfg.run.n, seed)?;
            (res, spec.exact.as_ref().map(|f| f.eval(&x)))
        };
        rows.push(Row::new(&x, &res, exact, seed));
    }
    let what = if gradient { "gradient" } else { "solution" };
    Ok(Report {
        title: format!("Estimated {what}"),
        rows,
        seed,
        notes: Vec::new(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "--".into())
}

/// Threshold report at the configured domain, plus radius searches when
/// the analysis section asks for them.
pub fn analyze(
    cfg: &RunConfig,
    registry: &Registry,
    seed: u64,
) -> CliResult<Vec<(String, String)>> {
    let spec = cfg.spec(registry)?;
    let q = cfg.run.q;
    let analysis = cfg.analysis.clone();
    let delta_samples = analysis
        .as_ref()
        .map(|a| a.delta_samples)
        .unwrap_or(200_000);
    let method = if spec.dim() == 1 {
        DeltaMethod::Exact
    } else {
        DeltaMethod::MonteCarlo {
            samples: delta_samples,
            seed,
        }
    };
    let rep = threshold_report(&spec, q, &method)?;
    let mut pairs = vec![
        ("q".to_string(), q.to_string()),
        ("lambda1".into(), rep.lambda1.to_string()),
        (
            "extinction_margin".into(),
            rep.extinction_margin.to_string(),
        ),
        ("delta".into(), rep.delta.to_string()),
        ("delta_std_error".into(), rep.delta_std_error.to_string()),
        ("dominating_mean".into(), rep.dominating_mean.to_string()),
        ("gamma".into(), fmt_opt(rep.gamma)),
        ("s_star".into(), fmt_opt(rep.s_star)),
        ("c0".into(), rep.c0.to_string()),
        ("admissible".into(), rep.admissible.to_string()),
    ];
    if let Some(d) = cfg.domain.dim.filter(|_| cfg.cube_radius().is_some()) {
        pairs.push((
            "extinction_radius".into(),
            fmt_opt(extinction_radius(spec.beta, &spec.terms, d)),
        ));
    }
    let Some(a) = analysis else { return Ok(pairs) };
    let d = cfg.domain.dim;
    if let (Some(lo), Some(hi)) = (a.r_lo, a.r_hi) {
        let d = d.ok_or_else(|| CliError::Invalid("radius search needs `domain.dim`".into()))?;
        let build = |r: f64| cfg.spec_with_radius(r, registry).map_err(to_core);
        let family = CubeFamily::new(d, build, a.delta_samples, seed)?;
        let r = admissible_radius(&family, q, lo, hi, a.tol)?;
        pairs.push(("admissible_radius".into(), r.to_string()));
        if let Some(v) = &a.supersolution {
            let rect = cfg.rect()?;
            let v = registry.resolve(v, &rect)?;
            let build = |r: f64| cfg.spec_with_radius(r, registry).map_err(to_core);
            let r = supersolution_radius(build, &v, q, 400, lo, hi, a.tol)?;
            pairs.push(("supersolution_radius".into(), r.to_string()));
        }
    }
    Ok(pairs)
}

fn to_core(e: CliError) -> branchpde::Error {
    match e {
        CliError::Core(e) => e,
        other => branchpde::Error::InvalidSpec(other.to_string()),
    }
}
